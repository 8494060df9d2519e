use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// In-place LU with partial pivoting of a small row-major block.
#[derive(Clone, Debug)]
struct LocalLu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<u8>,
}

impl LocalLu {
    fn factor(n: usize, mut a: Vec<f64>) -> Option<Self> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0u8; n];
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i * n + k].abs() > a[p * n + k].abs() {
                    p = i;
                }
            }
            if !(a[p * n + k].abs() > 1e-14 * scale) {
                return None;
            }
            piv[k] = p as u8;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let inv = 1.0 / a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] * inv;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Some(Self { n, a, piv })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k] as usize);
        }
        for i in 1..n {
            let row = &self.a[i * n..i * n + i];
            b[i] -= row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum::<f64>();
        }
        for i in (0..n).rev() {
            let row = &self.a[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&b[i + 1..]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / row[i];
        }
    }
}

/// Multiplicative block relaxation: every block of unknowns (for the flow
/// problem, all velocity and pressure unknowns of one element) is solved
/// exactly against the current residual, and the update is damped by `ω`.
#[derive(Clone, Debug)]
pub struct Vanka {
    block: usize,
    /// Blocks in sweep order, `block` unknowns each.
    dofs: Vec<u32>,
    lu: Vec<LocalLu>,
    pub damping: f64,
}

impl Vanka {
    /// Extracts and factors the diagonal blocks of `a`. `dofs` lists the blocks
    /// (of `block` unknowns each) in the order they are visited by a sweep.
    pub fn new(a: &CsrMatrix, block: usize, dofs: Vec<u32>, damping: f64) -> Result<Self> {
        if block == 0 || dofs.len() % block != 0 || block > 255 {
            return Err(Error::dim("Vanka block list", block, dofs.len()));
        }
        let mut mark = vec![u32::MAX; a.ncols];
        let mut lu = Vec::with_capacity(dofs.len() / block);
        for (b, blk) in dofs.chunks_exact(block).enumerate() {
            for (k, &d) in blk.iter().enumerate() {
                mark[d as usize] = k as u32;
            }
            let mut local = vec![0.0; block * block];
            for (r, &d) in blk.iter().enumerate() {
                let (cols, vals) = a.row(d as usize);
                for (&c, &v) in cols.iter().zip(vals) {
                    let k = mark[c];
                    if k != u32::MAX {
                        local[r * block + k as usize] = v;
                    }
                }
            }
            for &d in blk {
                mark[d as usize] = u32::MAX;
            }
            lu.push(LocalLu::factor(block, local).ok_or(Error::Singular { column: b })?);
        }
        Ok(Self { block, dofs, lu, damping })
    }

    pub fn num_blocks(&self) -> usize {
        self.lu.len()
    }

    /// Performs `sweeps` passes over all blocks, updating `x` in place.
    pub fn smooth(&self, a: &CsrMatrix, b: &[f64], x: &mut [f64], sweeps: usize) {
        let mut r = vec![0.0; self.block];
        for _ in 0..sweeps {
            for (blk, lu) in self.dofs.chunks_exact(self.block).zip(&self.lu) {
                for (ri, &d) in r.iter_mut().zip(blk) {
                    let d = d as usize;
                    let (cols, vals) = a.row(d);
                    let ax: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
                    *ri = b[d] - ax;
                }
                lu.solve(&mut r);
                for (ri, &d) in r.iter().zip(blk) {
                    x[d as usize] += self.damping * ri;
                }
            }
        }
    }
}
