//! Banded LU factorization with partial pivoting of a symmetrically permuted
//! sparse matrix. Used for the coarsest-level solve and for mass-matrix
//! projections, where a coordinate-sorted ordering gives a narrow band.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const SINGULAR_RTOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    /// Row `i` stores columns `i - kl .. i - kl + width`.
    band: Vec<f64>,
    piv: Vec<usize>,
    /// `perm[new] = old`.
    perm: Vec<usize>,
}

impl BandLu {
    /// Factors `P A Pᵀ` where `perm[new] = old`. `None` keeps the natural order.
    pub fn factor(a: &CsrMatrix, perm: Option<Vec<usize>>) -> Result<Self> {
        let n = a.nrows;
        if a.ncols != n {
            return Err(Error::dim("band LU needs a square matrix", n, a.ncols));
        }
        let perm = perm.unwrap_or_else(|| (0..n).collect());
        if perm.len() != n {
            return Err(Error::dim("band LU permutation", n, perm.len()));
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        let mut scale = 0.0f64;
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
                scale = scale.max(v.abs());
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                band[i * width + (j + kl - i)] += v;
            }
        }

        let tiny = if scale > 0.0 { scale * SINGULAR_RTOL } else { f64::MIN_POSITIVE };
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[k * width + kl].abs();
            for i in k + 1..=last {
                let v = band[i * width + (k + kl - i)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny || !best.is_finite() {
                return Err(Error::Singular { column: perm[k] });
            }
            piv[k] = p;
            // Active columns of step k.
            let cend = (k + kl + ku).min(n - 1);
            let len = cend - k + 1;
            if p != k {
                for c in 0..len {
                    band.swap(k * width + kl + c, p * width + (k + kl - p) + c);
                }
            }
            let pivot = band[k * width + kl];
            let inv_pivot = 1.0 / pivot;
            for i in k + 1..=last {
                let off = k + kl - i;
                let f = band[i * width + off] * inv_pivot;
                band[i * width + off] = f;
                if f == 0.0 {
                    continue;
                }
                let (upper, lower) = band.split_at_mut(i * width);
                let krow = &upper[k * width + kl + 1..k * width + kl + len];
                let irow = &mut lower[off + 1..off + len];
                for (x, y) in irow.iter_mut().zip(krow) {
                    *x -= f * y;
                }
            }
        }
        Ok(Self { n, kl, width, band, piv, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.width - 2 * self.kl - 1)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (kl, w) = (self.kl, self.width);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    y[i] -= self.band[i * w + (k + kl - i)] * yk;
                }
            }
        }
        for i in (0..n).rev() {
            let row = &self.band[i * w..(i + 1) * w];
            let cend = (i + w - 1 - kl).min(n - 1);
            let mut s = y[i];
            for j in i + 1..=cend {
                s -= row[j + kl - i] * y[j];
            }
            y[i] = s / row[kl];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
