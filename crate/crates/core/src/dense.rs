//! Small dense LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is declared singular.
const SINGULAR_RTOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n × n` matrix `a` in place.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = if scale > 0.0 { scale * SINGULAR_RTOL } else { f64::MIN_POSITIVE };
        let mut piv = vec![0; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny || !best.is_finite() {
                return Err(Error::Singular { column: k });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let inv = 1.0 / a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] * inv;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                let (upper, lower) = a.split_at_mut(i * n);
                let krow = &upper[k * n + k + 1..k * n + n];
                let irow = &mut lower[k + 1..n];
                for (x, y) in irow.iter_mut().zip(krow) {
                    *x -= f * y;
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let a = &self.lu;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
        for i in 1..n {
            let row = &a[i * n..i * n + i];
            let mut s = b[i];
            for (l, bj) in row.iter().zip(&b[..i]) {
                s -= l * bj;
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let row = &a[i * n + i + 1..i * n + n];
            let mut s = b[i];
            for (u, bj) in row.iter().zip(&b[i + 1..]) {
                s -= u * bj;
            }
            b[i] = s / a[i * n + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[0, 2], [3, 1]] x = [4, 5] -> x = [1, 2]
        let lu = DenseLu::factor(2, vec![0.0, 2.0, 3.0, 1.0]).unwrap();
        let mut b = [4.0, 5.0];
        lu.solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-15 && (b[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn detects_singular() {
        let err = DenseLu::factor(2, vec![1.0, 2.0, 2.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::Singular { column: 1 }));
    }
}
