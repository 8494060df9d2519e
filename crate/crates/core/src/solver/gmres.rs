use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

/// Stopping rules of [`gmres`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresConfig {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    /// Absolute residual below which iteration stops regardless of `tol`.
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { tol: 1e-4, abs_tol: 0.0, restart: 50, max_iter: 500 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GmresReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Residual norm after every iteration, starting with the initial one.
    pub history: Vec<f64>,
}

/// Restarted GMRES with right preconditioning, `A M⁻¹ u = b`, `x = M⁻¹ u`.
///
/// The preconditioned directions are stored, so `precond` may vary slightly
/// between calls. The reported residuals are those of the unpreconditioned
/// system.
pub fn gmres<P>(a: &CsrMatrix, b: &[f64], mut precond: P, cfg: &GmresConfig) -> Result<GmresReport>
where
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = a.nrows;
    if b.len() != n || a.ncols != n {
        return Err(Error::dim("gmres right-hand side", n, b.len()));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GmresReport { x, iterations: 0, history: vec![0.0] });
    }
    let target = (cfg.tol * bnorm).max(cfg.abs_tol);
    let m = cfg.restart.max(1);
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut history = vec![beta];
    let mut iterations = 0;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut h = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
    let mut w = vec![0.0; n];

    while beta > target {
        let cycle_start = beta;
        v.clear();
        z.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < cfg.max_iter {
            let mut zk = vec![0.0; n];
            precond(&v[k], &mut zk)?;
            a.matvec(&zk, &mut w);
            z.push(zk);
            // modified Gram–Schmidt
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                axpy(&mut w, -hik, vi);
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            if rho == 0.0 {
                break;
            }
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            history.push(g[k].abs());
            if g[k].abs() <= target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            axpy(&mut x, *yi, zi);
        }
        a.residual(b, &x, &mut r);
        beta = norm2(&r);
        if let Some(last) = history.last_mut() {
            *last = beta;
        }
        if beta <= target {
            break;
        }
        if iterations >= cfg.max_iter || beta > 0.999 * cycle_start {
            return Err(Error::GmresStagnation { iterations, relative_residual: beta / bnorm, history });
        }
    }
    Ok(GmresReport { x, iterations, history })
}
