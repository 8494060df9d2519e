use super::{flow_multigrid, gmres, SolverConfig};
use crate::error::{Error, Result};
use crate::fem::{FeProblem, State};
use crate::sparse::norm2;

/// Convergence record of one nonlinear solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    /// Residual norm before the first and after every iteration.
    pub residuals: Vec<f64>,
    pub gmres_iterations: Vec<usize>,
    pub step_lengths: Vec<f64>,
}

impl NewtonReport {
    pub fn iterations(&self) -> usize {
        self.gmres_iterations.len()
    }
}

/// Solves `A(x) = rhs` starting from `x`, whose prescribed velocities should
/// already carry the boundary data of the new time level.
pub fn newton_solve(
    problem: &FeProblem,
    mut x: State,
    rhs: &[f64],
    cfg: &SolverConfig,
) -> Result<(State, NewtonReport)> {
    let mut report = NewtonReport::default();
    let mut r = problem.assemble_residual(&x, rhs)?;
    let mut norm = norm2(&r);
    report.residuals.push(norm);
    let gcfg = cfg.gmres();
    while norm >= cfg.newton_tol {
        if report.iterations() == cfg.newton_max_iter || !norm.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: report.iterations(),
                last: norm,
                history: report.residuals,
            });
        }
        let mg = flow_multigrid(problem, &x, cfg)?;
        let jac = &mg.levels[mg.num_levels() - 1].matrix;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let lin = gmres(jac, &neg, |v, z| mg.apply(v, z), &gcfg)?;
        report.gmres_iterations.push(lin.iterations);

        let mut eps = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = x.clone();
            for (t, w) in trial.x.iter_mut().zip(&lin.x) {
                *t += eps * w;
            }
            let rt = problem.assemble_residual(&trial, rhs)?;
            let nt = norm2(&rt);
            if nt < norm || halvings == cfg.line_search_halvings {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            eps *= 0.5;
            halvings += 1;
        }
        report.step_lengths.push(eps);
        report.residuals.push(norm);
    }
    Ok((x, report))
}
