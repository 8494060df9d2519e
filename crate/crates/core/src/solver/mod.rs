//! Nonlinear and linear solvers: Newton's method with a halving line search,
//! restarted GMRES, and a geometric multigrid preconditioner with Vanka
//! smoothing and a banded direct solve on the coarsest level.

mod gmres;
mod multigrid;
mod newton;
mod timestep;
mod vanka;

pub use gmres::{gmres, GmresConfig, GmresReport};
pub use multigrid::{coarse_direct_solve, flow_multigrid, interleaved_permutation, vanka_blocks, MgLevel, Multigrid};
pub use newton::{newton_solve, NewtonReport};
pub use timestep::TimeStepper;
pub use vanka::Vanka;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Euclidean norm of the nonlinear residual at which Newton stops.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub line_search_halvings: usize,
    /// Relative GMRES tolerance per Newton step.
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    pub mg_pre_smooth: usize,
    pub mg_post_smooth: usize,
    pub vanka_damping: f64,
    /// Level on which the direct solver runs.
    pub coarse_level: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-8,
            newton_max_iter: 12,
            line_search_halvings: 5,
            gmres_tol: 1e-4,
            gmres_restart: 50,
            gmres_max_iter: 500,
            mg_pre_smooth: 4,
            mg_post_smooth: 4,
            vanka_damping: 0.8,
            coarse_level: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.newton_tol, self.gmres_tol];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if !(self.vanka_damping > 0.0 && self.vanka_damping <= 1.0) {
            return Err(Error::Config(format!("vanka_damping must lie in (0, 1], got {}", self.vanka_damping)));
        }
        if self.gmres_restart == 0 || self.newton_max_iter == 0 {
            return Err(Error::Config("restart length and Newton iterations must be nonzero".into()));
        }
        Ok(())
    }

    pub(crate) fn gmres(&self) -> GmresConfig {
        GmresConfig {
            tol: self.gmres_tol,
            abs_tol: 0.1 * self.newton_tol,
            restart: self.gmres_restart,
            max_iter: self.gmres_max_iter,
        }
    }
}
