use super::{newton_solve, NewtonReport, SolverConfig};
use crate::error::Result;
use crate::fem::{FeProblem, State};

/// Crank–Nicolson time stepping on one level, starting from rest.
#[derive(Debug)]
pub struct TimeStepper<'a> {
    pub problem: &'a FeProblem,
    pub cfg: SolverConfig,
    pub state: State,
    pub step_index: usize,
}

impl<'a> TimeStepper<'a> {
    pub fn new(problem: &'a FeProblem, level: usize, cfg: SolverConfig) -> Self {
        let mut state = State::zeros(problem, level, 0.0);
        problem.apply_dirichlet(&mut state, 0.0);
        Self { problem, cfg, state, step_index: 0 }
    }

    pub fn next_time(&self) -> f64 {
        (self.step_index + 1) as f64 * self.problem.params().timestep
    }

    /// Right-hand side of the next step built from the current state.
    pub fn rhs(&self) -> Result<Vec<f64>> {
        self.problem.assemble_rhs(&self.state, self.next_time())
    }

    /// Advances one step with the standard right-hand side.
    pub fn step(&mut self) -> Result<NewtonReport> {
        let rhs = self.rhs()?;
        self.step_with_rhs(&rhs)
    }

    /// Advances one step solving `A(x) = rhs` for a given right-hand side.
    pub fn step_with_rhs(&mut self, rhs: &[f64]) -> Result<NewtonReport> {
        let t = self.next_time();
        let mut x0 = self.state.clone();
        x0.t = t;
        self.problem.apply_dirichlet(&mut x0, t);
        let (x, report) = newton_solve(self.problem, x0, rhs, &self.cfg)?;
        self.state = x;
        self.step_index += 1;
        Ok(report)
    }
}
