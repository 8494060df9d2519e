//! Simulation drivers shared by the command-line tool and the test suite.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::dnnmg::DnnMg;
use crate::error::{Error, Result};
use crate::fem::{FeProblem, State};
use crate::mesh::vtk::{write_fields, PointField};
use crate::metrics::{divergence_norm, drag_lift, ForceMethod, FunctionalSeries};
use crate::neural::Network;
use crate::solver::{NewtonReport, SolverConfig, TimeStepper};

/// Where and how often field snapshots are written.
#[derive(Clone, Debug, Default)]
pub struct Snapshots {
    pub dir: Option<PathBuf>,
    /// Steps between snapshots; 0 disables them.
    pub every: usize,
}

impl Snapshots {
    fn due(&self, step: usize) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        (self.every > 0 && step % self.every == 0).then(|| dir.join(format!("step_{step:05}.vtk")))
    }
}

/// Functionals and timings of one run.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    /// Functionals of the reported solution: the solved level for
    /// single-level runs, the (corrected) fine level for DNN-MG runs.
    pub series: FunctionalSeries,
    /// DNN-MG runs only: functionals of the coarse solution itself.
    pub coarse_series: Option<FunctionalSeries>,
    /// `‖d‖` per step, zero for steps without a correction.
    pub correction_norms: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    pub seconds: f64,
}

impl RunOutput {
    /// Largest Newton iteration count among steps ending after `t`.
    pub fn max_newton_after(&self, t: f64) -> usize {
        self.series
            .times
            .iter()
            .zip(&self.newton_iterations)
            .filter(|(s, _)| **s > t)
            .map(|(_, n)| *n)
            .max()
            .unwrap_or(0)
    }

    /// Mean `‖d‖` over the corrected steps.
    pub fn mean_correction_norm(&self) -> f64 {
        let active: Vec<f64> = self.correction_norms.iter().copied().filter(|v| *v > 0.0).collect();
        if active.is_empty() {
            return 0.0;
        }
        active.iter().sum::<f64>() / active.len() as f64
    }
}

fn functionals(problem: &FeProblem, x: &State, prev: &State) -> Result<(f64, f64, f64)> {
    let (d, l) = drag_lift(problem, x, Some(prev), ForceMethod::Residual)?;
    let div = divergence_norm(problem.level(x.level), x.velocity(), true)?;
    Ok((d, l, div))
}

fn snapshot(problem: &FeProblem, x: &State, path: &Path) -> Result<()> {
    let m = problem.level(x.level);
    let speed: Vec<f64> = x.vx().iter().zip(x.vy()).map(|(a, b)| a.hypot(*b)).collect();
    write_fields(
        m,
        path,
        &format!("t = {}", x.t),
        &[
            PointField::Vector("velocity", x.vx(), x.vy()),
            PointField::Scalar("pressure", x.p()),
            PointField::Scalar("speed", &speed),
        ],
    )
}

/// Plain multigrid time stepping on one level of `problem`.
pub fn simulate_level(
    problem: &FeProblem,
    level: usize,
    cfg: SolverConfig,
    steps: usize,
    snaps: &Snapshots,
    mut on_step: impl FnMut(usize, &State, &NewtonReport),
) -> Result<RunOutput> {
    let clock = Instant::now();
    let mut out = RunOutput::default();
    let mut ts = TimeStepper::new(problem, level, cfg);
    for n in 1..=steps {
        let prev = ts.state.clone();
        let report = ts.step()?;
        let (d, l, div) = functionals(problem, &ts.state, &prev)?;
        out.series.push(ts.state.t, d, l, div);
        out.newton_iterations.push(report.iterations());
        out.correction_norms.push(0.0);
        if let Some(p) = snaps.due(n) {
            snapshot(problem, &ts.state, &p)?;
        }
        on_step(n, &ts.state, &report);
    }
    out.seconds = clock.elapsed().as_secs_f64();
    Ok(out)
}

/// DNN-MG time stepping; `net = None` is the plain coarse solver. Functionals
/// are recorded for the fine-level solution and for the coarse solution.
pub fn simulate_dnnmg(
    problem: &FeProblem,
    cfg: SolverConfig,
    net: Option<Network>,
    start_time: f64,
    steps: usize,
    snaps: &Snapshots,
) -> Result<RunOutput> {
    let clock = Instant::now();
    let mut dm = DnnMg::new(problem, cfg, net)?;
    dm.start_time = start_time;
    let mut out = RunOutput { coarse_series: Some(FunctionalSeries::default()), ..Default::default() };
    let mut prev_fine = dm.fine_state()?;
    for n in 1..=steps {
        let prev = dm.state().clone();
        let info = dm.step()?;
        let fine = dm.fine_state()?;
        let (d, l, div) = functionals(problem, &fine, &prev_fine)?;
        out.series.push(fine.t, d, l, div);
        let (d, l, div) = functionals(problem, dm.state(), &prev)?;
        out.coarse_series.as_mut().expect("set above").push(fine.t, d, l, div);
        out.newton_iterations.push(info.newton.iterations());
        out.correction_norms.push(info.correction_norm);
        if let Some(p) = snaps.due(n) {
            snapshot(problem, &fine, &p)?;
        }
        prev_fine = fine;
    }
    out.seconds = clock.elapsed().as_secs_f64();
    Ok(out)
}

/// Loads a checkpoint holding a network of the given mode.
pub fn load_network(path: Option<&Path>, mode: crate::neural::OutputMode) -> Result<Network> {
    let path = path.ok_or_else(|| Error::Config("a network variant needs a checkpoint".into()))?;
    if !path.exists() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
    }
    let net = crate::neural::checkpoint::load(path)?;
    if net.mode != mode {
        return Err(Error::Config(format!(
            "checkpoint {} holds a {:?} network, expected {mode:?}",
            path.display(),
            net.mode
        )));
    }
    Ok(net)
}
