//! Run configuration: a flat TOML file with one table per concern. Every
//! key is optional; the defaults describe the test channel at Re = 133.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dnnmg::{Scenario, TargetStep, TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::neural::{AdamConfig, LossKind};
use crate::solver::SolverConfig;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// `train` or `test`; selects the obstacle position.
    pub obstacle: String,
    pub reynolds: f64,
    pub timestep: f64,
    pub end_time: f64,
    pub levels: usize,
    pub h0: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::test();
        Self {
            obstacle: "test".into(),
            reynolds: s.reynolds,
            timestep: s.timestep,
            end_time: 10.0,
            levels: s.levels,
            h0: s.h0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub smoothing_steps: usize,
    pub vanka_damping: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            newton_tol: c.newton_tol,
            newton_max_iter: c.newton_max_iter,
            gmres_tol: c.gmres_tol,
            gmres_restart: c.gmres_restart,
            smoothing_steps: c.mg_pre_smooth,
            vanka_damping: c.vanka_damping,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DnnMgSection {
    pub variant: String,
    pub gamma: f64,
    pub checkpoint: Option<PathBuf>,
    /// The network is switched on for steps ending after this time.
    pub start_time: f64,
}

impl Default for DnnMgSection {
    fn default() -> Self {
        Self { variant: "off".into(), gamma: 1e-3, checkpoint: None, start_time: 5.0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Obstacle position of the run that produces the training data.
    pub obstacle: String,
    pub dataset: PathBuf,
    pub total_steps: usize,
    pub record_steps: usize,
    pub epochs: usize,
    pub window: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// `same` or `next`.
    pub target: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            obstacle: "train".into(),
            dataset: "dataset".into(),
            total_steps: 1000,
            record_steps: 200,
            epochs: 50,
            window: t.window,
            batch: t.batch,
            learning_rate: t.adam.lr,
            target: "same".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Steps between VTK snapshots; 0 disables them.
    pub vtk_every: usize,
    /// Start of the window for oscillation statistics.
    pub stats_from: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), vtk_every: 25, stats_from: 8.0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Functional series of the fine reference run.
    pub reference: Option<PathBuf>,
    pub variants: Vec<String>,
    /// Holds `<variant>.bin` for every network variant.
    pub checkpoint_dir: PathBuf,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            reference: None,
            variants: Variant::ALL.iter().map(|v| v.name().to_string()).collect(),
            checkpoint_dir: "checkpoints".into(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub solver: SolverSection,
    pub dnnmg: DnnMgSection,
    pub train: TrainSection,
    pub output: OutputSection,
    pub evaluate: EvaluateSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Scenario of simulation and evaluation runs.
    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario_at(&self.scenario.obstacle)
    }

    /// Scenario of the training-data run.
    pub fn train_scenario(&self) -> Result<Scenario> {
        self.scenario_at(&self.train.obstacle)
    }

    fn scenario_at(&self, obstacle: &str) -> Result<Scenario> {
        let s = &self.scenario;
        let base = match obstacle {
            "train" => Scenario::train(),
            "test" => Scenario::test(),
            other => return Err(Error::Config(format!("obstacle must be `train` or `test`, got `{other}`"))),
        };
        if !(s.reynolds > 0.0 && s.timestep > 0.0 && s.end_time > 0.0 && s.h0 > 0.0) {
            return Err(Error::Config("reynolds, timestep, end_time and h0 must be positive".into()));
        }
        Ok(Scenario { reynolds: s.reynolds, timestep: s.timestep, levels: s.levels, h0: s.h0, ..base })
    }

    /// Number of time steps to reach `end_time`.
    pub fn num_steps(&self) -> usize {
        (self.scenario.end_time / self.scenario.timestep).round() as usize
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let c = SolverConfig {
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            gmres_tol: s.gmres_tol,
            gmres_restart: s.gmres_restart,
            mg_pre_smooth: s.smoothing_steps,
            mg_post_smooth: s.smoothing_steps,
            vanka_damping: s.vanka_damping,
            ..SolverConfig::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn variant(&self) -> Result<Variant> {
        self.dnnmg.variant.parse()
    }

    pub fn train_config(&self, variant: Variant) -> Result<TrainConfig> {
        let loss: LossKind = variant
            .loss(self.dnnmg.gamma)
            .ok_or_else(|| Error::Config("variant `off` has no network to train".into()))?;
        let t = &self.train;
        let target = match t.target.as_str() {
            "same" => TargetStep::Same,
            "next" => TargetStep::Next,
            other => return Err(Error::Config(format!("target must be `same` or `next`, got `{other}`"))),
        };
        if t.epochs == 0 || t.window == 0 || t.batch == 0 || !(t.learning_rate > 0.0) {
            return Err(Error::Config("epochs, window, batch and learning_rate must be positive".into()));
        }
        Ok(TrainConfig {
            loss,
            epochs: t.epochs,
            window: t.window,
            batch: t.batch,
            adam: AdamConfig { lr: t.learning_rate, ..AdamConfig::default() },
            seed: self.seed,
            target,
        })
    }
}
