use crate::error::{Error, Result};
use crate::fem::{BoundaryConditions, FeProblem, FlowParams};
use crate::mesh::{build_channel_mesh, MeshHierarchy};

/// Geometry, flow and discretization of one channel run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub length: f64,
    pub height: f64,
    pub obstacle_center: [f64; 2],
    pub obstacle_side: f64,
    /// Element size of the coarsest mesh.
    pub h0: f64,
    /// Number of mesh levels; the finest is the fine level of DNN-MG and the
    /// one below it the coarse level.
    pub levels: usize,
    pub reynolds: f64,
    pub timestep: f64,
    pub v_max: f64,
    pub ramp_time: f64,
    pub lps_alpha0: f64,
}

impl Scenario {
    /// Obstacle position used for generating training data.
    pub const TRAIN_CENTER: [f64; 2] = [0.3, 0.15];
    /// Obstacle position of the test runs.
    pub const TEST_CENTER: [f64; 2] = [0.3, 0.25];

    pub fn train() -> Self {
        Self {
            length: 2.25,
            height: 0.4,
            obstacle_center: Self::TRAIN_CENTER,
            obstacle_side: 0.1,
            h0: 0.05,
            levels: 3,
            reynolds: 133.0,
            timestep: 0.01,
            v_max: 2.0,
            ramp_time: 1.0,
            lps_alpha0: 0.05,
        }
    }

    pub fn test() -> Self {
        Self { obstacle_center: Self::TEST_CENTER, ..Self::train() }
    }

    pub fn fine_level(&self) -> usize {
        self.levels - 1
    }

    pub fn coarse_level(&self) -> usize {
        self.levels.saturating_sub(2)
    }

    pub fn params(&self) -> FlowParams {
        let mut p = FlowParams::channel(self.reynolds, self.timestep, self.v_max, self.obstacle_side);
        p.lps_alpha0 = self.lps_alpha0;
        p
    }

    pub fn build(&self) -> Result<FeProblem> {
        if self.levels < 2 {
            return Err(Error::Config(format!("a DNN-MG scenario needs at least 2 levels, got {}", self.levels)));
        }
        let m = build_channel_mesh(self.length, self.height, self.obstacle_center, self.obstacle_side, self.h0)?;
        let h = MeshHierarchy::new(m, self.levels)?;
        FeProblem::new(h, self.params(), BoundaryConditions::channel(self.v_max, self.height, self.ramp_time))
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::test()
    }
}
