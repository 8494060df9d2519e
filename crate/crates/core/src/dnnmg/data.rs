//! Training data from a fine simulation with slaved coarse steps, and its
//! on-disk layout: `manifest.txt` plus one little-endian `f64` stream per patch.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::features::{fill_record, patch_infos, RECORD_LEN};
use super::Scenario;
use crate::error::{Error, Result};
use crate::fem::{FeProblem, State};
use crate::mesh::transfer;
use crate::solver::{newton_solve, NewtonReport, SolverConfig, TimeStepper};

/// How long the fine simulation runs and how many of its last steps are recorded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataConfig {
    pub total_steps: usize,
    pub record_steps: usize,
    pub solver: SolverConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { total_steps: 1000, record_steps: 200, solver: SolverConfig::default() }
    }
}

/// Description of a stored dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub scenario: Scenario,
    pub num_patches: usize,
    pub num_steps: usize,
    /// Index of the time step of the first record (`t = first_step · k`).
    pub first_step: usize,
}

const LAYOUT: &str = "res_x[25] res_y[25] vt_x[25] vt_y[25] fine_x[25] fine_y[25]";

impl Manifest {
    fn to_text(&self) -> String {
        let s = &self.scenario;
        format!(
            "format = dnnmg-dataset-1\nlength = {}\nheight = {}\nobstacle_x = {}\nobstacle_y = {}\nobstacle_side = {}\n\
             h0 = {}\nlevels = {}\nreynolds = {}\ntimestep = {}\nv_max = {}\nramp_time = {}\nlps_alpha0 = {}\n\
             num_patches = {}\nnum_steps = {}\nfirst_step = {}\nrecord_len = {}\nrecord_layout = {}\n\
             stream = patch_<id>.bin, num_steps records of record_len little-endian f64\n",
            s.length,
            s.height,
            s.obstacle_center[0],
            s.obstacle_center[1],
            s.obstacle_side,
            s.h0,
            s.levels,
            s.reynolds,
            s.timestep,
            s.v_max,
            s.ramp_time,
            s.lps_alpha0,
            self.num_patches,
            self.num_steps,
            self.first_step,
            RECORD_LEN,
            LAYOUT
        )
    }

    fn from_text(text: &str) -> Result<Self> {
        let kv: Vec<(&str, &str)> =
            text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.trim(), v.trim())).collect();
        let get = |key: &str| -> Result<&str> {
            kv.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Data(format!("manifest lacks `{key}`")))
        };
        let f = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|_| Error::Data(format!("manifest `{key}` is not a number")))
        };
        let u = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|_| Error::Data(format!("manifest `{key}` is not an integer")))
        };
        if get("format")? != "dnnmg-dataset-1" {
            return Err(Error::Data("unknown dataset format".into()));
        }
        if u("record_len")? != RECORD_LEN {
            return Err(Error::Data(format!("record length {} differs from {RECORD_LEN}", u("record_len")?)));
        }
        let scenario = Scenario {
            length: f("length")?,
            height: f("height")?,
            obstacle_center: [f("obstacle_x")?, f("obstacle_y")?],
            obstacle_side: f("obstacle_side")?,
            h0: f("h0")?,
            levels: u("levels")?,
            reynolds: f("reynolds")?,
            timestep: f("timestep")?,
            v_max: f("v_max")?,
            ramp_time: f("ramp_time")?,
            lps_alpha0: f("lps_alpha0")?,
        };
        Ok(Self { scenario, num_patches: u("num_patches")?, num_steps: u("num_steps")?, first_step: u("first_step")? })
    }
}

/// Recorded patch sequences, all patches at every recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub manifest: Manifest,
    /// `[step][patch][RECORD_LEN]`
    pub records: Vec<f64>,
}

impl TrainingRun {
    pub fn num_patches(&self) -> usize {
        self.manifest.num_patches
    }

    pub fn num_steps(&self) -> usize {
        self.manifest.num_steps
    }

    pub fn record(&self, step: usize, patch: usize) -> &[f64] {
        let i = (step * self.manifest.num_patches + patch) * RECORD_LEN;
        &self.records[i..i + RECORD_LEN]
    }

    /// Checks that the dataset was recorded on the mesh of `problem`.
    pub fn validate(&self, problem: &FeProblem) -> Result<()> {
        let n = patch_infos(problem)?.len();
        if n != self.manifest.num_patches {
            return Err(Error::Data(format!("dataset has {} patches, the mesh has {n}", self.manifest.num_patches)));
        }
        if self.records.len() != self.num_steps() * n * RECORD_LEN {
            return Err(Error::Data("dataset size does not match its manifest".into()));
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mpath = dir.join("manifest.txt");
        fs::write(&mpath, self.manifest.to_text()).map_err(|e| Error::io(&mpath, e))?;
        for p in 0..self.num_patches() {
            let path = dir.join(format!("patch_{p:05}.bin"));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            for s in 0..self.num_steps() {
                for v in self.record(s, p) {
                    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&path, e))?;
                }
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join("manifest.txt");
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest = Manifest::from_text(&text)?;
        let (np, ns) = (manifest.num_patches, manifest.num_steps);
        let mut records = vec![0.0; np * ns * RECORD_LEN];
        let mut buf = vec![0u8; ns * RECORD_LEN * 8];
        for p in 0..np {
            let path = dir.join(format!("patch_{p:05}.bin"));
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mut r = BufReader::new(file);
            r.read_exact(&mut buf).map_err(|e| Error::io(&path, e))?;
            let mut extra = [0u8; 1];
            if r.read(&mut extra).map_err(|e| Error::io(&path, e))? != 0 {
                return Err(Error::Data(format!("{} is longer than the manifest says", path.display())));
            }
            for s in 0..ns {
                let dst = (s * np + p) * RECORD_LEN;
                for k in 0..RECORD_LEN {
                    let o = (s * RECORD_LEN + k) * 8;
                    records[dst + k] = f64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
                }
            }
        }
        Ok(Self { manifest, records })
    }
}

/// Runs the fine simulation from rest and, for each of the last
/// `record_steps` steps, a slaved coarse step: the coarse system is solved
/// with the restriction of the fine right-hand side built from the fine
/// solution of the previous step, i.e. the coarse step DNN-MG would take
/// after a perfect correction. Its prolongation, fine residual and the fine
/// solution are recorded per patch.
///
/// `on_fine_step` sees every fine state together with its predecessor.
pub fn generate_training_data(
    problem: &FeProblem,
    scenario: &Scenario,
    cfg: &DataConfig,
    mut on_fine_step: impl FnMut(&State, &State, &NewtonReport),
) -> Result<TrainingRun> {
    if cfg.record_steps == 0 || cfg.record_steps > cfg.total_steps {
        return Err(Error::Config(format!(
            "record_steps must be in 1..={}, got {}",
            cfg.total_steps, cfg.record_steps
        )));
    }
    let levels = problem.num_levels();
    let (coarse, fine) = (levels - 2, levels - 1);
    let h = problem.hierarchy();
    let infos = patch_infos(problem)?;
    let nn = problem.level(fine).num_nodes();
    let first_step = cfg.total_steps - cfg.record_steps + 1;
    let mut records = Vec::with_capacity(cfg.record_steps * infos.len() * RECORD_LEN);
    let mut stepper = TimeStepper::new(problem, fine, cfg.solver);
    for n in 1..=cfg.total_steps {
        let prev = stepper.state.clone();
        let report = stepper.step()?;
        on_fine_step(&stepper.state, &prev, &report);
        if n < first_step {
            continue;
        }
        let t = stepper.state.t;
        let fine_rhs = problem.assemble_rhs(&prev, t)?;
        let coarse_rhs = transfer::restrict_functional(h, coarse, &fine_rhs, 3)?;
        let mut x0 = State { level: coarse, t, x: transfer::inject(h, coarse, &prev.x, 3)? };
        problem.apply_dirichlet(&mut x0, t);
        let (xc, _) = newton_solve(problem, x0, &coarse_rhs, &cfg.solver)?;
        let xt = State { level: fine, t, x: transfer::prolongate(h, coarse, &xc.x, 3)? };
        let residual = problem.assemble_residual(&xt, &fine_rhs)?;
        let mut rec = vec![0.0; RECORD_LEN];
        for info in &infos {
            fill_record(info, nn, &residual, &xt.x, Some(&stepper.state.x), &mut rec);
            records.extend_from_slice(&rec);
        }
    }
    Ok(TrainingRun {
        manifest: Manifest { scenario: *scenario, num_patches: infos.len(), num_steps: cfg.record_steps, first_step },
        records,
    })
}
