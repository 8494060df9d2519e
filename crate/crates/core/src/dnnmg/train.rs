//! Training on recorded patch sequences.
//!
//! A sample is a window of consecutive steps of one coarse cell. Windows of
//! all cells are shuffled each epoch and processed in mini-batches; the
//! hidden state starts from zero at the beginning of every window.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{patch_infos, record_coarse, record_fine, unit_features, PatchInfo};
use super::{predict_correction, TrainingRun};
use crate::error::{Error, Result};
use crate::fem::FeProblem;
use crate::neural::{
    nets_per_unit, window_loss, Adam, AdamConfig, HiddenStore, LossKind, NetConfig, Network, Normalization, OutputMode,
    UnitStep, PATCH_NODES,
};

/// Which fine solution a record is trained against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TargetStep {
    /// The fine solution of the same time step as the coarse solution.
    #[default]
    Same,
    /// The fine solution one step later.
    Next,
}

impl TargetStep {
    fn offset(self) -> usize {
        match self {
            TargetStep::Same => 0,
            TargetStep::Next => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    /// Steps per training window.
    pub window: usize,
    /// Windows per optimizer step.
    pub batch: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub target: TargetStep,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Base,
            epochs: 10,
            window: 20,
            batch: 32,
            adam: AdamConfig::default(),
            seed: 0,
            target: TargetStep::Same,
        }
    }
}

impl TrainConfig {
    pub fn mode(&self) -> OutputMode {
        match self.loss {
            LossKind::Psi => OutputMode::Stream,
            _ => OutputMode::Velocity,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss per unit and step.
    pub loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub num_windows: usize,
    pub output_scale: f64,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum::<f64>() / self.epochs.len().max(1) as f64
    }
}

/// Network inputs of every (step, patch) pair, `[step][patch][unit features]`.
struct FeatureTable {
    data: Vec<f64>,
    width: usize,
    num_patches: usize,
}

impl FeatureTable {
    fn build(run: &TrainingRun, infos: &[PatchInfo], mode: OutputMode, nu: f64) -> Self {
        let width = nets_per_unit(mode) * NetConfig::for_mode(mode).input;
        let mut data = Vec::with_capacity(run.num_steps() * infos.len() * width);
        let mut f = Vec::with_capacity(width);
        for s in 0..run.num_steps() {
            for (p, info) in infos.iter().enumerate() {
                unit_features(mode, run.record(s, p), info, nu, &mut f);
                data.extend_from_slice(&f);
            }
        }
        Self { data, width, num_patches: infos.len() }
    }

    fn get(&self, step: usize, patch: usize) -> &[f64] {
        let i = (step * self.num_patches + patch) * self.width;
        &self.data[i..i + self.width]
    }
}

fn output_scale(run: &TrainingRun, infos: &[PatchInfo], mode: OutputMode, off: usize) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for s in 0..run.num_steps() - off {
        for (p, info) in infos.iter().enumerate() {
            let c = record_coarse(run.record(s, p));
            let t = record_fine(run.record(s + off, p));
            for i in 0..2 * PATCH_NODES {
                if !info.geom.dirichlet[i % PATCH_NODES] {
                    sum += (t[i] - c[i]).powi(2);
                    n += 1;
                }
            }
        }
    }
    let rms = (sum / n.max(1) as f64).sqrt();
    let rms = if rms > 0.0 { rms } else { 1.0 };
    match mode {
        OutputMode::Velocity => rms,
        // stream function values scale like velocity times length
        OutputMode::Stream => {
            rms * infos.iter().map(|i| i.geom.size[0].min(i.geom.size[1])).fold(f64::INFINITY, f64::min)
        }
    }
}

/// Trains a fresh network on `run`, which must have been recorded on the
/// mesh of `problem`. `on_epoch` is called after every epoch.
pub fn train(
    problem: &FeProblem,
    run: &TrainingRun,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Network, TrainReport)> {
    run.validate(problem)?;
    if cfg.window == 0 || cfg.batch == 0 {
        return Err(Error::Config("window and batch must be positive".into()));
    }
    let off = cfg.target.offset();
    if run.num_steps() <= off {
        return Err(Error::Config(format!("{} recorded steps are too few for the target offset", run.num_steps())));
    }
    let usable = run.num_steps() - off;
    let mode = cfg.mode();
    let infos = patch_infos(problem)?;
    let nu = problem.params().viscosity;
    let table = FeatureTable::build(run, &infos, mode, nu);

    let mut net = Network::new(mode, NetConfig::for_mode(mode), cfg.seed);
    let n_in = net.config.input;
    net.norm = Normalization::fit(n_in, table.data.chunks_exact(n_in));
    net.norm.output_scale = output_scale(run, &infos, mode, off);

    let mut windows: Vec<(usize, usize, usize)> = Vec::new();
    for p in 0..infos.len() {
        let mut start = 0;
        while start < usable {
            let end = (start + cfg.window).min(usable);
            windows.push((p, start, end));
            start = end;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net.num_params(), cfg.adam);
    let mut grad = vec![0.0; net.num_params()];
    let mut report =
        TrainReport { epochs: Vec::new(), num_windows: windows.len(), output_scale: net.norm.output_scale };
    let mut steps = Vec::with_capacity(cfg.window);
    for epoch in 0..cfg.epochs {
        let clock = Instant::now();
        windows.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for batch in windows.chunks(cfg.batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_count = 0usize;
            for &(p, start, end) in batch {
                steps.clear();
                steps.extend((start..end).map(|s| UnitStep {
                    features: table.get(s, p),
                    target: record_fine(run.record(s + off, p)),
                    coarse: record_coarse(run.record(s, p)),
                }));
                total += window_loss(&net, cfg.loss, &infos[p].geom, &steps, Some(&mut grad))?;
                batch_count += end - start;
            }
            count += batch_count;
            let inv = 1.0 / batch_count as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(&mut net.params, &grad);
        }
        let stats = EpochStats { epoch, loss: total / count.max(1) as f64, seconds: clock.elapsed().as_secs_f64() };
        if !stats.loss.is_finite() {
            return Err(Error::Data(format!("training loss became non-finite in epoch {epoch}")));
        }
        on_epoch(&stats);
        report.epochs.push(stats);
    }
    Ok((net, report))
}

/// Replays the recorded coarse states through `net` in time order and
/// returns the Euclidean norm of the global velocity correction per step.
pub fn correction_norms(net: &Network, problem: &FeProblem, run: &TrainingRun) -> Result<Vec<f64>> {
    run.validate(problem)?;
    let infos = patch_infos(problem)?;
    let nn = problem.hierarchy().finest().num_nodes();
    let nu = problem.params().viscosity;
    let mut store = HiddenStore::new(infos.len() * nets_per_unit(net.mode), net.hidden_size());
    let mut residual = vec![0.0; 2 * nn];
    let mut vt = vec![0.0; 2 * nn];
    let mut norms = Vec::with_capacity(run.num_steps());
    for s in 0..run.num_steps() {
        for (p, info) in infos.iter().enumerate() {
            let rec = run.record(s, p);
            for (i, &n) in info.nodes().iter().enumerate() {
                residual[n] = rec[i];
                residual[nn + n] = rec[PATCH_NODES + i];
                vt[n] = rec[2 * PATCH_NODES + i];
                vt[nn + n] = rec[3 * PATCH_NODES + i];
            }
        }
        let d = predict_correction(net, &infos, &mut store, nn, nu, &residual, &vt)?;
        norms.push(crate::sparse::norm2(&d));
    }
    Ok(norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnnmg::{Manifest, Scenario, RECORD_LEN};
    use rand::Rng;

    /// Random residuals and velocities whose fine target differs from the
    /// coarse velocity by a fixed linear function of the residual, except
    /// at Dirichlet nodes where both agree.
    fn synthetic(steps: usize) -> (FeProblem, TrainingRun) {
        let sc = Scenario { levels: 2, ..Scenario::train() };
        let pb = sc.build().unwrap();
        let infos = patch_infos(&pb).unwrap();
        let np = infos.len();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut records = Vec::with_capacity(steps * np * RECORD_LEN);
        for _ in 0..steps {
            for info in &infos {
                let mut rec = [0.0; RECORD_LEN];
                for v in &mut rec[..4 * PATCH_NODES] {
                    *v = rng.gen_range(-1.0..1.0);
                }
                for i in 0..PATCH_NODES {
                    let on = if info.geom.dirichlet[i] { 0.0 } else { 0.1 };
                    rec[4 * PATCH_NODES + i] = rec[2 * PATCH_NODES + i] + on * rec[0];
                    rec[5 * PATCH_NODES + i] = rec[3 * PATCH_NODES + i] - on * rec[PATCH_NODES];
                }
                records.extend_from_slice(&rec);
            }
        }
        let manifest = Manifest { scenario: sc, num_patches: np, num_steps: steps, first_step: 1 };
        (pb, TrainingRun { manifest, records })
    }

    #[test]
    fn learns_a_linear_correction() {
        let (pb, run) = synthetic(4);
        let cfg = TrainConfig {
            epochs: 60,
            window: 4,
            batch: 8,
            adam: AdamConfig { lr: 3e-3, ..Default::default() },
            ..Default::default()
        };
        let (net, report) = train(&pb, &run, &cfg, |_| {}).unwrap();
        let zero = Network::zeros(OutputMode::Velocity, NetConfig::VELOCITY);
        let infos = patch_infos(&pb).unwrap();
        let table = FeatureTable::build(&run, &infos, OutputMode::Velocity, pb.params().viscosity);
        let mean_loss = |n: &Network| {
            let mut total = 0.0;
            for (p, info) in infos.iter().enumerate() {
                let steps: Vec<UnitStep> = (0..run.num_steps())
                    .map(|s| UnitStep {
                        features: table.get(s, p),
                        target: record_fine(run.record(s, p)),
                        coarse: record_coarse(run.record(s, p)),
                    })
                    .collect();
                total += window_loss(n, LossKind::Base, &info.geom, &steps, None).unwrap();
            }
            total
        };
        let (before, after) = (mean_loss(&zero), mean_loss(&net));
        assert!(after < 0.05 * before, "loss {after} vs {before} without correction");
        assert!(report.epochs.last().unwrap().loss < report.epochs[0].loss);
    }

    #[test]
    fn training_is_deterministic_and_honours_the_target_offset() {
        let (pb, run) = synthetic(3);
        let cfg = TrainConfig { epochs: 2, window: 2, ..Default::default() };
        let (a, ra) = train(&pb, &run, &cfg, |_| {}).unwrap();
        let (b, _) = train(&pb, &run, &cfg, |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.num_windows, 2 * run.num_patches());
        let next = TrainConfig { target: TargetStep::Next, ..cfg };
        let (_, rn) = train(&pb, &run, &next, |_| {}).unwrap();
        assert_eq!(rn.num_windows, run.num_patches());
        let psi = TrainConfig { loss: LossKind::Psi, epochs: 1, ..cfg };
        let (n, _) = train(&pb, &run, &psi, |_| {}).unwrap();
        assert_eq!(n.mode, OutputMode::Stream);
    }

    #[test]
    fn zero_network_gives_zero_corrections() {
        let (pb, run) = synthetic(2);
        let net = Network::zeros(OutputMode::Stream, NetConfig::STREAM);
        assert_eq!(correction_norms(&net, &pb, &run).unwrap(), vec![0.0, 0.0]);
    }
}
