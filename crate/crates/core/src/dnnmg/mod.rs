//! The DNN-MG time step and the data pipeline around it.
//!
//! Each step solves the nonlinear system on the coarse level only. The
//! result is prolongated to the fine level, where the network adds a
//! patchwise correction; the right-hand side of the next step is assembled
//! from the corrected fine velocity and restricted back to the coarse level.
//! Without a correction this reduces to the coarse scheme, because the
//! restriction of a fine right-hand side built from a prolongated field is
//! the coarse right-hand side.

mod data;
mod features;
mod scenario;
mod train;

use std::str::FromStr;

pub use data::{generate_training_data, DataConfig, Manifest, TrainingRun};
pub use features::{
    feature_len, fill_record, patch_infos, record_coarse, record_fine, unit_features, PatchInfo, RECORD_LEN,
    STREAM_FEATURES, VELOCITY_FEATURES,
};
pub use scenario::Scenario;
pub use train::{correction_norms, train, EpochStats, TargetStep, TrainConfig, TrainReport};

use crate::divfree::{self, EtaTable, StreamCoeffs, NUM_COEFFS};
use crate::error::{Error, Result};
use crate::fem::{FeProblem, State};
use crate::mesh::transfer;
use crate::neural::{sub_element_nodes, HiddenStore, LossKind, Network, OutputMode, PATCH_NODES};
use crate::solver::{NewtonReport, SolverConfig, TimeStepper};

/// Which correction, if any, is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Plain coarse multigrid solver.
    Off,
    /// Velocity network trained with the base loss.
    Plain,
    /// Velocity network, penalty on the divergence of the correction.
    P1,
    /// Velocity network, penalty on the divergence of the corrected velocity.
    P2,
    /// Stream-function network.
    Psi,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Off, Variant::Plain, Variant::P1, Variant::P2, Variant::Psi];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Off => "off",
            Variant::Plain => "plain",
            Variant::P1 => "p1",
            Variant::P2 => "p2",
            Variant::Psi => "psi",
        }
    }

    pub fn mode(self) -> Option<OutputMode> {
        match self {
            Variant::Off => None,
            Variant::Psi => Some(OutputMode::Stream),
            _ => Some(OutputMode::Velocity),
        }
    }

    pub fn loss(self, gamma: f64) -> Option<LossKind> {
        match self {
            Variant::Off => None,
            Variant::Plain => Some(LossKind::Base),
            Variant::P1 => Some(LossKind::P1 { gamma }),
            Variant::P2 => Some(LossKind::P2 { gamma }),
            Variant::Psi => Some(LossKind::Psi),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected off, plain, p1, p2 or psi)")))
    }
}

/// What one DNN-MG step did.
#[derive(Clone, Debug, Default)]
pub struct StepInfo {
    pub newton: NewtonReport,
    /// `‖d‖_{ℓ²}` of the fine velocity correction; zero when none was applied.
    pub correction_norm: f64,
    /// Whether the network was evaluated in this step.
    pub corrected: bool,
}

/// Time stepping on the coarse level with network corrections on the fine level.
pub struct DnnMg<'a> {
    pub stepper: TimeStepper<'a>,
    problem: &'a FeProblem,
    coarse: usize,
    fine: usize,
    net: Option<Network>,
    patches: Vec<PatchInfo>,
    store: HiddenStore,
    /// Network corrections start once the new time exceeds this.
    pub start_time: f64,
    fine_rhs: Option<Vec<f64>>,
    /// Corrected fine velocity of the last corrected step.
    pub corrected: Option<Vec<f64>>,
}

impl<'a> DnnMg<'a> {
    /// `net = None` gives the plain coarse solver.
    pub fn new(problem: &'a FeProblem, cfg: SolverConfig, net: Option<Network>) -> Result<Self> {
        let levels = problem.num_levels();
        if levels < 2 {
            return Err(Error::Config("DNN-MG needs at least two mesh levels".into()));
        }
        let (coarse, fine) = (levels - 2, levels - 1);
        let patches = if net.is_some() { patch_infos(problem)? } else { Vec::new() };
        let store = match &net {
            Some(n) => HiddenStore::new(patches.len() * crate::neural::nets_per_unit(n.mode), n.hidden_size()),
            None => HiddenStore::new(0, 1),
        };
        if let Some(n) = &net {
            let want = feature_len(n.mode);
            if n.config.input != want {
                return Err(Error::Config(format!(
                    "network expects {} inputs, patches provide {want}",
                    n.config.input
                )));
            }
        }
        Ok(Self {
            stepper: TimeStepper::new(problem, coarse, cfg),
            problem,
            coarse,
            fine,
            net,
            patches,
            store,
            start_time: 0.0,
            fine_rhs: None,
            corrected: None,
        })
    }

    pub fn state(&self) -> &State {
        &self.stepper.state
    }

    pub fn network(&self) -> Option<&Network> {
        self.net.as_ref()
    }

    fn prolongate_state(&self, x: &State) -> Result<State> {
        let h = self.problem.hierarchy();
        Ok(State { level: self.fine, t: x.t, x: transfer::prolongate(h, self.coarse, &x.x, 3)? })
    }

    fn restrict_rhs(&self, b: &[f64]) -> Result<Vec<f64>> {
        transfer::restrict_functional(self.problem.hierarchy(), self.coarse, b, 3)
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<StepInfo> {
        let t_new = self.stepper.next_time();
        let active = self.net.is_some() && t_new > self.start_time;
        if !active {
            self.corrected = None;
            let newton = self.stepper.step()?;
            return Ok(StepInfo { newton, ..Default::default() });
        }
        let fine_rhs = match self.fine_rhs.take() {
            Some(b) => b,
            None => {
                let prev = self.prolongate_state(&self.stepper.state)?;
                self.problem.assemble_rhs(&prev, t_new)?
            }
        };
        let coarse_rhs = self.restrict_rhs(&fine_rhs)?;
        let newton = self.stepper.step_with_rhs(&coarse_rhs)?;

        let mut xt = self.prolongate_state(&self.stepper.state)?;
        let residual = self.problem.assemble_residual(&xt, &fine_rhs)?;
        let d = self.predict(&residual, &xt)?;
        let correction_norm = crate::sparse::norm2(&d);
        for (v, dv) in xt.velocity_mut().iter_mut().zip(&d) {
            *v += dv;
        }
        let next = self.problem.assemble_rhs(&xt, self.stepper.next_time())?;
        self.fine_rhs = Some(next);
        self.corrected = Some(xt.velocity().to_vec());
        Ok(StepInfo { newton, correction_norm, corrected: true })
    }

    /// The current solution on the fine level: the prolongated coarse state
    /// with the corrected velocity of the last step, if it was corrected.
    pub fn fine_state(&self) -> Result<State> {
        let mut x = self.prolongate_state(&self.stepper.state)?;
        if let Some(v) = &self.corrected {
            x.velocity_mut().copy_from_slice(v);
        }
        Ok(x)
    }

    /// Global fine velocity correction (`[dx | dy]`) from the fine residual
    /// of the prolongated state.
    pub fn predict(&mut self, residual: &[f64], xt: &State) -> Result<Vec<f64>> {
        let net = self.net.as_ref().ok_or_else(|| Error::Config("no network loaded".into()))?;
        let nn = self.problem.level(self.fine).num_nodes();
        let nu = self.problem.params().viscosity;
        predict_correction(net, &self.patches, &mut self.store, nn, nu, residual, &xt.x)
    }
}

/// Evaluates `net` on every patch and averages the local corrections into a
/// global fine velocity correction `[dx | dy]` of `nn` nodes per component.
/// `residual` and `vt` are fine-level vectors with the same block layout.
pub fn predict_correction(
    net: &Network,
    patches: &[PatchInfo],
    store: &mut HiddenStore,
    nn: usize,
    nu: f64,
    residual: &[f64],
    vt: &[f64],
) -> Result<Vec<f64>> {
    let mut rec = vec![0.0; RECORD_LEN];
    let mut feats = Vec::new();
    match net.mode {
        OutputMode::Velocity => {
            let mut local = Vec::with_capacity(patches.len());
            for (p, info) in patches.iter().enumerate() {
                fill_record(info, nn, residual, vt, None, &mut rec);
                unit_features(OutputMode::Velocity, &rec, info, nu, &mut feats);
                let mut out = net.forward_patch(&feats, store, p).map_err(|e| tag_patch(e, p))?;
                for n in 0..PATCH_NODES {
                    if info.geom.dirichlet[n] {
                        out[n] = 0.0;
                        out[PATCH_NODES + n] = 0.0;
                    }
                }
                local.push(out);
            }
            divfree::assemble_global_correction(nn, patches.iter().zip(&local).map(|(i, v)| (i.nodes(), &v[..])))
        }
        OutputMode::Stream => {
            let table = EtaTable::get();
            let n_in = net.config.input;
            let mut nodes = Vec::with_capacity(4 * patches.len());
            let mut local = Vec::with_capacity(4 * patches.len());
            for (p, info) in patches.iter().enumerate() {
                fill_record(info, nn, residual, vt, None, &mut rec);
                unit_features(OutputMode::Stream, &rec, info, nu, &mut feats);
                for k in 0..4 {
                    let s = net
                        .forward_patch(&feats[k * n_in..(k + 1) * n_in], store, 4 * p + k)
                        .map_err(|e| tag_patch(e, p))?;
                    let s: StreamCoeffs = s[..NUM_COEFFS].try_into().expect("8 coefficients");
                    let sub = sub_element_nodes(k);
                    let mask = sub.map(|n| info.geom.dirichlet[n]);
                    local.push(divfree::stream_to_velocity(&s, info.geom.size, &mask, table));
                    nodes.push(sub.map(|n| info.patch.nodes[n]));
                }
            }
            divfree::assemble_global_correction(nn, nodes.iter().zip(&local).map(|(n, v)| (&n[..], &v[..])))
        }
    }
}

/// Reports non-finite predictions by coarse patch id.
fn tag_patch(e: Error, patch: usize) -> Error {
    match e {
        Error::NonFinitePrediction { .. } => Error::NonFinitePrediction { patch_id: patch },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::NetConfig;

    fn small() -> Scenario {
        Scenario { levels: 2, ..Scenario::train() }
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("dnn".parse::<Variant>().is_err());
    }

    #[test]
    fn zero_network_follows_the_coarse_scheme() {
        let pb = small().build().unwrap();
        let cfg = SolverConfig::default();
        let mut off = DnnMg::new(&pb, cfg, None).unwrap();
        let mut zero = DnnMg::new(&pb, cfg, Some(Network::zeros(OutputMode::Stream, NetConfig::STREAM))).unwrap();
        for _ in 0..5 {
            off.step().unwrap();
            let info = zero.step().unwrap();
            assert!(info.corrected && info.correction_norm == 0.0);
        }
        let diff = off.state().x.iter().zip(&zero.state().x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-10, "{diff}");
    }

    #[test]
    fn non_finite_prediction_names_the_patch() {
        let pb = small().build().unwrap();
        let mut net = Network::new(OutputMode::Velocity, NetConfig::VELOCITY, 3);
        net.norm.output_scale = f64::INFINITY;
        let mut dm = DnnMg::new(&pb, SolverConfig::default(), Some(net)).unwrap();
        let err = dm.step().unwrap_err();
        assert!(matches!(err, Error::NonFinitePrediction { patch_id: 0 }), "{err}");
    }
}
