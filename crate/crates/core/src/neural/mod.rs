//! Gated recurrent network with hand-written back-propagation, the four
//! training losses, Adam and the checkpoint format.
//!
//! The network is shared by all patches. A training unit is one coarse cell
//! (5×5 fine nodes): in velocity mode the network sees the whole cell and
//! predicts 50 nodal values; in stream mode it runs once per fine element of
//! the cell and predicts 8 stream coefficients each.

mod adam;
pub mod checkpoint;
mod loss;
mod net;

pub use adam::{Adam, AdamConfig};
pub use loss::{
    loss_base, loss_p1, loss_p2, loss_psi, patch_divergence_sq, reconstruct_patch, sub_element_nodes, unit_loss,
    LossKind, PatchGeometry, PATCH_NODES, PATCH_VALUES,
};
pub use net::{HiddenStore, NetConfig, Network, Normalization, OutputMode, StepCache};

use crate::error::{Error, Result};

/// Number of network evaluations per training unit.
pub fn nets_per_unit(mode: OutputMode) -> usize {
    match mode {
        OutputMode::Velocity => 1,
        OutputMode::Stream => 4,
    }
}

/// One time step of a training unit. In stream mode `features` holds the
/// four sub-element feature vectors back to back.
#[derive(Clone, Copy, Debug)]
pub struct UnitStep<'a> {
    pub features: &'a [f64],
    pub target: &'a [f64],
    pub coarse: &'a [f64],
}

/// Loss of one unit over a window of consecutive steps, starting from zero
/// hidden state. With `grad`, the exact gradient (back-propagation through
/// the whole window) is added to it.
///
/// In velocity mode the predicted values at Dirichlet nodes are discarded.
pub fn window_loss(
    net: &Network,
    kind: LossKind,
    geom: &PatchGeometry,
    steps: &[UnitStep],
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let mode = net.mode;
    if (kind == LossKind::Psi) != (mode == OutputMode::Stream) {
        return Err(Error::Config(format!("loss {} does not fit a {mode:?} network", kind.name())));
    }
    let k = nets_per_unit(mode);
    let (n_in, n_out, n_h) = (net.config.input, net.config.output, net.config.hidden);
    let mut h = vec![vec![0.0; n_h]; k];
    let mut caches: Vec<Vec<StepCache>> = Vec::new();
    let mut douts: Vec<Vec<f64>> = Vec::new();
    let want_grad = grad.is_some();
    let mut total = 0.0;
    for st in steps {
        if st.features.len() != k * n_in {
            return Err(Error::dim("unit features", k * n_in, st.features.len()));
        }
        let mut out = Vec::with_capacity(k * n_out);
        let mut step_caches = Vec::new();
        for (j, hj) in h.iter_mut().enumerate() {
            let mut cache = StepCache::default();
            let (o, hn) = net.step(&st.features[j * n_in..(j + 1) * n_in], hj, want_grad.then_some(&mut cache));
            out.extend(o);
            *hj = hn;
            step_caches.push(cache);
        }
        if mode == OutputMode::Velocity {
            mask_dirichlet(&mut out, geom);
        }
        let mut dout = vec![0.0; out.len()];
        total += unit_loss(kind, st.target, st.coarse, &out, geom, want_grad.then_some(&mut dout[..]));
        if want_grad {
            if mode == OutputMode::Velocity {
                mask_dirichlet(&mut dout, geom);
            }
            caches.push(step_caches);
            douts.push(dout);
        }
    }
    if let Some(g) = grad {
        let mut dh = vec![vec![0.0; n_h]; k];
        for (cs, dout) in caches.iter().zip(&douts).rev() {
            for j in 0..k {
                dh[j] = net.step_backward(&cs[j], &dout[j * n_out..(j + 1) * n_out], &dh[j], g);
            }
        }
    }
    Ok(total)
}

fn mask_dirichlet(v: &mut [f64], geom: &PatchGeometry) {
    for n in 0..PATCH_NODES {
        if geom.dirichlet[n] {
            v[n] = 0.0;
            v[PATCH_NODES + n] = 0.0;
        }
    }
}
