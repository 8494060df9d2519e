//! Losses on one training unit: a coarse cell covered by 2×2 fine elements,
//! i.e. 5×5 fine nodes with x running fastest. Nodal fields are stored as
//! 25 x-values followed by 25 y-values.
//!
//! Every function returns the loss and, when asked, adds its gradient with
//! respect to the network output to `grad`.

use crate::divfree::{self, EtaTable, NUM_COEFFS};

pub const PATCH_NODES: usize = 25;
pub const PATCH_VALUES: usize = 2 * PATCH_NODES;

/// Fine element size and Dirichlet flags of the 25 patch nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchGeometry {
    pub size: [f64; 2],
    pub dirichlet: [bool; PATCH_NODES],
}

impl PatchGeometry {
    pub fn interior(size: [f64; 2]) -> Self {
        Self { size, dirichlet: [false; PATCH_NODES] }
    }
}

/// Patch nodes of sub-element `k` (`k = ex + 2 ey`), in element-local order.
pub fn sub_element_nodes(k: usize) -> [usize; 9] {
    let (ex, ey) = (k % 2, k / 2);
    std::array::from_fn(|j| (2 * ex + j % 3) + 5 * (2 * ey + j / 3))
}

fn gather(v: &[f64], nodes: &[usize; 9]) -> [f64; 18] {
    std::array::from_fn(|j| if j < 9 { v[nodes[j]] } else { v[PATCH_NODES + nodes[j - 9]] })
}

/// Which loss is minimised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    Base,
    /// Penalises the divergence of the correction.
    P1 {
        gamma: f64,
    },
    /// Penalises the divergence of the corrected velocity.
    P2 {
        gamma: f64,
    },
    /// Stream-function output, L² misfit of the reconstructed correction.
    Psi,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Base => "base",
            LossKind::P1 { .. } => "p1",
            LossKind::P2 { .. } => "p2",
            LossKind::Psi => "psi",
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            LossKind::P1 { gamma } | LossKind::P2 { gamma } => *gamma,
            _ => 0.0,
        }
    }
}

/// `‖target − (coarse + d)‖²` over the nodal values.
pub fn loss_base(target: &[f64], coarse: &[f64], d: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let mut s = 0.0;
    let mut g = grad;
    for i in 0..d.len() {
        let e = target[i] - coarse[i] - d[i];
        s += e * e;
        if let Some(g) = g.as_deref_mut() {
            g[i] -= 2.0 * e;
        }
    }
    s
}

/// `∫_P |∇·v|²` over the four sub-elements, with gradient `scale · ∂/∂v`.
pub fn patch_divergence_sq(v: &[f64], size: [f64; 2], grad: Option<(&mut [f64], f64)>) -> f64 {
    let rule = divfree::gauss3();
    let area = size[0] * size[1];
    let mut total = 0.0;
    let mut grad = grad;
    for k in 0..4 {
        let nodes = sub_element_nodes(k);
        for q in 0..rule.len() {
            let gq = &rule.grads[q];
            let div: f64 =
                (0..9).map(|a| v[nodes[a]] * gq[a][0] / size[0] + v[PATCH_NODES + nodes[a]] * gq[a][1] / size[1]).sum();
            let w = rule.weights[q] * area;
            total += w * div * div;
            if let Some((g, scale)) = grad.as_mut() {
                let f = *scale * 2.0 * w * div;
                for a in 0..9 {
                    g[nodes[a]] += f * gq[a][0] / size[0];
                    g[PATCH_NODES + nodes[a]] += f * gq[a][1] / size[1];
                }
            }
        }
    }
    total
}

/// Base loss plus `γ ∫|∇·d|²`.
pub fn loss_p1(target: &[f64], coarse: &[f64], d: &[f64], size: [f64; 2], gamma: f64, grad: Option<&mut [f64]>) -> f64 {
    match grad {
        Some(g) => loss_base(target, coarse, d, Some(g)) + gamma * patch_divergence_sq(d, size, Some((g, gamma))),
        None => loss_base(target, coarse, d, None) + gamma * patch_divergence_sq(d, size, None),
    }
}

/// Base loss plus `γ ∫|∇·(coarse + d)|²`.
pub fn loss_p2(target: &[f64], coarse: &[f64], d: &[f64], size: [f64; 2], gamma: f64, grad: Option<&mut [f64]>) -> f64 {
    let corrected: Vec<f64> = coarse.iter().zip(d).map(|(a, b)| a + b).collect();
    match grad {
        Some(g) => {
            loss_base(target, coarse, d, Some(g)) + gamma * patch_divergence_sq(&corrected, size, Some((g, gamma)))
        }
        None => loss_base(target, coarse, d, None) + gamma * patch_divergence_sq(&corrected, size, None),
    }
}

/// Nodal correction on the patch from the stream coefficients of its four
/// sub-elements (`s[8k..8k+8]`), with Dirichlet zeroing and averaging of
/// shared nodes.
pub fn reconstruct_patch(s: &[f64], geom: &PatchGeometry) -> [f64; PATCH_VALUES] {
    let table = EtaTable::get();
    let mut sum = [0.0; PATCH_VALUES];
    let mut count = [0.0; PATCH_NODES];
    for k in 0..4 {
        let nodes = sub_element_nodes(k);
        let coeffs: [f64; NUM_COEFFS] = s[NUM_COEFFS * k..NUM_COEFFS * (k + 1)].try_into().expect("8 coefficients");
        let mask = nodes.map(|n| geom.dirichlet[n]);
        let local = divfree::stream_to_velocity(&coeffs, geom.size, &mask, table);
        for (j, &n) in nodes.iter().enumerate() {
            sum[n] += local[j];
            sum[PATCH_NODES + n] += local[9 + j];
            count[n] += 1.0;
        }
    }
    for n in 0..PATCH_NODES {
        sum[n] /= count[n];
        sum[PATCH_NODES + n] /= count[n];
    }
    sum
}

/// `Σ_K ‖target − (coarse + d(s))‖²_{L²(K)}` over the four sub-elements.
pub fn loss_psi(target: &[f64], coarse: &[f64], s: &[f64], geom: &PatchGeometry, grad: Option<&mut [f64]>) -> f64 {
    let d = reconstruct_patch(s, geom);
    let e: Vec<f64> = (0..PATCH_VALUES).map(|i| target[i] - coarse[i] - d[i]).collect();
    let rule = divfree::gauss3();
    let area = geom.size[0] * geom.size[1];
    let mut total = 0.0;
    let mut gd = [0.0; PATCH_VALUES];
    for k in 0..4 {
        let nodes = sub_element_nodes(k);
        let el = gather(&e, &nodes);
        for q in 0..rule.len() {
            let phi = &rule.values[q];
            let w = rule.weights[q] * area;
            for c in 0..2 {
                let v: f64 = (0..9).map(|a| phi[a] * el[9 * c + a]).sum();
                total += w * v * v;
                for a in 0..9 {
                    gd[c * PATCH_NODES + nodes[a]] -= 2.0 * w * v * phi[a];
                }
            }
        }
    }
    if let Some(g) = grad {
        // back through the averaging and the local reconstructions
        let table = EtaTable::get();
        let mut count = [0.0; PATCH_NODES];
        for k in 0..4 {
            for n in sub_element_nodes(k) {
                count[n] += 1.0;
            }
        }
        for k in 0..4 {
            let nodes = sub_element_nodes(k);
            let local: [f64; 18] = std::array::from_fn(|j| {
                let n = nodes[j % 9];
                gd[(j / 9) * PATCH_NODES + n] / count[n]
            });
            let mask = nodes.map(|n| geom.dirichlet[n]);
            let gs = divfree::stream_to_velocity_adjoint(&local, geom.size, &mask, table);
            for (i, v) in gs.iter().enumerate() {
                g[NUM_COEFFS * k + i] += v;
            }
        }
    }
    total
}

/// Dispatches to the loss of `kind`. `out` is the network output for the
/// unit: 50 nodal values, or 32 stream coefficients for [`LossKind::Psi`].
pub fn unit_loss(
    kind: LossKind,
    target: &[f64],
    coarse: &[f64],
    out: &[f64],
    geom: &PatchGeometry,
    grad: Option<&mut [f64]>,
) -> f64 {
    match kind {
        LossKind::Base => loss_base(target, coarse, out, grad),
        LossKind::P1 { gamma } => loss_p1(target, coarse, out, geom.size, gamma, grad),
        LossKind::P2 { gamma } => loss_p2(target, coarse, out, geom.size, gamma, grad),
        LossKind::Psi => loss_psi(target, coarse, out, geom, grad),
    }
}
