//! Per-patch records and network inputs.
//!
//! A record holds, for the 25 fine nodes of a coarse cell, the velocity part
//! of the fine residual, the prolongated coarse velocity and (in training
//! data) the fine velocity: `res_x | res_y | vt_x | vt_y | fine_x | fine_y`,
//! 25 values each.

use crate::error::Result;
use crate::fem::FeProblem;
use crate::mesh::{enumerate_patches, Patch, PatchMode};
use crate::neural::{sub_element_nodes, OutputMode, PatchGeometry, PATCH_NODES};

pub const RECORD_LEN: usize = 6 * PATCH_NODES;
/// Inputs of the velocity network: residual, velocity, aspect ratio, Péclet number.
pub const VELOCITY_FEATURES: usize = 4 * PATCH_NODES + 2;
/// Inputs of the stream network for one fine element.
pub const STREAM_FEATURES: usize = 4 * 9 + 2;

/// A coarse cell with its fine-level geometry.
#[derive(Clone, Debug)]
pub struct PatchInfo {
    pub patch: Patch,
    pub geom: PatchGeometry,
}

impl PatchInfo {
    pub fn nodes(&self) -> &[usize] {
        &self.patch.nodes
    }
}

/// The coarse-cell patches of the two finest levels of `problem`.
pub fn patch_infos(problem: &FeProblem) -> Result<Vec<PatchInfo>> {
    let h = problem.hierarchy();
    let fine = h.finest();
    Ok(enumerate_patches(h, PatchMode::CoarseElement)?
        .into_iter()
        .map(|patch| {
            let dirichlet = std::array::from_fn(|i| fine.is_dirichlet_node(patch.nodes[i]));
            let geom = PatchGeometry { size: [patch.width / 2.0, patch.height / 2.0], dirichlet };
            PatchInfo { patch, geom }
        })
        .collect())
}

/// Gathers the record of one patch from global fine-level vectors
/// (`residual` and `vt` in `[x | y | …]` layout with `nn` nodes per block).
pub fn fill_record(info: &PatchInfo, nn: usize, residual: &[f64], vt: &[f64], fine: Option<&[f64]>, rec: &mut [f64]) {
    for (i, &n) in info.nodes().iter().enumerate() {
        rec[i] = residual[n];
        rec[PATCH_NODES + i] = residual[nn + n];
        rec[2 * PATCH_NODES + i] = vt[n];
        rec[3 * PATCH_NODES + i] = vt[nn + n];
        let (fx, fy) = fine.map_or((0.0, 0.0), |f| (f[n], f[nn + n]));
        rec[4 * PATCH_NODES + i] = fx;
        rec[5 * PATCH_NODES + i] = fy;
    }
}

/// Slices of a record.
pub fn record_coarse(rec: &[f64]) -> &[f64] {
    &rec[2 * PATCH_NODES..4 * PATCH_NODES]
}

pub fn record_fine(rec: &[f64]) -> &[f64] {
    &rec[4 * PATCH_NODES..6 * PATCH_NODES]
}

fn peclet(vx: impl Iterator<Item = f64>, vy: impl Iterator<Item = f64>, h: f64, nu: f64) -> f64 {
    let (mut s, mut n) = (0.0, 0);
    for (a, b) in vx.zip(vy) {
        s += a.hypot(b);
        n += 1;
    }
    s / n as f64 * h / nu
}

/// Network input of one unit: 102 values in velocity mode, four blocks of
/// 38 values (one per fine element) in stream mode.
pub fn unit_features(mode: OutputMode, rec: &[f64], info: &PatchInfo, nu: f64, out: &mut Vec<f64>) {
    out.clear();
    let p = &info.patch;
    match mode {
        OutputMode::Velocity => {
            out.extend_from_slice(&rec[..4 * PATCH_NODES]);
            out.push(p.aspect_ratio());
            let vx = rec[2 * PATCH_NODES..3 * PATCH_NODES].iter().copied();
            let vy = rec[3 * PATCH_NODES..4 * PATCH_NODES].iter().copied();
            out.push(peclet(vx, vy, p.width.max(p.height), nu));
        }
        OutputMode::Stream => {
            let h = info.geom.size[0].max(info.geom.size[1]);
            for k in 0..4 {
                let nodes = sub_element_nodes(k);
                for block in 0..4 {
                    out.extend(nodes.iter().map(|&n| rec[block * PATCH_NODES + n]));
                }
                out.push(p.aspect_ratio());
                let vx = nodes.iter().map(|&n| rec[2 * PATCH_NODES + n]);
                let vy = nodes.iter().map(|&n| rec[3 * PATCH_NODES + n]);
                out.push(peclet(vx, vy, h, nu));
            }
        }
    }
}

pub fn feature_len(mode: OutputMode) -> usize {
    match mode {
        OutputMode::Velocity => VELOCITY_FEATURES,
        OutputMode::Stream => STREAM_FEATURES,
    }
}
