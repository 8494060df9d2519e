//! Evaluation functionals: divergence norm, drag and lift on the obstacle,
//! oscillation statistics of a periodic signal and velocity error fields.

use std::path::Path;

use crate::basis::{self, TensorRule};
use crate::error::{Error, Result};
use crate::fem::{FeProblem, State};
use crate::mesh::{transfer, BoundaryTag, MeshHierarchy, MeshLevel};

/// `‖∇·v‖_{L²}` by 3×3 Gauss quadrature. Elements touching an obstacle corner
/// are skipped when `exclude_corners` is set, since the divergence is singular there.
pub fn divergence_norm(m: &MeshLevel, velocity: &[f64], exclude_corners: bool) -> Result<f64> {
    let nn = m.num_nodes();
    if velocity.len() < 2 * nn {
        return Err(Error::dim("velocity length", 2 * nn, velocity.len()));
    }
    let skip = if exclude_corners { m.obstacle_corner_elements() } else { Vec::new() };
    let rule = TensorRule::gauss(3);
    let mut sum = 0.0;
    for (e, nodes) in m.elem_nodes.iter().enumerate() {
        if skip.contains(&e) {
            continue;
        }
        let [hx, hy] = m.element_size[e];
        for q in 0..rule.len() {
            let g = &rule.grads[q];
            let div: f64 =
                (0..9).map(|a| velocity[nodes[a]] * g[a][0] / hx + velocity[nn + nodes[a]] * g[a][1] / hy).sum();
            sum += rule.weights[q] * hx * hy * div * div;
        }
    }
    Ok(sum.sqrt())
}

/// How drag and lift are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForceMethod {
    /// Weak-form residual tested with the unit vector on the obstacle nodes.
    Residual,
    /// Direct quadrature of the stress along the obstacle edges.
    Boundary,
}

/// Force `(drag, lift)` exerted by the fluid on the obstacle,
/// `F = ∮ (−ν∇v + pI) n ds` with `n` the outward normal of the fluid domain.
///
/// The residual method uses `prev` (the state one time step earlier) for the
/// time derivative; without it the flow is treated as steady.
pub fn drag_lift(problem: &FeProblem, x: &State, prev: Option<&State>, method: ForceMethod) -> Result<(f64, f64)> {
    problem.check_state(x)?;
    if let Some(p) = prev {
        problem.check_state(p)?;
        if p.level != x.level {
            return Err(Error::dim("previous state level", x.level, p.level));
        }
    }
    match method {
        ForceMethod::Residual => residual_force(problem, x, prev),
        ForceMethod::Boundary => Ok(boundary_force(problem, x)),
    }
}

fn residual_force(problem: &FeProblem, x: &State, prev: Option<&State>) -> Result<(f64, f64)> {
    let m = problem.level(x.level);
    let disc = problem.disc(x.level);
    let params = problem.params();
    let nn = m.num_nodes();
    let on_obstacle: Vec<bool> = m.node_tag.iter().map(|t| *t == Some(BoundaryTag::Obstacle)).collect();
    let inv_k = match prev {
        Some(_) if params.timestep.is_finite() => 1.0 / params.timestep,
        _ => 0.0,
    };
    let mut force = [0.0; 2];
    for e in 0..m.num_elements() {
        let nodes = &m.elem_nodes[e];
        if !nodes.iter().any(|&n| on_obstacle[n]) {
            continue;
        }
        let em = disc.element_matrices(e);
        for q in &em.gauss4 {
            let (mut v, mut g, mut p, mut dv) = ([0.0; 2], [[0.0; 2]; 2], 0.0, [0.0; 2]);
            for a in 0..9 {
                let n = nodes[a];
                for c in 0..2 {
                    let u = x.x[c * nn + n];
                    v[c] += q.phi[a] * u;
                    g[c][0] += q.grad[a][0] * u;
                    g[c][1] += q.grad[a][1] * u;
                    if let Some(pr) = prev {
                        dv[c] += q.phi[a] * (u - pr.x[c * nn + n]);
                    }
                }
                p += q.phi[a] * x.x[2 * nn + n];
            }
            for a in (0..9).filter(|&a| on_obstacle[nodes[a]]) {
                for c in 0..2 {
                    let conv = v[0] * g[c][0] + v[1] * g[c][1];
                    let r = inv_k * dv[c] * q.phi[a]
                        + (if params.convection { conv } else { 0.0 }) * q.phi[a]
                        + params.viscosity * (g[c][0] * q.grad[a][0] + g[c][1] * q.grad[a][1])
                        - p * q.grad[a][c];
                    force[c] -= q.w * r;
                }
            }
        }
    }
    Ok((force[0], force[1]))
}

fn boundary_force(problem: &FeProblem, x: &State) -> (f64, f64) {
    let m = problem.level(x.level);
    let nu = problem.params().viscosity;
    let nn = m.num_nodes();
    let gauss = basis::gauss_1d(3);
    let mut force = [0.0; 2];
    for edge in m.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Obstacle) {
        let e = edge.element;
        let nodes = &m.elem_nodes[e];
        let [hx, hy] = m.element_size[e];
        let (normal, len) = match edge.side {
            0 => ([0.0, -1.0], hx),
            1 => ([1.0, 0.0], hy),
            2 => ([0.0, 1.0], hx),
            _ => ([-1.0, 0.0], hy),
        };
        for &(s, w) in &gauss {
            let xi = match edge.side {
                0 => [s, 0.0],
                1 => [1.0, s],
                2 => [s, 1.0],
                _ => [0.0, s],
            };
            let phi = basis::q2_values(xi[0], xi[1]);
            let gr = basis::q2_gradients(xi[0], xi[1]);
            let mut g = [[0.0; 2]; 2];
            let mut p = 0.0;
            for a in 0..9 {
                for c in 0..2 {
                    let u = x.x[c * nn + nodes[a]];
                    g[c][0] += u * gr[a][0] / hx;
                    g[c][1] += u * gr[a][1] / hy;
                }
                p += phi[a] * x.x[2 * nn + nodes[a]];
            }
            for c in 0..2 {
                let t = nu * (g[c][0] * normal[0] + g[c][1] * normal[1]) - p * normal[c];
                force[c] -= w * len * t;
            }
        }
    }
    (force[0], force[1])
}

/// Summary of a signal over an evaluation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillationStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub amplitude: f64,
    /// `NaN` when fewer than two mean crossings exist.
    pub frequency: f64,
    pub frequency_defined: bool,
    pub window: (f64, f64),
}

/// Min, max, mean and amplitude over `t ∈ [t_a, t_b]`, and the frequency from
/// the upward crossings of the mean (linearly interpolated in time).
pub fn oscillation_stats(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<OscillationStats> {
    if times.len() != values.len() {
        return Err(Error::dim("series length", times.len(), values.len()));
    }
    let pts: Vec<(f64, f64)> =
        times.iter().zip(values).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(t, v)| (*t, *v)).collect();
    if pts.is_empty() {
        return Err(Error::Data(format!("no samples in window {window:?}")));
    }
    let min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let mut crossings = Vec::new();
    if max > min {
        for w in pts.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if v0 < mean && v1 >= mean {
                crossings.push(t0 + (mean - v0) / (v1 - v0) * (t1 - t0));
            }
        }
    }
    let (frequency, frequency_defined) = if crossings.len() >= 2 {
        let periods = (crossings.len() - 1) as f64;
        (periods / (crossings[crossings.len() - 1] - crossings[0]), true)
    } else {
        (f64::NAN, false)
    };
    Ok(OscillationStats { min, max, mean, amplitude: max - min, frequency, frequency_defined, window })
}

/// `|v(x) − v_ref(x)|` at the nodes of the reference level. A coarser `x`
/// is prolongated first.
pub fn velocity_error_field(h: &MeshHierarchy, x: &State, reference: &State) -> Result<Vec<f64>> {
    if x.level > reference.level {
        return Err(Error::dim("state level", reference.level, x.level));
    }
    let mut v = x.velocity().to_vec();
    for l in x.level..reference.level {
        v = transfer::prolongate(h, l, &v, 2)?;
    }
    let nn = h.level(reference.level).num_nodes();
    if reference.x.len() != 3 * nn {
        return Err(Error::dim("reference state length", 3 * nn, reference.x.len()));
    }
    Ok((0..nn).map(|n| (v[n] - reference.x[n]).hypot(v[nn + n] - reference.x[nn + n])).collect())
}

/// Time series of the functionals recorded during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FunctionalSeries {
    pub times: Vec<f64>,
    pub drag: Vec<f64>,
    pub lift: Vec<f64>,
    pub divergence: Vec<f64>,
}

impl FunctionalSeries {
    pub fn push(&mut self, t: f64, drag: f64, lift: f64, div: f64) {
        self.times.push(t);
        self.drag.push(drag);
        self.lift.push(lift);
        self.divergence.push(div);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time", "drag", "lift", "div_norm"])?;
        for i in 0..self.len() {
            w.write_record([sig6(self.times[i]), sig6(self.drag[i]), sig6(self.lift[i]), sig6(self.divergence[i])])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut s = Self::default();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Data(format!("bad number in column {i} of {}", path.display())))
            };
            s.push(f(0)?, f(1)?, f(2)?, f(3)?);
        }
        Ok(s)
    }
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// Drag and lift statistics of one run, in the column layout of the results table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunStats {
    pub drag: OscillationStats,
    pub lift: OscillationStats,
}

impl RunStats {
    pub fn from_series(s: &FunctionalSeries, window: (f64, f64)) -> Result<Self> {
        let lift = oscillation_stats(&s.times, &s.lift, window)?;
        let mut drag = oscillation_stats(&s.times, &s.drag, window)?;
        // the drag oscillates at twice the shedding frequency; report the shedding frequency
        drag.frequency = lift.frequency;
        drag.frequency_defined = lift.frequency_defined;
        Ok(Self { drag, lift })
    }

    pub const HEADER: [&'static str; 11] = [
        "name",
        "drag_min",
        "drag_max",
        "drag_mean",
        "drag_ampl",
        "lift_min",
        "lift_max",
        "lift_mean",
        "lift_ampl",
        "freq",
        "window",
    ];

    pub fn record(&self, name: &str) -> Vec<String> {
        let (d, l) = (&self.drag, &self.lift);
        vec![
            name.to_string(),
            sig6(d.min),
            sig6(d.max),
            sig6(d.mean),
            sig6(d.amplitude),
            sig6(l.min),
            sig6(l.max),
            sig6(l.mean),
            sig6(l.amplitude),
            sig6(l.frequency),
            format!("{}-{}", sig6(d.window.0), sig6(d.window.1)),
        ]
    }

    /// Percent error `|a − a_ref| / |a_ref| · 100` per column.
    pub fn relative_error(&self, reference: &RunStats) -> [f64; 9] {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs() * 100.0;
        let (d, l, dr, lr) = (&self.drag, &self.lift, &reference.drag, &reference.lift);
        [
            rel(d.min, dr.min),
            rel(d.max, dr.max),
            rel(d.mean, dr.mean),
            rel(d.amplitude, dr.amplitude),
            rel(l.min, lr.min),
            rel(l.max, lr.max),
            rel(l.mean, lr.mean),
            rel(l.amplitude, lr.amplitude),
            rel(l.frequency, lr.frequency),
        ]
    }
}

/// Writes a one-header CSV of stats rows.
pub fn write_stats_csv(path: &Path, rows: &[(String, RunStats)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RunStats::HEADER)?;
    for (name, s) in rows {
        w.write_record(s.record(name))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes relative errors (percent) of each row against `reference`.
pub fn write_relative_error_csv(path: &Path, rows: &[(String, RunStats)], reference: &RunStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&RunStats::HEADER[..10])?;
    for (name, s) in rows {
        let mut rec = vec![name.clone()];
        rec.extend(s.relative_error(reference).iter().map(|v| format!("{v:.2}")));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{BoundaryConditions, FlowParams};
    use crate::mesh::build_channel_mesh;

    fn unit_square() -> MeshLevel {
        MeshLevel::rectangle(1.0, 1.0, 0.25).unwrap()
    }

    fn interpolate(m: &MeshLevel, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let nn = m.num_nodes();
        let mut v = vec![0.0; 2 * nn];
        for (n, p) in m.nodes.iter().enumerate() {
            let [a, b] = f(p[0], p[1]);
            v[n] = a;
            v[nn + n] = b;
        }
        v
    }

    #[test]
    fn divergence_of_simple_fields() {
        let m = unit_square();
        assert!(divergence_norm(&m, &interpolate(&m, |_, _| [0.3, -2.0]), false).unwrap() < 1e-14);
        assert!(divergence_norm(&m, &interpolate(&m, |x, y| [x, -y]), false).unwrap() < 1e-13);
        let d = divergence_norm(&m, &interpolate(&m, |x, y| [x, y]), false).unwrap();
        assert!((d - 2.0).abs() < 1e-13);
    }

    #[test]
    fn corner_elements_are_excluded() {
        let m = build_channel_mesh(2.25, 0.4, [0.3, 0.15], 0.1, 0.05).unwrap();
        let v = interpolate(&m, |x, y| [x, y]);
        let full = divergence_norm(&m, &v, false).unwrap();
        let cut = divergence_norm(&m, &v, true).unwrap();
        let area = m.geometry.area();
        assert!((full - 2.0 * area.sqrt()).abs() < 1e-12);
        assert!((cut - 2.0 * (area - 12.0 * 0.05 * 0.05).sqrt()).abs() < 1e-12);
    }

    fn channel_problem() -> FeProblem {
        let m = build_channel_mesh(2.25, 0.4, [0.3, 0.15], 0.1, 0.05).unwrap();
        let p = FlowParams::channel(1.0, f64::INFINITY, 0.3, 0.1);
        FeProblem::new(MeshHierarchy::new(m, 2).unwrap(), p, BoundaryConditions::channel(0.3, 0.4, 0.0)).unwrap()
    }

    #[test]
    fn pressure_on_one_face_gives_face_force() {
        let pb = channel_problem();
        let m = pb.level(1);
        let nn = m.num_nodes();
        let mut x = State::zeros(&pb, 1, 0.0);
        // constant pressure: the closed contour integral vanishes
        x.x[2 * nn..].fill(1.0);
        for method in [ForceMethod::Residual, ForceMethod::Boundary] {
            let (d, l) = drag_lift(&pb, &x, None, method).unwrap();
            assert!(d.abs() < 1e-12 && l.abs() < 1e-12, "{method:?}: {d} {l}");
        }
        // p = 1 left of the obstacle's centre line, 0 right of it: only the left face pushes
        for (n, p) in m.nodes.iter().enumerate() {
            x.x[2 * nn + n] = if p[0] < 0.3 { 1.0 } else { 0.0 };
        }
        let (d, l) = drag_lift(&pb, &x, None, ForceMethod::Boundary).unwrap();
        assert!((d - 0.1).abs() < 1e-12, "drag {d}");
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn residual_and_boundary_forces_agree_for_stokes_flow() {
        use crate::solver::{newton_solve, SolverConfig};
        let m = build_channel_mesh(2.25, 0.4, [0.3, 0.15], 0.1, 0.05).unwrap();
        let mut p = FlowParams::channel(1.0, f64::INFINITY, 0.3, 0.1);
        p.lps_alpha0 = 1.0 / p.viscosity;
        let pb =
            FeProblem::new(MeshHierarchy::new(m, 3).unwrap(), p, BoundaryConditions::channel(0.3, 0.4, 0.0)).unwrap();
        let cfg = SolverConfig { gmres_tol: 1e-10, ..Default::default() };
        // the boundary integral sees the corner singularities and converges slowly,
        // the residual form is nearly mesh independent
        let mut residual_drag = Vec::new();
        let gaps: Vec<f64> = (1..3)
            .map(|l| {
                let mut x = State::zeros(&pb, l, 1.0);
                pb.apply_dirichlet(&mut x, 1.0);
                let rhs = vec![0.0; x.x.len()];
                let (x, _) = newton_solve(&pb, x, &rhs, &cfg).unwrap();
                let (dr, lr) = drag_lift(&pb, &x, None, ForceMethod::Residual).unwrap();
                let (db, lb) = drag_lift(&pb, &x, None, ForceMethod::Boundary).unwrap();
                assert!(dr > 0.0);
                residual_drag.push(dr);
                ((dr - db).abs() / dr).max((lr - lb).abs() / dr)
            })
            .collect();
        assert!(gaps[0] < 0.05, "{gaps:?}");
        assert!(gaps[1] < 0.8 * gaps[0], "{gaps:?}");
        assert!((residual_drag[0] - residual_drag[1]).abs() < 0.005 * residual_drag[1]);
    }

    #[test]
    fn synthetic_sinusoid_frequency() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let f = 3.9;
        let vals: Vec<f64> = times.iter().map(|t| 0.3 + (2.0 * std::f64::consts::PI * f * t).sin()).collect();
        let s = oscillation_stats(&times, &vals, (0.0, 10.0)).unwrap();
        assert!((s.frequency - f).abs() < 0.02, "{}", s.frequency);
        assert!((s.mean - 0.3).abs() < 0.01);
        assert!((s.amplitude - 2.0).abs() < 0.01);
        let flat = oscillation_stats(&times, &vec![1.0; times.len()], (0.0, 10.0)).unwrap();
        assert_eq!(flat.amplitude, 0.0);
        assert!(flat.frequency.is_nan() && !flat.frequency_defined);
    }

    #[test]
    fn error_field_of_offset_state() {
        let m = build_channel_mesh(2.25, 0.4, [0.3, 0.15], 0.1, 0.05).unwrap();
        let h = MeshHierarchy::new(m, 2).unwrap();
        let nc = h.level(0).num_nodes();
        let nf = h.level(1).num_nodes();
        let coarse = State { level: 0, t: 0.0, x: [vec![0.5; nc], vec![0.0; 2 * nc]].concat() };
        let fine = State { level: 1, t: 0.0, x: vec![0.0; 3 * nf] };
        let e = velocity_error_field(&h, &coarse, &fine).unwrap();
        assert!(e.iter().all(|v| (v - 0.5).abs() < 1e-14));
        let same = velocity_error_field(&h, &fine, &fine).unwrap();
        assert!(same.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sig6_formats() {
        assert_eq!(sig6(0.330112345), "0.330112");
        assert_eq!(sig6(3.8095), "3.80950");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(-0.0040123456), "-0.00401235");
    }

    #[test]
    fn relative_error_of_table_values() {
        let st = |mean: f64| OscillationStats {
            min: mean,
            max: mean,
            mean,
            amplitude: 1.0,
            frequency: 1.0,
            frequency_defined: true,
            window: (0.0, 1.0),
        };
        let a = RunStats { drag: st(0.3301), lift: st(1.0) };
        let b = RunStats { drag: st(0.3244), lift: st(1.0) };
        let e = a.relative_error(&b);
        assert!((e[2] - 1.76).abs() < 0.005, "{}", e[2]);
        assert!(b.relative_error(&b).iter().all(|v| *v == 0.0));
    }
}
