use super::element::{lps_projector, ElementMatrices};
use super::{FeProblem, State, LOCAL};
use crate::error::{Error, Result};
use crate::mesh::MeshLevel;
use crate::sparse::CsrMatrix;

#[inline]
fn gather(x: &[f64], dofs: &[u32; LOCAL]) -> [f64; LOCAL] {
    let mut out = [0.0; LOCAL];
    for (o, &d) in out.iter_mut().zip(dofs) {
        *o = x[d as usize];
    }
    out
}

/// Adds `scale · ((v·∇)v, φ_i)` to the velocity rows of `out`.
fn convection_residual(m: &ElementMatrices, xl: &[f64; LOCAL], scale: f64, out: &mut [f64; LOCAL]) {
    for q in &m.gauss4 {
        let (mut v, mut g) = ([0.0; 2], [[0.0; 2]; 2]);
        for j in 0..9 {
            let (ux, uy) = (xl[j], xl[9 + j]);
            v[0] += q.phi[j] * ux;
            v[1] += q.phi[j] * uy;
            g[0][0] += q.grad[j][0] * ux;
            g[0][1] += q.grad[j][1] * ux;
            g[1][0] += q.grad[j][0] * uy;
            g[1][1] += q.grad[j][1] * uy;
        }
        let cx = scale * q.w * (v[0] * g[0][0] + v[1] * g[0][1]);
        let cy = scale * q.w * (v[0] * g[1][0] + v[1] * g[1][1]);
        for i in 0..9 {
            out[i] += cx * q.phi[i];
            out[9 + i] += cy * q.phi[i];
        }
    }
}

/// Adds the derivative of `½((v·∇)v, φ_i)`, i.e. `½((δv·∇)v + (v·∇)δv, φ_i)`.
fn convection_jacobian(m: &ElementMatrices, xl: &[f64; LOCAL], out: &mut [f64]) {
    for q in &m.gauss4 {
        let (mut v, mut g) = ([0.0; 2], [[0.0; 2]; 2]);
        for j in 0..9 {
            let (ux, uy) = (xl[j], xl[9 + j]);
            v[0] += q.phi[j] * ux;
            v[1] += q.phi[j] * uy;
            g[0][0] += q.grad[j][0] * ux;
            g[0][1] += q.grad[j][1] * ux;
            g[1][0] += q.grad[j][0] * uy;
            g[1][1] += q.grad[j][1] * uy;
        }
        let mut adv = [0.0; 9];
        for j in 0..9 {
            adv[j] = v[0] * q.grad[j][0] + v[1] * q.grad[j][1];
        }
        for i in 0..9 {
            let wi = 0.5 * q.w * q.phi[i];
            if wi == 0.0 {
                continue;
            }
            let (r0, r1) = (i * LOCAL, (9 + i) * LOCAL);
            for j in 0..9 {
                let (pj, aj) = (wi * q.phi[j], wi * adv[j]);
                out[r0 + j] += pj * g[0][0] + aj;
                out[r0 + 9 + j] += pj * g[0][1];
                out[r1 + j] += pj * g[1][0];
                out[r1 + 9 + j] += pj * g[1][1] + aj;
            }
        }
    }
}

impl FeProblem {
    /// Crank–Nicolson right-hand side for the step from `prev` to `t_new`:
    /// `(1/k)(v, φ) + ½(f_new + f_prev, φ) − ½((v·∇)v, φ) − (ν/2)(∇v, ∇φ)`
    /// evaluated at the previous velocity. Pressure rows are zero.
    pub fn assemble_rhs(&self, prev: &State, t_new: f64) -> Result<Vec<f64>> {
        self.check_state(prev)?;
        let params = self.params();
        let inv_k = if params.timestep.is_finite() { 1.0 / params.timestep } else { 0.0 };
        let nu = params.viscosity;
        let mesh = self.level(prev.level);
        let disc = self.disc(prev.level);
        let mut b = vec![0.0; prev.x.len()];
        for e in 0..disc.num_elements() {
            let dofs = disc.element_dofs(e);
            let m = disc.element_matrices(e);
            let xl = gather(&prev.x, dofs);
            let mut loc = [0.0; LOCAL];
            for c in 0..2 {
                for i in 0..9 {
                    let mut s = 0.0;
                    for j in 0..9 {
                        s += (inv_k * m.mass[i][j] - 0.5 * nu * m.stiffness[i][j]) * xl[c * 9 + j];
                    }
                    loc[c * 9 + i] = s;
                }
            }
            if params.convection {
                convection_residual(m, &xl, -0.5, &mut loc);
            }
            if self.has_forcing() {
                let o = mesh.element_origin(e);
                for q in &m.gauss3 {
                    let p = [o[0] + q.xi[0] * m.size[0], o[1] + q.xi[1] * m.size[1]];
                    let f0 = self.forcing_at(prev.t, p);
                    let f1 = self.forcing_at(t_new, p);
                    for i in 0..9 {
                        loc[i] += 0.5 * q.w * (f0[0] + f1[0]) * q.phi[i];
                        loc[9 + i] += 0.5 * q.w * (f0[1] + f1[1]) * q.phi[i];
                    }
                }
            }
            for (r, &d) in loc.iter().zip(dofs) {
                b[d as usize] += r;
            }
        }
        Ok(b)
    }

    /// `A(x) − rhs`. Rows of prescribed velocities hold `x − g(t)` instead.
    pub fn assemble_residual(&self, x: &State, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        if rhs.len() != x.x.len() {
            return Err(Error::dim("right-hand side length", x.x.len(), rhs.len()));
        }
        let disc = self.disc(x.level);
        let convection = self.params().convection;
        let mut r: Vec<f64> = rhs.iter().map(|v| -v).collect();
        for e in 0..disc.num_elements() {
            let dofs = disc.element_dofs(e);
            let xl = gather(&x.x, dofs);
            let lin = disc.linear(e);
            let mut loc = [0.0; LOCAL];
            for (row, l) in lin.chunks_exact(LOCAL).zip(loc.iter_mut()) {
                *l = row.iter().zip(&xl).map(|(a, b)| a * b).sum();
            }
            if convection {
                convection_residual(disc.element_matrices(e), &xl, 0.5, &mut loc);
            }
            for (v, &d) in loc.iter().zip(dofs) {
                r[d as usize] += v;
            }
        }
        let nn = x.num_nodes();
        for &n in &disc.dirichlet_nodes {
            let g = self.dirichlet_value(x.level, n, x.t).expect("Dirichlet node has a value");
            r[n] = x.x[n] - g[0];
            r[nn + n] = x.x[nn + n] - g[1];
        }
        Ok(r)
    }

    /// Analytic Jacobian of [`assemble_residual`](Self::assemble_residual) at `x`.
    pub fn assemble_jacobian(&self, x: &State) -> Result<CsrMatrix> {
        let mut a = self.disc(x.level).pattern().clone();
        self.assemble_jacobian_into(x, &mut a)?;
        Ok(a)
    }

    /// Re-fills a matrix obtained from an earlier call or from the level pattern.
    pub fn assemble_jacobian_into(&self, x: &State, a: &mut CsrMatrix) -> Result<()> {
        self.check_state(x)?;
        let disc = self.disc(x.level);
        if a.nnz() != disc.pattern().nnz() || a.nrows != x.x.len() {
            return Err(Error::dim("Jacobian pattern", disc.pattern().nnz(), a.nnz()));
        }
        let convection = self.params().convection;
        a.zero_values();
        let mut loc = vec![0.0; LOCAL * LOCAL];
        for e in 0..disc.num_elements() {
            loc.copy_from_slice(disc.linear(e));
            if convection {
                let xl = gather(&x.x, disc.element_dofs(e));
                convection_jacobian(disc.element_matrices(e), &xl, &mut loc);
            }
            for (v, &pos) in loc.iter().zip(disc.element_scatter(e)) {
                a.values[pos as usize] += v;
            }
        }
        let nn = x.num_nodes();
        for &n in &disc.dirichlet_nodes {
            a.set_identity_row(n);
            a.set_identity_row(nn + n);
        }
        Ok(())
    }
}

/// Elementwise L²-projection of a biquadratic scalar field onto bilinear
/// functions, returned as the nine nodal values per element. The projection
/// is discontinuous across elements and therefore not a global nodal vector.
pub fn lps_project(m: &MeshLevel, p: &[f64]) -> Result<Vec<[f64; 9]>> {
    if p.len() != m.num_nodes() {
        return Err(Error::dim("lps_project input", m.num_nodes(), p.len()));
    }
    Ok(m.elem_nodes
        .iter()
        .map(|nodes| {
            let mut local = [0.0; 9];
            for (l, &n) in local.iter_mut().zip(nodes) {
                *l = p[n];
            }
            lps_project_local(&local)
        })
        .collect())
}

/// Projection of one element's nodal values.
pub fn lps_project_local(p: &[f64; 9]) -> [f64; 9] {
    let pi = lps_projector();
    let mut out = [0.0; 9];
    for (o, row) in out.iter_mut().zip(pi) {
        *o = row.iter().zip(p).map(|(a, b)| a * b).sum();
    }
    out
}
