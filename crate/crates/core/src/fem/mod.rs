//! Equal-order biquadratic discretization of the incompressible Navier–Stokes
//! equations with local projection pressure stabilization and Crank–Nicolson
//! time stepping.
//!
//! The discrete unknown on a level is one vector `[vx | vy | p]` of nodal
//! values. A time step solves `A(x) = b`, where `b` collects everything known
//! from the previous step (see [`FeProblem::assemble_rhs`]) and
//! [`FeProblem::assemble_residual`] returns `A(x) - b`.

mod assembly;
pub mod element;

use std::sync::OnceLock;

pub use assembly::{lps_project, lps_project_local};
pub use element::{lps_projector, ElementMatrices, QuadPoint};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, MeshHierarchy, MeshLevel};
use crate::sparse::{BlockLayout, CsrMatrix};

/// External body force `f(t, x)`.
pub type Forcing = Box<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;

/// Physical and discretization parameters of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    pub reynolds: f64,
    /// Kinematic viscosity multiplying the diffusion term.
    pub viscosity: f64,
    /// Time step; `f64::INFINITY` drops the mass terms (steady problem).
    pub timestep: f64,
    pub lps_alpha0: f64,
    /// Set to `false` for the Stokes system.
    pub convection: bool,
}

impl FlowParams {
    /// Viscosity from `Re = U_mean · D / ν`, where `U_mean` is the mean of the
    /// parabolic inflow profile with peak `v_max` and `D` the obstacle size.
    pub fn channel(reynolds: f64, timestep: f64, v_max: f64, reference_length: f64) -> Self {
        let u_mean = 2.0 / 3.0 * v_max;
        Self { reynolds, viscosity: u_mean * reference_length / reynolds, timestep, lps_alpha0: 0.05, convection: true }
    }

    fn validate(&self) -> Result<()> {
        if !(self.reynolds > 0.0) || !(self.viscosity > 0.0) || !(self.timestep > 0.0) {
            return Err(Error::Config(format!("Reynolds number, viscosity and time step must be positive: {self:?}")));
        }
        if !(self.lps_alpha0 >= 0.0) {
            return Err(Error::Config(format!("lps_alpha0 must be >= 0, got {}", self.lps_alpha0)));
        }
        Ok(())
    }
}

/// Velocity prescribed on inflow, walls and obstacle. The outflow is left free.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryConditions {
    /// Peak of the parabolic inflow profile.
    pub v_max: f64,
    /// Channel height the profile spans.
    pub height: f64,
    /// The inflow is scaled by `½(1 − cos(πt/ramp_time))` for `t < ramp_time`.
    pub ramp_time: f64,
}

impl BoundaryConditions {
    pub fn channel(v_max: f64, height: f64, ramp_time: f64) -> Self {
        Self { v_max, height, ramp_time }
    }

    /// All prescribed velocities vanish.
    pub fn homogeneous(height: f64) -> Self {
        Self::channel(0.0, height, 0.0)
    }

    pub fn ramp(&self, t: f64) -> f64 {
        if self.ramp_time <= 0.0 || t >= self.ramp_time {
            1.0
        } else if t <= 0.0 {
            0.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / self.ramp_time).cos())
        }
    }

    pub fn inflow(&self, y: f64, t: f64) -> [f64; 2] {
        let h = self.height;
        [self.v_max * 4.0 * y * (h - y) / (h * h) * self.ramp(t), 0.0]
    }

    /// Prescribed velocity at a boundary point, `None` on the outflow.
    pub fn velocity(&self, tag: BoundaryTag, p: [f64; 2], t: f64) -> Option<[f64; 2]> {
        match tag {
            BoundaryTag::Inflow => Some(self.inflow(p[1], t)),
            BoundaryTag::Wall | BoundaryTag::Obstacle => Some([0.0, 0.0]),
            BoundaryTag::Outflow => None,
        }
    }
}

/// Nodal velocity and pressure on one mesh level at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub level: usize,
    pub t: f64,
    /// `[vx | vy | p]`.
    pub x: Vec<f64>,
}

impl State {
    pub fn zeros(problem: &FeProblem, level: usize, t: f64) -> Self {
        Self { level, t, x: vec![0.0; 3 * problem.level(level).num_nodes()] }
    }

    pub fn num_nodes(&self) -> usize {
        self.x.len() / 3
    }

    pub fn vx(&self) -> &[f64] {
        &self.x[..self.num_nodes()]
    }

    pub fn vy(&self) -> &[f64] {
        let n = self.num_nodes();
        &self.x[n..2 * n]
    }

    pub fn p(&self) -> &[f64] {
        &self.x[2 * self.num_nodes()..]
    }

    /// `[vx | vy]`.
    pub fn velocity(&self) -> &[f64] {
        &self.x[..2 * self.num_nodes()]
    }

    pub fn velocity_mut(&mut self) -> &mut [f64] {
        let n = self.num_nodes();
        &mut self.x[..2 * n]
    }
}

/// Per-level assembly data: matrix pattern, element-to-matrix scatter map and
/// the element matrices of every distinct element size.
#[derive(Debug)]
pub struct LevelDisc {
    pub layout: BlockLayout,
    pattern: CsrMatrix,
    scatter: Vec<u32>,
    dofs: Vec<[u32; 27]>,
    class_of: Vec<u32>,
    classes: Vec<ElementMatrices>,
    linear: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    /// Nodes with prescribed velocity.
    pub dirichlet_nodes: Vec<usize>,
}

/// Number of unknowns per element (`[vx, vy, p]` × 9 nodes), local index `c * 9 + a`.
pub const LOCAL: usize = 27;

impl LevelDisc {
    fn new(m: &MeshLevel, params: &FlowParams) -> Self {
        let nn = m.num_nodes();
        let layout = BlockLayout::mixed(nn);
        let node_pattern = crate::mesh::scalar_pattern(m);
        let mut rows = Vec::with_capacity(3 * nn);
        for _c in 0..3 {
            for i in 0..nn {
                let (cols, _) = node_pattern.row(i);
                let mut r = Vec::with_capacity(3 * cols.len());
                for d in 0..3 {
                    r.extend(cols.iter().map(|&j| d * nn + j));
                }
                rows.push(r);
            }
        }
        let pattern = CsrMatrix::from_pattern(3 * nn, 3 * nn, rows).with_layout(layout);

        let mut classes: Vec<ElementMatrices> = Vec::new();
        let mut class_of = Vec::with_capacity(m.num_elements());
        for size in &m.element_size {
            let k = match classes.iter().position(|c| c.size == *size) {
                Some(k) => k,
                None => {
                    classes.push(ElementMatrices::new(size[0], size[1]));
                    classes.len() - 1
                }
            };
            class_of.push(k as u32);
        }
        let alpha: Vec<f64> = classes.iter().map(|c| params.lps_alpha0 * params.reynolds * c.h() * c.h()).collect();
        let linear = classes.iter().zip(&alpha).map(|(c, &a)| linear_element_matrix(c, params, a)).collect();

        let mut dofs = Vec::with_capacity(m.num_elements());
        let mut scatter = Vec::with_capacity(m.num_elements() * LOCAL * LOCAL);
        for nodes in &m.elem_nodes {
            let mut d = [0u32; LOCAL];
            for c in 0..3 {
                for a in 0..9 {
                    d[c * 9 + a] = (c * nn + nodes[a]) as u32;
                }
            }
            for &r in &d {
                for &s in &d {
                    let pos = pattern.position(r as usize, s as usize).expect("element coupling in pattern");
                    scatter.push(pos as u32);
                }
            }
            dofs.push(d);
        }
        let dirichlet_nodes = (0..nn).filter(|&n| m.is_dirichlet_node(n)).collect();
        Self { layout, pattern, scatter, dofs, class_of, classes, linear, alpha, dirichlet_nodes }
    }

    /// Global unknowns of element `e` in local order.
    pub fn element_dofs(&self, e: usize) -> &[u32; 27] {
        &self.dofs[e]
    }

    /// Positions in the matrix value array of the 27×27 element coupling, row major.
    pub fn element_scatter(&self, e: usize) -> &[u32] {
        &self.scatter[e * LOCAL * LOCAL..(e + 1) * LOCAL * LOCAL]
    }

    pub fn element_matrices(&self, e: usize) -> &ElementMatrices {
        &self.classes[self.class_of[e] as usize]
    }

    /// Stabilization parameter of element `e`.
    pub fn alpha(&self, e: usize) -> f64 {
        self.alpha[self.class_of[e] as usize]
    }

    fn linear(&self, e: usize) -> &[f64] {
        &self.linear[self.class_of[e] as usize]
    }

    /// Empty matrix with the sparsity of the mixed system.
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    pub fn num_elements(&self) -> usize {
        self.dofs.len()
    }
}

/// The state-independent part of the element Jacobian.
fn linear_element_matrix(m: &ElementMatrices, params: &FlowParams, alpha: f64) -> Vec<f64> {
    let inv_k = if params.timestep.is_finite() { 1.0 / params.timestep } else { 0.0 };
    let nu = params.viscosity;
    let mut a = vec![0.0; LOCAL * LOCAL];
    let at = |r: usize, s: usize| r * LOCAL + s;
    for i in 0..9 {
        for j in 0..9 {
            let vv = inv_k * m.mass[i][j] + 0.5 * nu * m.stiffness[i][j];
            for c in 0..2 {
                a[at(c * 9 + i, c * 9 + j)] = vv;
                // −(p, ∂_c φ_i)
                a[at(c * 9 + i, 18 + j)] = -m.div[c][j][i];
                // (∂_c v_c, ξ_i)
                a[at(18 + i, c * 9 + j)] = m.div[c][i][j];
            }
            a[at(18 + i, 18 + j)] = alpha * m.lps[i][j];
        }
    }
    a
}

/// The discrete problem on every level of a mesh hierarchy.
pub struct FeProblem {
    hier: MeshHierarchy,
    params: FlowParams,
    bc: BoundaryConditions,
    forcing: Option<Forcing>,
    discs: Vec<OnceLock<LevelDisc>>,
}

impl std::fmt::Debug for FeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeProblem")
            .field("levels", &self.hier.num_levels())
            .field("params", &self.params)
            .field("bc", &self.bc)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl FeProblem {
    pub fn new(hier: MeshHierarchy, params: FlowParams, bc: BoundaryConditions) -> Result<Self> {
        params.validate()?;
        let n = hier.num_levels();
        Ok(Self { hier, params, bc, forcing: None, discs: (0..n).map(|_| OnceLock::new()).collect() })
    }

    pub fn with_forcing(mut self, f: Forcing) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.hier
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn num_levels(&self) -> usize {
        self.hier.num_levels()
    }

    pub fn level(&self, l: usize) -> &MeshLevel {
        self.hier.level(l)
    }

    pub fn disc(&self, l: usize) -> &LevelDisc {
        self.discs[l].get_or_init(|| LevelDisc::new(self.hier.level(l), &self.params))
    }

    pub fn num_dofs(&self, l: usize) -> usize {
        3 * self.level(l).num_nodes()
    }

    pub(crate) fn check_state(&self, x: &State) -> Result<()> {
        if x.level >= self.num_levels() {
            return Err(Error::dim("state level", self.num_levels() - 1, x.level));
        }
        if x.x.len() != self.num_dofs(x.level) {
            return Err(Error::dim("state length", self.num_dofs(x.level), x.x.len()));
        }
        Ok(())
    }

    /// Prescribed velocity of `node` on `level`, `None` if the node is free.
    pub fn dirichlet_value(&self, level: usize, node: usize, t: f64) -> Option<[f64; 2]> {
        let m = self.level(level);
        m.node_tag[node].and_then(|tag| self.bc.velocity(tag, m.nodes[node], t))
    }

    /// Sets all prescribed velocity values of `x` to the boundary data at time `t`.
    pub fn apply_dirichlet(&self, x: &mut State, t: f64) {
        let nn = x.num_nodes();
        for &n in &self.disc(x.level).dirichlet_nodes {
            let v = self.dirichlet_value(x.level, n, t).expect("Dirichlet node has a value");
            x.x[n] = v[0];
            x.x[nn + n] = v[1];
        }
    }

    /// Sets the prescribed velocity entries of a correction or defect to zero.
    pub fn zero_dirichlet(&self, level: usize, v: &mut [f64]) {
        let nn = self.level(level).num_nodes();
        for &n in &self.disc(level).dirichlet_nodes {
            v[n] = 0.0;
            v[nn + n] = 0.0;
        }
    }

    pub(crate) fn forcing_at(&self, t: f64, p: [f64; 2]) -> [f64; 2] {
        self.forcing.as_ref().map_or([0.0, 0.0], |f| f(t, p))
    }

    pub(crate) fn has_forcing(&self) -> bool {
        self.forcing.is_some()
    }
}
