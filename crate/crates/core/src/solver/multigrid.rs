use super::vanka::Vanka;
use super::SolverConfig;
use crate::band::BandLu;
use crate::error::{Error, Result};
use crate::fem::{FeProblem, State, LOCAL};
use crate::mesh::transfer;
use crate::sparse::{norm2, CsrMatrix};

/// Operators of one multigrid level.
#[derive(Clone, Debug)]
pub struct MgLevel {
    pub matrix: CsrMatrix,
    /// Absent on the coarsest level.
    pub smoother: Option<Vanka>,
    /// Unknowns with identity rows; their defects are kept at zero.
    pub dirichlet: Vec<usize>,
}

/// Geometric V-cycle over nested levels of a blocked vector
/// (`components` consecutive scalar nodal blocks).
#[derive(Clone, Debug)]
pub struct Multigrid<'a> {
    pub levels: Vec<MgLevel>,
    prolongation: Vec<&'a CsrMatrix>,
    components: usize,
    coarse: BandLu,
    pub pre_smooth: usize,
    pub post_smooth: usize,
}

/// Reorders a blocked vector so that the unknowns of one node are adjacent,
/// which keeps the band of the coarse matrix narrow. `perm[new] = old`.
pub fn interleaved_permutation(nodes: usize, components: usize) -> Vec<usize> {
    (0..nodes * components).map(|new| (new % components) * nodes + new / components).collect()
}

/// Direct solve by banded LU with partial pivoting.
pub fn coarse_direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows {
        return Err(Error::dim("coarse solve right-hand side", a.nrows, b.len()));
    }
    let perm = a.layout.map(|l| interleaved_permutation(l.nodes, l.components));
    Ok(BandLu::factor(a, perm)?.solve(b))
}

impl<'a> Multigrid<'a> {
    /// `prolongation[l]` maps scalar nodal vectors from level `l` to `l + 1`.
    pub fn new(
        levels: Vec<MgLevel>,
        prolongation: Vec<&'a CsrMatrix>,
        components: usize,
        pre_smooth: usize,
        post_smooth: usize,
    ) -> Result<Self> {
        if levels.is_empty() || prolongation.len() + 1 != levels.len() {
            return Err(Error::dim("multigrid transfer count", levels.len().saturating_sub(1), prolongation.len()));
        }
        for (l, lev) in levels.iter().enumerate().skip(1) {
            if lev.smoother.is_none() {
                return Err(Error::Config(format!("multigrid level {l} has no smoother")));
            }
        }
        let a0 = &levels[0].matrix;
        let perm = a0.layout.map(|l| interleaved_permutation(l.nodes, l.components));
        let coarse = BandLu::factor(a0, perm)?;
        Ok(Self { levels, prolongation, components, coarse, pre_smooth, post_smooth })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle on level `l` with zero initial guess. On level 0 this is the direct solve.
    pub fn vcycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        self.cycle(l, b, &mut x);
        x
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l == 0 {
            x.copy_from_slice(&self.coarse.solve(b));
            return;
        }
        let lev = &self.levels[l];
        let smoother = lev.smoother.as_ref().expect("smoother on non-coarsest level");
        smoother.smooth(&lev.matrix, b, x, self.pre_smooth);
        let mut r = vec![0.0; b.len()];
        lev.matrix.residual(b, x, &mut r);
        for &d in &lev.dirichlet {
            r[d] = 0.0;
        }
        let p = self.prolongation[l - 1];
        let (nf, nc) = (p.nrows, p.ncols);
        let mut rc = vec![0.0; nc * self.components];
        for c in 0..self.components {
            p.transpose_matvec(&r[c * nf..(c + 1) * nf], &mut rc[c * nc..(c + 1) * nc]);
        }
        for &d in &self.levels[l - 1].dirichlet {
            rc[d] = 0.0;
        }
        let mut ec = vec![0.0; rc.len()];
        self.cycle(l - 1, &rc, &mut ec);
        let mut ef = vec![0.0; nf];
        for c in 0..self.components {
            p.matvec(&ec[c * nc..(c + 1) * nc], &mut ef);
            for (xi, e) in x[c * nf..(c + 1) * nf].iter_mut().zip(&ef) {
                *xi += e;
            }
        }
        smoother.smooth(&lev.matrix, b, x, self.post_smooth);
    }

    /// Preconditioner application on the finest level.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let top = self.levels.len() - 1;
        if b.len() != self.levels[top].matrix.nrows {
            return Err(Error::dim("V-cycle input", self.levels[top].matrix.nrows, b.len()));
        }
        x.fill(0.0);
        self.cycle(top, b, x);
        Ok(())
    }

    /// Residual contraction of `cycles` stationary V-cycle iterations, for diagnostics.
    pub fn contraction(&self, b: &[f64], cycles: usize) -> f64 {
        let top = self.levels.len() - 1;
        let a = &self.levels[top].matrix;
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        let r0 = norm2(&r);
        for _ in 0..cycles {
            let e = self.vcycle(top, &r);
            for (xi, ei) in x.iter_mut().zip(&e) {
                *xi += ei;
            }
            a.residual(b, &x, &mut r);
        }
        (norm2(&r) / r0).powf(1.0 / cycles as f64)
    }
}

/// Element blocks of a flow level in sweep order: the four element colours
/// one after the other, lexicographic within a colour.
pub fn vanka_blocks(problem: &FeProblem, level: usize) -> Vec<u32> {
    let mesh = problem.level(level);
    let disc = problem.disc(level);
    let mut dofs = Vec::with_capacity(mesh.num_elements() * LOCAL);
    for color in 0..4 {
        for e in (0..mesh.num_elements()).filter(|&e| mesh.element_color(e) == color) {
            dofs.extend_from_slice(disc.element_dofs(e));
        }
    }
    dofs
}

fn dirichlet_dofs(problem: &FeProblem, level: usize) -> Vec<usize> {
    let nn = problem.level(level).num_nodes();
    let nodes = &problem.disc(level).dirichlet_nodes;
    nodes.iter().copied().chain(nodes.iter().map(|n| nn + n)).collect()
}

/// Multigrid preconditioner for the Jacobian at `x`. Coarser levels use the
/// Jacobian of the injected state.
pub fn flow_multigrid<'a>(problem: &'a FeProblem, x: &State, cfg: &SolverConfig) -> Result<Multigrid<'a>> {
    let top = x.level;
    let first = cfg.coarse_level.min(top);
    let h = problem.hierarchy();
    let mut states = vec![x.clone()];
    for l in (first..top).rev() {
        let fine = states.last().unwrap();
        states.push(State { level: l, t: x.t, x: transfer::inject(h, l, &fine.x, 3)? });
    }
    states.reverse();
    let mut levels = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let matrix = problem.assemble_jacobian(s)?;
        let smoother = if i == 0 {
            None
        } else {
            Some(Vanka::new(&matrix, LOCAL, vanka_blocks(problem, s.level), cfg.vanka_damping)?)
        };
        levels.push(MgLevel { matrix, smoother, dirichlet: dirichlet_dofs(problem, s.level) });
    }
    let prolongation = (first..top).map(|l| h.prolongation(l)).collect();
    Multigrid::new(levels, prolongation, 3, cfg.mg_pre_smooth, cfg.mg_post_smooth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::ElementMatrices;
    use crate::mesh::{MeshHierarchy, MeshLevel};
    use crate::sparse::BlockLayout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scalar biquadratic Laplacian with identity rows on the boundary.
    fn poisson(m: &MeshLevel) -> (CsrMatrix, Vec<usize>) {
        let mut a = crate::mesh::scalar_pattern(m);
        let em = ElementMatrices::new(m.h, m.h);
        for nodes in &m.elem_nodes {
            for i in 0..9 {
                for j in 0..9 {
                    let p = a.position(nodes[i], nodes[j]).unwrap();
                    a.values[p] += em.stiffness[i][j];
                }
            }
        }
        let bnd: Vec<usize> = (0..m.num_nodes()).filter(|&n| m.node_tag[n].is_some()).collect();
        for &n in &bnd {
            a.set_identity_row(n);
        }
        (a, bnd)
    }

    fn poisson_mg(h: &MeshHierarchy) -> Multigrid<'_> {
        let levels = (0..h.num_levels())
            .map(|l| {
                let m = h.level(l);
                let (a, bnd) = poisson(m);
                let smoother = (l > 0).then(|| {
                    let mut dofs = Vec::new();
                    for color in 0..4 {
                        for e in (0..m.num_elements()).filter(|&e| m.element_color(e) == color) {
                            dofs.extend(m.elem_nodes[e].iter().map(|&n| n as u32));
                        }
                    }
                    Vanka::new(&a, 9, dofs, 0.8).unwrap()
                });
                MgLevel { matrix: a, smoother, dirichlet: bnd }
            })
            .collect();
        let p = (0..h.num_levels() - 1).map(|l| h.prolongation(l)).collect();
        Multigrid::new(levels, p, 1, 4, 4).unwrap()
    }

    #[test]
    fn two_level_poisson_contracts_error() {
        let h = MeshHierarchy::new(MeshLevel::rectangle(1.0, 1.0, 0.125).unwrap(), 2).unwrap();
        let mg = poisson_mg(&h);
        let a = &mg.levels[1].matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut b: Vec<f64> = (0..a.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &d in &mg.levels[1].dirichlet {
            b[d] = 0.0;
        }
        let exact = coarse_direct_solve(a, &b).unwrap();
        let mut x = vec![0.0; a.nrows];
        let err = |x: &[f64]| norm2(&x.iter().zip(&exact).map(|(u, v)| u - v).collect::<Vec<_>>());
        let mut r = vec![0.0; a.nrows];
        let e0 = err(&x);
        for _ in 0..5 {
            a.residual(&b, &x, &mut r);
            let c = mg.vcycle(1, &r);
            for (xi, ci) in x.iter_mut().zip(&c) {
                *xi += ci;
            }
        }
        let rate = (err(&x) / e0).powf(0.2);
        assert!(rate <= 0.2, "contraction {rate}");
    }

    #[test]
    fn vcycle_is_linear_and_exact_on_coarsest_level() {
        let h = MeshHierarchy::new(MeshLevel::rectangle(1.0, 1.0, 0.25).unwrap(), 2).unwrap();
        let mg = poisson_mg(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n1 = mg.levels[1].matrix.nrows;
        let b: Vec<f64> = (0..n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = mg.vcycle(1, &b);
        let y = mg.vcycle(1, &b.iter().map(|v| 3.5 * v).collect::<Vec<_>>());
        for (u, v) in x.iter().zip(&y) {
            assert!((3.5 * u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        assert!(mg.vcycle(1, &vec![0.0; n1]).iter().all(|v| *v == 0.0));
        let a0 = &mg.levels[0].matrix;
        let b0: Vec<f64> = (0..a0.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x0 = mg.vcycle(0, &b0);
        let mut r = vec![0.0; b0.len()];
        a0.residual(&b0, &x0, &mut r);
        assert!(norm2(&r) < 1e-12 * norm2(&b0));
    }

    #[test]
    fn coarse_direct_solve_matches_dense_oracle() {
        use nalgebra::{DMatrix, DVector};
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut t = Vec::new();
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.2) || i == j {
                    let v = rng.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 };
                    t.push((i, j, v));
                    d[(i, j)] = v;
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = coarse_direct_solve(&a, &b).unwrap();
        let oracle = d.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-10 * oracle.amax().max(1.0));
        }
        let id = CsrMatrix::identity(5);
        assert_eq!(coarse_direct_solve(&id, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let sing = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(matches!(coarse_direct_solve(&sing, &[1.0, 1.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn interleaving_groups_node_unknowns() {
        let p = interleaved_permutation(4, 3);
        assert_eq!(&p[..6], &[0, 4, 8, 1, 5, 9]);
        let l = BlockLayout::mixed(4);
        assert_eq!(l.dof(2, 1), 9);
    }
}
