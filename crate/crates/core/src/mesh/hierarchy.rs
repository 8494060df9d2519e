use std::sync::OnceLock;

use super::{refine_uniform, MeshLevel};
use crate::band::BandLu;
use crate::basis::{self, TensorRule};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Nested meshes ordered coarse to fine, with parent/child maps and the
/// scalar biquadratic prolongation between consecutive levels.
#[derive(Debug)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `parent[l][e]` is the level `l-1` parent of element `e` on level `l` (empty for l = 0).
    pub parent: Vec<Vec<usize>>,
    /// `children[l][e]` are the four level `l+1` children of element `e` (empty for the finest level).
    pub children: Vec<Vec<[usize; 4]>>,
    prolongation: Vec<CsrMatrix>,
    mass: Vec<OnceLock<CsrMatrix>>,
    mass_lu: Vec<OnceLock<BandLu>>,
}

impl MeshHierarchy {
    /// Refines `coarse` until `num_levels` levels exist.
    pub fn new(coarse: MeshLevel, num_levels: usize) -> Result<Self> {
        if num_levels == 0 {
            return Err(Error::Config("a hierarchy needs at least one level".into()));
        }
        let mut levels = vec![coarse];
        while levels.len() < num_levels {
            let next = refine_uniform(levels.last().unwrap());
            levels.push(next);
        }
        let mut parent = vec![Vec::new()];
        let mut children = Vec::new();
        for l in 1..levels.len() {
            let (c, f) = (&levels[l - 1], &levels[l]);
            let mut par = vec![0; f.num_elements()];
            let mut ch = vec![[usize::MAX; 4]; c.num_elements()];
            for (e, cell) in f.cells.iter().enumerate() {
                let p = c
                    .element_at(cell[0] / 2, cell[1] / 2)
                    .ok_or_else(|| Error::Geometry("refined cell without parent".into()))?;
                par[e] = p;
                ch[p][(cell[0] % 2) + 2 * (cell[1] % 2)] = e;
            }
            parent.push(par);
            children.push(ch);
        }
        children.push(Vec::new());
        let prolongation =
            (0..levels.len() - 1).map(|l| build_prolongation(&levels[l], &levels[l + 1], &parent[l + 1])).collect();
        let n = levels.len();
        Ok(Self {
            levels,
            parent,
            children,
            prolongation,
            mass: (0..n).map(|_| OnceLock::new()).collect(),
            mass_lu: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().unwrap()
    }

    pub fn level(&self, l: usize) -> &MeshLevel {
        &self.levels[l]
    }

    /// Scalar prolongation from level `l` to `l + 1`.
    pub fn prolongation(&self, l: usize) -> &CsrMatrix {
        &self.prolongation[l]
    }

    /// Scalar Q2 mass matrix of level `l`.
    pub fn mass(&self, l: usize) -> &CsrMatrix {
        self.mass[l].get_or_init(|| scalar_mass(&self.levels[l]))
    }

    pub(crate) fn mass_lu(&self, l: usize) -> &BandLu {
        self.mass_lu[l].get_or_init(|| BandLu::factor(self.mass(l), None).expect("mass matrix is nonsingular"))
    }
}

/// Node-to-node sparsity pattern of the scalar Q2 space.
pub fn scalar_pattern(m: &MeshLevel) -> CsrMatrix {
    let mut rows = vec![Vec::new(); m.num_nodes()];
    for nodes in &m.elem_nodes {
        for &i in nodes {
            rows[i].extend_from_slice(nodes);
        }
    }
    CsrMatrix::from_pattern(m.num_nodes(), m.num_nodes(), rows)
}

fn scalar_mass(m: &MeshLevel) -> CsrMatrix {
    let rule = TensorRule::gauss(3);
    let mut ref_mass = [[0.0; 9]; 9];
    for q in 0..rule.len() {
        let (w, v) = (rule.weights[q], &rule.values[q]);
        for i in 0..9 {
            for j in 0..9 {
                ref_mass[i][j] += w * v[i] * v[j];
            }
        }
    }
    let mut a = scalar_pattern(m);
    for (e, nodes) in m.elem_nodes.iter().enumerate() {
        let area = m.element_area(e);
        for i in 0..9 {
            for j in 0..9 {
                let p = a.position(nodes[i], nodes[j]).unwrap();
                a.values[p] += area * ref_mass[i][j];
            }
        }
    }
    a
}

/// Nodal interpolation of the coarse biquadratic space at fine nodes.
fn build_prolongation(coarse: &MeshLevel, fine: &MeshLevel, parent: &[usize]) -> CsrMatrix {
    let mut done = vec![false; fine.num_nodes()];
    let mut triplets = Vec::new();
    for (fe, nodes) in fine.elem_nodes.iter().enumerate() {
        let ce = parent[fe];
        let [ci, cj] = coarse.cells[ce];
        for &fnode in nodes {
            if done[fnode] {
                continue;
            }
            done[fnode] = true;
            // Fine half-lattice spacing is a quarter of the coarse cell.
            let [fi, fj] = fine.node_lattice[fnode];
            let x = (fi as f64 - 4.0 * ci as f64) * 0.25;
            let y = (fj as f64 - 4.0 * cj as f64) * 0.25;
            let phi = basis::q2_values(x, y);
            for (k, &w) in phi.iter().enumerate() {
                if w.abs() > 1e-15 {
                    triplets.push((fnode, coarse.elem_nodes[ce][k], w));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine.num_nodes(), coarse.num_nodes(), &triplets)
}
