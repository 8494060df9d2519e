use super::MeshHierarchy;
use crate::error::{Error, Result};

/// Which cells the network works on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchMode {
    /// One patch per element of the second-finest level (velocity output).
    CoarseElement,
    /// One patch per element of the finest level (stream-function output).
    FineElement,
}

impl PatchMode {
    /// Fine-level nodes per patch side.
    pub fn nodes_per_side(self) -> usize {
        match self {
            PatchMode::CoarseElement => 5,
            PatchMode::FineElement => 3,
        }
    }

    pub fn nodes_per_patch(self) -> usize {
        self.nodes_per_side().pow(2)
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub patch_id: usize,
    /// Mesh level the patch cell lives on.
    pub level: usize,
    /// Element of `level` forming the patch.
    pub cell: usize,
    /// Finest-level elements covered.
    pub element_ids: Vec<usize>,
    pub origin: [f64; 2],
    pub width: f64,
    pub height: f64,
    /// Finest-level nodes of the patch, x running fastest.
    pub nodes: Vec<usize>,
    /// Whether any patch node carries a Dirichlet velocity.
    pub is_boundary: bool,
}

impl Patch {
    pub fn aspect_ratio(&self) -> f64 {
        self.width / self.height
    }
}

/// Lists the patches of the finest two levels in lexicographic order of their
/// lower-left corner.
pub fn enumerate_patches(h: &MeshHierarchy, mode: PatchMode) -> Result<Vec<Patch>> {
    if h.num_levels() < 2 {
        return Err(Error::Config("patches need a hierarchy with at least two levels".into()));
    }
    let fine_level = h.num_levels() - 1;
    let fine = h.level(fine_level);
    let (level, scale) = match mode {
        PatchMode::CoarseElement => (fine_level - 1, 4),
        PatchMode::FineElement => (fine_level, 2),
    };
    let m = h.level(level);
    let side = mode.nodes_per_side();
    let mut patches = Vec::with_capacity(m.num_elements());
    for e in 0..m.num_elements() {
        let [ci, cj] = m.cells[e];
        let mut nodes = Vec::with_capacity(side * side);
        for b in 0..side {
            for a in 0..side {
                let n = fine
                    .node_at(scale * ci + a, scale * cj + b)
                    .ok_or_else(|| Error::Geometry("patch node missing on fine level".into()))?;
                nodes.push(n);
            }
        }
        let element_ids = match mode {
            PatchMode::CoarseElement => h.children[level][e].to_vec(),
            PatchMode::FineElement => vec![e],
        };
        let [w, ht] = m.element_size[e];
        patches.push(Patch {
            patch_id: e,
            level,
            cell: e,
            element_ids,
            origin: m.element_origin(e),
            width: w,
            height: ht,
            is_boundary: nodes.iter().any(|&n| fine.is_dirichlet_node(n)),
            nodes,
        });
    }
    Ok(patches)
}
