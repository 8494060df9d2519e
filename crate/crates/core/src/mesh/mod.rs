//! Structured quadrilateral meshes of the channel-with-obstacle domain, their
//! uniform refinement hierarchy, patches and inter-level transfer.

mod hierarchy;
mod patch;
pub mod transfer;
pub mod vtk;

pub use hierarchy::{scalar_pattern, MeshHierarchy};
pub use patch::{enumerate_patches, Patch, PatchMode};

use crate::basis;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const LATTICE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Inflow,
    Outflow,
    Wall,
    Obstacle,
}

impl BoundaryTag {
    /// Integer code used in exported files (0 is reserved for "interior").
    pub fn code(self) -> i32 {
        match self {
            BoundaryTag::Inflow => 1,
            BoundaryTag::Outflow => 2,
            BoundaryTag::Wall => 3,
            BoundaryTag::Obstacle => 4,
        }
    }

    /// Velocity is prescribed everywhere except on the do-nothing outflow.
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryTag::Outflow)
    }

    // Nodes shared by two boundary parts take the tag of higher precedence;
    // wall wins at channel corners.
    fn precedence(self) -> u8 {
        match self {
            BoundaryTag::Outflow => 0,
            BoundaryTag::Inflow => 1,
            BoundaryTag::Obstacle => 2,
            BoundaryTag::Wall => 3,
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn square(center: [f64; 2], side: f64) -> Self {
        Self {
            x0: center[0] - 0.5 * side,
            y0: center[1] - 0.5 * side,
            x1: center[0] + 0.5 * side,
            y1: center[1] + 0.5 * side,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Outer channel `[0, length] × [0, height]` with an optional square hole.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelGeometry {
    pub length: f64,
    pub height: f64,
    pub obstacle: Option<Rect>,
}

impl ChannelGeometry {
    pub fn area(&self) -> f64 {
        self.length * self.height - self.obstacle.map_or(0.0, |o| o.width() * o.height())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub element: usize,
    /// Local side of the element: 0 bottom, 1 right, 2 top, 3 left.
    pub side: usize,
    pub tag: BoundaryTag,
}

/// One level of the structured mesh together with its biquadratic node layout.
///
/// Vertices, Q2 nodes and elements are numbered lexicographically by
/// coordinate (x first, then y).
#[derive(Clone, Debug)]
pub struct MeshLevel {
    pub level_index: usize,
    pub h: f64,
    pub geometry: ChannelGeometry,
    /// Lattice cell counts of the bounding rectangle.
    pub nx: usize,
    pub ny: usize,
    /// Lower-left lattice index of every element.
    pub cells: Vec<[usize; 2]>,
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex indices: lower-left, lower-right, upper-right, upper-left.
    pub elements: Vec<[usize; 4]>,
    pub element_size: Vec<[f64; 2]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Biquadratic nodes (vertices, edge midpoints, cell centres).
    pub nodes: Vec<[f64; 2]>,
    /// Half-spacing lattice index of every node.
    pub node_lattice: Vec<[usize; 2]>,
    pub elem_nodes: Vec<[usize; 9]>,
    pub node_tag: Vec<Option<BoundaryTag>>,
    cell_index: Vec<usize>,
    node_index: Vec<usize>,
}

/// Builds the level-0 mesh of the channel `[0,length]×[0,height]` with a square
/// obstacle removed. All dimensions must lie on the `h0` lattice.
pub fn build_channel_mesh(
    length: f64,
    height: f64,
    obstacle_center: [f64; 2],
    obstacle_side: f64,
    h0: f64,
) -> Result<MeshLevel> {
    let obstacle = Rect::square(obstacle_center, obstacle_side);
    if !(obstacle.x0 > 0.0 && obstacle.y0 > 0.0 && obstacle.x1 < length && obstacle.y1 < height) {
        return Err(Error::Geometry(format!(
            "obstacle {obstacle:?} does not lie strictly inside [0,{length}]x[0,{height}]"
        )));
    }
    let geometry = ChannelGeometry { length, height, obstacle: Some(obstacle) };
    MeshLevel::structured(geometry, h0)
}

fn lattice_count(value: f64, h: f64, what: &str) -> Result<usize> {
    let n = value / h;
    let r = n.round();
    if r < 0.0 || (n - r).abs() > LATTICE_TOL * n.abs().max(1.0) {
        return Err(Error::Geometry(format!("{what} = {value} is not an integer multiple of h = {h}")));
    }
    Ok(r as usize)
}

impl MeshLevel {
    /// Rectangle `[0,length]×[0,height]` without obstacle.
    pub fn rectangle(length: f64, height: f64, h: f64) -> Result<Self> {
        Self::structured(ChannelGeometry { length, height, obstacle: None }, h)
    }

    fn structured(geometry: ChannelGeometry, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Geometry(format!("mesh size must be positive, got {h}")));
        }
        let nx = lattice_count(geometry.length, h, "length")?;
        let ny = lattice_count(geometry.height, h, "height")?;
        if nx == 0 || ny == 0 {
            return Err(Error::Geometry("empty channel".into()));
        }
        let hole = match geometry.obstacle {
            Some(o) => {
                let i0 = lattice_count(o.x0, h, "obstacle x0")?;
                let i1 = lattice_count(o.x1, h, "obstacle x1")?;
                let j0 = lattice_count(o.y0, h, "obstacle y0")?;
                let j1 = lattice_count(o.y1, h, "obstacle y1")?;
                if i1 <= i0 || j1 <= j0 {
                    return Err(Error::Geometry("degenerate obstacle".into()));
                }
                Some((i0, i1, j0, j1))
            }
            None => None,
        };
        let mut cells = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                let inside = hole.is_some_and(|(i0, i1, j0, j1)| i >= i0 && i < i1 && j >= j0 && j < j1);
                if !inside {
                    cells.push([i, j]);
                }
            }
        }
        Ok(Self::from_cells(0, h, geometry, nx, ny, cells))
    }

    /// Assembles all connectivity from lexicographically sorted lattice cells.
    fn from_cells(
        level_index: usize,
        h: f64,
        geometry: ChannelGeometry,
        nx: usize,
        ny: usize,
        mut cells: Vec<[usize; 2]>,
    ) -> Self {
        cells.sort_unstable();
        let mut cell_index = vec![NONE; nx * ny];
        for (e, c) in cells.iter().enumerate() {
            cell_index[c[0] * ny + c[1]] = e;
        }

        // Vertices.
        let vy = ny + 1;
        let mut vertex_index = vec![NONE; (nx + 1) * vy];
        for c in &cells {
            for (a, b) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                vertex_index[(c[0] + a) * vy + c[1] + b] = 0;
            }
        }
        let mut vertices = Vec::new();
        for i in 0..=nx {
            for j in 0..=ny {
                let slot = &mut vertex_index[i * vy + j];
                if *slot != NONE {
                    *slot = vertices.len();
                    vertices.push([i as f64 * h, j as f64 * h]);
                }
            }
        }
        let elements: Vec<[usize; 4]> = cells
            .iter()
            .map(|c| {
                let v = |a: usize, b: usize| vertex_index[(c[0] + a) * vy + c[1] + b];
                [v(0, 0), v(1, 0), v(1, 1), v(0, 1)]
            })
            .collect();
        let element_size = vec![[h, h]; cells.len()];

        // Biquadratic nodes on the half-spacing lattice.
        let ny2 = 2 * ny + 1;
        let mut node_index = vec![NONE; (2 * nx + 1) * ny2];
        for c in &cells {
            for b in 0..3 {
                for a in 0..3 {
                    node_index[(2 * c[0] + a) * ny2 + 2 * c[1] + b] = 0;
                }
            }
        }
        let mut nodes = Vec::new();
        let mut node_lattice = Vec::new();
        for i in 0..=2 * nx {
            for j in 0..ny2 {
                let slot = &mut node_index[i * ny2 + j];
                if *slot != NONE {
                    *slot = nodes.len();
                    nodes.push([i as f64 * 0.5 * h, j as f64 * 0.5 * h]);
                    node_lattice.push([i, j]);
                }
            }
        }
        let elem_nodes: Vec<[usize; 9]> = cells
            .iter()
            .map(|c| {
                let mut n = [0; 9];
                for (k, slot) in n.iter_mut().enumerate() {
                    *slot = node_index[(2 * c[0] + k % 3) * ny2 + 2 * c[1] + k / 3];
                }
                n
            })
            .collect();

        // Boundary edges: element sides without a neighbour.
        let mut boundary_edges = Vec::new();
        let mut node_tag: Vec<Option<BoundaryTag>> = vec![None; nodes.len()];
        for (e, c) in cells.iter().enumerate() {
            let (i, j) = (c[0] as isize, c[1] as isize);
            let neighbours = [(i, j - 1), (i + 1, j), (i, j + 1), (i - 1, j)];
            for (side, &(ni, nj)) in neighbours.iter().enumerate() {
                let present = ni >= 0
                    && nj >= 0
                    && (ni as usize) < nx
                    && (nj as usize) < ny
                    && cell_index[ni as usize * ny + nj as usize] != NONE;
                if present {
                    continue;
                }
                let tag = match side {
                    0 if j == 0 => BoundaryTag::Wall,
                    2 if nj as usize == ny => BoundaryTag::Wall,
                    3 if i == 0 => BoundaryTag::Inflow,
                    1 if ni as usize == nx => BoundaryTag::Outflow,
                    _ => BoundaryTag::Obstacle,
                };
                let ev = elements[e];
                let vertices_of_side = [ev[side], ev[(side + 1) % 4]];
                boundary_edges.push(BoundaryEdge { vertices: vertices_of_side, element: e, side, tag });
                for local in side_nodes(side) {
                    let n = elem_nodes[e][local];
                    let slot = &mut node_tag[n];
                    match slot {
                        Some(t) if t.precedence() >= tag.precedence() => {}
                        _ => *slot = Some(tag),
                    }
                }
            }
        }

        Self {
            level_index,
            h,
            geometry,
            nx,
            ny,
            cells,
            vertices,
            elements,
            element_size,
            boundary_edges,
            nodes,
            node_lattice,
            elem_nodes,
            node_tag,
            cell_index,
            node_index,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Element at lattice position `(i, j)`, if present.
    pub fn element_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        let e = self.cell_index[i * self.ny + j];
        (e != NONE).then_some(e)
    }

    /// Node at half-lattice position `(i, j)`, if present.
    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        if i > 2 * self.nx || j > 2 * self.ny {
            return None;
        }
        let n = self.node_index[i * (2 * self.ny + 1) + j];
        (n != NONE).then_some(n)
    }

    pub fn is_dirichlet_node(&self, n: usize) -> bool {
        self.node_tag[n].is_some_and(BoundaryTag::is_dirichlet)
    }

    pub fn element_origin(&self, e: usize) -> [f64; 2] {
        self.vertices[self.elements[e][0]]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [hx, hy] = self.element_size[e];
        hx * hy
    }

    /// Colour in {0,1,2,3}; elements of one colour share no node.
    pub fn element_color(&self, e: usize) -> usize {
        let [i, j] = self.cells[e];
        (i % 2) + 2 * (j % 2)
    }

    /// Elements touching one of the obstacle corners.
    pub fn obstacle_corner_elements(&self) -> Vec<usize> {
        let Some(o) = self.geometry.obstacle else {
            return Vec::new();
        };
        let corners = [[o.x0, o.y0], [o.x1, o.y0], [o.x1, o.y1], [o.x0, o.y1]];
        let tol = 1e-9 * self.h;
        (0..self.num_elements())
            .filter(|&e| {
                self.elements[e].iter().any(|&v| {
                    let p = self.vertices[v];
                    corners.iter().any(|c| (p[0] - c[0]).abs() < tol && (p[1] - c[1]).abs() < tol)
                })
            })
            .collect()
    }

    /// Locates the element containing `p` and the reference coordinates of `p` in it.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let fi = p[0] / self.h;
        let fj = p[1] / self.h;
        if fi < -LATTICE_TOL || fj < -LATTICE_TOL {
            return None;
        }
        let clamp = |f: f64, n: usize| (f.floor().max(0.0) as usize).min(n.saturating_sub(1));
        let (i0, j0) = (clamp(fi, self.nx), clamp(fj, self.ny));
        // A point on a cell boundary may belong to any adjacent existing cell.
        for di in [0isize, -1] {
            for dj in [0isize, -1] {
                let (i, j) = (i0 as isize + di, j0 as isize + dj);
                if i < 0 || j < 0 {
                    continue;
                }
                if let Some(e) = self.element_at(i as usize, j as usize) {
                    let xr = fi - i as f64;
                    let yr = fj - j as f64;
                    let t = 1e-9;
                    if (-t..=1.0 + t).contains(&xr) && (-t..=1.0 + t).contains(&yr) {
                        return Some((e, [xr.clamp(0.0, 1.0), yr.clamp(0.0, 1.0)]));
                    }
                }
            }
        }
        None
    }

    /// Evaluates a nodal scalar field at a physical point.
    pub fn evaluate(&self, field: &[f64], p: [f64; 2]) -> Option<f64> {
        let (e, r) = self.locate(p)?;
        let phi = basis::q2_values(r[0], r[1]);
        Some(self.elem_nodes[e].iter().zip(phi).map(|(&n, w)| field[n] * w).sum())
    }
}

/// Local Q2 node indices along side `side` (0 bottom, 1 right, 2 top, 3 left).
pub fn side_nodes(side: usize) -> [usize; 3] {
    match side {
        0 => [0, 1, 2],
        1 => [2, 5, 8],
        2 => [6, 7, 8],
        3 => [0, 3, 6],
        _ => panic!("invalid side {side}"),
    }
}

/// Splits every element into four congruent children.
pub fn refine_uniform(m: &MeshLevel) -> MeshLevel {
    let cells = m
        .cells
        .iter()
        .flat_map(|c| {
            let (i, j) = (2 * c[0], 2 * c[1]);
            [[i, j], [i + 1, j], [i, j + 1], [i + 1, j + 1]]
        })
        .collect();
    MeshLevel::from_cells(m.level_index + 1, 0.5 * m.h, m.geometry, 2 * m.nx, 2 * m.ny, cells)
}
