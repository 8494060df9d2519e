//! Legacy ASCII VTK output (`DATASET UNSTRUCTURED_GRID`).

use std::fmt::Write as _;
use std::path::Path;

use super::MeshLevel;
use crate::error::{Error, Result};

const VTK_QUAD: u8 = 9;

/// Nodal data attached to a snapshot.
pub enum PointField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [f64], &'a [f64]),
}

fn header(out: &mut String, title: &str) {
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
}

fn points(out: &mut String, pts: &[[f64; 2]]) {
    writeln!(out, "POINTS {} double", pts.len()).unwrap();
    for p in pts {
        writeln!(out, "{} {} 0", p[0], p[1]).unwrap();
    }
}

fn quads(out: &mut String, cells: &[[usize; 4]]) {
    writeln!(out, "CELLS {} {}", cells.len(), 5 * cells.len()).unwrap();
    for c in cells {
        writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3]).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in cells {
        writeln!(out, "{VTK_QUAD}").unwrap();
    }
}

/// Mesh vertices, quads and the per-cell boundary tag (0 for interior cells;
/// a cell on several boundary parts reports the largest code).
pub fn mesh_to_string(m: &MeshLevel) -> String {
    let mut out = String::new();
    header(&mut out, &format!("channel mesh level {}", m.level_index));
    points(&mut out, &m.vertices);
    quads(&mut out, &m.elements);
    let mut tags = vec![0i32; m.num_elements()];
    for e in &m.boundary_edges {
        tags[e.element] = tags[e.element].max(e.tag.code());
    }
    writeln!(out, "CELL_DATA {}", tags.len()).unwrap();
    out.push_str("SCALARS boundary_tag int 1\nLOOKUP_TABLE default\n");
    for t in tags {
        writeln!(out, "{t}").unwrap();
    }
    out
}

pub fn write_mesh(m: &MeshLevel, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(m)).map_err(|e| Error::io(path, e))
}

/// Snapshot on all biquadratic nodes; each element is split into four sub-quads.
pub fn fields_to_string(m: &MeshLevel, title: &str, fields: &[PointField]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    points(&mut out, &m.nodes);
    let mut cells = Vec::with_capacity(4 * m.num_elements());
    for n in &m.elem_nodes {
        for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let k = a + 3 * b;
            cells.push([n[k], n[k + 1], n[k + 4], n[k + 3]]);
        }
    }
    quads(&mut out, &cells);
    writeln!(out, "POINT_DATA {}", m.num_nodes()).unwrap();
    for f in fields {
        match f {
            PointField::Scalar(name, v) => {
                writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for x in v.iter() {
                    writeln!(out, "{x}").unwrap();
                }
            }
            PointField::Vector(name, vx, vy) => {
                writeln!(out, "VECTORS {name} double").unwrap();
                for (x, y) in vx.iter().zip(vy.iter()) {
                    writeln!(out, "{x} {y} 0").unwrap();
                }
            }
        }
    }
    out
}

pub fn write_fields(m: &MeshLevel, path: &Path, title: &str, fields: &[PointField]) -> Result<()> {
    std::fs::write(path, fields_to_string(m, title, fields)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_channel_mesh;

    #[test]
    fn mesh_file_structure() {
        let m = build_channel_mesh(2.25, 0.4, [0.3, 0.15], 0.1, 0.05).unwrap();
        let s = mesh_to_string(&m);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert!(s.contains(&format!("POINTS {} double", m.vertices.len())));
        assert!(s.contains("CELLS 356 1780"));
        assert!(s.contains("CELL_TYPES 356"));
        assert!(s.contains("CELL_DATA 356"));
        let tags: Vec<i32> =
            s.split("LOOKUP_TABLE default\n").nth(1).unwrap().lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(tags.len(), 356);
        assert!(tags.contains(&4) && tags.contains(&1) && tags.contains(&2) && tags.contains(&0));
    }

    #[test]
    fn field_snapshot_counts() {
        let m = build_channel_mesh(2.25, 0.4, [0.3, 0.15], 0.1, 0.05).unwrap();
        let v = vec![0.5; m.num_nodes()];
        let s = fields_to_string(&m, "t", &[PointField::Scalar("p", &v), PointField::Vector("v", &v, &v)]);
        assert!(s.contains(&format!("CELLS {} {}", 4 * 356, 20 * 356)));
        assert!(s.contains(&format!("POINT_DATA {}", m.num_nodes())));
        assert!(s.contains("VECTORS v double"));
    }
}
