//! Grid transfer between consecutive levels.
//!
//! Vectors are stored block-wise: `components` consecutive blocks of one
//! scalar nodal field each (e.g. `vx | vy | p`).

use super::MeshHierarchy;
use crate::error::{Error, Result};

fn check_len(what: &'static str, v: &[f64], nodes: usize, components: usize) -> Result<()> {
    if v.len() != nodes * components {
        return Err(Error::dim(what, nodes * components, v.len()));
    }
    Ok(())
}

/// Nodal interpolation of a level-`l` finite element function onto level `l + 1`.
pub fn prolongate(h: &MeshHierarchy, l: usize, v: &[f64], components: usize) -> Result<Vec<f64>> {
    let p = h.prolongation(l);
    check_len("prolongate input", v, p.ncols, components)?;
    let mut out = vec![0.0; p.nrows * components];
    for c in 0..components {
        p.matvec(&v[c * p.ncols..(c + 1) * p.ncols], &mut out[c * p.nrows..(c + 1) * p.nrows]);
    }
    Ok(out)
}

/// Restriction of a functional (residual, right-hand side) from level `l + 1`
/// to `l`: the transpose of [`prolongate`].
pub fn restrict_functional(h: &MeshHierarchy, l: usize, b: &[f64], components: usize) -> Result<Vec<f64>> {
    let p = h.prolongation(l);
    check_len("restrict input", b, p.nrows, components)?;
    let mut out = vec![0.0; p.ncols * components];
    for c in 0..components {
        p.transpose_matvec(&b[c * p.nrows..(c + 1) * p.nrows], &mut out[c * p.ncols..(c + 1) * p.ncols]);
    }
    Ok(out)
}

/// L²-projection of a level-`l + 1` function onto the level-`l` space.
pub fn restrict_function(h: &MeshHierarchy, l: usize, v: &[f64], components: usize) -> Result<Vec<f64>> {
    let p = h.prolongation(l);
    check_len("restrict input", v, p.nrows, components)?;
    let mf = h.mass(l + 1);
    let lu = h.mass_lu(l);
    let mut out = Vec::with_capacity(p.ncols * components);
    let mut weighted = vec![0.0; p.nrows];
    let mut rhs = vec![0.0; p.ncols];
    for c in 0..components {
        mf.matvec(&v[c * p.nrows..(c + 1) * p.nrows], &mut weighted);
        p.transpose_matvec(&weighted, &mut rhs);
        out.extend(lu.solve(&rhs));
    }
    Ok(out)
}

/// Pointwise injection of a level-`l + 1` function onto the (nested) level-`l` nodes.
pub fn inject(h: &MeshHierarchy, l: usize, v: &[f64], components: usize) -> Result<Vec<f64>> {
    let (c, f) = (h.level(l), h.level(l + 1));
    check_len("inject input", v, f.num_nodes(), components)?;
    let map: Vec<usize> =
        c.node_lattice.iter().map(|&[i, j]| f.node_at(2 * i, 2 * j).expect("coarse node is a fine node")).collect();
    let nf = f.num_nodes();
    let mut out = Vec::with_capacity(c.num_nodes() * components);
    for comp in 0..components {
        out.extend(map.iter().map(|&n| v[comp * nf + n]));
    }
    Ok(out)
}
