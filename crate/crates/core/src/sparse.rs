//! Compressed sparse row storage for assembled operators.

use crate::error::{Error, Result};

/// Offsets of the velocity-x, velocity-y and pressure blocks inside a mixed
/// vector. A scalar layout has a single block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub nodes: usize,
    pub components: usize,
}

impl BlockLayout {
    pub fn scalar(nodes: usize) -> Self {
        Self { nodes, components: 1 }
    }

    pub fn mixed(nodes: usize) -> Self {
        Self { nodes, components: 3 }
    }

    pub fn len(&self) -> usize {
        self.nodes * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, component: usize) -> usize {
        component * self.nodes
    }

    #[inline]
    pub fn dof(&self, component: usize, node: usize) -> usize {
        component * self.nodes + node
    }
}

/// Sparse matrix in CSR format. Column indices are sorted within each row.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub layout: Option<BlockLayout>,
}

impl CsrMatrix {
    /// Builds the structure from per-row column lists (duplicates removed),
    /// with all values zero.
    pub fn from_pattern(nrows: usize, ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { nrows, ncols, row_ptr, col_idx, values: vec![0.0; nnz], layout: None }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let mut m = Self::from_pattern(nrows, ncols, rows);
        for &(i, j, v) in triplets {
            let pos = m.position(i, j).expect("pattern contains entry");
            m.values[pos] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn with_layout(mut self, layout: BlockLayout) -> Self {
        self.layout = Some(layout);
        self
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Index into `values` of entry (i, j), if it is structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        let cols = &self.col_idx[start..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn zero_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Replaces row `i` by the corresponding identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            self.values[p] = if self.col_idx[p] == i { 1.0 } else { 0.0 };
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y = Aᵀ x
    pub fn transpose_matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// Residual r = b − A x.
    pub fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                s -= v * x[j];
            }
            r[i] = s;
        }
    }

    /// C = Aᵀ B A for square B (used for Galerkin products of transfer operators).
    pub fn galerkin(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        if b.nrows != self.nrows || b.ncols != self.nrows {
            return Err(Error::dim("galerkin product", self.nrows, b.nrows));
        }
        let n = self.ncols;
        // BA row by row, then accumulate Aᵀ (BA).
        let mut dense_row = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; n];
        let mut triplets = Vec::new();
        for i in 0..b.nrows {
            let (bcols, bvals) = b.row(i);
            for (&k, &bv) in bcols.iter().zip(bvals) {
                let (acols, avals) = self.row(k);
                for (&j, &av) in acols.iter().zip(avals) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    dense_row[j] += bv * av;
                }
            }
            let (arow_cols, arow_vals) = self.row(i);
            for (&r, &av) in arow_cols.iter().zip(arow_vals) {
                for &j in &touched {
                    triplets.push((r, j, av * dense_row[j]));
                }
            }
            for &j in &touched {
                dense_row[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
        }
        Ok(CsrMatrix::from_triplets(n, n, &triplets))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] += v;
            }
        }
        d
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
