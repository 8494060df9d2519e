//! Element matrices of an axis-aligned `hx × hy` rectangle.

use std::sync::OnceLock;

use crate::basis::{self, TensorRule};
use crate::dense::DenseLu;

/// Bilinear shape functions on the reference square, vertex order (0,0), (1,0), (0,1), (1,1).
fn q1_values(x: f64, y: f64) -> [f64; 4] {
    [(1.0 - x) * (1.0 - y), x * (1.0 - y), (1.0 - x) * y, x * y]
}

/// Matrix `Π` with `(π p)_nodes = Π p_nodes`: the L²-projection of a
/// biquadratic function onto bilinears, re-sampled at the nine nodes.
/// It does not depend on the element size.
pub fn lps_projector() -> &'static [[f64; 9]; 9] {
    static PI: OnceLock<[[f64; 9]; 9]> = OnceLock::new();
    PI.get_or_init(|| {
        let rule = TensorRule::gauss(3);
        let mut m11 = vec![0.0; 16];
        let mut m12 = [[0.0; 9]; 4];
        for q in 0..rule.len() {
            let [x, y] = rule.points[q];
            let w = rule.weights[q];
            let s = q1_values(x, y);
            for a in 0..4 {
                for b in 0..4 {
                    m11[a * 4 + b] += w * s[a] * s[b];
                }
                for j in 0..9 {
                    m12[a][j] += w * s[a] * rule.values[q][j];
                }
            }
        }
        let lu = DenseLu::factor(4, m11).expect("Q1 mass matrix is nonsingular");
        // coefficients of π φ_j in the bilinear basis
        let mut coef = [[0.0; 9]; 4];
        for j in 0..9 {
            let mut col: Vec<f64> = (0..4).map(|a| m12[a][j]).collect();
            lu.solve_in_place(&mut col);
            for a in 0..4 {
                coef[a][j] = col[a];
            }
        }
        let mut pi = [[0.0; 9]; 9];
        for (k, row) in pi.iter_mut().enumerate() {
            let [x, y] = basis::q2_node(k);
            let s = q1_values(x, y);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|a| s[a] * coef[a][j]).sum();
            }
        }
        pi
    })
}

/// Tabulated data of one quadrature point in physical scaling.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    /// Reference coordinates.
    pub xi: [f64; 2],
    /// Weight times element area.
    pub w: f64,
    pub phi: [f64; 9],
    /// Physical gradients.
    pub grad: [[f64; 2]; 9],
}

fn tabulate(rule: &TensorRule, hx: f64, hy: f64) -> Vec<QuadPoint> {
    (0..rule.len())
        .map(|q| {
            let mut grad = rule.grads[q];
            for g in &mut grad {
                g[0] /= hx;
                g[1] /= hy;
            }
            QuadPoint { xi: rule.points[q], w: rule.weights[q] * hx * hy, phi: rule.values[q], grad }
        })
        .collect()
}

/// Size-dependent element matrices. Index `[i][j]` is test function `i`, trial function `j`.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    pub size: [f64; 2],
    pub mass: [[f64; 9]; 9],
    pub stiffness: [[f64; 9]; 9],
    /// `div[c][i][j] = (∂_c φ_j, φ_i)`.
    pub div: [[[f64; 9]; 9]; 2],
    /// `(∇(φ_j − πφ_j), ∇(φ_i − πφ_i))`.
    pub lps: [[f64; 9]; 9],
    /// 3×3 Gauss points (linear terms, loads).
    pub gauss3: Vec<QuadPoint>,
    /// 4×4 Gauss points (convection).
    pub gauss4: Vec<QuadPoint>,
}

impl ElementMatrices {
    pub fn new(hx: f64, hy: f64) -> Self {
        let gauss3 = tabulate(&TensorRule::gauss(3), hx, hy);
        let gauss4 = tabulate(&TensorRule::gauss(4), hx, hy);
        let pi = lps_projector();
        let mut mass = [[0.0; 9]; 9];
        let mut stiffness = [[0.0; 9]; 9];
        let mut div = [[[0.0; 9]; 9]; 2];
        let mut lps = [[0.0; 9]; 9];
        for q in &gauss3 {
            // gradients of φ_j − π φ_j
            let mut fluct = q.grad;
            for (j, f) in fluct.iter_mut().enumerate() {
                for k in 0..9 {
                    f[0] -= pi[k][j] * q.grad[k][0];
                    f[1] -= pi[k][j] * q.grad[k][1];
                }
            }
            for i in 0..9 {
                for j in 0..9 {
                    mass[i][j] += q.w * q.phi[i] * q.phi[j];
                    stiffness[i][j] += q.w * (q.grad[i][0] * q.grad[j][0] + q.grad[i][1] * q.grad[j][1]);
                    div[0][i][j] += q.w * q.grad[j][0] * q.phi[i];
                    div[1][i][j] += q.w * q.grad[j][1] * q.phi[i];
                    lps[i][j] += q.w * (fluct[i][0] * fluct[j][0] + fluct[i][1] * fluct[j][1]);
                }
            }
        }
        Self { size: [hx, hy], mass, stiffness, div, lps, gauss3, gauss4 }
    }

    /// Element diameter used in the stabilization parameter.
    pub fn h(&self) -> f64 {
        self.size[0].max(self.size[1])
    }
}
