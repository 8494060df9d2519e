//! Divergence-free corrections from a local stream function.
//!
//! On one element the stream function is a biquadratic polynomial in the
//! reference coordinates, `ψ = Σ s_i ξ_i` with the eight non-constant
//! monomials `ξ = x, x², y, xy, x²y, y², xy², x²y²` (`i = 2..=9`). Its
//! curl `∇⊥ψ = (−∂_y ψ, ∂_x ψ)` is again biquadratic, so it is represented
//! exactly by its values at the nine Lagrange nodes, and it is pointwise
//! divergence free.
//!
//! ```
//! use dnnmg::divfree::{curl_perp_basis, EtaTable};
//! // ψ = x²y gives (−x², 2xy)
//! assert_eq!(curl_perp_basis(6, 0.5, 0.25).unwrap(), [-0.25, 0.25]);
//! let eta = EtaTable::new();
//! assert!(eta.y[0].iter().all(|v| *v == 1.0));
//! ```

use std::sync::OnceLock;

use crate::basis::{self, TensorRule};
use crate::error::{Error, Result};

/// Number of stream-function coefficients per element.
pub const NUM_COEFFS: usize = 8;

/// Coefficients `s_2 … s_9`; `s[k]` belongs to the basis field `i = k + 2`.
pub type StreamCoeffs = [f64; NUM_COEFFS];

/// Exponents `(α, β)` of the monomial `x^α y^β` behind basis field `i`.
pub fn monomial_exponents(i: usize) -> Result<(i32, i32)> {
    if !(2..=9).contains(&i) {
        return Err(Error::Config(format!("stream basis index {i} outside 2..=9")));
    }
    let m = (i - 1) as i32;
    Ok((m % 3, m / 3))
}

fn pow(x: f64, e: i32) -> f64 {
    if e <= 0 {
        1.0
    } else {
        x.powi(e)
    }
}

/// `∇⊥(x^α y^β) = (−β x^α y^{β−1}, α x^{α−1} y^β)` for basis field `i`.
pub fn curl_perp_basis(i: usize, x: f64, y: f64) -> Result<[f64; 2]> {
    let (a, b) = monomial_exponents(i)?;
    Ok([-(b as f64) * pow(x, a) * pow(y, b - 1), a as f64 * pow(x, a - 1) * pow(y, b)])
}

/// Nodal coefficients of the eight curl fields in the Lagrange basis of the
/// reference element: `x[k][j]`, `y[k][j]` are the components of field
/// `k + 2` at node `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaTable {
    pub x: [[f64; 9]; NUM_COEFFS],
    pub y: [[f64; 9]; NUM_COEFFS],
}

impl Default for EtaTable {
    fn default() -> Self {
        Self::new()
    }
}

impl EtaTable {
    pub fn new() -> Self {
        let mut x = [[0.0; 9]; NUM_COEFFS];
        let mut y = [[0.0; 9]; NUM_COEFFS];
        for k in 0..NUM_COEFFS {
            for j in 0..9 {
                let [px, py] = basis::q2_node(j);
                let v = curl_perp_basis(k + 2, px, py).expect("index in range");
                x[k][j] = v[0];
                y[k][j] = v[1];
            }
        }
        Self { x, y }
    }

    /// Shared instance.
    pub fn get() -> &'static EtaTable {
        static TABLE: OnceLock<EtaTable> = OnceLock::new();
        TABLE.get_or_init(EtaTable::new)
    }

    /// Nodal values `Σ_k s_k η_k` on the reference element, laid out as
    /// nine x-values followed by nine y-values.
    pub fn reconstruct(&self, s: &StreamCoeffs) -> [f64; 18] {
        let mut out = [0.0; 18];
        for (k, sk) in s.iter().enumerate() {
            for j in 0..9 {
                out[j] += sk * self.x[k][j];
                out[9 + j] += sk * self.y[k][j];
            }
        }
        out
    }
}

/// Velocity correction of one fine element of size `hx × hy`.
///
/// The stream function lives in reference coordinates, so the physical
/// curl scales the x-component by `1/hy` and the y-component by `1/hx`.
/// Nodes flagged in `dirichlet` are set to zero.
pub fn stream_to_velocity(s: &StreamCoeffs, size: [f64; 2], dirichlet: &[bool; 9], table: &EtaTable) -> [f64; 18] {
    let mut d = table.reconstruct(s);
    for j in 0..9 {
        if dirichlet[j] {
            d[j] = 0.0;
            d[9 + j] = 0.0;
        } else {
            d[j] /= size[1];
            d[9 + j] /= size[0];
        }
    }
    d
}

/// Adjoint of [`stream_to_velocity`]: maps a gradient with respect to the
/// 18 nodal values to the gradient with respect to `s`.
pub fn stream_to_velocity_adjoint(
    g: &[f64; 18],
    size: [f64; 2],
    dirichlet: &[bool; 9],
    table: &EtaTable,
) -> StreamCoeffs {
    let mut out = [0.0; NUM_COEFFS];
    for (k, o) in out.iter_mut().enumerate() {
        for j in (0..9).filter(|&j| !dirichlet[j]) {
            *o += table.x[k][j] * g[j] / size[1] + table.y[k][j] * g[9 + j] / size[0];
        }
    }
    out
}

/// Monomial coefficients of the biquadratic interpolant of nodal values
/// `psi`, without the constant term.
pub fn stream_coeffs_from_nodal(psi: &[f64; 9]) -> StreamCoeffs {
    // 1D Lagrange basis at 0, ½, 1 in monomial form, rows l_a, columns t⁰ t¹ t²
    const L: [[f64; 3]; 3] = [[1.0, -3.0, 2.0], [0.0, 4.0, -4.0], [0.0, -1.0, 2.0]];
    let mut c = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            let v = psi[a + 3 * b];
            for al in 0..3 {
                for be in 0..3 {
                    c[al + 3 * be] += v * L[a][al] * L[b][be];
                }
            }
        }
    }
    let mut s = [0.0; NUM_COEFFS];
    s.copy_from_slice(&c[1..]);
    s
}

/// `∫ |∂_x d_x + ∂_y d_y|²` over one element from its 18 nodal values.
pub fn element_divergence_sq(d: &[f64], size: [f64; 2]) -> f64 {
    let rule = gauss3();
    let mut sum = 0.0;
    for q in 0..rule.len() {
        let g = &rule.grads[q];
        let div: f64 = (0..9).map(|a| d[a] * g[a][0] / size[0] + d[9 + a] * g[a][1] / size[1]).sum();
        sum += rule.weights[q] * div * div;
    }
    sum * size[0] * size[1]
}

/// Cached 3×3 Gauss rule on the reference element.
pub(crate) fn gauss3() -> &'static TensorRule {
    static RULE: OnceLock<TensorRule> = OnceLock::new();
    RULE.get_or_init(|| TensorRule::gauss(3))
}

/// Averages patch-local nodal corrections into a global velocity vector of
/// `num_nodes` nodes (x block, then y block).
///
/// Each patch is given by its global node list and its local values (all
/// x-values, then all y-values). Nodes touched by several patches get the
/// arithmetic mean; untouched nodes stay zero.
pub fn assemble_global_correction<'a, I>(num_nodes: usize, patches: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = (&'a [usize], &'a [f64])>,
{
    let mut sum = vec![0.0; 2 * num_nodes];
    let mut count = vec![0u32; num_nodes];
    for (nodes, vals) in patches {
        let n = nodes.len();
        if vals.len() != 2 * n {
            return Err(Error::dim("patch correction length", 2 * n, vals.len()));
        }
        for (k, &g) in nodes.iter().enumerate() {
            if g >= num_nodes {
                return Err(Error::dim("patch node index bound", num_nodes, g));
            }
            sum[g] += vals[k];
            sum[num_nodes + g] += vals[n + k];
            count[g] += 1;
        }
    }
    for (g, &c) in count.iter().enumerate() {
        if c > 1 {
            sum[g] /= c as f64;
            sum[num_nodes + g] /= c as f64;
        }
    }
    Ok(sum)
}
