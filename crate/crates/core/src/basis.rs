//! Biquadratic Lagrange basis on the reference square [0,1]² and tensor Gauss rules.
//!
//! Local node `a + 3b` sits at `(a/2, b/2)`, so local numbering runs along x first.

/// 1D quadratic Lagrange polynomials with nodes 0, ½, 1.
#[inline]
pub fn lagrange_1d(t: f64) -> [f64; 3] {
    [2.0 * (t - 0.5) * (t - 1.0), -4.0 * t * (t - 1.0), 2.0 * t * (t - 0.5)]
}

#[inline]
pub fn lagrange_1d_deriv(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0]
}

/// Values of the 9 biquadratic shape functions at a reference point.
#[inline]
pub fn q2_values(x: f64, y: f64) -> [f64; 9] {
    let lx = lagrange_1d(x);
    let ly = lagrange_1d(y);
    let mut v = [0.0; 9];
    for b in 0..3 {
        for a in 0..3 {
            v[a + 3 * b] = lx[a] * ly[b];
        }
    }
    v
}

/// Reference gradients (∂x̂, ∂ŷ) of the 9 shape functions.
#[inline]
pub fn q2_gradients(x: f64, y: f64) -> [[f64; 2]; 9] {
    let lx = lagrange_1d(x);
    let ly = lagrange_1d(y);
    let dx = lagrange_1d_deriv(x);
    let dy = lagrange_1d_deriv(y);
    let mut g = [[0.0; 2]; 9];
    for b in 0..3 {
        for a in 0..3 {
            g[a + 3 * b] = [dx[a] * ly[b], lx[a] * dy[b]];
        }
    }
    g
}

/// Reference coordinates of local node `i`.
#[inline]
pub fn q2_node(i: usize) -> [f64; 2] {
    [(i % 3) as f64 * 0.5, (i / 3) as f64 * 0.5]
}

/// Gauss–Legendre rule on [0,1] with `n` points (n = 1..=4).
pub fn gauss_1d(n: usize) -> Vec<(f64, f64)> {
    let (pts, wts): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => panic!("gauss_1d: unsupported point count {n}"),
    };
    pts.into_iter().zip(wts).map(|(p, w)| (0.5 * (p + 1.0), 0.5 * w)).collect()
}

/// A tensor-product rule on the reference square with basis data tabulated
/// at every point.
#[derive(Clone, Debug)]
pub struct TensorRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub values: Vec<[f64; 9]>,
    pub grads: Vec<[[f64; 2]; 9]>,
}

impl TensorRule {
    pub fn gauss(n: usize) -> Self {
        let g = gauss_1d(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for &(y, wy) in &g {
            for &(x, wx) in &g {
                points.push([x, y]);
                weights.push(wx * wy);
            }
        }
        let values = points.iter().map(|p| q2_values(p[0], p[1])).collect();
        let grads = points.iter().map(|p| q2_gradients(p[0], p[1])).collect();
        Self { points, weights, values, grads }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_nodality() {
        for i in 0..9 {
            let [x, y] = q2_node(i);
            let v = q2_values(x, y);
            for (j, vj) in v.iter().enumerate() {
                assert_eq!(*vj, if i == j { 1.0 } else { 0.0 });
            }
        }
        let v = q2_values(0.3, 0.71);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = q2_gradients(0.3, 0.71);
        assert!(g.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-14);
        assert!(g.iter().map(|d| d[1]).sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in 1..=4 {
            let rule = gauss_1d(n);
            for deg in 0..2 * n {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }
}
