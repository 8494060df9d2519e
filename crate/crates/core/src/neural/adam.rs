/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, cfg: AdamConfig) -> Self {
        Self { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut a = Adam::new(2, AdamConfig::default());
        a.m = vec![1.0, -1.0];
        a.v = vec![4.0, 4.0];
        let mut p = vec![0.5, 0.5];
        a.step(&mut p, &[0.0, 0.0]);
        assert!((a.m[0] - 0.9).abs() < 1e-15 && (a.v[0] - 3.996).abs() < 1e-15);
        // the stored momentum still moves the parameters
        assert!(p[0] < 0.5 && p[1] > 0.5);
        let mut fresh = Adam::new(2, AdamConfig::default());
        let mut q = vec![0.5, -0.25];
        fresh.step(&mut q, &[0.0, 0.0]);
        assert_eq!(q, vec![0.5, -0.25]);
    }

    #[test]
    fn constant_gradient_gives_lr_sized_steps() {
        let mut a = Adam::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        for _ in 0..1000 {
            let before = p[0];
            a.step(&mut p, &[3.7]);
            assert!((before - p[0] - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn three_step_hand_trace() {
        // gradients 1, −2, 0.5 with lr 0.1, β1 0.5, β2 0.75, ε 0
        let cfg = AdamConfig { lr: 0.1, beta1: 0.5, beta2: 0.75, eps: 0.0 };
        let mut a = Adam::new(1, cfg);
        let mut p = vec![1.0];
        // t=1: m=0.5, v=0.25, m̂=1, v̂=1 → p = 0.9
        a.step(&mut p, &[1.0]);
        assert!((p[0] - 0.9).abs() < 1e-15);
        // t=2: m=−0.75, v=1.1875, m̂=−1, v̂=1.1875/0.4375 → p = 0.9 + 0.1/sqrt(2.714285…)
        a.step(&mut p, &[-2.0]);
        let p2 = 0.9 + 0.1 / (1.1875f64 / 0.4375).sqrt();
        assert!((p[0] - p2).abs() < 1e-15);
        // t=3: m=−0.125, v=0.953125, m̂=−0.125/0.875, v̂=0.953125/0.578125
        a.step(&mut p, &[0.5]);
        let p3 = p2 + 0.1 * (0.125 / 0.875) / (0.953125f64 / 0.578125).sqrt();
        assert!((p[0] - p3).abs() < 1e-15);
    }
}
