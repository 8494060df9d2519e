use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// What the network predicts per patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    /// Nodal velocity corrections on a coarse-cell patch.
    Velocity,
    /// Stream-function coefficients on one fine element.
    Stream,
}

impl OutputMode {
    pub fn tag(self) -> u8 {
        match self {
            OutputMode::Velocity => 0,
            OutputMode::Stream => 1,
        }
    }

    pub fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(OutputMode::Velocity),
            1 => Ok(OutputMode::Stream),
            _ => Err(Error::Data(format!("unknown output mode tag {t}"))),
        }
    }
}

/// Layer widths: two tanh encoder layers, one GRU layer, a tanh decoder
/// layer and a linear output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub input: usize,
    pub enc: [usize; 2],
    pub hidden: usize,
    pub dec: usize,
    pub output: usize,
}

impl NetConfig {
    /// Velocity network on 5×5-node patches, 8604 parameters.
    pub const VELOCITY: NetConfig = NetConfig { input: 102, enc: [34, 16], hidden: 20, dec: 32, output: 50 };
    /// Stream-function network on single elements, 8952 parameters.
    pub const STREAM: NetConfig = NetConfig { input: 38, enc: [64, 32], hidden: 24, dec: 8, output: 8 };

    pub fn for_mode(mode: OutputMode) -> Self {
        match mode {
            OutputMode::Velocity => Self::VELOCITY,
            OutputMode::Stream => Self::STREAM,
        }
    }

    pub fn dims(&self) -> [usize; 6] {
        [self.input, self.enc[0], self.enc[1], self.hidden, self.dec, self.output]
    }

    pub fn from_dims(d: [usize; 6]) -> Result<Self> {
        if d.iter().any(|&v| v == 0 || v > 100_000) {
            return Err(Error::Data(format!("bad layer dimensions {d:?}")));
        }
        Ok(Self { input: d[0], enc: [d[1], d[2]], hidden: d[3], dec: d[4], output: d[5] })
    }

    pub fn num_params(&self) -> usize {
        Layout::new(self).len
    }
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

impl Dense {
    fn size(&self) -> usize {
        self.inp * self.out + self.out
    }
}

/// Offsets of every weight block in the flat parameter vector.
#[derive(Clone, Copy, Debug)]
struct Layout {
    enc1: Dense,
    enc2: Dense,
    /// update, reset and candidate gates, each on `[x, h]`
    gates: [Dense; 3],
    dec1: Dense,
    dec2: Dense,
    len: usize,
}

impl Layout {
    fn new(c: &NetConfig) -> Self {
        let mut off = 0;
        let mut dense = |inp: usize, out: usize| {
            let d = Dense { w: off, b: off + inp * out, inp, out };
            off += d.size();
            d
        };
        let enc1 = dense(c.input, c.enc[0]);
        let enc2 = dense(c.enc[0], c.enc[1]);
        let gi = c.enc[1] + c.hidden;
        let gates = [dense(gi, c.hidden), dense(gi, c.hidden), dense(gi, c.hidden)];
        let dec1 = dense(c.hidden, c.dec);
        let dec2 = dense(c.dec, c.output);
        Self { enc1, enc2, gates, dec1, dec2, len: off }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out = W x + b` for a row-major block.
fn affine(p: &[f64], d: &Dense, x: &[f64], out: &mut [f64]) {
    let w = &p[d.w..d.w + d.inp * d.out];
    for (o, yo) in out.iter_mut().enumerate() {
        let row = &w[o * d.inp..(o + 1) * d.inp];
        *yo = p[d.b + o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates `dW += dy xᵀ`, `db += dy` and, if given, `dx += Wᵀ dy`.
fn affine_back(p: &[f64], g: &mut [f64], d: &Dense, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
    for (o, &dyo) in dy.iter().enumerate() {
        if dyo == 0.0 {
            continue;
        }
        g[d.b + o] += dyo;
        let row = &mut g[d.w + o * d.inp..d.w + (o + 1) * d.inp];
        for (gw, xi) in row.iter_mut().zip(x) {
            *gw += dyo * xi;
        }
    }
    if let Some(dx) = dx {
        let w = &p[d.w..d.w + d.inp * d.out];
        for (o, &dyo) in dy.iter().enumerate() {
            if dyo == 0.0 {
                continue;
            }
            for (dxi, wi) in dx.iter_mut().zip(&w[o * d.inp..(o + 1) * d.inp]) {
                *dxi += dyo * wi;
            }
        }
    }
}

/// Per-feature affine normalisation of the inputs and a scale on the outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub output_scale: f64,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], std: vec![1.0; n], output_scale: 1.0 }
    }

    /// Mean and standard deviation of each column of `rows`; near-constant
    /// features get unit scale.
    pub fn fit<'a>(n: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut count = 0usize;
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for r in rows {
            count += 1;
            for i in 0..n {
                let delta = r[i] - mean[i];
                mean[i] += delta / count as f64;
                m2[i] += delta * (r[i] - mean[i]);
            }
        }
        let std = m2
            .iter()
            .map(|v| {
                let s = (v / count.max(1) as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std, output_scale: 1.0 }
    }
}

/// Intermediate values of one forward step, kept for back-propagation.
#[derive(Clone, Debug, Default)]
pub struct StepCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    /// `[a2, h_prev]`
    xh: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    /// `[a2, r ⊙ h_prev]`
    xrh: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    d1: Vec<f64>,
}

/// Recurrent network with a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: NetConfig,
    pub mode: OutputMode,
    pub params: Vec<f64>,
    pub norm: Normalization,
}

impl Network {
    /// Uniform initialisation in `±sqrt(1/fan_in)`.
    pub fn new(mode: OutputMode, config: NetConfig, seed: u64) -> Self {
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.len];
        let blocks =
            [layout.enc1, layout.enc2, layout.gates[0], layout.gates[1], layout.gates[2], layout.dec1, layout.dec2];
        for d in blocks {
            let bound = (1.0 / d.inp as f64).sqrt();
            for v in &mut params[d.w..d.w + d.size()] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Self { config, mode, params, norm: Normalization::identity(config.input) }
    }

    pub fn zeros(mode: OutputMode, config: NetConfig) -> Self {
        let params = vec![0.0; config.num_params()];
        Self { config, mode, params, norm: Normalization::identity(config.input) }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden
    }

    /// One step: `(output, h_new)`. With `cache`, the intermediates are stored.
    pub fn step(&self, input: &[f64], h: &[f64], cache: Option<&mut StepCache>) -> (Vec<f64>, Vec<f64>) {
        let c = &self.config;
        let l = Layout::new(c);
        let p = &self.params;
        let x: Vec<f64> =
            input.iter().zip(self.norm.mean.iter().zip(&self.norm.std)).map(|(v, (m, s))| (v - m) / s).collect();
        let mut a1 = vec![0.0; c.enc[0]];
        affine(p, &l.enc1, &x, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let mut xh = vec![0.0; c.enc[1] + c.hidden];
        affine(p, &l.enc2, &a1, &mut xh[..c.enc[1]]);
        xh[..c.enc[1]].iter_mut().for_each(|v| *v = v.tanh());
        xh[c.enc[1]..].copy_from_slice(h);
        let mut z = vec![0.0; c.hidden];
        let mut r = vec![0.0; c.hidden];
        affine(p, &l.gates[0], &xh, &mut z);
        affine(p, &l.gates[1], &xh, &mut r);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut xrh = xh.clone();
        for k in 0..c.hidden {
            xrh[c.enc[1] + k] = r[k] * h[k];
        }
        let mut cand = vec![0.0; c.hidden];
        affine(p, &l.gates[2], &xrh, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());
        let hn: Vec<f64> = (0..c.hidden).map(|k| (1.0 - z[k]) * h[k] + z[k] * cand[k]).collect();
        let mut d1 = vec![0.0; c.dec];
        affine(p, &l.dec1, &hn, &mut d1);
        d1.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = vec![0.0; c.output];
        affine(p, &l.dec2, &d1, &mut out);
        out.iter_mut().for_each(|v| *v *= self.norm.output_scale);
        if let Some(cache) = cache {
            *cache = StepCache { x, a1, xh, z, r, xrh, c: cand, h: hn.clone(), d1 };
        }
        (out, hn)
    }

    /// Back-propagates one step. `dout` is the gradient of the loss with
    /// respect to the output and `dh` with respect to the new hidden state;
    /// the gradient with respect to the previous hidden state is returned.
    pub fn step_backward(&self, cache: &StepCache, dout: &[f64], dh: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let c = &self.config;
        let l = Layout::new(c);
        let p = &self.params;
        let e2 = c.enc[1];
        let dy: Vec<f64> = dout.iter().map(|v| v * self.norm.output_scale).collect();
        let mut dd1 = vec![0.0; c.dec];
        affine_back(p, grad, &l.dec2, &cache.d1, &dy, Some(&mut dd1));
        for k in 0..c.dec {
            dd1[k] *= 1.0 - cache.d1[k] * cache.d1[k];
        }
        let mut dhn = dh.to_vec();
        affine_back(p, grad, &l.dec1, &cache.h, &dd1, Some(&mut dhn));

        let hprev = &cache.xh[e2..];
        let mut dxh = vec![0.0; e2 + c.hidden];
        let mut dac = vec![0.0; c.hidden];
        let mut daz = vec![0.0; c.hidden];
        for k in 0..c.hidden {
            let (z, cand) = (cache.z[k], cache.c[k]);
            dxh[e2 + k] = dhn[k] * (1.0 - z);
            daz[k] = dhn[k] * (cand - hprev[k]) * z * (1.0 - z);
            dac[k] = dhn[k] * z * (1.0 - cand * cand);
        }
        let mut dxrh = vec![0.0; e2 + c.hidden];
        affine_back(p, grad, &l.gates[2], &cache.xrh, &dac, Some(&mut dxrh));
        let mut dar = vec![0.0; c.hidden];
        for k in 0..c.hidden {
            let r = cache.r[k];
            dar[k] = dxrh[e2 + k] * hprev[k] * r * (1.0 - r);
            dxh[e2 + k] += dxrh[e2 + k] * r;
        }
        for k in 0..e2 {
            dxh[k] += dxrh[k];
        }
        affine_back(p, grad, &l.gates[0], &cache.xh, &daz, Some(&mut dxh));
        affine_back(p, grad, &l.gates[1], &cache.xh, &dar, Some(&mut dxh));

        let mut da2: Vec<f64> = dxh[..e2].to_vec();
        for k in 0..e2 {
            let a = cache.xh[k];
            da2[k] *= 1.0 - a * a;
        }
        let mut da1 = vec![0.0; c.enc[0]];
        affine_back(p, grad, &l.enc2, &cache.a1, &da2, Some(&mut da1));
        for k in 0..c.enc[0] {
            da1[k] *= 1.0 - cache.a1[k] * cache.a1[k];
        }
        affine_back(p, grad, &l.enc1, &cache.x, &da1, None);
        dxh[e2..].to_vec()
    }

    /// Predicts the output of `patch` and advances its hidden state.
    pub fn forward_patch(&self, features: &[f64], store: &mut HiddenStore, patch: usize) -> Result<Vec<f64>> {
        if features.len() != self.config.input {
            return Err(Error::dim("feature vector", self.config.input, features.len()));
        }
        let h = store.get(patch)?;
        let (out, hn) = self.step(features, h, None);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinitePrediction { patch_id: patch });
        }
        store.set(patch, hn);
        Ok(out)
    }
}

/// Hidden state of every patch, carried from one time step to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStore {
    hidden: usize,
    h: Vec<f64>,
}

impl HiddenStore {
    pub fn new(num_patches: usize, hidden: usize) -> Self {
        Self { hidden, h: vec![0.0; num_patches * hidden] }
    }

    pub fn num_patches(&self) -> usize {
        self.h.len() / self.hidden.max(1)
    }

    pub fn reset(&mut self) {
        self.h.fill(0.0);
    }

    pub fn get(&self, patch: usize) -> Result<&[f64]> {
        self.h
            .get(patch * self.hidden..(patch + 1) * self.hidden)
            .ok_or_else(|| Error::dim("patch index bound", self.num_patches(), patch))
    }

    fn set(&mut self, patch: usize, v: Vec<f64>) {
        self.h[patch * self.hidden..(patch + 1) * self.hidden].copy_from_slice(&v);
    }
}
