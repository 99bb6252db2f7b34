//! Small 1-D convolutional network over the two price channels.
//!
//! Stack: conv(2→4, k5) → ReLU → maxpool(2) → conv(4→8, k5) → ReLU →
//! maxpool(2) → conv(8→8, k3) → ReLU → dense(16→48) → ReLU → dense(48→24) →
//! ReLU → dense(24→8) → softmax. 2604 parameters in one flat vector.
//!
//! Forward and backward passes are written out by hand and run one sample at a
//! time; training is plain mini-batch Adam on the mean cross-entropy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ProbVector, TrainingSet};
use crate::dataset::{FeatureTensor, FEATURE_DAYS, N_CHANNELS};
use crate::hedge_engine::N_PERIODS;
use crate::rng::{derive_seed, stream_rng, SeedTag};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerKind {
    Conv { in_ch: usize, out_ch: usize, kernel: usize },
    MaxPool { size: usize },
    Relu,
    Dense { inputs: usize, outputs: usize },
}

pub fn default_architecture() -> Vec<LayerKind> {
    use LayerKind::*;
    vec![
        Conv { in_ch: 2, out_ch: 4, kernel: 5 },
        Relu,
        MaxPool { size: 2 },
        Conv { in_ch: 4, out_ch: 8, kernel: 5 },
        Relu,
        MaxPool { size: 2 },
        Conv { in_ch: 8, out_ch: 8, kernel: 3 },
        Relu,
        Dense { inputs: 16, outputs: 48 },
        Relu,
        Dense { inputs: 48, outputs: 24 },
        Relu,
        Dense { inputs: 24, outputs: N_PERIODS },
    ]
}

/// A layer with resolved shapes and its slice of the parameter vector.
#[derive(Clone, Copy, Debug)]
struct Planned {
    kind: LayerKind,
    in_len: usize,
    out_ch: usize,
    out_len: usize,
    offset: usize,
}

impl Planned {
    fn n_params(&self) -> usize {
        match self.kind {
            LayerKind::Conv { in_ch, out_ch, kernel } => out_ch * in_ch * kernel + out_ch,
            LayerKind::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    fn out_size(&self) -> usize {
        self.out_ch * self.out_len
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv { in_ch, kernel, .. } => in_ch * kernel,
            LayerKind::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }

    fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_size()];
        match self.kind {
            LayerKind::Conv { in_ch, out_ch, kernel } => {
                let w = &p[self.offset..self.offset + out_ch * in_ch * kernel];
                let b = &p[self.offset + out_ch * in_ch * kernel..self.offset + self.n_params()];
                for o in 0..out_ch {
                    for t in 0..self.out_len {
                        let mut acc = b[o];
                        for c in 0..in_ch {
                            let wr = &w[(o * in_ch + c) * kernel..(o * in_ch + c + 1) * kernel];
                            let xr = &x[c * self.in_len + t..c * self.in_len + t + kernel];
                            acc += wr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
                        }
                        out[o * self.out_len + t] = acc;
                    }
                }
            }
            LayerKind::MaxPool { size } => {
                for c in 0..self.out_ch {
                    for t in 0..self.out_len {
                        let base = c * self.in_len + t * size;
                        out[c * self.out_len + t] =
                            x[base..base + size].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    }
                }
            }
            LayerKind::Relu => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = v.max(0.0);
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                let w = &p[self.offset..self.offset + inputs * outputs];
                let b = &p[self.offset + inputs * outputs..self.offset + self.n_params()];
                for o in 0..outputs {
                    out[o] = b[o] + w[o * inputs..(o + 1) * inputs].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `gp` and returns the input gradient.
    fn backward(&self, p: &[f64], x: &[f64], g: &[f64], gp: &mut [f64]) -> Vec<f64> {
        let mut gx = vec![0.0; x.len()];
        match self.kind {
            LayerKind::Conv { in_ch, out_ch, kernel } => {
                let nw = out_ch * in_ch * kernel;
                for o in 0..out_ch {
                    for t in 0..self.out_len {
                        let go = g[o * self.out_len + t];
                        if go == 0.0 {
                            continue;
                        }
                        gp[self.offset + nw + o] += go;
                        for c in 0..in_ch {
                            let wbase = self.offset + (o * in_ch + c) * kernel;
                            let xbase = c * self.in_len + t;
                            for k in 0..kernel {
                                gp[wbase + k] += go * x[xbase + k];
                                gx[xbase + k] += go * p[wbase + k];
                            }
                        }
                    }
                }
            }
            LayerKind::MaxPool { size } => {
                for c in 0..self.out_ch {
                    for t in 0..self.out_len {
                        let base = c * self.in_len + t * size;
                        let mut best = base;
                        for k in base + 1..base + size {
                            if x[k] > x[best] {
                                best = k;
                            }
                        }
                        gx[best] += g[c * self.out_len + t];
                    }
                }
            }
            LayerKind::Relu => {
                for ((d, &v), &go) in gx.iter_mut().zip(x).zip(g) {
                    if v > 0.0 {
                        *d = go;
                    }
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                let nw = inputs * outputs;
                for o in 0..outputs {
                    let go = g[o];
                    gp[self.offset + nw + o] += go;
                    let wbase = self.offset + o * inputs;
                    for i in 0..inputs {
                        gp[wbase + i] += go * x[i];
                        gx[i] += go * p[wbase + i];
                    }
                }
            }
        }
        gx
    }
}

fn plan(arch: &[LayerKind]) -> Result<Vec<Planned>> {
    let (mut ch, mut len) = (N_CHANNELS, FEATURE_DAYS);
    let mut offset = 0;
    let mut out = Vec::with_capacity(arch.len());
    for &kind in arch {
        let (out_ch, out_len) = match kind {
            LayerKind::Conv { in_ch, out_ch, kernel } => {
                if in_ch != ch || kernel == 0 || kernel > len {
                    return Err(Error::config(format!("conv {kind:?} does not fit input ({ch}, {len})")));
                }
                (out_ch, len - kernel + 1)
            }
            LayerKind::MaxPool { size } => {
                if size == 0 || size > len {
                    return Err(Error::config(format!("pool {size} does not fit length {len}")));
                }
                (ch, len / size)
            }
            LayerKind::Relu => (ch, len),
            LayerKind::Dense { inputs, outputs } => {
                if inputs != ch * len {
                    return Err(Error::config(format!("dense expects {inputs} inputs, gets {}", ch * len)));
                }
                (1, outputs)
            }
        };
        let p = Planned { kind, in_len: len, out_ch, out_len, offset };
        offset += p.n_params();
        out.push(p);
        ch = out_ch;
        len = out_len;
    }
    if ch * len != N_PERIODS {
        return Err(Error::config(format!("network emits {} scores, need {N_PERIODS}", ch * len)));
    }
    Ok(out)
}

/// Architecture plus its flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub architecture: Vec<LayerKind>,
    pub init_seed: u64,
    pub params: Vec<f64>,
}

impl CnnModel {
    /// He-uniform weights, zero biases.
    pub fn init(init_seed: u64) -> Self {
        let architecture = default_architecture();
        let layers = plan(&architecture).expect("default architecture is consistent");
        let mut params = vec![0.0; param_count(&layers)];
        let mut rng = stream_rng(init_seed, SeedTag::Init as u64);
        for l in &layers {
            let n_w = match l.kind {
                LayerKind::Conv { in_ch, out_ch, kernel } => out_ch * in_ch * kernel,
                LayerKind::Dense { inputs, outputs } => inputs * outputs,
                _ => 0,
            };
            if n_w == 0 {
                continue;
            }
            let limit = (6.0 / l.fan_in() as f64).sqrt();
            for w in &mut params[l.offset..l.offset + n_w] {
                *w = rng.random_range(-limit..limit);
            }
        }
        CnnModel { architecture, init_seed, params }
    }

    pub fn zeros() -> Self {
        let architecture = default_architecture();
        let n = param_count(&plan(&architecture).expect("default architecture is consistent"));
        CnnModel { architecture, init_seed: 0, params: vec![0.0; n] }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> Result<Vec<Planned>> {
        let layers = plan(&self.architecture)?;
        if param_count(&layers) != self.params.len() {
            return Err(Error::input(format!(
                "parameter vector has {} entries, architecture needs {}",
                self.params.len(),
                param_count(&layers)
            )));
        }
        Ok(layers)
    }
}

fn param_count(layers: &[Planned]) -> usize {
    layers.iter().map(Planned::n_params).sum()
}

fn input_of(x: &FeatureTensor) -> Result<&[f64]> {
    if x.channels.len() != N_CHANNELS * FEATURE_DAYS {
        return Err(Error::input(format!("expected {} inputs, got {}", N_CHANNELS * FEATURE_DAYS, x.channels.len())));
    }
    Ok(&x.channels)
}

fn activations(layers: &[Planned], params: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    for l in layers {
        let next = l.forward(params, acts.last().expect("input pushed"));
        acts.push(next);
    }
    acts
}

pub fn cnn_forward(model: &CnnModel, x: &FeatureTensor) -> Result<ProbVector> {
    let layers = model.layers()?;
    let acts = activations(&layers, &model.params, input_of(x)?);
    Ok(ProbVector::softmax(acts.last().expect("nonempty")))
}

/// Mean cross-entropy over the batch and its gradient w.r.t. every parameter.
pub fn loss_and_grad(model: &CnnModel, xs: &[&FeatureTensor], ys: &[usize]) -> Result<(f64, Vec<f64>)> {
    let layers = model.layers()?;
    let mut grad = vec![0.0; model.params.len()];
    let loss = accumulate(&layers, &model.params, xs, ys, &mut grad)?;
    Ok((loss, grad))
}

fn accumulate(layers: &[Planned], params: &[f64], xs: &[&FeatureTensor], ys: &[usize], grad: &mut [f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::input("batch inputs and labels must be nonempty and aligned"));
    }
    let scale = 1.0 / xs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        if y >= N_PERIODS {
            return Err(Error::input(format!("label {y} out of range")));
        }
        let acts = activations(layers, params, input_of(x)?);
        let probs = ProbVector::softmax(acts.last().expect("nonempty"));
        loss -= probs.0[y].max(f64::MIN_POSITIVE).ln() * scale;
        let mut g: Vec<f64> = probs.0.iter().map(|p| p * scale).collect();
        g[y] -= scale;
        for (k, l) in layers.iter().enumerate().rev() {
            g = l.backward(params, &acts[k], &g, grad);
        }
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub init_seed: u64,
    pub ensemble_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_seed: 0,
            ensemble_size: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.epochs > 0
            && self.ensemble_size > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid training configuration {self:?}")))
        }
    }

    /// Config for ensemble member `k`, with its own init seed.
    pub fn member(&self, k: usize) -> TrainConfig {
        TrainConfig { init_seed: derive_seed(self.init_seed, SeedTag::Init, k as u64), ..self.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch Adam on cross-entropy; deterministic in `cfg.init_seed`.
pub fn cnn_train(set: &TrainingSet<'_>, cfg: &TrainConfig) -> Result<(CnnModel, TrainReport)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::input("empty training set"));
    }
    let mut model = CnnModel::init(cfg.init_seed);
    let layers = model.layers()?;
    let n_params = model.params.len();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut rng = stream_rng(cfg.init_seed, SeedTag::Shuffle as u64);
    let mut report = TrainReport::default();
    let mut step = 0i32;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<&FeatureTensor> = chunk.iter().map(|&i| set.x[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| set.y[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = accumulate(&layers, &model.params, &xs, &ys, &mut grad)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training { epoch, batch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            step += 1;
            let bc1 = 1.0 - cfg.beta1.powi(step);
            let bc2 = 1.0 - cfg.beta2.powi(step);
            for k in 0..n_params {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                model.params[k] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
            }
        }
        report.epoch_losses.push(epoch_loss / set.len() as f64);
    }
    Ok((model, report))
}
