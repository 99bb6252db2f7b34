//! Multinomial softmax regression on the flattened price channels.

use serde::{Deserialize, Serialize};

use super::{ProbVector, TrainingSet};
use crate::dataset::{FeatureTensor, FEATURE_DAYS, N_CHANNELS};
use crate::hedge_engine::N_PERIODS;
use crate::{Error, Result};

const N_INPUTS: usize = N_CHANNELS * FEATURE_DAYS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { learning_rate: 0.5, iterations: 500, l2: 1e-4 }
    }
}

/// Row `k` holds the weights of class `k` followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros() -> Self {
        LogisticModel { weights: vec![0.0; N_PERIODS * (N_INPUTS + 1)] }
    }

    fn logits(&self, x: &[f64]) -> [f64; N_PERIODS] {
        let mut z = [0.0; N_PERIODS];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.weights[k * (N_INPUTS + 1)..(k + 1) * (N_INPUTS + 1)];
            *zk = row[N_INPUTS] + row[..N_INPUTS].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    pub fn predict(&self, x: &FeatureTensor) -> Result<ProbVector> {
        if x.channels.len() != N_INPUTS || self.weights.len() != N_PERIODS * (N_INPUTS + 1) {
            return Err(Error::input("logistic model and input shapes disagree"));
        }
        Ok(ProbVector::softmax(&self.logits(&x.channels)))
    }

    /// Full-batch gradient descent from zero weights.
    pub fn train(set: &TrainingSet<'_>, cfg: &LogisticConfig) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::input("empty training set"));
        }
        if !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 {
            return Err(Error::config(format!("invalid logistic configuration {cfg:?}")));
        }
        let mut model = LogisticModel::zeros();
        let n = set.len() as f64;
        let stride = N_INPUTS + 1;
        let mut grad = vec![0.0; model.weights.len()];
        for _ in 0..cfg.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (x, &y) in set.x.iter().zip(&set.y) {
                let p = ProbVector::softmax(&model.logits(&x.channels));
                for k in 0..N_PERIODS {
                    let err = (p.0[k] - if k == y { 1.0 } else { 0.0 }) / n;
                    let row = &mut grad[k * stride..(k + 1) * stride];
                    for (g, v) in row[..N_INPUTS].iter_mut().zip(&x.channels) {
                        *g += err * v;
                    }
                    row[N_INPUTS] += err;
                }
            }
            for (k, (w, g)) in model.weights.iter_mut().zip(&grad).enumerate() {
                let decay = if k % stride == N_INPUTS { 0.0 } else { cfg.l2 * *w };
                *w -= cfg.learning_rate * (g + decay);
            }
        }
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Training { epoch: cfg.iterations, batch: 0, loss: f64::NAN });
        }
        Ok(model)
    }
}
