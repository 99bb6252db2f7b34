//! Classifiers mapping a [`FeatureTensor`] to probabilities over the eight
//! hedging periods, and the one-vs-rest AUC used to evaluate them.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTensor, Sample};
use crate::hedge_engine::N_PERIODS;
use crate::{Error, Result};

pub mod cnn;
pub mod forest;
pub mod logistic;
pub mod metrics;

pub use cnn::{cnn_forward, cnn_train, CnnModel, TrainConfig, TrainReport};
pub use forest::{ForestConfig, ForestModel};
pub use logistic::{LogisticConfig, LogisticModel};
pub use metrics::{roc_auc_binary, roc_auc_ovr, AucReport};

const SUM_TOL: f64 = 1e-9;

/// Probability distribution over the period grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(pub [f64; N_PERIODS]);

impl ProbVector {
    pub fn new(p: [f64; N_PERIODS]) -> Result<Self> {
        let pv = ProbVector(p);
        pv.validate()?;
        Ok(pv)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::input(format!("invalid probabilities {:?}", self.0)));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::input(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }

    pub fn uniform() -> Self {
        ProbVector([1.0 / N_PERIODS as f64; N_PERIODS])
    }

    pub fn one_hot(k: usize) -> Self {
        let mut p = [0.0; N_PERIODS];
        p[k] = 1.0;
        ProbVector(p)
    }

    /// Softmax of raw scores, shifted by the max for stability.
    pub fn softmax(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p = [0.0; N_PERIODS];
        let mut sum = 0.0;
        for (slot, &z) in p.iter_mut().zip(logits) {
            *slot = (z - max).exp();
            sum += *slot;
        }
        for slot in &mut p {
            *slot /= sum;
        }
        ProbVector(p)
    }

    /// Arithmetic mean; `None` for an empty slice.
    pub fn mean(items: &[ProbVector]) -> Option<ProbVector> {
        if items.is_empty() {
            return None;
        }
        let mut acc = [0.0; N_PERIODS];
        for pv in items {
            for (a, x) in acc.iter_mut().zip(pv.0) {
                *a += x;
            }
        }
        let n = items.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        Some(ProbVector(acc))
    }

    pub fn argmax(&self) -> usize {
        crate::hedge_engine::argmax_first(&self.0)
    }
}

/// Relative label frequencies, the input-independent baseline.
pub fn multinomial_mle(labels: &[usize]) -> Result<ProbVector> {
    if labels.is_empty() {
        return Err(Error::input("no labels"));
    }
    let mut p = [0.0; N_PERIODS];
    for &l in labels {
        if l >= N_PERIODS {
            return Err(Error::input(format!("label {l} out of range")));
        }
        p[l] += 1.0;
    }
    let n = labels.len() as f64;
    for x in &mut p {
        *x /= n;
    }
    Ok(ProbVector(p))
}

/// Inputs and labels borrowed from dataset samples.
pub struct TrainingSet<'a> {
    pub x: Vec<&'a FeatureTensor>,
    pub y: Vec<usize>,
}

impl<'a> TrainingSet<'a> {
    pub fn from_samples<I: IntoIterator<Item = &'a Sample>>(samples: I) -> Self {
        let (x, y) = samples.into_iter().map(|s| (&s.features, s.label_index)).unzip();
        TrainingSet { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Any model that can score a feature tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Cnn(CnnModel),
    Logistic(LogisticModel),
    Forest(ForestModel),
    /// Ignores its input: bayes and uniform baselines.
    Constant { probs: ProbVector },
}

impl Model {
    pub fn predict(&self, x: &FeatureTensor) -> Result<ProbVector> {
        match self {
            Model::Cnn(m) => cnn_forward(m, x),
            Model::Logistic(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Constant { probs } => Ok(*probs),
        }
    }
}

/// Models whose outputs are averaged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<Model>,
}

impl Ensemble {
    pub fn new(members: Vec<Model>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("ensemble needs at least one model"));
        }
        Ok(Ensemble { members })
    }

    pub fn predict(&self, x: &FeatureTensor) -> Result<ProbVector> {
        let outs = self.members.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
        ProbVector::mean(&outs).ok_or_else(|| Error::config("empty ensemble"))
    }
}
