//! TOML run configuration. Every field has a default, so an empty file is valid.

use std::path::{Path, PathBuf};

use mshedge_core::classifiers::{ForestConfig, LogisticConfig, TrainConfig};
use mshedge_core::dataset::{DatasetConfig, DEFAULT_CUTOFFS};
use mshedge_core::hedge_engine::HedgeBase;
use mshedge_core::heston_sim::{ParamRanges, DEFAULT_SUBSTEPS};
use mshedge_core::multiscale::Strategy;
use mshedge_core::pricer::DEFAULT_MONEYNESS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub ranges: ParamRanges,
    pub hedge: HedgeBase,
    pub dataset: DatasetSection,
    pub training: TrainingSection,
    pub backtest: BacktestSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            ranges: ParamRanges::default(),
            hedge: HedgeBase::default(),
            dataset: DatasetSection::default(),
            training: TrainingSection::default(),
            backtest: BacktestSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub n_paths: usize,
    pub cutoffs: Vec<usize>,
    pub moneyness0: f64,
    pub substeps: usize,
    /// Every `test_every`-th path is held out.
    pub test_every: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            n_paths: 1000,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            moneyness0: DEFAULT_MONEYNESS,
            substeps: DEFAULT_SUBSTEPS,
            test_every: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub ensemble_size: usize,
}

impl Default for CnnSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        CnnSection {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            epochs: d.epochs,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
            ensemble_size: d.ensemble_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestConfig::default();
        ForestSection {
            n_trees: d.n_trees,
            max_depth: d.max_depth,
            min_samples_leaf: d.min_samples_leaf,
            max_features: d.max_features,
            bootstrap: d.bootstrap,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub cnn: CnnSection,
    pub logistic: LogisticConfig,
    pub forest: ForestSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub strategies: Vec<String>,
    /// Cap on the number of held-out paths backtested; all of them when absent.
    pub max_paths: Option<usize>,
    pub real: Option<RealDataSection>,
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection {
            strategies: Strategy::all().iter().map(|s| s.to_string()).collect(),
            max_paths: None,
            real: None,
        }
    }
}

/// Observed call quotes to hedge alongside the synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealDataSection {
    pub csv: PathBuf,
    pub strike: f64,
    #[serde(default)]
    pub r: f64,
    /// Keep the last 31 trading rows of a longer file.
    #[serde(default)]
    pub truncate: bool,
    /// Accept gaps longer than one missing weekday.
    #[serde(default)]
    pub force: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { gammas: vec![0.1, 0.5, 1.0, 1.5, 3.0, 5.0] }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.hedge.validate()?;
        self.dataset_config().validate()?;
        let c = &self.dataset.cutoffs;
        if c.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("dataset.cutoffs must be strictly increasing".into()));
        }
        if self.training.cnn.ensemble_size == 0 {
            return Err(CliError::Config("training.cnn.ensemble_size must be >= 1".into()));
        }
        if self.training.cnn.batch_size == 0 || self.training.cnn.epochs == 0 {
            return Err(CliError::Config("training.cnn batch_size and epochs must be >= 1".into()));
        }
        self.strategies()?;
        if self.sweep.gammas.is_empty() || self.sweep.gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(CliError::Config("sweep.gammas must be a nonempty list of positive values".into()));
        }
        if let Some(real) = &self.backtest.real {
            if !real.csv.is_file() {
                return Err(CliError::Config(format!("backtest.real.csv {} does not exist", real.csv.display())));
            }
            if !(real.strike > 0.0) {
                return Err(CliError::Config("backtest.real.strike must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        let out = self
            .backtest
            .strategies
            .iter()
            .map(|s| s.parse::<Strategy>())
            .collect::<mshedge_core::Result<Vec<_>>>()?;
        if out.is_empty() {
            return Err(CliError::Config("backtest.strategies is empty".into()));
        }
        Ok(out)
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            n_paths: self.dataset.n_paths,
            ranges: self.ranges,
            hedge: self.hedge,
            moneyness0: self.dataset.moneyness0,
            substeps: self.dataset.substeps,
            cutoffs: self.dataset.cutoffs.clone(),
            master_seed: self.seed,
            test_every: self.dataset.test_every,
        }
    }

    /// CNN settings; the caller supplies the seed.
    pub fn cnn_config(&self, init_seed: u64) -> TrainConfig {
        let c = &self.training.cnn;
        TrainConfig {
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            epochs: c.epochs,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            init_seed,
            ensemble_size: c.ensemble_size,
        }
    }

    pub fn forest_config(&self, seed: u64) -> ForestConfig {
        let f = &self.training.forest;
        ForestConfig {
            n_trees: f.n_trees,
            max_depth: f.max_depth,
            min_samples_leaf: f.min_samples_leaf,
            max_features: f.max_features,
            bootstrap: f.bootstrap,
            seed,
        }
    }

    /// Short digest of the resolved configuration and of any referenced data file.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).map_err(|e| CliError::Config(e.to_string()))?);
        if let Some(real) = &self.backtest.real {
            let bytes = std::fs::read(&real.csv).map_err(|e| CliError::io(&real.csv, e))?;
            h.update(bytes);
        }
        Ok(hex::encode(&h.finalize()[..8]))
    }
}
