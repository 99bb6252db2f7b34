//! Supervised datasets of partial price histories labelled with the optimal
//! hedging period, plus the descriptive fits of the label histogram.
//!
//! Labels are computed once per path on the full horizon. Features only see
//! the first `cutoff_day` days; everything after is zero and masked out.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::csvio;
use crate::hedge_engine::{label_from_deltas, HedgeBase, PeriodLabel, N_PERIODS, PERIODS};
use crate::heston_sim::{sample_params, simulate_streams, HestonParams, ParamRanges, PathSet, DEFAULT_SUBSTEPS};
use crate::pricer::{price_path_with_deltas, CallSpec, MarketSeries, DEFAULT_MONEYNESS};
use crate::rng::{derive_seed, SeedTag};
use crate::{Error, Result};

/// Days visible to the classifiers (day 30 is expiry and never an input).
pub const FEATURE_DAYS: usize = 30;
pub const N_CHANNELS: usize = 2;
pub const HORIZON: usize = 30;
pub const DEFAULT_CUTOFFS: [usize; 6] = [5, 10, 15, 20, 25, 30];

/// Normalized stock and call channels, zero past the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    /// Channel-major: stock at `0..30`, call at `30..60`.
    pub channels: Vec<f64>,
    pub mask: Vec<f64>,
    pub cutoff_day: usize,
}

impl FeatureTensor {
    pub fn from_parts(channels: Vec<f64>, mask: Vec<f64>, cutoff_day: usize) -> Result<Self> {
        let ft = FeatureTensor { channels, mask, cutoff_day };
        ft.validate()?;
        Ok(ft)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != N_CHANNELS * FEATURE_DAYS || self.mask.len() != FEATURE_DAYS {
            return Err(Error::input(format!(
                "feature tensor shape ({}, {}) != ({}, {FEATURE_DAYS})",
                self.channels.len(),
                self.mask.len(),
                N_CHANNELS * FEATURE_DAYS
            )));
        }
        if !(1..=FEATURE_DAYS).contains(&self.cutoff_day) {
            return Err(Error::input(format!("cutoff {} outside 1..=30", self.cutoff_day)));
        }
        if self.channels.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("non-finite feature value"));
        }
        Ok(())
    }

    pub fn stock(&self) -> &[f64] {
        &self.channels[..FEATURE_DAYS]
    }

    pub fn call(&self) -> &[f64] {
        &self.channels[FEATURE_DAYS..]
    }
}

/// Self-normalized features of the first `cutoff_day` days.
pub fn featurize(series: &MarketSeries, cutoff_day: usize) -> Result<FeatureTensor> {
    if !(1..=FEATURE_DAYS).contains(&cutoff_day) {
        return Err(Error::input(format!("cutoff {cutoff_day} outside 1..=30")));
    }
    if series.len() < cutoff_day {
        return Err(Error::input("series shorter than cutoff"));
    }
    let s0 = series.s[0];
    if !(s0 > 0.0) {
        return Err(Error::input("initial stock price must be positive"));
    }
    let c_scale = if series.c[0] < 1e-9 { s0 } else { series.c[0] };
    let mut channels = vec![0.0; N_CHANNELS * FEATURE_DAYS];
    let mut mask = vec![0.0; FEATURE_DAYS];
    for t in 0..cutoff_day {
        channels[t] = series.s[t] / s0;
        channels[FEATURE_DAYS + t] = series.c[t] / c_scale;
        mask[t] = 1.0;
    }
    FeatureTensor::from_parts(channels, mask, cutoff_day)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureTensor,
    pub label_index: usize,
    pub path_id: u64,
    pub split: Split,
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_paths: usize,
    pub ranges: ParamRanges,
    pub hedge: HedgeBase,
    pub moneyness0: f64,
    pub substeps: usize,
    pub cutoffs: Vec<usize>,
    pub master_seed: u64,
    /// Every `test_every`-th path id (ids `k * test_every + test_every - 1`) is held out.
    pub test_every: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_paths: 1000,
            ranges: ParamRanges::default(),
            hedge: HedgeBase::default(),
            moneyness0: DEFAULT_MONEYNESS,
            substeps: DEFAULT_SUBSTEPS,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            master_seed: 0,
            test_every: 5,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be >= 1"));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps must be >= 1"));
        }
        if self.test_every < 2 {
            return Err(Error::config("test_every must be >= 2"));
        }
        if self.cutoffs.is_empty() || self.cutoffs.iter().any(|c| !(1..=FEATURE_DAYS).contains(c)) {
            return Err(Error::config("cutoffs must be a nonempty subset of 1..=30"));
        }
        self.ranges.validate()?;
        self.hedge.validate()
    }

    pub fn split_of(&self, path_id: u64) -> Split {
        if path_id % self.test_every == self.test_every - 1 {
            Split::Test
        } else {
            Split::Train
        }
    }
}

/// One simulated, priced and labelled path.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPath {
    pub path_id: u64,
    pub params: HestonParams,
    pub series: MarketSeries,
    pub v: Vec<f64>,
    /// Heston delta on every day.
    pub deltas: Vec<f64>,
    pub label: PeriodLabel,
}

/// Parameters and raw Heston path for `path_id`.
pub fn simulate_path(cfg: &DatasetConfig, path_id: u64) -> Result<(HestonParams, PathSet)> {
    let params = sample_params(&cfg.ranges, derive_seed(cfg.master_seed, SeedTag::Params, path_id))?;
    let path_key = derive_seed(cfg.master_seed, SeedTag::Paths, 0);
    let set = simulate_streams(&params, HORIZON, cfg.substeps, &[path_id], path_key)?;
    Ok((params, set))
}

/// Prices and labels a simulated path.
pub fn label_simulated(
    cfg: &DatasetConfig,
    path_id: u64,
    params: HestonParams,
    s: &[f64],
    v: &[f64],
) -> Result<LabeledPath> {
    let spec = CallSpec::from_moneyness(params.s0, cfg.moneyness0, HORIZON, cfg.hedge.r)?;
    let (series, deltas) = price_path_with_deltas(s, v, &params, &spec)?;
    let label = label_from_deltas(&series, &deltas, &cfg.hedge)?;
    Ok(LabeledPath { path_id, params, series, v: v.to_vec(), deltas, label })
}

/// Samples, simulates, prices and labels path `path_id`.
pub fn generate_path(cfg: &DatasetConfig, path_id: u64) -> Result<LabeledPath> {
    let (params, set) = simulate_path(cfg, path_id)?;
    label_simulated(cfg, path_id, params, set.s_row(0), set.v_row(0))
}

/// Generates paths `0..n_paths` in parallel; output order is by path id.
pub fn generate_labeled_paths(cfg: &DatasetConfig) -> Result<Vec<LabeledPath>> {
    cfg.validate()?;
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|id| generate_path(cfg, id))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn from_paths(config: &DatasetConfig, paths: &[LabeledPath]) -> Result<Self> {
        let mut samples = Vec::with_capacity(paths.len() * config.cutoffs.len());
        for p in paths {
            for &cutoff in &config.cutoffs {
                samples.push(Sample {
                    features: featurize(&p.series, cutoff)?,
                    label_index: p.label.label_index,
                    path_id: p.path_id,
                    split: config.split_of(p.path_id),
                });
            }
        }
        Ok(Dataset { config: config.clone(), samples })
    }

    pub fn at_cutoff(&self, cutoff: usize, split: Split) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.features.cutoff_day == cutoff && s.split == split)
            .collect()
    }

    /// One row per sample: `path_id,label,f0..f59,m0..m29`.
    pub fn write_cutoff_csv<W: Write>(&self, mut w: W, cutoff: usize) -> Result<()> {
        let mut header = vec!["path_id".to_string(), "label".to_string()];
        header.extend((0..N_CHANNELS * FEATURE_DAYS).map(|k| format!("f{k}")));
        header.extend((0..FEATURE_DAYS).map(|k| format!("m{k}")));
        writeln!(w, "{}", header.join(","))?;
        for s in self.samples.iter().filter(|s| s.features.cutoff_day == cutoff) {
            write!(w, "{},{}", s.path_id, s.label_index)?;
            for x in s.features.channels.iter().chain(&s.features.mask) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_cutoff_csv<R: BufRead>(config: &DatasetConfig, r: R, cutoff: usize) -> Result<Vec<Sample>> {
        let rows = csvio::read_rows(r, &["path_id", "label"])?;
        let width = 2 + N_CHANNELS * FEATURE_DAYS + FEATURE_DAYS;
        rows.iter()
            .map(|row| {
                if row.fields.len() != width {
                    return Err(Error::Parse {
                        line: row.line,
                        msg: format!("expected {width} columns, found {}", row.fields.len()),
                    });
                }
                let path_id: u64 = row.parse(0)?;
                let label_index: usize = row.parse(1)?;
                if label_index >= N_PERIODS {
                    return Err(Error::Parse { line: row.line, msg: format!("label {label_index} out of range") });
                }
                let values = (2..width).map(|k| row.parse::<f64>(k)).collect::<Result<Vec<_>>>()?;
                let (channels, mask) = values.split_at(N_CHANNELS * FEATURE_DAYS);
                Ok(Sample {
                    features: FeatureTensor::from_parts(channels.to_vec(), mask.to_vec(), cutoff)?,
                    label_index,
                    path_id,
                    split: config.split_of(path_id),
                })
            })
            .collect()
    }
}

/// Runs the whole generation for a configuration.
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset> {
    let paths = generate_labeled_paths(config)?;
    Dataset::from_paths(config, &paths)
}

pub fn label_counts<I: IntoIterator<Item = usize>>(labels: I) -> [u64; N_PERIODS] {
    let mut counts = [0u64; N_PERIODS];
    for l in labels {
        counts[l] += 1;
    }
    counts
}

/// Poisson and Gaussian fits of the label histogram over period rank `0..7`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    pub poisson_rate: f64,
    pub gaussian_mean: f64,
    pub gaussian_std: f64,
    pub observed: [f64; N_PERIODS],
    pub poisson_freq: [f64; N_PERIODS],
    pub gaussian_freq: [f64; N_PERIODS],
}

/// Maximum-likelihood fits treating the rank index as the variable.
///
/// The Gaussian frequency of bin `k` is its mass on `[k - 1/2, k + 1/2]`.
pub fn fit_histogram_models(counts: &[u64; N_PERIODS]) -> Result<HistogramFit> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::input("histogram has no observations"));
    }
    let n = total as f64;
    let mut observed = [0.0; N_PERIODS];
    for (o, &c) in observed.iter_mut().zip(counts) {
        *o = c as f64 / n;
    }
    let mean: f64 = observed.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let var: f64 = observed.iter().enumerate().map(|(k, p)| p * (k as f64 - mean).powi(2)).sum();
    let std = var.sqrt();

    let mut poisson_freq = [0.0; N_PERIODS];
    let mut log_fact = 0.0;
    for (k, slot) in poisson_freq.iter_mut().enumerate() {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        *slot = if mean == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (k as f64 * mean.ln() - mean - log_fact).exp()
        };
    }

    let mut gaussian_freq = [0.0; N_PERIODS];
    if std == 0.0 {
        gaussian_freq[mean.round() as usize] = 1.0;
    } else {
        let normal = Normal::new(mean, std).map_err(|e| Error::NumericalDomain {
            context: "fit_histogram_models",
            detail: e.to_string(),
        })?;
        for (k, slot) in gaussian_freq.iter_mut().enumerate() {
            *slot = normal.cdf(k as f64 + 0.5) - normal.cdf(k as f64 - 0.5);
        }
    }
    Ok(HistogramFit {
        poisson_rate: mean,
        gaussian_mean: mean,
        gaussian_std: std,
        observed,
        poisson_freq,
        gaussian_freq,
    })
}

/// Pearson chi-square test of the counts against the uniform distribution.
///
/// Returns `(statistic, p_value)` with `N_PERIODS - 1` degrees of freedom.
pub fn chi_square_uniform(counts: &[u64; N_PERIODS]) -> Result<(f64, f64)> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::input("histogram has no observations"));
    }
    let expected = total as f64 / N_PERIODS as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((N_PERIODS - 1) as f64).expect("positive dof");
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Histogram CSV row set: `tau,count,observed,poisson,gaussian`.
pub fn write_histogram_csv<W: Write>(mut w: W, counts: &[u64; N_PERIODS], fit: &HistogramFit) -> Result<()> {
    writeln!(w, "tau,count,observed,poisson,gaussian")?;
    for k in 0..N_PERIODS {
        writeln!(
            w,
            "{},{},{},{},{}",
            PERIODS[k], counts[k], fit.observed[k], fit.poisson_freq[k], fit.gaussian_freq[k]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricer::SeriesSource;

    fn toy_series() -> MarketSeries {
        let spec = CallSpec { strike: 90.0, maturity_day: 30, r: 0.0, moneyness0: 1.1 };
        let s: Vec<f64> = (0..31).map(|t| 99.0 + (t as f64 * 0.4).sin()).collect();
        let c: Vec<f64> = s.iter().map(|x| (x - 90.0) + 0.5).collect();
        MarketSeries::new(s, c, spec, SeriesSource::Synthetic).unwrap()
    }

    #[test]
    fn full_cutoff_has_no_padding() {
        let ft = featurize(&toy_series(), 30).unwrap();
        assert!(ft.mask.iter().all(|&m| m == 1.0));
        assert!(ft.channels.iter().all(|&x| x != 0.0));
    }

    #[test]
    fn stock_channel_is_self_normalized() {
        for cutoff in [1, 7, 30] {
            let ft = featurize(&toy_series(), cutoff).unwrap();
            assert_eq!(ft.stock()[0], 1.0);
            assert_eq!(ft.call()[0], 1.0);
            assert_eq!(ft.mask.iter().sum::<f64>(), cutoff as f64);
            assert!(ft.stock()[cutoff..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn worthless_call_is_scaled_by_stock() {
        let mut series = toy_series();
        series.c = vec![0.0; 31];
        let ft = featurize(&series, 10).unwrap();
        assert!(ft.call().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_initial_price_is_rejected() {
        let mut series = toy_series();
        series.s[0] = 0.0;
        assert!(matches!(featurize(&series, 5), Err(Error::Input(_))));
        assert!(featurize(&toy_series(), 0).is_err());
        assert!(featurize(&toy_series(), 31).is_err());
    }

    #[test]
    fn degenerate_histogram() {
        let fit = fit_histogram_models(&[12, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(fit.poisson_rate, 0.0);
        assert_eq!(fit.gaussian_mean, 0.0);
        assert_eq!(fit.poisson_freq[0], 1.0);
        assert_eq!(fit.gaussian_freq[0], 1.0);
    }

    #[test]
    fn flat_histogram_is_centered() {
        let fit = fit_histogram_models(&[1; 8]).unwrap();
        assert!((fit.gaussian_mean - 3.5).abs() < 1e-15);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        assert!(fit_histogram_models(&[0; 8]).is_err());
        assert!(chi_square_uniform(&[0; 8]).is_err());
    }

    #[test]
    fn chi_square_accepts_uniform_and_rejects_spike() {
        let (stat, p) = chi_square_uniform(&[100; 8]).unwrap();
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square_uniform(&[800, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!(p < 1e-12);
    }
}
