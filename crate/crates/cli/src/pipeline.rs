//! The six pipeline stages and the files each one reads and writes.
//!
//! | stage    | reads                          | writes |
//! |----------|--------------------------------|--------|
//! | simulate |                                | `paths.csv`, `params.json` |
//! | label    | simulate                       | `market.csv`, `labels.csv`, `histogram.csv`, `histogram.json`, `dataset_cNN.csv`, `dataset.json` |
//! | train    | `dataset_cNN.csv`              | `models.json`, `training_losses.csv` |
//! | evaluate | `models.json`, `dataset_cNN.csv` | `auc.csv` |
//! | backtest | `market.csv`, `models.json`    | `metrics.csv`, `metrics_by_path.csv`, `rewards.csv`, `report.csv`, `weights.csv` (+ `_real` variants) |
//! | sweep    | `rewards.csv`                  | `sweep.csv`, `sweep_by_path.csv`, `win_fractions.csv` |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use mshedge_core::classifiers::{
    cnn_train, multinomial_mle, roc_auc_ovr, Ensemble, ForestModel, LogisticModel, Model, TrainingSet,
};
use mshedge_core::dataset::{
    chi_square_uniform, fit_histogram_models, label_counts, label_simulated, simulate_path, Dataset, HistogramFit,
    LabeledPath, Sample, Split, HORIZON,
};
use mshedge_core::hedge_engine::{write_label_header, write_label_row, RewardBreakdown, N_PERIODS, PERIODS};
use mshedge_core::heston_sim::HestonParams;
use mshedge_core::multiscale::{
    backtest_tracks, gamma_sweep, generalized_reward, strategy_metrics, weight_schedule, win_fractions,
    write_metrics_csv, write_report_csv, write_sweep_csv, write_weights_csv, BacktestReport, CutoffEnsembles,
    DeltaTracks, StrategyMetrics, Strategy, SweepRow, WeightSchedule,
};
use mshedge_core::pricer::{implied_vol_deltas, CallSpec, MarketSeries, SeriesSource};
use mshedge_core::rng::{derive_seed, SeedTag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{ArtifactDir, Manifest};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{ingest_real_csv, IngestOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    Label,
    Train,
    Evaluate,
    Backtest,
    Sweep,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Simulate, Stage::Label, Stage::Train, Stage::Evaluate, Stage::Backtest, Stage::Sweep];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Label => "label",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Backtest => "backtest",
            Stage::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PathParams {
    path_id: u64,
    params: HestonParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SimulationSidecar {
    n_days: usize,
    substeps: usize,
    paths: Vec<PathParams>,
}

#[derive(Serialize, Deserialize)]
struct HistogramSummary {
    counts: [u64; N_PERIODS],
    chi_square: f64,
    p_value: f64,
    fit: HistogramFit,
}

#[derive(Serialize, Deserialize)]
struct DatasetSummary {
    config: mshedge_core::dataset::DatasetConfig,
    n_train_paths: usize,
    n_test_paths: usize,
}

/// Ensembles of every learned strategy, keyed by strategy name.
pub type ModelBundle = BTreeMap<String, CutoffEnsembles>;

pub const MODELS: &str = "models.json";

pub fn dataset_file(cutoff: usize) -> String {
    format!("dataset_c{cutoff:02}.csv")
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes)
}

fn rows<T: serde::de::DeserializeOwned>(dir: &ArtifactDir, name: &str) -> Result<Vec<T>> {
    let bytes = dir.read_csv(name)?;
    reader(&bytes)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::Csv { file: name.to_string(), source: e })
}

fn manifest_template(cfg: &RunConfig, hash: &str) -> Manifest {
    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_string(), cfg.seed);
    seeds.insert("paths_key".to_string(), derive_seed(cfg.seed, SeedTag::Paths, 0));
    Manifest {
        config_hash: hash.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(cfg).unwrap_or_default(),
        seeds,
        stages: BTreeMap::new(),
    }
}

/// Runs one stage, writing its files and updating the manifest.
pub fn run_pipeline(cfg: &RunConfig, stage: Stage, out: &Path) -> Result<()> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let mut dir = ArtifactDir::create(out, &hash)?;
    match stage {
        Stage::Simulate => simulate(cfg, &mut dir)?,
        Stage::Label => label(cfg, &mut dir)?,
        Stage::Train => train(cfg, &mut dir)?,
        Stage::Evaluate => evaluate(cfg, &mut dir)?,
        Stage::Backtest => backtest(cfg, &mut dir)?,
        Stage::Sweep => sweep(cfg, &mut dir)?,
    }
    dir.finish_stage(stage.name(), &manifest_template(cfg, &hash))
}

pub fn run_all(cfg: &RunConfig, out: &Path) -> Result<()> {
    for stage in Stage::ALL {
        run_pipeline(cfg, stage, out)?;
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<()> {
    let dcfg = cfg.dataset_config();
    let sims = (0..dcfg.n_paths as u64)
        .into_par_iter()
        .map(|id| simulate_path(&dcfg, id))
        .collect::<mshedge_core::Result<Vec<_>>>()?;
    dir.write_csv("paths.csv", |w| {
        writeln!(w, "path_id,day,s,v")?;
        for (id, (_, set)) in sims.iter().enumerate() {
            for (day, (s, v)) in set.s_row(0).iter().zip(set.v_row(0)).enumerate() {
                writeln!(w, "{id},{day},{s},{v}")?;
            }
        }
        Ok(())
    })?;
    let sidecar = SimulationSidecar {
        n_days: HORIZON,
        substeps: dcfg.substeps,
        paths: sims
            .iter()
            .enumerate()
            .map(|(id, (params, _))| PathParams { path_id: id as u64, params: *params })
            .collect(),
    };
    dir.write_json("params.json", &sidecar)
}

#[derive(Deserialize)]
struct PathRow {
    path_id: u64,
    day: usize,
    s: f64,
    v: f64,
}

fn label(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<()> {
    let dcfg = cfg.dataset_config();
    let sidecar: SimulationSidecar = dir.read_json("params.json")?;
    let raw: Vec<PathRow> = rows(dir, "paths.csv")?;
    let width = HORIZON + 1;
    if sidecar.paths.len() != dcfg.n_paths || raw.len() != dcfg.n_paths * width {
        return Err(CliError::Dependency("paths.csv does not match params.json".into()));
    }
    let labelled = sidecar
        .paths
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let chunk = &raw[k * width..(k + 1) * width];
            if chunk.iter().enumerate().any(|(d, r)| r.path_id != p.path_id || r.day != d) {
                return Err(CliError::Dependency(format!("paths.csv rows for path {} are incomplete", p.path_id)));
            }
            let s: Vec<f64> = chunk.iter().map(|r| r.s).collect();
            let v: Vec<f64> = chunk.iter().map(|r| r.v).collect();
            Ok(label_simulated(&dcfg, p.path_id, p.params, &s, &v)?)
        })
        .collect::<Result<Vec<LabeledPath>>>()?;

    dir.write_csv("market.csv", |w| {
        writeln!(w, "path_id,day,s,c,v,delta")?;
        for p in &labelled {
            for t in 0..p.series.len() {
                writeln!(w, "{},{t},{},{},{},{}", p.path_id, p.series.s[t], p.series.c[t], p.v[t], p.deltas[t])?;
            }
        }
        Ok(())
    })?;
    dir.write_csv("labels.csv", |w| {
        write_label_header(&mut *w)?;
        for p in &labelled {
            write_label_row(&mut *w, p.path_id, &p.label)?;
        }
        Ok(())
    })?;

    let counts = label_counts(labelled.iter().map(|p| p.label.label_index));
    let fit = fit_histogram_models(&counts)?;
    let (chi_square, p_value) = chi_square_uniform(&counts)?;
    dir.write_csv("histogram.csv", |w| mshedge_core::dataset::write_histogram_csv(w, &counts, &fit))?;
    dir.write_json("histogram.json", &HistogramSummary { counts, chi_square, p_value, fit })?;

    let ds = Dataset::from_paths(&dcfg, &labelled)?;
    for &c in &dcfg.cutoffs {
        dir.write_csv(&dataset_file(c), |w| ds.write_cutoff_csv(w, c))?;
    }
    let n_test = labelled.iter().filter(|p| dcfg.split_of(p.path_id) == Split::Test).count();
    dir.write_json(
        "dataset.json",
        &DatasetSummary { config: dcfg, n_train_paths: labelled.len() - n_test, n_test_paths: n_test },
    )
}

fn train_set(samples: &[Sample]) -> TrainingSet<'_> {
    TrainingSet::from_samples(samples.iter().filter(|s| s.split == Split::Train))
}

fn load_cutoff(cfg: &RunConfig, dir: &ArtifactDir, cutoff: usize) -> Result<Vec<Sample>> {
    let bytes = dir.read_csv(&dataset_file(cutoff))?;
    Ok(Dataset::read_cutoff_csv(&cfg.dataset_config(), bytes.as_slice(), cutoff)?)
}

fn train(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<()> {
    let cutoffs = cfg.dataset.cutoffs.clone();
    let data = cutoffs
        .iter()
        .map(|&c| load_cutoff(cfg, dir, c).map(|s| (c, s)))
        .collect::<Result<Vec<_>>>()?;
    for (c, samples) in &data {
        if !samples.iter().any(|s| s.split == Split::Train) {
            return Err(CliError::Config(format!("no training samples at cutoff {c}; increase dataset.n_paths")));
        }
    }

    let members = cfg.training.cnn.ensemble_size;
    let jobs: Vec<(usize, usize)> = (0..data.len()).flat_map(|i| (0..members).map(move |k| (i, k))).collect();
    let cnns = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (c, samples) = &data[i];
            let tc = cfg.cnn_config(derive_seed(cfg.seed, SeedTag::Init, *c as u64)).member(k);
            cnn_train(&train_set(samples), &tc)
        })
        .collect::<mshedge_core::Result<Vec<_>>>()?;

    let mut bundle: BTreeMap<Strategy, BTreeMap<usize, Ensemble>> = BTreeMap::new();
    for (i, (c, samples)) in data.iter().enumerate() {
        let set = train_set(samples);
        let cnn_members = cnns[i * members..(i + 1) * members].iter().map(|(m, _)| Model::Cnn(m.clone())).collect();
        let linear = LogisticModel::train(&set, &cfg.training.logistic)?;
        let forest = ForestModel::train(&set, &cfg.forest_config(derive_seed(cfg.seed, SeedTag::Bootstrap, *c as u64)))?;
        let bayes = multinomial_mle(&set.y)?;
        let entries = [
            (Strategy::Cnn, Ensemble::new(cnn_members)?),
            (Strategy::Linear, Ensemble::new(vec![Model::Logistic(linear)])?),
            (Strategy::Forest, Ensemble::new(vec![Model::Forest(forest)])?),
            (Strategy::Bayes, Ensemble::new(vec![Model::Constant { probs: bayes }])?),
        ];
        for (strategy, ens) in entries {
            bundle.entry(strategy).or_default().insert(*c, ens);
        }
    }
    let bundle: ModelBundle = bundle
        .into_iter()
        .map(|(s, m)| Ok((s.to_string(), CutoffEnsembles::new(m)?)))
        .collect::<mshedge_core::Result<_>>()?;
    dir.write_json(MODELS, &bundle)?;
    dir.write_csv("training_losses.csv", |w| {
        writeln!(w, "cutoff_day,member,epoch,loss")?;
        for (&(i, k), (_, report)) in jobs.iter().zip(&cnns) {
            for (epoch, loss) in report.epoch_losses.iter().enumerate() {
                writeln!(w, "{},{k},{},{loss}", data[i].0, epoch + 1)?;
            }
        }
        Ok(())
    })
}

fn load_models(dir: &ArtifactDir) -> Result<ModelBundle> {
    dir.read_json(MODELS)
}

fn evaluate(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<()> {
    let bundle = load_models(dir)?;
    let mut lines = Vec::new();
    for &c in &cfg.dataset.cutoffs {
        let test: Vec<Sample> = load_cutoff(cfg, dir, c)?.into_iter().filter(|s| s.split == Split::Test).collect();
        let labels: Vec<usize> = test.iter().map(|s| s.label_index).collect();
        for (kind, models) in &bundle {
            let ens = models
                .by_cutoff
                .get(&c)
                .ok_or_else(|| CliError::Dependency(format!("{MODELS} has no {kind} models for cutoff {c}")))?;
            let preds = test.iter().map(|s| ens.predict(&s.features)).collect::<mshedge_core::Result<Vec<_>>>()?;
            let mut cells = vec![c.to_string(), kind.clone()];
            match roc_auc_ovr(&preds, &labels) {
                Ok(rep) => {
                    cells.push(rep.macro_auc.to_string());
                    cells.extend(rep.per_class.iter().map(|a| a.map(|x| x.to_string()).unwrap_or_default()));
                }
                Err(mshedge_core::Error::UndefinedMetric(_)) => cells.extend(vec![String::new(); N_PERIODS + 1]),
                Err(e) => return Err(e.into()),
            }
            lines.push(cells.join(","));
        }
    }
    dir.write_csv("auc.csv", |w| {
        let cols: Vec<String> = PERIODS.iter().map(|t| format!("auc_{t}")).collect();
        writeln!(w, "cutoff_day,model_kind,macro_auc,{}", cols.join(","))?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

#[derive(Deserialize)]
struct MarketRow {
    path_id: u64,
    day: usize,
    s: f64,
    c: f64,
    #[allow(dead_code)]
    v: f64,
    delta: f64,
}

struct StrategyRun {
    strategy: Strategy,
    schedule: WeightSchedule,
    report: BacktestReport,
    metrics: StrategyMetrics,
    reward: RewardBreakdown,
}

fn schedule_for(strategy: Strategy, bundle: Option<&ModelBundle>, series: &MarketSeries) -> Result<WeightSchedule> {
    match strategy {
        Strategy::Unif => Ok(WeightSchedule::uniform()),
        Strategy::Fixed(t) => Ok(WeightSchedule::one_hot(t)?),
        learned => {
            let models = bundle
                .and_then(|b| b.get(&learned.to_string()))
                .ok_or_else(|| CliError::Dependency(format!("{MODELS} has no {learned} models")))?;
            Ok(weight_schedule(models, series, learned)?)
        }
    }
}

fn run_strategies(
    cfg: &RunConfig,
    strategies: &[Strategy],
    bundle: Option<&ModelBundle>,
    series: &MarketSeries,
    pointwise: &[f64],
) -> Result<Vec<StrategyRun>> {
    let tracks = DeltaTracks::from_pointwise(pointwise);
    strategies
        .iter()
        .map(|&strategy| {
            let schedule = schedule_for(strategy, bundle, series)?;
            let report = backtest_tracks(series, &tracks, &schedule, &cfg.hedge)?;
            let metrics = strategy_metrics(&report, series)?;
            let reward = generalized_reward(&report, series, &cfg.hedge)?;
            Ok(StrategyRun { strategy, schedule, report, metrics, reward })
        })
        .collect()
}

fn write_showcase(dir: &mut ArtifactDir, suffix: &str, runs: &[StrategyRun]) -> Result<()> {
    let reports: Vec<(Strategy, BacktestReport)> = runs.iter().map(|r| (r.strategy, r.report.clone())).collect();
    dir.write_csv(&format!("report{suffix}.csv"), |w| write_report_csv(w, &reports))?;
    let schedules: Vec<WeightSchedule> = runs.iter().map(|r| r.schedule.clone()).collect();
    dir.write_csv(&format!("weights{suffix}.csv"), |w| write_weights_csv(w, &schedules))
}

fn backtest(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<()> {
    let dcfg = cfg.dataset_config();
    let strategies = cfg.strategies()?;
    let bundle = if strategies.iter().any(|s| s.is_learned()) { Some(load_models(dir)?) } else { None };

    let market: Vec<MarketRow> = rows(dir, "market.csv")?;
    let width = HORIZON + 1;
    let mut paths: Vec<(u64, MarketSeries, Vec<f64>)> = Vec::new();
    for chunk in market.chunks(width) {
        let id = chunk[0].path_id;
        if chunk.len() != width || chunk.iter().enumerate().any(|(d, r)| r.path_id != id || r.day != d) {
            return Err(CliError::Dependency(format!("market.csv rows for path {id} are incomplete")));
        }
        if dcfg.split_of(id) != Split::Test {
            continue;
        }
        let s: Vec<f64> = chunk.iter().map(|r| r.s).collect();
        let spec = CallSpec::from_moneyness(s[0], dcfg.moneyness0, HORIZON, cfg.hedge.r)?;
        let c = chunk.iter().map(|r| r.c).collect();
        let series = MarketSeries::new(s, c, spec, SeriesSource::Synthetic)?;
        paths.push((id, series, chunk.iter().map(|r| r.delta).collect()));
        if cfg.backtest.max_paths.is_some_and(|m| paths.len() >= m) {
            break;
        }
    }
    if paths.is_empty() {
        return Err(CliError::Config("no held-out paths to backtest; increase dataset.n_paths".into()));
    }

    let results = paths
        .par_iter()
        .map(|(_, series, deltas)| run_strategies(cfg, &strategies, bundle.as_ref(), series, deltas))
        .collect::<Result<Vec<_>>>()?;

    let n = results.len() as f64;
    let mean_metrics: Vec<(Strategy, StrategyMetrics)> = strategies
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let sum = |f: fn(&StrategyMetrics) -> f64| results.iter().map(|r| f(&r[k].metrics)).sum::<f64>() / n;
            (s, StrategyMetrics { final_pct: sum(|m| m.final_pct), std_pct: sum(|m| m.std_pct), under_pct: sum(|m| m.under_pct) })
        })
        .collect();
    dir.write_csv("metrics.csv", |w| write_metrics_csv(w, &mean_metrics))?;
    dir.write_csv("metrics_by_path.csv", |w| {
        writeln!(w, "path_id,strategy,final_pct,std_pct,under_pct")?;
        for ((id, _, _), runs) in paths.iter().zip(&results) {
            for r in runs {
                let m = r.metrics;
                writeln!(w, "{id},{},{},{},{}", r.strategy, m.final_pct, m.std_pct, m.under_pct)?;
            }
        }
        Ok(())
    })?;
    dir.write_csv("rewards.csv", |w| {
        writeln!(w, "path_id,strategy,pi0,growth_term,cost_sum,tracking_std,reward")?;
        for ((id, _, _), runs) in paths.iter().zip(&results) {
            for r in runs {
                let b = &r.reward;
                writeln!(
                    w,
                    "{id},{},{},{},{},{},{}",
                    r.strategy, b.pi0, b.growth_term, b.cost_sum, b.tracking_std, b.reward
                )?;
            }
        }
        Ok(())
    })?;
    write_showcase(dir, "", &results[0])?;

    if let Some(real) = &cfg.backtest.real {
        let opts = IngestOptions { truncate: real.truncate, force: real.force };
        let series = ingest_real_csv(&real.csv, real.strike, real.r, opts)?;
        let pointwise = implied_vol_deltas(&series);
        let runs = run_strategies(cfg, &strategies, bundle.as_ref(), &series, &pointwise)?;
        let metrics: Vec<(Strategy, StrategyMetrics)> = runs.iter().map(|r| (r.strategy, r.metrics)).collect();
        dir.write_csv("metrics_real.csv", |w| write_metrics_csv(w, &metrics))?;
        write_showcase(dir, "_real", &runs)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct RewardRow {
    path_id: u64,
    strategy: String,
    pi0: f64,
    growth_term: f64,
    cost_sum: f64,
    tracking_std: f64,
    #[allow(dead_code)]
    reward: f64,
}

fn sweep(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<()> {
    let gammas = &cfg.sweep.gammas;
    let table: Vec<RewardRow> = rows(dir, "rewards.csv")?;
    let mut by_path: BTreeMap<u64, Vec<(Strategy, RewardBreakdown)>> = BTreeMap::new();
    for r in table {
        let b = RewardBreakdown {
            pi0: r.pi0,
            growth_term: r.growth_term,
            cost_sum: r.cost_sum,
            tracking_std: r.tracking_std,
            reward: 0.0,
            per_rebalance_costs: Vec::new(),
        };
        by_path.entry(r.path_id).or_default().push((r.strategy.parse()?, b));
    }
    if by_path.is_empty() {
        return Err(CliError::Dependency("rewards.csv has no rows".into()));
    }
    let sweeps: Vec<(u64, Vec<SweepRow>)> = by_path
        .iter()
        .map(|(id, entries)| Ok((*id, gamma_sweep(entries, gammas)?)))
        .collect::<mshedge_core::Result<_>>()?;
    let strategies: Vec<Strategy> = by_path.values().next().map(|e| e.iter().map(|(s, _)| *s).collect()).unwrap_or_default();

    let n = sweeps.len() as f64;
    let mut mean_rows = Vec::new();
    for &g in gammas {
        for &s in &strategies {
            let total: f64 = sweeps
                .iter()
                .flat_map(|(_, rows)| rows.iter().filter(|r| r.gamma == g && r.strategy == s))
                .map(|r| r.reward_gap)
                .sum();
            mean_rows.push(SweepRow { gamma: g, strategy: s, reward: f64::NAN, reward_gap: total / n });
        }
    }
    dir.write_csv("sweep.csv", |w| write_sweep_csv(w, &mean_rows))?;
    dir.write_csv("sweep_by_path.csv", |w| {
        writeln!(w, "path_id,gamma,strategy,reward,reward_gap")?;
        for (id, rows) in &sweeps {
            for r in rows {
                writeln!(w, "{id},{},{},{},{}", r.gamma, r.strategy, r.reward, r.reward_gap)?;
            }
        }
        Ok(())
    })?;
    let only: Vec<Vec<SweepRow>> = sweeps.into_iter().map(|(_, r)| r).collect();
    dir.write_csv("win_fractions.csv", |w| {
        writeln!(w, "gamma,strategy,win_fraction")?;
        for &s in &strategies {
            for (g, frac) in gammas.iter().zip(win_fractions(&only, gammas, s)) {
                writeln!(w, "{g},{s},{frac}")?;
            }
        }
        Ok(())
    })
}

/// Reads the mean Final/Std/Under table written by the backtest stage.
pub fn read_metrics(out: &Path, cfg: &RunConfig) -> Result<Vec<(String, [f64; 3])>> {
    let dir = ArtifactDir::create(out, &cfg.hash()?)?;
    let bytes = dir.read_csv("metrics.csv")?;
    let mut rdr = reader(&bytes);
    let mut out_rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Csv { file: "metrics.csv".into(), source: e })?;
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| CliError::Dependency("metrics.csv has a bad value".into()));
        out_rows.push((rec[0].to_string(), [num(1)?, num(2)?, num(3)?]));
    }
    Ok(out_rows)
}
