//! Dynamic multi-scale hedging: eight fixed-period delta tracks blended daily
//! by model probabilities, with wealth accounting, reward and summary metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{Ensemble, ProbVector};
use crate::dataset::{featurize, FEATURE_DAYS, HORIZON};
use crate::hedge_engine::{
    freeze_deltas, CostPriceTiming, HedgeBase, RewardBreakdown, N_PERIODS, PERIODS,
};
use crate::heston_sim::HestonParams;
use crate::pricer::{heston_delta, MarketSeries};
use crate::{Error, Result};

/// One row per day `0..=30`.
pub const SCHEDULE_ROWS: usize = HORIZON + 1;

/// Threshold below which a change of the aggregate delta is not a trade.
pub const TRADE_EPS: f64 = 1e-12;

/// Source of a weight schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Cnn,
    Forest,
    Linear,
    Bayes,
    Unif,
    Fixed(usize),
}

impl Strategy {
    /// The thirteen strategies in report order.
    pub fn all() -> Vec<Strategy> {
        let mut out = vec![Strategy::Cnn, Strategy::Forest, Strategy::Linear, Strategy::Bayes, Strategy::Unif];
        out.extend(PERIODS.iter().map(|&t| Strategy::Fixed(t)));
        out
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Strategy::Cnn | Strategy::Forest | Strategy::Linear | Strategy::Bayes)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Cnn => f.write_str("CNN"),
            Strategy::Forest => f.write_str("forest"),
            Strategy::Linear => f.write_str("linear"),
            Strategy::Bayes => f.write_str("bayes"),
            Strategy::Unif => f.write_str("unif"),
            Strategy::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CNN" | "cnn" => Ok(Strategy::Cnn),
            "forest" => Ok(Strategy::Forest),
            "linear" => Ok(Strategy::Linear),
            "bayes" => Ok(Strategy::Bayes),
            "unif" => Ok(Strategy::Unif),
            other => match other.parse::<usize>() {
                Ok(t) if PERIODS.contains(&t) => Ok(Strategy::Fixed(t)),
                _ => Err(Error::config(format!("unknown strategy {other:?}"))),
            },
        }
    }
}

/// Daily probabilities of each period being optimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub w: Vec<ProbVector>,
    pub provenance: Strategy,
}

impl WeightSchedule {
    pub fn new(w: Vec<ProbVector>, provenance: Strategy) -> Result<Self> {
        let sched = WeightSchedule { w, provenance };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != SCHEDULE_ROWS {
            return Err(Error::input(format!(
                "schedule has {} rows, expected {SCHEDULE_ROWS}",
                self.w.len()
            )));
        }
        self.w.iter().try_for_each(ProbVector::validate)
    }

    pub fn constant(p: ProbVector, provenance: Strategy) -> Result<Self> {
        WeightSchedule::new(vec![p; SCHEDULE_ROWS], provenance)
    }

    pub fn uniform() -> Self {
        WeightSchedule { w: vec![ProbVector::uniform(); SCHEDULE_ROWS], provenance: Strategy::Unif }
    }

    /// All weight on the period-`tau` track.
    pub fn one_hot(tau: usize) -> Result<Self> {
        let k = PERIODS
            .iter()
            .position(|&t| t == tau)
            .ok_or_else(|| Error::config(format!("tau {tau} is not on the period grid")))?;
        WeightSchedule::constant(ProbVector::one_hot(k), Strategy::Fixed(tau))
    }
}

/// Trained ensembles keyed by the cutoff day they were fitted at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffEnsembles {
    pub by_cutoff: BTreeMap<usize, Ensemble>,
}

impl CutoffEnsembles {
    pub fn new(by_cutoff: BTreeMap<usize, Ensemble>) -> Result<Self> {
        if by_cutoff.is_empty() {
            return Err(Error::config("no trained models"));
        }
        if by_cutoff.keys().any(|c| !(1..=FEATURE_DAYS).contains(c)) {
            return Err(Error::config("model cutoffs must lie in 1..=30"));
        }
        Ok(CutoffEnsembles { by_cutoff })
    }

    /// Ensemble and feature cutoff used for day `t`.
    fn for_day(&self, t: usize) -> (&Ensemble, usize) {
        match self.by_cutoff.range(..=t).next_back() {
            Some((&c, e)) => (e, c),
            None => {
                let (_, e) = self.by_cutoff.iter().next().expect("nonempty by construction");
                (e, (t + 1).min(FEATURE_DAYS))
            }
        }
    }
}

/// Daily weights from the ensembles, using only prices observed up to each day.
///
/// Day `t` uses the models of the largest cutoff `c <= t` on the first `c`
/// days; before the first cutoff the earliest models see days `0..=t`.
pub fn weight_schedule(
    ensembles: &CutoffEnsembles,
    series: &MarketSeries,
    provenance: Strategy,
) -> Result<WeightSchedule> {
    if ensembles.by_cutoff.is_empty() {
        return Err(Error::config("no trained models"));
    }
    let mut cache: BTreeMap<usize, ProbVector> = BTreeMap::new();
    let mut rows = Vec::with_capacity(SCHEDULE_ROWS);
    for t in 0..SCHEDULE_ROWS {
        let (ens, cutoff) = ensembles.for_day(t);
        let p = match cache.get(&cutoff) {
            Some(p) => *p,
            None => {
                let p = ens.predict(&featurize(series, cutoff)?)?;
                cache.insert(cutoff, p);
                p
            }
        };
        rows.push(p);
    }
    WeightSchedule::new(rows, provenance)
}

/// Held deltas of the eight fixed-period strategies, one vector per period.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaTracks {
    pub tracks: Vec<Vec<f64>>,
}

impl DeltaTracks {
    /// Freezes a daily delta series at every period of the grid.
    pub fn from_pointwise(pointwise: &[f64]) -> Self {
        DeltaTracks { tracks: PERIODS.iter().map(|&t| freeze_deltas(pointwise, t)).collect() }
    }

    /// Heston deltas along a simulated path.
    pub fn heston(series: &MarketSeries, params: &HestonParams, v_path: &[f64]) -> Result<Self> {
        if v_path.len() != series.len() {
            return Err(Error::input("variance path length differs from the series"));
        }
        let horizon = series.spec.maturity_day;
        let pointwise = (0..series.len())
            .map(|t| heston_delta(params, series.s[t], v_path[t], &series.spec, (horizon - t) as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(DeltaTracks::from_pointwise(&pointwise))
    }
}

/// Daily state of a multi-scale hedge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub wealth: Vec<f64>,
    pub cash: Vec<f64>,
    pub delta: Vec<f64>,
    pub cumulative_costs: Vec<f64>,
    /// `Π_0 e^{r t}`.
    pub reference: Vec<f64>,
    /// Days on which the aggregate delta moved by more than [`TRADE_EPS`].
    pub trade_days: Vec<usize>,
    /// Day 0 plus every day on which a weighted track rebalances or the weights change.
    pub rebalance_days: Vec<usize>,
}

impl BacktestReport {
    pub fn pi0(&self) -> f64 {
        self.reference[0]
    }
}

/// Backtest on Heston deltas computed along the path.
pub fn multiscale_backtest(
    series: &MarketSeries,
    params: &HestonParams,
    v_path: &[f64],
    schedule: &WeightSchedule,
    base: &HedgeBase,
) -> Result<BacktestReport> {
    let tracks = DeltaTracks::heston(series, params, v_path)?;
    backtest_tracks(series, &tracks, schedule, base)
}

/// Backtest on precomputed tracks.
pub fn backtest_tracks(
    series: &MarketSeries,
    tracks: &DeltaTracks,
    schedule: &WeightSchedule,
    base: &HedgeBase,
) -> Result<BacktestReport> {
    series.validate()?;
    schedule.validate()?;
    base.validate()?;
    let n = series.len();
    if n != SCHEDULE_ROWS {
        return Err(Error::input(format!("series has {n} days, schedule covers {SCHEDULE_ROWS}")));
    }
    if tracks.tracks.len() != N_PERIODS || tracks.tracks.iter().any(|t| t.len() != n) {
        return Err(Error::input("delta tracks do not match the series"));
    }
    let (s, c) = (&series.s, &series.c);
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let w = &schedule.w[t].0;
            (0..N_PERIODS).map(|k| w[k] * tracks.tracks[k][t]).sum()
        })
        .collect();

    let growth = base.r.exp();
    let mut cash = vec![0.0; n];
    let mut costs = vec![0.0; n];
    let mut wealth = vec![c[0] - delta[0] * s[0]; n];
    let mut trade_days = Vec::new();
    for t in 1..n {
        let traded = delta[t] - delta[t - 1];
        let fee = base.f * s[t] * traded.abs();
        cash[t] = cash[t - 1] * growth + s[t] * traded - fee;
        costs[t] = costs[t - 1] + fee;
        wealth[t] = c[t] - delta[t] * s[t] + cash[t];
        if traded.abs() > TRADE_EPS {
            trade_days.push(t);
        }
    }
    let pi0 = wealth[0];
    let reference = (0..n).map(|t| pi0 * (base.r * t as f64).exp()).collect();

    let mut rebalance_days = vec![0];
    for t in 1..n {
        let w = &schedule.w[t].0;
        let track_due = (0..N_PERIODS).any(|k| w[k] > 0.0 && t % PERIODS[k] == 0);
        if track_due || schedule.w[t] != schedule.w[t - 1] {
            rebalance_days.push(t);
        }
    }

    Ok(BacktestReport { wealth, cash, delta, cumulative_costs: costs, reference, trade_days, rebalance_days })
}

/// Reward of an arbitrary schedule, measured between consecutive rebalance days.
///
/// For a constant one-hot schedule the rebalance days are the multiples of
/// the period and the result equals [`crate::hedge_engine::compute_reward`].
pub fn generalized_reward(report: &BacktestReport, series: &MarketSeries, base: &HedgeBase) -> Result<RewardBreakdown> {
    base.validate()?;
    let n = series.len();
    if report.delta.len() != n || report.rebalance_days.first() != Some(&0) {
        return Err(Error::input("report does not match the series"));
    }
    let horizon = series.spec.maturity_day;
    let (s, c, delta) = (&series.s, &series.c, &report.delta);
    let HedgeBase { f, gamma, r, cost_price_timing } = *base;

    let pi0 = c[0] - delta[0] * s[0];
    let growth_term = pi0 * ((r * horizon as f64).exp() - f);

    let per_rebalance_costs: Vec<f64> = report
        .rebalance_days
        .windows(2)
        .map(|w| {
            let (prev, now) = (w[0], w[1]);
            let price = match cost_price_timing {
                CostPriceTiming::Previous => s[prev],
                CostPriceTiming::Current => s[now],
            };
            f * price * (delta[now] - delta[prev]).abs()
        })
        .collect();
    let cost_sum: f64 = per_rebalance_costs.iter().sum();

    let mut sq = 0.0;
    let mut next = 1;
    let mut start = 0;
    for t in 1..n {
        let held = delta[start];
        let anchor = c[start] - held * s[start];
        let d = anchor - (c[t] - held * s[t]);
        sq += d * d;
        if next < report.rebalance_days.len() && report.rebalance_days[next] == t {
            start = t;
            next += 1;
        }
    }
    let tracking_std = (sq / (n - 1) as f64).sqrt();
    let reward = (growth_term - cost_sum) / (gamma + tracking_std);
    Ok(RewardBreakdown { pi0, growth_term, cost_sum, tracking_std, reward, per_rebalance_costs })
}

/// Final value, deviation from the risk-neutral portfolio and excess return, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub final_pct: f64,
    pub std_pct: f64,
    pub under_pct: f64,
}

pub fn strategy_metrics(report: &BacktestReport, series: &MarketSeries) -> Result<StrategyMetrics> {
    let n = report.wealth.len();
    if n == 0 || report.reference.len() != n || series.len() != n {
        return Err(Error::input("report does not match the series"));
    }
    let pi0 = report.pi0();
    if pi0 == 0.0 {
        return Err(Error::UndefinedMetric("initial portfolio value is zero".into()));
    }
    let last = n - 1;
    let final_pct = 100.0 * report.wealth[last] / report.reference[last];
    let gaps: Vec<f64> = report.wealth.iter().zip(&report.reference).map(|(w, r)| w - r).collect();
    let mean = gaps.iter().sum::<f64>() / n as f64;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n as f64;
    let std_pct = 100.0 * var.sqrt() / pi0.abs();
    let w0 = report.wealth[0];
    let under_pct = 100.0 * ((report.wealth[last] / w0 - 1.0) - (series.s[last] / series.s[0] - 1.0));
    let m = StrategyMetrics { final_pct, std_pct, under_pct };
    if ![m.final_pct, m.std_pct, m.under_pct].iter().all(|x| x.is_finite()) {
        return Err(Error::UndefinedMetric(format!("non-finite metrics {m:?}")));
    }
    Ok(m)
}

/// Reward of one strategy under one risk aversion, relative to the best strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub strategy: Strategy,
    pub reward: f64,
    pub reward_gap: f64,
}

/// Rescores each strategy at every `γ` and subtracts the best reward.
pub fn gamma_sweep(entries: &[(Strategy, RewardBreakdown)], gammas: &[f64]) -> Result<Vec<SweepRow>> {
    if entries.is_empty() {
        return Err(Error::input("gamma sweep needs at least one strategy"));
    }
    if gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::config("gamma values must be positive"));
    }
    let mut rows = Vec::with_capacity(entries.len() * gammas.len());
    for &g in gammas {
        let rewards: Vec<f64> = entries.iter().map(|(_, b)| b.with_gamma(g)).collect();
        let best = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for ((strategy, _), reward) in entries.iter().zip(rewards) {
            rows.push(SweepRow { gamma: g, strategy: *strategy, reward, reward_gap: reward - best });
        }
    }
    Ok(rows)
}

/// Fraction of sweeps in which `strategy` attains the best reward, per `γ`.
pub fn win_fractions(sweeps: &[Vec<SweepRow>], gammas: &[f64], strategy: Strategy) -> Vec<f64> {
    gammas
        .iter()
        .map(|&g| {
            let wins = sweeps
                .iter()
                .filter(|rows| rows.iter().any(|r| r.gamma == g && r.strategy == strategy && r.reward_gap == 0.0))
                .count();
            if sweeps.is_empty() { 0.0 } else { wins as f64 / sweeps.len() as f64 }
        })
        .collect()
}

/// `strategy,day,W,B,delta,cost,reference`.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[(Strategy, BacktestReport)]) -> Result<()> {
    writeln!(w, "strategy,day,W,B,delta,cost,reference")?;
    for (strategy, rep) in reports {
        for t in 0..rep.wealth.len() {
            writeln!(
                w,
                "{strategy},{t},{},{},{},{},{}",
                rep.wealth[t], rep.cash[t], rep.delta[t], rep.cumulative_costs[t], rep.reference[t]
            )?;
        }
    }
    Ok(())
}

pub const METRICS_HEADER: &str = "strategy,Final (%),Std (%),Under (%)";

pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[(Strategy, StrategyMetrics)]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for (s, m) in rows {
        writeln!(w, "{s},{},{},{}", m.final_pct, m.std_pct, m.under_pct)?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "gamma,strategy,reward_gap")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.gamma, r.strategy, r.reward_gap)?;
    }
    Ok(())
}

/// `strategy,day,w_1,…,w_30`.
pub fn write_weights_csv<W: Write>(mut w: W, schedules: &[WeightSchedule]) -> Result<()> {
    let cols: Vec<String> = PERIODS.iter().map(|t| format!("w_{t}")).collect();
    writeln!(w, "strategy,day,{}", cols.join(","))?;
    for sched in schedules {
        for (day, row) in sched.w.iter().enumerate() {
            let vals: Vec<String> = row.0.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{day},{}", sched.provenance, vals.join(","))?;
        }
    }
    Ok(())
}
