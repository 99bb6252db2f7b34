//! Fixed-frequency delta hedging of `Π = C - Δ S` with proportional costs.
//!
//! A strategy with period `τ` refreshes its hedge ratio on days `0, τ, 2τ, …`
//! and holds it in between. Its score is
//!
//! ```text
//!            Π0 (e^{r τ N} - f) - f Σ_j S_{j} |Δ_{jτ} - Δ_{jτ-τ}|
//! reward = ------------------------------------------------------------
//!            γ + sqrt( Σ_i Σ_j ([C - Δ_{iτ} S]_{iτ} - [C - Δ_{iτ} S]_{iτ+j})² / (N τ) )
//! ```
//!
//! with `N = horizon / τ`, the outer sum over the `N` hedge intervals and the
//! inner sum over the `τ` days of each interval. The stock price charged in the
//! cost term is the one at the previous rebalance unless configured otherwise.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::heston_sim::HestonParams;
use crate::pricer::{heston_delta, MarketSeries};
use crate::{Error, Result};

/// The admissible hedging periods, in trading days.
pub const PERIODS: [usize; 8] = [1, 2, 3, 5, 6, 10, 15, 30];
pub const N_PERIODS: usize = PERIODS.len();

/// Hedging periods that evenly divide the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodGrid;

impl PeriodGrid {
    pub fn taus(&self) -> &'static [usize; N_PERIODS] {
        &PERIODS
    }

    pub fn index_of(&self, tau: usize) -> Option<usize> {
        PERIODS.iter().position(|&t| t == tau)
    }

    pub fn tau(&self, index: usize) -> usize {
        PERIODS[index]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostPriceTiming {
    /// Stock price at the previous rebalance.
    #[default]
    Previous,
    /// Stock price on the day the trade happens.
    Current,
}

/// Hedge settings shared by every period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgeBase {
    /// Proportional cost per unit of traded notional.
    pub f: f64,
    /// Risk-aversion offset in the reward denominator.
    pub gamma: f64,
    /// Rate per trading day.
    pub r: f64,
    pub cost_price_timing: CostPriceTiming,
}

impl Default for HedgeBase {
    fn default() -> Self {
        HedgeBase { f: 0.01, gamma: 1.5, r: 0.0, cost_price_timing: CostPriceTiming::Previous }
    }
}

impl HedgeBase {
    pub fn validate(&self) -> Result<()> {
        if !(self.f >= 0.0) || !self.f.is_finite() {
            return Err(Error::config(format!("cost fraction f must be >= 0, got {}", self.f)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !self.r.is_finite() {
            return Err(Error::config("rate must be finite"));
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: usize) -> HedgeConfig {
        HedgeConfig { tau, base: *self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeConfig {
    pub tau: usize,
    pub base: HedgeBase,
}

impl HedgeConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        self.base.validate()?;
        if PeriodGrid.index_of(self.tau).is_none() {
            return Err(Error::config(format!("tau {} is not on the period grid", self.tau)));
        }
        if horizon % self.tau != 0 {
            return Err(Error::config(format!(
                "tau {} does not divide the horizon {horizon}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Components of the reward for one strategy on one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub pi0: f64,
    /// `Π0 (e^{r T} - f)`.
    pub growth_term: f64,
    pub cost_sum: f64,
    pub tracking_std: f64,
    pub reward: f64,
    pub per_rebalance_costs: Vec<f64>,
}

impl RewardBreakdown {
    /// Rescores the same numerator and tracking error under another `γ`.
    pub fn with_gamma(&self, gamma: f64) -> f64 {
        (self.growth_term - self.cost_sum) / (gamma + self.tracking_std)
    }
}

/// Optimal period of one path, with the rewards of every period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodLabel {
    pub label_index: usize,
    pub rewards: Vec<RewardBreakdown>,
}

impl PeriodLabel {
    pub fn label_tau(&self) -> usize {
        PERIODS[self.label_index]
    }
}

/// Index of the largest value; the first (smallest period) wins ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Freezes pointwise deltas at the most recent multiple of `tau`.
pub fn freeze_deltas(pointwise: &[f64], tau: usize) -> Vec<f64> {
    (0..pointwise.len()).map(|t| pointwise[t - t % tau]).collect()
}

/// Hedge ratios held by a period-`tau` strategy, from Heston deltas on the path.
pub fn fixed_frequency_deltas(
    series: &MarketSeries,
    params: &HestonParams,
    v_path: &[f64],
    tau: usize,
) -> Result<Vec<f64>> {
    let horizon = series.spec.maturity_day;
    if PeriodGrid.index_of(tau).is_none() || horizon % tau != 0 {
        return Err(Error::config(format!("tau {tau} is not admissible for horizon {horizon}")));
    }
    if v_path.len() != series.len() {
        return Err(Error::input("variance path length differs from the series"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut held = 0.0;
    for t in 0..series.len() {
        if t % tau == 0 {
            let remaining = (horizon - t) as f64;
            held = heston_delta(params, series.s[t], v_path[t], &series.spec, remaining)?;
        }
        out.push(held);
    }
    Ok(out)
}

/// Evaluates the reward of one fixed-frequency strategy.
pub fn compute_reward(series: &MarketSeries, deltas: &[f64], cfg: &HedgeConfig) -> Result<RewardBreakdown> {
    let horizon = series.spec.maturity_day;
    cfg.validate(horizon)?;
    if deltas.len() != series.len() || series.s.len() != series.c.len() {
        return Err(Error::input(format!(
            "length mismatch: {} deltas for a {}-day series",
            deltas.len(),
            series.len()
        )));
    }
    let tau = cfg.tau;
    let n = horizon / tau;
    let HedgeBase { f, gamma, r, cost_price_timing } = cfg.base;
    let (s, c) = (&series.s, &series.c);

    let pi0 = c[0] - deltas[0] * s[0];
    let growth_term = pi0 * ((r * horizon as f64).exp() - f);

    let per_rebalance_costs: Vec<f64> = (1..=n)
        .map(|j| {
            let now = j * tau;
            let prev = now - tau;
            let price = match cost_price_timing {
                CostPriceTiming::Previous => s[prev],
                CostPriceTiming::Current => s[now],
            };
            f * price * (deltas[now] - deltas[prev]).abs()
        })
        .collect();
    let cost_sum: f64 = per_rebalance_costs.iter().sum();

    let mut sq = 0.0;
    for i in 0..n {
        let start = i * tau;
        let held = deltas[start];
        let anchor = c[start] - held * s[start];
        for j in 1..=tau {
            let d = anchor - (c[start + j] - held * s[start + j]);
            sq += d * d;
        }
    }
    let tracking_std = (sq / (n * tau) as f64).sqrt();
    let reward = (growth_term - cost_sum) / (gamma + tracking_std);
    Ok(RewardBreakdown { pi0, growth_term, cost_sum, tracking_std, reward, per_rebalance_costs })
}

/// Scores all eight periods from precomputed pointwise deltas and picks the best.
pub fn label_from_deltas(series: &MarketSeries, pointwise: &[f64], base: &HedgeBase) -> Result<PeriodLabel> {
    let rewards = PERIODS
        .iter()
        .map(|&tau| compute_reward(series, &freeze_deltas(pointwise, tau), &base.with_tau(tau)))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rewards.iter().map(|r| r.reward).collect();
    Ok(PeriodLabel { label_index: argmax_first(&values), rewards })
}

/// Optimal period of a path in hindsight.
pub fn label_optimal_period(
    series: &MarketSeries,
    params: &HestonParams,
    v_path: &[f64],
    base: &HedgeBase,
) -> Result<PeriodLabel> {
    if series.spec.maturity_day != 30 || series.len() != 31 {
        return Err(Error::input("labeling needs a complete 31-day series"));
    }
    let pointwise = fixed_frequency_deltas(series, params, v_path, 1)?;
    label_from_deltas(series, &pointwise, base)
}

/// Daily wealth and costs of hedging with a single fixed-period track.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedFrequencyRun {
    pub wealth: Vec<f64>,
    pub cash: Vec<f64>,
    pub cumulative_costs: Vec<f64>,
}

/// Self-financing simulation of one held-delta sequence, trading at `S_t`.
pub fn fixed_frequency_backtest(series: &MarketSeries, held: &[f64], base: &HedgeBase) -> Result<FixedFrequencyRun> {
    if held.len() != series.len() {
        return Err(Error::input("delta track length differs from the series"));
    }
    let growth = base.r.exp();
    let n = series.len();
    let mut cash = vec![0.0; n];
    let mut costs = vec![0.0; n];
    let mut wealth = vec![series.c[0] - held[0] * series.s[0]; n];
    for t in 1..n {
        let traded = held[t] - held[t - 1];
        let fee = base.f * series.s[t] * traded.abs();
        cash[t] = cash[t - 1] * growth + series.s[t] * traded - fee;
        costs[t] = costs[t - 1] + fee;
        wealth[t] = series.c[t] - held[t] * series.s[t] + cash[t];
    }
    Ok(FixedFrequencyRun { wealth, cash, cumulative_costs: costs })
}

/// Label file: `path_id,label_tau,reward_1,…,reward_30`.
pub fn write_label_header<W: Write>(mut w: W) -> Result<()> {
    let cols: Vec<String> = PERIODS.iter().map(|t| format!("reward_{t}")).collect();
    writeln!(w, "path_id,label_tau,{}", cols.join(","))?;
    Ok(())
}

pub fn write_label_row<W: Write>(mut w: W, path_id: u64, label: &PeriodLabel) -> Result<()> {
    write!(w, "{path_id},{}", label.label_tau())?;
    for r in &label.rewards {
        write!(w, ",{}", r.reward)?;
    }
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricer::{CallSpec, SeriesSource};

    fn flat_series() -> MarketSeries {
        let spec = CallSpec { strike: 95.0, maturity_day: 30, r: 0.0, moneyness0: 100.0 / 95.0 };
        MarketSeries::new(vec![100.0; 31], vec![5.0; 31], spec, SeriesSource::Synthetic).unwrap()
    }

    fn base(f: f64, gamma: f64) -> HedgeBase {
        HedgeBase { f, gamma, r: 0.0, cost_price_timing: CostPriceTiming::Previous }
    }

    #[test]
    fn grid_divides_horizon() {
        let mut prev = 0;
        for &t in PeriodGrid.taus() {
            assert_eq!(30 % t, 0);
            assert!(t > prev);
            prev = t;
        }
        assert_eq!(PeriodGrid.index_of(5), Some(3));
        assert_eq!(PeriodGrid.index_of(4), None);
    }

    #[test]
    fn constant_portfolio_has_no_tracking_error() {
        let series = flat_series();
        let deltas = vec![0.6; 31];
        let rb = compute_reward(&series, &deltas, &base(0.0, 1.5).with_tau(30)).unwrap();
        assert_eq!(rb.tracking_std, 0.0);
        assert_eq!(rb.cost_sum, 0.0);
        assert_eq!(rb.reward, rb.pi0 / 1.5);
        assert_eq!(rb.pi0, 5.0 - 60.0);
    }

    #[test]
    fn cost_free_numerator_is_initial_portfolio() {
        let mut series = flat_series();
        for t in 0..31 {
            series.s[t] = 100.0 + (t as f64 * 0.7).sin() * 3.0;
            series.c[t] = 6.0 + (t as f64 * 0.3).cos();
        }
        let deltas: Vec<f64> = (0..31).map(|t| 0.5 + 0.01 * t as f64).collect();
        for tau in PERIODS {
            let rb = compute_reward(&series, &freeze_deltas(&deltas, tau), &base(0.0, 1.5).with_tau(tau)).unwrap();
            assert_eq!(rb.growth_term - rb.cost_sum, rb.pi0);
        }
    }

    #[test]
    fn argmax_prefers_unique_max_and_breaks_ties_low() {
        let mut v = vec![-5.0; 8];
        v[2] = -1.0;
        assert_eq!(argmax_first(&v), 2);
        v[1] = -1.0;
        assert_eq!(argmax_first(&v), 1);
    }

    #[test]
    fn freezing_holds_between_rebalances() {
        let pw: Vec<f64> = (0..31).map(|t| t as f64).collect();
        let held = freeze_deltas(&pw, 30);
        assert!(held[..30].iter().all(|&d| d == 0.0));
        assert_eq!(held[30], 30.0);
        assert_eq!(freeze_deltas(&pw, 1), pw);
        let five = freeze_deltas(&pw, 5);
        assert_eq!(five[7], 5.0);
        assert_eq!(five[10], 10.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let series = flat_series();
        let err = compute_reward(&series, &[0.5; 30], &base(0.01, 1.5).with_tau(5));
        assert!(matches!(err, Err(Error::Input(_))));
        let err = compute_reward(&series, &[0.5; 31], &base(0.01, 1.5).with_tau(4));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn current_timing_charges_the_trade_day_price() {
        let mut series = flat_series();
        series.s[5] = 110.0;
        let mut deltas = vec![0.4; 31];
        for d in deltas.iter_mut().skip(5) {
            *d = 0.5;
        }
        let mut b = base(0.01, 1.5);
        let prev = compute_reward(&series, &deltas, &b.with_tau(5)).unwrap();
        b.cost_price_timing = CostPriceTiming::Current;
        let cur = compute_reward(&series, &deltas, &b.with_tau(5)).unwrap();
        assert!((prev.cost_sum - 0.01 * 100.0 * 0.1).abs() < 1e-15);
        assert!((cur.cost_sum - 0.01 * 110.0 * 0.1).abs() < 1e-15);
    }
}
