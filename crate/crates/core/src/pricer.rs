//! European call pricing under Heston by characteristic-function inversion.
//!
//! Prices use the two-probability form `s P1 - K e^{-r tau} P2`, each
//! probability recovered by Gil-Pelaez inversion on adaptive Gauss–Legendre
//! panels. The characteristic function is written so that no term divides by
//! the vol-of-vol, which keeps it accurate in the near-deterministic-variance
//! limit and avoids the branch jumps of the original complex-log formulation.
//!
//! Black–Scholes helpers are included as a validation reference and as the
//! delta model for observed market series without a variance path.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::csvio;
use crate::heston_sim::HestonParams;
use crate::{Error, Result};

pub const DEFAULT_MATURITY_DAY: usize = 30;
pub const DEFAULT_MONEYNESS: f64 = 1.1;

/// Contract terms of the hedged call; moneyness is `s0 / strike`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallSpec {
    pub strike: f64,
    pub maturity_day: usize,
    /// Risk-free rate per trading day.
    pub r: f64,
    pub moneyness0: f64,
}

impl CallSpec {
    pub fn from_moneyness(s0: f64, moneyness0: f64, maturity_day: usize, r: f64) -> Result<Self> {
        if s0 <= 0.0 || moneyness0 <= 0.0 {
            return Err(Error::config("spot and moneyness must be positive"));
        }
        let spec = CallSpec {
            strike: s0 / moneyness0,
            maturity_day,
            r,
            moneyness0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return Err(Error::config(format!("strike must be > 0, got {}", self.strike)));
        }
        if self.maturity_day == 0 {
            return Err(Error::config("maturity_day must be >= 1"));
        }
        if !self.r.is_finite() {
            return Err(Error::config("rate must be finite"));
        }
        Ok(())
    }

    pub fn intrinsic(&self, s: f64) -> f64 {
        (s - self.strike).max(0.0)
    }

    /// Delta at expiry: payoff indicator with 1/2 at the money.
    pub fn terminal_delta(&self, s: f64) -> f64 {
        if s > self.strike {
            1.0
        } else if s < self.strike {
            0.0
        } else {
            0.5
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesSource {
    Synthetic,
    Real,
}

/// Aligned daily stock and call prices, days `0..=maturity_day`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
    pub spec: CallSpec,
    pub source: SeriesSource,
}

impl MarketSeries {
    pub fn new(s: Vec<f64>, c: Vec<f64>, spec: CallSpec, source: SeriesSource) -> Result<Self> {
        let series = MarketSeries { s, c, spec, source };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.s.len() != self.c.len() {
            return Err(Error::input(format!(
                "stock and call lengths differ ({} vs {})",
                self.s.len(),
                self.c.len()
            )));
        }
        if self.s.len() != self.spec.maturity_day + 1 {
            return Err(Error::input(format!(
                "series has {} days, contract needs {}",
                self.s.len(),
                self.spec.maturity_day + 1
            )));
        }
        if self
            .s
            .iter()
            .chain(&self.c)
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::input("prices must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "day,s,c")?;
        for (day, (s, c)) in self.s.iter().zip(&self.c).enumerate() {
            writeln!(w, "{day},{s},{c}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, spec: CallSpec, source: SeriesSource) -> Result<Self> {
        let rows = csvio::read_rows(r, &["day", "s", "c"])?;
        let mut s = Vec::with_capacity(rows.len());
        let mut c = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let day: usize = row.parse(0)?;
            if day != k {
                return Err(Error::Parse { line: row.line, msg: format!("day {day} out of order") });
            }
            s.push(row.parse(1)?);
            c.push(row.parse(2)?);
        }
        MarketSeries::new(s, c, spec, source)
    }
}

// ---------------------------------------------------------------------------
// Characteristic function

/// `ln(1 + x) / x`, accurate for small `|x|`.
fn log1p_over_x(x: Complex64) -> Complex64 {
    if x.norm() < 1e-3 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        for k in 1..=7 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += pow * (sign / k as f64);
            pow *= x;
        }
        sum
    } else {
        (Complex64::new(1.0, 0.0) + x).ln() / x
    }
}

/// `(1 - e^{-x t}) / x`, continuous at `x = 0`.
fn one_minus_exp_over(x: Complex64, t: f64) -> Complex64 {
    let xt = x * t;
    if xt.norm() < 1e-6 {
        t * (Complex64::new(1.0, 0.0) - xt / 2.0 + xt * xt / 6.0)
    } else {
        (Complex64::new(1.0, 0.0) - (-xt).exp()) / x
    }
}

/// Log of `E[exp(iu ln(S_T / F))]` with `F` the forward: the `C + D v` part.
fn log_cf_centered(u: Complex64, p: &HestonParams, v: f64, tau: f64) -> Complex64 {
    let i = Complex64::i();
    let iu = i * u;
    let alpha = -0.5 * (u * u + iu);
    let beta = p.a - p.rho * p.eta * iu;
    let eta2 = p.eta * p.eta;

    let (c_var, d_coef) = if p.eta == 0.0 {
        // Deterministic variance: D' = alpha - beta D.
        let phi = one_minus_exp_over(beta, tau);
        let d_coef = alpha * phi;
        let integral = if (beta * tau).norm() < 1e-6 {
            Complex64::new(tau * tau / 2.0, 0.0)
        } else {
            (tau - phi) / beta
        };
        (p.a * p.v_bar * alpha * integral, d_coef)
    } else {
        let d = (beta * beta - 2.0 * alpha * eta2).sqrt();
        let bp = beta + d;
        if bp.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let two_alpha_over_bp = 2.0 * alpha / bp;
        // g = (beta - d) / (beta + d) written without cancellation.
        let g = two_alpha_over_bp * eta2 / bp;
        let e = (-d * tau).exp();
        let one = Complex64::new(1.0, 0.0);
        let d_coef = two_alpha_over_bp * (one - e) / (one - g * e);
        // ln((1 - g e) / (1 - g)) / eta² = y * ln(1 + x) / x with x = eta² y.
        let y = two_alpha_over_bp / bp * (one - e) / (one - g);
        let x = y * eta2;
        let log_term = y * log1p_over_x(x);
        (p.a * p.v_bar * (two_alpha_over_bp * tau - 2.0 * log_term), d_coef)
    };
    c_var + d_coef * v
}

/// `E[exp(iu ln S_T)]` under the risk-neutral measure.
pub fn heston_cf(
    u: Complex64,
    params: &HestonParams,
    s: f64,
    v: f64,
    tau: f64,
    r: f64,
) -> Result<Complex64> {
    if !(tau > 0.0) {
        return Err(Error::input(format!("tau must be > 0, got {tau}")));
    }
    let drift = Complex64::i() * u * (s.ln() + r * tau);
    let val = (drift + log_cf_centered(u, params, v, tau)).exp();
    if !val.re.is_finite() || !val.im.is_finite() {
        return Err(Error::NumericalDomain {
            context: "heston_cf",
            detail: format!("u={u}, s={s}, v={v}, tau={tau}, params={params:?}"),
        });
    }
    Ok(val)
}

// ---------------------------------------------------------------------------
// Quadrature

const GL_ORDER: usize = 16;
const TAIL_TOL: f64 = 1e-12;
const PANEL_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 12;
const MAX_NODES: usize = 2_000_000;
const DEGENERATE_VAR: f64 = 1e-14;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

/// Integrand pair for (P1, P2) at a node.
struct Inversion<'a> {
    p: &'a HestonParams,
    v: f64,
    tau: f64,
    /// ln(F / K).
    m: f64,
    nodes: usize,
}

impl Inversion<'_> {
    fn eval(&mut self, u: f64) -> [f64; 2] {
        self.nodes += 1;
        let uc = Complex64::new(u, 0.0);
        let phase = Complex64::new(0.0, u * self.m).exp();
        let iu = Complex64::new(0.0, u);
        let psi2 = log_cf_centered(uc, self.p, self.v, self.tau).exp();
        let psi1 = log_cf_centered(uc - Complex64::i(), self.p, self.v, self.tau).exp();
        [(phase * psi1 / iu).re, (phase * psi2 / iu).re]
    }

    fn envelope(&self, u: f64) -> f64 {
        let uc = Complex64::new(u, 0.0);
        let a = log_cf_centered(uc, self.p, self.v, self.tau).exp().norm();
        let b = log_cf_centered(uc - Complex64::i(), self.p, self.v, self.tau)
            .exp()
            .norm();
        a.max(b) / u
    }

    fn gl(&mut self, lo: f64, hi: f64) -> [f64; 2] {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = [0.0; 2];
        for &(x, w) in gauss_legendre() {
            let f = self.eval(mid + half * x);
            acc[0] += w * f[0];
            acc[1] += w * f[1];
        }
        [acc[0] * half, acc[1] * half]
    }

    fn adaptive(&mut self, lo: f64, hi: f64, whole: [f64; 2], tol: f64, depth: u32) -> [f64; 2] {
        let mid = 0.5 * (lo + hi);
        let left = self.gl(lo, mid);
        let right = self.gl(mid, hi);
        let split = [left[0] + right[0], left[1] + right[1]];
        let err = (split[0] - whole[0]).abs().max((split[1] - whole[1]).abs());
        if err <= tol || depth >= MAX_DEPTH {
            return split;
        }
        let l = self.adaptive(lo, mid, left, tol * 0.5, depth + 1);
        let r = self.adaptive(mid, hi, right, tol * 0.5, depth + 1);
        [l[0] + r[0], l[1] + r[1]]
    }
}

/// Expected integrated variance over the remaining life.
fn integrated_variance(p: &HestonParams, v: f64, tau: f64) -> f64 {
    let decay = if p.a * tau < 1e-8 {
        tau
    } else {
        (1.0 - (-p.a * tau).exp()) / p.a
    };
    (p.v_bar * tau + (v - p.v_bar) * decay).max(0.0)
}

/// Exercise probabilities `(P1, P2)` for a call struck at `strike`.
pub fn heston_probabilities(
    params: &HestonParams,
    s: f64,
    v: f64,
    strike: f64,
    tau: f64,
    r: f64,
) -> Result<(f64, f64)> {
    if !(tau > 0.0) || !(s > 0.0) || !(strike > 0.0) || v < 0.0 {
        return Err(Error::input(format!(
            "probabilities need tau > 0, s > 0, strike > 0, v >= 0 (tau={tau}, s={s}, K={strike}, v={v})"
        )));
    }
    let m = (s / strike).ln() + r * tau;
    let var = integrated_variance(params, v, tau);
    if var < DEGENERATE_VAR {
        let p = if m > 0.0 {
            1.0
        } else if m < 0.0 {
            0.0
        } else {
            0.5
        };
        return Ok((p, p));
    }
    let mut inv = Inversion { p: params, v, tau, m, nodes: 0 };
    let width = 1.0 / var.sqrt();
    let mut lo = 0.0;
    let mut total = [0.0; 2];
    let mut quiet_panels = 0;
    loop {
        let hi = lo + width;
        let whole = inv.gl(lo, hi);
        let part = inv.adaptive(lo, hi, whole, PANEL_TOL, 0);
        total[0] += part[0];
        total[1] += part[1];
        let residual = inv.envelope(hi);
        if !residual.is_finite() || !total[0].is_finite() || !total[1].is_finite() {
            return Err(Error::NumericalDomain {
                context: "heston_probabilities",
                detail: format!("non-finite integrand at u={hi} (s={s}, v={v}, tau={tau})"),
            });
        }
        if residual < TAIL_TOL {
            quiet_panels += 1;
            if quiet_panels >= 2 {
                break;
            }
        } else {
            quiet_panels = 0;
        }
        if inv.nodes > MAX_NODES {
            return Err(Error::Quadrature { nodes: inv.nodes, residual });
        }
        lo = hi;
    }
    let p1 = 0.5 + total[0] / PI;
    let p2 = 0.5 + total[1] / PI;
    Ok((p1, p2))
}

/// Price and delta together; they share one quadrature.
pub fn heston_price_delta(
    params: &HestonParams,
    s: f64,
    v: f64,
    spec: &CallSpec,
    tau: f64,
) -> Result<(f64, f64)> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::input(format!("tau must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok((spec.intrinsic(s), spec.terminal_delta(s)));
    }
    let (p1, p2) = heston_probabilities(params, s, v, spec.strike, tau, spec.r)?;
    let discount = (-spec.r * tau).exp();
    let lower = (s - spec.strike * discount).max(0.0);
    let raw = s * p1 - spec.strike * discount * p2;
    // Quadrature noise can leave the price a hair outside the no-arbitrage band.
    Ok((raw.clamp(lower, s), p1.clamp(0.0, 1.0)))
}

pub fn heston_call_price(
    params: &HestonParams,
    s: f64,
    v: f64,
    spec: &CallSpec,
    tau: f64,
) -> Result<f64> {
    heston_price_delta(params, s, v, spec, tau).map(|(c, _)| c)
}

/// `P1`, the stock-measure exercise probability; the payoff indicator at expiry.
pub fn heston_delta(params: &HestonParams, s: f64, v: f64, spec: &CallSpec, tau: f64) -> Result<f64> {
    heston_price_delta(params, s, v, spec, tau).map(|(_, d)| d)
}

// ---------------------------------------------------------------------------
// Black–Scholes

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `sigma` is volatility per square-root trading day; `tau` in trading days.
pub fn bs_call_price(s: f64, strike: f64, sigma: f64, tau: f64, r: f64) -> f64 {
    let discount = (-r * tau).exp();
    let total = sigma * tau.sqrt();
    if tau <= 0.0 {
        return (s - strike).max(0.0);
    }
    if total <= 0.0 {
        return (s - strike * discount).max(0.0);
    }
    let d1 = ((s / strike).ln() + r * tau) / total + 0.5 * total;
    let d2 = d1 - total;
    let n = std_normal();
    s * n.cdf(d1) - strike * discount * n.cdf(d2)
}

pub fn bs_delta(s: f64, strike: f64, sigma: f64, tau: f64, r: f64) -> f64 {
    let total = sigma * tau.max(0.0).sqrt();
    if tau <= 0.0 || total <= 0.0 {
        let fwd = if tau <= 0.0 { s - strike } else { s - strike * (-r * tau).exp() };
        return if fwd > 0.0 {
            1.0
        } else if fwd < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let d1 = ((s / strike).ln() + r * tau) / total + 0.5 * total;
    std_normal().cdf(d1)
}

/// Volatility per square-root day reproducing `price`, by bisection.
///
/// Returns `None` when the price sits outside the Black–Scholes range.
pub fn bs_implied_vol(price: f64, s: f64, strike: f64, tau: f64, r: f64) -> Option<f64> {
    if tau <= 0.0 {
        return None;
    }
    let lower = (s - strike * (-r * tau).exp()).max(0.0);
    if !(price > lower) || !(price < s) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while bs_call_price(s, strike, hi, tau, r) < price {
        hi *= 2.0;
        if hi > 1e3 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bs_call_price(s, strike, mid, tau, r) < price {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Daily Black–Scholes deltas at the implied volatility of each observed quote.
///
/// Used for market series that come without a variance path. Quotes outside the
/// Black–Scholes range fall back to the forward-moneyness indicator.
pub fn implied_vol_deltas(series: &MarketSeries) -> Vec<f64> {
    let spec = &series.spec;
    (0..series.len())
        .map(|t| {
            let tau = (spec.maturity_day - t.min(spec.maturity_day)) as f64;
            let s = series.s[t];
            if tau == 0.0 {
                return spec.terminal_delta(s);
            }
            match bs_implied_vol(series.c[t], s, spec.strike, tau, spec.r) {
                Some(sigma) => bs_delta(s, spec.strike, sigma, tau, spec.r),
                None => bs_delta(s, spec.strike, 0.0, tau, spec.r),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Paths

/// Prices every day of a simulated path and returns the daily Heston deltas.
pub fn price_path_with_deltas(
    s: &[f64],
    v: &[f64],
    params: &HestonParams,
    spec: &CallSpec,
) -> Result<(MarketSeries, Vec<f64>)> {
    let n = spec.maturity_day + 1;
    if s.len() != n || v.len() != n {
        return Err(Error::input(format!(
            "path lengths ({}, {}) do not match maturity day {}",
            s.len(),
            v.len(),
            spec.maturity_day
        )));
    }
    let mut c = Vec::with_capacity(n);
    let mut deltas = Vec::with_capacity(n);
    for t in 0..n {
        let tau = (spec.maturity_day - t) as f64;
        let (price, delta) = heston_price_delta(params, s[t], v[t], spec, tau)?;
        c.push(price);
        deltas.push(delta);
    }
    let series = MarketSeries::new(s.to_vec(), c, *spec, SeriesSource::Synthetic)?;
    Ok((series, deltas))
}

pub fn price_path(s: &[f64], v: &[f64], params: &HestonParams, spec: &CallSpec) -> Result<MarketSeries> {
    price_path_with_deltas(s, v, params, spec).map(|(m, _)| m)
}
