//! Euler–Maruyama integration of the Heston stochastic-volatility SDE.
//!
//! ```text
//! dS = mu S dt + sqrt(V) S dW1
//! dV = a (v_bar - V) dt + eta sqrt(V) dW2,   corr(dW1, dW2) = rho
//! ```
//!
//! Time is measured in trading days. Variance uses full truncation: `V⁺ =
//! max(V, 0)` enters both drift and diffusion while the raw state may dip below
//! zero. The price is advanced in log space with the same `V⁺`, which keeps it
//! strictly positive.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::rng::{stream_rng, SeedTag};
use crate::{Error, Result};

pub const DEFAULT_N_DAYS: usize = 30;
pub const DEFAULT_SUBSTEPS: usize = 8;

/// Heston coefficients and initial state, all per trading day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    /// Mean-reversion speed of the variance.
    pub a: f64,
    /// Long-run variance.
    pub v_bar: f64,
    /// Volatility of variance.
    pub eta: f64,
    pub rho: f64,
    pub s0: f64,
    pub v0: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.a, self.v_bar, self.eta, self.rho, self.s0, self.v0]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::config(format!("non-finite Heston parameter in {self:?}")));
        }
        if self.s0 <= 0.0 {
            return Err(Error::config(format!("s0 must be > 0, got {}", self.s0)));
        }
        if self.v0 < 0.0 || self.v_bar < 0.0 || self.a < 0.0 || self.eta < 0.0 {
            return Err(Error::config(format!(
                "v0, v_bar, a, eta must be >= 0 (got v0={}, v_bar={}, a={}, eta={})",
                self.v0, self.v_bar, self.a, self.eta
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        Ok(())
    }

    /// `E[V_t] = v_bar + (v0 - v_bar) e^{-a t}` for the exact square-root process.
    pub fn expected_variance(&self, t: f64) -> f64 {
        self.v_bar + (self.v0 - self.v_bar) * (-self.a * t).exp()
    }
}

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::config(format!("{name}: interval bounds must be finite")));
        }
        if self.lo > self.hi {
            return Err(Error::config(format!(
                "{name}: inverted interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // lo + u (hi - lo) can round past hi; the clamp keeps point intervals exact.
        (self.lo + u * (self.hi - self.lo)).clamp(self.lo, self.hi)
    }
}

/// Sampling box for [`HestonParams`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamRanges {
    pub mu: Interval,
    pub a: Interval,
    pub v_bar: Interval,
    pub eta: Interval,
    pub rho: Interval,
    pub s0: Interval,
    pub v0: Interval,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            mu: Interval::new(-5e-3, 5e-3),
            a: Interval::new(0.01, 0.1),
            v_bar: Interval::new(2.5e-5, 4e-4),
            eta: Interval::new(1e-4, 2e-3),
            rho: Interval::new(-0.9, 0.0),
            s0: Interval::point(100.0),
            v0: Interval::new(2.5e-5, 4e-4),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu", self.mu),
            ("a", self.a),
            ("v_bar", self.v_bar),
            ("eta", self.eta),
            ("rho", self.rho),
            ("s0", self.s0),
            ("v0", self.v0),
        ];
        for (name, iv) in fields {
            iv.check(name)?;
        }
        let lower_ok = self.a.lo >= 0.0
            && self.v_bar.lo >= 0.0
            && self.eta.lo >= 0.0
            && self.v0.lo >= 0.0
            && self.s0.lo > 0.0
            && self.rho.lo >= -1.0
            && self.rho.hi <= 1.0;
        if !lower_ok {
            return Err(Error::config(
                "parameter ranges leave the admissible Heston domain",
            ));
        }
        Ok(())
    }
}

/// Draws each field uniformly from its interval; deterministic in `seed`.
pub fn sample_params(ranges: &ParamRanges, seed: u64) -> Result<HestonParams> {
    ranges.validate()?;
    let mut rng = stream_rng(seed, SeedTag::Params as u64);
    let params = HestonParams {
        mu: ranges.mu.sample(&mut rng),
        a: ranges.a.sample(&mut rng),
        v_bar: ranges.v_bar.sample(&mut rng),
        eta: ranges.eta.sample(&mut rng),
        rho: ranges.rho.sample(&mut rng),
        s0: ranges.s0.sample(&mut rng),
        v0: ranges.v0.sample(&mut rng),
    };
    params.validate()?;
    Ok(params)
}

/// Builds the variance shock from the price shock and an independent normal.
#[inline]
pub fn correlated_pair(rho: f64, z1: f64, z_perp: f64) -> (f64, f64) {
    (z1, rho * z1 + (1.0 - rho * rho).sqrt() * z_perp)
}

/// Integrates one path, writing `n_days + 1` daily samples into `s_out`/`v_out`.
///
/// `normals` yields independent standard normal pairs `(z1, z_perp)`, one per
/// sub-step. Exposed so callers can couple paths across step sizes.
pub fn euler_path<F>(
    params: &HestonParams,
    substeps: usize,
    mut normals: F,
    s_out: &mut [f64],
    v_out: &mut [f64],
) where
    F: FnMut() -> (f64, f64),
{
    debug_assert_eq!(s_out.len(), v_out.len());
    let dt = 1.0 / substeps as f64;
    let sqrt_dt = dt.sqrt();
    let mut log_s = params.s0.ln();
    let mut v = params.v0;
    s_out[0] = params.s0;
    v_out[0] = params.v0;
    for day in 1..s_out.len() {
        for _ in 0..substeps {
            let (z1, z_perp) = normals();
            let (dw1, dw2) = correlated_pair(params.rho, z1, z_perp);
            let vp = v.max(0.0);
            let vol = vp.sqrt();
            log_s += (params.mu - 0.5 * vp) * dt + vol * sqrt_dt * dw1;
            v += params.a * (params.v_bar - vp) * dt + params.eta * vol * sqrt_dt * dw2;
        }
        s_out[day] = log_s.exp();
        v_out[day] = v.max(0.0);
    }
}

/// Daily price and variance samples for a batch of paths sharing one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub params: HestonParams,
    pub n_days: usize,
    pub substeps: usize,
    pub master_seed: u64,
    /// Stream id of each path, in row order.
    pub stream_ids: Vec<u64>,
    /// Row-major `[n_paths × (n_days + 1)]`.
    #[serde(skip)]
    pub s: Vec<f64>,
    #[serde(skip)]
    pub v: Vec<f64>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.stream_ids.len()
    }

    pub fn width(&self) -> usize {
        self.n_days + 1
    }

    pub fn s_row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.s[i * w..(i + 1) * w]
    }

    pub fn v_row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.v[i * w..(i + 1) * w]
    }

    /// One row per path-day: `path_id,day,s,v`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_id,day,s,v")?;
        for (i, id) in self.stream_ids.iter().enumerate() {
            for (day, (s, v)) in self.s_row(i).iter().zip(self.v_row(i)).enumerate() {
                writeln!(w, "{id},{day},{s},{v}")?;
            }
        }
        Ok(())
    }

    /// JSON sidecar with parameters, step count and seeds.
    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Reads the CSV body back into a sidecar-described path set.
    pub fn read_csv<R: BufRead>(mut sidecar: PathSet, r: R) -> Result<PathSet> {
        let rows = csvio::read_rows(r, &["path_id", "day", "s", "v"])?;
        let width = sidecar.width();
        let n = sidecar.n_paths();
        if rows.len() != n * width {
            return Err(Error::input(format!(
                "path CSV has {} rows, expected {}",
                rows.len(),
                n * width
            )));
        }
        sidecar.s = Vec::with_capacity(rows.len());
        sidecar.v = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let id: u64 = row.parse(0)?;
            let day: usize = row.parse(1)?;
            if id != sidecar.stream_ids[k / width] || day != k % width {
                return Err(Error::Parse {
                    line: row.line,
                    msg: format!("unexpected (path_id, day) = ({id}, {day})"),
                });
            }
            sidecar.s.push(row.parse(2)?);
            sidecar.v.push(row.parse(3)?);
        }
        Ok(sidecar)
    }
}

/// Simulates `n_paths` independent paths; path `i` uses stream `i` of `master_seed`.
pub fn simulate_paths(
    params: &HestonParams,
    n_days: usize,
    substeps: usize,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathSet> {
    let ids: Vec<u64> = (0..n_paths as u64).collect();
    simulate_streams(params, n_days, substeps, &ids, master_seed)
}

/// Simulates one path per requested stream id.
pub fn simulate_streams(
    params: &HestonParams,
    n_days: usize,
    substeps: usize,
    stream_ids: &[u64],
    master_seed: u64,
) -> Result<PathSet> {
    params.validate()?;
    if n_days == 0 || substeps == 0 || stream_ids.is_empty() {
        return Err(Error::input(format!(
            "need n_days >= 1, substeps >= 1, n_paths >= 1 (got {n_days}, {substeps}, {})",
            stream_ids.len()
        )));
    }
    let width = n_days + 1;
    let mut s = vec![0.0; stream_ids.len() * width];
    let mut v = vec![0.0; stream_ids.len() * width];
    s.par_chunks_mut(width)
        .zip(v.par_chunks_mut(width))
        .zip(stream_ids.par_iter())
        .for_each(|((s_row, v_row), &id)| {
            let mut rng = stream_rng(master_seed, id);
            let normals = || {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                (z1, z2)
            };
            euler_path(params, substeps, normals, s_row, v_row);
        });
    Ok(PathSet {
        params: *params,
        n_days,
        substeps,
        master_seed,
        stream_ids: stream_ids.to_vec(),
        s,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> HestonParams {
        HestonParams {
            mu: 0.0,
            a: 0.05,
            v_bar: 1e-4,
            eta: 1e-3,
            rho: -0.5,
            s0: 100.0,
            v0: 2e-4,
        }
    }

    #[test]
    fn point_intervals_return_exact_values() {
        let p = base();
        let ranges = ParamRanges {
            mu: Interval::point(p.mu),
            a: Interval::point(p.a),
            v_bar: Interval::point(p.v_bar),
            eta: Interval::point(p.eta),
            rho: Interval::point(p.rho),
            s0: Interval::point(p.s0),
            v0: Interval::point(p.v0),
        };
        assert_eq!(sample_params(&ranges, 11).unwrap(), p);
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let r = ParamRanges::default();
        assert_eq!(sample_params(&r, 5).unwrap(), sample_params(&r, 5).unwrap());
        assert_ne!(sample_params(&r, 5).unwrap(), sample_params(&r, 6).unwrap());
    }

    #[test]
    fn inverted_interval_is_a_config_error() {
        let mut r = ParamRanges::default();
        r.a = Interval::new(0.2, 0.1);
        assert!(matches!(sample_params(&r, 0), Err(Error::Config(_))));
    }

    #[test]
    fn rho_sample_mean_is_centered() {
        let mut r = ParamRanges::default();
        r.rho = Interval::new(-0.9, 0.0);
        let n = 10_000;
        let mean = (0..n)
            .map(|i| sample_params(&r, i as u64).unwrap().rho)
            .sum::<f64>()
            / n as f64;
        // uniform on [-0.9, 0]: sd = 0.9 / sqrt(12)
        let se = 0.9 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean + 0.45).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn zero_vol_of_vol_at_long_run_level_keeps_variance_constant() {
        let mut p = base();
        p.eta = 0.0;
        p.v0 = p.v_bar;
        let set = simulate_paths(&p, 30, 8, 16, 3).unwrap();
        assert!(set.v.iter().all(|&v| v == p.v_bar));
    }

    #[test]
    fn first_column_is_initial_state_and_values_are_admissible() {
        let mut p = base();
        p.eta = 5e-3; // Feller badly violated
        let set = simulate_paths(&p, 30, 4, 64, 1).unwrap();
        for i in 0..set.n_paths() {
            assert_eq!(set.s_row(i)[0], p.s0);
            assert_eq!(set.v_row(i)[0], p.v0);
        }
        assert!(set.s.iter().all(|&s| s > 0.0));
        assert!(set.v.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn perfect_correlation_shares_the_shock() {
        for z in [-2.3, 0.0, 0.7, 1.9] {
            assert_eq!(correlated_pair(1.0, z, 0.4), (z, z));
            assert_eq!(correlated_pair(-1.0, z, -1.1), (z, -z));
        }
    }

    #[test]
    fn path_is_independent_of_batch_size() {
        let p = base();
        let small = simulate_paths(&p, 30, 8, 3, 42).unwrap();
        let large = simulate_paths(&p, 30, 8, 50, 42).unwrap();
        assert_eq!(small.s_row(2), large.s_row(2));
        assert_eq!(small.v_row(2), large.v_row(2));
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(simulate_paths(&base(), 0, 8, 1, 0).is_err());
        assert!(simulate_paths(&base(), 30, 0, 1, 0).is_err());
        assert!(simulate_paths(&base(), 30, 8, 0, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let set = simulate_paths(&base(), 5, 2, 2, 9).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 1 + 2 * 6);
        let mut side = Vec::new();
        set.write_sidecar(&mut side).unwrap();
        let sidecar: PathSet = serde_json::from_slice(&side).unwrap();
        let back = PathSet::read_csv(sidecar, &buf[..]).unwrap();
        assert_eq!(back, set);
    }
}
