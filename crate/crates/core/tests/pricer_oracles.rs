//! Pricer checks against independent references: a closed-form lognormal
//! characteristic function, an erf-based Black–Scholes evaluation, bump-and-
//! reprice deltas and a risk-neutral Monte Carlo estimate.

use mshedge_core::heston_sim::{simulate_paths, HestonParams};
use mshedge_core::pricer::{
    bs_call_price, heston_call_price, heston_cf, heston_delta, price_path, price_path_with_deltas,
    CallSpec,
};
use num_complex::Complex64;

/// erf via Maclaurin series below 3 and a continued fraction for erfc above.
fn erf(x: f64) -> f64 {
    let ax = x.abs();
    let val = if ax < 3.0 {
        let mut term = ax;
        let mut sum = ax;
        let x2 = ax * ax;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut frac = 0.0;
        for k in (1..80).rev() {
            frac = (k as f64 / 2.0) / (ax + frac);
        }
        1.0 - (-ax * ax).exp() / std::f64::consts::PI.sqrt() / (ax + frac)
    };
    val.copysign(x)
}

fn ncdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn bs_oracle(s: f64, k: f64, sigma: f64, tau: f64, r: f64) -> f64 {
    let tot = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + r * tau) / tot + 0.5 * tot;
    s * ncdf(d1) - k * (-r * tau).exp() * ncdf(d1 - tot)
}

fn deterministic_vol(v: f64) -> HestonParams {
    HestonParams { mu: 0.0, a: 0.05, v_bar: v, eta: 1e-12, rho: -0.5, s0: 100.0, v0: v }
}

fn generic() -> HestonParams {
    HestonParams { mu: 0.001, a: 0.04, v_bar: 1.8e-4, eta: 1.8e-3, rho: -0.7, s0: 100.0, v0: 9e-5 }
}

#[test]
fn erf_oracle_sanity() {
    assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
    assert!((erf(3.5) - 0.999_999_256_901_627_7).abs() < 1e-15);
    assert!((ncdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
}

#[test]
fn cf_matches_lognormal_in_the_zero_vol_of_vol_limit() {
    let p = deterministic_vol(1.2e-4);
    let (s, tau, r): (f64, f64, f64) = (97.0, 18.0, 1e-4);
    let u = Complex64::new(1.3, 0.0);
    let i = Complex64::i();
    let expected =
        (i * u * (s.ln() + r * tau) - 0.5 * p.v0 * tau * (u * u + i * u)).exp();
    let got = heston_cf(u, &p, s, p.v0, tau, r).unwrap();
    assert!((got - expected).norm() / expected.norm() < 1e-8, "{got} vs {expected}");
}

#[test]
fn bs_closed_form_matches_erf_oracle() {
    // sigma * sqrt(tau) = 0.2 in total
    let tau: f64 = 25.0;
    let sigma = 0.2 / tau.sqrt();
    let got = bs_call_price(100.0, 100.0, sigma, tau, 0.0);
    let want = bs_oracle(100.0, 100.0, sigma, tau, 0.0);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!((got - 7.97).abs() < 0.01);
}

#[test]
fn heston_reduces_to_black_scholes() {
    let v = 0.04 / 252.0;
    let p = deterministic_vol(v);
    let spec = CallSpec { strike: 100.0, maturity_day: 30, r: 0.0, moneyness0: 1.0 };
    let c = heston_call_price(&p, 100.0, v, &spec, 30.0).unwrap();
    let bs = bs_oracle(100.0, 100.0, v.sqrt(), 30.0, 0.0);
    assert!((c - bs).abs() / bs <= 1e-4, "{c} vs {bs}");
}

#[test]
fn delta_matches_bump_and_reprice() {
    let p = generic();
    let spec = CallSpec { strike: 100.0 / 1.1, maturity_day: 30, r: 2e-4, moneyness0: 1.1 };
    for &(s, v, tau) in &[(100.0, 9e-5, 30.0), (92.0, 2e-4, 12.0), (88.0, 1.5e-4, 3.0)] {
        let h = 1e-3 * s;
        let up = heston_call_price(&p, s + h, v, &spec, tau).unwrap();
        let dn = heston_call_price(&p, s - h, v, &spec, tau).unwrap();
        let fd = (up - dn) / (2.0 * h);
        let d = heston_delta(&p, s, v, &spec, tau).unwrap();
        assert!((d - fd).abs() <= 1e-4, "s={s}: delta {d} vs fd {fd}");
        assert!((0.0..=1.0).contains(&d));
    }
}

/// Risk-neutral Euler estimate of the call price and its standard error.
fn mc_price(p: &HestonParams, spec: &CallSpec, s: f64, v: f64, days: usize, n: usize, seed: u64) -> (f64, f64) {
    let rn = HestonParams { mu: spec.r, s0: s, v0: v, ..*p };
    let set = simulate_paths(&rn, days, 8, n, seed).unwrap();
    let disc = (-spec.r * days as f64).exp();
    let payoffs: Vec<f64> = (0..n)
        .map(|i| disc * (set.s_row(i)[days] - spec.strike).max(0.0))
        .collect();
    let mean = payoffs.iter().sum::<f64>() / n as f64;
    let var = payoffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn heston_price_agrees_with_monte_carlo() {
    let p = generic();
    let spec = CallSpec { strike: 100.0, maturity_day: 30, r: 1e-4, moneyness0: 1.0 };
    let (mc, se) = mc_price(&p, &spec, 100.0, p.v0, 30, 200_000, 17);
    let c = heston_call_price(&p, 100.0, p.v0, &spec, 30.0).unwrap();
    assert!((c - mc).abs() < 3.0 * se, "fourier {c} vs mc {mc} ± {se}");
}

#[test]
fn priced_path_terminal_and_lower_bounds() {
    let p = generic();
    let set = simulate_paths(&p, 30, 8, 1, 5).unwrap();
    let spec = CallSpec::from_moneyness(p.s0, 1.1, 30, 1e-4).unwrap();
    let (series, deltas) = price_path_with_deltas(set.s_row(0), set.v_row(0), &p, &spec).unwrap();
    assert_eq!(series.c[30], (series.s[30] - spec.strike).max(0.0));
    assert!(series.c[0] >= p.s0 - spec.strike * (-spec.r * 30.0f64).exp());
    assert_eq!(deltas[30], spec.terminal_delta(series.s[30]));
    assert!(deltas.iter().all(|d| (0.0..=1.0).contains(d)));
}

#[test]
fn priced_path_matches_daily_monte_carlo_repricing() {
    let p = generic();
    let set = simulate_paths(&p, 30, 8, 1, 23).unwrap();
    let spec = CallSpec::from_moneyness(p.s0, 1.1, 30, 0.0).unwrap();
    let series = price_path(set.s_row(0), set.v_row(0), &p, &spec).unwrap();
    for t in [0usize, 10, 20, 27] {
        let (mc, se) = mc_price(&p, &spec, series.s[t], set.v_row(0)[t], 30 - t, 100_000, 100 + t as u64);
        assert!(
            (series.c[t] - mc).abs() < 3.0 * se.max(1e-9),
            "day {t}: fourier {} vs mc {mc} ± {se}",
            series.c[t]
        );
    }
}
