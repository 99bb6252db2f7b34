use std::path::Path;
use std::process::Command;

use chrono::NaiveDate;
use mshedge::ingest::{export_market_csv, read_market_rows, series_from_rows, IngestOptions};
use mshedge::{run_all, run_pipeline, CliError, RunConfig, Stage};
use mshedge_core::pricer::{CallSpec, MarketSeries, SeriesSource};

const TINY: &str = "seed = 3\n[dataset]\nn_paths = 20\ncutoffs = [5, 15]\n\
                    [training.cnn]\nepochs = 2\nensemble_size = 1\n[training.forest]\nn_trees = 3\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mshedge"))
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(String::from).collect()
}

fn quotes(dates: &[NaiveDate]) -> String {
    let mut out = String::from("date,s,c\n");
    for (k, d) in dates.iter().enumerate() {
        out += &format!("{},{},{}\n", d.format("%Y-%m-%d"), 100.0 + k as f64 * 0.1, 3.0 + k as f64 * 0.01);
    }
    out
}

/// Consecutive weekdays from a Monday.
fn weekdays(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let mut out = Vec::new();
    while out.len() < n {
        if chrono::Datelike::weekday(&d).num_days_from_monday() < 5 {
            out.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    out
}

#[test]
fn simulate_writes_one_row_per_path_day() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml("[dataset]\nn_paths = 2\n").unwrap();
    run_pipeline(&cfg, Stage::Simulate, dir.path()).unwrap();
    assert_eq!(data_lines(&dir.path().join("paths.csv")).len(), 62);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("simulate") && manifest.contains(&cfg.hash().unwrap()));
    let first = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert!(first.starts_with(&format!("# config_hash={}", cfg.hash().unwrap())));
}

#[test]
fn missing_models_exit_with_dependency_code() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().args(["evaluate", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&status.stderr).contains("models.json"));
}

#[test]
fn artifacts_from_another_config_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = RunConfig::from_toml("seed = 1\n[dataset]\nn_paths = 4\n").unwrap();
    let b = RunConfig::from_toml("seed = 2\n[dataset]\nn_paths = 4\n").unwrap();
    run_pipeline(&a, Stage::Simulate, dir.path()).unwrap();
    let err = run_pipeline(&b, Stage::Label, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::Dependency(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn bad_configs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["[dataset]\nn_path = 5\n", "[dataset]\ncutoffs = [0]\n", "[backtest]\nstrategies = [\"weekly\"]\n"] {
        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, text).unwrap();
        let out = bin().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    let out = bin().args(["simulate", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn seed_override_changes_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[dataset]\nn_paths = 2\n").unwrap();
    let mut bodies = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let st = bin().arg("simulate").arg("--config").arg(&cfg).args(["--seed", seed]).arg("--out").arg(&out).status();
        assert!(st.unwrap().success());
        bodies.push(data_lines(&out.join("paths.csv")));
    }
    assert_ne!(bodies[0], bodies[1]);
}

#[test]
fn clean_quotes_give_a_series() {
    let rows = read_market_rows(quotes(&weekdays(31)).as_bytes(), IngestOptions::default()).unwrap();
    let series = series_from_rows(rows, 100.0, 1e-4, IngestOptions::default()).unwrap();
    assert_eq!(series.len(), 31);
    assert_eq!(series.s[0], 100.0);
    assert!((series.spec.moneyness0 - 1.0).abs() < 1e-15);
}

#[test]
fn weekend_quotes_are_dropped() {
    let mut dates = weekdays(31);
    dates.insert(5, NaiveDate::from_ymd_opt(2024, 1, 6).unwrap());
    let rows = read_market_rows(quotes(&dates).as_bytes(), IngestOptions::default()).unwrap();
    assert_eq!(rows.len(), 31);
    assert!(rows.iter().all(|r| chrono::Datelike::weekday(&r.date).num_days_from_monday() < 5));
}

#[test]
fn export_round_trips() {
    let spec = CallSpec { strike: 95.0, maturity_day: 30, r: 2e-4, moneyness0: 100.0 / 95.0 };
    let s: Vec<f64> = (0..31).map(|t| 100.0 * (0.01 * t as f64).sin().exp()).collect();
    let c: Vec<f64> = (0..31).map(|t| 6.0 + 0.123456789 * t as f64).collect();
    let series = MarketSeries::new(s, c, spec, SeriesSource::Real).unwrap();
    let mut buf = Vec::new();
    export_market_csv(&mut buf, &series, NaiveDate::from_ymd_opt(2024, 3, 1).unwrap()).unwrap();
    let rows = read_market_rows(buf.as_slice(), IngestOptions::default()).unwrap();
    let back = series_from_rows(rows, 95.0, 2e-4, IngestOptions::default()).unwrap();
    assert_eq!(back.s, series.s);
    assert_eq!(back.c, series.c);
}

#[test]
fn malformed_rows_report_their_line() {
    let mut text = quotes(&weekdays(31));
    text = text.replacen("100.2,", "abc,", 1);
    let err = read_market_rows(text.as_bytes(), IngestOptions::default()).unwrap_err();
    assert!(err.to_string().contains("line 4"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let err = read_market_rows("day,s,c\n".as_bytes(), IngestOptions::default()).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
}

#[test]
fn long_gaps_need_force() {
    let mut dates = weekdays(33);
    dates.drain(10..12);
    let text = quotes(&dates);
    assert!(read_market_rows(text.as_bytes(), IngestOptions::default()).is_err());
    let forced = IngestOptions { force: true, ..Default::default() };
    assert_eq!(read_market_rows(text.as_bytes(), forced).unwrap().len(), 31);

    let mut one_gap = weekdays(32);
    one_gap.remove(10);
    assert_eq!(read_market_rows(quotes(&one_gap).as_bytes(), IngestOptions::default()).unwrap().len(), 31);
}

#[test]
fn row_count_is_enforced_unless_truncating() {
    let text = quotes(&weekdays(40));
    let rows = read_market_rows(text.as_bytes(), IngestOptions::default()).unwrap();
    assert!(series_from_rows(rows.clone(), 100.0, 0.0, IngestOptions::default()).is_err());
    let trunc = IngestOptions { truncate: true, ..Default::default() };
    let series = series_from_rows(rows.clone(), 100.0, 0.0, trunc).unwrap();
    assert_eq!(series.s[0], rows[9].s);

    let short = read_market_rows(quotes(&weekdays(30)).as_bytes(), IngestOptions::default()).unwrap();
    let err = series_from_rows(short, 100.0, 0.0, trunc).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn full_run_with_real_quotes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("quotes.csv");
    std::fs::write(&csv, quotes(&weekdays(31))).unwrap();
    let text = format!("{TINY}[backtest]\nmax_paths = 3\n[backtest.real]\ncsv = {:?}\nstrike = 101.0\n", csv);
    let cfg = RunConfig::from_toml(&text).unwrap();
    let out = dir.path().join("out");
    run_all(&cfg, &out).unwrap();
    for name in ["metrics.csv", "metrics_real.csv", "report_real.csv", "weights_real.csv", "sweep.csv", "auc.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    assert_eq!(data_lines(&out.join("metrics_real.csv")).len(), 13);
    assert_eq!(data_lines(&out.join("report_real.csv")).len(), 13 * 31);

    let before = cfg.hash().unwrap();
    std::fs::write(&csv, quotes(&weekdays(32))).unwrap();
    assert_ne!(cfg.hash().unwrap(), before);
}

#[test]
fn ingest_subcommand_prints_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("q.csv");
    std::fs::write(&csv, quotes(&weekdays(35))).unwrap();
    let out = bin().args(["ingest", "--strike", "100", "--truncate", "--csv"]).arg(&csv).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 32);

    let out = bin().args(["ingest", "--strike", "100", "--csv"]).arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
