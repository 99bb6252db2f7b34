//! Observed option quotes: `date,s,c` rows with ISO dates.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use mshedge_core::dataset::HORIZON;
use mshedge_core::pricer::{CallSpec, MarketSeries, SeriesSource};
use mshedge_core::Error as CoreError;

use crate::error::{CliError, Result};

/// Maximum number of missing weekdays between two quotes (one holiday).
pub const MAX_MISSING_WEEKDAYS: usize = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Keep the last 31 trading rows when the file has more.
    pub truncate: bool,
    /// Accept longer gaps between quotes.
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketCsvRow {
    pub date: NaiveDate,
    pub s: f64,
    pub c: f64,
}

fn is_weekend(d: NaiveDate) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

fn parse_error(line: u64, msg: impl Into<String>) -> CliError {
    CoreError::Parse { line: line as usize, msg: msg.into() }.into()
}

/// Parses and checks the rows, dropping weekend quotes.
pub fn read_market_rows<R: Read>(r: R, opts: IngestOptions) -> Result<Vec<MarketCsvRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers().map_err(|e| CliError::Csv { file: "market quotes".into(), source: e })?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "s", "c"] {
        return Err(parse_error(1, format!("expected header date,s,c, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows: Vec<MarketCsvRow> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| parse_error(line, format!("bad date {:?}: {e}", &rec[0])))?;
        let num = |k: usize, name: &str| -> Result<f64> {
            let x: f64 = rec[k].parse().map_err(|_| parse_error(line, format!("bad {name} {:?}", &rec[k])))?;
            if !(x.is_finite() && x >= 0.0) || (name == "s" && x == 0.0) {
                return Err(parse_error(line, format!("{name} must be positive, got {x}")));
            }
            Ok(x)
        };
        let row = MarketCsvRow { date, s: num(1, "s")?, c: num(2, "c")? };
        if let Some(prev) = rows.last() {
            if row.date <= prev.date {
                return Err(parse_error(line, format!("date {} does not follow {}", row.date, prev.date)));
            }
        }
        if is_weekend(row.date) {
            continue;
        }
        if let Some(prev) = rows.last() {
            let mut missing = 0;
            let mut d = prev.date + Days::new(1);
            while d < row.date {
                if !is_weekend(d) {
                    missing += 1;
                }
                d = d + Days::new(1);
            }
            if missing > MAX_MISSING_WEEKDAYS && !opts.force {
                return Err(parse_error(
                    line,
                    format!("{missing} weekdays missing between {} and {}", prev.date, row.date),
                ));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads quotes into a 31-day series for a call with the given strike and rate.
pub fn ingest_real_csv(path: &Path, strike: f64, r: f64, opts: IngestOptions) -> Result<MarketSeries> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    series_from_rows(read_market_rows(file, opts)?, strike, r, opts)
}

pub fn series_from_rows(mut rows: Vec<MarketCsvRow>, strike: f64, r: f64, opts: IngestOptions) -> Result<MarketSeries> {
    let need = HORIZON + 1;
    if rows.len() < need {
        return Err(CoreError::Input(format!("{} trading rows, need {need}", rows.len())).into());
    }
    if rows.len() > need {
        if !opts.truncate {
            return Err(CoreError::Input(format!(
                "{} trading rows, expected {need}; set the truncation flag to keep the last {need}",
                rows.len()
            ))
            .into());
        }
        rows.drain(..rows.len() - need);
    }
    let s0 = rows[0].s;
    let spec = CallSpec { strike, maturity_day: HORIZON, r, moneyness0: s0 / strike };
    let s = rows.iter().map(|x| x.s).collect();
    let c = rows.iter().map(|x| x.c).collect();
    Ok(MarketSeries::new(s, c, spec, SeriesSource::Real)?)
}

/// Writes a series as quotes on consecutive weekdays starting at `start`.
pub fn export_market_csv<W: Write>(mut w: W, series: &MarketSeries, start: NaiveDate) -> Result<()> {
    let io = |e| CliError::io("market export", e);
    writeln!(w, "date,s,c").map_err(io)?;
    let mut d = start;
    for t in 0..series.len() {
        while is_weekend(d) {
            d = d + Days::new(1);
        }
        writeln!(w, "{},{},{}", d.format("%Y-%m-%d"), series.s[t], series.c[t]).map_err(io)?;
        d = d + Days::new(1);
    }
    Ok(())
}
