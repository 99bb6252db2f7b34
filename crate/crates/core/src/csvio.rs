//! Minimal comma-separated reader shared by the artifact formats.
//!
//! Lines starting with `#` are comments; the first non-comment line is a header
//! that must start with the expected column names.

use std::io::BufRead;
use std::str::FromStr;

use crate::{Error, Result};

pub(crate) struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

impl Row {
    pub fn parse<T: FromStr>(&self, idx: usize) -> Result<T> {
        let raw = self.fields.get(idx).ok_or_else(|| Error::Parse {
            line: self.line,
            msg: format!("missing column {idx}"),
        })?;
        raw.trim().parse().map_err(|_| Error::Parse {
            line: self.line,
            msg: format!("cannot parse {raw:?} in column {idx}"),
        })
    }
}

pub(crate) fn read_rows<R: BufRead>(r: R, header_prefix: &[&str]) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = k + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|f| f.trim().to_string()).collect();
        if !header_seen {
            let ok = header_prefix.len() <= fields.len()
                && header_prefix.iter().zip(&fields).all(|(a, b)| a == b);
            if !ok {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected header starting with {header_prefix:?}, found {trimmed:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        rows.push(Row { line: line_no, fields });
    }
    if !header_seen {
        return Err(Error::Parse { line: 0, msg: "empty file".into() });
    }
    Ok(rows)
}
