//! Comma-separated numeric tables with one header row.
//!
//! Header names may carry a unit annotation in brackets (`hip_l [rad]`),
//! which is ignored when looking columns up. Lines starting with `#` are
//! comments.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Table {
    origin: PathBuf,
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
    lines: Vec<usize>,
    header_line: usize,
}

fn strip_unit(name: &str) -> &str {
    name.split(['[', '(']).next().unwrap_or("").trim()
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path)
}

pub fn parse_table(text: &str, origin: impl AsRef<Path>) -> Result<Table> {
    let origin = origin.as_ref().to_path_buf();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header_line = text
        .lines()
        .position(|l| !l.trim_start().starts_with('#'))
        .map_or(1, |i| i + 1);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(header_line, e.to_string()))?
        .iter()
        .map(|h| strip_unit(h).to_string())
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(parse_err(header_line, "empty file".into()));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        for (j, s) in rec.iter().enumerate() {
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(line, format!("column `{}`: cannot parse `{s}`", headers[j])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column `{}`: non-finite value", headers[j])));
            }
            columns[j].push(v);
        }
        lines.push(line);
    }
    Ok(Table {
        origin,
        headers,
        columns,
        lines,
        header_line,
    })
}

impl Table {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn optional(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.optional(name).ok_or_else(|| Error::MissingColumn {
            path: self.origin.clone(),
            column: name.to_string(),
        })
    }

    /// Error pointing at data row `row` (or just past the data).
    pub fn error(&self, row: usize, message: impl Into<String>) -> Error {
        let line = self
            .lines
            .get(row)
            .copied()
            .unwrap_or_else(|| self.lines.last().map_or(self.header_line, |l| l + 1));
        Error::Parse {
            path: self.origin.clone(),
            line,
            message: message.into(),
        }
    }

    /// Start and spacing of a uniformly spaced `time` column holding at
    /// least `min_len` samples.
    pub fn uniform_time(&self, min_len: usize) -> Result<(f64, f64)> {
        let t = self.column("time")?;
        let n = t.len();
        if n < min_len.max(2) {
            return Err(self.error(n, format!("{n} samples, need at least {}", min_len.max(2))));
        }
        let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(self.error(1, "time column must increase"));
        }
        if let Some(i) = t.windows(2).position(|w| ((w[1] - w[0]) - dt).abs() > 1e-3 * dt) {
            return Err(self.error(i + 1, "time column is not uniformly spaced"));
        }
        Ok((t[0], dt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_comments_and_lookup() {
        let t = parse_table("# note\na [m], b\n1, 2\n3, 4\n", "t.csv").unwrap();
        assert_eq!(t.column("a").unwrap(), &[1.0, 3.0]);
        assert_eq!(t.column("b").unwrap(), &[2.0, 4.0]);
        assert!(matches!(t.column("c"), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn bad_value_reports_line() {
        match parse_table("a,b\n1,2\n3,x\n", "t.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_table("", "t.csv"), Err(Error::Parse { line: 1, .. })));
    }
}
