//! Two-column frequency tables with log-frequency interpolation.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    points: Vec<(f64, f64)>,
}

impl FrequencyTable {
    /// Parses whitespace-separated `frequency value` lines; `#` starts a comment.
    pub fn parse(text: &str, what: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    what: what.to_string(),
                    detail: format!("line {}: expected two numbers", lineno + 1),
                })
            };
            let f = parse(cols.next())?;
            let v = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::Parse {
                    what: what.to_string(),
                    detail: format!("line {}: trailing columns", lineno + 1),
                });
            }
            points.push((f, v));
        }
        Self::from_points(points).map_err(|e| Error::Parse {
            what: what.to_string(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("empty table"));
        }
        if points.iter().any(|&(f, v)| !(f > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("table frequencies must be positive and values finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("table frequencies must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Linear in log frequency between entries, held constant beyond the ends.
    pub fn at(&self, freq: f64) -> f64 {
        let p = &self.points;
        if freq <= p[0].0 {
            return p[0].1;
        }
        if freq >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let i = p.partition_point(|&(f, _)| f <= freq);
        let (f0, v0) = p[i - 1];
        let (f1, v1) = p[i];
        let t = (freq / f0).ln() / (f1 / f0).ln();
        v0 + t * (v1 - v0)
    }

    pub fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}
