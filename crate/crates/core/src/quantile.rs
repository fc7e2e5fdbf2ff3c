//! Sample summaries shared by the style registry and log metrics.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Summary level used to derive style parameters from samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// Percentile in `[0, 100]`, linear interpolation between closest ranks.
    Percentile(f64),
    /// Arithmetic mean.
    Mean,
}

impl Level {
    /// Maps the style-registry convention: 15 and 85 are percentiles, 50 is
    /// the arithmetic mean (the rail midpoint).
    pub fn for_style(percentile: u8) -> Level {
        if percentile == 50 {
            Level::Mean
        } else {
            Level::Percentile(percentile as f64)
        }
    }

    pub fn summarize(self, samples: &[f64]) -> Result<f64> {
        match self {
            Level::Percentile(p) => percentile(samples, p),
            Level::Mean => mean(samples),
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mean") {
            return Ok(Level::Mean);
        }
        let p: f64 = s
            .parse()
            .map_err(|_| Error::validation(format!("level must be a percentile or 'mean', got '{s}'")))?;
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::validation(format!("percentile {p} outside [0, 100]")));
        }
        Ok(Level::Percentile(p))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Percentile(p) => write!(f, "p{p}"),
            Level::Mean => f.write_str("mean"),
        }
    }
}

/// Percentile with linear interpolation between closest ranks
/// (position `(n - 1) * p / 100` in the sorted sample).
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            what: "percentile samples",
            needed: 1,
            got: 0,
        });
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::validation(format!("percentile {p} outside [0, 100]")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("non-finite sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            what: "mean samples",
            needed: 1,
            got: 0,
        });
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}
