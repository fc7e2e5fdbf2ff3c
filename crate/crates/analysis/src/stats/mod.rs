//! Test battery: rank tests, t-type tests, correlation and hierarchical
//! regression. All tests are two-sided unless stated otherwise.

mod nonparametric;
mod parametric;
mod ranks;
mod regression;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub use nonparametric::{
    durbin_conover_posthoc, friedman, mann_whitney_u, wilcoxon_signed_rank, PairwiseTable,
};
pub use parametric::{paired_t, partial_pearson, pearson, welch_t, yuen_welch, Tails};
pub use ranks::midranks;
pub use regression::{
    cohens_f2, hierarchical_regression, screen_predictors, Block, HierModel, HierStep, Predictor,
};

/// Degrees of freedom of a reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Df {
    Single(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Effect {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub test: &'static str,
    pub statistic: f64,
    pub df: Option<Df>,
    pub p_value: f64,
    /// How the p-value was obtained, e.g. `exact` or `normal`.
    pub method: &'static str,
    pub effect: Option<Effect>,
}

/// Choice between exact enumeration and the asymptotic approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact for small samples, approximate otherwise.
    #[default]
    Auto,
    Exact,
    Approx,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Mode::Auto),
            "exact" => Ok(Mode::Exact),
            "approx" => Ok(Mode::Approx),
            other => Err(Error::validation(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Auto => "auto",
            Mode::Exact => "exact",
            Mode::Approx => "approx",
        })
    }
}

pub(crate) fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(format!("{what} contains missing or non-finite values")));
    }
    Ok(())
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}
