use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::parametric::{partial_pearson, Tails};
use super::{check_finite, mean, variance};
use crate::error::{Error, Result};

/// Fits with `1 - R^2` below this are flagged as perfect.
const PERFECT_FIT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub name: String,
    pub values: Vec<f64>,
}

impl Predictor {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Predictor {
            name: name.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub predictors: Vec<Predictor>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    /// Standardized regression weight.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierStep {
    pub block: String,
    /// Predictors entered at this step.
    pub added: Vec<String>,
    pub r2: f64,
    pub delta_r2: f64,
    pub f_change: f64,
    pub df: (f64, f64),
    pub p_change: f64,
    /// `n ln(RSS / n) + 2 (k + 2)` on the standardized outcome; `None` for a
    /// perfect fit.
    pub aic: Option<f64>,
    pub degenerate: bool,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierModel {
    pub n: usize,
    pub steps: Vec<HierStep>,
    /// Cohen's f² of the final step; `None` when it fits perfectly.
    pub cohens_f2: Option<f64>,
}

pub fn cohens_f2(r2: f64) -> f64 {
    r2 / (1.0 - r2)
}

fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    let m = mean(v);
    let sd = variance(v).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    Some(v.iter().map(|x| (x - m) / sd).collect())
}

/// Hierarchical OLS on standardized variables, entering `blocks` in order.
pub fn hierarchical_regression(outcome: &[f64], blocks: &[Block]) -> Result<HierModel> {
    let n = outcome.len();
    check_finite(outcome, "outcome")?;
    if blocks.is_empty() {
        return Err(Error::validation("no predictor blocks"));
    }
    let y = standardize(outcome).ok_or_else(|| Error::degenerate("outcome has zero variance"))?;
    let y = DVector::from_vec(y);
    let tss = (n - 1) as f64;

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut steps = Vec::with_capacity(blocks.len());
    let mut prev_r2 = 0.0;
    for block in blocks {
        if block.predictors.is_empty() {
            return Err(Error::validation(format!("block '{}' has no predictors", block.name)));
        }
        for p in &block.predictors {
            if p.values.len() != n {
                return Err(Error::validation(format!(
                    "predictor '{}' has {} values, outcome has {n}",
                    p.name,
                    p.values.len()
                )));
            }
            check_finite(&p.values, &p.name)?;
            let z = standardize(&p.values).ok_or_else(|| {
                Error::Singular(format!(
                    "block '{}': predictor '{}' is constant",
                    block.name, p.name
                ))
            })?;
            columns.push(z);
            names.push(p.name.clone());
        }
        let k = columns.len();
        if n < k + 2 {
            return Err(Error::InsufficientData(format!(
                "block '{}': {k} predictors need more than {} observations",
                block.name,
                k + 1
            )));
        }
        let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
        let svd = x.clone().svd(true, true);
        if svd.singular_values.min() <= 1e-10 * svd.singular_values.max() {
            return Err(Error::Singular(format!(
                "block '{}' makes the design rank-deficient",
                block.name
            )));
        }
        let beta = svd.solve(&y, 0.0).map_err(|e| Error::Singular(e.to_string()))?;
        let resid = &y - &x * &beta;
        let rss = resid.norm_squared();
        let r2 = (1.0 - rss / tss).clamp(prev_r2, 1.0);
        let delta = r2 - prev_r2;
        let m = block.predictors.len() as f64;
        let df2 = (n - k - 1) as f64;
        let degenerate = 1.0 - r2 <= PERFECT_FIT;
        let (f_change, p_change, aic) = if degenerate {
            (f64::INFINITY, 0.0, None)
        } else {
            let f = (delta / m) / ((1.0 - r2) / df2);
            let dist = FisherSnedecor::new(m, df2).expect("positive df");
            let nf = n as f64;
            (f, dist.sf(f).clamp(0.0, 1.0), Some(nf * (rss / nf).ln() + 2.0 * (k as f64 + 2.0)))
        };
        steps.push(HierStep {
            block: block.name.clone(),
            added: block.predictors.iter().map(|p| p.name.clone()).collect(),
            r2,
            delta_r2: delta,
            f_change,
            df: (m, df2),
            p_change,
            aic,
            degenerate,
            coefficients: names
                .iter()
                .zip(beta.iter())
                .map(|(name, &beta)| Coefficient {
                    name: name.clone(),
                    beta,
                })
                .collect(),
        });
        prev_r2 = r2;
    }
    let last = steps.last().expect("at least one block");
    let cohens_f2 = (!last.degenerate).then(|| cohens_f2(last.r2));
    Ok(HierModel { n, steps, cohens_f2 })
}

/// Indices of `candidates` whose correlation with `outcome`, controlling
/// for the already included predictors, is significant at `alpha`.
pub fn screen_predictors(
    outcome: &[f64],
    included: &[Predictor],
    candidates: &[Predictor],
    alpha: f64,
) -> Result<Vec<usize>> {
    let covariates: Vec<Vec<f64>> = included.iter().map(|p| p.values.clone()).collect();
    let mut keep = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let r = partial_pearson(&c.values, outcome, &covariates, Tails::Two)?;
        if r.p_value < alpha {
            keep.push(i);
        }
    }
    Ok(keep)
}
