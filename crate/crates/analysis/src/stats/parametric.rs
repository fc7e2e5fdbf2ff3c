use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check_finite, clamp_p, mean, variance, Df, Effect, TestResult};
use crate::error::{Error, Result};

/// Alternative hypothesis of a correlation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    #[default]
    Two,
    Greater,
    Less,
}

fn t_p(t: f64, df: f64, tails: Tails) -> f64 {
    if t.is_infinite() {
        return match tails {
            Tails::Two => 0.0,
            Tails::Greater => if t > 0.0 { 0.0 } else { 1.0 },
            Tails::Less => if t < 0.0 { 0.0 } else { 1.0 },
        };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    clamp_p(match tails {
        Tails::Two => 2.0 * dist.sf(t.abs()),
        Tails::Greater => dist.sf(t),
        Tails::Less => dist.cdf(t),
    })
}

/// Paired-samples t test on `x - y`.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::validation("paired samples differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("paired t needs at least 2 pairs".into()));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let sd = variance(&d).sqrt();
    if sd == 0.0 {
        return Err(Error::degenerate("paired differences have zero variance"));
    }
    let m = mean(&d);
    let t = m / (sd / n.sqrt());
    Ok(TestResult {
        test: "paired_t",
        statistic: t,
        df: Some(Df::Single(n - 1.0)),
        p_value: t_p(t, n - 1.0, Tails::Two),
        method: "t",
        effect: Some(Effect {
            name: "cohen_dz",
            value: m / sd,
        }),
    })
}

/// Welch's unequal-variance t test.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientData("Welch t needs at least 2 values per sample".into()));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (v1, v2) = (variance(x), variance(y));
    let (q1, q2) = (v1 / n1, v2 / n2);
    if q1 + q2 == 0.0 {
        return Err(Error::degenerate("both samples have zero variance"));
    }
    let t = (mean(x) - mean(y)) / (q1 + q2).sqrt();
    let df = (q1 + q2).powi(2) / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
    let pooled = ((v1 + v2) / 2.0).sqrt();
    Ok(TestResult {
        test: "welch_t",
        statistic: t,
        df: Some(Df::Single(df)),
        p_value: t_p(t, df, Tails::Two),
        method: "t",
        effect: Some(Effect {
            name: "cohen_d",
            value: (mean(x) - mean(y)) / pooled,
        }),
    })
}

struct Trimmed {
    mean: f64,
    /// Squared standard error term `(n - 1) s_w^2 / (h (h - 1))`.
    d: f64,
    h: f64,
}

fn trimmed(xs: &[f64], trim: f64) -> Result<Trimmed> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let g = (trim * n as f64).floor() as usize;
    let h = n - 2 * g;
    if h < 2 {
        return Err(Error::validation(format!(
            "trimming {trim} of {n} values leaves fewer than 2"
        )));
    }
    let mean = s[g..n - g].iter().sum::<f64>() / h as f64;
    let (lo, hi) = (s[g], s[n - g - 1]);
    let wins: Vec<f64> = s.iter().map(|v| v.clamp(lo, hi)).collect();
    let sw2 = variance(&wins);
    let hf = h as f64;
    Ok(Trimmed {
        mean,
        d: (n as f64 - 1.0) * sw2 / (hf * (hf - 1.0)),
        h: hf,
    })
}

/// Yuen's trimmed-means test with Welch-Satterthwaite degrees of freedom.
/// `trim = 0` reproduces Welch's t.
pub fn yuen_welch(x: &[f64], y: &[f64], trim: f64) -> Result<TestResult> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::validation(format!("trim {trim} outside [0, 0.5)")));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let a = trimmed(x, trim)?;
    let b = trimmed(y, trim)?;
    let diff = a.mean - b.mean;
    if a.d + b.d == 0.0 {
        if diff == 0.0 {
            return Ok(TestResult {
                test: "yuen_welch",
                statistic: 0.0,
                df: None,
                p_value: 1.0,
                method: "t",
                effect: None,
            });
        }
        return Err(Error::degenerate("winsorized variances are zero"));
    }
    let t = diff / (a.d + b.d).sqrt();
    let df = (a.d + b.d).powi(2) / (a.d * a.d / (a.h - 1.0) + b.d * b.d / (b.h - 1.0));
    Ok(TestResult {
        test: "yuen_welch",
        statistic: t,
        df: Some(Df::Single(df)),
        p_value: t_p(t, df, Tails::Two),
        method: "t",
        effect: None,
    })
}

/// Residuals of `v` after least squares on an intercept plus `covariates`.
fn residualize(v: &[f64], covariates: &[Vec<f64>]) -> Result<Vec<f64>> {
    if covariates.is_empty() {
        let m = mean(v);
        return Ok(v.iter().map(|x| x - m).collect());
    }
    let n = v.len();
    let p = covariates.len() + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[j - 1][i] });
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * max_sv.max(1.0) {
        return Err(Error::Singular("covariates are collinear with each other or the intercept".into()));
    }
    let y = DVector::from_column_slice(v);
    let beta = svd.solve(&y, 0.0).map_err(|e| Error::Singular(e.to_string()))?;
    Ok((y - x * beta).iter().copied().collect())
}

/// Pearson correlation of `x` and `y` after partialling out `covariates`
/// (each a column of length `n`), with a t test on `n - 2 - p` df.
pub fn partial_pearson(x: &[f64], y: &[f64], covariates: &[Vec<f64>], tails: Tails) -> Result<TestResult> {
    let n = x.len();
    if y.len() != n || covariates.iter().any(|c| c.len() != n) {
        return Err(Error::validation("correlation inputs differ in length"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    for c in covariates {
        check_finite(c, "covariate")?;
    }
    let p = covariates.len();
    if n < p + 3 {
        return Err(Error::InsufficientData(format!(
            "partial correlation with {p} covariates needs at least {} observations, got {n}",
            p + 3
        )));
    }
    let ex = residualize(x, covariates)?;
    let ey = residualize(y, covariates)?;
    let sxy: f64 = ex.iter().zip(&ey).map(|(a, b)| a * b).sum();
    let sxx: f64 = ex.iter().map(|a| a * a).sum();
    let syy: f64 = ey.iter().map(|b| b * b).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("a variable has zero residual variance"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2 - p) as f64;
    let t = if r.abs() == 1.0 {
        r.signum() * f64::INFINITY
    } else {
        r * (df / (1.0 - r * r)).sqrt()
    };
    Ok(TestResult {
        test: if p == 0 { "pearson" } else { "partial_pearson" },
        statistic: r,
        df: Some(Df::Single(df)),
        p_value: t_p(t, df, tails),
        method: "t",
        effect: None,
    })
}

pub fn pearson(x: &[f64], y: &[f64], tails: Tails) -> Result<TestResult> {
    partial_pearson(x, y, &[], tails)
}
