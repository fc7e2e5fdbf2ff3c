use std::collections::HashMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use super::ranks::{doubled, midranks, tie_term};
use super::{check_finite, clamp_p, Df, Effect, Mode, TestResult};
use crate::error::{Error, Result};

/// Largest sample sizes for which exact distributions are enumerated.
const WILCOXON_EXACT_AUTO: usize = 20;
const MANN_WHITNEY_EXACT_AUTO: usize = 16;
/// Exact counts are held in `u128`.
const EXACT_LIMIT: usize = 120;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Two-sided p from the two tail probabilities of a discrete statistic.
fn two_sided(lower: f64, upper: f64) -> f64 {
    clamp_p(2.0 * lower.min(upper))
}

/// Two-sided normal p with continuity correction 0.5.
fn normal_p(stat: f64, mu: f64, var: f64) -> (f64, f64) {
    let z = ((stat - mu).abs() - 0.5).max(0.0) / var.sqrt();
    (z, clamp_p(2.0 * standard_normal().sf(z)))
}

/// Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped; `W` is the sum of ranks of positive differences `x - y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], mode: Mode) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::validation("paired samples differ in length"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::degenerate("all paired differences are zero"));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let effect = Some(Effect {
        name: "rank_biserial",
        value: (2.0 * w - total) / total,
    });

    let exact = match mode {
        Mode::Exact => true,
        Mode::Approx => false,
        Mode::Auto => n <= WILCOXON_EXACT_AUTO,
    };
    if exact {
        if n > EXACT_LIMIT {
            return Err(Error::validation(format!("exact Wilcoxon supports n <= {EXACT_LIMIT}")));
        }
        let r2: Vec<usize> = ranks.iter().map(|&r| doubled(r) as usize).collect();
        let max: usize = r2.iter().sum();
        let mut counts = vec![0u128; max + 1];
        counts[0] = 1;
        let mut reach = 0;
        for &r in &r2 {
            reach += r;
            for s in (r..=reach).rev() {
                counts[s] += counts[s - r];
            }
        }
        let obs = doubled(w) as usize;
        let all = counts.iter().sum::<u128>() as f64;
        let lower = counts[..=obs].iter().sum::<u128>() as f64 / all;
        let upper = counts[obs..].iter().sum::<u128>() as f64 / all;
        return Ok(TestResult {
            test: "wilcoxon_signed_rank",
            statistic: w,
            df: None,
            p_value: two_sided(lower, upper),
            method: "exact",
            effect,
        });
    }
    let nf = n as f64;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    if var <= 0.0 {
        return Err(Error::degenerate("signed-rank variance is zero"));
    }
    let (_, p) = normal_p(w, total / 2.0, var);
    Ok(TestResult {
        test: "wilcoxon_signed_rank",
        statistic: w,
        df: None,
        p_value: p,
        method: "normal",
        effect,
    })
}

/// Mann-Whitney U test. The statistic is `U` of `x`: the number of
/// `(x, y)` pairs with `x > y`, ties counting one half.
pub fn mann_whitney_u(x: &[f64], y: &[f64], mode: Mode) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::validation("both samples must be nonempty"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let (n1, n2) = (x.len(), y.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let nm = (n1 * n2) as f64;
    let effect = Some(Effect {
        name: "rank_biserial",
        value: 2.0 * u / nm - 1.0,
    });

    let exact = match mode {
        Mode::Exact => true,
        Mode::Approx => false,
        Mode::Auto => n <= MANN_WHITNEY_EXACT_AUTO,
    };
    if exact {
        if n > EXACT_LIMIT {
            return Err(Error::validation(format!("exact Mann-Whitney supports n <= {EXACT_LIMIT}")));
        }
        // counts[j][s]: subsets of size j with doubled rank sum s
        let r2: Vec<usize> = ranks.iter().map(|&r| doubled(r) as usize).collect();
        let max: usize = r2.iter().sum();
        let mut counts = vec![vec![0u128; max + 1]; n1 + 1];
        counts[0][0] = 1;
        for (i, &r) in r2.iter().enumerate() {
            for j in (1..=n1.min(i + 1)).rev() {
                for s in (r..=max).rev() {
                    let add = counts[j - 1][s - r];
                    counts[j][s] += add;
                }
            }
        }
        let dist = &counts[n1];
        let obs = doubled(r1) as usize;
        let all = dist.iter().sum::<u128>() as f64;
        let lower = dist[..=obs].iter().sum::<u128>() as f64 / all;
        let upper = dist[obs..].iter().sum::<u128>() as f64 / all;
        return Ok(TestResult {
            test: "mann_whitney_u",
            statistic: u,
            df: None,
            p_value: two_sided(lower, upper),
            method: "exact",
            effect,
        });
    }
    let nf = n as f64;
    let var = nm / 12.0 * ((nf + 1.0) - tie_term(&ties) / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Err(Error::degenerate("all observations are tied"));
    }
    let (_, p) = normal_p(u, nm / 2.0, var);
    Ok(TestResult {
        test: "mann_whitney_u",
        statistic: u,
        df: None,
        p_value: p,
        method: "normal",
        effect,
    })
}

struct BlockRanks {
    n: usize,
    k: usize,
    ranks: Vec<Vec<f64>>,
    /// Column rank sums.
    sums: Vec<f64>,
    /// Sum of squared ranks over all cells.
    a: f64,
    /// Its value without ties, `n k (k + 1)^2 / 4`.
    c: f64,
}

fn block_ranks(data: &[Vec<f64>]) -> Result<BlockRanks> {
    let n = data.len();
    let k = data.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::validation(format!("need at least 2 subjects and 2 conditions, got {n}x{k}")));
    }
    let mut ranks = Vec::with_capacity(n);
    for (i, row) in data.iter().enumerate() {
        if row.len() != k {
            return Err(Error::validation(format!("subject {i} has {} cells, expected {k}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("subject {i} has missing cells")));
        }
        ranks.push(midranks(row).0);
    }
    let mut sums = vec![0.0; k];
    let mut a = 0.0;
    for row in &ranks {
        for (j, r) in row.iter().enumerate() {
            sums[j] += r;
            a += r * r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let c = nf * kf * (kf + 1.0) * (kf + 1.0) / 4.0;
    Ok(BlockRanks { n, k, ranks, sums, a, c })
}

fn permutations(items: &[u64]) -> Vec<Vec<u64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Permutation distribution of `sum_j (2 R_j)^2` when each subject's ranks
/// are assigned to the conditions uniformly at random.
fn friedman_exact_upper(br: &BlockRanks, observed: u64) -> f64 {
    let mut states: HashMap<Vec<u64>, u128> = HashMap::new();
    states.insert(vec![0; br.k], 1);
    for row in &br.ranks {
        let r2: Vec<u64> = row.iter().map(|&r| doubled(r)).collect();
        let perms = permutations(&r2);
        let mut next: HashMap<Vec<u64>, u128> = HashMap::with_capacity(states.len() * 4);
        for (sums, count) in &states {
            for p in &perms {
                let key: Vec<u64> = sums.iter().zip(p).map(|(s, r)| s + r).collect();
                *next.entry(key).or_insert(0) += count;
            }
        }
        states = next;
    }
    let mut ge = 0u128;
    let mut all = 0u128;
    for (sums, count) in &states {
        all += count;
        if sums.iter().map(|s| s * s).sum::<u64>() >= observed {
            ge += count;
        }
    }
    ge as f64 / all as f64
}

/// Friedman test on `n` subjects (rows) by `k` conditions (columns), with
/// the tie-corrected statistic. Auto mode enumerates the exact
/// permutation distribution when `k <= 4` and `n <= 8`.
pub fn friedman(data: &[Vec<f64>], mode: Mode) -> Result<TestResult> {
    let br = block_ranks(data)?;
    let (nf, kf) = (br.n as f64, br.k as f64);
    let ss: f64 = br.sums.iter().map(|r| r * r).sum();
    let denom = br.a - br.c;
    let statistic = if denom.abs() <= 1e-9 * br.a {
        0.0
    } else {
        (kf - 1.0) * (ss - nf * br.c) / denom
    };
    let effect = Some(Effect {
        name: "kendall_w",
        value: statistic / (nf * (kf - 1.0)),
    });
    let df = Some(Df::Single(kf - 1.0));
    if statistic == 0.0 {
        return Ok(TestResult {
            test: "friedman",
            statistic,
            df,
            p_value: 1.0,
            method: "chi-squared",
            effect,
        });
    }
    let exact = match mode {
        Mode::Exact => true,
        Mode::Approx => false,
        Mode::Auto => br.k <= 4 && br.n <= 8,
    };
    if exact {
        let observed: u64 = br.sums.iter().map(|&r| doubled(r).pow(2)).sum();
        return Ok(TestResult {
            test: "friedman",
            statistic,
            df,
            p_value: clamp_p(friedman_exact_upper(&br, observed)),
            method: "exact",
            effect,
        });
    }
    let chi = ChiSquared::new(kf - 1.0).expect("k >= 2");
    Ok(TestResult {
        test: "friedman",
        statistic,
        df,
        p_value: clamp_p(chi.sf(statistic)),
        method: "chi-squared",
        effect,
    })
}

/// Pairwise statistics and p-values, symmetric with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseTable {
    pub statistic: Vec<Vec<f64>>,
    pub p_value: Vec<Vec<f64>>,
    pub df: f64,
}

/// Conover's all-pairs comparison of Friedman rank sums:
/// `t = |R_i - R_j| / sqrt(2 (n A - sum R^2) / ((n - 1)(k - 1)))` on
/// `(n - 1)(k - 1)` degrees of freedom.
pub fn durbin_conover_posthoc(data: &[Vec<f64>]) -> Result<PairwiseTable> {
    let br = block_ranks(data)?;
    let (nf, kf) = (br.n as f64, br.k as f64);
    let df = (nf - 1.0) * (kf - 1.0);
    let ss: f64 = br.sums.iter().map(|r| r * r).sum();
    let spread = (2.0 * (nf * br.a - ss) / df).max(0.0);
    let se = spread.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let k = br.k;
    let mut statistic = vec![vec![0.0; k]; k];
    let mut p_value = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let diff = (br.sums[i] - br.sums[j]).abs();
            let (t, p) = if diff == 0.0 {
                (0.0, 1.0)
            } else if se <= 1e-12 * nf * kf {
                (f64::INFINITY, 0.0)
            } else {
                let t = diff / se;
                (t, clamp_p(2.0 * dist.sf(t)))
            };
            statistic[i][j] = t;
            statistic[j][i] = t;
            p_value[i][j] = p;
            p_value[j][i] = p;
        }
    }
    Ok(PairwiseTable {
        statistic,
        p_value,
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_pairs_give_max_w() {
        let x = [1.0, 2.5, 3.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let r = wilcoxon_signed_rank(&y, &x, Mode::Exact).unwrap();
        assert_eq!(r.statistic, 15.0);
        // only one of 32 sign patterns reaches 15
        assert!((r.p_value - 2.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_differences_are_degenerate() {
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], Mode::Auto).is_err());
    }

    #[test]
    fn separated_samples_give_u_zero() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0, 7.0], Mode::Exact).unwrap();
        assert_eq!(r.statistic, 0.0);
        // 1 of C(7,3) = 35 labelings is this extreme, two-sided
        assert!((r.p_value - 2.0 / 35.0).abs() < 1e-15);
    }

    #[test]
    fn friedman_identical_columns() {
        let data = vec![vec![5.0, 5.0, 5.0], vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]];
        let r = friedman(&data, Mode::Auto).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let post = durbin_conover_posthoc(&data).unwrap();
        assert!(post.p_value.iter().flatten().all(|&p| p == 1.0));
    }

    #[test]
    fn friedman_rejects_missing_cells() {
        let data = vec![vec![1.0, f64::NAN], vec![1.0, 2.0]];
        assert!(matches!(friedman(&data, Mode::Auto), Err(Error::Validation(_))));
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(friedman(&ragged, Mode::Auto).is_err());
    }
}
