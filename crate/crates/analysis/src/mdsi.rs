//! MDSI questionnaire scoring: reverse coding, internal consistency and
//! regression-method factor scores.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Canonical factor order; also the tie-break order for classification.
pub const FACTORS: [&str; 6] = [
    "angry",
    "anxious",
    "careful",
    "dissociative",
    "distress-reduction",
    "risky",
];

pub const MDSI_ITEMS: usize = 44;
pub const LIKERT_MIN: u8 = 1;
pub const LIKERT_MAX: u8 = 6;
pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Raw answers, one row of 44 items per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemResponses {
    subjects: Vec<String>,
    rows: Vec<Vec<u8>>,
    /// 1-based item ids scored in the opposite direction.
    reverse_coded: BTreeSet<usize>,
}

impl ItemResponses {
    pub fn new(subjects: Vec<String>, rows: Vec<Vec<u8>>, reverse_coded: BTreeSet<usize>) -> Result<Self> {
        if subjects.len() != rows.len() {
            return Err(Error::validation("one response row per subject required"));
        }
        let mut seen = BTreeSet::new();
        for (s, row) in subjects.iter().zip(&rows) {
            if !seen.insert(s) {
                return Err(Error::validation(format!("duplicate subject '{s}'")));
            }
            if row.len() != MDSI_ITEMS {
                return Err(Error::validation(format!(
                    "subject '{s}' has {} items, expected {MDSI_ITEMS}",
                    row.len()
                )));
            }
            if let Some((i, v)) = row
                .iter()
                .enumerate()
                .find(|(_, v)| !(LIKERT_MIN..=LIKERT_MAX).contains(*v))
            {
                return Err(Error::validation(format!(
                    "subject '{s}' item {}: response {v} outside {LIKERT_MIN}..={LIKERT_MAX}",
                    i + 1
                )));
            }
        }
        if let Some(bad) = reverse_coded.iter().find(|&&i| i == 0 || i > MDSI_ITEMS) {
            return Err(Error::validation(format!("reverse-coded item {bad} does not exist")));
        }
        Ok(ItemResponses {
            subjects,
            rows,
            reverse_coded,
        })
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn reverse_coded(&self) -> &BTreeSet<usize> {
        &self.reverse_coded
    }

    pub fn with_reverse_coded(self, items: BTreeSet<usize>) -> Result<Self> {
        ItemResponses::new(self.subjects, self.rows, items)
    }

    /// Flips flagged items to `7 - v`. Applying it twice restores the input.
    pub fn reversed(&self) -> ItemResponses {
        let flip = LIKERT_MIN + LIKERT_MAX;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(i, &v)| if self.reverse_coded.contains(&(i + 1)) { flip - v } else { v })
                    .collect()
            })
            .collect();
        ItemResponses {
            subjects: self.subjects.clone(),
            rows,
            reverse_coded: self.reverse_coded.clone(),
        }
    }

    fn as_f64(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&v| f64::from(v)).collect())
            .collect()
    }

    /// Long format `subject_id,item_id,response`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["subject_id", "item_id", "response"] {
            return Err(Error::validation(format!(
                "items header must be subject_id,item_id,response, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut order: Vec<String> = Vec::new();
        let mut by_subject: BTreeMap<String, Vec<Option<u8>>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let subject = rec[0].to_string();
            let item: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("line {line}: bad item_id '{}'", &rec[1])))?;
            let value: u8 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("line {line}: response '{}' is not an integer", &rec[2])))?;
            if item == 0 || item > MDSI_ITEMS {
                return Err(Error::validation(format!("line {line}: item_id {item} outside 1..={MDSI_ITEMS}")));
            }
            if !(LIKERT_MIN..=LIKERT_MAX).contains(&value) {
                return Err(Error::validation(format!(
                    "line {line}: response {value} outside {LIKERT_MIN}..={LIKERT_MAX}"
                )));
            }
            let row = by_subject.entry(subject.clone()).or_insert_with(|| {
                order.push(subject.clone());
                vec![None; MDSI_ITEMS]
            });
            if row[item - 1].replace(value).is_some() {
                return Err(Error::validation(format!(
                    "line {line}: duplicate response for subject '{subject}' item {item}"
                )));
            }
        }
        let mut rows = Vec::with_capacity(order.len());
        for s in &order {
            let row = &by_subject[s];
            if let Some(missing) = row.iter().position(Option::is_none) {
                return Err(Error::validation(format!(
                    "subject '{s}' has no response for item {}",
                    missing + 1
                )));
            }
            rows.push(row.iter().map(|v| v.expect("checked")).collect());
        }
        ItemResponses::new(order, rows, BTreeSet::new())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["subject_id", "item_id", "response"])?;
        for (s, row) in self.subjects.iter().zip(&self.rows) {
            for (i, v) in row.iter().enumerate() {
                w.write_record([s.as_str(), &(i + 1).to_string(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Item-to-factor loadings and an optional reference correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingConfig {
    /// One row per item, one column per factor in [`FACTORS`] order.
    pub loadings: Vec<[f64; 6]>,
    pub r_ref: Option<Vec<Vec<f64>>>,
    /// Reverse-coded item ids, when the loadings file carries them.
    pub reverse_coded: BTreeSet<usize>,
}

impl LoadingConfig {
    pub fn new(loadings: Vec<[f64; 6]>, r_ref: Option<Vec<Vec<f64>>>, reverse_coded: BTreeSet<usize>) -> Result<Self> {
        if loadings.len() != MDSI_ITEMS {
            return Err(Error::validation(format!(
                "{} loading rows, expected {MDSI_ITEMS}",
                loadings.len()
            )));
        }
        if loadings.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite loading"));
        }
        if let Some(r) = &r_ref {
            validate_correlation(r, MDSI_ITEMS)?;
        }
        Ok(LoadingConfig {
            loadings,
            r_ref,
            reverse_coded,
        })
    }

    /// CSV with the six factor columns, plus optional `item_id` and
    /// `reverse` (0/1) columns.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let cols: Vec<usize> = FACTORS
            .iter()
            .map(|f| find(f).ok_or_else(|| Error::validation(format!("loadings file lacks column '{f}'"))))
            .collect::<Result<_>>()?;
        let id_col = find("item_id");
        let rev_col = find("reverse");
        let mut rows: Vec<(usize, [f64; 6], bool)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let item = match id_col {
                Some(c) => rec[c]
                    .trim()
                    .parse()
                    .map_err(|_| Error::validation(format!("line {line}: bad item_id '{}'", &rec[c])))?,
                None => i + 1,
            };
            let mut l = [0.0; 6];
            for (k, &c) in cols.iter().enumerate() {
                l[k] = rec[c]
                    .trim()
                    .parse()
                    .map_err(|_| Error::validation(format!("line {line}: bad loading '{}'", &rec[c])))?;
            }
            let rev = match rev_col {
                Some(c) => match rec[c].trim() {
                    "1" | "true" => true,
                    "0" | "false" | "" => false,
                    other => return Err(Error::validation(format!("line {line}: bad reverse flag '{other}'"))),
                },
                None => false,
            };
            rows.push((item, l, rev));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) || rows.len() != MDSI_ITEMS {
            return Err(Error::validation(format!(
                "loadings must cover items 1..={MDSI_ITEMS} exactly once"
            )));
        }
        let reverse = rows.iter().filter(|r| r.2).map(|r| r.0).collect();
        LoadingConfig::new(rows.into_iter().map(|r| r.1).collect(), None, reverse)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Headerless square CSV of item correlations.
    pub fn with_reference_correlation<R: Read>(mut self, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut r = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            r.push(
                rec.iter()
                    .map(|v| v.trim().parse::<f64>().map_err(|_| Error::validation(format!("bad correlation '{v}'"))))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        validate_correlation(&r, MDSI_ITEMS)?;
        self.r_ref = Some(r);
        Ok(self)
    }
}

fn validate_correlation(r: &[Vec<f64>], k: usize) -> Result<()> {
    if r.len() != k || r.iter().any(|row| row.len() != k) {
        return Err(Error::validation(format!("correlation matrix must be {k}x{k}")));
    }
    let m = DMatrix::from_fn(k, k, |i, j| r[i][j]);
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::validation("non-finite correlation"));
    }
    if (&m - m.transpose()).amax() > 1e-9 {
        return Err(Error::validation("correlation matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.min() < -1e-9 {
        return Err(Error::validation("correlation matrix is not positive semidefinite"));
    }
    Ok(())
}

/// Per-subject factor scores and the resulting style class.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsiScores {
    pub subjects: Vec<String>,
    pub scores: Vec<[f64; 6]>,
    /// Index into [`FACTORS`].
    pub style_class: Vec<usize>,
}

impl MdsiScores {
    pub fn class_name(&self, i: usize) -> &'static str {
        FACTORS[self.style_class[i]]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["subject_id"];
        header.extend(FACTORS);
        header.push("style_class");
        w.write_record(&header)?;
        for (i, (s, sc)) in self.subjects.iter().zip(&self.scores).enumerate() {
            let mut rec = vec![s.clone()];
            rec.extend(sc.iter().map(|v| v.to_string()));
            rec.push(self.class_name(i).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Index of the largest score; the earliest factor wins ties.
pub fn classify(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in scores.iter().enumerate().skip(1) {
        if *v > scores[best] {
            best = i;
        }
    }
    best
}

/// Cronbach's alpha of a subjects × items matrix.
pub fn cronbach_alpha(items: &[Vec<f64>]) -> Result<f64> {
    let n = items.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("alpha needs at least 2 subjects, got {n}")));
    }
    let k = items[0].len();
    if k < 2 {
        return Err(Error::InsufficientData(format!("alpha needs at least 2 items, got {k}")));
    }
    if items.iter().any(|r| r.len() != k) {
        return Err(Error::validation("ragged item matrix"));
    }
    if items.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite item response"));
    }
    let var = |col: &dyn Fn(&Vec<f64>) -> f64| {
        let v: Vec<f64> = items.iter().map(col).collect();
        crate::stats::variance(&v)
    };
    let item_var: f64 = (0..k).map(|j| var(&|r| r[j])).sum();
    let total_var = var(&|r| r.iter().sum());
    if !(total_var > 0.0) {
        return Err(Error::degenerate("total score has zero variance"));
    }
    let kf = k as f64;
    Ok(kf / (kf - 1.0) * (1.0 - item_var / total_var))
}

/// Regression-method scores `Z (R + ridge I)^-1 Λ` for a subjects × items
/// matrix. Items with zero variance contribute nothing.
pub fn regression_scores(
    data: &[Vec<f64>],
    loadings: &[Vec<f64>],
    r_ref: Option<&[Vec<f64>]>,
    ridge: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = data.len();
    let k = loadings.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("scoring needs at least 2 subjects, got {n}")));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::validation(format!("ridge {ridge} must be finite and >= 0")));
    }
    if data.iter().any(|r| r.len() != k) {
        return Err(Error::validation(format!("every subject needs {k} item values")));
    }
    let f = loadings.first().map_or(0, Vec::len);
    if f == 0 || loadings.iter().any(|r| r.len() != f) {
        return Err(Error::validation("loadings must be a non-empty rectangular matrix"));
    }
    if data.iter().flatten().chain(loadings.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite input to scoring"));
    }

    let mut z = DMatrix::zeros(n, k);
    let mut constant = vec![false; k];
    for j in 0..k {
        let col: Vec<f64> = data.iter().map(|r| r[j]).collect();
        let m = crate::stats::mean(&col);
        let sd = crate::stats::variance(&col).sqrt();
        if sd > 0.0 {
            for i in 0..n {
                z[(i, j)] = (col[i] - m) / sd;
            }
        } else {
            constant[j] = true;
        }
    }
    let mut r = match r_ref {
        Some(r) => {
            validate_correlation(r, k)?;
            DMatrix::from_fn(k, k, |i, j| r[i][j])
        }
        None => {
            let mut r = z.transpose() * &z / (n as f64 - 1.0);
            for (j, &c) in constant.iter().enumerate() {
                if c {
                    r.row_mut(j).fill(0.0);
                    r.column_mut(j).fill(0.0);
                    r[(j, j)] = 1.0;
                }
            }
            r
        }
    };
    for j in 0..k {
        r[(j, j)] += ridge;
    }
    let eig = SymmetricEigen::new(r.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo <= 1e-12 * hi.max(1.0) {
        return Err(Error::Singular(format!(
            "item correlation matrix is singular (smallest eigenvalue {lo:.3e}); use a positive ridge or a reference matrix"
        )));
    }
    let lambda = DMatrix::from_fn(k, f, |i, j| loadings[i][j]);
    let weights = r
        .cholesky()
        .ok_or_else(|| Error::Singular("item correlation matrix is not positive definite".into()))?
        .solve(&lambda);
    let scores = z * weights;
    Ok((0..n).map(|i| scores.row(i).iter().copied().collect()).collect())
}

/// Reverse codes the items flagged on `resp`, standardizes and scores every
/// subject, then classifies.
pub fn refined_factor_scores(resp: &ItemResponses, cfg: &LoadingConfig, ridge: f64) -> Result<MdsiScores> {
    let coded = resp.reversed();
    let loadings: Vec<Vec<f64>> = cfg.loadings.iter().map(|r| r.to_vec()).collect();
    let raw = regression_scores(&coded.as_f64(), &loadings, cfg.r_ref.as_deref(), ridge)?;
    let scores: Vec<[f64; 6]> = raw
        .iter()
        .map(|r| {
            let mut a = [0.0; 6];
            a.copy_from_slice(r);
            a
        })
        .collect();
    let style_class = scores.iter().map(|s| classify(s)).collect();
    Ok(MdsiScores {
        subjects: resp.subjects.clone(),
        scores,
        style_class,
    })
}
