//! Declarative analysis requests: a TOML spec selects rows from a study
//! table, shapes them for one test and yields a serializable report.
//!
//! Variables are referenced by name: the table's value column
//! (`relaxation` or `response`), subject attributes (`age`,
//! `license_years`), MDSI factor scores by factor name, and 0/1 indicators
//! written `field=level`, e.g. `weather=rain` or `gender=female`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{classification_confusion, descriptives, Cell, Confusion, StudyTables};
use crate::error::{Error, Result};
use crate::mdsi::{MdsiScores, FACTORS};
use crate::stats::{
    durbin_conover_posthoc, friedman, hierarchical_regression, mann_whitney_u, paired_t, partial_pearson,
    screen_predictors, welch_t, wilcoxon_signed_rank, yuen_welch, Block, HierModel, Mode, PairwiseTable,
    Predictor, Tails, TestResult,
};

pub const DEFAULT_TRIM: f64 = 0.2;
pub const DEFAULT_SCREEN_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Wilcoxon,
    MannWhitney,
    Friedman,
    Conover,
    PairedT,
    WelchT,
    Yuen,
    PartialPearson,
    Hierarchical,
    Descriptives,
    Confusion,
}

impl Analysis {
    pub const ALL: &'static [Analysis] = &[
        Analysis::Wilcoxon,
        Analysis::MannWhitney,
        Analysis::Friedman,
        Analysis::Conover,
        Analysis::PairedT,
        Analysis::WelchT,
        Analysis::Yuen,
        Analysis::PartialPearson,
        Analysis::Hierarchical,
        Analysis::Descriptives,
        Analysis::Confusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Wilcoxon => "wilcoxon",
            Analysis::MannWhitney => "mann-whitney",
            Analysis::Friedman => "friedman",
            Analysis::Conover => "conover",
            Analysis::PairedT => "paired-t",
            Analysis::WelchT => "welch-t",
            Analysis::Yuen => "yuen",
            Analysis::PartialPearson => "partial-pearson",
            Analysis::Hierarchical => "hierarchical",
            Analysis::Descriptives => "descriptives",
            Analysis::Confusion => "confusion",
        }
    }
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Analysis::ALL.iter().map(|a| a.as_str()).collect();
                Error::validation(format!("unknown analysis '{s}' (one of {})", names.join(", ")))
            })
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    #[default]
    Ondrive,
    PostRide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    pub predictors: Vec<String>,
    /// Keep only predictors that correlate with the outcome, controlling
    /// for everything entered before.
    #[serde(default)]
    pub screen: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub table: TableKind,
    /// Equality filters on categorical fields.
    #[serde(default)]
    pub filter: BTreeMap<String, String>,
    /// Repeated-measures factor; cells are per-subject means.
    pub within: Option<String>,
    /// Independent-groups factor; rows are pooled.
    pub between: Option<String>,
    pub levels: Option<Vec<String>>,
    pub trim: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
    pub x: Option<String>,
    pub y: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub tails: Tails,
    pub outcome: Option<String>,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    pub screen_alpha: Option<f64>,
    #[serde(default)]
    pub group_by: Vec<String>,
}

impl AnalysisSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportBody {
    Test(TestResult),
    Pairwise(PairwiseTable),
    Hierarchical {
        model: HierModel,
        /// Predictors removed by screening, per block.
        screened_out: BTreeMap<String, Vec<String>>,
    },
    Descriptives(Vec<Cell>),
    Confusion(Confusion),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub analysis: String,
    /// Rows (or subjects, for within designs) entering the computation.
    pub n: usize,
    pub levels: Vec<String>,
    pub result: ReportBody,
}

/// Row-level view of one table joined with subject attributes.
pub struct Frame<'a> {
    rows: Vec<FrameRow>,
    value_name: &'static str,
    subjects: BTreeMap<&'a str, &'a crate::dataset::Subject>,
    scores: BTreeMap<&'a str, &'a [f64; 6]>,
}

#[derive(Debug, Clone)]
struct FrameRow {
    fields: BTreeMap<&'static str, String>,
    value: f64,
}

impl<'a> Frame<'a> {
    pub fn new(tables: &'a StudyTables, table: TableKind, scores: Option<&'a MdsiScores>) -> Self {
        let rows = match table {
            TableKind::Ondrive => tables
                .ondrive
                .iter()
                .map(|r| FrameRow {
                    fields: BTreeMap::from([
                        ("subject", r.subject.clone()),
                        ("style", r.style.to_string()),
                        ("weather", r.weather.to_string()),
                        ("traffic", r.traffic.to_string()),
                        ("road", r.road.to_string()),
                    ]),
                    value: r.relaxation,
                })
                .collect(),
            TableKind::PostRide => tables
                .post_ride
                .iter()
                .map(|r| FrameRow {
                    fields: BTreeMap::from([
                        ("subject", r.subject.clone()),
                        ("style", r.style.to_string()),
                        ("weather", r.weather.to_string()),
                        ("inventory", r.inventory.to_string()),
                        ("item", r.item.clone()),
                    ]),
                    value: r.response,
                })
                .collect(),
        };
        let mut score_map = BTreeMap::new();
        if let Some(s) = scores {
            for (subject, sc) in s.subjects.iter().zip(&s.scores) {
                score_map.insert(subject.as_str(), sc);
            }
        }
        Frame {
            rows,
            value_name: match table {
                TableKind::Ondrive => "relaxation",
                TableKind::PostRide => "response",
            },
            subjects: tables.subjects.iter().map(|s| (s.subject.as_str(), s)).collect(),
            scores: score_map,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn category(&self, row: &FrameRow, field: &str) -> Result<String> {
        if let Some(v) = row.fields.get(field) {
            return Ok(v.clone());
        }
        if field == "gender" {
            let s = &row.fields["subject"];
            return self
                .subjects
                .get(s.as_str())
                .and_then(|s| s.gender.clone())
                .ok_or_else(|| Error::validation(format!("subject '{s}' has no gender")));
        }
        let known: Vec<&str> = row.fields.keys().copied().chain(["gender"]).collect();
        Err(Error::validation(format!("unknown field '{field}' (fields: {})", known.join(", "))))
    }

    /// Keeps rows matching every `field = level` pair.
    pub fn filter(mut self, filter: &BTreeMap<String, String>) -> Result<Self> {
        let mut keep = Vec::with_capacity(self.rows.len());
        for row in std::mem::take(&mut self.rows) {
            let mut ok = true;
            for (field, level) in filter {
                ok &= self.category(&row, field)? == *level;
            }
            if ok {
                keep.push(row);
            }
        }
        self.rows = keep;
        Ok(self)
    }

    fn numeric(&self, row: &FrameRow, name: &str) -> Result<f64> {
        if name == self.value_name {
            return Ok(row.value);
        }
        if let Some((field, level)) = name.split_once('=') {
            return Ok(if self.category(row, field)? == level { 1.0 } else { 0.0 });
        }
        let subject = row.fields["subject"].as_str();
        if let Some(k) = FACTORS.iter().position(|f| *f == name) {
            let sc = self.scores.get(subject).ok_or_else(|| {
                Error::validation(format!("no MDSI score for subject '{subject}' (are loadings supplied?)"))
            })?;
            return Ok(sc[k]);
        }
        let attr = self.subjects.get(subject).and_then(|s| match name {
            "age" => Some(s.age),
            "license_years" => Some(s.license_years),
            _ => None,
        });
        match attr {
            Some(Some(v)) => Ok(v),
            Some(None) => Err(Error::validation(format!("subject '{subject}' has no {name}"))),
            None if matches!(name, "age" | "license_years") => {
                Err(Error::validation(format!("subject '{subject}' is not in the subjects table")))
            }
            None => Err(Error::validation(format!(
                "unknown variable '{name}' (use {}, age, license_years, an MDSI factor or field=level)",
                self.value_name
            ))),
        }
    }

    /// One column per named variable.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        self.rows.iter().map(|r| self.numeric(r, name)).collect()
    }

    fn levels_of(&self, field: &str, given: Option<&Vec<String>>) -> Result<Vec<String>> {
        if let Some(l) = given {
            return Ok(l.clone());
        }
        let mut seen: Vec<String> = Vec::new();
        for r in &self.rows {
            let v = self.category(r, field)?;
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        seen.sort();
        Ok(seen)
    }

    /// Subjects × levels matrix of per-cell mean values.
    pub fn within_matrix(&self, field: &str, levels: &[String]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let mut cells: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
        for r in &self.rows {
            let level = self.category(r, field)?;
            if let Some(j) = levels.iter().position(|l| *l == level) {
                cells.entry(r.fields["subject"].as_str()).or_insert_with(|| vec![Vec::new(); levels.len()])[j]
                    .push(r.value);
            }
        }
        let mut subjects = Vec::new();
        let mut matrix = Vec::new();
        for (s, row) in cells {
            if let Some(j) = row.iter().position(Vec::is_empty) {
                return Err(Error::validation(format!(
                    "subject '{s}' has no observation for {field} = {}",
                    levels[j]
                )));
            }
            subjects.push(s.to_string());
            matrix.push(
                row.into_iter()
                    .map(|mut v| {
                        v.sort_by(f64::total_cmp);
                        v.iter().sum::<f64>() / v.len() as f64
                    })
                    .collect(),
            );
        }
        Ok((subjects, matrix))
    }

    /// Pooled values per level of `field`.
    pub fn between_groups(&self, field: &str, levels: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut groups = vec![Vec::new(); levels.len()];
        for r in &self.rows {
            let level = self.category(r, field)?;
            if let Some(j) = levels.iter().position(|l| *l == level) {
                groups[j].push(r.value);
            }
        }
        Ok(groups)
    }
}

fn require<'s>(v: &'s Option<String>, what: &str, analysis: Analysis) -> Result<&'s str> {
    v.as_deref()
        .ok_or_else(|| Error::validation(format!("{analysis} needs '{what}' in the spec")))
}

fn two_levels(levels: &[String], analysis: Analysis) -> Result<()> {
    if levels.len() != 2 {
        return Err(Error::validation(format!(
            "{analysis} compares exactly two levels, got {}: [{}]",
            levels.len(),
            levels.join(", ")
        )));
    }
    Ok(())
}

/// Runs `analysis` on `tables` as described by `spec`.
pub fn run(analysis: Analysis, spec: &AnalysisSpec, tables: &StudyTables, scores: Option<&MdsiScores>) -> Result<Report> {
    if analysis == Analysis::Confusion {
        let c = classification_confusion(&tables.guesses)?;
        return Ok(Report {
            analysis: analysis.to_string(),
            n: tables.guesses.len(),
            levels: c.labels.iter().map(|s| s.to_string()).collect(),
            result: ReportBody::Confusion(c),
        });
    }
    let frame = Frame::new(tables, spec.table, scores).filter(&spec.filter)?;
    if frame.is_empty() {
        return Err(Error::InsufficientData("no rows match the filter".into()));
    }
    let report = |n, levels, result| Report {
        analysis: analysis.to_string(),
        n,
        levels,
        result,
    };
    match analysis {
        Analysis::Wilcoxon | Analysis::PairedT | Analysis::Friedman | Analysis::Conover => {
            let field = require(&spec.within, "within", analysis)?;
            let levels = frame.levels_of(field, spec.levels.as_ref())?;
            let (subjects, m) = frame.within_matrix(field, &levels)?;
            let col = |j: usize| m.iter().map(|r| r[j]).collect::<Vec<f64>>();
            let body = match analysis {
                Analysis::Wilcoxon => {
                    two_levels(&levels, analysis)?;
                    ReportBody::Test(wilcoxon_signed_rank(&col(0), &col(1), spec.mode)?)
                }
                Analysis::PairedT => {
                    two_levels(&levels, analysis)?;
                    ReportBody::Test(paired_t(&col(0), &col(1))?)
                }
                Analysis::Friedman => ReportBody::Test(friedman(&m, spec.mode)?),
                _ => ReportBody::Pairwise(durbin_conover_posthoc(&m)?),
            };
            Ok(report(subjects.len(), levels, body))
        }
        Analysis::MannWhitney | Analysis::WelchT | Analysis::Yuen => {
            let field = require(&spec.between, "between", analysis)?;
            let levels = frame.levels_of(field, spec.levels.as_ref())?;
            two_levels(&levels, analysis)?;
            let g = frame.between_groups(field, &levels)?;
            let result = match analysis {
                Analysis::MannWhitney => mann_whitney_u(&g[0], &g[1], spec.mode)?,
                Analysis::WelchT => welch_t(&g[0], &g[1])?,
                _ => yuen_welch(&g[0], &g[1], spec.trim.unwrap_or(DEFAULT_TRIM))?,
            };
            Ok(report(g[0].len() + g[1].len(), levels, ReportBody::Test(result)))
        }
        Analysis::PartialPearson => {
            let x = frame.column(require(&spec.x, "x", analysis)?)?;
            let y = frame.column(require(&spec.y, "y", analysis)?)?;
            let cov = spec
                .covariates
                .iter()
                .map(|c| frame.column(c))
                .collect::<Result<Vec<_>>>()?;
            let r = partial_pearson(&x, &y, &cov, spec.tails)?;
            Ok(report(x.len(), Vec::new(), ReportBody::Test(r)))
        }
        Analysis::Hierarchical => {
            let outcome_name = spec.outcome.as_deref().unwrap_or(frame.value_name);
            let outcome = frame.column(outcome_name)?;
            let (model, screened_out) = hierarchical_from_spec(&frame, &outcome, &spec.blocks, spec.screen_alpha)?;
            Ok(report(
                outcome.len(),
                Vec::new(),
                ReportBody::Hierarchical { model, screened_out },
            ))
        }
        Analysis::Descriptives => {
            let group_by: Vec<&str> = spec.group_by.iter().map(String::as_str).collect();
            let cells = match spec.table {
                TableKind::Ondrive => descriptives(&filtered(&tables.ondrive, &frame, spec)?, &group_by)?,
                TableKind::PostRide => descriptives(&filtered(&tables.post_ride, &frame, spec)?, &group_by)?,
            };
            Ok(report(frame.len(), spec.group_by.clone(), ReportBody::Descriptives(cells)))
        }
        Analysis::Confusion => unreachable!("handled above"),
    }
}

/// Rows of `rows` passing the spec filter, for the typed descriptives path.
fn filtered<T: crate::dataset::Grouped + Clone>(rows: &[T], frame: &Frame, spec: &AnalysisSpec) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for r in rows {
        let mut ok = true;
        for (field, level) in &spec.filter {
            let v = match r.field(field) {
                Some(v) => v,
                None if field == "gender" => {
                    let s = r.field("subject").expect("subject field");
                    frame
                        .subjects
                        .get(s.as_str())
                        .and_then(|s| s.gender.clone())
                        .unwrap_or_default()
                }
                None => return Err(Error::validation(format!("unknown field '{field}'"))),
            };
            ok &= v == *level;
        }
        if ok {
            out.push(r.clone());
        }
    }
    Ok(out)
}

/// Enters `blocks` in order, screening flagged blocks first. Blocks whose
/// predictors are all screened out are skipped.
pub fn hierarchical_from_spec(
    frame: &Frame,
    outcome: &[f64],
    blocks: &[BlockSpec],
    alpha: Option<f64>,
) -> Result<(HierModel, BTreeMap<String, Vec<String>>)> {
    if blocks.is_empty() {
        return Err(Error::validation("hierarchical needs at least one [[blocks]] entry"));
    }
    let alpha = alpha.unwrap_or(DEFAULT_SCREEN_ALPHA);
    let mut included: Vec<Predictor> = Vec::new();
    let mut entered = Vec::new();
    let mut screened_out = BTreeMap::new();
    for b in blocks {
        let candidates = b
            .predictors
            .iter()
            .map(|p| Ok(Predictor::new(p.clone(), frame.column(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let keep = if b.screen {
            screen_predictors(outcome, &included, &candidates, alpha)?
        } else {
            (0..candidates.len()).collect()
        };
        let dropped: Vec<String> = (0..candidates.len())
            .filter(|i| !keep.contains(i))
            .map(|i| candidates[i].name.clone())
            .collect();
        if !dropped.is_empty() {
            screened_out.insert(b.name.clone(), dropped);
        }
        let kept: Vec<Predictor> = keep.iter().map(|&i| candidates[i].clone()).collect();
        if kept.is_empty() {
            continue;
        }
        included.extend(kept.iter().cloned());
        entered.push(Block {
            name: b.name.clone(),
            predictors: kept,
        });
    }
    if entered.is_empty() {
        return Err(Error::InsufficientData("screening removed every predictor".into()));
    }
    Ok((hierarchical_regression(outcome, &entered)?, screened_out))
}
