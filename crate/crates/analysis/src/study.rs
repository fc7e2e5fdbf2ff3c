//! One-shot reproduction of the study's dataset-dependent figures.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{classification_confusion, descriptives, Cell, ColumnMap, Confusion, Inventory, StudyTables};
use crate::error::{Error, Result};
use crate::mdsi::{cronbach_alpha, refined_factor_scores, LoadingConfig, MdsiScores, DEFAULT_RIDGE, FACTORS};
use crate::request::{hierarchical_from_spec, BlockSpec, Frame, TableKind};
use crate::stats::{friedman, HierModel, Mode, TestResult};

pub const COLUMN_MAP_FILE: &str = "columns.toml";
pub const LOADINGS_FILE: &str = "mdsi_loadings.csv";
pub const REFERENCE_CORRELATION_FILE: &str = "mdsi_reference_correlation.csv";
pub const STUDY_CONFIG_FILE: &str = "study.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Post-ride TiA item holding the System Failure rating.
    pub system_failure_item: String,
    pub ridge: f64,
    pub screen_alpha: f64,
    /// Gender level coded 1 in the demographic block.
    pub gender_indicator: Option<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            system_failure_item: "system_failure".into(),
            ridge: DEFAULT_RIDGE,
            screen_alpha: 0.05,
            gender_indicator: None,
        }
    }
}

/// A reproduced figure, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome<T> {
    pub value: Option<T>,
    pub skipped: Option<String>,
}

impl<T> Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome {
                value: Some(v),
                skipped: None,
            },
            Err(e) => Outcome {
                value: None,
                skipped: Some(format!("{} ({})", e, e.category())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub row_counts: BTreeMap<&'static str, usize>,
    pub tia_alpha: Outcome<f64>,
    pub arca_alpha: Outcome<f64>,
    pub system_failure_friedman: Outcome<TestResult>,
    pub confusion: Outcome<Confusion>,
    pub ondrive_passive_dry: Outcome<Cell>,
    pub ondrive_by_style_weather: Outcome<Vec<Cell>>,
    pub hierarchical: Outcome<HierModel>,
    pub screened_out: BTreeMap<String, Vec<String>>,
}

/// Inputs found in a data directory.
pub struct StudyInputs {
    pub tables: StudyTables,
    pub loadings: Option<LoadingConfig>,
    pub config: StudyConfig,
}

impl StudyInputs {
    /// Reads `columns.toml` (canonical layout when absent), the mapped
    /// tables, and the optional MDSI loadings and study config.
    pub fn load(dir: &Path) -> Result<Self> {
        let map_path = dir.join(COLUMN_MAP_FILE);
        let map = if map_path.exists() {
            ColumnMap::load(&map_path)?
        } else {
            ColumnMap::canonical()
        };
        let tables = StudyTables::ingest(dir, &map)?;
        let loadings = if dir.join(LOADINGS_FILE).exists() {
            let cfg = LoadingConfig::load(&dir.join(LOADINGS_FILE))?;
            let r_path = dir.join(REFERENCE_CORRELATION_FILE);
            Some(if r_path.exists() {
                cfg.with_reference_correlation(std::fs::File::open(r_path)?)?
            } else {
                cfg
            })
        } else {
            None
        };
        let cfg_path = dir.join(STUDY_CONFIG_FILE);
        let config = if cfg_path.exists() {
            toml::from_str(&std::fs::read_to_string(cfg_path)?).map_err(|e| Error::Config(e.to_string()))?
        } else {
            StudyConfig::default()
        };
        Ok(StudyInputs {
            tables,
            loadings,
            config,
        })
    }

    pub fn mdsi_scores(&self) -> Result<MdsiScores> {
        let cfg = self
            .loadings
            .as_ref()
            .ok_or_else(|| Error::InsufficientData(format!("no {LOADINGS_FILE} in the data directory")))?;
        let resp = self.tables.mdsi_responses(cfg.reverse_coded.clone())?;
        refined_factor_scores(&resp, cfg, self.config.ridge)
    }
}

/// Alpha over rides: one row per (subject, style, weather), one column per
/// item of `inventory`.
pub fn inventory_alpha(tables: &StudyTables, inventory: Inventory) -> Result<f64> {
    let mut items: Vec<&str> = Vec::new();
    let mut rides: BTreeMap<(&str, String, String), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in tables.post_ride.iter().filter(|r| r.inventory == inventory) {
        if !items.contains(&r.item.as_str()) {
            items.push(&r.item);
        }
        rides
            .entry((&r.subject, r.style.to_string(), r.weather.to_string()))
            .or_default()
            .insert(&r.item, r.response);
    }
    items.sort();
    let mut matrix = Vec::with_capacity(rides.len());
    for ((s, style, weather), answers) in &rides {
        let row: Option<Vec<f64>> = items.iter().map(|i| answers.get(i).copied()).collect();
        matrix.push(row.ok_or_else(|| {
            Error::validation(format!("{inventory} answers incomplete for {s}/{style}/{weather}"))
        })?);
    }
    cronbach_alpha(&matrix)
}

/// Blocks of the on-drive relaxation model: demographics, MDSI factors,
/// driving context and AV style (passive reference).
pub fn study_blocks(tables: &StudyTables, cfg: &StudyConfig) -> Result<Vec<BlockSpec>> {
    let gender = match &cfg.gender_indicator {
        Some(g) => g.clone(),
        None => tables
            .subjects
            .iter()
            .filter_map(|s| s.gender.clone())
            .min()
            .ok_or_else(|| Error::InsufficientData("no subject genders recorded".into()))?,
    };
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    Ok(vec![
        BlockSpec {
            name: "demographics".into(),
            predictors: vec!["age".into(), format!("gender={gender}")],
            screen: false,
        },
        BlockSpec {
            name: "mdsi".into(),
            predictors: names(&FACTORS),
            screen: true,
        },
        BlockSpec {
            name: "context".into(),
            predictors: names(&["weather=rain", "traffic=oncoming", "road=curve"]),
            screen: true,
        },
        BlockSpec {
            name: "style".into(),
            predictors: names(&["style=rail", "style=replay", "style=sportive"]),
            screen: false,
        },
    ])
}

pub fn reproduce(inputs: &StudyInputs) -> StudyReport {
    let t = &inputs.tables;
    let cfg = &inputs.config;

    let system_failure = (|| {
        let rows: Vec<_> = t
            .post_ride
            .iter()
            .filter(|r| r.inventory == Inventory::Tia && r.item == cfg.system_failure_item)
            .cloned()
            .collect();
        if rows.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no TiA rows for item '{}'",
                cfg.system_failure_item
            )));
        }
        // per-subject mean over weather, one column per style
        let cells = descriptives(&rows, &["subject", "style"])?;
        let mut by_subject: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for c in &cells {
            by_subject.entry(&c.key[0]).or_default().push(c.mean);
        }
        let data: Vec<Vec<f64>> = by_subject.into_values().collect();
        if data.iter().any(|r| r.len() != 4) {
            return Err(Error::validation("System Failure ratings missing for some style"));
        }
        friedman(&data, Mode::Approx)
    })();

    let by_cell = descriptives(&t.ondrive, &["style", "weather"]);
    let passive_dry = by_cell.as_ref().map_err(|e| Error::validation(e.to_string())).and_then(|cells| {
        cells
            .iter()
            .find(|c| c.key == ["passive", "dry"])
            .cloned()
            .ok_or_else(|| Error::InsufficientData("no passive/dry on-drive rows".into()))
    });

    let mut screened_out = BTreeMap::new();
    let hierarchical = (|| {
        let scores = inputs.mdsi_scores()?;
        let frame = Frame::new(t, TableKind::Ondrive, Some(&scores));
        let outcome = frame.column("relaxation")?;
        let blocks = study_blocks(t, cfg)?;
        let (model, dropped) = hierarchical_from_spec(&frame, &outcome, &blocks, Some(cfg.screen_alpha))?;
        screened_out = dropped;
        Ok(model)
    })();

    StudyReport {
        row_counts: t.row_counts(),
        tia_alpha: Outcome::from(inventory_alpha(t, Inventory::Tia)),
        arca_alpha: Outcome::from(inventory_alpha(t, Inventory::Arca)),
        system_failure_friedman: Outcome::from(system_failure),
        confusion: Outcome::from(classification_confusion(&t.guesses)),
        ondrive_passive_dry: Outcome::from(passive_dry),
        ondrive_by_style_weather: Outcome::from(by_cell),
        hierarchical: Outcome::from(hierarchical),
        screened_out,
    }
}
