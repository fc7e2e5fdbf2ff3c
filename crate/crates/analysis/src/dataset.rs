//! Study dataset ingestion into canonical tables, plus descriptive
//! summaries (classification confusion, per-cell means and SDs).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdsi::{ItemResponses, MDSI_ITEMS};

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::validation(format!(
                        "'{other}' is not a {} (expected one of {})",
                        stringify!($name).to_lowercase(),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

vocabulary!(
    /// Presented driving style; also the confusion-matrix order.
    Style { Passive => "passive", Rail => "rail", Replay => "replay", Sportive => "sportive" }
);
vocabulary!(Weather { Dry => "dry", Rain => "rain" });
vocabulary!(Inventory { Tia => "tia", Arca => "arca" });
vocabulary!(Traffic { Clear => "clear", Oncoming => "oncoming" });
vocabulary!(Road { Straight => "straight", Curve => "curve" });

pub const TIA_RANGE: (f64, f64) = (1.0, 5.0);
pub const ARCA_RANGE: (f64, f64) = (0.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub subject: String,
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub license_years: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsiItem {
    pub subject: String,
    pub item: usize,
    pub response: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRide {
    pub subject: String,
    pub style: Style,
    pub weather: Weather,
    pub inventory: Inventory,
    pub item: String,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnDrive {
    pub subject: String,
    pub style: Style,
    pub weather: Weather,
    pub traffic: Traffic,
    pub road: Road,
    pub relaxation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guess {
    pub subject: String,
    pub presented_style: Style,
    pub guessed_style: Style,
}

/// Source file and column names for one table; `""` marks a field the
/// source does not provide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectsMap {
    pub file: String,
    pub subject: String,
    pub age: String,
    pub gender: String,
    pub license_years: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdsiItemsMap {
    pub file: String,
    pub subject: String,
    pub item: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRideMap {
    pub file: String,
    pub subject: String,
    pub style: String,
    pub weather: String,
    pub inventory: String,
    pub item: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnDriveMap {
    pub file: String,
    pub subject: String,
    pub style: String,
    pub weather: String,
    pub traffic: String,
    pub road: String,
    pub relaxation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessesMap {
    pub file: String,
    pub subject: String,
    pub presented_style: String,
    pub guessed_style: String,
}

/// Where each canonical field lives in the source files. Every field must
/// be present in the map file, either naming a column or set to `""`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub subjects: SubjectsMap,
    pub mdsi_items: MdsiItemsMap,
    pub post_ride: PostRideMap,
    pub ondrive: OnDriveMap,
    pub guesses: GuessesMap,
    /// Source vocabulary spellings mapped to canonical labels, matched
    /// case-insensitively, e.g. `"Regen" = "rain"`.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl ColumnMap {
    /// The layout written by [`StudyTables::export`].
    pub fn canonical() -> Self {
        let s = |v: &str| v.to_string();
        ColumnMap {
            subjects: SubjectsMap {
                file: s("subjects.csv"),
                subject: s("subject"),
                age: s("age"),
                gender: s("gender"),
                license_years: s("license_years"),
            },
            mdsi_items: MdsiItemsMap {
                file: s("mdsi_items.csv"),
                subject: s("subject"),
                item: s("item"),
                response: s("response"),
            },
            post_ride: PostRideMap {
                file: s("post_ride.csv"),
                subject: s("subject"),
                style: s("style"),
                weather: s("weather"),
                inventory: s("inventory"),
                item: s("item"),
                response: s("response"),
            },
            ondrive: OnDriveMap {
                file: s("ondrive.csv"),
                subject: s("subject"),
                style: s("style"),
                weather: s("weather"),
                traffic: s("traffic"),
                road: s("road"),
                relaxation: s("relaxation"),
            },
            guesses: GuessesMap {
                file: s("guesses.csv"),
                subject: s("subject"),
                presented_style: s("presented_style"),
                guessed_style: s("guessed_style"),
            },
            aliases: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("column map serializes")
    }
}

/// One source file opened through the column map.
struct Source {
    table: &'static str,
    rows: Vec<(u64, Vec<String>)>,
}

impl Source {
    /// Reads `columns` (canonical name, source name, required) from `file`.
    /// Unmapped optional columns come back as empty strings.
    fn open(dir: &Path, table: &'static str, file: &str, columns: &[(&str, &str, bool)]) -> Result<Option<Self>> {
        if file.is_empty() {
            return Ok(None);
        }
        let mut rdr = csv::Reader::from_path(dir.join(file))?;
        let headers = rdr.headers()?.clone();
        let mut idx = Vec::with_capacity(columns.len());
        for &(canonical, source, required) in columns {
            if source.is_empty() {
                if required {
                    return Err(Error::validation(format!(
                        "{table}: required field '{canonical}' is not mapped"
                    )));
                }
                idx.push(None);
                continue;
            }
            let i = headers.iter().position(|h| h.trim() == source).ok_or_else(|| {
                Error::validation(format!("{table}: {file} has no column '{source}' (for '{canonical}')"))
            })?;
            idx.push(Some(i));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let vals = idx
                .iter()
                .map(|i| i.map_or(String::new(), |i| rec.get(i).unwrap_or("").trim().to_string()))
                .collect();
            rows.push((line, vals));
        }
        Ok(Some(Source { table, rows }))
    }
}

struct Parser<'a> {
    aliases: BTreeMap<String, &'a str>,
}

impl<'a> Parser<'a> {
    fn new(map: &'a ColumnMap) -> Self {
        Parser {
            aliases: map
                .aliases
                .iter()
                .map(|(k, v)| (k.trim().to_lowercase(), v.as_str()))
                .collect(),
        }
    }

    fn err(table: &str, line: u64, msg: impl fmt::Display) -> Error {
        Error::validation(format!("{table} row at line {line}: {msg}"))
    }

    fn label<T: FromStr<Err = Error>>(&self, table: &str, line: u64, raw: &str) -> Result<T> {
        let key = raw.to_lowercase();
        let canonical = self.aliases.get(&key).copied().unwrap_or(&key);
        canonical.parse().map_err(|e: Error| Self::err(table, line, e))
    }

    fn number(table: &str, line: u64, field: &str, raw: &str) -> Result<f64> {
        let v: f64 = raw
            .parse()
            .map_err(|_| Self::err(table, line, format!("{field} '{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(Self::err(table, line, format!("{field} is not finite")));
        }
        Ok(v)
    }

    fn optional_number(table: &str, line: u64, field: &str, raw: &str) -> Result<Option<f64>> {
        if raw.is_empty() {
            Ok(None)
        } else {
            Self::number(table, line, field, raw).map(Some)
        }
    }

    fn key(table: &str, line: u64, raw: &str) -> Result<String> {
        if raw.is_empty() {
            return Err(Self::err(table, line, "empty subject id"));
        }
        Ok(raw.to_string())
    }
}

fn check_unique<K: Ord + fmt::Debug>(seen: &mut BTreeSet<K>, key: K, table: &str, line: u64) -> Result<()> {
    if seen.contains(&key) {
        return Err(Parser::err(table, line, format!("duplicate key {key:?}")));
    }
    seen.insert(key);
    Ok(())
}

/// The five canonical tables of the study.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyTables {
    pub subjects: Vec<Subject>,
    pub mdsi_items: Vec<MdsiItem>,
    pub post_ride: Vec<PostRide>,
    pub ondrive: Vec<OnDrive>,
    pub guesses: Vec<Guess>,
}

impl StudyTables {
    /// Reads and validates every mapped table under `dir`.
    pub fn ingest(dir: &Path, map: &ColumnMap) -> Result<Self> {
        let p = Parser::new(map);
        let mut t = StudyTables::default();

        let m = &map.subjects;
        if let Some(src) = Source::open(
            dir,
            "subjects",
            &m.file,
            &[
                ("subject", &m.subject, true),
                ("age", &m.age, false),
                ("gender", &m.gender, false),
                ("license_years", &m.license_years, false),
            ],
        )? {
            let mut seen = BTreeSet::new();
            for (line, v) in src.rows {
                let subject = Parser::key(src.table, line, &v[0])?;
                check_unique(&mut seen, subject.clone(), src.table, line)?;
                t.subjects.push(Subject {
                    subject,
                    age: Parser::optional_number(src.table, line, "age", &v[1])?,
                    gender: (!v[2].is_empty()).then(|| v[2].to_lowercase()),
                    license_years: Parser::optional_number(src.table, line, "license_years", &v[3])?,
                });
            }
        }

        let m = &map.mdsi_items;
        if let Some(src) = Source::open(
            dir,
            "mdsi_items",
            &m.file,
            &[("subject", &m.subject, true), ("item", &m.item, true), ("response", &m.response, true)],
        )? {
            let mut seen = BTreeSet::new();
            for (line, v) in src.rows {
                let subject = Parser::key(src.table, line, &v[0])?;
                let item: usize = v[1]
                    .parse()
                    .ok()
                    .filter(|i| (1..=MDSI_ITEMS).contains(i))
                    .ok_or_else(|| Parser::err(src.table, line, format!("item '{}' outside 1..={MDSI_ITEMS}", v[1])))?;
                let response: u8 = v[2]
                    .parse()
                    .ok()
                    .filter(|r| (1..=6).contains(r))
                    .ok_or_else(|| Parser::err(src.table, line, format!("MDSI response '{}' is not an integer in 1..=6", v[2])))?;
                check_unique(&mut seen, (subject.clone(), item), src.table, line)?;
                t.mdsi_items.push(MdsiItem { subject, item, response });
            }
        }

        let m = &map.post_ride;
        if let Some(src) = Source::open(
            dir,
            "post_ride",
            &m.file,
            &[
                ("subject", &m.subject, true),
                ("style", &m.style, true),
                ("weather", &m.weather, true),
                ("inventory", &m.inventory, true),
                ("item", &m.item, true),
                ("response", &m.response, true),
            ],
        )? {
            let mut seen = BTreeSet::new();
            for (line, v) in src.rows {
                let row = PostRide {
                    subject: Parser::key(src.table, line, &v[0])?,
                    style: p.label(src.table, line, &v[1])?,
                    weather: p.label(src.table, line, &v[2])?,
                    inventory: p.label(src.table, line, &v[3])?,
                    item: v[4].clone(),
                    response: Parser::number(src.table, line, "response", &v[5])?,
                };
                if row.item.is_empty() {
                    return Err(Parser::err(src.table, line, "empty item"));
                }
                let r = row.response;
                match row.inventory {
                    Inventory::Tia if r.fract() != 0.0 || !(TIA_RANGE.0..=TIA_RANGE.1).contains(&r) => {
                        return Err(Parser::err(src.table, line, format!("TiA response {r} is not an integer in 1..=5")));
                    }
                    Inventory::Arca if !(ARCA_RANGE.0..=ARCA_RANGE.1).contains(&r) => {
                        return Err(Parser::err(src.table, line, format!("ARCA response {r} outside 0..=10")));
                    }
                    _ => {}
                }
                check_unique(
                    &mut seen,
                    (row.subject.clone(), row.style, row.weather, row.inventory, row.item.clone()),
                    src.table,
                    line,
                )?;
                t.post_ride.push(row);
            }
        }

        let m = &map.ondrive;
        if let Some(src) = Source::open(
            dir,
            "ondrive",
            &m.file,
            &[
                ("subject", &m.subject, true),
                ("style", &m.style, true),
                ("weather", &m.weather, true),
                ("traffic", &m.traffic, true),
                ("road", &m.road, true),
                ("relaxation", &m.relaxation, true),
            ],
        )? {
            // repeated responses per situation are legitimate here, so no key check
            for (line, v) in src.rows {
                t.ondrive.push(OnDrive {
                    subject: Parser::key(src.table, line, &v[0])?,
                    style: p.label(src.table, line, &v[1])?,
                    weather: p.label(src.table, line, &v[2])?,
                    traffic: p.label(src.table, line, &v[3])?,
                    road: p.label(src.table, line, &v[4])?,
                    relaxation: Parser::number(src.table, line, "relaxation", &v[5])?,
                });
            }
        }

        let m = &map.guesses;
        if let Some(src) = Source::open(
            dir,
            "guesses",
            &m.file,
            &[
                ("subject", &m.subject, true),
                ("presented_style", &m.presented_style, true),
                ("guessed_style", &m.guessed_style, true),
            ],
        )? {
            for (line, v) in src.rows {
                t.guesses.push(Guess {
                    subject: Parser::key(src.table, line, &v[0])?,
                    presented_style: p.label(src.table, line, &v[1])?,
                    guessed_style: p.label(src.table, line, &v[2])?,
                });
            }
        }

        t.check_subjects()?;
        Ok(t)
    }

    /// Every referenced subject must be listed when a subjects table exists.
    fn check_subjects(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Ok(());
        }
        let known: BTreeSet<&str> = self.subjects.iter().map(|s| s.subject.as_str()).collect();
        let referenced = self
            .mdsi_items
            .iter()
            .map(|r| ("mdsi_items", &r.subject))
            .chain(self.post_ride.iter().map(|r| ("post_ride", &r.subject)))
            .chain(self.ondrive.iter().map(|r| ("ondrive", &r.subject)))
            .chain(self.guesses.iter().map(|r| ("guesses", &r.subject)));
        for (table, s) in referenced {
            if !known.contains(s.as_str()) {
                return Err(Error::validation(format!("{table}: subject '{s}' is not in the subjects table")));
            }
        }
        Ok(())
    }

    pub fn row_counts(&self) -> BTreeMap<&'static str, usize> {
        BTreeMap::from([
            ("subjects", self.subjects.len()),
            ("mdsi_items", self.mdsi_items.len()),
            ("post_ride", self.post_ride.len()),
            ("ondrive", self.ondrive.len()),
            ("guesses", self.guesses.len()),
        ])
    }

    /// Writes the canonical CSVs named by [`ColumnMap::canonical`].
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let opt = |v: &Option<f64>| v.map_or(String::new(), |v| v.to_string());

        let mut w = csv::Writer::from_path(dir.join("subjects.csv"))?;
        w.write_record(["subject", "age", "gender", "license_years"])?;
        for r in &self.subjects {
            w.write_record([
                r.subject.clone(),
                opt(&r.age),
                r.gender.clone().unwrap_or_default(),
                opt(&r.license_years),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("mdsi_items.csv"))?;
        w.write_record(["subject", "item", "response"])?;
        for r in &self.mdsi_items {
            w.write_record([r.subject.clone(), r.item.to_string(), r.response.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("post_ride.csv"))?;
        w.write_record(["subject", "style", "weather", "inventory", "item", "response"])?;
        for r in &self.post_ride {
            w.write_record([
                r.subject.as_str(),
                r.style.as_str(),
                r.weather.as_str(),
                r.inventory.as_str(),
                &r.item,
                &r.response.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("ondrive.csv"))?;
        w.write_record(["subject", "style", "weather", "traffic", "road", "relaxation"])?;
        for r in &self.ondrive {
            w.write_record([
                r.subject.as_str(),
                r.style.as_str(),
                r.weather.as_str(),
                r.traffic.as_str(),
                r.road.as_str(),
                &r.relaxation.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("guesses.csv"))?;
        w.write_record(["subject", "presented_style", "guessed_style"])?;
        for r in &self.guesses {
            w.write_record([r.subject.as_str(), r.presented_style.as_str(), r.guessed_style.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// MDSI answers as a subjects × 44 matrix, subjects in first-seen order.
    pub fn mdsi_responses(&self, reverse_coded: BTreeSet<usize>) -> Result<ItemResponses> {
        let mut order = Vec::new();
        let mut rows: BTreeMap<&str, Vec<Option<u8>>> = BTreeMap::new();
        for r in &self.mdsi_items {
            let row = rows.entry(&r.subject).or_insert_with(|| {
                order.push(r.subject.clone());
                vec![None; MDSI_ITEMS]
            });
            row[r.item - 1] = Some(r.response);
        }
        let mut matrix = Vec::with_capacity(order.len());
        for s in &order {
            let row = &rows[s.as_str()];
            if let Some(i) = row.iter().position(Option::is_none) {
                return Err(Error::validation(format!("subject '{s}' lacks MDSI item {}", i + 1)));
            }
            matrix.push(row.iter().flatten().copied().collect());
        }
        ItemResponses::new(order, matrix, reverse_coded)
    }
}

/// Presented × guessed style counts with row rates, in [`Style::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confusion {
    pub labels: [Style; 4],
    pub counts: [[u64; 4]; 4],
    /// Row-normalized rates; `None` for a style that was never presented.
    pub rates: [Option<[f64; 4]>; 4],
}

impl Confusion {
    /// Correct-classification rate per presented style.
    pub fn diagonal(&self) -> [Option<f64>; 4] {
        std::array::from_fn(|i| self.rates[i].map(|r| r[i]))
    }
}

fn style_index(s: Style) -> usize {
    Style::ALL.iter().position(|&x| x == s).expect("closed vocabulary")
}

pub fn classification_confusion(guesses: &[Guess]) -> Result<Confusion> {
    if guesses.is_empty() {
        return Err(Error::InsufficientData("no style guesses".into()));
    }
    let mut counts = [[0u64; 4]; 4];
    for g in guesses {
        counts[style_index(g.presented_style)][style_index(g.guessed_style)] += 1;
    }
    let rates = std::array::from_fn(|i| {
        let total: u64 = counts[i].iter().sum();
        (total > 0).then(|| std::array::from_fn(|j| counts[i][j] as f64 / total as f64))
    });
    Ok(Confusion {
        labels: [Style::Passive, Style::Rail, Style::Replay, Style::Sportive],
        counts,
        rates,
    })
}

/// Confusion from raw label pairs, rejecting anything outside the style
/// vocabulary.
pub fn confusion_from_labels(pairs: &[(&str, &str)]) -> Result<Confusion> {
    let guesses = pairs
        .iter()
        .enumerate()
        .map(|(i, (p, g))| {
            let parse = |s: &str| s.parse::<Style>().map_err(|e| Error::validation(format!("guess {}: {e}", i + 1)));
            Ok(Guess {
                subject: String::new(),
                presented_style: parse(p)?,
                guessed_style: parse(g)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    classification_confusion(&guesses)
}

/// A row that can be grouped by named fields and summarized by one value.
pub trait Grouped {
    const FIELDS: &'static [&'static str];
    fn field(&self, name: &str) -> Option<String>;
    fn value(&self) -> f64;
}

impl Grouped for OnDrive {
    const FIELDS: &'static [&'static str] = &["subject", "style", "weather", "traffic", "road"];

    fn field(&self, name: &str) -> Option<String> {
        Some(match name {
            "subject" => self.subject.clone(),
            "style" => self.style.to_string(),
            "weather" => self.weather.to_string(),
            "traffic" => self.traffic.to_string(),
            "road" => self.road.to_string(),
            _ => return None,
        })
    }

    fn value(&self) -> f64 {
        self.relaxation
    }
}

impl Grouped for PostRide {
    const FIELDS: &'static [&'static str] = &["subject", "style", "weather", "inventory", "item"];

    fn field(&self, name: &str) -> Option<String> {
        Some(match name {
            "subject" => self.subject.clone(),
            "style" => self.style.to_string(),
            "weather" => self.weather.to_string(),
            "inventory" => self.inventory.to_string(),
            "item" => self.item.clone(),
            _ => return None,
        })
    }

    fn value(&self) -> f64 {
        self.response
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub key: Vec<String>,
    pub n: usize,
    pub mean: f64,
    /// Sample SD; `None` when the cell holds a single value.
    pub sd: Option<f64>,
}

/// Mean and sample SD per observed combination of `group_by` fields.
/// Cells without rows do not appear. Values are sorted before summing so
/// the result does not depend on row order.
pub fn descriptives<T: Grouped>(rows: &[T], group_by: &[&str]) -> Result<Vec<Cell>> {
    if let Some(bad) = group_by.iter().find(|f| !T::FIELDS.contains(f)) {
        return Err(Error::validation(format!(
            "cannot group by '{bad}' (fields: {})",
            T::FIELDS.join(", ")
        )));
    }
    let mut cells: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = group_by.iter().map(|f| r.field(f).expect("checked")).collect();
        cells.entry(key).or_default().push(r.value());
    }
    Ok(cells
        .into_iter()
        .map(|(key, mut v)| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd = (n > 1).then(|| {
                let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
                sq.sort_by(f64::total_cmp);
                (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
            });
            Cell { key, n, mean, sd }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_round_trip() {
        for s in Style::ALL {
            assert_eq!(s.as_str().parse::<Style>().unwrap(), *s);
        }
        assert!("Passive".parse::<Style>().is_err());
    }

    #[test]
    fn canonical_map_round_trips_through_toml() {
        let m = ColumnMap::canonical();
        assert_eq!(ColumnMap::from_toml(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn map_must_name_every_field() {
        let text = ColumnMap::canonical().to_toml().replace("license_years = \"license_years\"\n", "");
        assert!(matches!(ColumnMap::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn single_value_cell_has_no_sd() {
        let rows = [OnDrive {
            subject: "a".into(),
            style: Style::Rail,
            weather: Weather::Dry,
            traffic: Traffic::Clear,
            road: Road::Curve,
            relaxation: 1.5,
        }];
        let c = descriptives(&rows, &["style"]).unwrap();
        assert_eq!(c[0].mean, 1.5);
        assert_eq!(c[0].sd, None);
    }
}
