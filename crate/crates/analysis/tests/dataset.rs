use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use drivestyle_analysis::dataset::{
    classification_confusion, confusion_from_labels, descriptives, ColumnMap, Guess, OnDrive, Road, Style,
    StudyTables, Traffic, Weather,
};
use drivestyle_analysis::mdsi::MDSI_ITEMS;
use proptest::prelude::*;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/study")
}

fn load() -> StudyTables {
    StudyTables::ingest(&fixture(), &ColumnMap::canonical()).unwrap()
}

#[test]
fn fixture_ingests() {
    let t = load();
    assert_eq!(t.subjects.len(), 3);
    assert_eq!(t.mdsi_items.len(), 3 * MDSI_ITEMS);
    assert_eq!(t.row_counts()["ondrive"], 48);
    let r = t.mdsi_responses(BTreeSet::new()).unwrap();
    assert_eq!(r.subjects(), ["S01", "S02", "S03"]);
}

#[test]
fn export_then_ingest_is_identity() {
    let t = load();
    let dir = tempfile::tempdir().unwrap();
    t.export(dir.path()).unwrap();
    let back = StudyTables::ingest(dir.path(), &ColumnMap::canonical()).unwrap();
    assert_eq!(back, t);
    let again = tempfile::tempdir().unwrap();
    back.export(again.path()).unwrap();
    for f in ["subjects.csv", "mdsi_items.csv", "post_ride.csv", "ondrive.csv", "guesses.csv"] {
        let a = std::fs::read(dir.path().join(f)).unwrap();
        let b = std::fs::read(again.path().join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

fn copy_fixture_with(edit: impl Fn(&str, String) -> String) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture()).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(dir.path().join(&name), edit(&name, text)).unwrap();
    }
    dir
}

#[test]
fn tia_response_of_six_names_the_row() {
    let dir = copy_fixture_with(|name, text| {
        if name == "post_ride.csv" {
            text.replacen("S01,passive,dry,tia,reliability,5", "S01,passive,dry,tia,reliability,6", 1)
        } else {
            text
        }
    });
    let err = StudyTables::ingest(dir.path(), &ColumnMap::canonical()).unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.category(), "validation");
    assert!(msg.contains("post_ride row at line 3") && msg.contains("TiA"), "{msg}");
}

#[test]
fn vocabulary_and_duplicates_rejected() {
    let dir = copy_fixture_with(|name, text| {
        if name == "ondrive.csv" {
            text.replacen("S01,passive,dry,clear", "S01,passive,foggy,clear", 1)
        } else {
            text
        }
    });
    let msg = StudyTables::ingest(dir.path(), &ColumnMap::canonical()).unwrap_err().to_string();
    assert!(msg.contains("line 2") && msg.contains("foggy"), "{msg}");

    let dir = copy_fixture_with(|name, text| if name == "subjects.csv" { text + "S02,30,male,3\n" } else { text });
    let msg = StudyTables::ingest(dir.path(), &ColumnMap::canonical()).unwrap_err().to_string();
    assert!(msg.contains("duplicate"), "{msg}");
}

#[test]
fn column_map_adapts_renamed_headers_and_labels() {
    let dir = copy_fixture_with(|name, text| {
        if name == "ondrive.csv" {
            text.replacen("relaxation", "Entspannung", 1).replace(",rain,", ",Regen,")
        } else {
            text
        }
    });
    let mut map = ColumnMap::canonical();
    map.ondrive.relaxation = "Entspannung".into();
    map.aliases.insert("regen".into(), "rain".into());
    map.subjects.license_years = String::new();
    let t = StudyTables::ingest(dir.path(), &map).unwrap();
    assert_eq!(t.ondrive, load().ondrive);
    assert!(t.subjects.iter().all(|s| s.license_years.is_none()));

    let mut map = ColumnMap::canonical();
    map.ondrive.relaxation = String::new();
    assert!(StudyTables::ingest(&fixture(), &map).is_err());
}

#[test]
fn confusion_of_ten_guesses_by_hand() {
    let c = classification_confusion(&load().guesses).unwrap();
    // presented passive: 2 passive, 1 rail; rail: 1 passive, 1 rail;
    // replay: 1 replay, 1 sportive; sportive: 3 sportive
    assert_eq!(c.counts, [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 3]]);
    assert_eq!(c.diagonal(), [Some(2.0 / 3.0), Some(0.5), Some(0.5), Some(1.0)]);
}

#[test]
fn all_correct_is_identity_and_unknown_labels_fail() {
    let pairs: Vec<(&str, &str)> = ["passive", "rail", "replay", "sportive"].iter().map(|s| (*s, *s)).collect();
    let c = confusion_from_labels(&pairs).unwrap();
    for i in 0..4 {
        let row = c.rates[i].unwrap();
        for j in 0..4 {
            assert_eq!(row[j], if i == j { 1.0 } else { 0.0 });
        }
    }
    assert!(confusion_from_labels(&[("passive", "cautious")]).is_err());
    assert!(classification_confusion(&[]).is_err());
}

#[test]
fn ondrive_descriptives_by_hand() {
    let t = load();
    let cells = descriptives(&t.ondrive, &["style", "weather"]).unwrap();
    let c = cells.iter().find(|c| c.key == ["passive", "dry"]).unwrap();
    // S01 {2, 1}, S02 {2.5, 1.5}, S03 {1.75, 0.75}
    let v = [2.0, 1.0, 2.5, 1.5, 1.75, 0.75];
    let mean = 9.5 / 6.0;
    let ss: f64 = v.iter().map(|x: &f64| (x - mean).powi(2)).sum();
    assert_eq!(c.n, 6);
    assert!((c.mean - mean).abs() < 1e-15);
    assert!((c.sd.unwrap() - (ss / 5.0).sqrt()).abs() < 1e-15);
    assert_eq!(cells.len(), 8);
    assert!(descriptives(&t.ondrive, &["mood"]).is_err());
}

fn ondrive_row() -> impl Strategy<Value = OnDrive> {
    (0usize..4, 0usize..2, 0usize..2, 0usize..2, -3.0f64..3.0, 0u8..5).prop_map(|(s, w, t, r, v, subj)| OnDrive {
        subject: format!("S{subj}"),
        style: Style::ALL[s],
        weather: Weather::ALL[w],
        traffic: Traffic::ALL[t],
        road: Road::ALL[r],
        relaxation: v,
    })
}

proptest! {
    #[test]
    fn descriptives_ignore_row_order(rows in prop::collection::vec(ondrive_row(), 1..60), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        // deterministic Fisher-Yates driven by the seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let a = descriptives(&rows, &["style", "traffic"]).unwrap();
        let b = descriptives(&shuffled, &["style", "traffic"]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn confusion_rows_sum_to_one(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80)) {
        let guesses: Vec<Guess> = pairs
            .iter()
            .map(|&(p, g)| Guess { subject: "x".into(), presented_style: Style::ALL[p], guessed_style: Style::ALL[g] })
            .collect();
        let c = classification_confusion(&guesses).unwrap();
        for row in c.rates.iter().flatten() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
