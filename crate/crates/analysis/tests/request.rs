use std::path::{Path, PathBuf};

use drivestyle_analysis::dataset::{
    ColumnMap, Guess, Inventory, MdsiItem, OnDrive, PostRide, Road, Style, StudyTables, Subject, Traffic, Weather,
};
use drivestyle_analysis::mdsi::{LoadingConfig, MDSI_ITEMS};
use drivestyle_analysis::request::{run, Analysis, AnalysisSpec, ReportBody};
use drivestyle_analysis::stats::{friedman, mann_whitney_u, Mode};
use drivestyle_analysis::study::{inventory_alpha, reproduce, StudyConfig, StudyInputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/study")
}

fn tables() -> StudyTables {
    StudyTables::ingest(&fixture(), &ColumnMap::canonical()).unwrap()
}

fn spec(text: &str) -> AnalysisSpec {
    AnalysisSpec::from_toml(text).unwrap()
}

fn test_result(body: &ReportBody) -> &drivestyle_analysis::stats::TestResult {
    match body {
        ReportBody::Test(t) => t,
        other => panic!("expected a test result, got {other:?}"),
    }
}

#[test]
fn friedman_request_matches_direct_call() {
    let t = tables();
    let s = spec(
        r#"
        table = "post_ride"
        within = "style"
        filter = { inventory = "tia", item = "system_failure" }
        "#,
    );
    let r = run(Analysis::Friedman, &s, &t, None).unwrap();
    assert_eq!(r.n, 3);
    assert_eq!(r.levels, ["passive", "rail", "replay", "sportive"]);
    // per-subject means over dry and rain, by hand from the fixture formula
    // 1 + (style + subject + weather) % 5
    let cell = |k: usize, si: usize| ((1 + (k + si) % 5) + (1 + (k + si + 1) % 5)) as f64 / 2.0;
    let data: Vec<Vec<f64>> = (0..3).map(|si| (0..4).map(|k| cell(k, si)).collect()).collect();
    assert_eq!(test_result(&r.result), &friedman(&data, Mode::Auto).unwrap());
}

#[test]
fn between_groups_pool_rows() {
    let t = tables();
    let s = spec(
        r#"
        between = "weather"
        mode = "approx"
        "#,
    );
    let r = run(Analysis::MannWhitney, &s, &t, None).unwrap();
    let dry: Vec<f64> = t.ondrive.iter().filter(|r| r.weather == Weather::Dry).map(|r| r.relaxation).collect();
    let rain: Vec<f64> = t.ondrive.iter().filter(|r| r.weather == Weather::Rain).map(|r| r.relaxation).collect();
    assert_eq!(r.n, 48);
    assert_eq!(test_result(&r.result), &mann_whitney_u(&dry, &rain, Mode::Approx).unwrap());

    let r = run(Analysis::Yuen, &s, &t, None).unwrap();
    assert!(test_result(&r.result).statistic > 0.0);
}

#[test]
fn wilcoxon_needs_two_levels() {
    let t = tables();
    let err = run(Analysis::Wilcoxon, &spec("within = \"style\""), &t, None).unwrap_err();
    assert!(err.to_string().contains("exactly two"), "{err}");
    let ok = run(
        Analysis::Wilcoxon,
        &spec("within = \"weather\"\nfilter = { style = \"sportive\" }"),
        &t,
        None,
    )
    .unwrap();
    // rain is 0.5 lower for everyone: all differences positive
    assert_eq!(test_result(&ok.result).statistic, 6.0);
}

#[test]
fn indicators_and_subject_attributes_resolve() {
    let t = tables();
    let s = spec(
        r#"
        x = "relaxation"
        y = "traffic=oncoming"
        covariates = ["age", "gender=female"]
        "#,
    );
    let r = run(Analysis::PartialPearson, &s, &t, None).unwrap();
    let res = test_result(&r.result);
    assert!(res.statistic < 0.0);
    assert_eq!(r.n, 48);

    let missing = spec("x = \"angry\"\ny = \"relaxation\"");
    let err = run(Analysis::PartialPearson, &missing, &t, None).unwrap_err();
    assert!(err.to_string().contains("MDSI"), "{err}");
}

#[test]
fn hierarchical_request_on_fixture() {
    let t = tables();
    let s = spec(
        r#"
        outcome = "relaxation"
        [[blocks]]
        name = "context"
        predictors = ["weather=rain", "traffic=oncoming"]
        [[blocks]]
        name = "style"
        predictors = ["style=rail", "style=replay", "style=sportive"]
        "#,
    );
    let r = run(Analysis::Hierarchical, &s, &t, None).unwrap();
    let ReportBody::Hierarchical { model, .. } = &r.result else { panic!() };
    assert_eq!(model.steps.len(), 2);
    assert!(model.steps[1].r2 >= model.steps[0].r2);
}

#[test]
fn descriptives_and_confusion_requests() {
    let t = tables();
    let r = run(
        Analysis::Descriptives,
        &spec("group_by = [\"style\"]\nfilter = { weather = \"dry\" }"),
        &t,
        None,
    )
    .unwrap();
    let ReportBody::Descriptives(cells) = &r.result else { panic!() };
    assert_eq!(cells.len(), 4);
    assert_eq!(cells[0].n, 6);
    let r = run(Analysis::Confusion, &AnalysisSpec::default(), &t, None).unwrap();
    assert_eq!(r.n, 10);
}

#[test]
fn unknown_spec_keys_rejected() {
    assert!(AnalysisSpec::from_toml("whithin = \"style\"").is_err());
    assert!("anova".parse::<Analysis>().is_err());
}

#[test]
fn reproduce_on_fixture_skips_what_it_cannot_compute() {
    let inputs = StudyInputs::load(&fixture()).unwrap();
    let rep = reproduce(&inputs);
    assert!(rep.tia_alpha.value.is_some());
    // the fixture's ARCA inventory has a single item
    assert!(rep.arca_alpha.skipped.as_ref().unwrap().contains("insufficient-data"));
    assert!(rep.system_failure_friedman.value.as_ref().unwrap().df.is_some());
    assert_eq!(rep.ondrive_passive_dry.value.as_ref().unwrap().n, 6);
    assert!(rep.hierarchical.value.is_none());
    assert!(rep.hierarchical.skipped.as_ref().unwrap().contains("mdsi_loadings.csv"));
    let direct = inventory_alpha(&inputs.tables, Inventory::Tia).unwrap();
    assert_eq!(rep.tia_alpha.value, Some(direct));
}

/// A complete synthetic study: 32 subjects, full factorial rides.
fn synthetic_study(seed: u64) -> (StudyTables, LoadingConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = StudyTables::default();
    for s in 0..32 {
        let id = format!("P{s:02}");
        t.subjects.push(Subject {
            subject: id.clone(),
            age: Some(rng.random_range(20.0..60.0f64).round()),
            gender: Some(if s % 2 == 0 { "female".into() } else { "male".into() }),
            license_years: None,
        });
        let trait_level: f64 = rng.random_range(-1.0..1.0);
        for item in 1..=MDSI_ITEMS {
            let base = if item <= 8 { 3.5 + 2.0 * trait_level } else { 3.5 };
            let r = (base + rng.random_range(-1.5..1.5f64)).round().clamp(1.0, 6.0) as u8;
            t.mdsi_items.push(MdsiItem { subject: id.clone(), item, response: r });
        }
        for (k, &style) in Style::ALL.iter().enumerate() {
            for &weather in Weather::ALL {
                for inv in [Inventory::Tia, Inventory::Arca] {
                    for item in ["a", "b", "c"] {
                        let response = match inv {
                            Inventory::Tia => rng.random_range(1..=5) as f64,
                            Inventory::Arca => rng.random_range(0..=10) as f64,
                        };
                        t.post_ride.push(PostRide {
                            subject: id.clone(),
                            style,
                            weather,
                            inventory: inv,
                            item: item.into(),
                            response,
                        });
                    }
                }
                for &traffic in Traffic::ALL {
                    for &road in Road::ALL {
                        let relaxation = 2.0 - 0.6 * k as f64 - 0.8 * trait_level
                            - if traffic == Traffic::Oncoming { 0.4 } else { 0.0 }
                            + rng.random_range(-1.0..1.0);
                        t.ondrive.push(OnDrive {
                            subject: id.clone(),
                            style,
                            weather,
                            traffic,
                            road,
                            relaxation,
                        });
                    }
                }
                t.guesses.push(Guess {
                    subject: id.clone(),
                    presented_style: style,
                    guessed_style: Style::ALL[rng.random_range(0..4)],
                });
            }
        }
    }
    let mut loadings = vec![[0.0; 6]; MDSI_ITEMS];
    for (i, row) in loadings.iter_mut().enumerate() {
        row[if i < 8 { 1 } else { i % 6 }] = 0.6;
    }
    (t, LoadingConfig::new(loadings, None, Default::default()).unwrap())
}

#[test]
fn reproduce_runs_the_full_model_on_synthetic_study() {
    let (tables, loadings) = synthetic_study(4);
    let inputs = StudyInputs {
        tables,
        loadings: Some(loadings),
        config: StudyConfig::default(),
    };
    let rep = reproduce(&inputs);
    let model = rep.hierarchical.value.as_ref().unwrap_or_else(|| panic!("{:?}", rep.hierarchical.skipped));
    assert_eq!(model.steps[0].block, "demographics");
    assert_eq!(model.steps.last().unwrap().block, "style");
    assert!(model.steps.windows(2).all(|w| w[1].r2 >= w[0].r2));
    // the style effect is strong by construction
    assert!(model.steps.last().unwrap().delta_r2 > 0.1);
    assert!(!rep.screened_out.get("context").is_some_and(|d| d.contains(&"traffic=oncoming".to_string())));
    assert_eq!(rep.row_counts["subjects"], 32);
}
