use std::collections::BTreeSet;

use drivestyle_analysis::mdsi::{
    classify, cronbach_alpha, refined_factor_scores, regression_scores, ItemResponses, LoadingConfig, DEFAULT_RIDGE,
    FACTORS, MDSI_ITEMS,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn standardized(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    v.iter().map(|x| (x - m) / sd).collect()
}

/// Alpha from the item covariance matrix: k/(k-1) (1 - trace / total).
fn alpha_from_covariance(items: &[Vec<f64>]) -> f64 {
    let n = items.len() as f64;
    let k = items[0].len();
    let means: Vec<f64> = (0..k).map(|j| items.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let cov = |a: usize, b: usize| {
        items.iter().map(|r| (r[a] - means[a]) * (r[b] - means[b])).sum::<f64>() / (n - 1.0)
    };
    let trace: f64 = (0..k).map(|j| cov(j, j)).sum();
    let total: f64 = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| cov(a, b)).sum();
    k as f64 / (k as f64 - 1.0) * (1.0 - trace / total)
}

#[test]
fn alpha_three_by_two_by_hand() {
    // item variances 1 and 1, row sums 3, 3, 6 with variance 3
    let items = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 3.0]];
    assert!((cronbach_alpha(&items).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let shifted = vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0]];
    assert!((cronbach_alpha(&shifted).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn alpha_rejects_constant_totals() {
    let items = vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]];
    assert!(cronbach_alpha(&items).is_err());
}

#[test]
fn synthetic_two_factor_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 500;
    let sigma = 0.05;
    let f: Vec<[f64; 2]> = (0..n).map(|_| [z(&mut rng), z(&mut rng)]).collect();
    let data: Vec<Vec<f64>> = f
        .iter()
        .map(|fi| (0..6).map(|j| fi[j / 3] + sigma * z(&mut rng)).collect())
        .collect();
    // each item correlates 1/sqrt(1 + sigma^2) with its factor
    let l = 1.0 / (1.0 + sigma * sigma).sqrt();
    let loadings: Vec<Vec<f64>> = (0..6).map(|j| if j < 3 { vec![l, 0.0] } else { vec![0.0, l] }).collect();
    // model-implied item correlations: l^2 within a block, 0 across. The
    // sample matrix would amplify loading sampling error along the nearly
    // collinear item contrasts.
    let r_model: Vec<Vec<f64>> = (0..6)
        .map(|a| (0..6).map(|b| if a == b { 1.0 } else if a / 3 == b / 3 { l * l } else { 0.0 }).collect())
        .collect();
    let rms = |scores: &[Vec<f64>], factor: usize| {
        let truth = standardized(&f.iter().map(|r| r[factor]).collect::<Vec<_>>());
        (scores.iter().zip(&truth).map(|(s, t)| (s[factor] - t).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let scores = regression_scores(&data, &loadings, Some(&r_model), 0.0).unwrap();
    for factor in 0..2 {
        assert!(rms(&scores, factor) < 0.05, "factor {factor}: rms {}", rms(&scores, factor));
    }
}

#[test]
fn one_elevated_factor_decides_class() {
    for k in 0..6 {
        let mut s = [-0.3; 6];
        s[k] = 0.8;
        assert_eq!(classify(&s), k);
    }
}

fn responses() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (3usize..12).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(1u8..=6, MDSI_ITEMS), n))
}

fn named(rows: Vec<Vec<u8>>, reverse: BTreeSet<usize>) -> ItemResponses {
    let subjects = (0..rows.len()).map(|i| format!("p{i:02}")).collect();
    ItemResponses::new(subjects, rows, reverse).unwrap()
}

fn loadings_strategy() -> impl Strategy<Value = Vec<[f64; 6]>> {
    prop::collection::vec(prop::array::uniform6(-1.0f64..1.0), MDSI_ITEMS)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reverse_coding_is_an_involution(rows in responses(), rev in prop::collection::btree_set(1usize..=MDSI_ITEMS, 0..10)) {
        let r = named(rows, rev);
        prop_assert_eq!(r.reversed().reversed(), r.clone());
        for (a, b) in r.rows().iter().flatten().zip(r.reversed().rows().iter().flatten()) {
            prop_assert!((1..=6).contains(b));
            prop_assert!(a == b || a + b == 7);
        }
    }

    #[test]
    fn factor_scores_are_centered(rows in responses(), l in loadings_strategy()) {
        let cfg = LoadingConfig::new(l, None, BTreeSet::new()).unwrap();
        let s = refined_factor_scores(&named(rows, BTreeSet::new()), &cfg, DEFAULT_RIDGE).unwrap();
        for k in 0..6 {
            let m = s.scores.iter().map(|r| r[k]).sum::<f64>() / s.scores.len() as f64;
            prop_assert!(m.abs() < 1e-9, "factor {} mean {}", FACTORS[k], m);
        }
        for (i, sc) in s.scores.iter().enumerate() {
            prop_assert_eq!(s.style_class[i], classify(sc));
        }
    }

    #[test]
    fn class_ignores_common_shift(s in prop::array::uniform6(-3.0f64..3.0), c in -10.0f64..10.0) {
        let shifted = s.map(|v| v + c);
        // shifting can merge near-ties through rounding; only compare clear winners
        let best = classify(&s);
        prop_assume!(s.iter().enumerate().all(|(i, v)| i == best || s[best] - v > 1e-9));
        prop_assert_eq!(classify(&shifted), best);
    }

    #[test]
    fn scores_ignore_per_item_affine_rescaling(seed in any::<u64>(),
                                              scale in prop::collection::vec(0.1f64..20.0, 5),
                                              shift in prop::collection::vec(-50.0f64..50.0, 5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| z(&mut rng)).collect()).collect();
        let loadings: Vec<Vec<f64>> = (0..5).map(|j| vec![0.2 * j as f64, 1.0 - 0.1 * j as f64]).collect();
        let rescaled: Vec<Vec<f64>> = data
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| scale[j] * v + shift[j]).collect())
            .collect();
        let a = regression_scores(&data, &loadings, None, 0.0).unwrap();
        let b = regression_scores(&rescaled, &loadings, None, 0.0).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn alpha_matches_covariance_form(seed in any::<u64>(), n in 3usize..30, k in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let common = z(&mut rng);
                (0..k).map(|_| common + z(&mut rng)).collect()
            })
            .collect();
        let a = cronbach_alpha(&items).unwrap();
        prop_assert!((a - alpha_from_covariance(&items)).abs() < 1e-9);
        prop_assert!(a <= 1.0 + 1e-12);
    }
}

#[test]
fn identical_subjects_score_zero_with_any_loadings() {
    let rows = vec![vec![4u8; MDSI_ITEMS]; 5];
    let l: Vec<[f64; 6]> = (0..MDSI_ITEMS).map(|i| [0.1 * (i % 7) as f64; 6]).collect();
    let cfg = LoadingConfig::new(l, None, BTreeSet::new()).unwrap();
    let s = refined_factor_scores(&named(rows, BTreeSet::new()), &cfg, 0.0).unwrap();
    assert!(s.scores.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn items_csv_round_trip_and_missing_items() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<u8>> = (0..3)
        .map(|_| (0..MDSI_ITEMS).map(|_| 1 + (z(&mut rng).abs() * 2.0) as u8 % 6).collect())
        .collect();
    let r = named(rows, BTreeSet::new());
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    assert_eq!(ItemResponses::read_csv(buf.as_slice()).unwrap(), r);

    let text = String::from_utf8(buf).unwrap();
    let truncated: String = text.lines().take(40).map(|l| format!("{l}\n")).collect();
    let err = ItemResponses::read_csv(truncated.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("no response for item 40"), "{err}");
}

#[test]
fn loadings_csv_with_item_ids_and_reverse_flags() {
    let mut text = format!("item_id,{},reverse\n", FACTORS.join(","));
    for i in (1..=MDSI_ITEMS).rev() {
        let rev = if i % 10 == 0 { 1 } else { 0 };
        text.push_str(&format!("{i},{},0,0,0,0,0,{rev}\n", i as f64 / 100.0));
    }
    let cfg = LoadingConfig::read_csv(text.as_bytes()).unwrap();
    assert_eq!(cfg.loadings[0][0], 0.01);
    assert_eq!(cfg.loadings[43][0], 0.44);
    assert_eq!(cfg.reverse_coded, BTreeSet::from([10, 20, 30, 40]));

    let missing = text.replace("careful", "cautious");
    assert!(LoadingConfig::read_csv(missing.as_bytes()).is_err());
}

#[test]
fn scores_csv_header() {
    let rows = vec![vec![2u8; MDSI_ITEMS], vec![5u8; MDSI_ITEMS]];
    let l = vec![[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; MDSI_ITEMS];
    let cfg = LoadingConfig::new(l, None, BTreeSet::new()).unwrap();
    let s = refined_factor_scores(&named(rows, BTreeSet::new()), &cfg, DEFAULT_RIDGE).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("subject_id,angry,anxious,careful,dissociative,distress-reduction,risky,style_class\n"));
    assert_eq!(s.class_name(1), "angry");
}
