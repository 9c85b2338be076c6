use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skillchain::dataset::AnnotatedDemo;
use skillchain::estimator::{featurize, KnnEstimator, OracleEstimator, FEATURE_DIM};
use skillchain::pipeline::{annotate_dataset, build_library, generate_dataset};
use skillchain::scenario::{ScenarioConfig, SpawnRegion};
use skillchain::sim::{Corner, SimParams};
use skillchain::skills::PolicyBank;

fn dataset(count: usize) -> Vec<AnnotatedDemo> {
    let bank = PolicyBank::standard();
    let sc = ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, Corner::BottomLeft);
    let (demos, _) =
        generate_dataset(&bank, &sc, &[vec![0, 1, 2, 3], vec![1, 2, 0, 3]], &Corner::ALL, count, 300).unwrap();
    annotate_dataset(&demos, &bank, 2).unwrap().1
}

fn rows(demos: &[AnnotatedDemo], p: &SimParams) -> Vec<([f64; FEATURE_DIM], Vec<f64>)> {
    demos
        .iter()
        .flat_map(|a| {
            a.demo
                .steps
                .iter()
                .zip(&a.progress)
                .map(|(s, r)| (featurize(p, &s.obs, &a.demo.goal), r.clone()))
        })
        .collect()
}

/// Scales with the training min/max, sorts every stored point by
/// (distance, index) and averages the first k labels.
fn knn_reference(train: &[([f64; FEATURE_DIM], Vec<f64>)], k: usize, q: &[f64; FEATURE_DIM]) -> (Vec<usize>, Vec<f64>) {
    let mut lo = [f64::INFINITY; FEATURE_DIM];
    let mut hi = [f64::NEG_INFINITY; FEATURE_DIM];
    for (f, _) in train {
        for d in 0..FEATURE_DIM {
            lo[d] = lo[d].min(f[d]);
            hi[d] = hi[d].max(f[d]);
        }
    }
    let scale = |f: &[f64; FEATURE_DIM]| -> Vec<f64> {
        (0..FEATURE_DIM)
            .map(|d| {
                let span = hi[d] - lo[d];
                if span > 0.0 { ((f[d] - lo[d]) / span).clamp(0.0, 1.0) } else { 0.0 }
            })
            .collect()
    };
    let qs = scale(q);
    let mut order: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (f, _))| (scale(f).iter().zip(&qs).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx: Vec<usize> = order.iter().take(k).map(|&(_, i)| i).collect();
    let n = train[0].1.len();
    let mean = (0..n)
        .map(|s| idx.iter().map(|&i| train[i].1[s]).sum::<f64>() / idx.len() as f64)
        .collect();
    (idx, mean)
}

#[test]
fn neighbors_match_full_sort() {
    let p = SimParams::default();
    let demos = dataset(4);
    let (train, test) = demos.split_at(6);
    let knn = KnnEstimator::fit(train, 5, &p).unwrap();
    let train_rows = rows(train, &p);
    assert_eq!(knn.len(), train_rows.len());
    for (q, _) in rows(test, &p).iter().step_by(7) {
        let (idx, mean) = knn_reference(&train_rows, 5, q);
        assert_eq!(knn.neighbors(q), idx);
        let got = knn.predict_features(q);
        for (g, m) in got.iter().zip(&mean) {
            assert!((g - m).abs() < 1e-12);
        }
    }
}

#[test]
fn training_points_recover_their_duplicates() {
    let p = SimParams::default();
    let demos = dataset(1);
    let knn = KnnEstimator::fit(&demos, 1, &p).unwrap();
    let train_rows = rows(&demos, &p);
    for (i, (f, label)) in train_rows.iter().enumerate().step_by(13) {
        let nn = knn.neighbors(f)[0];
        // equal features resolve to the earliest copy
        let first = train_rows.iter().position(|(g, _)| g == f).unwrap();
        assert_eq!(nn, first, "step {i}");
        if first == i {
            assert_eq!(&knn.predict_features(f), label);
        }
    }
}

#[test]
fn held_out_error_is_small() {
    let p = SimParams::default();
    let mut demos = dataset(25);
    demos.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let cut = demos.len() * 4 / 5;
    let (train, test) = demos.split_at(cut);
    let knn = KnnEstimator::fit(train, 5, &p).unwrap();
    let test_rows = rows(test, &p);
    let n = test_rows[0].1.len();
    let mut err = vec![0.0; n];
    for (f, label) in &test_rows {
        for (e, (g, l)) in err.iter_mut().zip(knn.predict_features(f).iter().zip(label)) {
            *e += (g - l).abs();
        }
    }
    for (s, e) in err.iter().enumerate() {
        let mae = e / test_rows.len() as f64;
        assert!(mae <= 0.1, "skill {s}: {mae}");
    }
}

#[test]
fn snapshot_round_trip_predicts_identically() {
    let p = SimParams::default();
    let demos = dataset(2);
    let knn = KnnEstimator::fit(&demos, 3, &p).unwrap();
    let back = KnnEstimator::from_json(&knn.to_json()).unwrap();
    assert_eq!(back, knn);
    assert!(KnnEstimator::from_json("{\"schema_version\": 9}").is_err());
    assert!(KnnEstimator::fit(&demos, 0, &p).is_err());
    assert!(KnnEstimator::fit(&[], 5, &p).is_err());
}

#[test]
fn predictions_stay_in_unit_range_and_k_larger_than_data_is_fine() {
    let p = SimParams::default();
    let demos = dataset(1);
    let total: usize = demos.iter().map(|d| d.demo.steps.len()).sum();
    let knn = KnnEstimator::fit(&demos, total + 10, &p).unwrap();
    let (f, _) = &rows(&demos, &p)[0];
    assert_eq!(knn.neighbors(f).len(), total);
    assert!(knn.predict_features(f).iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn oracle_agrees_with_labels_at_window_ends() {
    let bank = PolicyBank::standard();
    let sc = ScenarioConfig::goal_conditioned(Corner::TopLeft);
    let (demos, _) = generate_dataset(&bank, &sc, &[vec![0, 1, 2, 3]], &Corner::ALL, 12, 40).unwrap();
    let (stats, ann) = annotate_dataset(&demos, &bank, 2).unwrap();
    let lib = build_library(&ann, &stats, &bank).unwrap();
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), &lib).unwrap();
    for a in &ann {
        for w in &a.windows {
            // the state the window's last action leads to
            let i = a.demo.index_of(w.end + 1);
            let rho = oracle.progress(&a.demo.steps[i].obs, &a.demo.goal);
            assert!((rho[w.skill] - a.progress[i][w.skill]).abs() <= 0.05, "{:?} {rho:?}", w);
        }
    }
}
