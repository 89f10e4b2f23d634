mod common;

use common::*;
use jtcr_core::data::{build_interactions, chronological_split, parse_checkins, CandidateUniverse, Dataset, InputFormat, SplitRatios};
use jtcr_core::model::Checkpoint;
use jtcr_core::temporal::{regularizer_vectors, RegularizerVectors};
use jtcr_core::train::{init_model, select_hyperparameters, train, Mode, TrainConfig};
use jtcr_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    loop {
        let ds = Dataset::from_records(random_records(&mut rng, 9, 11, 0.2)).unwrap();
        if ds.n_users() >= 5 && ds.n_pois() >= 6 {
            return ds;
        }
    }
}

fn cfg(mode: Mode) -> TrainConfig {
    TrainConfig {
        d: 5,
        gamma: 0.05,
        max_iter: 20,
        epsilon: 1e-12,
        seed: 3,
        mode,
        ..Default::default()
    }
}

fn run(ds: &Dataset, c: &TrainConfig) -> (Vec<u8>, String) {
    let store = build_interactions(ds, c.universe).unwrap();
    let reg = regularizer_vectors(ds, c.lambda);
    let (model, trace) = train(c, &store, &ds.geo_index(), &reg).unwrap();
    let ids: Vec<String> = ds.poi_ids().map(str::to_owned).collect();
    (Checkpoint::new(model, ds.user_ids().to_vec(), ids).unwrap().to_bytes(), trace.to_csv())
}

#[test]
fn repeated_training_is_bit_identical() {
    let ds = small();
    for c in [
        cfg(Mode::Joint),
        TrainConfig { negative_samples: Some(3), ..cfg(Mode::Joint) },
        TrainConfig { universe: CandidateUniverse::PerUserNeighborhood { radius_km: 15.0 }, ..cfg(Mode::Joint) },
    ] {
        assert_eq!(run(&ds, &c), run(&ds, &c));
    }
}

#[test]
fn modes_change_the_result() {
    let ds = small();
    let joint = run(&ds, &cfg(Mode::Joint)).0;
    for mode in [Mode::Phase1Only, Mode::NoVar, Mode::NoGeo] {
        assert_ne!(run(&ds, &cfg(mode)).0, joint, "{mode:?}");
    }
    let nogeo = run(&ds, &cfg(Mode::NoGeo)).0;
    let alpha0 = run(&ds, &TrainConfig { alpha: 0.0, ..cfg(Mode::Joint) }).0;
    assert_eq!(nogeo, alpha0);
}

#[test]
fn novar_equals_joint_with_uniform_coefficients() {
    let ds = small();
    let store = build_interactions(&ds, CandidateUniverse::AllPois).unwrap();
    let c = cfg(Mode::NoVar);
    let uniform = RegularizerVectors::uniform(c.lambda, ds.n_users(), ds.n_pois());
    let a = train(&c, &store, &ds.geo_index(), &regularizer_vectors(&ds, c.lambda)).unwrap().0;
    let b = train(&cfg(Mode::Joint), &store, &ds.geo_index(), &uniform).unwrap().0;
    assert_eq!(a, b);
}

#[test]
fn loop_stops_on_small_change_or_iteration_cap() {
    let ds = small();
    let store = build_interactions(&ds, CandidateUniverse::AllPois).unwrap();
    let reg = regularizer_vectors(&ds, 1e-4);
    let capped = TrainConfig { max_iter: 4, ..cfg(Mode::Joint) };
    let (_, trace) = train(&capped, &store, &ds.geo_index(), &reg).unwrap();
    assert_eq!(trace.iterations, 4);
    assert_eq!(trace.records.len(), 4);
    let loose = TrainConfig { epsilon: 1e6, ..cfg(Mode::Joint) };
    let (model, trace) = train(&loose, &store, &ds.geo_index(), &reg).unwrap();
    assert!(trace.converged);
    assert_eq!(trace.iterations, 0);
    assert_eq!(model, init_model(&loose, ds.n_users(), ds.n_pois()).unwrap());
}

#[test]
fn huge_step_reports_divergence() {
    let ds = small();
    let store = build_interactions(&ds, CandidateUniverse::AllPois).unwrap();
    let c = TrainConfig { gamma: 1e250, ..cfg(Mode::Joint) };
    let err = train(&c, &store, &ds.geo_index(), &regularizer_vectors(&ds, c.lambda)).unwrap_err();
    assert!(matches!(err, Error::Divergence { iteration, .. } if iteration >= 1));
}

#[test]
fn mismatched_inputs_are_rejected() {
    let ds = small();
    let store = build_interactions(&ds, CandidateUniverse::AllPois).unwrap();
    let wrong = RegularizerVectors::uniform(1e-4, ds.n_users() + 1, ds.n_pois());
    assert!(train(&cfg(Mode::Joint), &store, &ds.geo_index(), &wrong).is_err());
}

#[test]
fn selection_returns_best_validation_score() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    write_synthetic_csv(&path, 31, 30, 30);
    let ds = parse_checkins(&path, InputFormat::Csv).unwrap();
    let split = chronological_split(&ds, SplitRatios::default()).unwrap();
    let base = TrainConfig { max_iter: 5, gamma: 0.05, ..Default::default() };
    let grid: Vec<TrainConfig> = [2, 4, 4].iter().map(|&d| TrainConfig { d, ..base.clone() }).collect();
    let sel = select_hyperparameters(&grid, &split).unwrap();
    assert_eq!(sel.scores.len(), 3);
    let max = sel.scores.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(sel.scores[sel.best], max);
    // Entries 1 and 2 are identical; ties go to the first.
    assert_eq!(sel.scores[1], sel.scores[2]);
    assert!(sel.best != 2);
    assert!(select_hyperparameters(&[], &split).is_err());
}
