use std::sync::OnceLock;

use proptest::prelude::*;
use sbm_core::harness::{emit_report, rate_schedule, rows_from_csv, run_rate_study, ExperimentConfig};
use sbm_core::inference::{collapsed_gibbs, PosteriorAccumulator};
use sbm_core::model::{sample_adjacency, sample_truth};
use sbm_core::{DirichletWeights, GibbsConfig, TruthSpec};

fn chain() -> &'static (PosteriorAccumulator, f64) {
    static CHAIN: OnceLock<(PosteriorAccumulator, f64)> = OnceLock::new();
    CHAIN.get_or_init(|| {
        let truth = sample_truth(&TruthSpec { n: 10, k: 2, delta: 0.1, seed: 4 }).unwrap();
        let a = sample_adjacency(&truth.theta, 5);
        let samples =
            collapsed_gibbs(&a, 2, &DirichletWeights::symmetric(2, 0.5).unwrap(), &GibbsConfig::new(1_200, 200, 1, 6)).unwrap();
        let mut acc = PosteriorAccumulator::with_truth(truth.theta.clone());
        for s in &samples {
            acc.add(&s.z, &s.q).unwrap();
        }
        (acc, rate_schedule(10, 2).unwrap().eps())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_mass_non_increasing_in_m(m1 in 0.0f64..3.0, extra in 0.0f64..3.0) {
        let (acc, eps) = chain();
        let small = acc.tail_mass(m1, *eps).unwrap();
        let large = acc.tail_mass(m1 + extra, *eps).unwrap();
        prop_assert!(large <= small);
        prop_assert!((0.0..=1.0).contains(&small));
    }
}

#[test]
fn tail_mass_hits_both_ends() {
    let (acc, eps) = chain();
    assert_eq!(acc.tail_mass(0.0, *eps).unwrap(), 1.0);
    assert_eq!(acc.tail_mass(1e6, *eps).unwrap(), 0.0);
}

#[test]
fn report_round_trips_and_mse_decreases_on_small_grid() {
    let cfg = ExperimentConfig::from_json(
        r#"{"n_grid": [8, 32], "k": 2, "replicates": 3, "burnin": 200, "samples": 400, "master_seed": 12}"#,
    )
    .unwrap();
    let rows = run_rate_study(&cfg).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.is_ok() && r.wall_time == 0.0));
    assert_eq!(rows.iter().map(|r| (r.n, r.replicate)).collect::<Vec<_>>(), vec![(8, 0), (8, 1), (8, 2), (32, 0), (32, 1), (32, 2)]);

    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&rows, cfg.m, dir.path()).unwrap();
    let back = rows_from_csv(&std::fs::read(&files.csv).unwrap()).unwrap();
    assert_eq!(back, rows);

    let mean = |n: usize| rows.iter().filter(|r| r.n == n).map(|r| r.mse).sum::<f64>() / 3.0;
    assert!(mean(32) < mean(8));
}

#[test]
fn empty_report_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&[], 10.0, dir.path()).is_err());
}
