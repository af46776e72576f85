use rand::Rng;
use rand_distr::StandardNormal;

use peano_core::coeffs::{CoefficientField, ParametricFunction, Regime, SmallNoiseModel};
use peano_core::experiments::{
    exit_tally, run_frozen_ergodicity, run_selection, ErgodicitySettings, RunOptions,
};
use peano_core::sim::{rng_for, simulate_small_noise_from, SmallNoiseStepper, StepPolicy};
use peano_core::Error;

fn symmetric() -> SmallNoiseModel {
    SmallNoiseModel::constant_1d(0.5, (1.0, -1.0), (1.0, 1.0), (1.0, 1.0), Regime::Repulsive).unwrap()
}

fn asymmetric() -> SmallNoiseModel {
    SmallNoiseModel::constant_1d(0.5, (1.0, -1.0), (4.0, 1.0), (1.0, 1.0), Regime::Repulsive).unwrap()
}

fn opts(workers: usize) -> RunOptions {
    RunOptions {
        workers: Some(workers),
        ..RunOptions::default()
    }
}

#[test]
fn selection_intervals_cover_the_symmetric_value() {
    let model = symmetric();
    let (reps, n) = (50u64, 200u64);
    let covering = (0..reps)
        .filter(|r| {
            let est = run_selection(&model, 1e-2, 0.1, n, 10_000 + r * n, &opts(2)).unwrap();
            (est.p_plus_hat - 0.5).abs() <= est.ci_halfwidth
        })
        .count();
    // 95% intervals; 43 of 50 is about the 1% tail of Binomial(50, 0.95).
    assert!(covering >= 43, "{covering} of {reps} intervals cover 1/2");
}

#[test]
fn tallies_merge_exactly() {
    let model = asymmetric();
    let o = opts(2);
    let whole = exit_tally(&model, 1e-2, 0.1, 0..300, 5, &o).unwrap();
    let mut parts = exit_tally(&model, 1e-2, 0.1, 0..120, 5, &o).unwrap();
    parts.merge(&exit_tally(&model, 1e-2, 0.1, 120..300, 5, &o).unwrap());
    assert_eq!(whole, parts);
    assert_eq!(whole.total(), 300);
}

#[test]
fn selection_does_not_depend_on_worker_count() {
    let model = asymmetric();
    let a = run_selection(&model, 1e-2, 0.1, 256, 77, &opts(1)).unwrap();
    let b = run_selection(&model, 1e-2, 0.1, 256, 77, &opts(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn paths_are_reproducible_from_the_seed() {
    let model = asymmetric();
    let policy = StepPolicy::graded(1e-3).unwrap();
    let a = simulate_small_noise_from(&model, 0.0, 0.05, 0.5, &policy, 9, 0.0).unwrap();
    let b = simulate_small_noise_from(&model, 0.0, 0.05, 0.5, &policy, 9, 0.0).unwrap();
    let c = simulate_small_noise_from(&model, 0.0, 0.05, 0.5, &policy, 10, 0.0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), a.len() + 1);
}

#[test]
fn euler_converges_strongly_on_a_smooth_model() {
    // phi = 0, psi = 1 + x/2 + 2y, b = 1: Y is a Brownian motion and X is
    // linear in it. Coarse paths reuse the summed normals of the fine path.
    let mut model = symmetric();
    model.phi = CoefficientField::constant(0.0, 0.0);
    model.psi = CoefficientField::symmetric(ParametricFunction::affine(1.0, vec![0.5, 2.0]));
    model.b = CoefficientField::constant(1.0, 1.0);
    let fine = 1usize << 12;
    let factors = [64usize, 16, 4];
    let n_paths = 200;
    let mut sq = vec![0.0; factors.len()];
    let policy = StepPolicy::uniform(1.0 / fine as f64).unwrap();
    for p in 0..n_paths {
        let mut rng = rng_for(1000 + p);
        let normals: Vec<(f64, f64)> = (0..fine).map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let run = |k: usize| {
            let mut stepper = SmallNoiseStepper::new(&model, 1.0, &policy, 0.0).unwrap();
            let mut s = stepper.start();
            let h = k as f64 / fine as f64;
            for chunk in normals.chunks(k) {
                let zw: f64 = chunk.iter().map(|z| z.0).sum::<f64>() / (k as f64).sqrt();
                let zb: f64 = chunk.iter().map(|z| z.1).sum::<f64>() / (k as f64).sqrt();
                let mut draws = [zw, zb].into_iter();
                stepper.step_with_normals(&mut s, h, || draws.next().unwrap()).unwrap();
            }
            (s.x[0], s.y)
        };
        let reference = run(1);
        for (i, &k) in factors.iter().enumerate() {
            let (x, y) = run(k);
            // The fast component is exact under coupling.
            assert!((y - reference.1).abs() < 1e-9);
            sq[i] += (x - reference.0).powi(2);
        }
    }
    let rms: Vec<f64> = sq.iter().map(|s| (s / n_paths as f64).sqrt()).collect();
    for w in rms.windows(2) {
        // A fourfold smaller step gains at least the factor 2 of order 1/2.
        assert!(w[0] / w[1] > 2.0, "{rms:?}");
    }
}

#[test]
fn rejects_empty_runs_and_bad_ladders() {
    let model = asymmetric();
    assert!(matches!(
        run_selection(&model, 1e-2, 0.1, 0, 1, &RunOptions::default()),
        Err(Error::Precondition(_))
    ));
    let attractive = SmallNoiseModel::constant_1d(0.5, (1.0, 0.0), (-8.0, -1.0), (1.0, 1.0), Regime::Attractive).unwrap();
    let settings = ErgodicitySettings::default();
    assert!(run_frozen_ergodicity(&[0.0], &attractive, &[5.0, 1.0], 10, (0.0, 2.0), 1, &settings).is_err());
    assert!(run_frozen_ergodicity(&[0.0], &attractive, &[1.0, 5.0], 0, (0.0, 2.0), 1, &settings).is_err());
}

#[test]
fn short_ergodicity_run_approaches_the_invariant_law() {
    let attractive = SmallNoiseModel::constant_1d(0.5, (1.0, 0.0), (-8.0, -1.0), (1.0, 1.0), Regime::Attractive).unwrap();
    let settings = ErgodicitySettings {
        workers: Some(2),
        ..ErgodicitySettings::default()
    };
    let r = run_frozen_ergodicity(&[0.0], &attractive, &[0.05, 10.0], 4000, (0.0, 2.0), 3, &settings).unwrap();
    assert!((r.mass_plus - 0.2).abs() < 1e-12);
    // Far apart at first, close at the longer horizon.
    assert!(r.two_sample.estimates[0] > 0.5, "{:?}", r.two_sample.estimates);
    assert!(r.two_sample.estimates[1] < 0.1, "{:?}", r.two_sample.estimates);
    assert!((r.occupation_fraction - 0.2).abs() < 0.03, "{}", r.occupation_fraction);
    assert_eq!(r.table().to_csv_string().lines().count(), 3);
}
