use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskcbf::model::{ControllerKind, DisturbanceModel, ScenarioConfig};
use riskcbf::simulate::*;
use riskcbf_testkit::{random_psd, sample_moments};

fn vehicle() -> ScenarioConfig {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/vehicle.json")).unwrap();
    ScenarioConfig::from_json_str(&text).unwrap()
}

fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn check_moments(cov: &DMatrix<f64>, model: DisturbanceModel, seed: u64) {
    let sampler = NoiseSampler::new(cov, model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<_> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
    let (mean, sample_cov) = sample_moments(&draws);
    let err = relative_frobenius(&sample_cov, cov);
    assert!(err <= 0.02, "{model:?}: covariance error {err}");
    assert!(mean.norm() <= 0.01 * cov.trace().sqrt(), "{model:?}: mean {mean}");
}

#[test]
fn noise_matches_process_covariance() {
    let q = vehicle().system.q().clone();
    check_moments(&q, DisturbanceModel::Gaussian, 1);
    check_moments(&q, DisturbanceModel::Uniform, 2);
}

#[test]
fn noise_matches_rank_deficient_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cov = random_psd(&mut rng, 3, 2, 1.0);
    check_moments(&cov, DisturbanceModel::Gaussian, 3);
    check_moments(&cov, DisturbanceModel::Uniform, 4);
}

#[test]
fn uniform_noise_is_bounded() {
    let cov = DMatrix::from_diagonal_element(2, 2, 4.0);
    let sampler = NoiseSampler::new(&cov, DisturbanceModel::Uniform);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let limit = 2.0 * 3f64.sqrt();
    for _ in 0..10_000 {
        assert!(sampler.sample(&mut rng).amax() <= limit);
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = vehicle();
    let a = run_one(&cfg, 123).unwrap();
    let b = run_one(&cfg, 123).unwrap();
    assert_eq!(a, b);
    let c = run_one(&cfg, 124).unwrap();
    assert_ne!(a.x_true, c.x_true);
}

#[test]
fn ensembles_ignore_thread_count() {
    let mut cfg = vehicle();
    cfg.horizon_steps = 20;
    let one = run_ensemble(&cfg, 12, Some(1)).unwrap();
    let many = run_ensemble(&cfg, 12, Some(4)).unwrap();
    assert_eq!(one.records, many.records);
    assert_eq!(serde_json::to_string(&one.metrics).unwrap(), serde_json::to_string(&many.metrics).unwrap());
    for (k, r) in one.records.iter().enumerate() {
        assert_eq!(r.seed, run_seed(cfg.rng_seed, k as u64));
    }
}

#[test]
fn recorded_values_are_consistent() {
    let cfg = vehicle();
    let rec = run_one(&cfg, 7).unwrap();
    for (t, x) in rec.x_true.iter().enumerate() {
        assert_eq!(rec.h_true[t], cfg.safe_set.h_value(x).unwrap());
        assert_eq!(rec.h_belief[t], cfg.safe_set.h_value(&rec.belief_mean[t]).unwrap());
        assert!(rec.trace_p[t] >= 0.0);
    }
    assert_eq!(rec.belief_mean[0], cfg.initial_mean);
    assert!(rec.z[0].is_none());
    assert!(rec.z[1..].iter().all(|z| z.as_ref().is_some_and(|z| z.len() == 1)));
    assert!(rec.relaxed.iter().zip(&rec.delta).all(|(&r, &d)| r || d == 0.0));
}

#[test]
fn metrics_summarise_records() {
    let mut cfg = vehicle();
    cfg.horizon_steps = 30;
    let ens = run_ensemble(&cfg, 20, None).unwrap();
    let m = &ens.metrics;
    assert_eq!(m.num_runs, 20);
    assert_eq!(m.horizon_steps, 30);
    assert_eq!(m.per_step_violation_freq.len(), 31);
    assert!((0.0..=1.0).contains(&m.violation_rate));
    assert!(m.per_step_violation_freq.iter().all(|f| (0.0..=1.0).contains(f)));
    let peak = m.per_step_violation_freq.iter().copied().fold(0.0, f64::max);
    assert!(m.violation_rate >= peak);
    let violated = ens.records.iter().filter(|r| r.violated()).count();
    assert_eq!(m.violation_rate, violated as f64 / 20.0);
    let mean_min = ens.records.iter().map(|r| r.min_h()).sum::<f64>() / 20.0;
    assert!((m.mean_min_h - mean_min).abs() <= 1e-12);
}

#[test]
fn every_controller_completes_the_vehicle_scenario() {
    let mut cfg = vehicle();
    cfg.horizon_steps = 40;
    for name in ["proposed_m1", "proposed_m2", "ignore_m1", "ignore_m2", "expected_value_m1", "expected_value_m2"] {
        let c = cfg.with_controller(ControllerKind::parse(name, None).unwrap()).unwrap();
        let ens = run_ensemble(&c, 8, None).unwrap();
        assert_eq!(ens.metrics.controller, name);
    }
}

#[test]
fn config_survives_serialization() {
    let cfg = vehicle();
    let back = ScenarioConfig::from_value(cfg.to_value()).unwrap();
    assert_eq!(cfg, back);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn record_lengths_follow_horizon(steps in 1usize..60, seed in any::<u64>()) {
        let mut cfg = vehicle();
        cfg.horizon_steps = steps;
        let rec = run_one(&cfg, seed).unwrap();
        prop_assert_eq!(rec.horizon(), steps);
        for len in [rec.x_true.len(), rec.z.len(), rec.belief_mean.len(), rec.trace_p.len(), rec.h_true.len(), rec.h_belief.len(), rec.belief_risk.len()] {
            prop_assert_eq!(len, steps + 1);
        }
        for len in [rec.u.len(), rec.relaxed.len(), rec.delta.len()] {
            prop_assert_eq!(len, steps);
        }
    }
}
