mod common;

use common::*;
use proptest::prelude::*;
use wiae::data::{generate, GeneratorSpec, ProcessKind, Standardizer};
use wiae::forecasting::{forecast, innovation_history, sample_horizon_step, sample_trajectories, ForecastRequest};
use wiae::networks::WiaeModel;
use wiae::stats_tests::ks_one_sample;
use wiae::Error;

#[test]
fn exact_inverse_model_recovers_drivers() {
    let m = 20;
    let model = lar_inverse_model(m);
    let x = generate(&GeneratorSpec::new(ProcessKind::Lar, 500, 3)).unwrap().values;
    let u = innovation_history(&model, &x).unwrap();
    for (k, v) in u.iter().enumerate() {
        let t = k + m - 1;
        assert!((v - (x[t] - 0.5 * x[t - 1])).abs() < 1e-12);
        assert!(v.abs() <= 1.0 + 1e-12);
    }
    // Decoding the innovations reproduces the series up to the 0.5^m tail.
    let rec = model.decode_innovations(&u).unwrap();
    for (k, r) in rec.iter().enumerate() {
        assert!((r - x[k + 2 * (m - 1)]).abs() < 1e-5);
    }
}

#[test]
fn one_step_samples_follow_the_conditional_law() {
    let model = lar_inverse_model(20);
    let x = generate(&GeneratorSpec::new(ProcessKind::Lar, 2_000, 8)).unwrap().values;
    let mut total = 0.0;
    for (i, origin) in (100..2_000).step_by(95).take(20).enumerate() {
        let req = ForecastRequest {
            origin,
            horizon: 1,
            trajectories: 1000,
            seed: i as u64,
        };
        let dist = forecast(&model, &x, &req).unwrap();
        let col: Vec<f64> = dist.samples.iter().map(|r| r[0]).collect();
        let centre = 0.5 * x[origin];
        total += ks_one_sample(&col, |v| uniform_pm1_cdf(v - centre)).unwrap();
    }
    assert!(total / 20.0 <= 0.05, "mean KS {}", total / 20.0);
}

#[test]
fn trajectories_are_seeded_and_shaped() {
    let model = WiaeModel::init(6, Standardizer { mean: 0.5, std: 2.0 }, 1).unwrap();
    let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.2).cos()).collect();
    let req = ForecastRequest {
        origin: 40,
        horizon: 15,
        trajectories: 1000,
        seed: 5,
    };
    let a = forecast(&model, &x, &req).unwrap();
    assert_eq!(a.samples.len(), 1000);
    assert!(a.samples.iter().all(|r| r.len() == 15));
    assert_eq!(a.mean.len(), 15);
    assert_eq!(a, forecast(&model, &x, &req).unwrap());
    let other = forecast(&model, &x, &ForecastRequest { seed: 6, ..req.clone() }).unwrap();
    assert_ne!(a.samples, other.samples);
    // Values after the origin are never read.
    let mut y = x.clone();
    y[41..].iter_mut().for_each(|v| *v = 1e6);
    assert_eq!(a, forecast(&model, &y, &req).unwrap());
}

#[test]
fn single_step_path_matches_full_trajectories() {
    let model = WiaeModel::init(5, Standardizer::identity(), 2).unwrap();
    let history: Vec<f64> = (0..12).map(|i| (i as f64 * 0.4).sin() * 0.5).collect();
    let req = ForecastRequest {
        origin: 0,
        horizon: 7,
        trajectories: 64,
        seed: 3,
    };
    let full = sample_trajectories(&model, &history, &req).unwrap();
    for step in 1..=7 {
        let col = sample_horizon_step(&model, &history, &req, step).unwrap();
        let expect: Vec<f64> = full.samples.iter().map(|r| r[step - 1]).collect();
        assert_eq!(col, expect);
    }
    assert!(sample_horizon_step(&model, &history, &req, 8).is_err());
}

#[test]
fn short_or_invalid_requests_fail() {
    let model = WiaeModel::init(5, Standardizer::identity(), 2).unwrap();
    let x = vec![0.1; 30];
    let req = |origin, horizon, trajectories| ForecastRequest {
        origin,
        horizon,
        trajectories,
        seed: 0,
    };
    assert!(matches!(forecast(&model, &x, &req(7, 3, 10)), Err(Error::InsufficientHistory { needed: 9, got: 8 })));
    assert!(forecast(&model, &x, &req(8, 3, 10)).is_ok());
    assert!(forecast(&model, &x, &req(30, 3, 10)).is_err());
    assert!(forecast(&model, &x, &req(20, 0, 10)).is_err());
    assert!(forecast(&model, &x, &req(20, 3, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn encoding_is_causal(values in prop::collection::vec(-3f64..3.0, 12..40), cut in 0usize..30) {
        let model = WiaeModel::init(4, Standardizer::identity(), 9).unwrap();
        prop_assume!(cut + 4 <= values.len());
        let full = innovation_history(&model, &values).unwrap();
        let prefix = innovation_history(&model, &values[..cut + 4]).unwrap();
        prop_assert_eq!(&full[..prefix.len()], &prefix[..]);
    }

    #[test]
    fn passthrough_decoder_samples_stay_in_range(seed in 0u64..500, horizon in 1usize..6) {
        // With the exact inverse pair, every sample lies within the support
        // of x_t / 2 + U[-1, 1] around the conditional centre.
        let model = lar_inverse_model(20);
        let x = generate(&GeneratorSpec::new(ProcessKind::Lar, 200, seed)).unwrap().values;
        let req = ForecastRequest { origin: 150, horizon, trajectories: 50, seed };
        let d = forecast(&model, &x, &req).unwrap();
        for row in &d.samples {
            prop_assert!((row[0] - 0.5 * x[150]).abs() <= 1.0 + 1e-5);
        }
    }
}
