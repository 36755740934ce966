mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiae::stats_tests::{
    critic_wasserstein_with, ks_one_sample, ks_two_sample, runs_test, runs_up_down_count, uniform_quantiles,
    wasserstein_1d, CriticEstimateConfig, RUNS_MIN_EFFECTIVE,
};
use wiae::Error;

#[test]
fn runs_counts_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.random_range(3..80);
        // Small integer alphabet so ties are common.
        let seq: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        match runs_up_down_count(&seq) {
            Ok((runs, _)) => assert_eq!(runs, oracle_runs(&seq)),
            Err(Error::DegenerateSequence(_)) => assert!(seq.windows(2).all(|w| w[0] == w[1])),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn runs_test_errors() {
    assert!(matches!(runs_test(&[1.0; 40]), Err(Error::DegenerateSequence(_))));
    let short: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64).collect();
    assert!(matches!(runs_test(&short), Err(Error::SmallSample { min: RUNS_MIN_EFFECTIVE, .. })));
    let mut bad: Vec<f64> = (0..40).map(f64::from).collect();
    bad[3] = f64::NAN;
    assert!(matches!(runs_test(&bad), Err(Error::NonFinite(_))));
}

#[test]
fn monotone_and_alternating_sequences_are_rejected() {
    let up: Vec<f64> = (0..200).map(f64::from).collect();
    assert!(runs_test(&up).unwrap().p_value < 1e-3);
    let zigzag: Vec<f64> = (0..200).map(|i| (i % 2) as f64).collect();
    assert!(runs_test(&zigzag).unwrap().p_value < 1e-3);
}

#[test]
fn wasserstein_matches_cdf_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let a: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(-2.0..4.0)).collect();
        let w = wasserstein_1d(&a, &b).unwrap();
        assert!((w - oracle_w1(&a, &b)).abs() <= 1e-12 * (1.0 + w), "{w} vs {}", oracle_w1(&a, &b));
    }
    assert_eq!(wasserstein_1d(&[0.0], &[3.0]).unwrap(), 3.0);
    assert!(wasserstein_1d(&[], &[1.0]).is_err());
}

#[test]
fn uniform_quantiles_are_midpoints() {
    assert_eq!(uniform_quantiles(2), vec![-0.5, 0.5]);
    let q = uniform_quantiles(1000);
    assert!(q.iter().all(|v| (-1.0..1.0).contains(v)));
    assert!(q.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn ks_distances() {
    let q = uniform_quantiles(500);
    assert!(ks_one_sample(&q, uniform_pm1_cdf).unwrap() <= 1.0 / 500.0 + 1e-12);
    assert!((ks_one_sample(&[0.0; 10], uniform_pm1_cdf).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(ks_two_sample(&[0.0, 1.0], &[5.0, 6.0]).unwrap(), 1.0);
}

#[test]
fn critic_estimate_separates_shifted_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let block = |rng: &mut ChaCha8Rng, shift: f64| -> Vec<f64> { (0..4).map(|_| rng.random_range(-1.0..1.0) + shift).collect() };
    let a: Vec<Vec<f64>> = (0..300).map(|_| block(&mut rng, 0.0)).collect();
    let b: Vec<Vec<f64>> = (0..300).map(|_| block(&mut rng, 0.0)).collect();
    let c: Vec<Vec<f64>> = (0..300).map(|_| block(&mut rng, 1.0)).collect();
    let cfg = CriticEstimateConfig::default();
    let same = critic_wasserstein_with(&a, &b, 300, 1, &cfg).unwrap();
    let apart = critic_wasserstein_with(&a, &c, 300, 1, &cfg).unwrap();
    assert!(apart > same + 0.5, "same {same}, apart {apart}");
    assert_eq!(apart, critic_wasserstein_with(&a, &c, 300, 1, &cfg).unwrap());
}

fn distinct_seq() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100f64..100.0, 40..120).prop_filter("needs enough non-tied steps", |v| {
        v.windows(2).filter(|w| w[0] != w[1]).count() + 1 >= RUNS_MIN_EFFECTIVE
    })
}

proptest! {
    #[test]
    fn runs_test_ignores_increasing_transforms(seq in distinct_seq(), a in 0.1f64..10.0, b in -5f64..5.0) {
        let r = runs_test(&seq).unwrap();
        let moved: Vec<f64> = seq.iter().map(|x| (a * x + b).atan()).collect();
        prop_assume!(moved.windows(2).zip(seq.windows(2)).all(|(m, s)| (m[0] == m[1]) == (s[0] == s[1])));
        let t = runs_test(&moved).unwrap();
        prop_assert_eq!(r.runs, t.runs);
        prop_assert_eq!(r.p_value, t.p_value);
    }

    #[test]
    fn runs_test_p_value_is_a_probability(seq in distinct_seq()) {
        let r = runs_test(&seq).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert!(r.runs >= 1 && r.runs < r.n_effective);
    }

    #[test]
    fn wasserstein_is_a_metric(
        a in prop::collection::vec(-5f64..5.0, 1..30),
        b in prop::collection::vec(-5f64..5.0, 1..30),
        c in prop::collection::vec(-5f64..5.0, 1..30),
    ) {
        let ab = wasserstein_1d(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - wasserstein_1d(&b, &a).unwrap()).abs() <= 1e-12);
        let ac = wasserstein_1d(&a, &c).unwrap();
        let cb = wasserstein_1d(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn wasserstein_of_a_shift_is_the_shift(a in prop::collection::vec(-5f64..5.0, 1..30), d in -3f64..3.0) {
        let b: Vec<f64> = a.iter().map(|v| v + d).collect();
        prop_assert!((wasserstein_1d(&a, &b).unwrap() - d.abs()).abs() <= 1e-9);
    }
}
