mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiae::evaluation::{crps, ecdf, ecdf_at, evaluate_point, evaluate_samples, point_metrics, OutlierBasis};
use wiae::Error;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn hand_cases() {
    let r = point_metrics(&[1.0, 2.0], &[0.0, 0.0], 1).unwrap();
    assert_eq!(r.nmse, 1.0);
    assert_eq!(crps(&[0.0, 1.0], 0.0).unwrap(), 0.25);
    assert_eq!(crps(&[2.5], 1.0).unwrap(), 1.5);
    let r = point_metrics(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], 1).unwrap();
    assert_eq!((r.nmse, r.nmae, r.mase, r.smape), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn undefined_and_invalid_inputs() {
    assert!(matches!(point_metrics(&[0.0, 0.0], &[1.0, 1.0], 1), Err(Error::UndefinedMetric("nmse"))));
    assert!(matches!(point_metrics(&[1.0, 1.0, 1.0], &[0.0, 2.0, 1.0], 1), Err(Error::UndefinedMetric("mase"))));
    assert!(matches!(point_metrics(&[1.0, 2.0], &[1.0, 2.0], 2), Err(Error::Contract(_))));
    assert!(matches!(point_metrics(&[1.0, 2.0], &[1.0], 1), Err(Error::Dimension { .. })));
    assert!(matches!(point_metrics(&[1.0, f64::NAN], &[1.0, 1.0], 1), Err(Error::NonFinite(_))));
    assert!(crps(&[], 0.0).is_err());
    assert!(ecdf(&[]).is_err());
}

#[test]
fn metrics_match_direct_formulas_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.random_range(3..60);
        let s = rng.random_range(1..n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let r = point_metrics(&x, &f, s).unwrap();
        assert!(close(r.nmse, oracle_nmse(&x, &f), 1e-12));
        assert!(close(r.nmese, oracle_nmese(&x, &f), 1e-12));
        assert!(close(r.nmae, oracle_nmae(&x, &f), 1e-12));
        assert!(close(r.nmeae, oracle_nmeae(&x, &f), 1e-12));
        assert!(close(r.mase, oracle_mase(&x, &f, s), 1e-12));
        assert!(close(r.smape, oracle_smape(&x, &f), 1e-12));

        let samples: Vec<f64> = (0..rng.random_range(1..80)).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = rng.random_range(-4.0..4.0);
        assert!(close(crps(&samples, y).unwrap(), oracle_crps(&samples, y), 1e-12));

        let errs: Vec<f64> = f.iter().zip(&x).map(|(a, b)| (a - b).abs()).collect();
        let table = ecdf(&errs).unwrap();
        for t in errs.iter().chain(&[-1.0, 0.0, 100.0]) {
            assert!(close(ecdf_at(&table, *t), oracle_ecdf(&errs, *t), 1e-12));
        }
    }
}

#[test]
fn sample_scores_use_mean_median_and_crps() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 30;
    let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..41).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let means: Vec<f64> = samples.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let medians: Vec<f64> = samples.iter().map(|v| oracle_median(v)).collect();
    let r = evaluate_samples(&truth, &samples, 2, OutlierBasis::Truth).unwrap();
    assert_eq!(r.excluded, 0);
    assert!(close(r.nmse, oracle_nmse(&truth, &means), 1e-12));
    assert!(close(r.nmae, oracle_nmae(&truth, &medians), 1e-12));
    assert!(close(r.mase, oracle_mase(&truth, &medians, 2), 1e-12));
    let c: f64 = truth.iter().zip(&samples).map(|(y, s)| oracle_crps(s, *y)).sum::<f64>() / n as f64;
    assert!(close(r.crps.unwrap(), c, 1e-12));
}

#[test]
fn three_sigma_outliers_are_excluded() {
    let mut truth: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 / 10.0 + 1.0).collect();
    truth[50] = 1000.0;
    let fc = vec![1.5; 100];
    let r = evaluate_point(&truth, &fc, 1, OutlierBasis::Truth).unwrap();
    assert_eq!((r.evaluated, r.excluded), (99, 1));
    let mut kept = truth.clone();
    kept.remove(50);
    assert!(close(r.nmse, oracle_nmse(&kept, &vec![1.5; 99]), 1e-12));
}

proptest! {
    #[test]
    fn smape_is_bounded(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..50)) {
        let (x, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.windows(2).any(|w| w[0] != w[1]));
        let r = point_metrics(&x, &f, 1).unwrap();
        prop_assert!((0.0..=2.0).contains(&r.smape));
    }

    #[test]
    fn normalised_metrics_are_scale_free(
        pairs in prop::collection::vec((-10f64..10.0, -10f64..10.0), 3..40),
        c in 0.01f64..100.0,
    ) {
        let (x, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.windows(2).any(|w| w[0] != w[1]));
        let a = point_metrics(&x, &f, 1).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        let fs: Vec<f64> = f.iter().map(|v| v * c).collect();
        let b = point_metrics(&xs, &fs, 1).unwrap();
        for ((_, u), (_, v)) in a.values().into_iter().zip(b.values()) {
            prop_assert!(close(u, v, 1e-9));
        }
    }

    #[test]
    fn perfect_forecast_scores_zero(x in prop::collection::vec(-10f64..10.0, 3..40)) {
        prop_assume!(x.windows(2).any(|w| w[0] != w[1]));
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let r = point_metrics(&x, &x, 1).unwrap();
        for (_, v) in r.values() {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn crps_of_point_mass_is_absolute_error(v in -1e3f64..1e3, y in -1e3f64..1e3, k in 1usize..20) {
        let c = crps(&vec![v; k], y).unwrap();
        prop_assert!(close(c, (v - y).abs(), 1e-12));
    }

    #[test]
    fn crps_is_nonnegative_and_translation_invariant(
        s in prop::collection::vec(-5f64..5.0, 1..40),
        y in -5f64..5.0,
        shift in -50f64..50.0,
    ) {
        let c = crps(&s, y).unwrap();
        prop_assert!(c >= -1e-12);
        let moved: Vec<f64> = s.iter().map(|v| v + shift).collect();
        prop_assert!((crps(&moved, y + shift).unwrap() - c).abs() <= 1e-9);
    }

    #[test]
    fn ecdf_is_a_monotone_step_function(e in prop::collection::vec(0f64..10.0, 1..60)) {
        let t = ecdf(&e).unwrap();
        prop_assert!(t.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(t.last().unwrap().1, 1.0);
    }
}
