//! Independent reference implementations used by the integration tests.
//! Everything here is written from the defining formulas, as directly as
//! possible, and shares no code with the library.
#![allow(dead_code)]

use wiae::autodiff::Tensor;
use wiae::data::Standardizer;
use wiae::networks::{Activation, Layer, Mlp, MlpSpec, WiaeModel};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median by explicit sort; midpoint of the central pair for even counts.
pub fn oracle_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

pub fn oracle_nmse(x: &[f64], f: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = x.iter().map(|a| a.powi(2)).sum();
    num / den
}

pub fn oracle_nmese(x: &[f64], f: &[f64]) -> f64 {
    let p = mean(&x.iter().map(|a| a.powi(2)).collect::<Vec<_>>());
    oracle_median(&x.iter().zip(f).map(|(a, b)| (a - b).powi(2) / p).collect::<Vec<_>>())
}

pub fn oracle_nmae(x: &[f64], f: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(f).map(|(a, b)| (a - b).abs()).sum();
    let den: f64 = x.iter().map(|a| a.abs()).sum();
    num / den
}

pub fn oracle_nmeae(x: &[f64], f: &[f64]) -> f64 {
    let a = mean(&x.iter().map(|a| a.abs()).collect::<Vec<_>>());
    oracle_median(&x.iter().zip(f).map(|(p, q)| (p - q).abs() / a).collect::<Vec<_>>())
}

pub fn oracle_mase(x: &[f64], f: &[f64], s: usize) -> f64 {
    let n = x.len();
    let mut mae = 0.0;
    for t in 0..n {
        mae += (x[t] - f[t]).abs();
    }
    mae /= n as f64;
    let mut naive = 0.0;
    for t in s..n {
        naive += (x[t] - x[t - s]).abs();
    }
    naive /= (n - s) as f64;
    mae / naive
}

pub fn oracle_smape(x: &[f64], f: &[f64]) -> f64 {
    let mut total = 0.0;
    for (a, b) in x.iter().zip(f) {
        if a.abs() + b.abs() > 0.0 {
            total += 2.0 * (a - b).abs() / (a.abs() + b.abs());
        }
    }
    total / x.len() as f64
}

/// Energy-form CRPS with an explicit double sum over all ordered pairs.
pub fn oracle_crps(samples: &[f64], y: f64) -> f64 {
    let s = samples.len() as f64;
    let first: f64 = samples.iter().map(|v| (v - y).abs()).sum::<f64>() / s;
    let mut pairs = 0.0;
    for a in samples {
        for b in samples {
            pairs += (a - b).abs();
        }
    }
    first - pairs / (2.0 * s * s)
}

/// Fraction of `errors` that are `<= t`.
pub fn oracle_ecdf(errors: &[f64], t: f64) -> f64 {
    errors.iter().filter(|e| **e <= t).count() as f64 / errors.len() as f64
}

/// W1 between two empirical laws via the CDF integral over the merged support.
pub fn oracle_w1(a: &[f64], b: &[f64]) -> f64 {
    let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let cdf = |v: &[f64], t: f64| v.iter().filter(|x| **x <= t).count() as f64 / v.len() as f64;
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0]);
    }
    total
}

/// Number of maximal monotone runs, counted by scanning for direction
/// changes, ignoring ties.
pub fn oracle_runs(seq: &[f64]) -> usize {
    let mut dir = 0i8;
    let mut runs = 0;
    for w in seq.windows(2) {
        let d = if w[1] > w[0] {
            1
        } else if w[1] < w[0] {
            -1
        } else {
            continue;
        };
        if d != dir {
            runs += 1;
            dir = d;
        }
    }
    runs
}

fn linear_net(weights: Vec<f64>) -> Mlp {
    let m = weights.len();
    let spec = MlpSpec::new(m, vec![], 1, Activation::Linear).unwrap();
    Mlp::from_layers(
        spec,
        vec![Layer {
            weight: Tensor::matrix(m, 1, weights).unwrap(),
            bias: Tensor::matrix(1, 1, vec![0.0]).unwrap(),
        }],
    )
    .unwrap()
}

/// Exact inverse pair for `x_t = 0.5 x_{t-1} + u_t`: the encoder computes
/// `x_t - 0.5 x_{t-1}` and the decoder `sum_j 0.5^j u_{t-j}` over the window.
pub fn lar_inverse_model(m: usize) -> WiaeModel {
    let mut enc = vec![0.0; m];
    enc[0] = 1.0;
    enc[1] = -0.5;
    let dec: Vec<f64> = (0..m).map(|j| 0.5f64.powi(j as i32)).collect();
    WiaeModel::new(linear_net(enc), linear_net(dec), m, Standardizer::identity()).unwrap()
}

/// CDF of `U[-1, 1]`.
pub fn uniform_pm1_cdf(x: f64) -> f64 {
    ((x + 1.0) / 2.0).clamp(0.0, 1.0)
}
