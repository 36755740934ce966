//! Generative probabilistic forecasting from the innovation representation.
//!
//! The observed past is encoded into innovations once. Each trajectory then
//! draws fresh uniform innovations for the future steps and decodes windows
//! that mix those draws with the newest observed innovations.

use std::io::Write as _;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::data::format_f64;
use crate::evaluation::median;
use crate::networks::WiaeModel;
use crate::rng::{streams, substream, uniform_pm1};
use crate::{Error, Result};

pub const DEFAULT_TRAJECTORIES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForecastRequest {
    /// Index of the newest observation the forecast conditions on.
    pub origin: usize,
    /// Number of future steps `T`.
    pub horizon: usize,
    /// Number of trajectories `S`.
    pub trajectories: usize,
    pub seed: u64,
}

impl ForecastRequest {
    pub fn new(origin: usize, horizon: usize, seed: u64) -> Self {
        Self {
            origin,
            horizon,
            trajectories: DEFAULT_TRAJECTORIES,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Contract("forecast horizon must be at least 1".into()));
        }
        if self.trajectories == 0 {
            return Err(Error::Contract("at least one trajectory is required".into()));
        }
        Ok(())
    }
}

/// `S x T` destandardised samples with their column statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastDistribution {
    /// One row per trajectory, one column per step.
    pub samples: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub request: ForecastRequest,
}

/// Innovations of a raw observed series under the model's standardisation;
/// the last entry belongs to the last observation.
pub fn innovation_history(model: &WiaeModel, observed: &[f64]) -> Result<Vec<f64>> {
    if observed.len() < model.window {
        return Err(Error::InsufficientHistory {
            needed: model.window,
            got: observed.len(),
        });
    }
    if observed.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observed history".into()));
    }
    model.encode_series(&model.standardizer.apply(observed))
}

/// Per-trajectory uniform draws `u_{t+1}, ..., u_{t+T}`.
fn future_draws(request: &ForecastRequest, trajectory: usize) -> Vec<f64> {
    let mut rng = substream(request.seed, streams::TRAJECTORY_BASE + trajectory as u64);
    (0..request.horizon).map(|_| uniform_pm1(&mut rng)).collect()
}

/// Decoder input for step `k` (1-based) of one trajectory, newest first.
fn mixed_window(draws: &[f64], history: &[f64], k: usize, m: usize, out: &mut Vec<f64>) {
    for j in 0..m {
        if j < k {
            out.push(draws[k - 1 - j]);
        } else {
            out.push(history[history.len() - 1 - (j - k)]);
        }
    }
}

fn check_history(model: &WiaeModel, innovations: &[f64]) -> Result<()> {
    let need = model.window.saturating_sub(1);
    if innovations.len() < need.max(1) {
        return Err(Error::InsufficientHistory {
            needed: need.max(1),
            got: innovations.len(),
        });
    }
    Ok(())
}

/// Decodes the rows of `windows` (`rows x m`) and destandardises.
fn decode(model: &WiaeModel, rows: usize, windows: Vec<f64>) -> Result<Vec<f64>> {
    let x = Tensor::matrix(rows, model.window, windows)?;
    let out = model.decoder.forward(&x)?.into_data();
    Ok(model.standardizer.invert(&out))
}

/// Samples `S` trajectories of length `T` conditioned on `innovations`.
pub fn sample_trajectories(
    model: &WiaeModel,
    innovations: &[f64],
    request: &ForecastRequest,
) -> Result<ForecastDistribution> {
    request.validate()?;
    check_history(model, innovations)?;
    let (s, t, m) = (request.trajectories, request.horizon, model.window);
    let mut windows = Vec::with_capacity(s * t * m);
    for i in 0..s {
        let draws = future_draws(request, i);
        for k in 1..=t {
            mixed_window(&draws, innovations, k, m, &mut windows);
        }
    }
    let flat = decode(model, s * t, windows)?;
    let samples: Vec<Vec<f64>> = flat.chunks_exact(t).map(<[f64]>::to_vec).collect();
    let (mean, median) = column_stats(&samples);
    Ok(ForecastDistribution {
        samples,
        mean,
        median,
        request: request.clone(),
    })
}

/// Column `step` (1-based) of [`sample_trajectories`] without decoding the
/// other steps. Uses the same draws, so the values are identical.
pub fn sample_horizon_step(
    model: &WiaeModel,
    innovations: &[f64],
    request: &ForecastRequest,
    step: usize,
) -> Result<Vec<f64>> {
    request.validate()?;
    check_history(model, innovations)?;
    if step == 0 || step > request.horizon {
        return Err(Error::Contract(format!(
            "step {step} outside horizon 1..={}",
            request.horizon
        )));
    }
    let m = model.window;
    let mut windows = Vec::with_capacity(request.trajectories * m);
    for i in 0..request.trajectories {
        let draws = future_draws(request, i);
        mixed_window(&draws, innovations, step, m, &mut windows);
    }
    decode(model, request.trajectories, windows)
}

/// Encodes `series[..=request.origin]` and samples trajectories from it.
pub fn forecast(model: &WiaeModel, series: &[f64], request: &ForecastRequest) -> Result<ForecastDistribution> {
    let observed = observed_prefix(model, series, request.origin)?;
    let history = innovation_history(model, observed)?;
    sample_trajectories(model, &history, request)
}

/// `series[..=origin]`, checked to hold enough values for encoding and
/// decoding: at least `2(m - 1) + 1`.
pub fn observed_prefix<'a>(model: &WiaeModel, series: &'a [f64], origin: usize) -> Result<&'a [f64]> {
    let needed = 2 * (model.window - 1) + 1;
    if origin >= series.len() {
        return Err(Error::Contract(format!(
            "origin {origin} lies beyond a series of length {}",
            series.len()
        )));
    }
    if origin + 1 < needed {
        return Err(Error::InsufficientHistory {
            needed,
            got: origin + 1,
        });
    }
    Ok(&series[..=origin])
}

fn column_stats(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let t = samples.first().map_or(0, Vec::len);
    let s = samples.len() as f64;
    let mut means = Vec::with_capacity(t);
    let mut medians = Vec::with_capacity(t);
    for k in 0..t {
        let col: Vec<f64> = samples.iter().map(|r| r[k]).collect();
        means.push(col.iter().sum::<f64>() / s);
        medians.push(median(&col));
    }
    (means, medians)
}

/// Column-wise `(mean, median)` of the samples.
pub fn point_estimates(dist: &ForecastDistribution) -> Result<(Vec<f64>, Vec<f64>)> {
    if dist.samples.is_empty() || dist.samples[0].is_empty() {
        return Err(Error::Contract("no samples to summarise".into()));
    }
    Ok(column_stats(&dist.samples))
}

fn step_header(first: &str, horizon: usize) -> String {
    let mut h = first.to_string();
    for k in 1..=horizon {
        h.push_str(&format!(",step_{k}"));
    }
    h
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(",")
}

/// One row per trajectory, one column per step.
pub fn write_trajectories_csv(dist: &ForecastDistribution, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash={h}")?;
    }
    writeln!(out, "{}", step_header("trajectory", dist.request.horizon))?;
    for (i, row) in dist.samples.iter().enumerate() {
        writeln!(out, "{i},{}", join(row))?;
    }
    out.flush()?;
    Ok(())
}

/// Mean and median rows.
pub fn write_summary_csv(dist: &ForecastDistribution, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash={h}")?;
    }
    writeln!(out, "{}", step_header("statistic", dist.request.horizon))?;
    writeln!(out, "mean,{}", join(&dist.mean))?;
    writeln!(out, "median,{}", join(&dist.median))?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Standardizer;
    use crate::networks::{init_mlp, Activation, Layer, Mlp, MlpSpec};

    /// Linear single-layer network with the given input weights.
    fn linear(weights: Vec<f64>, head: Activation) -> Mlp {
        let m = weights.len();
        let spec = MlpSpec::new(m, vec![], 1, head).unwrap();
        Mlp::from_layers(
            spec,
            vec![Layer {
                weight: Tensor::matrix(m, 1, weights).unwrap(),
                bias: Tensor::matrix(1, 1, vec![0.0]).unwrap(),
            }],
        )
        .unwrap()
    }

    fn passthrough_model(m: usize, standardizer: Standardizer) -> WiaeModel {
        let mut first = vec![0.0; m];
        first[0] = 1.0;
        let enc = init_mlp(&MlpSpec::standard(m, Activation::Tanh), 3).unwrap();
        WiaeModel::new(enc, linear(first, Activation::Linear), m, standardizer).unwrap()
    }

    #[test]
    fn history_lengths_and_causality() {
        let model = WiaeModel::init(5, Standardizer { mean: 1.0, std: 2.0 }, 4).unwrap();
        let series: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        assert_eq!(innovation_history(&model, &series[..5]).unwrap().len(), 1);
        assert!(matches!(
            innovation_history(&model, &series[..4]),
            Err(Error::InsufficientHistory { needed: 5, got: 4 })
        ));
        let full = innovation_history(&model, &series).unwrap();
        let direct = model.encode_series(&model.standardizer.apply(&series)).unwrap();
        assert_eq!(full, direct);
        let shorter = innovation_history(&model, &series[..39]).unwrap();
        assert_eq!(&full[..shorter.len()], &shorter[..]);
        assert_eq!(full.len(), shorter.len() + 1);
    }

    #[test]
    fn passthrough_decoder_emits_scaled_uniforms() {
        let st = Standardizer { mean: 3.0, std: 2.0 };
        let model = passthrough_model(4, st);
        let history = vec![0.1, -0.2, 0.3, 0.05];
        let req = ForecastRequest {
            origin: 0,
            horizon: 3,
            trajectories: 500,
            seed: 11,
        };
        let dist = sample_trajectories(&model, &history, &req).unwrap();
        assert_eq!(dist.samples.len(), 500);
        assert!(dist.samples.iter().all(|r| r.len() == 3));
        for (i, row) in dist.samples.iter().enumerate() {
            let draws = future_draws(&req, i);
            for (k, v) in row.iter().enumerate() {
                assert_eq!(*v, 3.0 + 2.0 * draws[k]);
                assert!((1.0..=5.0).contains(v));
            }
        }
    }

    #[test]
    fn windows_mix_draws_and_history() {
        let mut out = Vec::new();
        mixed_window(&[10.0, 20.0, 30.0], &[1.0, 2.0, 3.0], 2, 4, &mut out);
        assert_eq!(out, vec![20.0, 10.0, 3.0, 2.0]);
        out.clear();
        mixed_window(&[10.0, 20.0, 30.0], &[1.0, 2.0, 3.0], 3, 2, &mut out);
        assert_eq!(out, vec![30.0, 20.0]);
    }

    #[test]
    fn deterministic_and_horizon_step_consistent() {
        let model = WiaeModel::init(6, Standardizer::identity(), 2).unwrap();
        let history: Vec<f64> = (0..12).map(|i| (i as f64).cos() * 0.5).collect();
        let req = ForecastRequest {
            origin: 0,
            horizon: 9,
            trajectories: 40,
            seed: 5,
        };
        let a = sample_trajectories(&model, &history, &req).unwrap();
        let b = sample_trajectories(&model, &history, &req).unwrap();
        assert_eq!(a, b);
        for step in [1, 4, 9] {
            let col = sample_horizon_step(&model, &history, &req, step).unwrap();
            let expected: Vec<f64> = a.samples.iter().map(|r| r[step - 1]).collect();
            assert_eq!(col, expected);
        }
        assert!(sample_horizon_step(&model, &history, &req, 10).is_err());
        let (mean, median) = point_estimates(&a).unwrap();
        assert_eq!((mean, median), (a.mean.clone(), a.median.clone()));
        assert!(a.samples.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn point_estimate_examples() {
        let req = ForecastRequest::new(0, 1, 0);
        let mk = |rows: Vec<Vec<f64>>| {
            let (mean, median) = column_stats(&rows);
            ForecastDistribution {
                samples: rows,
                mean,
                median,
                request: req.clone(),
            }
        };
        let d = mk(vec![vec![0.0], vec![1.0], vec![1.0], vec![2.0]]);
        assert_eq!(point_estimates(&d).unwrap(), (vec![1.0], vec![1.0]));
        let d = mk(vec![vec![0.0], vec![2.0]]);
        assert_eq!(point_estimates(&d).unwrap().1, vec![1.0]);
        let d = mk(vec![vec![1.5, -2.0]; 3]);
        assert_eq!(point_estimates(&d).unwrap(), (vec![1.5, -2.0], vec![1.5, -2.0]));
    }

    #[test]
    fn request_and_history_checks() {
        let model = WiaeModel::init(5, Standardizer::identity(), 2).unwrap();
        let bad = ForecastRequest {
            origin: 0,
            horizon: 0,
            trajectories: 3,
            seed: 0,
        };
        assert!(sample_trajectories(&model, &[0.0; 8], &bad).is_err());
        let ok = ForecastRequest::new(0, 2, 0);
        assert!(matches!(
            sample_trajectories(&model, &[0.0; 3], &ok),
            Err(Error::InsufficientHistory { needed: 4, got: 3 })
        ));
        let series = vec![0.5; 20];
        assert!(matches!(
            observed_prefix(&model, &series, 7),
            Err(Error::InsufficientHistory { needed: 9, got: 8 })
        ));
        assert_eq!(observed_prefix(&model, &series, 8).unwrap().len(), 9);
        assert!(observed_prefix(&model, &series, 20).is_err());
    }
}
