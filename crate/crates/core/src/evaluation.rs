//! Point and distributional forecast scores, outlier exclusion and
//! empirical CDFs of errors.

use std::io::Write as _;
use std::path::Path;

use crate::data::format_f64;
use crate::{Error, Result};

/// Series the 3-sigma outlier rule is computed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutlierBasis {
    /// Mean and population std of the test truth.
    #[default]
    Truth,
    /// Mean and population std of the forecast errors.
    Error,
}

impl OutlierBasis {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "truth" => Some(Self::Truth),
            "error" => Some(Self::Error),
            _ => None,
        }
    }
}

/// Scores of one forecaster at one horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub nmse: f64,
    pub nmese: f64,
    pub nmae: f64,
    pub nmeae: f64,
    pub mase: f64,
    pub smape: f64,
    /// Only for distributional forecasts.
    pub crps: Option<f64>,
    pub evaluated: usize,
    pub excluded: usize,
    /// Horizon step `s`, also the lag of the naive forecaster in MASE.
    pub horizon: usize,
}

pub const METRIC_CSV_HEADER: &str =
    "dataset,horizon,method,seed,nmse,nmese,nmae,nmeae,mase,smape,crps,evaluated,excluded";

impl MetricReport {
    /// `(name, value)` pairs in a fixed order; CRPS only when present.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("nmse", self.nmse),
            ("nmese", self.nmese),
            ("nmae", self.nmae),
            ("nmeae", self.nmeae),
            ("mase", self.mase),
            ("smape", self.smape),
        ];
        if let Some(c) = self.crps {
            v.push(("crps", c));
        }
        v
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.values() {
            out.push_str(&format!("{k}={}\n", format_f64(v)));
        }
        out.push_str(&format!(
            "evaluated={}\nexcluded={}\nhorizon={}\n",
            self.evaluated, self.excluded, self.horizon
        ));
        out
    }

    pub fn to_csv_row(&self, dataset: &str, method: &str, seed: u64) -> String {
        let crps = self.crps.map(format_f64).unwrap_or_default();
        format!(
            "{dataset},{},{method},{seed},{},{},{},{},{},{},{crps},{},{}",
            self.horizon,
            format_f64(self.nmse),
            format_f64(self.nmese),
            format_f64(self.nmae),
            format_f64(self.nmeae),
            format_f64(self.mase),
            format_f64(self.smape),
            self.evaluated,
            self.excluded
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median; the midpoint of the two central values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn check_pair(truth: &[f64], forecast: &[f64]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::Contract("metrics need at least one point".into()));
    }
    if truth.len() != forecast.len() {
        return Err(Error::dim(
            "metrics",
            format!("{} truth values against {} forecasts", truth.len(), forecast.len()),
        ));
    }
    if truth.iter().chain(forecast).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

fn squared_metrics(truth: &[f64], forecast: &[f64]) -> Result<(f64, f64)> {
    let power = mean(&truth.iter().map(|x| x * x).collect::<Vec<_>>());
    if power == 0.0 {
        return Err(Error::UndefinedMetric("nmse"));
    }
    let sq: Vec<f64> = truth.iter().zip(forecast).map(|(x, f)| (x - f) * (x - f)).collect();
    let nmese = median(&sq.iter().map(|e| e / power).collect::<Vec<_>>());
    Ok((mean(&sq) / power, nmese))
}

/// `(nmae, nmeae, mase, smape)`.
fn absolute_metrics(truth: &[f64], forecast: &[f64], s: usize) -> Result<(f64, f64, f64, f64)> {
    let n = truth.len();
    let scale = mean(&truth.iter().map(|x| x.abs()).collect::<Vec<_>>());
    if scale == 0.0 {
        return Err(Error::UndefinedMetric("nmae"));
    }
    let abs: Vec<f64> = truth.iter().zip(forecast).map(|(x, f)| (x - f).abs()).collect();
    let mae = mean(&abs);
    let nmeae = median(&abs.iter().map(|e| e / scale).collect::<Vec<_>>());
    if s == 0 || n <= s {
        return Err(Error::Contract(format!(
            "MASE needs 1 <= s < N, found s = {s}, N = {n}"
        )));
    }
    let naive: Vec<f64> = (s..n).map(|t| (truth[t] - truth[t - s]).abs()).collect();
    let naive_mae = mean(&naive);
    if naive_mae == 0.0 {
        return Err(Error::UndefinedMetric("mase"));
    }
    // A point where truth and forecast are both zero contributes zero error.
    let smape_terms: Vec<f64> = truth
        .iter()
        .zip(forecast)
        .map(|(x, f)| {
            let denom = (x.abs() + f.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (x - f).abs() / denom
            }
        })
        .collect();
    Ok((mae / scale, nmeae, mae / naive_mae, mean(&smape_terms)))
}

/// The six point metrics of `forecast` against `truth`, horizon step `s`.
pub fn point_metrics(truth: &[f64], forecast: &[f64], s: usize) -> Result<MetricReport> {
    check_pair(truth, forecast)?;
    let (nmse, nmese) = squared_metrics(truth, forecast)?;
    let (nmae, nmeae, mase, smape) = absolute_metrics(truth, forecast, s)?;
    Ok(MetricReport {
        nmse,
        nmese,
        nmae,
        nmeae,
        mase,
        smape,
        crps: None,
        evaluated: truth.len(),
        excluded: 0,
        horizon: s,
    })
}

/// Sample-based CRPS in energy form, diagonal pairs included.
pub fn crps(samples: &[f64], observation: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("crps needs at least one sample".into()));
    }
    let s = samples.len() as f64;
    let spread = samples.iter().map(|x| (x - observation).abs()).sum::<f64>() / s;
    // Sum over ordered pairs via sorted prefix sums: O(S log S).
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let mut pair_sum = 0.0;
    let mut prefix = 0.0;
    for (i, x) in v.iter().enumerate() {
        pair_sum += i as f64 * x - prefix;
        prefix += x;
    }
    Ok(spread - pair_sum / (s * s))
}

/// Indices kept by the 3-sigma rule on `reference`: `|x - mean| > 3 std`
/// (population std) is excluded.
pub fn outlier_mask(reference: &[f64]) -> Vec<bool> {
    if reference.is_empty() {
        return Vec::new();
    }
    let mu = mean(reference);
    let var = reference.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / reference.len() as f64;
    let limit = 3.0 * var.sqrt();
    reference.iter().map(|x| (x - mu).abs() <= limit).collect()
}

/// Drops 3-sigma outliers of `truth` from `truth` and every companion list.
/// Returns the filtered truth, filtered companions and the excluded count.
pub fn filter_outliers(truth: &[f64], companions: &[&[f64]]) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let keep = outlier_mask(truth);
    apply_mask(&keep, truth, companions)
}

fn apply_mask(keep: &[bool], truth: &[f64], companions: &[&[f64]]) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    if let Some(c) = companions.iter().find(|c| c.len() != truth.len()) {
        return Err(Error::dim(
            "filter_outliers",
            format!("companion of length {} for {} truth values", c.len(), truth.len()),
        ));
    }
    let pick = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect()
    };
    let excluded = keep.iter().filter(|k| !**k).count();
    Ok((pick(truth), companions.iter().map(|c| pick(c)).collect(), excluded))
}

fn basis_mask(truth: &[f64], forecast: &[f64], basis: OutlierBasis) -> Vec<bool> {
    match basis {
        OutlierBasis::Truth => outlier_mask(truth),
        OutlierBasis::Error => {
            let e: Vec<f64> = truth.iter().zip(forecast).map(|(x, f)| x - f).collect();
            outlier_mask(&e)
        }
    }
}

/// Point metrics after outlier exclusion.
pub fn evaluate_point(truth: &[f64], forecast: &[f64], s: usize, basis: OutlierBasis) -> Result<MetricReport> {
    check_pair(truth, forecast)?;
    let keep = basis_mask(truth, forecast, basis);
    let (t, rest, excluded) = apply_mask(&keep, truth, &[forecast])?;
    let mut report = point_metrics(&t, &rest[0], s)?;
    report.excluded = excluded;
    Ok(report)
}

/// Scores of a sampled forecast: squared metrics use the per-point sample
/// mean, absolute metrics the per-point sample median, and CRPS the full
/// sample set. `samples[i]` are the draws for `truth[i]`.
pub fn evaluate_samples(truth: &[f64], samples: &[Vec<f64>], s: usize, basis: OutlierBasis) -> Result<MetricReport> {
    if samples.len() != truth.len() {
        return Err(Error::dim(
            "evaluate_samples",
            format!("{} sample sets for {} truth values", samples.len(), truth.len()),
        ));
    }
    if samples.iter().any(|v| v.is_empty()) {
        return Err(Error::Contract("every point needs at least one sample".into()));
    }
    let means: Vec<f64> = samples.iter().map(|v| mean(v)).collect();
    let medians: Vec<f64> = samples.iter().map(|v| median(v)).collect();
    check_pair(truth, &means)?;
    let keep = basis_mask(truth, &means, basis);
    let idx: Vec<usize> = (0..truth.len()).filter(|&i| keep[i]).collect();
    let t: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
    let mu: Vec<f64> = idx.iter().map(|&i| means[i]).collect();
    let med: Vec<f64> = idx.iter().map(|&i| medians[i]).collect();
    if t.is_empty() {
        return Err(Error::Contract("every point was excluded as an outlier".into()));
    }
    let (nmse, nmese) = squared_metrics(&t, &mu)?;
    let (nmae, nmeae, mase, smape) = absolute_metrics(&t, &med, s)?;
    let scores = idx
        .iter()
        .map(|&i| crps(&samples[i], truth[i]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricReport {
        nmse,
        nmese,
        nmae,
        nmeae,
        mase,
        smape,
        crps: Some(mean(&scores)),
        evaluated: t.len(),
        excluded: truth.len() - t.len(),
        horizon: s,
    })
}

/// `(t, F_N(t))` at the sorted distinct values of `errors`, with
/// `F_N(t) = #{e_i <= t} / N`.
pub fn ecdf(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::Contract("ecdf needs at least one value".into()));
    }
    if errors.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ecdf input".into()));
    }
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = f,
            _ => out.push((*x, f)),
        }
    }
    Ok(out)
}

/// Evaluates the step function returned by [`ecdf`] at `t`.
pub fn ecdf_at(points: &[(f64, f64)], t: f64) -> f64 {
    match points.partition_point(|(x, _)| *x <= t) {
        0 => 0.0,
        k => points[k - 1].1,
    }
}

/// Two-column CSV `error,ecdf`.
pub fn write_ecdf_csv(points: &[(f64, f64)], path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash={h}")?;
    }
    writeln!(out, "error,ecdf")?;
    for (x, f) in points {
        writeln!(out, "{},{}", format_f64(*x), format_f64(*f))?;
    }
    out.flush()?;
    Ok(())
}
