//! Series containers, synthetic processes, CSV ingestion, standardisation
//! and block extraction.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, uniform_pm1};

/// Fraction of a series used for training when no split is given.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_BURN_IN: usize = 1000;
/// Sampling interval stamped on synthetic series.
pub const SYNTHETIC_PERIOD_SECONDS: i64 = 300;

/// Z-score transform `(x - mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn identity() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }

    /// Mean and population standard deviation of `values`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateData("cannot standardise an empty split".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::DegenerateData(format!(
                "training split is constant (std = {std})"
            )));
        }
        Ok(Self { mean, std })
    }

    #[inline]
    pub fn apply_one(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn invert_one(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|x| self.apply_one(*x)).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|z| self.invert_one(*z)).collect()
    }
}

/// A chronological scalar series with a train/test split.
///
/// Indices `< train_end` form the training split; the remainder (possibly
/// empty) is the test split.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesDataset {
    pub name: String,
    pub values: Vec<f64>,
    pub period_seconds: i64,
    pub start: DateTime<Utc>,
    pub train_end: usize,
}

impl SeriesDataset {
    pub fn new(
        name: impl Into<String>,
        values: Vec<f64>,
        period_seconds: i64,
        start: DateTime<Utc>,
        train_fraction: f64,
    ) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(Error::config(
                "train_fraction",
                format!("must lie in (0, 1], found {train_fraction}"),
            ));
        }
        let n = values.len();
        let mut train_end = ((n as f64) * train_fraction).floor() as usize;
        train_end = train_end.clamp(1, n.max(1));
        if n >= 2 && train_fraction < 1.0 {
            train_end = train_end.min(n - 1);
        }
        Self::with_split(name, values, period_seconds, start, train_end)
    }

    pub fn with_split(
        name: impl Into<String>,
        values: Vec<f64>,
        period_seconds: i64,
        start: DateTime<Utc>,
        train_end: usize,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("value at index {i} is not finite")));
        }
        if train_end == 0 || train_end > values.len() {
            return Err(Error::Data(format!(
                "train_end {train_end} outside [1, {}]",
                values.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            values,
            period_seconds,
            start,
            train_end,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn train(&self) -> &[f64] {
        &self.values[..self.train_end]
    }

    pub fn test(&self) -> &[f64] {
        &self.values[self.train_end..]
    }

    /// Statistics of the training split only.
    pub fn standardizer(&self) -> Result<Standardizer> {
        Standardizer::fit(self.train())
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::seconds(self.period_seconds * index as i64)
    }
}

/// Whole series transformed with training-split statistics.
pub fn standardize(dataset: &SeriesDataset) -> Result<(Vec<f64>, Standardizer)> {
    let s = dataset.standardizer()?;
    Ok((s.apply(&dataset.values), s))
}

pub fn destandardize(values: &[f64], standardizer: &Standardizer) -> Vec<f64> {
    standardizer.invert(values)
}

// ---- synthetic processes --------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    /// `x_t = 0.5 x_{t-1} + u_t`
    Lar,
    /// `x_t = u_t + 2.5 u_{t-1}`
    Ma,
    /// Two-state chain with stay probability 0.6, emitting 0 and 1.
    Mc,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Lar => "lar",
            ProcessKind::Ma => "ma",
            ProcessKind::Mc => "mc",
        }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: ProcessKind,
    pub length: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl GeneratorSpec {
    pub fn new(kind: ProcessKind, length: usize, seed: u64) -> Self {
        Self {
            kind,
            length,
            seed,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::config("length", "must be at least 1"));
        }
        Ok(())
    }
}

pub const LAR_COEFFICIENT: f64 = 0.5;
pub const MA_COEFFICIENT: f64 = 2.5;
pub const MC_STAY_PROBABILITY: f64 = 0.6;

/// `x_t = 0.5 x_{t-1} + u_t` from `x_0 = 0`, dropping the first `burn_in`
/// values. `drivers` supplies `u_1, u_2, ...`.
pub fn lar_recursion(drivers: impl IntoIterator<Item = f64>, length: usize, burn_in: usize) -> Vec<f64> {
    let mut x = 0.0;
    drivers
        .into_iter()
        .take(length + burn_in)
        .map(|u| {
            x = LAR_COEFFICIENT * x + u;
            x
        })
        .skip(burn_in)
        .collect()
}

/// `x_t = u_t + 2.5 u_{t-1}` with `u_0 = 0`, dropping the first `burn_in`.
pub fn ma_recursion(drivers: impl IntoIterator<Item = f64>, length: usize, burn_in: usize) -> Vec<f64> {
    let mut prev = 0.0;
    drivers
        .into_iter()
        .take(length + burn_in)
        .map(|u| {
            let x = u + MA_COEFFICIENT * prev;
            prev = u;
            x
        })
        .skip(burn_in)
        .collect()
}

fn uniform_drivers(seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = substream(seed, crate::rng::streams::GENERATOR_DRIVER);
    std::iter::repeat_with(move || uniform_pm1(&mut rng))
}

fn synthetic_dataset(name: &str, values: Vec<f64>) -> Result<SeriesDataset> {
    SeriesDataset::new(
        name,
        values,
        SYNTHETIC_PERIOD_SECONDS,
        synthetic_start(),
        DEFAULT_TRAIN_FRACTION,
    )
}

pub fn synthetic_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 2, 1, 0, 0, 0).unwrap()
}

pub fn simulate_lar(spec: &GeneratorSpec) -> Vec<f64> {
    lar_recursion(uniform_drivers(spec.seed), spec.length, spec.burn_in)
}

pub fn simulate_ma(spec: &GeneratorSpec) -> Vec<f64> {
    ma_recursion(uniform_drivers(spec.seed), spec.length, spec.burn_in)
}

/// Two-state chain started from its stationary law `(1/2, 1/2)`.
pub fn simulate_mc(spec: &GeneratorSpec) -> Vec<f64> {
    let mut rng = substream(spec.seed, crate::rng::streams::GENERATOR_DRIVER);
    let mut state = rng.random_bool(0.5);
    let mut out = Vec::with_capacity(spec.length);
    for t in 0..spec.length + spec.burn_in {
        if t > 0 && !rng.random_bool(MC_STAY_PROBABILITY) {
            state = !state;
        }
        if t >= spec.burn_in {
            out.push(if state { 1.0 } else { 0.0 });
        }
    }
    out
}

pub fn gen_lar(spec: &GeneratorSpec) -> Result<SeriesDataset> {
    spec.validate()?;
    synthetic_dataset("lar", simulate_lar(spec))
}

pub fn gen_ma(spec: &GeneratorSpec) -> Result<SeriesDataset> {
    spec.validate()?;
    synthetic_dataset("ma", simulate_ma(spec))
}

pub fn gen_mc(spec: &GeneratorSpec) -> Result<SeriesDataset> {
    spec.validate()?;
    synthetic_dataset("mc", simulate_mc(spec))
}

pub fn generate(spec: &GeneratorSpec) -> Result<SeriesDataset> {
    match spec.kind {
        ProcessKind::Lar => gen_lar(spec),
        ProcessKind::Ma => gen_ma(spec),
        ProcessKind::Mc => gen_mc(spec),
    }
}

// ---- CSV ------------------------------------------------------------------

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    NAIVE
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

/// Reads a `timestamp,value` CSV with strictly increasing, evenly spaced
/// ISO-8601 timestamps. Lines starting with `#` are ignored.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SeriesDataset> {
    load_csv_with_split(path, DEFAULT_TRAIN_FRACTION)
}

pub fn load_csv_with_split(path: impl AsRef<Path>, train_fraction: f64) -> Result<SeriesDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;

    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            detail: "file is empty (expected header `timestamp,value`)".into(),
        });
    }
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        let line = reader.position().line().max(1);
        return Err(Error::Parse {
            line,
            detail: format!("expected header `timestamp,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut stamps: Vec<DateTime<Utc>> = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
            line,
            detail: format!("invalid ISO-8601 timestamp `{}`", &record[0]),
        })?;
        let value: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            detail: format!("invalid number `{}`", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Data(format!("non-finite value `{}` at line {line}", &record[1])));
        }
        stamps.push(ts);
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 1,
            detail: "no data rows".into(),
        });
    }
    let period = if stamps.len() >= 2 {
        (stamps[1] - stamps[0]).num_seconds()
    } else {
        0
    };
    if stamps.len() >= 2 && period <= 0 {
        return Err(Error::Format("timestamps must be strictly increasing".into()));
    }
    for (i, w) in stamps.windows(2).enumerate() {
        let step = (w[1] - w[0]).num_seconds();
        if step <= 0 {
            return Err(Error::Format(format!(
                "timestamps not strictly increasing at data row {}",
                i + 2
            )));
        }
        if step != period {
            return Err(Error::Format(format!(
                "irregular spacing at data row {}: {step} s after a {period} s period",
                i + 2
            )));
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    SeriesDataset::new(name, values, period, stamps[0], train_fraction)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::Parse {
            line,
            detail: e.to_string(),
        },
    }
}

/// Writes `dataset` in the `timestamp,value` schema, preceded by an
/// optional `# config_hash=...` provenance line.
pub fn write_csv(dataset: &SeriesDataset, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash={h}")?;
    }
    writeln!(out, "timestamp,value")?;
    for (i, v) in dataset.values.iter().enumerate() {
        writeln!(
            out,
            "{},{}",
            dataset.timestamp(i).format("%Y-%m-%dT%H:%M:%SZ"),
            format_f64(*v)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

// ---- blocks ---------------------------------------------------------------

/// Overlapping newest-first blocks `(x_t, ..., x_{t-n+1})` for
/// `t = n-1, ..., len-1`, stride 1.
pub fn make_blocks(series: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 || series.len() < n {
        return Err(Error::InsufficientHistory {
            needed: n.max(1),
            got: series.len(),
        });
    }
    Ok((n - 1..series.len())
        .map(|t| series[t + 1 - n..=t].iter().rev().copied().collect())
        .collect())
}
