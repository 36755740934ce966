//! Run configuration, model persistence and the command pipeline behind the
//! `wiae` binary.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::data::{self, format_f64, GeneratorSpec, SeriesDataset, Standardizer, DEFAULT_TRAIN_FRACTION};
use crate::evaluation::{self, OutlierBasis, METRIC_CSV_HEADER};
use crate::forecasting::{self, ForecastRequest, DEFAULT_TRAJECTORIES};
use crate::networks::{Layer, Mlp, MlpSpec, WiaeModel, MODEL_FORMAT_VERSION};
use crate::stats_tests::{self, RunsTestReport};
use crate::training::{self, Profile, TrainConfig};
use crate::{Error, Result};

/// Version of the run configuration schema.
pub const CONFIG_FORMAT_VERSION: u32 = 1;
/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "WIAE_OUTPUT_DIR";
/// Default horizon: 15 five-minute steps.
pub const DEFAULT_HORIZON: usize = 15;

pub const SERIES_FILE: &str = "series.csv";
pub const MODEL_FILE: &str = "model.json";
pub const LOSSES_FILE: &str = "losses.csv";
pub const INNOVATIONS_FILE: &str = "innovations.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const FORECAST_SUMMARY_FILE: &str = "forecast_summary.csv";
pub const METRICS_TEXT_FILE: &str = "metrics.txt";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const ECDF_ABS_FILE: &str = "ecdf_abs.csv";
pub const ECDF_SQ_FILE: &str = "ecdf_sq.csv";
pub const RUNS_TEXT_FILE: &str = "runs.txt";
pub const RUNS_CSV_FILE: &str = "runs.csv";

/// Where the series comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Generator(GeneratorSpec),
    /// Path as written in the config; resolved against the config directory.
    Csv(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForecastSettings {
    pub horizon: usize,
    pub trajectories: usize,
    /// Forecast origin for `forecast`; the last observation when absent.
    pub origin: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationSettings {
    /// Distance between consecutive forecast origins.
    pub stride: usize,
    pub max_origins: Option<usize>,
    pub outlier_basis: String,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub dataset: DatasetSource,
    pub dataset_name: String,
    pub train_fraction: f64,
    pub profile: Option<String>,
    pub train: TrainConfig,
    pub forecast: ForecastSettings,
    pub evaluation: EvaluationSettings,
    /// Not part of the config hash, so relocating outputs keeps artifacts identical.
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub model_path: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "format_version",
    "dataset",
    "generator",
    "name",
    "train_fraction",
    "profile",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "lambda_reconstruction",
    "gp_lambda1",
    "gp_lambda2",
    "m",
    "n",
    "batch_size",
    "epochs",
    "critic_steps_per_generator",
    "seed",
    "horizon",
    "trajectories",
    "origin",
    "forecast_seed",
    "eval_stride",
    "eval_max_origins",
    "outlier_basis",
    "output_dir",
    "model",
];

fn take<T: for<'de> Deserialize<'de>>(map: &BTreeMap<String, Value>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::config(key, e.to_string())),
    }
}

/// Parses a `key=value` override; the value is read as JSON when possible
/// and as a plain string otherwise.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must look like key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// Reads a JSON config document.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config_with(path, &[])
}

/// [`parse_config`] with `key=value` overrides applied before validation.
pub fn parse_config_with(path: impl AsRef<Path>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config_from_str(&text, &base, overrides)
}

/// Builds a config from JSON text; relative paths resolve against `base_dir`.
pub fn config_from_str(text: &str, base_dir: &Path, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    let Value::Object(obj) = doc else {
        return Err(Error::config("<document>", "expected a JSON object"));
    };
    let mut map: BTreeMap<String, Value> = obj.into_iter().collect();
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    if let Some(unknown) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::config(unknown, "unknown key"));
    }

    let format_version: u32 = take(&map, "format_version")?.unwrap_or(CONFIG_FORMAT_VERSION);
    if format_version != CONFIG_FORMAT_VERSION {
        return Err(Error::Incompatible {
            found: format_version,
            supported: CONFIG_FORMAT_VERSION,
        });
    }

    let dataset = match (take::<String>(&map, "dataset")?, map.get("generator")) {
        (Some(_), Some(_)) => {
            return Err(Error::config("dataset", "give either `dataset` or `generator`, not both"))
        }
        (Some(p), None) => {
            let resolved = base_dir.join(&p);
            if !resolved.is_file() {
                return Err(Error::config("dataset", format!("no file at {}", resolved.display())));
            }
            DatasetSource::Csv(p)
        }
        (None, Some(g)) => {
            let spec: GeneratorSpec = serde_json::from_value(g.clone())
                .map_err(|e| Error::config("generator", e.to_string()))?;
            if spec.length == 0 {
                return Err(Error::config("generator.length", "must be at least 1"));
            }
            DatasetSource::Generator(spec)
        }
        (None, None) => return Err(Error::config("dataset", "a `dataset` path or a `generator` is required")),
    };
    let dataset_name = take(&map, "name")?.unwrap_or_else(|| match &dataset {
        DatasetSource::Generator(g) => g.kind.name().to_string(),
        DatasetSource::Csv(p) => Path::new(p)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
    });

    let train_fraction: f64 = take(&map, "train_fraction")?.unwrap_or(DEFAULT_TRAIN_FRACTION);
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::config("train_fraction", "must lie in (0, 1]"));
    }

    let profile: Option<String> = take(&map, "profile")?;
    let seed: u64 = take(&map, "seed")?.unwrap_or(0);
    let mut train = match &profile {
        Some(name) => TrainConfig::for_profile(
            Profile::from_name(name).ok_or_else(|| Error::config("profile", format!("unknown profile `{name}`")))?,
            seed,
        ),
        None => TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    };
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = take(&map, stringify!($field))? {
                train.$field = v;
            }
        };
    }
    set!(learning_rate);
    set!(adam_beta1);
    set!(adam_beta2);
    set!(adam_epsilon);
    set!(lambda_reconstruction);
    set!(gp_lambda1);
    set!(gp_lambda2);
    set!(m);
    set!(n);
    set!(batch_size);
    set!(epochs);
    set!(critic_steps_per_generator);
    train.validate()?;

    let forecast = ForecastSettings {
        horizon: take(&map, "horizon")?.unwrap_or(DEFAULT_HORIZON),
        trajectories: take(&map, "trajectories")?.unwrap_or(DEFAULT_TRAJECTORIES),
        origin: take(&map, "origin")?,
        seed: take(&map, "forecast_seed")?.unwrap_or(seed),
    };
    if forecast.horizon == 0 {
        return Err(Error::config("horizon", "must be at least 1"));
    }
    if forecast.trajectories == 0 {
        return Err(Error::config("trajectories", "must be at least 1"));
    }
    let evaluation = EvaluationSettings {
        stride: take(&map, "eval_stride")?.unwrap_or(1),
        max_origins: take(&map, "eval_max_origins")?,
        outlier_basis: take(&map, "outlier_basis")?.unwrap_or_else(|| "truth".to_string()),
    };
    if evaluation.stride == 0 {
        return Err(Error::config("eval_stride", "must be at least 1"));
    }
    if evaluation.max_origins == Some(0) {
        return Err(Error::config("eval_max_origins", "must be at least 1"));
    }
    if OutlierBasis::from_name(&evaluation.outlier_basis).is_none() {
        return Err(Error::config("outlier_basis", "expected `truth` or `error`"));
    }

    let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => base_dir.join(take::<String>(&map, "output_dir")?.unwrap_or_else(|| "output".into())),
    };
    let model_path = take::<String>(&map, "model")?.map(|p| base_dir.join(p));

    Ok(RunConfig {
        format_version,
        dataset,
        dataset_name,
        train_fraction,
        profile,
        train,
        forecast,
        evaluation,
        output_dir,
        base_dir: base_dir.to_path_buf(),
        model_path,
    })
}

impl RunConfig {
    /// First 16 hex digits of the SHA-256 of the canonical config JSON.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))[..16].to_string()
    }

    pub fn model_file(&self) -> PathBuf {
        self.model_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join(MODEL_FILE))
    }

    pub fn load_dataset(&self) -> Result<SeriesDataset> {
        match &self.dataset {
            DatasetSource::Generator(spec) => {
                let values = match spec.kind {
                    data::ProcessKind::Lar => data::simulate_lar(spec),
                    data::ProcessKind::Ma => data::simulate_ma(spec),
                    data::ProcessKind::Mc => data::simulate_mc(spec),
                };
                SeriesDataset::new(
                    spec.kind.name(),
                    values,
                    data::SYNTHETIC_PERIOD_SECONDS,
                    data::synthetic_start(),
                    self.train_fraction,
                )
            }
            DatasetSource::Csv(p) => data::load_csv_with_split(self.base_dir.join(p), self.train_fraction),
        }
    }

    fn outlier_basis(&self) -> OutlierBasis {
        OutlierBasis::from_name(&self.evaluation.outlier_basis).unwrap_or_default()
    }
}

// ---- model files ------------------------------------------------------------

/// Writes floats with 17 significant digits so every `f64` round-trips.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorFile {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weight: TensorFile,
    bias: TensorFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    spec: MlpSpec,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    config_hash: Option<String>,
    window: usize,
    standardizer: Standardizer,
    encoder: NetworkFile,
    decoder: NetworkFile,
}

fn network_file(net: &Mlp) -> NetworkFile {
    let t = |x: &Tensor| TensorFile {
        shape: x.shape().to_vec(),
        data: x.data().to_vec(),
    };
    NetworkFile {
        spec: net.spec().clone(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerFile {
                weight: t(&l.weight),
                bias: t(&l.bias),
            })
            .collect(),
    }
}

fn network_from_file(file: NetworkFile, field: &str) -> Result<Mlp> {
    let schema = |detail: String| Error::Schema {
        field: field.to_string(),
        detail,
    };
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            Ok(Layer {
                weight: Tensor::new(l.weight.shape, l.weight.data).map_err(|e| schema(e.to_string()))?,
                bias: Tensor::new(l.bias.shape, l.bias.data).map_err(|e| schema(e.to_string()))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::from_layers(file.spec, layers).map_err(|e| schema(e.to_string()))
}

/// Serialises `model` to JSON with 17-digit decimals.
pub fn model_to_string(model: &WiaeModel, config_hash: Option<&str>) -> Result<String> {
    let file = ModelFile {
        format_version: model.format_version,
        config_hash: config_hash.map(str::to_string),
        window: model.window,
        standardizer: model.standardizer.clone(),
        encoder: network_file(&model.encoder),
        decoder: network_file(&model.decoder),
    };
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    file.serialize(&mut ser).map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<WiaeModel> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Schema {
        field: "<document>".into(),
        detail: e.to_string(),
    })?;
    let version = doc
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Schema {
            field: "format_version".into(),
            detail: "missing or not an unsigned integer".into(),
        })?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::Incompatible {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let Value::Object(fields) = doc else {
        unreachable!("format_version was read from an object")
    };
    for (key, _) in fields.iter() {
        if !["format_version", "config_hash", "window", "standardizer", "encoder", "decoder"].contains(&key.as_str()) {
            return Err(Error::Schema {
                field: key.clone(),
                detail: "unknown field".into(),
            });
        }
    }
    let field = |name: &str| -> Result<Value> {
        fields.get(name).cloned().ok_or_else(|| Error::Schema {
            field: name.into(),
            detail: "missing".into(),
        })
    };
    fn parse<T: for<'de> Deserialize<'de>>(name: &str, v: Value) -> Result<T> {
        serde_json::from_value(v).map_err(|e| Error::Schema {
            field: name.into(),
            detail: e.to_string(),
        })
    }
    let window: usize = parse("window", field("window")?)?;
    let standardizer: Standardizer = parse("standardizer", field("standardizer")?)?;
    let encoder = network_from_file(parse("encoder", field("encoder")?)?, "encoder")?;
    let decoder = network_from_file(parse("decoder", field("decoder")?)?, "decoder")?;
    WiaeModel::new(encoder, decoder, window, standardizer).map_err(|e| Error::Schema {
        field: "model".into(),
        detail: e.to_string(),
    })
}

pub fn save_model(model: &WiaeModel, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
    std::fs::write(path, model_to_string(model, config_hash)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<WiaeModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}

// ---- pipeline -------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Train,
    Extract,
    Forecast,
    Evaluate,
    Runstest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Extract => "extract",
            Command::Forecast => "forecast",
            Command::Evaluate => "evaluate",
            Command::Runstest => "runstest",
        }
    }
}

/// Runs `command` and returns the paths of the artifacts it wrote.
pub fn run_pipeline(command: Command, config: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    use anyhow::Context as _;
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating output directory {}", config.output_dir.display()))?;
    let hash = config.config_hash();
    let out = |name: &str| config.output_dir.join(name);
    let dataset = config.load_dataset().context("data")?;
    match command {
        Command::Generate => {
            let path = out(SERIES_FILE);
            data::write_csv(&dataset, &path, Some(&hash)).context("data")?;
            Ok(vec![path])
        }
        Command::Train => {
            let (model, history) = training::train(&dataset, &config.train).context("training")?;
            let model_path = config.model_file();
            save_model(&model, &model_path, Some(&hash)).context("cli: saving model")?;
            let losses = out(LOSSES_FILE);
            training::write_loss_csv(&history, &losses, Some(&hash)).context("training")?;
            Ok(vec![model_path, losses])
        }
        Command::Extract => {
            let model = load_model(config.model_file()).context("cli: loading model")?;
            let innovations = forecasting::innovation_history(&model, &dataset.values).context("forecasting")?;
            let path = out(INNOVATIONS_FILE);
            write_innovations(&dataset, &innovations, model.window, &path, &hash)?;
            Ok(vec![path])
        }
        Command::Forecast => {
            let model = load_model(config.model_file()).context("cli: loading model")?;
            let origin = config.forecast.origin.unwrap_or(dataset.len() - 1);
            let request = ForecastRequest {
                origin,
                horizon: config.forecast.horizon,
                trajectories: config.forecast.trajectories,
                seed: config.forecast.seed,
            };
            let dist = forecasting::forecast(&model, &dataset.values, &request).context("forecasting")?;
            let (traj, summary) = (out(TRAJECTORIES_FILE), out(FORECAST_SUMMARY_FILE));
            forecasting::write_trajectories_csv(&dist, &traj, Some(&hash))?;
            forecasting::write_summary_csv(&dist, &summary, Some(&hash))?;
            Ok(vec![traj, summary])
        }
        Command::Evaluate => {
            let model = load_model(config.model_file()).context("cli: loading model")?;
            evaluate_command(config, &dataset, &model, &hash)
        }
        Command::Runstest => {
            let model = load_model(config.model_file()).context("cli: loading model")?;
            let test = dataset.test();
            let innovations = forecasting::innovation_history(&model, test).context("stats_tests: test split")?;
            let report = stats_tests::runs_test(&innovations).context("stats_tests")?;
            let w = stats_tests::wasserstein_1d(&innovations, &stats_tests::uniform_quantiles(innovations.len()))
                .context("stats_tests")?;
            let (txt, csv) = (out(RUNS_TEXT_FILE), out(RUNS_CSV_FILE));
            std::fs::write(
                &txt,
                format!(
                    "config_hash={hash}\ndataset={}\n{}wasserstein_uniform={}\n",
                    config.dataset_name,
                    report.to_kv(),
                    format_f64(w)
                ),
            )?;
            std::fs::write(
                &csv,
                format!(
                    "# config_hash={hash}\ndataset,{},wasserstein_uniform\n{},{},{}\n",
                    RunsTestReport::CSV_HEADER,
                    config.dataset_name,
                    report.to_csv_row(),
                    format_f64(w)
                ),
            )?;
            Ok(vec![txt, csv])
        }
    }
}

fn write_innovations(dataset: &SeriesDataset, innovations: &[f64], m: usize, path: &Path, hash: &str) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# config_hash={hash}")?;
    writeln!(out, "index,timestamp,innovation")?;
    for (k, v) in innovations.iter().enumerate() {
        let t = k + m - 1;
        writeln!(
            out,
            "{t},{},{}",
            dataset.timestamp(t).format("%Y-%m-%dT%H:%M:%SZ"),
            format_f64(*v)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Forecast origins over the test split for horizon `horizon`: every origin
/// `o` with `x_{o+T}` in the test split and enough history before it.
pub fn evaluation_origins(dataset: &SeriesDataset, window: usize, horizon: usize, stride: usize, max: Option<usize>) -> Vec<usize> {
    let first = (dataset.train_end.max(1) - 1).max(2 * (window - 1));
    if dataset.len() <= horizon || first + horizon >= dataset.len() {
        return Vec::new();
    }
    let last = dataset.len() - 1 - horizon;
    let mut origins: Vec<usize> = (first..=last).step_by(stride).collect();
    if let Some(k) = max {
        origins.truncate(k);
    }
    origins
}

/// Samples at horizon `T` for every evaluation origin, plus the truths.
pub fn horizon_samples(
    model: &WiaeModel,
    dataset: &SeriesDataset,
    origins: &[usize],
    horizon: usize,
    trajectories: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    // Encoding is causal, so one pass over the whole series serves every origin.
    let innovations = forecasting::innovation_history(model, &dataset.values)?;
    let m = model.window;
    let mut truth = Vec::with_capacity(origins.len());
    let mut samples = Vec::with_capacity(origins.len());
    for &o in origins {
        forecasting::observed_prefix(model, &dataset.values, o)?;
        let history = &innovations[..o + 2 - m];
        let request = ForecastRequest {
            origin: o,
            horizon,
            trajectories,
            seed: seed.wrapping_add(o as u64),
        };
        samples.push(forecasting::sample_horizon_step(model, history, &request, horizon)?);
        truth.push(dataset.values[o + horizon]);
    }
    Ok((truth, samples))
}

fn evaluate_command(config: &RunConfig, dataset: &SeriesDataset, model: &WiaeModel, hash: &str) -> anyhow::Result<Vec<PathBuf>> {
    use anyhow::Context as _;
    let horizon = config.forecast.horizon;
    let origins = evaluation_origins(
        dataset,
        model.window,
        horizon,
        config.evaluation.stride,
        config.evaluation.max_origins,
    );
    if origins.is_empty() {
        anyhow::bail!("evaluation: the test split leaves no forecast origin for horizon {horizon}");
    }
    let (truth, samples) = horizon_samples(
        model,
        dataset,
        &origins,
        horizon,
        config.forecast.trajectories,
        config.forecast.seed,
    )
    .context("forecasting")?;
    let basis = config.outlier_basis();
    let gpf = evaluation::evaluate_samples(&truth, &samples, horizon, basis).context("evaluation")?;

    // Reference forecasters on the same origins.
    let train_mean = dataset.train().iter().sum::<f64>() / dataset.train().len() as f64;
    let mean_fc = vec![train_mean; truth.len()];
    let naive_fc: Vec<f64> = origins.iter().map(|&o| dataset.values[o]).collect();
    let mean_report = evaluation::evaluate_point(&truth, &mean_fc, horizon, basis).context("evaluation")?;
    let naive_report = evaluation::evaluate_point(&truth, &naive_fc, horizon, basis).context("evaluation")?;

    let seed = config.forecast.seed;
    let name = &config.dataset_name;
    let mut kv = format!("config_hash={hash}\ndataset={name}\nmethod=gpf-wi\nseed={seed}\norigins={}\n", origins.len());
    kv.push_str(&gpf.to_kv());
    let mut csv = format!("# config_hash={hash}\n{METRIC_CSV_HEADER}\n");
    for (method, r) in [("gpf-wi", &gpf), ("train-mean", &mean_report), ("naive", &naive_report)] {
        csv.push_str(&r.to_csv_row(name, method, seed));
        csv.push('\n');
    }
    let (txt_path, csv_path) = (config.output_dir.join(METRICS_TEXT_FILE), config.output_dir.join(METRICS_CSV_FILE));
    std::fs::write(&txt_path, kv)?;
    std::fs::write(&csv_path, csv)?;

    let point_mean: Vec<f64> = samples.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    let point_median: Vec<f64> = samples.iter().map(|s| evaluation::median(s)).collect();
    let abs_err: Vec<f64> = truth.iter().zip(&point_median).map(|(x, f)| (x - f).abs()).collect();
    let sq_err: Vec<f64> = truth.iter().zip(&point_mean).map(|(x, f)| (x - f) * (x - f)).collect();
    let (abs_path, sq_path) = (config.output_dir.join(ECDF_ABS_FILE), config.output_dir.join(ECDF_SQ_FILE));
    evaluation::write_ecdf_csv(&evaluation::ecdf(&abs_err)?, &abs_path, Some(hash))?;
    evaluation::write_ecdf_csv(&evaluation::ecdf(&sq_err)?, &sq_path, Some(hash))?;
    Ok(vec![txt_path, csv_path, abs_path, sq_path])
}
