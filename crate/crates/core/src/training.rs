//! Adversarial training of the encoder/decoder pair against two Wasserstein
//! critics with gradient penalty.
//!
//! Each training sample is a segment of `n + 2(m - 1)` consecutive
//! standardised values. The encoder turns it into `n + m - 1` innovations,
//! the decoder turns those into `n` reconstructions, and three aligned
//! newest-first blocks of width `n` come out: the last `n` innovations, the
//! reconstructions, and the original values the reconstructions stand for.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::data::{format_f64, SeriesDataset, Standardizer};
use crate::networks::{Critic, Mlp, WiaeModel};
use crate::rng::{derive_seed, streams, substream, uniform_pm1, StreamRng};
use crate::{Error, Result};

/// Optimiser and objective settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Weight of the reconstruction term in the generator objective.
    pub lambda_reconstruction: f64,
    /// Gradient-penalty weight of the innovation critic.
    pub gp_lambda1: f64,
    /// Gradient-penalty weight of the reconstruction critic.
    pub gp_lambda2: f64,
    pub m: usize,
    pub n: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub critic_steps_per_generator: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            lambda_reconstruction: 1.0,
            gp_lambda1: 1.0,
            gp_lambda2: 1.0,
            m: 20,
            n: 50,
            batch_size: 60,
            epochs: 100,
            critic_steps_per_generator: 5,
            seed: 0,
        }
    }
}

/// Published per-dataset hyperparameter rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Mc,
    Lar,
    Ma,
    Sp500,
    Nyiso,
    Isone,
    Pjm,
    Electricity,
    Traffic,
}

impl Profile {
    pub const ALL: [Profile; 9] = [
        Profile::Mc,
        Profile::Lar,
        Profile::Ma,
        Profile::Sp500,
        Profile::Nyiso,
        Profile::Isone,
        Profile::Pjm,
        Profile::Electricity,
        Profile::Traffic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Mc => "mc",
            Profile::Lar => "lar",
            Profile::Ma => "ma",
            Profile::Sp500 => "sp500",
            Profile::Nyiso => "nyiso",
            Profile::Isone => "isone",
            Profile::Pjm => "pjm",
            Profile::Electricity => "electricity",
            Profile::Traffic => "traffic",
        }
    }

    /// Case-insensitive lookup; `ar1` is accepted for the LAR row.
    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        if lower == "ar1" {
            return Some(Profile::Lar);
        }
        Self::ALL.into_iter().find(|p| p.name() == lower)
    }

    /// `(learning rate, gp_lambda1, gp_lambda2, lambda_reconstruction)`.
    pub fn values(self) -> (f64, f64, f64, f64) {
        match self {
            Profile::Mc => (1e-4, 1.0, 1.0, 1.0),
            Profile::Lar | Profile::Ma => (1e-4, 1.0, 1.6, 1.0),
            Profile::Sp500 => (1e-5, 1.0, 1.3, 1.0),
            Profile::Nyiso => (1e-5, 1.0, 1.4, 1.0),
            Profile::Traffic => (1e-5, 1.0, 1.2, 1.0),
            Profile::Isone | Profile::Pjm | Profile::Electricity => (1e-5, 1.0, 1.0, 1.0),
        }
    }
}

impl TrainConfig {
    pub fn for_profile(profile: Profile, seed: u64) -> Self {
        let (learning_rate, gp_lambda1, gp_lambda2, lambda_reconstruction) = profile.values();
        Self {
            learning_rate,
            gp_lambda1,
            gp_lambda2,
            lambda_reconstruction,
            seed,
            ..Self::default()
        }
    }

    /// Length of one training segment, `n + 2(m - 1)`.
    pub fn segment_len(&self) -> usize {
        self.n + 2 * (self.m - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, found {v}")))
            }
        };
        let unit = |key: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in [0, 1), found {v}")))
            }
        };
        let non_neg = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be non-negative, found {v}")))
            }
        };
        finite_pos("learning_rate", self.learning_rate)?;
        unit("adam_beta1", self.adam_beta1)?;
        unit("adam_beta2", self.adam_beta2)?;
        finite_pos("adam_epsilon", self.adam_epsilon)?;
        non_neg("lambda_reconstruction", self.lambda_reconstruction)?;
        non_neg("gp_lambda1", self.gp_lambda1)?;
        non_neg("gp_lambda2", self.gp_lambda2)?;
        if self.m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        if self.n < self.m {
            return Err(Error::config("n", format!("must be at least m = {}, found {}", self.m, self.n)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// Objectives observed during one step, or averaged over an epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub epoch: usize,
    /// Critic estimate of the distance between innovation and uniform blocks.
    pub innovation_critic_objective: f64,
    /// Critic estimate of the distance between original and reconstruction blocks.
    pub reconstruction_critic_objective: f64,
    pub generator_objective: f64,
    /// Weighted penalties of the innovation and reconstruction critics.
    pub gradient_penalties: (f64, f64),
}

impl LossReport {
    fn fields(&self) -> [f64; 5] {
        [
            self.innovation_critic_objective,
            self.reconstruction_critic_objective,
            self.generator_objective,
            self.gradient_penalties.0,
            self.gradient_penalties.1,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|v| v.is_finite())
    }

    /// Field-wise mean of `reports`, labelled with `epoch`.
    pub fn average(epoch: usize, reports: &[LossReport]) -> LossReport {
        let k = reports.len().max(1) as f64;
        let mut acc = [0.0; 5];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.fields()) {
                *a += v;
            }
        }
        let [i, r, g, p1, p2] = acc.map(|v| v / k);
        LossReport {
            epoch,
            innovation_critic_objective: i,
            reconstruction_critic_objective: r,
            generator_objective: g,
            gradient_penalties: (p1, p2),
        }
    }
}

/// Adam moment accumulators for one parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    pub fn for_mlp(net: &Mlp) -> Self {
        Self::new(&net.parameters())
    }
}

/// One bias-corrected Adam descent step. `names` identify parameters in
/// error messages; a non-finite gradient aborts before anything is changed.
pub fn adam_update(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    names: &[String],
    state: &mut AdamState,
    config: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.first_moment.len()
        || params.len() != names.len()
    {
        return Err(Error::Contract(format!(
            "adam update over {} parameters with {} gradients, {} names and {} accumulators",
            params.len(),
            grads.len(),
            names.len(),
            state.first_moment.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.first_moment[k].shape() != p.shape() {
            return Err(Error::dim(
                format!("adam update of {}", names[k]),
                format!("parameter {:?}, gradient {:?}", p.shape(), g.shape()),
            ));
        }
        if !g.all_finite() {
            return Err(Error::Training {
                epoch,
                parameter: names[k].clone(),
                detail: "non-finite gradient".into(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[k].data().to_vec();
        let v = state.second_moment[k].data().to_vec();
        let mut new_p = p.data().to_vec();
        let mut new_m = m;
        let mut new_v = v;
        for (((x, mk), vk), gk) in new_p
            .iter_mut()
            .zip(new_m.iter_mut())
            .zip(new_v.iter_mut())
            .zip(g.data())
        {
            *mk = b1 * *mk + (1.0 - b1) * gk;
            *vk = b2 * *vk + (1.0 - b2) * gk * gk;
            let m_hat = *mk / c1;
            let v_hat = *vk / c2;
            *x -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
        let shape = p.shape().to_vec();
        **p = Tensor::new(shape.clone(), new_p).map_err(|_| Error::Training {
            epoch,
            parameter: names[k].clone(),
            detail: "update produced a non-finite value".into(),
        })?;
        state.first_moment[k] = Tensor::from_parts(shape.clone(), new_m);
        state.second_moment[k] = Tensor::from_parts(shape, new_v);
    }
    Ok(())
}

fn check_blocks(critic: &Critic, real: &Tensor, fake: &Tensor) -> Result<(usize, usize)> {
    let (rr, rc) = real.dims2()?;
    let (fr, fc) = fake.dims2()?;
    if rr == 0 || fr == 0 {
        return Err(Error::Contract("critic batches must be non-empty".into()));
    }
    let w = critic.input_width();
    if rc != w || fc != w {
        return Err(Error::dim(
            "critic batch",
            format!("critic width {w}, real width {rc}, fake width {fc}"),
        ));
    }
    Ok((rr, fr))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean critic score on `real` minus mean score on `fake`.
pub fn wasserstein_objective(critic: &Critic, real: &Tensor, fake: &Tensor) -> Result<f64> {
    check_blocks(critic, real, fake)?;
    Ok(mean(&critic.score_batch(real)?) - mean(&critic.score_batch(fake)?))
}

/// `λ_gp · mean (‖∇D(x̃)‖ - 1)²` at `x̃ = ε·real + (1-ε)·fake`, one `ε ~ U[0,1)`
/// per row drawn from `rng`.
pub fn gradient_penalty<R: Rng + ?Sized>(
    critic: &Critic,
    real: &Tensor,
    fake: &Tensor,
    gp_lambda: f64,
    rng: &mut R,
) -> Result<f64> {
    let (rows, fake_rows) = check_blocks(critic, real, fake)?;
    if rows != fake_rows {
        return Err(Error::dim(
            "gradient penalty",
            format!("{rows} real rows against {fake_rows} fake rows"),
        ));
    }
    let eps: Arc<[f64]> = (0..rows).map(|_| rng.random::<f64>()).collect();
    let mut g = Graph::new();
    let params = critic.net.register(&mut g, "critic");
    let r = g.input(real.clone());
    let f = g.input(fake.clone());
    let p = record_penalty(&mut g, critic, &params, r, f, eps, gp_lambda)?;
    g.value(p)?.item()
}

/// Penalty at fixed interpolation weights `eps` (one per row) together with
/// its gradient with respect to every critic parameter, in
/// [`Mlp::parameters`](crate::networks::Mlp::parameters) order.
pub fn gradient_penalty_with_grads(
    critic: &Critic,
    real: &Tensor,
    fake: &Tensor,
    eps: &[f64],
    gp_lambda: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let (rows, fake_rows) = check_blocks(critic, real, fake)?;
    if rows != fake_rows || eps.len() != rows {
        return Err(Error::dim(
            "gradient penalty",
            format!("{rows} real rows, {fake_rows} fake rows, {} weights", eps.len()),
        ));
    }
    let mut g = Graph::new();
    let params = critic.net.register(&mut g, "critic");
    let r = g.input(real.clone());
    let f = g.input(fake.clone());
    let p = record_penalty(&mut g, critic, &params, r, f, eps.into(), gp_lambda)?;
    let grads = g.backward(p, &params)?;
    let grads = grads.iter().map(|v| g.value(*v).cloned()).collect::<Result<Vec<_>>>()?;
    Ok((g.value(p)?.item()?, grads))
}

/// Records the penalty term on `g`; differentiable in the critic parameters.
fn record_penalty(
    g: &mut Graph,
    critic: &Critic,
    params: &[Var],
    real: Var,
    fake: Var,
    eps: Arc<[f64]>,
    gp_lambda: f64,
) -> Result<Var> {
    let mixed = g.interpolate(real, fake, eps)?;
    let scores = critic.net.forward_graph(g, mixed, params)?;
    let total = g.sum(scores)?;
    let grad = g.backward(total, &[mixed])?[0];
    let sq = g.square(grad)?;
    let row_sq = g.sum_cols(sq)?;
    let norms = g.sqrt(row_sq)?;
    let gap = g.add_scalar(norms, -1.0)?;
    let gap_sq = g.square(gap)?;
    let m = g.mean(gap_sq)?;
    g.scale(m, gp_lambda)
}

fn mean_score(g: &mut Graph, critic: &Critic, params: &[Var], x: Var) -> Result<Var> {
    let s = critic.net.forward_graph(g, x, params)?;
    g.mean(s)
}

/// One ascent step of `critic` on `mean D(real) - mean D(fake) - penalty`.
/// Returns the objective and weighted penalty before the update.
#[allow(clippy::too_many_arguments)]
pub(crate) fn critic_step(
    critic: &mut Critic,
    adam: &mut AdamState,
    prefix: &str,
    real: &Tensor,
    fake: &Tensor,
    gp_lambda: f64,
    eps_rng: &mut StreamRng,
    config: &TrainConfig,
    epoch: usize,
) -> Result<(f64, f64)> {
    let rows = real.dims2()?.0;
    let eps: Arc<[f64]> = (0..rows).map(|_| eps_rng.random::<f64>()).collect();
    let mut g = Graph::new();
    let params = critic.net.register(&mut g, prefix);
    let r = g.input(real.clone());
    let f = g.input(fake.clone());
    let on_real = mean_score(&mut g, critic, &params, r)?;
    let on_fake = mean_score(&mut g, critic, &params, f)?;
    let objective = g.sub(on_real, on_fake)?;
    let penalty = record_penalty(&mut g, critic, &params, r, f, eps, gp_lambda)?;
    let loss = g.sub(penalty, objective)?;
    let grads = g.backward(loss, &params)?;
    let grads: Vec<Tensor> = grads
        .iter()
        .map(|v| g.value(*v).cloned())
        .collect::<Result<_>>()?;
    let report = (g.value(objective)?.item()?, g.value(penalty)?.item()?);
    let names = critic.net.parameter_names(prefix);
    adam_update(
        &mut critic.net.parameters_mut(),
        &grads,
        &names,
        adam,
        config,
        epoch,
    )?;
    Ok(report)
}

/// Flat indices that turn a column of `segments * per_segment` values into
/// newest-first sliding windows of width `m`, `windows` per segment, the
/// first window ending at position `first_end` of each segment.
fn window_index(segments: usize, per_segment: usize, m: usize, first_end: usize, windows: usize) -> Arc<[usize]> {
    let mut idx = Vec::with_capacity(segments * windows * m);
    for s in 0..segments {
        let base = s * per_segment;
        for w in 0..windows {
            let end = first_end + w;
            idx.extend((0..m).map(|j| base + end - j));
        }
    }
    idx.into()
}

/// Encoder, decoder, both critics and their optimiser state.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: WiaeModel,
    pub innovation_critic: Critic,
    pub reconstruction_critic: Critic,
    pub config: TrainConfig,
    encoder_adam: AdamState,
    decoder_adam: AdamState,
    innovation_adam: AdamState,
    reconstruction_adam: AdamState,
    uniform_rng: StreamRng,
    eps_rng: StreamRng,
}

/// Values recorded on the generator graph of one step.
struct GeneratorPass {
    graph: Graph,
    enc_params: Vec<Var>,
    dec_params: Vec<Var>,
    innovation_blocks: Var,
    reconstruction_blocks: Var,
}

impl Trainer {
    /// Fresh networks initialised from `config.seed`.
    pub fn new(config: TrainConfig, standardizer: Standardizer) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let model = WiaeModel::init(config.m, standardizer, seed)?;
        let innovation_critic =
            Critic::init(config.n, derive_seed(seed, streams::INNOVATION_CRITIC_INIT))?;
        let reconstruction_critic =
            Critic::init(config.n, derive_seed(seed, streams::RECONSTRUCTION_CRITIC_INIT))?;
        Self::from_parts(model, innovation_critic, reconstruction_critic, config)
    }

    /// Resumes from given networks with fresh optimiser state.
    pub fn from_parts(
        model: WiaeModel,
        innovation_critic: Critic,
        reconstruction_critic: Critic,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        if model.window != config.m {
            return Err(Error::config(
                "m",
                format!("model window {} differs from config {}", model.window, config.m),
            ));
        }
        for c in [&innovation_critic, &reconstruction_critic] {
            if c.input_width() != config.n {
                return Err(Error::config(
                    "n",
                    format!("critic width {} differs from config {}", c.input_width(), config.n),
                ));
            }
        }
        Ok(Self {
            encoder_adam: AdamState::for_mlp(&model.encoder),
            decoder_adam: AdamState::for_mlp(&model.decoder),
            innovation_adam: AdamState::for_mlp(&innovation_critic.net),
            reconstruction_adam: AdamState::for_mlp(&reconstruction_critic.net),
            uniform_rng: substream(config.seed, streams::REFERENCE_UNIFORM),
            eps_rng: substream(config.seed, streams::PENALTY_INTERPOLATION),
            model,
            innovation_critic,
            reconstruction_critic,
            config,
        })
    }

    fn uniform_blocks(&mut self, rows: usize) -> Tensor {
        let n = self.config.n;
        let data = (0..rows * n).map(|_| uniform_pm1(&mut self.uniform_rng)).collect();
        Tensor::from_parts(vec![rows, n], data)
    }

    /// Records encoder and decoder over the batch of segments.
    fn generator_pass(&self, segments: &[&[f64]]) -> Result<(GeneratorPass, Tensor)> {
        let (m, n) = (self.config.m, self.config.n);
        let len = self.config.segment_len();
        let b = segments.len();
        let inn_per_seg = n + m - 1;

        // Raw windows are gathered once outside the graph; they are constants.
        let raw_index = window_index(b, len, m, m - 1, inn_per_seg);
        let flat: Vec<f64> = segments.iter().flat_map(|s| s.iter().copied()).collect();
        let windows: Vec<f64> = raw_index.iter().map(|&i| flat[i]).collect();
        let original: Vec<f64> = segments
            .iter()
            .flat_map(|s| (0..n).map(move |k| s[len - 1 - k]))
            .collect();

        let mut g = Graph::new();
        let enc_params = self.model.encoder.register(&mut g, "encoder");
        let dec_params = self.model.decoder.register(&mut g, "decoder");
        let x = g.input(Tensor::new(vec![b * inn_per_seg, m], windows)?);
        let innovations = self.model.encoder.forward_graph(&mut g, x, &enc_params)?;

        let dec_index = window_index(b, inn_per_seg, m, m - 1, n);
        let dec_windows = g.gather(innovations, dec_index, &[b * n, m])?;
        let recon = self.model.decoder.forward_graph(&mut g, dec_windows, &dec_params)?;
        // Decoder rows run oldest to newest; blocks are newest-first.
        let recon_index: Arc<[usize]> = (0..b)
            .flat_map(|s| (0..n).map(move |k| s * n + n - 1 - k))
            .collect();
        let reconstruction_blocks = g.gather(recon, recon_index, &[b, n])?;
        let inn_index: Arc<[usize]> = (0..b)
            .flat_map(|s| (0..n).map(move |k| s * inn_per_seg + inn_per_seg - 1 - k))
            .collect();
        let innovation_blocks = g.gather(innovations, inn_index, &[b, n])?;
        Ok((
            GeneratorPass {
                graph: g,
                enc_params,
                dec_params,
                innovation_blocks,
                reconstruction_blocks,
            },
            Tensor::new(vec![b, n], original)?,
        ))
    }

    /// Critic updates followed by one generator update on `segments`, each
    /// of length `n + 2(m - 1)`. The generator forward pass is recorded
    /// once; every critic step sees the same fake blocks with fresh uniform
    /// references and interpolation weights.
    pub fn train_step(&mut self, segments: &[&[f64]], epoch: usize) -> Result<LossReport> {
        let len = self.config.segment_len();
        if segments.len() < self.config.batch_size {
            return Err(Error::Contract(format!(
                "batch of {} segments, need at least {}",
                segments.len(),
                self.config.batch_size
            )));
        }
        if let Some(bad) = segments.iter().find(|s| s.len() != len) {
            return Err(Error::dim(
                "training segment",
                format!("length {} where {len} is required", bad.len()),
            ));
        }
        self.step_inner(segments, epoch).map_err(|e| match e {
            Error::NonFinite(what) => Error::Training {
                epoch,
                parameter: what,
                detail: "non-finite value during training".into(),
            },
            other => other,
        })
    }

    fn step_inner(&mut self, segments: &[&[f64]], epoch: usize) -> Result<LossReport> {
        let config = self.config.clone();
        let (mut pass, original) = self.generator_pass(segments)?;
        let fake_innov = pass.graph.value(pass.innovation_blocks)?.clone();
        let fake_recon = pass.graph.value(pass.reconstruction_blocks)?.clone();
        let rows = segments.len();

        let mut innov_report = (0.0, 0.0);
        let mut recon_report = (0.0, 0.0);
        for _ in 0..config.critic_steps_per_generator {
            let uniform = self.uniform_blocks(rows);
            innov_report = critic_step(
                &mut self.innovation_critic,
                &mut self.innovation_adam,
                "innovation_critic",
                &uniform,
                &fake_innov,
                config.gp_lambda1,
                &mut self.eps_rng,
                &config,
                epoch,
            )?;
            recon_report = critic_step(
                &mut self.reconstruction_critic,
                &mut self.reconstruction_adam,
                "reconstruction_critic",
                &original,
                &fake_recon,
                config.gp_lambda2,
                &mut self.eps_rng,
                &config,
                epoch,
            )?;
        }
        if config.critic_steps_per_generator == 0 {
            let uniform = self.uniform_blocks(rows);
            innov_report.0 = wasserstein_objective(&self.innovation_critic, &uniform, &fake_innov)?;
            recon_report.0 =
                wasserstein_objective(&self.reconstruction_critic, &original, &fake_recon)?;
        }

        // Generator objective against the updated critics, which enter as
        // constants.
        let g = &mut pass.graph;
        let ic = self.innovation_critic.net.register(g, "innovation_critic");
        let innov_score = mean_score(g, &self.innovation_critic, &ic, pass.innovation_blocks)?;
        let mut loss = g.scale(innov_score, -1.0)?;
        if config.lambda_reconstruction != 0.0 {
            let rc = self.reconstruction_critic.net.register(g, "reconstruction_critic");
            let recon_score =
                mean_score(g, &self.reconstruction_critic, &rc, pass.reconstruction_blocks)?;
            let weighted = g.scale(recon_score, config.lambda_reconstruction)?;
            loss = g.sub(loss, weighted)?;
        }
        let generator_objective = g.value(loss)?.item()?;
        let wrt: Vec<Var> = pass.enc_params.iter().chain(&pass.dec_params).copied().collect();
        let grads = g.backward(loss, &wrt)?;
        let mut grads: Vec<Tensor> = grads
            .iter()
            .map(|v| g.value(*v).cloned())
            .collect::<Result<_>>()?;
        let dec_grads = grads.split_off(pass.enc_params.len());

        let enc_names = self.model.encoder.parameter_names("encoder");
        adam_update(
            &mut self.model.encoder.parameters_mut(),
            &grads,
            &enc_names,
            &mut self.encoder_adam,
            &config,
            epoch,
        )?;
        let dec_names = self.model.decoder.parameter_names("decoder");
        adam_update(
            &mut self.model.decoder.parameters_mut(),
            &dec_grads,
            &dec_names,
            &mut self.decoder_adam,
            &config,
            epoch,
        )?;

        let report = LossReport {
            epoch,
            innovation_critic_objective: innov_report.0,
            reconstruction_critic_objective: recon_report.0,
            generator_objective,
            gradient_penalties: (innov_report.1, recon_report.1),
        };
        if !report.is_finite() {
            return Err(Error::Training {
                epoch,
                parameter: "loss report".into(),
                detail: format!("{report:?}"),
            });
        }
        Ok(report)
    }

    /// Gradients of the generator objective for the current batch, without
    /// updating anything. Encoder gradients first, then decoder gradients.
    pub fn generator_gradients(&self, segments: &[&[f64]]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let (mut pass, _) = self.generator_pass(segments)?;
        let g = &mut pass.graph;
        let ic = self.innovation_critic.net.register(g, "innovation_critic");
        let innov_score = mean_score(g, &self.innovation_critic, &ic, pass.innovation_blocks)?;
        let rc = self.reconstruction_critic.net.register(g, "reconstruction_critic");
        let recon_score = mean_score(g, &self.reconstruction_critic, &rc, pass.reconstruction_blocks)?;
        let neg = g.scale(innov_score, -1.0)?;
        let weighted = g.scale(recon_score, self.config.lambda_reconstruction)?;
        let loss = g.sub(neg, weighted)?;
        let wrt: Vec<Var> = pass.enc_params.iter().chain(&pass.dec_params).copied().collect();
        let grads = g.backward(loss, &wrt)?;
        let mut grads: Vec<Tensor> = grads
            .iter()
            .map(|v| g.value(*v).cloned())
            .collect::<Result<_>>()?;
        let dec = grads.split_off(pass.enc_params.len());
        Ok((grads, dec))
    }

    /// The three aligned block batches `(original, innovation, reconstruction)`
    /// the current model produces for `segments`.
    pub fn blocks(&self, segments: &[&[f64]]) -> Result<(Tensor, Tensor, Tensor)> {
        let (pass, original) = self.generator_pass(segments)?;
        Ok((
            original,
            pass.graph.value(pass.innovation_blocks)?.clone(),
            pass.graph.value(pass.reconstruction_blocks)?.clone(),
        ))
    }

    pub fn into_model(self) -> WiaeModel {
        self.model
    }
}

/// Trains a fresh model on the training split of `dataset`.
pub fn train(dataset: &SeriesDataset, config: &TrainConfig) -> Result<(WiaeModel, Vec<LossReport>)> {
    train_with(dataset, config, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    dataset: &SeriesDataset,
    config: &TrainConfig,
    on_epoch: impl FnMut(&LossReport),
) -> Result<(WiaeModel, Vec<LossReport>)> {
    let (trainer, history) = train_trainer(dataset, config, on_epoch)?;
    Ok((trainer.into_model(), history))
}

/// Like [`train_with`] but returns the whole trainer, critics included.
pub fn train_trainer(
    dataset: &SeriesDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&LossReport),
) -> Result<(Trainer, Vec<LossReport>)> {
    config.validate()?;
    let train_split = dataset.train();
    let len = config.segment_len();
    let needed = len + config.batch_size;
    if train_split.len() < needed {
        return Err(Error::config(
            "train",
            format!(
                "training split of {} values is shorter than n + 2(m - 1) + batch_size = {needed}",
                train_split.len()
            ),
        ));
    }
    let standardizer = Standardizer::fit(train_split)?;
    let series = standardizer.apply(train_split);
    let mut trainer = Trainer::new(config.clone(), standardizer)?;

    let num_segments = series.len() - len + 1;
    let steps = (num_segments / config.batch_size).max(1);
    let mut sampler = substream(config.seed, streams::SEGMENT_SAMPLING);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut reports = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch: Vec<&[f64]> = (0..config.batch_size)
                .map(|_| {
                    let s = sampler.random_range(0..num_segments);
                    &series[s..s + len]
                })
                .collect();
            reports.push(trainer.train_step(&batch, epoch)?);
        }
        let summary = LossReport::average(epoch, &reports);
        on_epoch(&summary);
        history.push(summary);
    }
    Ok((trainer, history))
}

pub const LOSS_CSV_HEADER: &str = "epoch,innovation_critic_objective,reconstruction_critic_objective,generator_objective,innovation_gradient_penalty,reconstruction_gradient_penalty";

/// Writes the loss history, one row per epoch.
pub fn write_loss_csv(
    history: &[LossReport],
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash={h}")?;
    }
    writeln!(out, "{LOSS_CSV_HEADER}")?;
    for r in history {
        let f = r.fields().map(format_f64);
        writeln!(out, "{},{}", r.epoch, f.join(","))?;
    }
    out.flush()?;
    Ok(())
}
