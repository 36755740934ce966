//! Sliding-window MLPs: causal encoder, causal decoder and Wasserstein
//! critics.
//!
//! Every network maps row vectors to row vectors; a batch is a matrix with
//! one window per row. Windows are ordered newest first, so row `r` of the
//! window matrix of a series `x` is `(x_t, x_{t-1}, ..., x_{t-m+1})` with
//! `t = r + m - 1`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{gemm, Graph, Tensor, Var};
use crate::data::Standardizer;
use crate::error::{Error, Result};

/// Version of the persisted model layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Hidden widths used for every network unless configured otherwise.
pub const DEFAULT_HIDDEN: [usize; 3] = [100, 50, 25];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply_in_place(self, values: &mut [f64]) {
        if self == Activation::Tanh {
            crate::autodiff::kernels::tanh_in_place(values);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_width: usize,
    pub hidden_widths: Vec<usize>,
    pub output_width: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_width: usize,
        hidden_widths: Vec<usize>,
        output_width: usize,
        output_activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            input_width,
            hidden_widths,
            output_width,
            hidden_activation: Activation::Tanh,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> [100, 50, 25] -> 1` with tanh hidden units.
    pub fn standard(input_width: usize, output_activation: Activation) -> Self {
        Self {
            input_width,
            hidden_widths: DEFAULT_HIDDEN.to_vec(),
            output_width: 1,
            hidden_activation: Activation::Tanh,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.output_width == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Contract(format!(
                "all layer widths must be at least 1: {self:?}"
            )));
        }
        if self.hidden_activation != Activation::Tanh {
            return Err(Error::Contract(
                "hidden layers support tanh activation only".into(),
            ));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, input side first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_widths.len() + 2);
        widths.push(self.input_width);
        widths.extend_from_slice(&self.hidden_widths);
        widths.push(self.output_width);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Affine map `x W + b` with `W` stored `fan_in x fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A stack of affine layers with activations given by its spec.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

/// Glorot-uniform weights and zero biases, drawn from a stream seeded by
/// `seed`.
pub fn init_mlp(spec: &MlpSpec, seed: u64) -> Result<Mlp> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let bound = glorot_bound(fan_in, fan_out);
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            Layer {
                weight: Tensor::from_parts(vec![fan_in, fan_out], w),
                bias: Tensor::zeros(&[1, fan_out]),
            }
        })
        .collect();
    Ok(Mlp {
        spec: spec.clone(),
        layers,
    })
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Mlp {
    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer {
                weight: Tensor::zeros(&[i, o]),
                bias: Tensor::zeros(&[1, o]),
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn from_layers(spec: MlpSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::dim(
                "mlp",
                format!("spec has {} layers, {} supplied", shapes.len(), layers.len()),
            ));
        }
        for (k, ((i, o), layer)) in shapes.iter().zip(&layers).enumerate() {
            if layer.weight.shape() != [*i, *o] || layer.bias.shape() != [1, *o] {
                return Err(Error::dim(
                    format!("layer {k}"),
                    format!(
                        "expected weight [{i}, {o}] and bias [1, {o}], found {:?} and {:?}",
                        layer.weight.shape(),
                        layer.bias.shape()
                    ),
                ));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Weights and biases in layer order: `w0, b0, w1, b1, ...`.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn parameter_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|k| [format!("{prefix}.{k}.weight"), format!("{prefix}.{k}.bias")])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.spec.parameter_count()
    }

    /// Applies the network to every row of `x` (`[batch, input_width]`).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (rows, cols) = x.dims2()?;
        if cols != self.spec.input_width {
            return Err(Error::dim(
                "mlp input",
                format!("expected width {}, found {cols}", self.spec.input_width),
            ));
        }
        let last = self.layers.len() - 1;
        let mut h = x.data().to_vec();
        let mut width = cols;
        for (k, layer) in self.layers.iter().enumerate() {
            let (fan_in, fan_out) = layer.weight.dims2()?;
            let (_, _, mut out) = gemm(
                &h,
                (rows, width),
                false,
                layer.weight.data(),
                (fan_in, fan_out),
                false,
            )?;
            let act = if k == last {
                self.spec.output_activation
            } else {
                self.spec.hidden_activation
            };
            for row in out.chunks_exact_mut(fan_out) {
                for (x, b) in row.iter_mut().zip(layer.bias.data()) {
                    *x += b;
                }
            }
            act.apply_in_place(&mut out);
            h = out;
            width = fan_out;
        }
        Tensor::matrix(rows, width, h).map_err(|_| Error::NonFinite("mlp forward".into()))
    }

    /// Records the parameters as named leaves and returns their handles in
    /// [`Mlp::parameters`] order.
    pub fn register(&self, g: &mut Graph, prefix: &str) -> Vec<Var> {
        self.parameter_names(prefix)
            .into_iter()
            .zip(self.parameters())
            .map(|(name, t)| g.named_leaf(name, t.clone()))
            .collect()
    }

    /// Records the forward pass of `x` on `g` using parameter handles from
    /// [`Mlp::register`].
    pub fn forward_graph(&self, g: &mut Graph, x: Var, params: &[Var]) -> Result<Var> {
        if params.len() != 2 * self.layers.len() {
            return Err(Error::Contract(format!(
                "{} parameter handles for {} layers",
                params.len(),
                self.layers.len()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h = x;
        for (k, pair) in params.chunks_exact(2).enumerate() {
            let z = g.matmul(h, pair[0])?;
            let z = g.add_row(z, pair[1])?;
            let act = if k == last {
                self.spec.output_activation
            } else {
                self.spec.hidden_activation
            };
            h = match act {
                Activation::Tanh => g.tanh(z)?,
                Activation::Linear => z,
            };
        }
        Ok(h)
    }

    /// Replaces every parameter; shapes must match.
    pub fn set_parameters(&mut self, values: Vec<Tensor>) -> Result<()> {
        if values.len() != 2 * self.layers.len() {
            return Err(Error::Contract("parameter count mismatch".into()));
        }
        for (slot, v) in self.parameters_mut().into_iter().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::dim(
                    "set_parameters",
                    format!("{:?} vs {:?}", slot.shape(), v.shape()),
                ));
            }
            *slot = v;
        }
        Ok(())
    }
}

/// Newest-first sliding windows of width `m` over `series`, one per row.
pub fn window_matrix(series: &[f64], m: usize) -> Result<Tensor> {
    if m == 0 || series.len() < m {
        return Err(Error::InsufficientHistory {
            needed: m.max(1),
            got: series.len(),
        });
    }
    let rows = series.len() - m + 1;
    let mut data = Vec::with_capacity(rows * m);
    for t in (m - 1)..series.len() {
        data.extend(series[t + 1 - m..=t].iter().rev());
    }
    Tensor::matrix(rows, m, data)
}

/// Encoder `G`, decoder `H`, window length and the standardisation the
/// networks were trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct WiaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub window: usize,
    pub standardizer: Standardizer,
    pub format_version: u32,
}

impl WiaeModel {
    pub fn new(encoder: Mlp, decoder: Mlp, window: usize, standardizer: Standardizer) -> Result<Self> {
        let model = Self {
            encoder,
            decoder,
            window,
            standardizer,
            format_version: MODEL_FORMAT_VERSION,
        };
        model.validate()?;
        Ok(model)
    }

    /// Freshly initialised encoder (tanh head) and decoder (linear head).
    pub fn init(window: usize, standardizer: Standardizer, seed: u64) -> Result<Self> {
        use crate::rng::{derive_seed, streams};
        let enc = init_mlp(
            &MlpSpec::standard(window, Activation::Tanh),
            derive_seed(seed, streams::ENCODER_INIT),
        )?;
        let dec = init_mlp(
            &MlpSpec::standard(window, Activation::Linear),
            derive_seed(seed, streams::DECODER_INIT),
        )?;
        Self::new(enc, dec, window, standardizer)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.window;
        if m == 0 {
            return Err(Error::Contract("window length must be at least 1".into()));
        }
        for (name, net) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            if net.spec().input_width != m || net.spec().output_width != 1 {
                return Err(Error::dim(
                    name,
                    format!(
                        "expected {m} -> 1, found {} -> {}",
                        net.spec().input_width,
                        net.spec().output_width
                    ),
                ));
            }
        }
        if !(self.standardizer.std > 0.0) || !self.standardizer.mean.is_finite() {
            return Err(Error::DegenerateData(format!(
                "standardizer must have finite mean and positive std, found {:?}",
                self.standardizer
            )));
        }
        Ok(())
    }

    /// Innovations of a standardised series: entry `k` is computed from the
    /// window ending at index `k + m - 1`.
    pub fn encode_series(&self, standardized: &[f64]) -> Result<Vec<f64>> {
        let windows = window_matrix(standardized, self.window)?;
        Ok(self.encoder.forward(&windows)?.into_data())
    }

    /// Reconstructions (standardised) from an innovation sequence: entry `k`
    /// is decoded from the innovation window ending at index `k + m - 1`.
    pub fn decode_innovations(&self, innovations: &[f64]) -> Result<Vec<f64>> {
        let windows = window_matrix(innovations, self.window)?;
        Ok(self.decoder.forward(&windows)?.into_data())
    }
}

/// Wasserstein critic over blocks of `input_width` consecutive values.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub net: Mlp,
}

impl Critic {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.spec().output_width != 1 || net.spec().output_activation != Activation::Linear {
            return Err(Error::Contract(
                "a critic needs a single linear output unit".into(),
            ));
        }
        Ok(Self { net })
    }

    /// `n -> [100, 50, 25] -> 1`, tanh hidden layers, linear head.
    pub fn init(block_width: usize, seed: u64) -> Result<Self> {
        Self::new(init_mlp(
            &MlpSpec::standard(block_width, Activation::Linear),
            seed,
        )?)
    }

    pub fn input_width(&self) -> usize {
        self.net.spec().input_width
    }

    /// Score of a single block.
    pub fn critic_score(&self, block: &[f64]) -> Result<f64> {
        if block.len() != self.input_width() {
            return Err(Error::dim(
                "critic input",
                format!("block of length {} for width {}", block.len(), self.input_width()),
            ));
        }
        let x = Tensor::matrix(1, block.len(), block.to_vec())?;
        self.net.forward(&x)?.item()
    }

    /// Scores of every row of a `[batch, n]` block matrix.
    pub fn score_batch(&self, blocks: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.forward(blocks)?.into_data())
    }
}
