//! A small 1-D CNN classifier with exact reverse-mode input gradients.

mod layers;
mod oracle;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

use layers::{ConvGeom, PoolGeom};

pub use oracle::BandEnergyModel;
pub use train::{accuracy, train, train_from, EpochLog, TrainConfig, TrainOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1d {
        kernel: usize,
        stride: usize,
        channels: usize,
        padding: usize,
    },
    Relu,
    MaxPool1d {
        kernel: usize,
        stride: usize,
    },
    AvgPool1d {
        kernel: usize,
        stride: usize,
    },
}

/// Architecture: input shape, layer stack, and class count. The flattened
/// output of the last layer is the logit vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_length: usize,
    pub input_channels: usize,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Copy, Debug)]
enum Geom {
    Conv(ConvGeom),
    Relu,
    MaxPool(PoolGeom),
    AvgPool(PoolGeom),
}

impl ModelSpec {
    /// Three conv blocks with two stride-2 max pools and a final average pool
    /// over 500 steps; the last conv emits one channel per class.
    pub fn synthetic_default() -> Self {
        Self::three_block(2000, 64, 64, 31)
    }

    /// A lighter network for the same task: one wide 16-channel conv,
    /// pooling by 4 then 2, and two short convs before the class average.
    /// About a tenth of the arithmetic of [`ModelSpec::synthetic_default`].
    pub fn compact(input_length: usize) -> Self {
        ModelSpec {
            input_length,
            input_channels: 1,
            classes: 16,
            layers: vec![
                LayerSpec::Conv1d { kernel: 63, stride: 1, channels: 16, padding: 31 },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { kernel: 4, stride: 4 },
                LayerSpec::Conv1d { kernel: 9, stride: 1, channels: 16, padding: 4 },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { kernel: 2, stride: 2 },
                LayerSpec::Conv1d { kernel: 9, stride: 1, channels: 16, padding: 4 },
                LayerSpec::AvgPool1d { kernel: input_length / 8, stride: input_length / 8 },
            ],
        }
    }

    /// The same layout with configurable widths and kernel size.
    pub fn three_block(input_length: usize, width1: usize, width2: usize, kernel: usize) -> Self {
        let pad = kernel / 2;
        ModelSpec {
            input_length,
            input_channels: 1,
            classes: 16,
            layers: vec![
                LayerSpec::Conv1d { kernel, stride: 1, channels: width1, padding: pad },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { kernel: 2, stride: 2 },
                LayerSpec::Conv1d { kernel, stride: 1, channels: width2, padding: pad },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { kernel: 2, stride: 2 },
                LayerSpec::Conv1d { kernel, stride: 1, channels: 16, padding: pad },
                LayerSpec::AvgPool1d { kernel: input_length / 4, stride: input_length / 4 },
            ],
        }
    }

    fn geometry(&self) -> Result<Vec<Geom>> {
        if self.input_length == 0 || self.input_channels == 0 || self.classes < 2 {
            return Err(Error::validation("model needs positive input shape and >= 2 classes"));
        }
        let mut ch = self.input_channels;
        let mut len = self.input_length;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let g = match *layer {
                LayerSpec::Conv1d { kernel, stride, channels, padding } => {
                    if kernel == 0 || stride == 0 || channels == 0 || len + 2 * padding < kernel {
                        return Err(Error::validation(format!("layer {i}: invalid conv geometry")));
                    }
                    let out_len = (len + 2 * padding - kernel) / stride + 1;
                    let g = ConvGeom {
                        in_channels: ch,
                        out_channels: channels,
                        kernel,
                        stride,
                        padding,
                        in_len: len,
                        out_len,
                    };
                    ch = channels;
                    len = out_len;
                    Geom::Conv(g)
                }
                LayerSpec::Relu => Geom::Relu,
                LayerSpec::MaxPool1d { kernel, stride } | LayerSpec::AvgPool1d { kernel, stride } => {
                    if kernel == 0 || stride == 0 || len < kernel {
                        return Err(Error::validation(format!("layer {i}: invalid pool geometry")));
                    }
                    let out_len = (len - kernel) / stride + 1;
                    let g = PoolGeom { channels: ch, kernel, stride, in_len: len, out_len };
                    len = out_len;
                    if matches!(layer, LayerSpec::MaxPool1d { .. }) {
                        Geom::MaxPool(g)
                    } else {
                        Geom::AvgPool(g)
                    }
                }
            };
            out.push(g);
        }
        if ch * len != self.classes {
            return Err(Error::validation(format!(
                "network emits {ch} x {len} values but {} classes are declared",
                self.classes
            )));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().map(|_| ())
    }

    pub fn input_size(&self) -> usize {
        self.input_length * self.input_channels
    }
}

/// Weights `[out x in x kernel]` and biases of one conv layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// One entry per conv layer, in layer order.
    pub convs: Vec<ConvParams>,
    pub seed: u64,
}

impl ModelParams {
    /// Kaiming-uniform (fan-in) weights, zero biases.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let geom = spec.geometry()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let convs = geom
            .iter()
            .filter_map(|g| match g {
                Geom::Conv(c) => Some(c),
                _ => None,
            })
            .map(|c| {
                let fan_in = (c.in_channels * c.kernel) as f64;
                let bound = (6.0 / fan_in).sqrt();
                let n = c.out_channels * c.in_channels * c.kernel;
                ConvParams {
                    weight: (0..n).map(|_| rng.gen_range(-bound..bound)).collect(),
                    bias: vec![0.0; c.out_channels],
                }
            })
            .collect();
        Ok(ModelParams { convs, seed })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            convs: self
                .convs
                .iter()
                .map(|c| ConvParams {
                    weight: vec![0.0; c.weight.len()],
                    bias: vec![0.0; c.bias.len()],
                })
                .collect(),
            seed: self.seed,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.convs.iter().map(|c| c.weight.len() + c.bias.len()).sum()
    }

    fn check(&self, geom: &[Geom]) -> Result<()> {
        let convs: Vec<&ConvGeom> = geom
            .iter()
            .filter_map(|g| match g {
                Geom::Conv(c) => Some(c),
                _ => None,
            })
            .collect();
        if convs.len() != self.convs.len() {
            return Err(Error::shape(format!("{} conv layers", convs.len()), self.convs.len()));
        }
        for (g, p) in convs.iter().zip(&self.convs) {
            if p.weight.len() != g.out_channels * g.in_channels * g.kernel || p.bias.len() != g.out_channels {
                return Err(Error::shape("conv parameters matching the spec", "mismatched tensor"));
            }
            if p.weight.iter().chain(&p.bias).any(|v| !v.is_finite()) {
                return Err(Error::validation("non-finite model parameter"));
            }
        }
        Ok(())
    }
}

/// Class probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionDistribution(pub Vec<f64>);

impl PredictionDistribution {
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        PredictionDistribution(exps.into_iter().map(|e| e / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.0[class]
    }

    /// Most probable class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// A black-box classifier over flat channel-major inputs.
pub trait Classifier: Sync {
    fn classes(&self) -> usize;

    /// Number of input values (`T * V`).
    fn input_size(&self) -> usize;

    fn predict(&self, input: &[f64]) -> Result<PredictionDistribution>;

    fn has_gradient(&self) -> bool {
        false
    }

    /// Prediction and the gradient of `-sum_c target_c log p_c` with respect to
    /// the input.
    fn backward_input(&self, input: &[f64], target: &[f64]) -> Result<(PredictionDistribution, Vec<f64>)> {
        let _ = (input, target);
        Err(Error::Unsupported("model does not expose input gradients".into()))
    }
}

/// Intermediate state of one forward pass.
#[derive(Default)]
struct Tape {
    /// Input of each layer, plus the final output.
    acts: Vec<Vec<f64>>,
    /// Unfolded inputs of conv layers (empty for other layers).
    cols: Vec<Vec<f64>>,
    argmax: Vec<Vec<u32>>,
}

/// A model spec bound to parameters.
#[derive(Clone, Debug)]
pub struct Cnn {
    spec: ModelSpec,
    params: ModelParams,
    geom: Vec<Geom>,
}

impl Cnn {
    pub fn new(spec: ModelSpec, params: ModelParams) -> Result<Self> {
        let geom = spec.geometry()?;
        params.check(&geom)?;
        Ok(Cnn { spec, params, geom })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_size() {
            return Err(Error::shape(
                format!("{} x {} input", self.spec.input_channels, self.spec.input_length),
                format!("{} values", input.len()),
            ));
        }
        Ok(())
    }

    fn run_forward(&self, input: &[f64], tape: &mut Tape) {
        let n = self.geom.len();
        tape.acts.resize_with(n + 1, Vec::new);
        tape.cols.resize_with(n, Vec::new);
        tape.argmax.resize_with(n, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(input);
        let mut conv_i = 0;
        for (i, g) in self.geom.iter().enumerate() {
            let (head, tail) = tape.acts.split_at_mut(i + 1);
            let x = &head[i];
            let out = &mut tail[0];
            match g {
                Geom::Conv(c) => {
                    let p = &self.params.convs[conv_i];
                    conv_i += 1;
                    layers::conv_forward(c, &p.weight, &p.bias, x, out, &mut tape.cols[i]);
                }
                Geom::Relu => layers::relu_forward(x, out),
                Geom::MaxPool(pg) => layers::maxpool_forward(pg, x, out, &mut tape.argmax[i]),
                Geom::AvgPool(pg) => layers::avgpool_forward(pg, x, out),
            }
        }
    }

    /// Backpropagates `dlogits`; accumulates parameter gradients into `grads`
    /// when given, returns the input gradient when `want_input` is set.
    fn run_backward(&self, tape: &Tape, dlogits: &[f64], mut grads: Option<&mut ModelParams>, want_input: bool) -> Option<Vec<f64>> {
        let mut d = dlogits.to_vec();
        let mut next = Vec::new();
        let mut scratch = Vec::new();
        let mut conv_i = self.params.convs.len();
        for (i, g) in self.geom.iter().enumerate().rev() {
            let x = &tape.acts[i];
            let need_din = i > 0 || want_input;
            match g {
                Geom::Conv(c) => {
                    conv_i -= 1;
                    let p = &self.params.convs[conv_i];
                    let dw = grads.as_deref_mut().map(|gr| {
                        let gp = &mut gr.convs[conv_i];
                        (gp.weight.as_mut_slice(), gp.bias.as_mut_slice())
                    });
                    if dw.is_none() && !need_din {
                        break;
                    }
                    layers::conv_backward(
                        c,
                        &p.weight,
                        &tape.cols[i],
                        x,
                        &d,
                        dw,
                        need_din.then_some(&mut next),
                        &mut scratch,
                    );
                }
                Geom::Relu => {
                    if !need_din {
                        break;
                    }
                    layers::relu_backward(x, &d, &mut next)
                }
                Geom::MaxPool(pg) => {
                    if !need_din {
                        break;
                    }
                    layers::maxpool_backward(pg, &tape.argmax[i], &d, &mut next)
                }
                Geom::AvgPool(pg) => {
                    if !need_din {
                        break;
                    }
                    layers::avgpool_backward(pg, &d, &mut next)
                }
            }
            if need_din {
                std::mem::swap(&mut d, &mut next);
            }
        }
        want_input.then_some(d)
    }

    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut tape = Tape::default();
        self.run_forward(input, &mut tape);
        Ok(tape.acts.pop().unwrap_or_default())
    }

    /// Softmax class distribution for `ts`.
    pub fn forward(&self, ts: &TimeSeries) -> Result<PredictionDistribution> {
        self.predict(ts.as_slice())
    }

    /// Gradient of `-sum_c target_c log p_c(ts)` with respect to `ts`.
    pub fn backward_series(&self, ts: &TimeSeries, target: &[f64]) -> Result<Vec<f64>> {
        Ok(self.backward_input(ts.as_slice(), target)?.1)
    }

    /// Input gradient of an arbitrary linear functional of the logits.
    pub fn logit_gradient(&self, input: &[f64], dlogits: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut tape = Tape::default();
        self.run_forward(input, &mut tape);
        Ok(self.run_backward(&tape, dlogits, None, true).unwrap_or_default())
    }

    /// Cross-entropy loss against `target` and its parameter gradient
    /// (accumulated into `grads`). Returns `(loss, probabilities)`.
    pub(crate) fn accumulate_gradient(&self, input: &[f64], target: &[f64], grads: &mut ModelParams) -> (f64, PredictionDistribution) {
        let mut tape = Tape::default();
        self.run_forward(input, &mut tape);
        let logits = tape.acts.last().expect("forward produced output");
        let probs = PredictionDistribution::from_logits(logits);
        let (loss, dlogits) = cross_entropy(&probs, target);
        self.run_backward(&tape, &dlogits, Some(grads), false);
        (loss, probs)
    }

    /// Distributions and argmax labels for a flat batch `[n x input_size]`.
    pub fn predict_batch(&self, batch: &[f64]) -> Result<(Vec<PredictionDistribution>, Vec<usize>)> {
        let w = self.spec.input_size();
        if batch.len() % w != 0 {
            return Err(Error::shape(format!("multiple of {w}"), batch.len()));
        }
        let mut tape = Tape::default();
        let dists: Vec<PredictionDistribution> = batch
            .chunks(w)
            .map(|x| {
                self.run_forward(x, &mut tape);
                PredictionDistribution::from_logits(tape.acts.last().expect("output"))
            })
            .collect();
        let labels = dists.iter().map(|d| d.argmax()).collect();
        Ok((dists, labels))
    }
}

fn cross_entropy(probs: &PredictionDistribution, target: &[f64]) -> (f64, Vec<f64>) {
    let total: f64 = target.iter().sum();
    let loss = -target
        .iter()
        .zip(probs.probs())
        .map(|(t, p)| if *t == 0.0 { 0.0 } else { t * p.max(1e-300).ln() })
        .sum::<f64>();
    let grad = probs.probs().iter().zip(target).map(|(p, t)| p * total - t).collect();
    (loss, grad)
}

impl Classifier for Cnn {
    fn classes(&self) -> usize {
        self.spec.classes
    }

    fn input_size(&self) -> usize {
        self.spec.input_size()
    }

    fn predict(&self, input: &[f64]) -> Result<PredictionDistribution> {
        Ok(PredictionDistribution::from_logits(&self.logits(input)?))
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn backward_input(&self, input: &[f64], target: &[f64]) -> Result<(PredictionDistribution, Vec<f64>)> {
        self.check_input(input)?;
        if target.len() != self.spec.classes {
            return Err(Error::shape(self.spec.classes, target.len()));
        }
        let mut tape = Tape::default();
        self.run_forward(input, &mut tape);
        let probs = PredictionDistribution::from_logits(tape.acts.last().expect("output"));
        let (_, dlogits) = cross_entropy(&probs, target);
        let grad = self.run_backward(&tape, &dlogits, None, true).unwrap_or_default();
        Ok((probs, grad))
    }
}

/// Wraps a model that exposes only predictions; gradient-based callers fall
/// back to finite differences or report unsupported.
pub struct PredictOnly<'a, C: Classifier + ?Sized>(pub &'a C);

impl<C: Classifier + ?Sized> Classifier for PredictOnly<'_, C> {
    fn classes(&self) -> usize {
        self.0.classes()
    }

    fn input_size(&self) -> usize {
        self.0.input_size()
    }

    fn predict(&self, input: &[f64]) -> Result<PredictionDistribution> {
        self.0.predict(input)
    }
}
