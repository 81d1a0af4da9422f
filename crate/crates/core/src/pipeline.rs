//! End-to-end plumbing: run configuration, explainer dispatch, persistence of
//! datasets and weights, dataset-level evaluation and tuning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{Tensor, TensorContainer, TensorData};
use crate::error::{Error, Result};
use crate::explain::{
    dynamask_freq_explain, flextime_explain, freqrise_explain, gradient_explain, random_explain, DynamaskFreqConfig,
    Explanation, FlexConfig, FreqRiseConfig, GradientMethod, Method,
};
use crate::filterbank::Filterbank;
use crate::metrics::{
    complexity, faithfulness, localization, robustness_max_sensitivity, tune_with, RobustnessConfig, SampleMetrics,
    TuneGrid, TuneOutcome,
};
use crate::model::{Classifier, ConvParams, LayerSpec, ModelParams, ModelSpec, TrainConfig};
use crate::signal::{bin_count, TimeSeries};
use crate::synthdata::{Dataset, SynthConfig};

/// Settings of every explainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub flextime: FlexConfig,
    pub dynamask_freq: DynamaskFreqConfig,
    pub freqrise: FreqRiseConfig,
    pub ig_steps: usize,
    /// Seed of the random-saliency control; sample `i` uses `seed + i`.
    pub random_seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            flextime: FlexConfig::default(),
            dynamask_freq: DynamaskFreqConfig::default(),
            freqrise: FreqRiseConfig::default(),
            ig_steps: 50,
            random_seed: 0,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        self.flextime.clone().normalized()?;
        self.dynamask_freq.validate()?;
        self.freqrise.validate()?;
        if self.ig_steps == 0 {
            return Err(Error::validation("ig_steps must be positive"));
        }
        Ok(())
    }
}

/// A model bound to explainer settings and a filterbank.
pub struct Explainer<'a> {
    model: &'a dyn Classifier,
    cfg: ExplainConfig,
    filterbank: Filterbank,
}

impl<'a> Explainer<'a> {
    pub fn new(model: &'a dyn Classifier, cfg: &ExplainConfig, sample_rate: f64) -> Result<Self> {
        cfg.validate()?;
        let mut cfg = cfg.clone();
        cfg.flextime = cfg.flextime.normalized()?;
        let filterbank = cfg.flextime.filterbank(sample_rate)?;
        Ok(Explainer { model, cfg, filterbank })
    }

    pub fn config(&self) -> &ExplainConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &Filterbank {
        &self.filterbank
    }

    pub fn model(&self) -> &dyn Classifier {
        self.model
    }

    /// Explains sample number `index` (which seeds the random control).
    pub fn explain(&self, method: Method, ts: &TimeSeries, index: usize, target: Option<usize>) -> Result<Explanation> {
        let m = self.model;
        match method {
            Method::Flextime => Ok(flextime_explain(m, ts, &self.filterbank, target, &self.cfg.flextime)?.1),
            Method::DynamaskFreq => dynamask_freq_explain(m, ts, target, &self.cfg.dynamask_freq),
            Method::FreqRise => freqrise_explain(m, ts, target, &self.cfg.freqrise),
            Method::Saliency => gradient_explain(GradientMethod::Saliency, m, ts, target, self.cfg.ig_steps),
            Method::Gxi => gradient_explain(GradientMethod::Gxi, m, ts, target, self.cfg.ig_steps),
            Method::Ig => gradient_explain(GradientMethod::Ig, m, ts, target, self.cfg.ig_steps),
            Method::Random => {
                let class = match target {
                    Some(c) => c,
                    None => m.predict(ts.as_slice())?.argmax(),
                };
                Ok(random_explain(ts, class, self.cfg.random_seed.wrapping_add(index as u64)))
            }
        }
    }

    /// Explains every series in parallel; output order follows the input.
    pub fn explain_all(&self, method: Method, series: &[TimeSeries], first_index: usize) -> Result<Vec<Explanation>> {
        series
            .par_iter()
            .enumerate()
            .map(|(i, ts)| self.explain(method, ts, first_index + i, None))
            .collect()
    }
}

/// One sample to evaluate.
#[derive(Clone, Debug)]
pub struct EvalSample {
    pub split: usize,
    pub index: usize,
    pub ts: TimeSeries,
    pub label: usize,
    /// Salient DFT bins; `None` or all-false skips localization.
    pub ground_truth: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub keep_fraction: f64,
    /// Number of test samples explained and scored.
    pub samples: usize,
    pub robustness: RobustnessConfig,
    /// Robustness is computed on the first this-many samples only.
    pub robustness_samples: usize,
    pub methods: Vec<Method>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            keep_fraction: 0.1,
            samples: 200,
            robustness: RobustnessConfig::default(),
            robustness_samples: 10,
            methods: vec![Method::Flextime, Method::DynamaskFreq, Method::Random],
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::validation("keep_fraction must lie in (0, 1]"));
        }
        if self.samples == 0 || self.methods.is_empty() {
            return Err(Error::validation("metrics need at least one sample and one method"));
        }
        self.robustness.validate()
    }
}

/// Per-sample metrics of precomputed explanations. Faithfulness is the
/// probability of the true label.
pub fn evaluate(
    explainer: &Explainer<'_>,
    method: Method,
    samples: &[EvalSample],
    explanations: &[Explanation],
    cfg: &MetricsConfig,
) -> Result<Vec<SampleMetrics>> {
    if samples.len() != explanations.len() {
        return Err(Error::shape(samples.len(), explanations.len()));
    }
    let model = explainer.model();
    samples
        .par_iter()
        .zip(explanations.par_iter())
        .enumerate()
        .map(|(k, (s, e))| {
            let loc = match &s.ground_truth {
                Some(gt) if gt.iter().any(|&g| g) => Some(localization(&e.saliency, gt)?),
                _ => None,
            };
            let robustness = if k < cfg.robustness_samples {
                let target = Some(e.target_class);
                robustness_max_sensitivity(|x| explainer.explain(method, x, s.index, target), &s.ts, &cfg.robustness)?
            } else {
                None
            };
            Ok(SampleMetrics {
                split: s.split,
                index: s.index,
                label: s.label,
                target_class: e.target_class,
                localization: loc,
                faithfulness: faithfulness(model, &s.ts, e, cfg.keep_fraction, s.label)?,
                complexity: complexity(e.features())?,
                robustness,
            })
        })
        .collect()
}

/// Grid search for the mask explainers (FLEXtime: `L`, `N`, `r`;
/// Dynamask: `r`) on a validation subsample, scored by mean true-label
/// faithfulness with mean complexity as the tie-breaker.
pub fn tune_hyperparameters(
    method: Method,
    model: &dyn Classifier,
    val: &Dataset,
    grid: &TuneGrid,
    base: &ExplainConfig,
) -> Result<TuneOutcome> {
    let filterbank = match method {
        Method::Flextime => true,
        Method::DynamaskFreq => false,
        other => return Err(Error::validation(format!("{other} has no tunable hyperparameters"))),
    };
    if val.is_empty() {
        return Err(Error::validation("empty validation split"));
    }
    let idx = grid.subsample_indices(val.len());
    let series: Vec<TimeSeries> = idx.iter().map(|&i| val.series_at(i)).collect();
    let labels: Vec<usize> = idx.iter().map(|&i| val.labels[i]).collect();
    let candidates = grid.candidates(filterbank)?;
    tune_with(&candidates, |c| {
        let mut cfg = base.clone();
        match (c.bands, c.taps) {
            (Some(l), Some(n)) => {
                cfg.flextime.bands = l;
                cfg.flextime.taps = n;
                cfg.flextime.ratio = c.ratio;
            }
            _ => cfg.dynamask_freq.ratio = c.ratio,
        }
        let explainer = Explainer::new(model, &cfg, val.sample_rate)?;
        let scores: Vec<(f64, f64)> = series
            .par_iter()
            .zip(labels.par_iter())
            .enumerate()
            .map(|(i, (ts, &label))| {
                let e = explainer.explain(method, ts, idx[i], None)?;
                Ok((faithfulness(model, ts, &e, grid.keep_fraction, label)?, complexity(e.features())?))
            })
            .collect::<Result<_>>()?;
        let n = scores.len() as f64;
        Ok((scores.iter().map(|s| s.0).sum::<f64>() / n, scores.iter().map(|s| s.1).sum::<f64>() / n))
    })
}

fn dim(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::validation("dimension exceeds u32"))
}

/// Series as f32 `[n x V x T]`, labels as u8, sample rate, and optional
/// ground truth as u8 `[n x K]`.
pub fn dataset_to_container(ds: &Dataset, ground_truth: Option<&[Vec<bool>]>) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.push(Tensor::f32_from("series", vec![dim(ds.len())?, dim(ds.channels)?, dim(ds.length)?], &ds.series)?)?;
    let labels = ds
        .labels
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| Error::validation("label exceeds 255")))
        .collect::<Result<Vec<u8>>>()?;
    c.push(Tensor::new("labels", vec![dim(ds.len())?], TensorData::U8(labels))?)?;
    c.push(Tensor::new("sample_rate", vec![1], TensorData::F64(vec![ds.sample_rate]))?)?;
    if let Some(gt) = ground_truth {
        if gt.len() != ds.len() {
            return Err(Error::shape(ds.len(), gt.len()));
        }
        let k = bin_count(ds.length);
        let mut flat = Vec::with_capacity(gt.len() * k);
        for row in gt {
            if row.len() != k {
                return Err(Error::shape(k, row.len()));
            }
            flat.extend(row.iter().map(|&g| u8::from(g)));
        }
        c.push(Tensor::new("ground_truth", vec![dim(gt.len())?, dim(k)?], TensorData::U8(flat))?)?;
    }
    Ok(c)
}

/// Inverse of [`dataset_to_container`].
pub fn dataset_from_container(c: &TensorContainer) -> Result<(Dataset, Option<Vec<Vec<bool>>>)> {
    let series = c.require("series")?;
    if series.dims.len() != 3 {
        return Err(Error::Format("series must be [n x V x T]".into()));
    }
    let (n, channels, length) = (series.dims[0] as usize, series.dims[1] as usize, series.dims[2] as usize);
    let labels = match &c.require("labels")?.data {
        TensorData::U8(v) => v.iter().map(|&l| l as usize).collect::<Vec<_>>(),
        _ => return Err(Error::Format("labels must be u8".into())),
    };
    let sample_rate = c.require("sample_rate")?.data.to_f64().first().copied().unwrap_or(1.0);
    let ds = Dataset::new(series.data.to_f64(), labels, length, channels, sample_rate)
        .map_err(|e| Error::Format(e.to_string()))?;
    let gt = match c.get("ground_truth") {
        None => None,
        Some(t) => {
            let k = bin_count(length);
            if t.dims != [n as u32, k as u32] {
                return Err(Error::Format("ground_truth must be [n x K]".into()));
            }
            let TensorData::U8(v) = &t.data else {
                return Err(Error::Format("ground_truth must be u8".into()));
            };
            Some(v.chunks(k).map(|r| r.iter().map(|&g| g != 0).collect()).collect())
        }
    };
    Ok((ds, gt))
}

fn conv_shapes(spec: &ModelSpec) -> Vec<(usize, usize, usize)> {
    let mut ch = spec.input_channels;
    let mut out = Vec::new();
    for l in &spec.layers {
        if let LayerSpec::Conv1d { kernel, channels, .. } = *l {
            out.push((channels, ch, kernel));
            ch = channels;
        }
    }
    out
}

/// Layer-ordered weights (`conv{i}.weight` `[out x in x kernel]`,
/// `conv{i}.bias`) as f32.
pub fn params_to_container(spec: &ModelSpec, params: &ModelParams) -> Result<TensorContainer> {
    let shapes = conv_shapes(spec);
    if shapes.len() != params.convs.len() {
        return Err(Error::shape(shapes.len(), params.convs.len()));
    }
    let mut c = TensorContainer::new();
    for (i, ((o, ci, k), p)) in shapes.iter().zip(&params.convs).enumerate() {
        c.push(Tensor::f32_from(format!("conv{i}.weight"), vec![dim(*o)?, dim(*ci)?, dim(*k)?], &p.weight)?)?;
        c.push(Tensor::f32_from(format!("conv{i}.bias"), vec![dim(*o)?], &p.bias)?)?;
    }
    Ok(c)
}

pub fn params_from_container(spec: &ModelSpec, c: &TensorContainer, seed: u64) -> Result<ModelParams> {
    let convs = conv_shapes(spec)
        .iter()
        .enumerate()
        .map(|(i, &(o, ci, k))| {
            let w = c.require(&format!("conv{i}.weight"))?;
            let b = c.require(&format!("conv{i}.bias"))?;
            if w.dims != [o as u32, ci as u32, k as u32] || b.dims != [o as u32] {
                return Err(Error::Format(format!("conv{i} tensors do not match the model spec")));
            }
            Ok(ConvParams { weight: w.data.to_f64(), bias: b.data.to_f64() })
        })
        .collect::<Result<_>>()?;
    Ok(ModelParams { convs, seed })
}

/// Band edges `[L + 1]` and taps `[L x N]` as f32.
pub fn filterbank_to_container(fb: &Filterbank) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.push(Tensor::f32_from("band_edges", vec![dim(fb.band_edges().len())?], fb.band_edges())?)?;
    let taps: Vec<f64> = fb.filters().iter().flat_map(|f| f.taps.iter().copied()).collect();
    c.push(Tensor::f32_from("taps", vec![dim(fb.bands())?, dim(fb.taps_len())?], &taps)?)?;
    c.push(Tensor::new("sample_rate", vec![1], TensorData::F64(vec![fb.sample_rate()]))?)?;
    Ok(c)
}

/// Sizes of the generated splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSizes {
    pub train: usize,
    pub val: usize,
    /// Balanced; must be a multiple of 16.
    pub test: usize,
}

impl Default for DataSizes {
    fn default() -> Self {
        DataSizes { train: 10_000, val: 1000, test: 992 }
    }
}

/// Everything a run needs, as one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, replaces every component seed.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub synth: SynthConfig,
    pub sizes: DataSizes,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub explain: ExplainConfig,
    pub metrics: MetricsConfig,
    pub tune: TuneGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        RunConfig {
            seed: None,
            workers: None,
            model: ModelSpec::compact(synth.length),
            synth,
            sizes: DataSizes::default(),
            train: TrainConfig { learning_rate: 3e-3, ..TrainConfig::default() },
            explain: ExplainConfig::default(),
            metrics: MetricsConfig::default(),
            tune: TuneGrid::default(),
        }
    }
}

impl RunConfig {
    /// Applies the global seed and checks every section.
    pub fn normalized(mut self) -> Result<Self> {
        if let Some(seed) = self.seed {
            self.synth.seed = seed;
            self.train.seed = seed;
            self.explain.freqrise.seed = seed;
            self.explain.random_seed = seed;
            self.metrics.robustness.seed = seed;
            self.tune.seed = seed;
        }
        self.explain.flextime = self.explain.flextime.normalized()?;
        self.synth.validate()?;
        self.model.validate()?;
        if self.model.input_length != self.synth.length || self.model.input_channels != 1 {
            return Err(Error::validation("model input shape must match the generated series"));
        }
        if self.model.classes != SynthConfig::CLASSES {
            return Err(Error::validation("model must have 16 classes"));
        }
        if self.sizes.train == 0 || self.sizes.val == 0 || self.sizes.test == 0 {
            return Err(Error::validation("split sizes must be positive"));
        }
        if self.sizes.test % SynthConfig::CLASSES != 0 {
            return Err(Error::validation("test size must be a multiple of 16"));
        }
        if self.workers == Some(0) {
            return Err(Error::validation("workers must be positive"));
        }
        self.train.validate()?;
        self.explain.validate()?;
        self.metrics.validate()?;
        self.tune.validate()?;
        Ok(self)
    }
}
