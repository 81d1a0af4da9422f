//! Explainers. Every method returns an [`Explanation`] on the one-sided DFT
//! grid of the explained series.

mod dynamask;
mod flex;
mod gradient;
mod optim;
mod rise;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::BandMask;
use crate::model::{Classifier, PredictionDistribution};
use crate::signal::{bin_count, TimeSeries};

pub use dynamask::{dynamask_freq_explain, DynamaskFreqConfig};
pub use flex::{flextime_explain, FlexConfig};
pub use gradient::{gradient_explain, GradientMethod};
pub use optim::{MaskLogits, MAX_HALVINGS};
pub use rise::{freqrise_explain, FreqRiseConfig};

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Flextime,
    DynamaskFreq,
    #[serde(rename = "freqrise")]
    FreqRise,
    Saliency,
    Gxi,
    Ig,
    /// Uniform random saliency; a control for faithfulness comparisons.
    Random,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Flextime,
        Method::DynamaskFreq,
        Method::FreqRise,
        Method::Saliency,
        Method::Gxi,
        Method::Ig,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Flextime => "flextime",
            Method::DynamaskFreq => "dynamask_freq",
            Method::FreqRise => "freqrise",
            Method::Saliency => "saliency",
            Method::Gxi => "gxi",
            Method::Ig => "ig",
            Method::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A saliency vector over the `K` frequency bins, with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: Method,
    pub target_class: usize,
    pub saliency: Vec<f64>,
    /// `[V x K]` saliency when the explained series has several channels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_saliency: Option<Vec<f64>>,
    /// Learned band mask (FLEXtime only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_mask: Option<Vec<f64>>,
    /// Signed attributions before taking magnitudes (gradient methods).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed: Option<Vec<f64>>,
    /// Objective value per optimizer iteration, starting with the initial one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_secs: Option<f64>,
}

impl Explanation {
    pub fn new(method: Method, target_class: usize, saliency: Vec<f64>) -> Self {
        Explanation {
            method,
            target_class,
            saliency,
            channel_saliency: None,
            band_mask: None,
            signed: None,
            trace: Vec::new(),
            config: serde_json::Value::Null,
            duration_secs: None,
        }
    }

    pub fn bins(&self) -> usize {
        self.saliency.len()
    }

    /// Checks that all saliency values are finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let all = self.saliency.iter().chain(self.channel_saliency.iter().flatten());
        for &s in all {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Numeric(format!("{} produced invalid saliency {s}", self.method)));
            }
        }
        Ok(())
    }

    /// Saliency flattened over channels (`K * V` features), or the shared
    /// `K`-vector for univariate explanations.
    pub fn features(&self) -> &[f64] {
        self.channel_saliency.as_deref().unwrap_or(&self.saliency)
    }
}

/// `D = -y_l ln(max(yM_l, 1e-12))` with every other entry of `y` zeroed.
pub fn distortion_loss(y: &PredictionDistribution, y_masked: &PredictionDistribution, target_class: usize) -> f64 {
    -y.prob(target_class) * y_masked.prob(target_class).max(PROB_FLOOR).ln()
}

/// `max(mean(|m|) - r, 0)`.
pub fn sparsity_penalty(mask: &BandMask, ratio: f64) -> f64 {
    hinge(mask.values(), ratio)
}

pub(crate) fn hinge(mask: &[f64], ratio: f64) -> f64 {
    let mean = mask.iter().map(|m| m.abs()).sum::<f64>() / mask.len() as f64;
    (mean - ratio).max(0.0)
}

/// Class to explain: the explicit one if given, else the predicted class.
pub(crate) fn resolve_target(model: &dyn Classifier, input: &[f64], target: Option<usize>) -> Result<(usize, PredictionDistribution)> {
    let y = model.predict(input)?;
    let class = target.unwrap_or_else(|| y.argmax());
    if class >= model.classes() {
        return Err(Error::validation(format!("target class {class} outside [0, {})", model.classes())));
    }
    Ok((class, y))
}

pub(crate) fn check_input(model: &dyn Classifier, ts: &TimeSeries) -> Result<()> {
    if ts.as_slice().len() != model.input_size() {
        return Err(Error::shape(model.input_size(), ts.as_slice().len()));
    }
    Ok(())
}

/// Uniform random saliency over the `K` bins of `ts`.
pub fn random_explain(ts: &TimeSeries, target_class: usize, seed: u64) -> Explanation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let saliency = (0..bin_count(ts.len())).map(|_| rng.gen::<f64>()).collect();
    let mut e = Explanation::new(Method::Random, target_class, saliency);
    e.config = serde_json::json!({ "seed": seed });
    e
}
