//! Band-mask learning over a filterbank decomposition.

use serde::{Deserialize, Serialize};

use super::optim::{finite_difference, optimize};
use super::{check_input, resolve_target, Explanation, Method, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::filterbank::{collected_response, decompose, design_filterbank, odd_taps, reconstruct_raw, BandMask, Filterbank};
use crate::model::Classifier;
use crate::signal::{bin_count, TimeSeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlexConfig {
    /// Number of filterbank bands `L`.
    pub bands: usize,
    /// Filter length `N` (odd).
    pub taps: usize,
    /// Mean mask value below which sparsity is not penalized.
    pub ratio: f64,
    pub iterations: usize,
    pub step_size: f64,
    /// Class to explain; the predicted class when absent.
    pub target_class: Option<usize>,
}

impl Default for FlexConfig {
    fn default() -> Self {
        FlexConfig {
            bands: 32,
            taps: 257,
            ratio: 0.05,
            iterations: 1000,
            step_size: 1.0,
            target_class: None,
        }
    }
}

impl FlexConfig {
    /// Validates the config, bumping an even `taps` to the next odd value.
    pub fn normalized(mut self) -> Result<Self> {
        self.taps = odd_taps(self.taps);
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::validation(format!("ratio {} outside [0, 1]", self.ratio)));
        }
        if self.iterations == 0 || !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::validation("iterations and step_size must be positive"));
        }
        if self.bands < 2 || self.taps < 2 * self.bands + 1 {
            return Err(Error::validation(format!(
                "need bands >= 2 and taps >= 2*bands+1 (got {} bands, {} taps)",
                self.bands, self.taps
            )));
        }
        Ok(self)
    }

    pub fn filterbank(&self, sample_rate: f64) -> Result<Filterbank> {
        design_filterbank(self.bands, self.taps, sample_rate)
    }
}

/// Learns a band mask that keeps the model's prediction for `target`
/// (predicted class when `None`) on the masked reconstruction of `ts`.
///
/// Returns the mask and the collected response of the masked filterbank on
/// the `K`-bin grid as the explanation.
pub fn flextime_explain(
    model: &dyn Classifier,
    ts: &TimeSeries,
    fb: &Filterbank,
    target: Option<usize>,
    cfg: &FlexConfig,
) -> Result<(BandMask, Explanation)> {
    let cfg = cfg.clone().normalized()?;
    check_input(model, ts)?;
    if fb.bands() != cfg.bands || fb.taps_len() != cfg.taps {
        return Err(Error::validation(format!(
            "filterbank has {} bands of {} taps but config asks for {} of {}",
            fb.bands(),
            fb.taps_len(),
            cfg.bands,
            cfg.taps
        )));
    }
    if (fb.sample_rate() - ts.sample_rate()).abs() > 1e-9 * ts.sample_rate() {
        return Err(Error::validation("filterbank and series sample rates differ"));
    }
    let (class, y) = resolve_target(model, ts.as_slice(), target.or(cfg.target_class))?;
    let weight = y.prob(class);
    let dec = decompose(ts, fb);
    let mut target_vec = vec![0.0; model.classes()];
    target_vec[class] = weight;

    let distortion = |p: f64| -weight * p.max(PROB_FLOOR).ln();
    let outcome = if model.has_gradient() {
        optimize(cfg.bands, cfg.ratio, cfg.iterations, cfg.step_size, |m| {
            let x = reconstruct_raw(&dec, m, None);
            let (p, g) = model.backward_input(&x, &target_vec)?;
            let grad = (0..m.len())
                .map(|l| dec.band(l).iter().zip(&g).map(|(b, gi)| b * gi).sum())
                .collect();
            Ok((distortion(p.prob(class)), grad))
        })?
    } else {
        let d_at = |m: &[f64]| -> Result<f64> {
            let x = reconstruct_raw(&dec, m, None);
            Ok(distortion(model.predict(&x)?.prob(class)))
        };
        optimize(cfg.bands, cfg.ratio, cfg.iterations, cfg.step_size, |m| {
            let d = d_at(m)?;
            Ok((d, finite_difference(m, d, d_at)?))
        })?
    };

    let mask = BandMask::new(outcome.logits.mask())?;
    let saliency = collected_response(fb, &mask, bin_count(ts.len()))?;
    let mut expl = Explanation::new(Method::Flextime, class, saliency);
    expl.band_mask = Some(mask.values().to_vec());
    expl.trace = outcome.trace;
    expl.config = serde_json::to_value(&cfg)?;
    expl.validate()?;
    Ok((mask, expl))
}
