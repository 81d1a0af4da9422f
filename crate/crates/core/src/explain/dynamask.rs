//! Per-bin mask learning in the DFT domain with a moving-average perturbation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::optim::{finite_difference, optimize};
use super::{check_input, resolve_target, Explanation, Method, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::signal::{forward_dft, irdft, moving_average_perturbation, spectral_gradient, TimeSeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamaskFreqConfig {
    /// Mean mask value below which sparsity is not penalized.
    pub ratio: f64,
    /// Half-width of the moving-average perturbation window, in bins.
    pub window: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub target_class: Option<usize>,
}

impl Default for DynamaskFreqConfig {
    fn default() -> Self {
        DynamaskFreqConfig {
            ratio: 0.05,
            window: 10,
            iterations: 1000,
            step_size: 1.0,
            target_class: None,
        }
    }
}

impl DynamaskFreqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::validation(format!("ratio {} outside [0, 1]", self.ratio)));
        }
        if self.iterations == 0 || !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::validation("iterations and step_size must be positive"));
        }
        Ok(())
    }
}

/// Learns one mask value per DFT bin (shared across channels); the mask is
/// the saliency. Masked-out bins are replaced by the moving-average
/// perturbation.
pub fn dynamask_freq_explain(
    model: &dyn Classifier,
    ts: &TimeSeries,
    target: Option<usize>,
    cfg: &DynamaskFreqConfig,
) -> Result<Explanation> {
    cfg.validate()?;
    check_input(model, ts)?;
    let (class, y) = resolve_target(model, ts.as_slice(), target.or(cfg.target_class))?;
    let weight = y.prob(class);
    let spec = forward_dft(ts);
    let pert = moving_average_perturbation(&spec, cfg.window);
    let bins = spec.bins();
    let len = ts.len();
    let channels = ts.channels();
    let coeffs = spec.as_slice();
    let diff: Vec<Complex64> = coeffs.iter().zip(pert.as_slice()).map(|(c, p)| c - p).collect();

    let masked_input = |m: &[f64]| -> Vec<f64> {
        let mut x = Vec::with_capacity(len * channels);
        let mut blended = vec![Complex64::new(0.0, 0.0); bins];
        for v in 0..channels {
            let base = v * bins;
            for (j, b) in blended.iter_mut().enumerate() {
                *b = pert.as_slice()[base + j] + diff[base + j] * m[j];
            }
            x.extend(irdft(&blended, len));
        }
        x
    };
    let distortion = |p: f64| -weight * p.max(PROB_FLOOR).ln();
    let mut target_vec = vec![0.0; model.classes()];
    target_vec[class] = weight;

    let outcome = if model.has_gradient() {
        optimize(bins, cfg.ratio, cfg.iterations, cfg.step_size, |m| {
            let x = masked_input(m);
            let (p, g) = model.backward_input(&x, &target_vec)?;
            let mut grad = vec![0.0; bins];
            for v in 0..channels {
                let gs = spectral_gradient(&g[v * len..(v + 1) * len]);
                for (j, (gj, dj)) in gs.iter().zip(&diff[v * bins..(v + 1) * bins]).enumerate() {
                    grad[j] += (gj.conj() * dj).re;
                }
            }
            Ok((distortion(p.prob(class)), grad))
        })?
    } else {
        let d_at = |m: &[f64]| -> Result<f64> { Ok(distortion(model.predict(&masked_input(m))?.prob(class))) };
        optimize(bins, cfg.ratio, cfg.iterations, cfg.step_size, |m| {
            let d = d_at(m)?;
            Ok((d, finite_difference(m, d, d_at)?))
        })?
    };

    let mut expl = Explanation::new(Method::DynamaskFreq, class, outcome.logits.mask());
    expl.trace = outcome.trace;
    expl.config = serde_json::to_value(cfg)?;
    expl.validate()?;
    Ok(expl)
}
