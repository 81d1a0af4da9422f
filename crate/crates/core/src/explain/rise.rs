//! Randomized frequency-mask sampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_input, resolve_target, Explanation, Method};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::signal::{forward_dft, irdft, TimeSeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqRiseConfig {
    pub n_masks: usize,
    /// Number of coarse cells each random mask is drawn on.
    pub grid: usize,
    /// Probability that a coarse cell is kept.
    pub keep_probability: f64,
    pub seed: u64,
    pub target_class: Option<usize>,
}

impl Default for FreqRiseConfig {
    fn default() -> Self {
        FreqRiseConfig {
            n_masks: 3000,
            grid: 64,
            keep_probability: 0.5,
            seed: 0,
            target_class: None,
        }
    }
}

impl FreqRiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_masks == 0 || self.grid < 2 {
            return Err(Error::validation("n_masks must be >= 1 and grid >= 2"));
        }
        if !(self.keep_probability > 0.0 && self.keep_probability < 1.0) {
            return Err(Error::validation("keep_probability must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Linear interpolation of a coarse mask onto `bins` points.
pub(crate) fn upsample(coarse: &[f64], bins: usize) -> Vec<f64> {
    let g = coarse.len();
    if bins == 1 {
        return vec![coarse[0]];
    }
    (0..bins)
        .map(|j| {
            let pos = j as f64 * (g - 1) as f64 / (bins - 1) as f64;
            let i0 = (pos.floor() as usize).min(g - 2);
            let frac = pos - i0 as f64;
            (1.0 - frac) * coarse[i0] + frac * coarse[i0 + 1]
        })
        .collect()
}

// Masks are drawn and scored in blocks, each with its own random stream;
// block sums are added in block order.
const BLOCK: usize = 32;

/// Saliency is the score-weighted mean of random masks, each applied in the
/// DFT domain with zero perturbation and scored by the target probability.
pub fn freqrise_explain(model: &dyn Classifier, ts: &TimeSeries, target: Option<usize>, cfg: &FreqRiseConfig) -> Result<Explanation> {
    cfg.validate()?;
    check_input(model, ts)?;
    let (class, _) = resolve_target(model, ts.as_slice(), target.or(cfg.target_class))?;
    let spec = forward_dft(ts);
    let bins = spec.bins();
    let len = ts.len();
    let blocks = cfg.n_masks.div_ceil(BLOCK);
    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|block| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(block as u64);
            let count = BLOCK.min(cfg.n_masks - block * BLOCK);
            let mut acc = vec![0.0; bins];
            let mut x = Vec::with_capacity(len * spec.channels());
            let mut blended = vec![Complex64::new(0.0, 0.0); bins];
            for _ in 0..count {
                let coarse: Vec<f64> = (0..cfg.grid)
                    .map(|_| if rng.gen::<f64>() < cfg.keep_probability { 1.0 } else { 0.0 })
                    .collect();
                let mask = upsample(&coarse, bins);
                x.clear();
                for v in 0..spec.channels() {
                    for ((b, c), m) in blended.iter_mut().zip(spec.channel(v)).zip(&mask) {
                        *b = c * m;
                    }
                    x.extend(irdft(&blended, len));
                }
                let score = model.predict(&x)?.prob(class);
                for (a, m) in acc.iter_mut().zip(&mask) {
                    *a += score * m;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let norm = 1.0 / (cfg.n_masks as f64 * cfg.keep_probability);
    let mut saliency = vec![0.0; bins];
    for part in &partials {
        for (s, p) in saliency.iter_mut().zip(part) {
            *s += p;
        }
    }
    saliency.iter_mut().for_each(|s| *s *= norm);
    let mut expl = Explanation::new(Method::FreqRise, class, saliency);
    expl.config = serde_json::to_value(cfg)?;
    expl.validate()?;
    Ok(expl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_interpolates_linearly() {
        let up = upsample(&[0.0, 1.0], 5);
        assert_eq!(up, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let up = upsample(&[1.0, 0.0, 1.0], 3);
        assert_eq!(up, vec![1.0, 0.0, 1.0]);
    }
}
