//! Synthetic benchmark with known salient frequency regions.
//!
//! The frequency axis `[0, T/2]` (in DFT-index units) is split into equal
//! bins. Each sample activates a random subset of bins; an active bin carries
//! `F` tones spread linearly across it, weighted by a Voigt profile centred at
//! a random point in the bin and sharing one random phase. The class label is
//! the subset of four designated salient bins that were activated, encoded as
//! a bitmask in the order the salient bins are listed.

use std::f64::consts::PI;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{bin_count, TimeSeries};
use crate::voigt::voigt_amplitude;

/// Generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Series length.
    pub length: usize,
    /// Number of equal-width bins over `[0, T/2]`.
    pub bin_count: usize,
    /// The four bins whose presence defines the label.
    pub salient_bins: [usize; 4],
    /// Tones per active bin.
    pub tones_per_bin: usize,
    pub bins_min: usize,
    pub bins_max: usize,
    pub noise_std: f64,
    /// Gaussian width of the Voigt profile; `None` means `bin_width / 8`.
    pub voigt_sigma: Option<f64>,
    /// Lorentzian half-width of the Voigt profile; `None` means `bin_width / 8`.
    pub voigt_gamma: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            length: 2000,
            bin_count: 32,
            salient_bins: [4, 11, 18, 26],
            tones_per_bin: 20,
            bins_min: 1,
            bins_max: 10,
            noise_std: 0.01,
            voigt_sigma: None,
            voigt_gamma: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub const CLASSES: usize = 16;

    pub fn validate(&self) -> Result<()> {
        if self.length < 4 {
            return Err(Error::validation("synthetic length must be at least 4"));
        }
        if self.bin_count == 0 || self.bin_count > self.length / 2 {
            return Err(Error::validation(format!(
                "bin_count {} must lie in [1, {}]",
                self.bin_count,
                self.length / 2
            )));
        }
        let s = self.salient_bins;
        for (i, &b) in s.iter().enumerate() {
            if b >= self.bin_count {
                return Err(Error::validation(format!("salient bin {b} >= bin_count")));
            }
            if s[..i].contains(&b) {
                return Err(Error::validation(format!("salient bin {b} listed twice")));
            }
        }
        if self.bins_min < 1 || self.bins_min > self.bins_max || self.bins_max > self.bin_count {
            return Err(Error::validation(format!(
                "bin range {}..={} must lie within 1..={}",
                self.bins_min, self.bins_max, self.bin_count
            )));
        }
        if self.tones_per_bin == 0 {
            return Err(Error::validation("tones_per_bin must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::validation("noise_std must be finite and non-negative"));
        }
        let (sg, gm) = (self.sigma(), self.gamma());
        if !(sg >= 0.0 && gm >= 0.0 && sg + gm > 0.0) {
            return Err(Error::validation("voigt widths must be non-negative, not both zero"));
        }
        Ok(())
    }

    /// Width of one bin in DFT-index units.
    pub fn bin_width(&self) -> f64 {
        (self.length / 2) as f64 / self.bin_count as f64
    }

    pub fn sigma(&self) -> f64 {
        self.voigt_sigma.unwrap_or(self.bin_width() / 8.0)
    }

    pub fn gamma(&self) -> f64 {
        self.voigt_gamma.unwrap_or(self.bin_width() / 8.0)
    }

    /// Sample rate chosen so that frequency in Hz equals the DFT index.
    pub fn sample_rate(&self) -> f64 {
        self.length as f64
    }

    /// `[start, end)` of bin `b`.
    pub fn bin_range(&self, b: usize) -> (f64, f64) {
        let w = self.bin_width();
        (b as f64 * w, (b + 1) as f64 * w)
    }

    /// Label of a set of active bins.
    pub fn label_of(&self, active: &[usize]) -> usize {
        self.salient_bins
            .iter()
            .enumerate()
            .filter(|(_, b)| active.contains(b))
            .map(|(i, _)| 1 << i)
            .sum()
    }

    /// DFT bins lying inside the salient regions encoded by `label`.
    pub fn ground_truth_for_label(&self, label: usize) -> Vec<bool> {
        let k = bin_count(self.length);
        let mut gt = vec![false; k];
        for (i, &b) in self.salient_bins.iter().enumerate() {
            if label & (1 << i) == 0 {
                continue;
            }
            let (lo, hi) = self.bin_range(b);
            for (j, g) in gt.iter_mut().enumerate() {
                let f = j as f64;
                if f >= lo && f < hi {
                    *g = true;
                }
            }
        }
        gt
    }
}

#[derive(Clone, Debug)]
pub struct SynthSample {
    pub ts: TimeSeries,
    pub label: usize,
    /// Active salient bins, indexed over all `bin_count` bins.
    pub ground_truth_bins: Vec<bool>,
    /// DFT bins inside active salient regions.
    pub ground_truth_freq: Vec<bool>,
    /// Every active bin (salient or not), ascending.
    pub active_bins: Vec<usize>,
}

/// Discrete choices of one sample, drawn before any waveform is built.
struct Draw {
    active: Vec<usize>,
    rng: ChaCha8Rng,
}

fn draw(cfg: &SynthConfig, mut rng: ChaCha8Rng) -> Draw {
    let count = rng.gen_range(cfg.bins_min..=cfg.bins_max);
    let mut active = sample_indices(&mut rng, cfg.bin_count, count).into_vec();
    active.sort_unstable();
    Draw { active, rng }
}

/// RNG stream for sample `index` of split `split`.
pub fn sample_rng(seed: u64, split: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ split.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

fn synthesize(cfg: &SynthConfig, d: Draw) -> Result<SynthSample> {
    let Draw { active, mut rng } = d;
    let t_len = cfg.length;
    let (sigma, gamma) = (cfg.sigma(), cfg.gamma());
    let mut x = vec![0.0; t_len];
    let mut bin_signal = vec![0.0; t_len];
    for &b in &active {
        let (start, end) = cfg.bin_range(b);
        let peak = rng.gen_range(start..end);
        let phase = rng.gen_range(0.0..2.0 * PI);
        bin_signal.iter_mut().for_each(|v| *v = 0.0);
        let step = (end - start) / cfg.tones_per_bin as f64;
        for i in 0..cfg.tones_per_bin {
            let f = start + i as f64 * step;
            let a = voigt_amplitude(f, peak, sigma, gamma)?;
            let w = 2.0 * PI * f / t_len as f64;
            // phasor recurrence; re-anchored every 256 steps to bound drift
            let rot = num_complex::Complex64::from_polar(1.0, w);
            let mut z = num_complex::Complex64::new(0.0, 0.0);
            for (t, v) in bin_signal.iter_mut().enumerate() {
                if t % 256 == 0 {
                    z = num_complex::Complex64::from_polar(a, w * t as f64 + phase);
                }
                *v += z.im;
                z *= rot;
            }
        }
        let peak_abs = bin_signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak_abs > 0.0 {
            for (o, v) in x.iter_mut().zip(&bin_signal) {
                *o += v / peak_abs;
            }
        }
    }
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::validation(e.to_string()))?;
        for v in &mut x {
            *v += normal.sample(&mut rng);
        }
    }
    let label = cfg.label_of(&active);
    let ground_truth_bins = (0..cfg.bin_count)
        .map(|b| cfg.salient_bins.contains(&b) && active.contains(&b))
        .collect();
    Ok(SynthSample {
        ts: TimeSeries::univariate(x, cfg.sample_rate())?,
        label,
        ground_truth_bins,
        ground_truth_freq: cfg.ground_truth_for_label(label),
        active_bins: active,
    })
}

/// Generates one sample from `rng`.
pub fn generate_sample(cfg: &SynthConfig, rng: ChaCha8Rng) -> Result<SynthSample> {
    cfg.validate()?;
    synthesize(cfg, draw(cfg, rng))
}

/// Generates a sample whose active bins are fixed (peaks, phases and noise
/// still drawn from `rng`).
pub fn generate_with_bins(cfg: &SynthConfig, active: &[usize], rng: ChaCha8Rng) -> Result<SynthSample> {
    cfg.validate()?;
    if active.iter().any(|&b| b >= cfg.bin_count) {
        return Err(Error::validation("active bin outside bin range"));
    }
    let mut active = active.to_vec();
    active.sort_unstable();
    active.dedup();
    synthesize(cfg, Draw { active, rng })
}

/// Labelled samples, stored as a flat `[n x T]` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub series: Vec<f64>,
    pub labels: Vec<usize>,
    pub length: usize,
    pub channels: usize,
    pub sample_rate: f64,
}

impl Dataset {
    pub fn new(series: Vec<f64>, labels: Vec<usize>, length: usize, channels: usize, sample_rate: f64) -> Result<Self> {
        if series.len() != labels.len() * length * channels {
            return Err(Error::shape(labels.len() * length * channels, series.len()));
        }
        Ok(Dataset {
            series,
            labels,
            length,
            channels,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_width(&self) -> usize {
        self.length * self.channels
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let w = self.sample_width();
        &self.series[i * w..(i + 1) * w]
    }

    pub fn series_at(&self, i: usize) -> TimeSeries {
        TimeSeries::new(self.input(i).to_vec(), self.channels, self.sample_rate)
            .expect("dataset rows are valid series")
    }

    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut c = vec![0; classes];
        for &l in &self.labels {
            if l < classes {
                c[l] += 1;
            }
        }
        c
    }

    /// Subset by index list, preserving order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let mut series = Vec::with_capacity(idx.len() * self.sample_width());
        for &i in idx {
            series.extend_from_slice(self.input(i));
        }
        Dataset {
            series,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            length: self.length,
            channels: self.channels,
            sample_rate: self.sample_rate,
        }
    }

    fn from_samples(samples: Vec<SynthSample>, cfg: &SynthConfig) -> Dataset {
        let mut series = Vec::with_capacity(samples.len() * cfg.length);
        let mut labels = Vec::with_capacity(samples.len());
        for s in samples {
            series.extend_from_slice(s.ts.as_slice());
            labels.push(s.label);
        }
        Dataset {
            series,
            labels,
            length: cfg.length,
            channels: 1,
            sample_rate: cfg.sample_rate(),
        }
    }
}

/// Train/validation/test splits.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

const SPLIT_TRAIN: u64 = 1;
const SPLIT_VAL: u64 = 2;
const SPLIT_TEST: u64 = 3;

/// I.i.d. samples `0..n` of split stream `split`.
pub fn generate_iid(cfg: &SynthConfig, split: u64, n: usize) -> Result<Vec<SynthSample>> {
    cfg.validate()?;
    (0..n)
        .into_par_iter()
        .map(|i| synthesize(cfg, draw(cfg, sample_rng(cfg.seed, split, i as u64))))
        .collect()
}

/// Class-balanced samples by rejection: candidates are drawn in stream order
/// and kept while their class quota is open.
pub fn generate_balanced(cfg: &SynthConfig, split: u64, n: usize) -> Result<Vec<SynthSample>> {
    cfg.validate()?;
    let classes = SynthConfig::CLASSES;
    if n % classes != 0 {
        return Err(Error::validation(format!(
            "balanced size {n} is not divisible by {classes}"
        )));
    }
    let quota = n / classes;
    let budget = (n as u64).saturating_mul(2000).max(100_000);
    let mut counts = vec![0usize; classes];
    let mut draws = Vec::with_capacity(n);
    let mut index = 0u64;
    while draws.len() < n {
        if index >= budget {
            let missing: Vec<usize> = (0..classes).filter(|&c| counts[c] < quota).collect();
            return Err(Error::Numeric(format!(
                "balanced sampling exhausted {budget} candidates; classes {missing:?} unfilled"
            )));
        }
        let d = draw(cfg, sample_rng(cfg.seed, split, index));
        index += 1;
        let label = cfg.label_of(&d.active);
        if counts[label] < quota {
            counts[label] += 1;
            draws.push(d);
        }
    }
    draws.into_par_iter().map(|d| synthesize(cfg, d)).collect()
}

/// Train and validation sets i.i.d.; test set balanced over the 16 classes.
pub fn generate_dataset(cfg: &SynthConfig, n_train: usize, n_val: usize, n_test: usize) -> Result<Splits> {
    cfg.validate()?;
    Ok(Splits {
        train: Dataset::from_samples(generate_iid(cfg, SPLIT_TRAIN, n_train)?, cfg),
        val: Dataset::from_samples(generate_iid(cfg, SPLIT_VAL, n_val)?, cfg),
        test: Dataset::from_samples(generate_balanced(cfg, SPLIT_TEST, n_test)?, cfg),
    })
}

/// Balanced test samples with their ground truth.
pub fn generate_test_samples(cfg: &SynthConfig, n_test: usize) -> Result<Vec<SynthSample>> {
    generate_balanced(cfg, SPLIT_TEST, n_test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_examples() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.label_of(&[4, 7, 18]), 0b0101);
        assert_eq!(cfg.label_of(&[0, 1, 2]), 0);
        assert_eq!(cfg.label_of(&[4, 11, 18, 26]), 15);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            SynthConfig { salient_bins: [4, 4, 18, 26], ..Default::default() },
            SynthConfig { salient_bins: [4, 11, 18, 32], ..Default::default() },
            SynthConfig { bins_min: 0, ..Default::default() },
            SynthConfig { bins_max: 33, ..Default::default() },
            SynthConfig { voigt_sigma: Some(0.0), voigt_gamma: Some(0.0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn ground_truth_matches_label() {
        let cfg = SynthConfig::default();
        let s = generate_sample(&cfg, sample_rng(3, 0, 17)).unwrap();
        assert_eq!(s.label, cfg.label_of(&s.active_bins));
        for (j, &g) in s.ground_truth_freq.iter().enumerate() {
            let bin = (j as f64 / cfg.bin_width()) as usize;
            let inside = bin < cfg.bin_count && s.ground_truth_bins[bin];
            assert_eq!(g, inside, "dft bin {j}");
        }
    }

    #[test]
    fn balanced_requires_divisible_size() {
        let cfg = SynthConfig::default();
        assert!(generate_balanced(&cfg, 3, 17).is_err());
    }

    #[test]
    fn unreachable_class_aborts() {
        let cfg = SynthConfig { bins_max: 3, length: 64, bin_count: 32, ..Default::default() };
        let err = generate_balanced(&cfg, 3, 16).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }
}
