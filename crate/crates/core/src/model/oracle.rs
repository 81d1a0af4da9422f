//! A two-class reference model with a known decision rule: class 1 when the
//! signal power inside a frequency band exceeds a threshold.

use num_complex::Complex64;

use super::{Classifier, PredictionDistribution};
use crate::error::{Error, Result};
use crate::signal::{bin_count, forward_dft, irdft, TimeSeries};

/// Logits `[0, gain * (power - threshold)]`, where `power` is the mean
/// square of the part of the input with frequency in `[band.0, band.1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandEnergyModel {
    pub length: usize,
    pub sample_rate: f64,
    pub band: (f64, f64),
    pub threshold: f64,
    pub gain: f64,
}

impl BandEnergyModel {
    pub fn new(length: usize, sample_rate: f64, band: (f64, f64), threshold: f64, gain: f64) -> Result<Self> {
        if length < 2 || !(sample_rate > 0.0) || !(band.0 < band.1) || !gain.is_finite() || !threshold.is_finite() {
            return Err(Error::validation("invalid band-energy model"));
        }
        Ok(BandEnergyModel { length, sample_rate, band, threshold, gain })
    }

    fn in_band(&self, j: usize) -> bool {
        let f = j as f64 * self.sample_rate / self.length as f64;
        f >= self.band.0 && f < self.band.1
    }

    /// Band-limited projection of `x` and its mean power.
    fn project(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.length {
            return Err(Error::shape(self.length, x.len()));
        }
        let ts = TimeSeries::univariate(x.to_vec(), self.sample_rate)?;
        let spec = forward_dft(&ts);
        let kept: Vec<Complex64> = spec
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, &c)| if self.in_band(j) { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        debug_assert_eq!(kept.len(), bin_count(self.length));
        let proj = irdft(&kept, self.length);
        let power = proj.iter().map(|v| v * v).sum::<f64>() / self.length as f64;
        Ok((proj, power))
    }

    pub fn band_power(&self, x: &[f64]) -> Result<f64> {
        Ok(self.project(x)?.1)
    }

    fn logits(&self, power: f64) -> [f64; 2] {
        [0.0, self.gain * (power - self.threshold)]
    }
}

impl Classifier for BandEnergyModel {
    fn classes(&self) -> usize {
        2
    }

    fn input_size(&self) -> usize {
        self.length
    }

    fn predict(&self, input: &[f64]) -> Result<PredictionDistribution> {
        let (_, power) = self.project(input)?;
        Ok(PredictionDistribution::from_logits(&self.logits(power)))
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn backward_input(&self, input: &[f64], target: &[f64]) -> Result<(PredictionDistribution, Vec<f64>)> {
        if target.len() != 2 {
            return Err(Error::shape(2, target.len()));
        }
        let (proj, power) = self.project(input)?;
        let p = PredictionDistribution::from_logits(&self.logits(power));
        let mass: f64 = target.iter().sum();
        let dlogit = p.prob(1) * mass - target[1];
        // P is an orthogonal projection, so d|Px|^2/dx = 2 Px
        let scale = dlogit * self.gain * 2.0 / self.length as f64;
        Ok((p, proj.iter().map(|q| scale * q).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, freq: f64) -> Vec<f64> {
        (0..len).map(|t| (2.0 * std::f64::consts::PI * freq * t as f64 / len as f64).sin()).collect()
    }

    #[test]
    fn power_of_pure_tones() {
        let m = BandEnergyModel::new(256, 256.0, (32.0, 48.0), 0.25, 10.0).unwrap();
        assert!((m.band_power(&tone(256, 40.0)).unwrap() - 0.5).abs() < 1e-9);
        assert!(m.band_power(&tone(256, 10.0)).unwrap() < 1e-9);
        let mix: Vec<f64> = tone(256, 40.0).iter().zip(tone(256, 10.0)).map(|(a, b)| a + 3.0 * b).collect();
        assert!((m.band_power(&mix).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(m.predict(&tone(256, 40.0)).unwrap().argmax(), 1);
        assert_eq!(m.predict(&tone(256, 10.0)).unwrap().argmax(), 0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = BandEnergyModel::new(64, 64.0, (8.0, 16.0), 0.3, 5.0).unwrap();
        let x: Vec<f64> = (0..64).map(|t| ((t * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let target = [0.2, 0.8];
        let (_, g) = m.backward_input(&x, &target).unwrap();
        let loss = |x: &[f64]| {
            let p = m.predict(x).unwrap();
            -(target[0] * p.prob(0).ln() + target[1] * p.prob(1).ln())
        };
        let h = 1e-5;
        for i in [0, 7, 31, 63] {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }
}
