//! Time and frequency representations of real-valued multichannel signals.
//!
//! The transform is the one-sided real-input DFT with `K = T/2 + 1` bins.
//! The forward direction is unnormalized; the `1/T` factor lives in the
//! inverse. Samples and coefficients are stored channel-major.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Number of one-sided bins for a real signal of length `len`.
pub fn bin_count(len: usize) -> usize {
    len / 2 + 1
}

/// Multiplicity of bin `j` in the two-sided spectrum: 1 for DC and (for even
/// lengths) the Nyquist bin, 2 otherwise.
pub fn bin_multiplicity(j: usize, len: usize) -> f64 {
    if j == 0 || (len % 2 == 0 && j == len / 2) {
        1.0
    } else {
        2.0
    }
}

/// Real-valued signal of `len` steps over `channels` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    data: Vec<f64>,
    len: usize,
    channels: usize,
    sample_rate: f64,
}

impl TimeSeries {
    /// Builds a series from channel-major samples (`channels` blocks of `len`).
    pub fn new(data: Vec<f64>, channels: usize, sample_rate: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::validation("time series needs at least one channel"));
        }
        if data.len() % channels != 0 {
            return Err(Error::shape(
                format!("multiple of {channels} samples"),
                data.len(),
            ));
        }
        let len = data.len() / channels;
        if len < 2 {
            return Err(Error::validation(format!(
                "time series needs at least 2 steps, got {len}"
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::validation(format!("invalid sample rate {sample_rate}")));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(format!("non-finite sample at index {i}")));
        }
        Ok(TimeSeries {
            data,
            len,
            channels,
            sample_rate,
        })
    }

    pub fn univariate(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::new(samples, 1, sample_rate)
    }

    /// Builds a series from row-major `[T x V]` samples.
    pub fn from_rows(rows: &[f64], channels: usize, sample_rate: f64) -> Result<Self> {
        if channels == 0 || rows.len() % channels != 0 {
            return Err(Error::shape(format!("rows of {channels}"), rows.len()));
        }
        let len = rows.len() / channels;
        let mut data = vec![0.0; rows.len()];
        for t in 0..len {
            for v in 0..channels {
                data[v * len + t] = rows[t * channels + v];
            }
        }
        Self::new(data, channels, sample_rate)
    }

    pub fn zeros(len: usize, channels: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len * channels], channels, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, v: usize) -> &[f64] {
        &self.data[v * self.len..(v + 1) * self.len]
    }

    /// Channel-major samples.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Sample at step `t` of channel `v`.
    pub fn at(&self, t: usize, v: usize) -> f64 {
        self.data[v * self.len + t]
    }

    /// Replaces the samples, keeping shape and sample rate.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::shape(self.data.len(), data.len()));
        }
        Self::new(data, self.channels, self.sample_rate)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Population standard deviation over all samples.
    pub fn std(&self) -> f64 {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        (self.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// One-sided DFT coefficients of a [`TimeSeries`], channel-major `[V x K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
    bins: usize,
    channels: usize,
    origin_length: usize,
    sample_rate: f64,
}

impl Spectrum {
    pub fn new(
        coeffs: Vec<Complex64>,
        channels: usize,
        origin_length: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if channels == 0 || origin_length < 2 {
            return Err(Error::validation("spectrum needs a channel and origin length >= 2"));
        }
        let bins = bin_count(origin_length);
        if coeffs.len() != bins * channels {
            return Err(Error::shape(
                format!("{bins} bins x {channels} channels for origin length {origin_length}"),
                format!("{} coefficients", coeffs.len()),
            ));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::validation("non-finite spectrum coefficient"));
        }
        Ok(Spectrum {
            coeffs,
            bins,
            channels,
            origin_length,
            sample_rate,
        })
    }

    pub fn zeros(origin_length: usize, channels: usize, sample_rate: f64) -> Result<Self> {
        let bins = bin_count(origin_length);
        Self::new(
            vec![Complex64::new(0.0, 0.0); bins * channels],
            channels,
            origin_length,
            sample_rate,
        )
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn origin_length(&self) -> usize {
        self.origin_length
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, v: usize) -> &[Complex64] {
        &self.coeffs[v * self.bins..(v + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    /// Frequency in Hz of bin `j`.
    pub fn frequency(&self, j: usize) -> f64 {
        j as f64 * self.sample_rate / self.origin_length as f64
    }
}

/// Per-bin weights in `[0, 1]`, shared across channels.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyMask(Vec<f64>);

impl FrequencyMask {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("mask value {v} outside [0, 1]")));
        }
        Ok(FrequencyMask(values))
    }

    pub fn ones(bins: usize) -> Self {
        FrequencyMask(vec![1.0; bins])
    }

    pub fn zeros(bins: usize) -> Self {
        FrequencyMask(vec![0.0; bins])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Replacement content substituted for masked-out bins.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpectrum {
    values: Vec<Complex64>,
    bins: usize,
    channels: usize,
}

impl PerturbationSpectrum {
    pub fn new(values: Vec<Complex64>, bins: usize, channels: usize) -> Result<Self> {
        if values.len() != bins * channels {
            return Err(Error::shape(bins * channels, values.len()));
        }
        if values.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::validation("non-finite perturbation value"));
        }
        Ok(PerturbationSpectrum {
            values,
            bins,
            channels,
        })
    }

    pub fn zeros_like(spec: &Spectrum) -> Self {
        PerturbationSpectrum {
            values: vec![Complex64::new(0.0, 0.0); spec.coeffs.len()],
            bins: spec.bins,
            channels: spec.channels,
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }
}

/// One-sided forward DFT, `c_j = sum_t x_t exp(-i 2 pi j t / T)`.
pub fn forward_dft(ts: &TimeSeries) -> Spectrum {
    let len = ts.len();
    let bins = bin_count(len);
    let fft = fft_plan(len, false);
    let mut coeffs = Vec::with_capacity(bins * ts.channels());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for v in 0..ts.channels() {
        for (b, &x) in buf.iter_mut().zip(ts.channel(v)) {
            *b = Complex64::new(x, 0.0);
        }
        fft.process(&mut buf);
        coeffs.extend_from_slice(&buf[..bins]);
    }
    Spectrum {
        coeffs,
        bins,
        channels: ts.channels(),
        origin_length: len,
        sample_rate: ts.sample_rate(),
    }
}

/// Real-valued forward DFT of one channel.
pub(crate) fn rdft(x: &[f64]) -> Vec<Complex64> {
    let fft = fft_plan(x.len(), false);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.truncate(bin_count(x.len()));
    buf
}

/// Inverse of [`rdft`] for one channel. Imaginary parts of the DC and
/// (even-length) Nyquist bins are ignored.
pub(crate) fn irdft(coeffs: &[Complex64], len: usize) -> Vec<f64> {
    let bins = bin_count(len);
    debug_assert_eq!(coeffs.len(), bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..bins].copy_from_slice(coeffs);
    buf[0].im = 0.0;
    if len % 2 == 0 {
        buf[len / 2].im = 0.0;
    }
    for j in 1..len - bins + 1 {
        buf[len - j] = coeffs[j].conj();
    }
    fft_plan(len, true).process(&mut buf);
    let scale = 1.0 / len as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Inverse one-sided DFT, `x_t = (1/T) sum_j w_j Re(c_j exp(i 2 pi j t / T))`.
pub fn inverse_dft(spec: &Spectrum) -> Result<TimeSeries> {
    if spec.bins != bin_count(spec.origin_length) {
        return Err(Error::shape(bin_count(spec.origin_length), spec.bins));
    }
    let len = spec.origin_length;
    let mut data = Vec::with_capacity(len * spec.channels);
    for v in 0..spec.channels {
        data.extend(irdft(spec.channel(v), len));
    }
    TimeSeries::new(data, spec.channels, spec.sample_rate)
}

/// Masks spectrum bins, blending each with the perturbation:
/// `m_j c_j + (1 - m_j) p_j`, then returns to the time domain.
pub fn dft_mask_apply(
    spec: &Spectrum,
    mask: &FrequencyMask,
    p: &PerturbationSpectrum,
) -> Result<TimeSeries> {
    if mask.len() != spec.bins {
        return Err(Error::shape(format!("mask of {} bins", spec.bins), mask.len()));
    }
    if p.bins != spec.bins || p.channels != spec.channels {
        return Err(Error::shape(
            format!("perturbation {}x{}", spec.channels, spec.bins),
            format!("{}x{}", p.channels, p.bins),
        ));
    }
    let mut coeffs = spec.coeffs.clone();
    for v in 0..spec.channels {
        let base = v * spec.bins;
        for (j, &m) in mask.values().iter().enumerate() {
            let c = &mut coeffs[base + j];
            *c = *c * m + p.values[base + j] * (1.0 - m);
        }
    }
    let masked = Spectrum { coeffs, ..spec.clone() };
    inverse_dft(&masked)
}

/// Moving-average magnitude perturbation with half-width `window_half_width`.
///
/// Each bin's magnitude becomes the mean magnitude over `[j - W, j + W]`
/// (truncated at the edges, averaged over the bins actually present); its
/// phase is kept.
pub fn moving_average_perturbation(spec: &Spectrum, window_half_width: usize) -> PerturbationSpectrum {
    let bins = spec.bins;
    let mut values = Vec::with_capacity(spec.coeffs.len());
    for v in 0..spec.channels {
        let ch = spec.channel(v);
        let mut prefix = vec![0.0; bins + 1];
        for (j, c) in ch.iter().enumerate() {
            prefix[j + 1] = prefix[j] + c.norm();
        }
        for (j, c) in ch.iter().enumerate() {
            let lo = j.saturating_sub(window_half_width);
            let hi = (j + window_half_width).min(bins - 1);
            let mean = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64;
            values.push(Complex64::from_polar(mean, c.arg()));
        }
    }
    PerturbationSpectrum {
        values,
        bins,
        channels: spec.channels,
    }
}

/// Gradient of a scalar with respect to the one-sided coefficients, given its
/// gradient `grad` with respect to the time samples of the inverse transform.
///
/// Returned as `dRe + i dIm` per bin: `(w_j / T) * DFT(grad)_j`.
pub fn spectral_gradient(grad: &[f64]) -> Vec<Complex64> {
    let len = grad.len();
    let mut g = rdft(grad);
    for (j, c) in g.iter_mut().enumerate() {
        *c *= bin_multiplicity(j, len) / len as f64;
    }
    g
}
