//! Windowed-sinc FIR design and equal-width filterbanks.
//!
//! Band `l` of an `L`-band bank is the difference of two Hamming-windowed sinc
//! lowpasses with cutoffs at its edges. The lowest band is a plain lowpass and
//! the highest is a delayed unit impulse minus a lowpass, so the taps of all
//! bands sum to the delayed impulse.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conv::convolve_same;
use crate::error::{Error, Result};
use crate::signal::{fft_plan, TimeSeries};

/// Linear-phase FIR filter with an odd number of taps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    /// Nominal `(low_hz, high_hz)` passband.
    pub nominal_band: (f64, f64),
}

impl FirFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Group delay in samples.
    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Zero-phase amplitude response at `freq_hz`.
    pub fn amplitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        amplitude_response(&self.taps, freq_hz / sample_rate)
    }
}

/// Zero-phase amplitude of symmetric odd-length taps at normalized frequency
/// `f` (cycles per sample).
pub fn amplitude_response(taps: &[f64], f: f64) -> f64 {
    let c = (taps.len() - 1) / 2;
    let mut acc = taps[c];
    for k in 1..=c {
        acc += (taps[c + k] + taps[c - k]) * (2.0 * PI * f * k as f64).cos();
    }
    acc
}

fn hamming(offset: f64, n: usize) -> f64 {
    if n == 1 {
        return 1.0;
    }
    0.54 + 0.46 * (2.0 * PI * offset / (n - 1) as f64).cos()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Returns `n` if odd, otherwise `n + 1` with a warning.
pub fn odd_taps(n: usize) -> usize {
    if n % 2 == 0 {
        log::warn!("filter length {n} is even; using {}", n + 1);
        n + 1
    } else {
        n
    }
}

fn check_taps(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::validation(format!("filter length must be odd, got {n}")));
    }
    Ok(())
}

fn unit_impulse(n: usize) -> Vec<f64> {
    let mut taps = vec![0.0; n];
    taps[(n - 1) / 2] = 1.0;
    taps
}

fn lowpass_taps(cutoff_norm: f64, n: usize, window: impl Fn(f64, usize) -> f64) -> Vec<f64> {
    if cutoff_norm >= 0.5 {
        return unit_impulse(n);
    }
    let c = ((n - 1) / 2) as f64;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let off = (i as f64 - c).abs();
            2.0 * cutoff_norm * sinc(2.0 * cutoff_norm * off) * window(off, n)
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Hamming-windowed sinc lowpass with unit DC gain.
pub fn design_lowpass(cutoff_hz: f64, n: usize, sample_rate: f64) -> Result<FirFilter> {
    check_taps(n)?;
    let nyquist = sample_rate / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz <= nyquist) {
        return Err(Error::validation(format!(
            "cutoff {cutoff_hz} Hz outside (0, {nyquist}]"
        )));
    }
    Ok(FirFilter {
        taps: lowpass_taps(cutoff_hz / sample_rate, n, hamming),
        nominal_band: (0.0, cutoff_hz),
    })
}

/// `L` contiguous equal-width FIR bands covering `[0, Nyquist]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filterbank {
    filters: Vec<FirFilter>,
    band_edges: Vec<f64>,
    sample_rate: f64,
}

/// Designs an `bands`-band equal-width filterbank with `taps`-long filters.
///
/// Requires `bands >= 2`, odd `taps`, and `taps >= 2 * bands + 1` (below that
/// the window mainlobe spans more than two bands).
pub fn design_filterbank(bands: usize, taps: usize, sample_rate: f64) -> Result<Filterbank> {
    if bands < 2 {
        return Err(Error::validation(format!("need at least 2 bands, got {bands}")));
    }
    check_taps(taps)?;
    if taps < 2 * bands + 1 {
        return Err(Error::validation(format!(
            "filter length {taps} too short for {bands} bands (minimum {})",
            2 * bands + 1
        )));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::validation(format!("invalid sample rate {sample_rate}")));
    }
    let nyquist = sample_rate / 2.0;
    let band_edges: Vec<f64> = (0..=bands)
        .map(|l| l as f64 * nyquist / bands as f64)
        .collect();
    // lowpasses at the interior edges; the outer ones are zero and identity
    let lows: Vec<Vec<f64>> = (0..=bands)
        .map(|l| match l {
            0 => vec![0.0; taps],
            l if l == bands => unit_impulse(taps),
            l => lowpass_taps(band_edges[l] / sample_rate, taps, hamming),
        })
        .collect();
    let filters = (0..bands)
        .map(|l| FirFilter {
            taps: lows[l + 1].iter().zip(&lows[l]).map(|(a, b)| a - b).collect(),
            nominal_band: (band_edges[l], band_edges[l + 1]),
        })
        .collect();
    Ok(Filterbank {
        filters,
        band_edges,
        sample_rate,
    })
}

impl Filterbank {
    /// Rebuilds a bank from stored parts, checking the invariants.
    pub fn from_parts(filters: Vec<FirFilter>, band_edges: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if filters.len() < 2 || band_edges.len() != filters.len() + 1 {
            return Err(Error::validation("filterbank needs L >= 2 filters and L + 1 edges"));
        }
        let n = filters[0].len();
        check_taps(n)?;
        if filters.iter().any(|f| f.len() != n || f.taps.iter().any(|t| !t.is_finite())) {
            return Err(Error::validation("filters must share a length and be finite"));
        }
        if band_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("band edges must ascend"));
        }
        Ok(Filterbank {
            filters,
            band_edges,
            sample_rate,
        })
    }

    pub fn bands(&self) -> usize {
        self.filters.len()
    }

    pub fn taps_len(&self) -> usize {
        self.filters[0].len()
    }

    pub fn filters(&self) -> &[FirFilter] {
        &self.filters
    }

    pub fn band_edges(&self) -> &[f64] {
        &self.band_edges
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Index of the band whose nominal range contains `freq_hz`.
    pub fn band_of(&self, freq_hz: f64) -> Option<usize> {
        self.band_edges
            .windows(2)
            .position(|w| freq_hz >= w[0] && freq_hz < w[1])
            .or_else(|| (freq_hz == *self.band_edges.last()?).then(|| self.bands() - 1))
    }

    /// Amplitude responses of every band on `grid_size` points over `[0, Nyquist]`.
    pub fn band_responses(&self, grid_size: usize) -> Result<BandResponses> {
        if grid_size < 2 {
            return Err(Error::validation("response grid needs at least 2 points"));
        }
        let rows = self
            .filters
            .iter()
            .map(|f| {
                (0..grid_size)
                    .map(|i| amplitude_response(&f.taps, 0.5 * i as f64 / (grid_size - 1) as f64))
                    .collect()
            })
            .collect();
        Ok(BandResponses { rows, grid_size })
    }
}

/// Band mask with one weight in `[0, 1]` per filterbank band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandMask(Vec<f64>);

impl BandMask {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("band mask value {v} outside [0, 1]")));
        }
        Ok(BandMask(values))
    }

    pub fn ones(bands: usize) -> Self {
        BandMask(vec![1.0; bands])
    }

    pub fn zeros(bands: usize) -> Self {
        BandMask(vec![0.0; bands])
    }

    pub fn one_hot(bands: usize, l: usize) -> Self {
        let mut v = vec![0.0; bands];
        v[l] = 1.0;
        BandMask(v)
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

/// Per-band responses sampled on a fixed frequency grid.
#[derive(Clone, Debug)]
pub struct BandResponses {
    rows: Vec<Vec<f64>>,
    grid_size: usize,
}

impl BandResponses {
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Magnitude of the mask-weighted sum of band responses.
    pub fn collect(&self, mask: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid_size];
        for (row, &m) in self.rows.iter().zip(mask) {
            if m == 0.0 {
                continue;
            }
            for (a, r) in acc.iter_mut().zip(row) {
                *a += m * r;
            }
        }
        acc.iter_mut().for_each(|a| *a = a.abs());
        acc
    }
}

/// Magnitude response of the masked filterbank, `|sum_l m_l H_l(f)|`, on
/// `grid_size` points spanning `[0, Nyquist]`.
pub fn collected_response(fb: &Filterbank, mask: &BandMask, grid_size: usize) -> Result<Vec<f64>> {
    if mask.len() != fb.bands() {
        return Err(Error::shape(format!("mask of {} bands", fb.bands()), mask.len()));
    }
    Ok(fb.band_responses(grid_size)?.collect(mask.values()))
}

/// Signal split into filterbank bands, delay-compensated.
#[derive(Clone, Debug)]
pub struct BandDecomposition {
    /// `[L x V x T]`.
    bands: Vec<f64>,
    band_count: usize,
    template: TimeSeries,
    group_delay: usize,
}

impl BandDecomposition {
    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn group_delay(&self) -> usize {
        self.group_delay
    }

    /// Samples of band `l`, channel-major.
    pub fn band(&self, l: usize) -> &[f64] {
        let n = self.template.as_slice().len();
        &self.bands[l * n..(l + 1) * n]
    }

    pub fn band_series(&self, l: usize) -> TimeSeries {
        self.template
            .with_data(self.band(l).to_vec())
            .expect("band shape matches source")
    }

    /// Length of each band (`T * V`).
    pub fn band_len(&self) -> usize {
        self.template.as_slice().len()
    }

    pub fn template(&self) -> &TimeSeries {
        &self.template
    }
}

/// Filters every channel through every band, compensating the linear-phase
/// delay so that the bands sum back to (approximately) the input.
pub fn decompose(ts: &TimeSeries, fb: &Filterbank) -> BandDecomposition {
    if ts.len() <= fb.taps_len() {
        log::warn!(
            "series of {} steps is not longer than the {}-tap filters; edges dominate",
            ts.len(),
            fb.taps_len()
        );
    }
    let mut bands = Vec::with_capacity(fb.bands() * ts.as_slice().len());
    for f in fb.filters() {
        for v in 0..ts.channels() {
            bands.extend(convolve_same(ts.channel(v), &f.taps));
        }
    }
    BandDecomposition {
        bands,
        band_count: fb.bands(),
        template: ts.clone(),
        group_delay: fb.taps_len() / 2,
    }
}

/// `X^M = sum_l (m_l band_l + (1 - m_l) p_l)`. `perturbation`, if given, is
/// `[L x V x T]`; otherwise `p_l = 0`.
pub fn masked_reconstruct(
    dec: &BandDecomposition,
    mask: &BandMask,
    perturbation: Option<&[f64]>,
) -> Result<TimeSeries> {
    if mask.len() != dec.band_count {
        return Err(Error::shape(format!("mask of {} bands", dec.band_count), mask.len()));
    }
    if let Some(p) = perturbation {
        if p.len() != dec.bands.len() {
            return Err(Error::shape(dec.bands.len(), p.len()));
        }
    }
    let out = reconstruct_raw(dec, mask.values(), perturbation);
    dec.template.with_data(out)
}

pub(crate) fn reconstruct_raw(dec: &BandDecomposition, mask: &[f64], perturbation: Option<&[f64]>) -> Vec<f64> {
    let n = dec.band_len();
    let mut out = vec![0.0; n];
    for (l, &m) in mask.iter().enumerate() {
        let band = dec.band(l);
        match perturbation {
            None => {
                for (o, b) in out.iter_mut().zip(band) {
                    *o += m * b;
                }
            }
            Some(p) => {
                let p = &p[l * n..(l + 1) * n];
                for ((o, b), q) in out.iter_mut().zip(band).zip(p) {
                    *o += m * b + (1.0 - m) * q;
                }
            }
        }
    }
    out
}

/// Worst-case stopband leakage of two equal-length bandpass designs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopbandComparison {
    /// Hamming-windowed FIR bandpass.
    pub fir_attenuation_db: f64,
    /// Brick-wall response sampled on an `N`-point DFT grid (zeroed bins).
    pub dft_zeroing_attenuation_db: f64,
    /// Region excluded on each side of the band, `2 fs / N`.
    pub transition_half_width_hz: f64,
}

/// Hamming FIR bandpass for `band`: difference of two windowed-sinc lowpasses.
pub fn fir_bandpass(n: usize, band: (f64, f64), sample_rate: f64) -> Result<FirFilter> {
    let hi = design_lowpass(band.1, n, sample_rate)?;
    let taps = if band.0 > 0.0 {
        let lo = design_lowpass(band.0, n, sample_rate)?;
        hi.taps.iter().zip(&lo.taps).map(|(a, b)| a - b).collect()
    } else {
        hi.taps
    };
    Ok(FirFilter {
        taps,
        nominal_band: band,
    })
}

/// Impulse response of the filter realized by keeping only the bins of an
/// `n`-point DFT whose frequency lies in `band` (centered, symmetric).
pub fn dft_zeroing_bandpass(n: usize, band: (f64, f64), sample_rate: f64) -> Result<FirFilter> {
    check_taps(n)?;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    let mut kept = 0;
    for (k, hk) in h.iter_mut().enumerate() {
        let kk = if k <= n / 2 { k } else { n - k };
        let f = kk as f64 * sample_rate / n as f64;
        if f >= band.0 && f <= band.1 {
            hk.re = 1.0;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::validation(format!(
            "band {band:?} contains no bin of a {n}-point DFT"
        )));
    }
    fft_plan(n, true).process(&mut h);
    let c = (n - 1) / 2;
    let taps = (0..n)
        .map(|i| h[(i + n - c) % n].re / n as f64)
        .collect();
    Ok(FirFilter {
        taps,
        nominal_band: band,
    })
}

/// Magnitude response on `points` uniformly spaced frequencies over
/// `[0, Nyquist]`, via a zero-padded FFT.
pub fn dense_magnitude_response(taps: &[f64], points: usize) -> Vec<f64> {
    let size = (2 * (points - 1)).max(taps.len()).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (b, &t) in buf.iter_mut().zip(taps) {
        b.re = t;
    }
    fft_plan(size, false).process(&mut buf);
    let step = size as f64 / (2.0 * (points - 1) as f64);
    (0..points)
        .map(|i| {
            // linear interpolation of the padded grid onto the requested grid
            let pos = i as f64 * step;
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let a = buf[k.min(size / 2)].norm();
            let b = buf[(k + 1).min(size / 2)].norm();
            a + (b - a) * frac
        })
        .collect()
}

fn worst_stopband_db(taps: &[f64], band: (f64, f64), guard: f64, sample_rate: f64) -> f64 {
    let size = (16 * taps.len()).max(1 << 16).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (b, &t) in buf.iter_mut().zip(taps) {
        b.re = t;
    }
    fft_plan(size, false).process(&mut buf);
    let worst = (0..=size / 2)
        .filter(|&k| {
            let f = k as f64 * sample_rate / size as f64;
            f < band.0 - guard || f > band.1 + guard
        })
        .map(|k| buf[k].norm())
        .fold(0.0, f64::max);
    -20.0 * worst.max(1e-300).log10()
}

/// Compares stopband leakage of the Hamming FIR bandpass against the
/// equal-length DFT-zeroing filter for the same band.
pub fn stopband_comparison(n: usize, band: (f64, f64), sample_rate: f64) -> Result<StopbandComparison> {
    check_taps(n)?;
    let nyquist = sample_rate / 2.0;
    if !(band.0 > 0.0 && band.0 < band.1 && band.1 < nyquist) {
        return Err(Error::validation(format!(
            "band {band:?} must lie strictly inside (0, {nyquist})"
        )));
    }
    let guard = 2.0 * sample_rate / n as f64;
    let fir = fir_bandpass(n, band, sample_rate)?;
    let dft = dft_zeroing_bandpass(n, band, sample_rate)?;
    Ok(StopbandComparison {
        fir_attenuation_db: worst_stopband_db(&fir.taps, band, guard, sample_rate),
        dft_zeroing_attenuation_db: worst_stopband_db(&dft.taps, band, guard, sample_rate),
        transition_half_width_hz: guard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.abs().log10()
    }

    #[test]
    fn lowpass_dc_gain_and_symmetry() {
        for (fc, n) in [(0.1, 11), (0.25, 101), (0.33, 513), (0.5, 31)] {
            let f = design_lowpass(fc, n, 1.0).unwrap();
            let s: f64 = f.taps.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            for i in 0..n {
                assert!((f.taps[i] - f.taps[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lowpass_rejects_bad_parameters() {
        assert!(design_lowpass(0.1, 10, 1.0).is_err());
        assert!(design_lowpass(0.0, 11, 1.0).is_err());
        assert!(design_lowpass(0.6, 11, 1.0).is_err());
    }

    #[test]
    fn quarter_band_lowpass_response() {
        let n = 101;
        let f = design_lowpass(0.25, n, 1.0).unwrap();
        let at_cut = db(amplitude_response(&f.taps, 0.25));
        assert!((at_cut + 6.02).abs() < 0.5, "{at_cut}");
        let edge = 0.25 + 2.0 / n as f64;
        let worst = (0..4000)
            .map(|i| edge + (0.5 - edge) * i as f64 / 3999.0)
            .map(|fr| amplitude_response(&f.taps, fr).abs())
            .fold(0.0, f64::max);
        assert!(-db(worst) >= 50.0, "stopband {}", -db(worst));
    }

    #[test]
    fn nyquist_lowpass_is_identity() {
        let f = design_lowpass(0.5, 21, 1.0).unwrap();
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 211) as f64 / 105.0 - 1.0).collect();
        let y = convolve_same(&x, &f.taps);
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let sig: f64 = x.iter().map(|a| a * a).sum();
        assert!(10.0 * (err / sig).max(1e-300).log10() <= -40.0);
    }

    #[test]
    fn filterbank_taps_telescope_to_impulse() {
        for (l, n) in [(2, 5), (16, 129), (32, 75), (7, 41)] {
            let fb = design_filterbank(l, n, 1.0).unwrap();
            let imp = unit_impulse(n);
            for i in 0..n {
                let s: f64 = fb.filters().iter().map(|f| f.taps[i]).sum();
                assert!((s - imp[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn band_peaks_stay_inside_nominal_edges() {
        let fb = design_filterbank(16, 257, 2.0).unwrap();
        for (l, f) in fb.filters().iter().enumerate() {
            let grid = 4000;
            let peak = (0..=grid)
                .map(|i| i as f64 / grid as f64)
                .max_by(|a, b| {
                    f.amplitude(*a, 2.0).abs().partial_cmp(&f.amplitude(*b, 2.0).abs()).unwrap()
                })
                .unwrap();
            let (lo, hi) = f.nominal_band;
            assert!(peak >= lo && peak <= hi, "band {l}: peak {peak} not in [{lo}, {hi}]");
        }
    }

    #[test]
    fn filterbank_validation() {
        assert!(design_filterbank(1, 11, 1.0).is_err());
        assert!(design_filterbank(4, 10, 1.0).is_err());
        assert!(design_filterbank(32, 63, 1.0).is_err());
        assert!(design_filterbank(32, 75, 1.0).is_ok());
    }

    #[test]
    fn zero_signal_gives_zero_bands() {
        let fb = design_filterbank(4, 21, 1.0).unwrap();
        let ts = TimeSeries::zeros(64, 2, 1.0).unwrap();
        let dec = decompose(&ts, &fb);
        assert!((0..4).all(|l| dec.band(l).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn one_hot_mask_selects_band() {
        let fb = design_filterbank(4, 21, 1.0).unwrap();
        let x: Vec<f64> = (0..80).map(|i| (i as f64 * 0.3).sin() + (i as f64 * 1.9).cos()).collect();
        let ts = TimeSeries::univariate(x, 1.0).unwrap();
        let dec = decompose(&ts, &fb);
        let out = masked_reconstruct(&dec, &BandMask::one_hot(4, 2), None).unwrap();
        assert_eq!(out.as_slice(), dec.band(2));
        let zero = masked_reconstruct(&dec, &BandMask::zeros(4), None).unwrap();
        assert!(zero.as_slice().iter().all(|&x| x == 0.0));
        assert!(masked_reconstruct(&dec, &BandMask::ones(3), None).is_err());
    }

    #[test]
    fn perturbation_fills_masked_bands() {
        let fb = design_filterbank(2, 9, 1.0).unwrap();
        let ts = TimeSeries::univariate(vec![1.0; 16], 1.0).unwrap();
        let dec = decompose(&ts, &fb);
        let p = vec![0.5; 2 * 16];
        let out = masked_reconstruct(&dec, &BandMask::zeros(2), Some(&p)).unwrap();
        assert!(out.as_slice().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn collected_response_basics() {
        let fb = design_filterbank(8, 129, 1.0).unwrap();
        let zero = collected_response(&fb, &BandMask::zeros(8), 65).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let one_hot = collected_response(&fb, &BandMask::one_hot(8, 3), 65).unwrap();
        for (i, r) in one_hot.iter().enumerate() {
            let f = 0.5 * i as f64 / 64.0;
            assert_eq!(*r, amplitude_response(&fb.filters()[3].taps, f).abs());
        }
        let all = collected_response(&fb, &BandMask::ones(8), 257).unwrap();
        assert!(all.iter().all(|&r| (r - 1.0).abs() <= 0.05));
    }

    #[test]
    fn stopband_ordering() {
        let cmp = stopband_comparison(513, (0.1, 0.15), 1.0).unwrap();
        assert!(cmp.fir_attenuation_db >= 50.0, "{cmp:?}");
        assert!(cmp.dft_zeroing_attenuation_db <= 25.0, "{cmp:?}");
        assert!(cmp.fir_attenuation_db > cmp.dft_zeroing_attenuation_db);
        assert!(stopband_comparison(513, (0.0, 0.1), 1.0).is_err());
    }

    #[test]
    fn dft_zeroing_filter_is_symmetric() {
        let f = dft_zeroing_bandpass(101, (0.1, 0.2), 1.0).unwrap();
        for i in 0..101 {
            assert!((f.taps[i] - f.taps[100 - i]).abs() < 1e-12);
        }
    }
}
