//! Browser bindings: filterbank responses for a user-set mask, the FIR versus
//! DFT-zeroing comparison, and a toy band-mask explanation of a model whose
//! decision depends on a single band.

use flextime::explain::{flextime_explain, FlexConfig};
use flextime::filterbank::{
    collected_response, dense_magnitude_response, design_filterbank, dft_zeroing_bandpass, fir_bandpass,
    stopband_comparison, BandMask,
};
use flextime::model::{BandEnergyModel, Classifier};
use flextime::signal::{forward_dft, TimeSeries};
use serde_json::json;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Magnitude of the mask-weighted filterbank on `grid` points over `[0, fs/2]`.
pub fn band_response(bands: usize, taps: usize, sample_rate: f64, mask: &[f64], grid: usize) -> Result<Vec<f64>> {
    let fb = design_filterbank(bands, taps, sample_rate).map_err(err)?;
    let mask = BandMask::new(mask.to_vec()).map_err(err)?;
    collected_response(&fb, &mask, grid).map_err(err)
}

/// Attenuations and dB responses of both equal-length bandpass designs, as JSON.
pub fn gibbs_json(taps: usize, low: f64, high: f64, sample_rate: f64) -> Result<String> {
    let cmp = stopband_comparison(taps, (low, high), sample_rate).map_err(err)?;
    let fir = fir_bandpass(taps, (low, high), sample_rate).map_err(err)?;
    let dft = dft_zeroing_bandpass(taps, (low, high), sample_rate).map_err(err)?;
    let points = 1025;
    let db = |t: &[f64]| -> Vec<f64> {
        dense_magnitude_response(t, points).iter().map(|m| (20.0 * m.max(1e-12).log10()).max(-140.0)).collect()
    };
    let freqs: Vec<f64> = (0..points).map(|i| i as f64 * sample_rate / 2.0 / (points - 1) as f64).collect();
    Ok(json!({
        "fir_attenuation_db": cmp.fir_attenuation_db,
        "dft_zeroing_attenuation_db": cmp.dft_zeroing_attenuation_db,
        "freqs": freqs,
        "fir_db": db(&fir.taps),
        "dft_db": db(&dft.taps),
        "fir_taps": fir.taps,
        "dft_taps": dft.taps,
    })
    .to_string())
}

const TOY_LEN: usize = 512;
const TOY_BANDS: usize = 16;
const TOY_TAPS: usize = 129;

/// Two tones (one inside `band`, one inside `distractor`) plus a little noise,
/// explained for a model that only looks at `band`. Returns JSON with the
/// learned mask, the saliency, the input spectrum and the objective trace.
pub fn toy_flextime_json(band: usize, distractor: usize, iterations: usize, seed: u32) -> Result<String> {
    if band >= TOY_BANDS || distractor >= TOY_BANDS || band == distractor {
        return Err(format!("bands must be distinct and below {TOY_BANDS}"));
    }
    let fs = TOY_LEN as f64;
    let width = fs / 2.0 / TOY_BANDS as f64;
    let center = |b: usize| (b as f64 + 0.5) * width;
    // xorshift noise keeps the demo free of an RNG dependency
    let mut state = u64::from(seed).wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut noise = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let x: Vec<f64> = (0..TOY_LEN)
        .map(|t| {
            let t = t as f64 / fs;
            (2.0 * std::f64::consts::PI * center(band) * t).sin()
                + (2.0 * std::f64::consts::PI * center(distractor) * t).sin()
                + 0.05 * noise()
        })
        .collect();
    let lo = band as f64 * width;
    let model = BandEnergyModel::new(TOY_LEN, fs, (lo, lo + width), 0.3, 20.0).map_err(err)?;
    let ts = TimeSeries::univariate(x.clone(), fs).map_err(err)?;
    let cfg = FlexConfig {
        bands: TOY_BANDS,
        taps: TOY_TAPS,
        ratio: 1.0 / TOY_BANDS as f64,
        iterations,
        step_size: 1.0,
        target_class: Some(1),
    };
    let fb = cfg.filterbank(fs).map_err(err)?;
    let (mask, expl) = flextime_explain(&model, &ts, &fb, Some(1), &cfg).map_err(err)?;
    let spec = forward_dft(&ts);
    let freqs: Vec<f64> = (0..spec.bins()).map(|j| spec.frequency(j)).collect();
    Ok(json!({
        "band": band,
        "distractor": distractor,
        "probability": model.predict(&x).map_err(err)?.prob(1),
        "mask": mask.values(),
        "saliency": expl.saliency,
        "freqs": freqs,
        "spectrum": spec.magnitudes(),
        "trace": expl.trace,
        "signal": x,
    })
    .to_string())
}

#[wasm_bindgen(js_name = bandResponse)]
pub fn band_response_js(bands: usize, taps: usize, sample_rate: f64, mask: &[f64], grid: usize) -> std::result::Result<Vec<f64>, JsError> {
    band_response(bands, taps, sample_rate, mask, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = gibbsComparison)]
pub fn gibbs_js(taps: usize, low: f64, high: f64, sample_rate: f64) -> std::result::Result<String, JsError> {
    gibbs_json(taps, low, high, sample_rate).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = toyFlextime)]
pub fn toy_flextime_js(band: usize, distractor: usize, iterations: usize, seed: u32) -> std::result::Result<String, JsError> {
    toy_flextime_json(band, distractor, iterations, seed).map_err(|e| JsError::new(&e))
}
