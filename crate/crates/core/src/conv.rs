//! Centered ("same"-length) FIR convolution.
//!
//! `y[t] = sum_k h[k] x[t + c - k]` with `c = (N - 1) / 2` and `x` zero outside
//! `[0, T)`. For odd symmetric filters this is the linear-phase output with
//! its group delay removed.

use num_complex::Complex64;

use crate::signal::fft_plan;

/// Work (`T * N` multiply-adds) above which the FFT path is used.
pub const FFT_THRESHOLD: usize = 1 << 18;

pub fn convolve_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    if x.len().saturating_mul(taps.len()) > FFT_THRESHOLD {
        convolve_same_fft(x, taps)
    } else {
        convolve_same_direct(x, taps)
    }
}

pub fn convolve_same_direct(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let len = x.len() as isize;
    let n = taps.len() as isize;
    let c = (n - 1) / 2;
    (0..len)
        .map(|t| {
            // x index i = t + c - k must lie in [0, len)
            let k_lo = (t + c - len + 1).max(0);
            let k_hi = (t + c).min(n - 1);
            let mut acc = 0.0;
            for k in k_lo..=k_hi {
                acc += taps[k as usize] * x[(t + c - k) as usize];
            }
            acc
        })
        .collect()
}

pub fn convolve_same_fft(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let full = x.len() + taps.len() - 1;
    let size = full.next_power_of_two();
    let fwd = fft_plan(size, false);
    let inv = fft_plan(size, true);

    let mut a = vec![Complex64::new(0.0, 0.0); size];
    let mut b = vec![Complex64::new(0.0, 0.0); size];
    for (dst, &v) in a.iter_mut().zip(x) {
        dst.re = v;
    }
    for (dst, &v) in b.iter_mut().zip(taps) {
        dst.re = v;
    }
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    let c = (taps.len() - 1) / 2;
    a[c..c + x.len()].iter().map(|v| v.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_filter_passes_through() {
        let x = [1.0, -2.0, 3.0, 0.5];
        let y = convolve_same_direct(&x, &[0.0, 1.0, 0.0]);
        assert_eq!(y, x.to_vec());
    }

    #[test]
    fn boundary_uses_zero_padding() {
        let y = convolve_same_direct(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]);
        assert_eq!(y, vec![2.0, 3.0, 2.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fft_path_matches_direct(
            x in prop::collection::vec(-1.0f64..1.0, 2..600),
            half in 0usize..40,
            seed in 0u64..1000,
        ) {
            let n = 2 * half + 1;
            let taps: Vec<f64> = (0..n).map(|i| (((i as u64 * 2654435761 + seed) % 1000) as f64) / 500.0 - 1.0).collect();
            let d = convolve_same_direct(&x, &taps);
            let f = convolve_same_fft(&x, &taps);
            for (a, b) in d.iter().zip(&f) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fft_matches_direct_on_long_input() {
        let x: Vec<f64> = (0..4096).map(|i| ((i * 7919) % 1013) as f64 / 506.0 - 1.0).collect();
        let taps: Vec<f64> = (0..201).map(|i| ((i as f64) * 0.37).sin() / 10.0).collect();
        let d = convolve_same_direct(&x, &taps);
        let f = convolve_same_fft(&x, &taps);
        let worst = d.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}
