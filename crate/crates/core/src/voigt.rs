//! Voigt line profile via the Faddeeva function.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

// Weideman's rational expansion; 40 terms give ~1e-14 relative accuracy in
// the closed upper half plane.
const TERMS: usize = 40;

fn coefficients() -> &'static (f64, Vec<f64>) {
    static COEFFS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let m = 2 * TERMS;
        let m2 = 2 * m;
        let l = (TERMS as f64 / 2f64.sqrt()).sqrt();
        // samples f(t_k), k = -M+1..M-1, arranged in FFT order with a zero at k = -M
        let sample = |k: i64| -> f64 {
            let theta = k as f64 * PI / m as f64;
            let t = l * (theta / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let u: Vec<f64> = (0..m2)
            .map(|i| {
                let k = if i < m { i as i64 } else { i as i64 - m2 as i64 };
                if k == -(m as i64) {
                    0.0
                } else {
                    sample(k)
                }
            })
            .collect();
        let a = (1..=TERMS)
            .map(|n| {
                u.iter()
                    .enumerate()
                    .map(|(i, &v)| v * (2.0 * PI * (n * i) as f64 / m2 as f64).cos())
                    .sum::<f64>()
                    / m2 as f64
            })
            .collect();
        (l, a)
    })
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` for `Im z >= 0`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    let (l, a) = coefficients();
    let i = Complex64::new(0.0, 1.0);
    let denom = Complex64::new(*l, 0.0) - i * z;
    let big_z = (Complex64::new(*l, 0.0) + i * z) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for &c in a.iter().rev() {
        p = p * big_z + c;
    }
    2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom
}

/// Voigt profile (Gaussian of std `sigma` convolved with a Lorentzian of
/// half-width `gamma`) evaluated at `freq - peak`.
pub fn voigt_amplitude(freq: f64, peak: f64, sigma: f64, gamma: f64) -> Result<f64> {
    if !(sigma >= 0.0 && gamma >= 0.0) || (sigma == 0.0 && gamma == 0.0) {
        return Err(Error::validation(format!(
            "voigt widths must be non-negative and not both zero (sigma={sigma}, gamma={gamma})"
        )));
    }
    let x = freq - peak;
    if sigma == 0.0 {
        return Ok(gamma / (PI * (x * x + gamma * gamma)));
    }
    let scale = sigma * 2f64.sqrt();
    let w = faddeeva(Complex64::new(x / scale, gamma / scale));
    Ok(w.re / (sigma * (2.0 * PI).sqrt()))
}
