//! Gradient attributions carried into the frequency domain through the
//! inverse DFT, treated as the model's first layer.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_input, resolve_target, Explanation, Method};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::signal::{forward_dft, spectral_gradient, TimeSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    Saliency,
    Gxi,
    Ig,
}

impl GradientMethod {
    pub fn method(self) -> Method {
        match self {
            GradientMethod::Saliency => Method::Saliency,
            GradientMethod::Gxi => Method::Gxi,
            GradientMethod::Ig => Method::Ig,
        }
    }
}

/// Relative completeness error at which integrated gradients stop refining.
const IG_TOLERANCE: f64 = 0.02;
const IG_MAX_REFINEMENTS: usize = 4;

/// Target probability and its gradient with respect to the DFT coefficients
/// of every channel (`[V x K]`).
fn coefficient_gradient(model: &dyn Classifier, x: &[f64], len: usize, class: usize) -> Result<(f64, Vec<Complex64>)> {
    let mut onehot = vec![0.0; model.classes()];
    onehot[class] = 1.0;
    let (p, g) = model.backward_input(x, &onehot)?;
    let prob = p.prob(class);
    // backward gives d(-ln p)/dx; dp/dx = -p * that
    let mut out = Vec::new();
    for ch in g.chunks(len) {
        let scaled: Vec<f64> = ch.iter().map(|v| -prob * v).collect();
        out.extend(spectral_gradient(&scaled));
    }
    Ok((prob, out))
}

/// Saliency (`|grad|`), gradient times input (`|Re(conj(grad) c)|`) or
/// integrated gradients from the zero spectrum with `ig_steps` midpoint steps
/// (doubled until the attributions sum to within 2% of `y(x) - y(0)`, at most
/// four times).
pub fn gradient_explain(
    method: GradientMethod,
    model: &dyn Classifier,
    ts: &TimeSeries,
    target: Option<usize>,
    ig_steps: usize,
) -> Result<Explanation> {
    check_input(model, ts)?;
    if !model.has_gradient() {
        return Err(Error::Unsupported(format!("{} needs model input gradients", method.method())));
    }
    if method == GradientMethod::Ig && ig_steps == 0 {
        return Err(Error::validation("ig_steps must be positive"));
    }
    let (class, _) = resolve_target(model, ts.as_slice(), target)?;
    let len = ts.len();
    let spec = forward_dft(ts);
    let coeffs = spec.as_slice();
    let x = ts.as_slice();

    let mut config = serde_json::json!({ "method": method });
    let (signed, magnitudes): (Option<Vec<f64>>, Vec<f64>) = match method {
        GradientMethod::Saliency => {
            let (_, g) = coefficient_gradient(model, x, len, class)?;
            (None, g.iter().map(|v| v.norm()).collect())
        }
        GradientMethod::Gxi => {
            let (_, g) = coefficient_gradient(model, x, len, class)?;
            let a: Vec<f64> = g.iter().zip(coeffs).map(|(gj, c)| (gj.conj() * c).re).collect();
            let m = a.iter().map(|v| v.abs()).collect();
            (Some(a), m)
        }
        GradientMethod::Ig => {
            let y_x = model.predict(x)?.prob(class);
            let y_0 = model.predict(&vec![0.0; x.len()])?.prob(class);
            let gap = y_x - y_0;
            let mut steps = ig_steps;
            let mut attributions;
            let mut refinements = 0;
            loop {
                let mut avg = vec![Complex64::new(0.0, 0.0); coeffs.len()];
                let mut scaled = vec![0.0; x.len()];
                for k in 0..steps {
                    let alpha = (k as f64 + 0.5) / steps as f64;
                    scaled.iter_mut().zip(x).for_each(|(s, v)| *s = alpha * v);
                    let (_, g) = coefficient_gradient(model, &scaled, len, class)?;
                    avg.iter_mut().zip(&g).for_each(|(a, gj)| *a += gj);
                }
                attributions = avg
                    .iter()
                    .zip(coeffs)
                    .map(|(a, c)| (a.conj() * c).re / steps as f64)
                    .collect::<Vec<f64>>();
                let total: f64 = attributions.iter().sum();
                let rel = (total - gap).abs() / gap.abs().max(1e-12);
                if rel <= IG_TOLERANCE || gap.abs() < 1e-9 || refinements == IG_MAX_REFINEMENTS {
                    config["completeness_error"] = serde_json::json!(rel);
                    break;
                }
                steps *= 2;
                refinements += 1;
            }
            config["steps"] = serde_json::json!(steps);
            let m = attributions.iter().map(|v| v.abs()).collect();
            (Some(attributions), m)
        }
    };

    let bins = spec.bins();
    let mut saliency = vec![0.0; bins];
    for ch in magnitudes.chunks(bins) {
        saliency.iter_mut().zip(ch).for_each(|(s, m)| *s += m);
    }
    let mut expl = Explanation::new(method.method(), class, saliency);
    if ts.channels() > 1 {
        expl.channel_saliency = Some(magnitudes);
    }
    expl.signed = signed;
    expl.config = config;
    expl.validate()?;
    Ok(expl)
}
