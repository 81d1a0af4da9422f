//! Gradient descent on logistic mask logits with step halving.

use serde::{Deserialize, Serialize};

use super::hinge;
use crate::error::{Error, Result};

/// Halvings tried per iteration before the step is rejected.
pub const MAX_HALVINGS: usize = 5;

// Keeps logistic(theta) strictly inside (0, 1) in f64.
const LOGIT_LIMIT: f64 = 30.0;

/// Unconstrained mask parameters; the mask is `logistic(theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskLogits(pub Vec<f64>);

impl MaskLogits {
    /// All-zero logits, i.e. a mask of 0.5 everywhere.
    pub fn zeros(len: usize) -> Self {
        MaskLogits(vec![0.0; len])
    }

    pub fn mask(&self) -> Vec<f64> {
        self.0.iter().map(|&t| logistic(t)).collect()
    }
}

pub(crate) fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub(crate) struct Outcome {
    pub logits: MaskLogits,
    pub trace: Vec<f64>,
}

/// Minimizes `D(m) + max(mean(m) - ratio, 0)` over `m = logistic(theta)`.
///
/// `eval` returns the distortion at a mask and its gradient with respect to
/// the mask. A step that raises the objective is halved up to
/// [`MAX_HALVINGS`] times and dropped if it still does, so the recorded
/// objective never increases.
pub(crate) fn optimize<F>(len: usize, ratio: f64, iterations: usize, step_size: f64, mut eval: F) -> Result<Outcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut theta = MaskLogits::zeros(len);
    let mut mask = theta.mask();
    let (d, mut grad_m) = eval(&mask)?;
    let mut objective = d + hinge(&mask, ratio);
    if !objective.is_finite() {
        return Err(Error::Numeric(format!("initial objective is {objective}")));
    }
    let mut trace = Vec::with_capacity(iterations + 1);
    trace.push(objective);
    let mut trial = vec![0.0; len];
    for it in 0..iterations {
        let active = mask.iter().sum::<f64>() / len as f64 > ratio;
        let grad: Vec<f64> = grad_m
            .iter()
            .zip(&mask)
            .map(|(g, m)| (g + if active { 1.0 / len as f64 } else { 0.0 }) * m * (1.0 - m))
            .collect();
        let mut eta = step_size;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            for ((x, t), g) in trial.iter_mut().zip(&theta.0).zip(&grad) {
                *x = (t - eta * g).clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
            }
            let trial_mask: Vec<f64> = trial.iter().map(|&t| logistic(t)).collect();
            let (d, g) = eval(&trial_mask)?;
            let value = d + hinge(&trial_mask, ratio);
            if !value.is_finite() {
                return Err(Error::Numeric(format!("objective became {value} at iteration {it}")));
            }
            if value <= objective {
                theta.0.copy_from_slice(&trial);
                mask = trial_mask;
                grad_m = g;
                objective = value;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        trace.push(objective);
        if !accepted {
            // every later iteration would retry the same rejected steps
            break;
        }
    }
    Ok(Outcome { logits: theta, trace })
}

/// Forward-difference gradient of `distortion` with respect to the mask.
pub(crate) fn finite_difference<F>(mask: &[f64], base: f64, mut distortion: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    const H: f64 = 1e-5;
    let mut probe = mask.to_vec();
    let mut grad = Vec::with_capacity(mask.len());
    for i in 0..mask.len() {
        // step away from the nearer bound so the probe stays in [0, 1]
        let h = if mask[i] + H <= 1.0 { H } else { -H };
        probe[i] = mask[i] + h;
        grad.push((distortion(&probe)? - base) / h);
        probe[i] = mask[i];
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_target_is_approached() {
        // D = sum (m - t)^2 with ratio 1 (hinge inactive)
        let target = [0.9, 0.1, 0.6];
        let out = optimize(3, 1.0, 500, 1.0, |m| {
            let d = m.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
            let g = m.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            Ok((d, g))
        })
        .unwrap();
        for (m, t) in out.logits.mask().iter().zip(&target) {
            assert!((m - t).abs() < 1e-3);
        }
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn hinge_pushes_mask_down() {
        let out = optimize(4, 0.0, 200, 1.0, |m| Ok((0.0, vec![0.0; m.len()]))).unwrap();
        assert!(out.logits.mask().iter().all(|&m| m < 0.2));
    }

    #[test]
    fn mask_stays_open_interval() {
        let out = optimize(2, 1.0, 300, 50.0, |m| Ok((-m[0] + m[1], vec![-1.0, 1.0]))).unwrap();
        let m = out.logits.mask();
        assert!(m[0] < 1.0 && m[1] > 0.0);
    }

    #[test]
    fn nan_objective_is_reported() {
        assert!(matches!(optimize(2, 1.0, 3, 1.0, |_| Ok((f64::NAN, vec![0.0; 2]))), Err(Error::Numeric(_))));
    }

    #[test]
    fn finite_difference_of_linear_function() {
        let g = finite_difference(&[0.2, 1.0], 0.0, |m| Ok(3.0 * m[0] - 2.0 * m[1] + 2.0 - 0.6)).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-6 && (g[1] + 2.0).abs() < 1e-6);
    }
}
