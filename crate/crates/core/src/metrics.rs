//! Explanation quality metrics and the hyperparameter tuner.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Explanation, Method};
use crate::model::Classifier;
use crate::signal::{forward_dft, irdft, TimeSeries};

/// Threshold levels of the precision/recall sweep.
pub const SWEEP_LEVELS: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScores {
    pub aup: f64,
    pub aur: f64,
    pub auprc: f64,
}

fn check_saliency(s: &[f64]) -> Result<()> {
    if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::validation("saliency must be finite and non-negative"));
    }
    Ok(())
}

/// Precision and recall of `{i : s_i >= threshold}` against `gt`.
fn precision_recall(s: &[f64], gt: &[bool], threshold: f64, positives: usize) -> (f64, f64) {
    let mut selected = 0usize;
    let mut hits = 0usize;
    for (&v, &g) in s.iter().zip(gt) {
        if v >= threshold {
            selected += 1;
            hits += usize::from(g);
        }
    }
    let precision = if selected == 0 { 0.0 } else { hits as f64 / selected as f64 };
    (precision, hits as f64 / positives as f64)
}

/// Localization of `saliency` against the boolean ground truth `gt`.
///
/// AUP and AUR are the mean precision and recall over [`SWEEP_LEVELS`]
/// evenly spaced thresholds on the max-normalized saliency. AUPRC is the
/// trapezoidal area under the interpolated (running-max) precision over the
/// recall points of every distinct saliency value, starting at recall 0, so
/// it depends on the ranking only.
pub fn localization(saliency: &[f64], gt: &[bool]) -> Result<LocalizationScores> {
    if saliency.len() != gt.len() {
        return Err(Error::shape(gt.len(), saliency.len()));
    }
    check_saliency(saliency)?;
    let positives = gt.iter().filter(|&&g| g).count();
    if positives == 0 {
        return Err(Error::validation("ground truth has no positive bins"));
    }
    let prevalence = positives as f64 / gt.len() as f64;
    let max = saliency.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(LocalizationScores { aup: 0.0, aur: 0.0, auprc: prevalence });
    }
    let norm: Vec<f64> = saliency.iter().map(|v| v / max).collect();
    let (mut sum_p, mut sum_r) = (0.0, 0.0);
    for i in 0..SWEEP_LEVELS {
        let (p, r) = precision_recall(&norm, gt, i as f64 / (SWEEP_LEVELS - 1) as f64, positives);
        sum_p += p;
        sum_r += r;
    }

    // distinct values, descending; each adds one (recall, precision) point
    let mut order: Vec<usize> = (0..saliency.len()).collect();
    order.sort_by(|&a, &b| saliency[b].total_cmp(&saliency[a]));
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut selected, mut hits) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        selected += 1;
        hits += usize::from(gt[i]);
        let last_of_value = k + 1 == order.len() || saliency[order[k + 1]] != saliency[i];
        if last_of_value {
            points.push((hits as f64 / positives as f64, hits as f64 / selected as f64));
        }
    }
    // interpolated precision: best precision at this recall or beyond
    for k in (0..points.len().saturating_sub(1)).rev() {
        points[k].1 = points[k].1.max(points[k + 1].1);
    }
    // points sharing a recall take the group maximum, which sits first
    for k in 1..points.len() {
        if points[k].0 == points[k - 1].0 {
            points[k].1 = points[k - 1].1;
        }
    }
    let mut auprc = 0.0;
    let (mut r_prev, mut p_prev) = (0.0, points[0].1);
    for &(r, p) in &points {
        auprc += (r - r_prev) * (p + p_prev) / 2.0;
        r_prev = r;
        p_prev = p;
    }

    Ok(LocalizationScores {
        aup: sum_p / SWEEP_LEVELS as f64,
        aur: sum_r / SWEEP_LEVELS as f64,
        auprc,
    })
}

/// Indices of the `ceil(keep_fraction * n)` largest values, ties to the lower
/// index.
pub fn top_features(saliency: &[f64], keep_fraction: f64) -> Result<Vec<usize>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::validation(format!("keep_fraction {keep_fraction} outside (0, 1]")));
    }
    let keep = ((keep_fraction * saliency.len() as f64).ceil() as usize).min(saliency.len());
    let mut order: Vec<usize> = (0..saliency.len()).collect();
    order.sort_by(|&a, &b| saliency[b].total_cmp(&saliency[a]).then(a.cmp(&b)));
    order.truncate(keep);
    Ok(order)
}

/// Target-class probability after keeping only the top `keep_fraction` of
/// the explanation's frequency features and zeroing the rest of the spectrum.
///
/// Multichannel explanations that carry per-channel saliency are ranked over
/// all `K * V` features; otherwise one bin selection is shared by every
/// channel.
pub fn faithfulness(model: &dyn Classifier, ts: &TimeSeries, expl: &Explanation, keep_fraction: f64, target_class: usize) -> Result<f64> {
    let spec = forward_dft(ts);
    let bins = spec.bins();
    let features = expl.features();
    let per_channel = features.len() == bins * ts.channels() && ts.channels() > 1;
    if features.len() != bins && !per_channel {
        return Err(Error::shape(format!("{bins} saliency values"), features.len()));
    }
    if target_class >= model.classes() {
        return Err(Error::validation(format!("target class {target_class} out of range")));
    }
    let top = top_features(features, keep_fraction)?;
    if top.len() == features.len() {
        return Ok(model.predict(ts.as_slice())?.prob(target_class));
    }
    let mut keep = vec![false; features.len()];
    top.iter().for_each(|&i| keep[i] = true);
    let mut x = Vec::with_capacity(ts.as_slice().len());
    for v in 0..ts.channels() {
        let flags = if per_channel { &keep[v * bins..(v + 1) * bins] } else { &keep[..] };
        let coeffs: Vec<_> = spec
            .channel(v)
            .iter()
            .zip(flags)
            .map(|(c, &k)| if k { *c } else { Default::default() })
            .collect();
        x.extend(irdft(&coeffs, ts.len()));
    }
    Ok(model.predict(&x)?.prob(target_class))
}

/// Entropy (natural log) of the saliency fractions `s_i / sum(s)`. An all-zero
/// saliency scores 0 and is logged.
pub fn complexity(saliency: &[f64]) -> Result<f64> {
    check_saliency(saliency)?;
    let total: f64 = saliency.iter().sum();
    if total == 0.0 {
        log::warn!("complexity of an all-zero saliency is reported as 0");
        return Ok(0.0);
    }
    Ok(-saliency
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let q = s / total;
            q * q.ln()
        })
        .sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub n_perturbations: usize,
    /// Perturbation std as a fraction of the series' std.
    pub noise_std_fraction: f64,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig { n_perturbations: 10, noise_std_fraction: 0.05, seed: 0 }
    }
}

impl RobustnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_perturbations == 0 || !(self.noise_std_fraction >= 0.0 && self.noise_std_fraction.is_finite()) {
            return Err(Error::validation("n_perturbations must be positive and noise_std_fraction >= 0"));
        }
        Ok(())
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `max_i ||e(x + d_i) - e(x)|| / ||e(x)||` over Gaussian time-domain
/// perturbations `d_i`. `None` when `e(x)` is all zero.
pub fn robustness_max_sensitivity<F>(explain: F, ts: &TimeSeries, cfg: &RobustnessConfig) -> Result<Option<f64>>
where
    F: Fn(&TimeSeries) -> Result<Explanation>,
{
    cfg.validate()?;
    let base = explain(ts)?;
    let base_norm = l2(base.features());
    if base_norm == 0.0 {
        return Ok(None);
    }
    let std = cfg.noise_std_fraction * ts.std();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.n_perturbations {
        let data: Vec<f64> = if std > 0.0 {
            let normal = Normal::new(0.0, std).map_err(|e| Error::Numeric(e.to_string()))?;
            ts.as_slice().iter().map(|v| v + normal.sample(&mut rng)).collect()
        } else {
            ts.as_slice().to_vec()
        };
        let e = explain(&ts.with_data(data)?)?;
        if e.features().len() != base.features().len() {
            return Err(Error::shape(base.features().len(), e.features().len()));
        }
        let diff: Vec<f64> = e.features().iter().zip(base.features()).map(|(a, b)| a - b).collect();
        worst = worst.max(l2(&diff) / base_norm);
    }
    Ok(Some(worst))
}

/// Hyperparameter grid for the mask-learning explainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneGrid {
    pub bands: Vec<usize>,
    pub taps: Vec<usize>,
    pub ratios: Vec<f64>,
    /// Validation points drawn (at most).
    pub subsample: usize,
    pub keep_fraction: f64,
    pub seed: u64,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid {
            bands: vec![16, 32, 64],
            taps: vec![129, 257, 513],
            ratios: vec![0.05, 0.1, 0.2],
            subsample: 100,
            keep_fraction: 0.1,
            seed: 0,
        }
    }
}

/// One grid point. Band count and filter length are absent for the
/// DFT-domain mask.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(rename = "L")]
    pub bands: Option<usize>,
    #[serde(rename = "N")]
    pub taps: Option<usize>,
    #[serde(rename = "r")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    pub faithfulness: f64,
    pub complexity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub chosen: Candidate,
    pub scores: Vec<CandidateScore>,
}

/// Faithfulness values closer than this count as tied.
pub const FAITHFULNESS_TIE: f64 = 1e-3;

impl TuneGrid {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.subsample == 0 {
            return Err(Error::validation("tuning grid needs ratios and a positive subsample"));
        }
        if self.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::validation("ratios must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Grid points; band/tap axes are used only when `filterbank` is set.
    pub fn candidates(&self, filterbank: bool) -> Result<Vec<Candidate>> {
        self.validate()?;
        let mut out = Vec::new();
        if filterbank {
            if self.bands.is_empty() || self.taps.is_empty() {
                return Err(Error::validation("tuning grid needs bands and taps"));
            }
            for &l in &self.bands {
                for &n in &self.taps {
                    for &r in &self.ratios {
                        out.push(Candidate { bands: Some(l), taps: Some(n), ratio: r });
                    }
                }
            }
        } else {
            out.extend(self.ratios.iter().map(|&r| Candidate { bands: None, taps: None, ratio: r }));
        }
        Ok(out)
    }

    /// Indices of the validation points to score.
    pub fn subsample_indices(&self, available: usize) -> Vec<usize> {
        let n = self.subsample.min(available);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx = sample_indices(&mut rng, available, n).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Highest faithfulness; within [`FAITHFULNESS_TIE`] of the best, lowest
/// complexity, then smaller `L`, `N`, `r`.
pub fn select_candidate(scores: &[CandidateScore]) -> Result<usize> {
    let best = scores
        .iter()
        .map(|s| s.faithfulness)
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::validation("no finite candidate scores"));
    }
    let key = |s: &CandidateScore| (s.complexity, s.candidate.bands, s.candidate.taps, s.candidate.ratio);
    scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.faithfulness >= best - FAITHFULNESS_TIE)
        .min_by(|(_, a), (_, b)| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
                .then(ka.3.total_cmp(&kb.3))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::validation("empty grid"))
}

/// Scores every candidate with `evaluate` (mean faithfulness, mean
/// complexity) and applies [`select_candidate`].
pub fn tune_with<F>(candidates: &[Candidate], mut evaluate: F) -> Result<TuneOutcome>
where
    F: FnMut(&Candidate) -> Result<(f64, f64)>,
{
    if candidates.is_empty() {
        return Err(Error::validation("empty grid"));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for c in candidates {
        let (faithfulness, complexity) = evaluate(c)?;
        log::info!("candidate {c:?}: faithfulness {faithfulness:.4}, complexity {complexity:.4}");
        scores.push(CandidateScore { candidate: *c, faithfulness, complexity });
    }
    let chosen = scores[select_candidate(&scores)?].candidate;
    Ok(TuneOutcome { chosen, scores })
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

/// Metrics of one explained sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub split: usize,
    pub index: usize,
    pub label: usize,
    pub target_class: usize,
    /// Absent when the sample has no salient ground truth.
    pub localization: Option<LocalizationScores>,
    pub faithfulness: f64,
    pub complexity: f64,
    pub robustness: Option<f64>,
}

/// Per-split means of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: usize,
    pub samples: usize,
    pub localized: usize,
    pub auprc: Option<f64>,
    pub aup: Option<f64>,
    pub aur: Option<f64>,
    pub faithfulness: f64,
    pub complexity: f64,
    pub robustness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Mean and std over splits of the per-split means.
    pub auprc: Option<MeanStd>,
    pub aup: Option<MeanStd>,
    pub aur: Option<MeanStd>,
    pub faithfulness: MeanStd,
    pub complexity: MeanStd,
    pub robustness: Option<MeanStd>,
    pub splits: Vec<SplitSummary>,
    pub samples: Vec<SampleMetrics>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    MeanStd::of(&v).map(|m| m.mean)
}

impl MethodReport {
    /// Aggregates per-sample metrics; `samples` may span several splits.
    pub fn from_samples(method: Method, samples: Vec<SampleMetrics>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation(format!("no samples for {method}")));
        }
        let mut split_ids: Vec<usize> = samples.iter().map(|s| s.split).collect();
        split_ids.sort_unstable();
        split_ids.dedup();
        let splits: Vec<SplitSummary> = split_ids
            .iter()
            .map(|&split| {
                let rows: Vec<&SampleMetrics> = samples.iter().filter(|s| s.split == split).collect();
                let loc: Vec<&LocalizationScores> = rows.iter().filter_map(|s| s.localization.as_ref()).collect();
                SplitSummary {
                    split,
                    samples: rows.len(),
                    localized: loc.len(),
                    auprc: mean_of(loc.iter().map(|l| l.auprc)),
                    aup: mean_of(loc.iter().map(|l| l.aup)),
                    aur: mean_of(loc.iter().map(|l| l.aur)),
                    faithfulness: mean_of(rows.iter().map(|s| s.faithfulness)).unwrap_or(0.0),
                    complexity: mean_of(rows.iter().map(|s| s.complexity)).unwrap_or(0.0),
                    robustness: mean_of(rows.iter().filter_map(|s| s.robustness)),
                }
            })
            .collect();
        let across = |f: &dyn Fn(&SplitSummary) -> Option<f64>| -> Option<MeanStd> {
            let v: Vec<f64> = splits.iter().filter_map(f).collect();
            MeanStd::of(&v)
        };
        Ok(MethodReport {
            method,
            auprc: across(&|s| s.auprc),
            aup: across(&|s| s.aup),
            aur: across(&|s| s.aur),
            faithfulness: across(&|s| Some(s.faithfulness)).expect("at least one split"),
            complexity: across(&|s| Some(s.complexity)).expect("at least one split"),
            robustness: across(&|s| s.robustness),
            splits,
            samples,
        })
    }
}

/// Evaluation results for several methods on the same samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub methods: Vec<MethodReport>,
}

pub const CSV_COLUMNS: [&str; 6] = ["auprc", "aup", "aur", "faithfulness", "complexity", "robustness"];

impl MetricReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// One row per method with mean and std columns for every metric.
    /// Values use the same shortest round-trip formatting as the JSON output;
    /// missing values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for c in CSV_COLUMNS {
            out.push_str(&format!(",{c}_mean,{c}_std"));
        }
        out.push('\n');
        for r in &self.methods {
            out.push_str(r.method.name());
            let cols = [r.auprc, r.aup, r.aur, Some(r.faithfulness), Some(r.complexity), r.robustness];
            for c in cols {
                match c {
                    Some(ms) => out.push_str(&format!(",{},{}", ms.mean, ms.std)),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}
