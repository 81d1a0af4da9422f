use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flextime::container::TensorContainer;
use flextime::explain::{Explanation, Method};
use flextime::filterbank::{dense_magnitude_response, dft_zeroing_bandpass, fir_bandpass, stopband_comparison};
use flextime::metrics::{MethodReport, MetricReport};
use flextime::model::{accuracy, train, Cnn, EpochLog, ModelSpec};
use flextime::pipeline::{
    dataset_from_container, dataset_to_container, evaluate, filterbank_to_container, params_from_container,
    params_to_container, tune_hyperparameters, EvalSample, ExplainConfig, Explainer, RunConfig,
};
use flextime::signal::forward_dft;
use flextime::synthdata::{generate_dataset, Dataset, SynthConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::svg::{line_plot, spectrum_heatmap, Series};
use crate::{Cli, Command, Demo, Global};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; nothing was written.
    Config(String),
    /// Failure while running.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<flextime::Error> for CliError {
    fn from(e: flextime::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

const MODEL_SPEC: &str = "model.json";
const MODEL_WEIGHTS: &str = "weights.flxt";
const TRAIN_LOG: &str = "train_log.json";
const DATA_MANIFEST: &str = "manifest.json";
const EXPLAIN_MANIFEST: &str = "manifest.json";
const SPLITS: [&str; 3] = ["train", "val", "test"];

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli.global)?;
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    }
    let force = cli.global.force;
    match cli.command {
        Command::Gen { out } => cmd_gen(&cfg, &out, force),
        Command::Train { data, out } => cmd_train(&cfg, &data, &out, force),
        Command::Explain { method, model, data, out, split, limit, no_timing, no_svg } => {
            let opts = ExplainOptions { split, limit, timing: !no_timing, svg: !no_svg };
            cmd_explain(&cfg, &parse_method(&method)?, &model, &data, &out, &opts, force)
        }
        Command::Metrics { model, data, explanations, out } => cmd_metrics(&cfg, &model, &data, &explanations, &out, force),
        Command::Tune { method, model, data, out } => cmd_tune(&cfg, parse_method(&method)?, &model, &data, &out, force),
        Command::Demo { demo: Demo::Gibbs { band, taps, sample_rate, out } } => {
            cmd_demo_gibbs((band[0], band[1]), taps, sample_rate, &out, force)
        }
    }
}

/// Reads the configuration, applies flag overrides and validates it.
pub fn load_config(g: &Global) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if g.workers.is_some() {
        cfg.workers = g.workers;
    }
    cfg.normalized().map_err(config_err)
}

fn parse_method(s: &str) -> CliResult<Method> {
    Method::parse(s).map_err(config_err)
}

fn refuse_existing(paths: &[PathBuf], force: bool) -> CliResult<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::Config(format!("{} exists; pass --force to overwrite", p.display()))),
        None => Ok(()),
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn load_split(data_dir: &Path, split: &str) -> CliResult<(Dataset, Option<Vec<Vec<bool>>>)> {
    let path = data_dir.join(format!("{split}.flxt"));
    let c = TensorContainer::load(&path).map_err(|e| io_err(&path, e))?;
    dataset_from_container(&c).map_err(|e| io_err(&path, e))
}

fn load_model(dir: &Path) -> CliResult<Cnn> {
    let spec: ModelSpec = read_json(&dir.join(MODEL_SPEC))?;
    let path = dir.join(MODEL_WEIGHTS);
    let c = TensorContainer::load(&path).map_err(|e| io_err(&path, e))?;
    let params = params_from_container(&spec, &c, 0).map_err(|e| io_err(&path, e))?;
    Ok(Cnn::new(spec, params)?)
}

#[derive(Serialize, Deserialize)]
struct DataManifest {
    synth: SynthConfig,
    sample_rate: f64,
    length: usize,
    splits: Vec<SplitInfo>,
}

#[derive(Serialize, Deserialize)]
struct SplitInfo {
    name: String,
    file: String,
    samples: usize,
    class_counts: Vec<usize>,
}

fn cmd_gen(cfg: &RunConfig, out: &Path, force: bool) -> CliResult<()> {
    let mut targets: Vec<PathBuf> = SPLITS.iter().map(|s| out.join(format!("{s}.flxt"))).collect();
    targets.push(out.join(DATA_MANIFEST));
    refuse_existing(&targets, force)?;

    let start = Instant::now();
    let splits = generate_dataset(&cfg.synth, cfg.sizes.train, cfg.sizes.val, cfg.sizes.test)?;
    log::info!("generated {} samples in {:.1?}", cfg.sizes.train + cfg.sizes.val + cfg.sizes.test, start.elapsed());
    create_dir(out)?;
    let mut infos = Vec::new();
    for (name, ds) in SPLITS.iter().zip([&splits.train, &splits.val, &splits.test]) {
        let gt: Vec<Vec<bool>> = ds.labels.iter().map(|&l| cfg.synth.ground_truth_for_label(l)).collect();
        let file = format!("{name}.flxt");
        dataset_to_container(ds, Some(&gt))?.save(&out.join(&file))?;
        infos.push(SplitInfo {
            name: name.to_string(),
            file,
            samples: ds.len(),
            class_counts: ds.class_counts(SynthConfig::CLASSES),
        });
    }
    write_json(
        &out.join(DATA_MANIFEST),
        &DataManifest { synth: cfg.synth.clone(), sample_rate: cfg.synth.sample_rate(), length: cfg.synth.length, splits: infos },
    )
}

#[derive(Serialize, Deserialize)]
struct TrainLog {
    best_epoch: usize,
    best_val_accuracy: f64,
    test_accuracy: Option<f64>,
    parameters: usize,
    epochs: Vec<EpochLog>,
}

fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path, force: bool) -> CliResult<()> {
    refuse_existing(&[out.join(MODEL_WEIGHTS), out.join(MODEL_SPEC), out.join(TRAIN_LOG)], force)?;
    let (train_set, _) = load_split(data, "train")?;
    let (val_set, _) = load_split(data, "val")?;
    let test_path = data.join("test.flxt");
    let test_set = if test_path.exists() { Some(load_split(data, "test")?.0) } else { None };
    if train_set.sample_width() != cfg.model.input_size() {
        return Err(CliError::Config(format!(
            "model expects {} values per sample, data has {}",
            cfg.model.input_size(),
            train_set.sample_width()
        )));
    }

    let start = Instant::now();
    let outcome = train(&cfg.model, &train_set, &val_set, &cfg.train)?;
    let parameters = outcome.params.parameter_count();
    let model = Cnn::new(cfg.model.clone(), outcome.params)?;
    let test_accuracy = test_set.as_ref().map(|t| accuracy(&model, t)).transpose()?;
    log::info!(
        "trained in {:.1?}: best epoch {} (val {:.4}), test {:?}",
        start.elapsed(),
        outcome.best_epoch,
        outcome.best_val_accuracy,
        test_accuracy
    );
    create_dir(out)?;
    params_to_container(model.spec(), model.params())?.save(&out.join(MODEL_WEIGHTS))?;
    write_json(&out.join(MODEL_SPEC), model.spec())?;
    write_json(
        &out.join(TRAIN_LOG),
        &TrainLog {
            best_epoch: outcome.best_epoch,
            best_val_accuracy: outcome.best_val_accuracy,
            test_accuracy,
            parameters,
            epochs: outcome.log,
        },
    )
}

pub struct ExplainOptions {
    pub split: String,
    pub limit: Option<usize>,
    pub timing: bool,
    pub svg: bool,
}

#[derive(Serialize, Deserialize)]
struct ExplainManifest {
    method: Method,
    split: String,
    indices: Vec<usize>,
    explain: ExplainConfig,
}

fn sample_file(index: usize, ext: &str) -> String {
    format!("sample_{index:05}.{ext}")
}

fn cmd_explain(
    cfg: &RunConfig,
    method: &Method,
    model_dir: &Path,
    data: &Path,
    out: &Path,
    opts: &ExplainOptions,
    force: bool,
) -> CliResult<()> {
    let method = *method;
    if !SPLITS.contains(&opts.split.as_str()) {
        return Err(CliError::Config(format!("unknown split '{}'", opts.split)));
    }
    if opts.limit == Some(0) {
        return Err(CliError::Config("limit must be positive".into()));
    }
    let dir = out.join(method.name());
    refuse_existing(&[dir.clone()], force)?;
    let model = load_model(model_dir)?;
    let (ds, gt) = load_split(data, &opts.split)?;
    let n = opts.limit.unwrap_or(cfg.metrics.samples).min(ds.len());
    let explainer = Explainer::new(&model, &cfg.explain, ds.sample_rate)?;

    let start = Instant::now();
    let explanations: Vec<Explanation> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = Instant::now();
            let mut e = explainer.explain(method, &ds.series_at(i), i, None)?;
            if opts.timing {
                e.duration_secs = Some(t.elapsed().as_secs_f64());
            }
            Ok(e)
        })
        .collect::<flextime::Result<_>>()?;
    log::info!("explained {n} samples with {method} in {:.1?}", start.elapsed());

    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    create_dir(&dir)?;
    for (i, e) in explanations.iter().enumerate() {
        write_json(&dir.join(sample_file(i, "json")), e)?;
        if opts.svg {
            let spec = forward_dft(&ds.series_at(i));
            let freqs: Vec<f64> = (0..spec.bins()).map(|j| spec.frequency(j)).collect();
            let title = format!("{method} sample {i} (label {}, target {})", ds.labels[i], e.target_class);
            let truth = gt.as_ref().map(|g| g[i].as_slice());
            write_file(&dir.join(sample_file(i, "svg")), spectrum_heatmap(&title, &freqs, &spec.magnitudes(), &e.saliency, truth))?;
        }
    }
    if method == Method::Flextime {
        filterbank_to_container(explainer.filterbank())?.save(&dir.join("filterbank.flxt"))?;
    }
    write_json(
        &dir.join(EXPLAIN_MANIFEST),
        &ExplainManifest { method, split: opts.split.clone(), indices: (0..n).collect(), explain: explainer.config().clone() },
    )
}

fn cmd_metrics(cfg: &RunConfig, models: &[PathBuf], data: &[PathBuf], expl: &[PathBuf], out: &Path, force: bool) -> CliResult<()> {
    if models.len() != data.len() || data.len() != expl.len() {
        return Err(CliError::Config("--model, --data and --explanations must be given the same number of times".into()));
    }
    let json_path = out.join("report.json");
    let csv_path = out.join("report.csv");
    refuse_existing(&[json_path.clone(), csv_path.clone()], force)?;

    let methods: Vec<Method> =
        cfg.metrics.methods.iter().copied().filter(|m| expl.iter().all(|e| e.join(m.name()).join(EXPLAIN_MANIFEST).exists())).collect();
    for m in &cfg.metrics.methods {
        if !methods.contains(m) {
            log::warn!("no explanations for {m}; skipped");
        }
    }
    if methods.is_empty() {
        return Err(CliError::Runtime("none of the configured methods has explanations".into()));
    }

    let mut per_method: Vec<Vec<flextime::metrics::SampleMetrics>> = vec![Vec::new(); methods.len()];
    for (split, ((model_dir, data_dir), expl_dir)) in models.iter().zip(data).zip(expl).enumerate() {
        let model = load_model(model_dir)?;
        for (k, &method) in methods.iter().enumerate() {
            let dir = expl_dir.join(method.name());
            let manifest: ExplainManifest = read_json(&dir.join(EXPLAIN_MANIFEST))?;
            let (ds, gt) = load_split(data_dir, &manifest.split)?;
            let explanations: Vec<Explanation> =
                manifest.indices.iter().map(|&i| read_json(&dir.join(sample_file(i, "json")))).collect::<CliResult<_>>()?;
            let samples: Vec<EvalSample> = manifest
                .indices
                .iter()
                .map(|&i| {
                    if i >= ds.len() {
                        return Err(CliError::Runtime(format!("explanation index {i} outside the {} split", manifest.split)));
                    }
                    Ok(EvalSample {
                        split,
                        index: i,
                        ts: ds.series_at(i),
                        label: ds.labels[i],
                        ground_truth: gt.as_ref().map(|g| g[i].clone()),
                    })
                })
                .collect::<CliResult<_>>()?;
            let explainer = Explainer::new(&model, &manifest.explain, ds.sample_rate)?;
            let start = Instant::now();
            per_method[k].extend(evaluate(&explainer, method, &samples, &explanations, &cfg.metrics)?);
            log::info!("scored {} {method} explanations of split {split} in {:.1?}", samples.len(), start.elapsed());
        }
    }
    let report = MetricReport {
        methods: methods
            .iter()
            .zip(per_method)
            .map(|(&m, s)| MethodReport::from_samples(m, s))
            .collect::<flextime::Result<_>>()?,
    };
    create_dir(out)?;
    write_json(&json_path, &report)?;
    write_file(&csv_path, report.to_csv())
}

fn cmd_tune(cfg: &RunConfig, method: Method, model_dir: &Path, data: &Path, out: &Path, force: bool) -> CliResult<()> {
    if !matches!(method, Method::Flextime | Method::DynamaskFreq) {
        return Err(CliError::Config(format!("{method} has no tunable hyperparameters")));
    }
    refuse_existing(&[out.to_path_buf()], force)?;
    let model = load_model(model_dir)?;
    let (val, _) = load_split(data, "val")?;
    let start = Instant::now();
    let outcome = tune_hyperparameters(method, &model, &val, &cfg.tune, &cfg.explain)?;
    log::info!("tuned {method} over {} candidates in {:.1?}", outcome.scores.len(), start.elapsed());
    let chosen = outcome.chosen;
    let doc = serde_json::json!({
        "method": method,
        "L": chosen.bands,
        "N": chosen.taps,
        "r": chosen.ratio,
        "scores": outcome.scores,
    });
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(out, &doc)
}

#[derive(Serialize)]
struct GibbsReport {
    band_hz: (f64, f64),
    taps: usize,
    sample_rate: f64,
    fir_attenuation_db: f64,
    dft_zeroing_attenuation_db: f64,
    transition_half_width_hz: f64,
    fir_better: bool,
}

fn cmd_demo_gibbs(band: (f64, f64), taps: usize, sample_rate: f64, out: &Path, force: bool) -> CliResult<()> {
    let json_path = out.join("gibbs.json");
    let time_path = out.join("gibbs_time.svg");
    let resp_path = out.join("gibbs_response.svg");
    refuse_existing(&[json_path.clone(), time_path.clone(), resp_path.clone()], force)?;
    let cmp = stopband_comparison(taps, band, sample_rate).map_err(config_err)?;
    let fir = fir_bandpass(taps, band, sample_rate).map_err(config_err)?;
    let dft = dft_zeroing_bandpass(taps, band, sample_rate).map_err(config_err)?;

    let half = (taps / 2) as f64;
    let t: Vec<f64> = (0..taps).map(|i| (i as f64 - half) / sample_rate).collect();
    let time_svg = line_plot(
        &format!("Impulse responses, {taps} taps, band {:.0}-{:.0} Hz", band.0, band.1),
        "time (s)",
        "amplitude",
        &[
            Series { name: "Hamming FIR", color: "#1f77b4", x: &t, y: &fir.taps },
            Series { name: "DFT zeroing", color: "#d62728", x: &t, y: &dft.taps },
        ],
        None,
    );
    let points = 2049;
    let f: Vec<f64> = (0..points).map(|i| i as f64 * sample_rate / 2.0 / (points - 1) as f64).collect();
    let db = |taps: &[f64]| -> Vec<f64> {
        dense_magnitude_response(taps, points).iter().map(|m| (20.0 * m.max(1e-12).log10()).max(-140.0)).collect()
    };
    let (fir_db, dft_db) = (db(&fir.taps), db(&dft.taps));
    let resp_svg = line_plot(
        "Magnitude responses",
        "frequency (Hz)",
        "gain (dB)",
        &[
            Series { name: "Hamming FIR", color: "#1f77b4", x: &f, y: &fir_db },
            Series { name: "DFT zeroing", color: "#d62728", x: &f, y: &dft_db },
        ],
        Some((-140.0, 10.0)),
    );
    let report = GibbsReport {
        band_hz: band,
        taps,
        sample_rate,
        fir_attenuation_db: cmp.fir_attenuation_db,
        dft_zeroing_attenuation_db: cmp.dft_zeroing_attenuation_db,
        transition_half_width_hz: cmp.transition_half_width_hz,
        fir_better: cmp.fir_attenuation_db > cmp.dft_zeroing_attenuation_db,
    };
    log::info!(
        "stopband attenuation: FIR {:.1} dB, DFT zeroing {:.1} dB",
        report.fir_attenuation_db,
        report.dft_zeroing_attenuation_db
    );
    create_dir(out)?;
    write_file(&time_path, time_svg)?;
    write_file(&resp_path, resp_svg)?;
    write_json(&json_path, &report)
}
