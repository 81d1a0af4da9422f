use flextime::container::TensorContainer;
use flextime::explain::Method;
use flextime::metrics::{MethodReport, MetricReport, TuneGrid};
use flextime::model::{Classifier, Cnn, ModelParams, ModelSpec};
use flextime::pipeline::{
    dataset_from_container, dataset_to_container, evaluate, params_from_container, params_to_container,
    tune_hyperparameters, EvalSample, ExplainConfig, Explainer, MetricsConfig, RunConfig,
};
use flextime::synthdata::{generate_dataset, generate_test_samples, Dataset, SynthConfig};

fn small_synth() -> SynthConfig {
    SynthConfig { length: 256, seed: 3, ..SynthConfig::default() }
}

#[test]
fn dataset_survives_the_container_as_f32() {
    let cfg = small_synth();
    let samples = generate_test_samples(&cfg, 32).unwrap();
    let series: Vec<f64> = samples.iter().flat_map(|s| s.ts.as_slice().iter().copied()).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let gt: Vec<Vec<bool>> = samples.iter().map(|s| s.ground_truth_freq.clone()).collect();
    let ds = Dataset::new(series, labels, cfg.length, 1, cfg.sample_rate()).unwrap();
    let bytes = dataset_to_container(&ds, Some(&gt)).unwrap().to_bytes();
    let (back, back_gt) = dataset_from_container(&TensorContainer::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.length, ds.length);
    assert_eq!(back.sample_rate, ds.sample_rate);
    assert_eq!(back_gt.unwrap(), gt);
    for (a, b) in back.series.iter().zip(&ds.series) {
        assert_eq!(*a, *b as f32 as f64);
    }
    let (_, none) = dataset_from_container(&dataset_to_container(&ds, None).unwrap()).unwrap();
    assert!(none.is_none());
}

#[test]
fn weights_survive_the_container() {
    let spec = ModelSpec::compact(256);
    let params = ModelParams::init(&spec, 5).unwrap();
    let bytes = params_to_container(&spec, &params).unwrap().to_bytes();
    let back = params_from_container(&spec, &TensorContainer::from_bytes(&bytes).unwrap(), 5).unwrap();
    for (a, b) in back.convs.iter().zip(&params.convs) {
        assert!(a.weight.iter().zip(&b.weight).all(|(x, y)| *x == *y as f32 as f64));
    }
    let other = ModelSpec::three_block(256, 4, 4, 5);
    assert!(params_from_container(&other, &TensorContainer::from_bytes(&bytes).unwrap(), 5).is_err());
}

#[test]
fn run_config_round_trips_and_rejects_unknown_fields() {
    let cfg = RunConfig::default().normalized().unwrap();
    let text = serde_json::to_string(&cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    let partial: RunConfig = serde_json::from_str(r#"{"sizes": {"test": 32}}"#).unwrap();
    assert_eq!(partial.sizes.test, 32);
    assert_eq!(partial.sizes.train, 10_000);

    let seeded = RunConfig { seed: Some(77), ..RunConfig::default() }.normalized().unwrap();
    assert_eq!(seeded.synth.seed, 77);
    assert_eq!(seeded.train.seed, 77);
    assert_eq!(seeded.metrics.robustness.seed, 77);
    let mut bad = RunConfig::default();
    bad.sizes.test = 100;
    assert!(bad.normalized().is_err());
}

fn quick_explain() -> ExplainConfig {
    let mut cfg = ExplainConfig::default();
    cfg.flextime.bands = 8;
    cfg.flextime.taps = 33;
    cfg.flextime.iterations = 20;
    cfg.dynamask_freq.iterations = 20;
    cfg
}

#[test]
fn evaluation_produces_a_complete_report() {
    let synth = small_synth();
    let samples = generate_test_samples(&synth, 32).unwrap();
    let spec = ModelSpec::compact(synth.length);
    let model = Cnn::new(spec.clone(), ModelParams::init(&spec, 1).unwrap()).unwrap();
    let explainer = Explainer::new(&model, &quick_explain(), synth.sample_rate()).unwrap();
    let eval: Vec<EvalSample> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| EvalSample {
            split: 0,
            index: i,
            ts: s.ts.clone(),
            label: s.label,
            ground_truth: Some(s.ground_truth_freq.clone()),
        })
        .collect();
    let metrics_cfg = MetricsConfig { robustness_samples: 3, ..MetricsConfig::default() };
    let mut reports = Vec::new();
    for method in [Method::Flextime, Method::Random] {
        let series: Vec<_> = eval.iter().map(|s| s.ts.clone()).collect();
        let expl = explainer.explain_all(method, &series, 0).unwrap();
        let rows = evaluate(&explainer, method, &eval, &expl, &metrics_cfg).unwrap();
        // label 0 has no salient bins, so it is left out of localization
        for (row, s) in rows.iter().zip(&eval) {
            assert_eq!(row.localization.is_some(), s.label != 0);
            assert_eq!(row.robustness.is_some(), row.index < 3);
            assert!((0.0..=1.0).contains(&row.faithfulness));
        }
        reports.push(MethodReport::from_samples(method, rows).unwrap());
    }
    let report = MetricReport { methods: reports };
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 3);
    let r = report.method(Method::Random).unwrap();
    assert!(r.auprc.is_some() && r.robustness.is_some());
    assert_eq!(r.faithfulness.std, 0.0);
}

#[test]
fn tuning_picks_a_grid_point() {
    let synth = small_synth();
    let splits = generate_dataset(&synth, 16, 16, 16).unwrap();
    let spec = ModelSpec::compact(synth.length);
    let model = Cnn::new(spec.clone(), ModelParams::init(&spec, 2).unwrap()).unwrap();
    let grid = TuneGrid { bands: vec![4, 8], taps: vec![33], ratios: vec![0.05, 0.2], subsample: 4, ..TuneGrid::default() };
    let out = tune_hyperparameters(Method::Flextime, &model, &splits.val, &grid, &quick_explain()).unwrap();
    assert_eq!(out.scores.len(), 4);
    assert!(out.scores.iter().any(|s| s.candidate == out.chosen));
    let out = tune_hyperparameters(Method::DynamaskFreq, &model, &splits.val, &grid, &quick_explain()).unwrap();
    assert_eq!(out.scores.len(), 2);
    assert!(out.chosen.bands.is_none());
    assert!(tune_hyperparameters(Method::Random, &model, &splits.val, &grid, &quick_explain()).is_err());
    assert_eq!(model.classes(), 16);
}
