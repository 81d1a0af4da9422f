use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use flextime::model::ModelSpec;
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_flextime"));
    c.env("RUST_LOG", "warn");
    for var in ["FLEX_CONFIG", "FLEX_SEED", "FLEX_WORKERS", "FLEX_FORCE"] {
        c.env_remove(var);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-tests").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config() -> Value {
    json!({
        "seed": 5,
        "synth": { "length": 256 },
        "sizes": { "train": 320, "val": 64, "test": 112 },
        "model": ModelSpec::compact(256),
        "train": { "max_epochs": 3, "learning_rate": 0.003 },
        "explain": {
            "flextime": { "bands": 8, "taps": 65, "iterations": 30 },
            "dynamask_freq": { "iterations": 30 },
            "freqrise": { "n_masks": 64 }
        },
        "metrics": { "samples": 8, "robustness_samples": 2, "methods": ["flextime", "dynamask_freq", "random"] },
        "tune": { "bands": [8], "taps": [65], "ratios": [0.05, 0.1], "subsample": 8 }
    })
}

/// Generated data and a trained model shared by the tests.
struct Fixture {
    root: PathBuf,
    config: PathBuf,
    data: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let root = scratch("fixture");
        let config = root.join("config.json");
        fs::write(&config, small_config().to_string()).unwrap();
        let data = root.join("data");
        let model = root.join("model");
        ok(&["--config", s(&config), "gen", "--out", s(&data)]);
        ok(&["--config", s(&config), "train", "--data", s(&data), "--out", s(&model)]);
        Fixture { root, config, data, model }
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn invalid_configuration_exits_2_without_writing() {
    let dir = scratch("invalid");
    let bad = dir.join("bad.json");
    fs::write(&bad, "{ \"sizes\": { \"test\": 100 } }").unwrap();
    let out = dir.join("data");
    for cfg in [bad.clone(), dir.join("missing.json")] {
        let r = run(&["--config", s(&cfg), "gen", "--out", s(&out)]);
        assert_eq!(r.status.code(), Some(2));
        assert!(!out.exists());
    }
    fs::write(&bad, "{ \"synth\": { \"length\": ").unwrap();
    let r = run(&["--config", s(&bad), "gen", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
    fs::write(&bad, "{ \"bogus\": 1 }").unwrap();
    assert_eq!(run(&["--config", s(&bad), "gen", "--out", s(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_method_and_missing_inputs() {
    let f = fixture();
    let out = scratch("missing");
    let cfg = s(&f.config);
    let r = run(&["--config", cfg, "explain", "--method", "nope", "--model", s(&f.model), "--data", s(&f.data), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = run(&["--config", cfg, "explain", "--method", "random", "--model", s(&out.join("none")), "--data", s(&f.data), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn generation_is_deterministic_and_refuses_to_overwrite() {
    let f = fixture();
    let other = scratch("gen-again").join("data");
    ok(&["--config", s(&f.config), "gen", "--out", s(&other)]);
    for name in ["train.flxt", "val.flxt", "test.flxt", "manifest.json"] {
        assert_eq!(fs::read(f.data.join(name)).unwrap(), fs::read(other.join(name)).unwrap(), "{name}");
    }
    let manifest = read_json(&other.join("manifest.json"));
    let test = manifest["splits"].as_array().unwrap().iter().find(|v| v["name"] == "test").unwrap();
    assert!(test["class_counts"].as_array().unwrap().iter().all(|c| c == 7));

    let r = run(&["--config", s(&f.config), "gen", "--out", s(&other)]);
    assert_eq!(r.status.code(), Some(2));
    ok(&["--config", s(&f.config), "--force", "gen", "--out", s(&other)]);
    let r = bin().args(["--config", s(&f.config), "gen", "--out", s(&other)]).env("FLEX_FORCE", "true").output().unwrap();
    assert!(r.status.success());
}

#[test]
fn training_log_marks_the_best_epoch() {
    let f = fixture();
    let log = read_json(&f.model.join("train_log.json"));
    let epochs = log["epochs"].as_array().unwrap();
    let best = epochs.iter().map(|e| e["val_accuracy"].as_f64().unwrap()).fold(0.0, f64::max);
    assert_eq!(log["best_val_accuracy"].as_f64().unwrap(), best);
    let marked: Vec<&Value> = epochs.iter().filter(|e| e["best"] == true).collect();
    assert_eq!(marked.last().unwrap()["epoch"], log["best_epoch"]);
    let r = run(&["--config", s(&f.config), "train", "--data", s(&f.data), "--out", s(&f.model)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn flextime_explanations_have_mask_saliency_and_figures() {
    let f = fixture();
    let out = scratch("explain-svg");
    ok(&["--config", s(&f.config), "explain", "--method", "flextime", "--model", s(&f.model), "--data", s(&f.data), "--out", s(&out), "--limit", "3"]);
    let dir = out.join("flextime");
    for i in 0..3 {
        let e = read_json(&dir.join(format!("sample_{i:05}.json")));
        assert_eq!(e["band_mask"].as_array().unwrap().len(), 8);
        assert_eq!(e["saliency"].as_array().unwrap().len(), 129);
        assert!(e["duration_secs"].as_f64().unwrap() >= 0.0);
        let svg = fs::read_to_string(dir.join(format!("sample_{i:05}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert!(lines >= 2);
        assert!(svg.contains("Hz"));
    }
    assert!(dir.join("filterbank.flxt").exists());
    assert_eq!(read_json(&dir.join("manifest.json"))["indices"].as_array().unwrap().len(), 3);
}

#[test]
fn explanation_json_does_not_depend_on_worker_count() {
    let f = fixture();
    let dirs: Vec<PathBuf> = ["w1", "w8"].iter().map(|n| scratch(&format!("workers-{n}"))).collect();
    for (dir, w) in dirs.iter().zip(["1", "8"]) {
        ok(&[
            "--config", s(&f.config), "--workers", w, "explain", "--method", "flextime", "--model", s(&f.model),
            "--data", s(&f.data), "--out", s(dir), "--limit", "100", "--no-timing", "--no-svg",
        ]);
    }
    for i in 0..100 {
        let name = format!("flextime/sample_{i:05}.json");
        assert_eq!(fs::read(dirs[0].join(&name)).unwrap(), fs::read(dirs[1].join(&name)).unwrap(), "{name}");
    }
}

fn explain_all(f: &Fixture, out: &Path) {
    for m in ["flextime", "dynamask_freq", "random"] {
        ok(&["--config", s(&f.config), "explain", "--method", m, "--model", s(&f.model), "--data", s(&f.data), "--out", s(out), "--no-timing", "--no-svg"]);
    }
}

#[test]
fn metric_report_csv_matches_json_and_aggregates_splits() {
    let f = fixture();
    let expl = scratch("metrics-expl");
    explain_all(f, &expl);
    let single = f.root.join("metrics-single");
    let _ = fs::remove_dir_all(&single);
    ok(&["--config", s(&f.config), "metrics", "--model", s(&f.model), "--data", s(&f.data), "--explanations", s(&expl), "--out", s(&single)]);
    let report = read_json(&single.join("report.json"));
    let csv = fs::read_to_string(single.join("report.csv")).unwrap();
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    for (row, m) in rows.zip(methods) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], m["method"].as_str().unwrap());
        for (name, cell) in header.iter().zip(&cells).skip(1) {
            let (metric, stat) = name.rsplit_once('_').unwrap();
            let v = &m[metric][stat];
            if cell.is_empty() {
                assert!(m[metric].is_null(), "{name}");
            } else {
                assert_eq!(cell.parse::<f64>().unwrap(), v.as_f64().unwrap(), "{name}");
            }
        }
    }
    let flex = methods.iter().find(|m| m["method"] == "flextime").unwrap();
    for k in ["auprc", "aup", "aur"] {
        assert!(flex[k]["mean"].is_number(), "{k}");
    }

    let double = f.root.join("metrics-double");
    let _ = fs::remove_dir_all(&double);
    let (m, d, e) = (s(&f.model), s(&f.data), s(&expl));
    ok(&[
        "--config", s(&f.config), "metrics", "--model", m, "--data", d, "--explanations", e,
        "--model", m, "--data", d, "--explanations", e, "--out", s(&double),
    ]);
    let two = read_json(&double.join("report.json"));
    for m in two["methods"].as_array().unwrap() {
        assert_eq!(m["splits"].as_array().unwrap().len(), 2);
        assert_eq!(m["faithfulness"]["std"].as_f64().unwrap(), 0.0);
    }
    let r = run(&["--config", s(&f.config), "metrics", "--model", m, "--data", d, "--out", s(&double)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn tuning_writes_l_n_r() {
    let f = fixture();
    let out = scratch("tune").join("flextime.json");
    ok(&["--config", s(&f.config), "tune", "--model", s(&f.model), "--data", s(&f.data), "--out", s(&out)]);
    let doc = read_json(&out);
    assert_eq!(doc["L"], 8);
    assert_eq!(doc["N"], 65);
    assert!([0.05, 0.1].contains(&doc["r"].as_f64().unwrap()));
    assert_eq!(doc["scores"].as_array().unwrap().len(), 2);

    // a grid of one echoes its only point
    let mut cfg = small_config();
    cfg["tune"] = json!({ "bands": [4], "taps": [33], "ratios": [0.2], "subsample": 4 });
    let path = out.with_file_name("one.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let one = out.with_file_name("one-out.json");
    ok(&["--config", s(&path), "tune", "--model", s(&f.model), "--data", s(&f.data), "--out", s(&one)]);
    let doc = read_json(&one);
    assert_eq!((doc["L"].clone(), doc["N"].clone(), doc["r"].clone()), (json!(4), json!(33), json!(0.2)));
    let r = run(&["--config", s(&path), "tune", "--method", "random", "--model", s(&f.model), "--data", s(&f.data), "--out", s(&one)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn gibbs_demo_reports_both_attenuations() {
    let out = scratch("gibbs");
    ok(&["demo", "gibbs", "--out", s(&out)]);
    let r = read_json(&out.join("gibbs.json"));
    assert!(r["fir_attenuation_db"].as_f64().unwrap() >= 50.0);
    assert!(r["dft_zeroing_attenuation_db"].as_f64().unwrap() <= 25.0);
    assert_eq!(r["fir_better"], true);
    for name in ["gibbs_time.svg", "gibbs_response.svg"] {
        let svg = fs::read_to_string(out.join(name)).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2, "{name}");
    }
    let r = run(&["demo", "gibbs", "--band", "400", "200", "--out", s(&scratch("gibbs-bad"))]);
    assert_eq!(r.status.code(), Some(2));
}
