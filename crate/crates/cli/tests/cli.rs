use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spikegrid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spikegrid")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small synthetic scene plus a config for a network that trains in seconds.
fn fixture() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = run(&[
        "gen-synthetic",
        "--out-dir",
        d,
        "--height",
        "16",
        "--width",
        "16",
        "--bands",
        "8",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = dir.path().join("config.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["pca_components"] = json!(6);
    v["network"]["arch"]["channels"] = json!([6, 8, 8]);
    v["network"]["arch"]["width_factor"] = json!(1);
    v["network"]["arch"]["deep_blocks"] = json!(1);
    v["train"]["epochs"] = json!(2);
    v["train"]["patch_size"] = json!(5);
    v["train"]["time_steps"] = json!(3);
    v["split"]["mode"] = json!({"per_class_count": 10});
    write_json(&cfg, &v);
    (dir, cfg)
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn edit(cfg: &Path, f: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(cfg).unwrap()).unwrap();
    f(&mut v);
    let out = cfg.with_file_name("edited.json");
    write_json(&out, &v);
    out
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn train(cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn train_writes_artifacts() {
    let (dir, cfg) = fixture();
    let o = train(&cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("run");
    for f in [
        "checkpoint.sgck",
        "epochs.csv",
        "metrics.csv",
        "summary.csv",
        "confusion.csv",
        "run-0/checkpoint.sgck",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(
        &fs::read(out.join("checkpoint.sgck")).unwrap()[..4],
        b"SGCK"
    );
    let (h, rows) = csv_rows(&out.join("epochs.csv"));
    assert_eq!(h, ["epoch", "lr", "loss", "oa", "aa", "kappa"]);
    assert_eq!(rows.len(), 2);
    let (h, rows) = csv_rows(&out.join("metrics.csv"));
    assert!(h.iter().any(|c| c == "train_seconds") && h.iter().any(|c| c == "test_seconds"));
    assert_eq!(rows.len(), 1);
    // no temp files left behind by the atomic writes
    assert!(fs::read_dir(&out).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".tmp")));
}

#[test]
fn repeats_report_mean_and_sample_std() {
    let (dir, cfg) = fixture();
    let cfg = edit(&cfg, |v| v["train"]["epochs"] = json!(1));
    let o = train(&cfg, &["--repeats", "3", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("run");
    let (h, runs) = csv_rows(&out.join("metrics.csv"));
    assert_eq!(runs.len(), 3);
    let oa_col = h.iter().position(|c| c == "oa").unwrap();
    let oas: Vec<f64> = runs.iter().map(|r| r[oa_col].parse().unwrap()).collect();
    let mean = oas.iter().sum::<f64>() / 3.0;
    let std = (oas.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    let (h, summary) = csv_rows(&out.join("summary.csv"));
    let oa = summary.iter().find(|r| r[0] == "oa").expect("oa row");
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    assert!((oa[col("mean")].parse::<f64>().unwrap() - mean).abs() < 1e-12);
    assert!((oa[col("std")].parse::<f64>().unwrap() - std).abs() < 1e-12);
    assert!(oa[col("formatted")].contains('±'));
    assert!(out.join("run-2/epochs.csv").is_file());
}

#[test]
fn missing_cube_is_a_usage_error_without_outputs() {
    let (dir, cfg) = fixture();
    let cfg = edit(&cfg, |v| v["cube"] = json!("nowhere.hsic"));
    let o = train(&cfg, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nowhere.hsic"), "{}", stderr(&o));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn invalid_configs_exit_2() {
    let (_dir, cfg) = fixture();
    let even = edit(&cfg, |v| v["train"]["patch_size"] = json!(6));
    assert_eq!(code(&train(&even, &[])), 2);
    let unknown = edit(&cfg, |v| v["train"]["learning_rat"] = json!(0.1));
    assert_eq!(code(&train(&unknown, &[])), 2);
    let width = edit(&cfg, |v| v["network"]["arch"]["width_factor"] = json!(0));
    assert_eq!(code(&train(&width, &[])), 2);
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&train(&cfg, &[])), 2);
    assert_eq!(code(&run(&["train"])), 2);
}

#[test]
fn diverging_training_exits_3() {
    let (dir, cfg) = fixture();
    let cfg = edit(&cfg, |v| v["train"]["learning_rate"] = json!(1e300));
    let o = train(&cfg, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!dir.path().join("run/checkpoint.sgck").exists());
}

#[test]
fn map_and_eval_agree_with_training() {
    let (dir, cfg) = fixture();
    assert_eq!(code(&train(&cfg, &[])), 0);
    let out = dir.path().join("run");
    let ck = out.join("checkpoint.sgck");
    let (c, k) = (cfg.to_str().unwrap(), ck.to_str().unwrap());

    let o = run(&["predict-map", "--config", c, "--checkpoint", k]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ppm = fs::read(out.join("map.ppm")).unwrap();
    let header = b"P6\n16 16\n255\n";
    assert_eq!(&ppm[..header.len()], header);
    assert_eq!(ppm.len(), header.len() + 16 * 16 * 3);

    let (h, m) = csv_rows(&out.join("metrics.csv"));
    let (h2, mm) = csv_rows(&out.join("map_metrics.csv"));
    for name in ["oa", "aa", "kappa"] {
        let a = &m[0][h.iter().position(|c| c == name).unwrap()];
        let b = &mm[0][h2.iter().position(|c| c == name).unwrap()];
        assert_eq!(a, b, "{name}");
    }

    let o = run(&["eval", "--config", c, "--checkpoint", k]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h3, e) = csv_rows(&out.join("eval.csv"));
    let oa = |h: &[String], r: &[String]| r[h.iter().position(|c| c == "oa").unwrap()].clone();
    assert_eq!(oa(&h3, &e[0]), oa(&h, &m[0]));

    let o = run(&["predict-map", "--config", c, "--checkpoint", k, "--full"]);
    assert_eq!(code(&o), 0);
    let full = fs::read(out.join("map.ppm")).unwrap();
    assert_eq!(full.len(), ppm.len());
}

#[test]
fn unlabeled_pixels_are_black() {
    let (dir, cfg) = fixture();
    assert_eq!(code(&train(&cfg, &[])), 0);
    // blank out the first row of labels
    let lpath = dir.path().join("synthetic.hsil");
    let mut bytes = fs::read(&lpath).unwrap();
    for px in 0..16 {
        bytes[16 + 2 * px] = 0;
        bytes[17 + 2 * px] = 0;
    }
    fs::write(&lpath, &bytes).unwrap();
    let ck = dir.path().join("run/checkpoint.sgck");
    let o = run(&[
        "predict-map",
        "--config",
        cfg.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ppm = fs::read(dir.path().join("run/map.ppm")).unwrap();
    let pixels = &ppm[b"P6\n16 16\n255\n".len()..];
    assert!(pixels[..16 * 3].iter().all(|&b| b == 0));
    assert!(pixels[16 * 3..].chunks(3).all(|p| p != [0, 0, 0]));
}

#[test]
fn checkpoint_config_mismatch_exits_2() {
    let (dir, cfg) = fixture();
    assert_eq!(code(&train(&cfg, &[])), 0);
    let other = edit(&cfg, |v| {
        v["network"]["arch"]["channels"] = json!([6, 8, 10])
    });
    let ck = dir.path().join("run/checkpoint.sgck");
    let o = run(&[
        "eval",
        "--config",
        other.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let junk = dir.path().join("junk.sgck");
    fs::write(&junk, b"nope").unwrap();
    let o = run(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--checkpoint",
        junk.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let (dir, cfg) = fixture();
    let cfg = edit(&cfg, |v| v["train"]["epochs"] = json!(1));
    let c = cfg.to_str().unwrap();
    let o = run(&[
        "sweep",
        "--config",
        c,
        "--axis",
        "time-steps",
        "--values",
        "2,3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h, rows) = csv_rows(&dir.path().join("run/sweep-time-steps.csv"));
    assert_eq!(
        h,
        [
            "value",
            "oa_mean",
            "oa_std",
            "aa_mean",
            "aa_std",
            "kappa_mean",
            "kappa_std",
            "train_seconds",
            "test_seconds"
        ]
    );
    assert_eq!(
        rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(),
        ["2", "3"]
    );
}

#[test]
fn invalid_sweep_value_exits_2_before_training() {
    let (dir, cfg) = fixture();
    let c = cfg.to_str().unwrap();
    for (axis, values) in [
        ("spatial-size", "5,6"),
        ("kernels", "1x3,bogus"),
        ("width", "0"),
        ("time-steps", "x"),
    ] {
        let o = run(&["sweep", "--config", c, "--axis", axis, "--values", values]);
        assert_eq!(code(&o), 2, "{axis} {values}: {}", stderr(&o));
    }
    assert!(!dir.path().join("run").exists());
}

#[test]
fn schema_matches_config() {
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/schema/run-config.schema.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let (_dir, cfg) = fixture();
    let generated: Value = serde_json::from_str(&fs::read_to_string(cfg).unwrap()).unwrap();
    check_keys(&schema, &generated, "");
}

/// Every object in the config has exactly the schema's properties.
fn check_keys(schema: &Value, doc: &Value, at: &str) {
    let Some(obj) = doc.as_object() else { return };
    let Some(props) = schema.get("properties").and_then(Value::as_object) else {
        return;
    };
    let mut a: Vec<_> = obj.keys().collect();
    let mut b: Vec<_> = props.keys().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b, "keys at {at:?}");
    for (k, v) in obj {
        check_keys(&props[k], v, &format!("{at}/{k}"));
    }
}
