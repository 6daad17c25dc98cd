//! End-to-end tests of the `ictus` binary: exit codes, the machine-readable
//! error contract, report schemas, and a miniature full pipeline.

use std::path::{Path, PathBuf};
use std::process::Output;

fn ictus(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_ictus"))
        .args(args)
        .output()
        .expect("spawn ictus")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// The last stderr line on failure is one JSON object.
fn stderr_error(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.trim_start().starts_with('{'))
        .unwrap_or_else(|| panic!("no error JSON on stderr:\n{text}"));
    serde_json::from_str(line).expect("error JSON parses")
}

fn error_kind(out: &Output) -> String {
    stderr_error(out)["error"]["kind"]
        .as_str()
        .expect("error.kind")
        .to_string()
}

fn schema_for(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let text = std::fs::read_to_string(&path).expect("schema file");
    let doc: serde_json::Value = serde_json::from_str(&text).expect("schema JSON");
    jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(&doc)
        .expect("schema compiles")
}

fn assert_valid(schema: &jsonschema::JSONSchema, instance: &serde_json::Value) {
    if let Err(errors) = schema.validate(instance) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("schema violations:\n{}", msgs.join("\n"));
    }
}

#[test]
fn unknown_subcommand_exits_64() {
    let out = ictus(&["transmogrify"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn help_and_version_exit_zero() {
    let out = ictus(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["synth", "analyze", "preprocess", "train", "eval", "predict"] {
        assert!(text.contains(sub), "help lists {sub}");
    }
    assert_eq!(code(&ictus(&["--version"])), 0);
}

#[test]
fn bare_invocation_is_a_usage_error() {
    let out = ictus(&[]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn preprocess_rejects_factor_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ictus(&["preprocess", "--out", tmp.path().to_str().unwrap(), "--factor", "3"]);
    assert_eq!(code(&out), 2);
    let err = stderr_error(&out);
    assert_eq!(err["error"]["kind"], "invalid_config");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("decimation_factor"));
}

#[test]
fn train_without_a_data_path_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ictus(&["train", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_kind(&out), "invalid_config");
}

#[test]
fn train_with_a_dangling_data_path_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        serde_json::json!({ "paths": { "cache": "/no/such/cache" } }).to_string(),
    )
    .unwrap();
    let out = ictus(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        tmp.path().join("model").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr_error(&out);
    assert_eq!(err["error"]["kind"], "invalid_config");
    assert!(err["error"]["message"].as_str().unwrap().contains("paths.cache"));
}

#[test]
fn missing_config_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ictus(&[
        "synth",
        "--config",
        "/no/such/config.json",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_kind(&out), "invalid_config");
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("cfg.json");
    std::fs::write(&cfg_path, r#"{"synht": {}}"#).unwrap();
    let out = ictus(&[
        "synth",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        tmp.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_kind(&out), "invalid_config");
}

#[test]
fn unwritable_output_exits_1() {
    let out = ictus(&["synth", "--out", "/dev/null/nested"]);
    assert_eq!(code(&out), 1);
    assert_eq!(error_kind(&out), "io");
}

#[test]
fn invalid_rule_flag_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ictus(&[
        "eval",
        "--rule",
        "median",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr_error(&out);
    assert_eq!(err["error"]["kind"], "invalid_config");
    assert!(err["error"]["message"].as_str().unwrap().contains("median"));
}

/// A complete miniature run: synth → analyze → preprocess → train → eval →
/// predict, with schema validation and byte-identical rerun checks.
#[test]
fn miniature_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data");
    let cache = root.join("cache");
    let modeldir = root.join("model");

    let config = |name: &str, extra_paths: serde_json::Value| -> PathBuf {
        let doc = serde_json::json!({
            "paths": extra_paths,
            "synth": {
                "n_patients": 1,
                "train": { "preictal": 2, "interictal": 3 },
                "test": { "preictal": 1, "interictal": 2 },
                "n_channels": 4,
                "sampling_rate": 160.0,
                "clip_seconds": 60,
                "signature_strength": 1.0,
                "rng_seed": 7
            },
            "pipeline": { "decimation_factor": 2, "fir_taps": 33 },
            "arch": { "conv_units": 4, "fc_sizes": [6, 4] },
            "train": {
                "learning_rate": 1e-3,
                "batch_size": 4,
                "epochs": 2,
                "validation_fraction": 0.25,
                "rng_seed": 7
            },
            "analysis": { "max_samples_per_channel": 4000 }
        });
        let path = root.join(format!("cfg-{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        path
    };

    // synth
    let cfg0 = config("synth", serde_json::json!({}));
    let out = ictus(&["synth", "--config", cfg0.to_str().unwrap(), "--out", data.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(code(&out), 0, "synth: {}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("manifest.json").is_file());

    let manifest = data.join("manifest.json");
    let cfg_data = config("data", serde_json::json!({ "data": manifest }));

    // analyze (twice, byte-identical with --no-timestamp)
    for dir in ["analysis-a", "analysis-b"] {
        let out = ictus(&[
            "analyze",
            "--config",
            cfg_data.to_str().unwrap(),
            "--out",
            root.join(dir).to_str().unwrap(),
            "--no-timestamp",
        ]);
        assert_eq!(code(&out), 0, "analyze: {}", String::from_utf8_lossy(&out.stderr));
    }
    let report_a = std::fs::read(root.join("analysis-a/p01.json")).unwrap();
    let report_b = std::fs::read(root.join("analysis-b/p01.json")).unwrap();
    assert_eq!(report_a, report_b, "analyze reruns must be byte-identical");
    let analysis: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    assert_valid(&schema_for("analyze.schema.json"), &analysis);
    assert_eq!(analysis["n_channels"], 4);
    assert_eq!(analysis["clips"].as_array().unwrap().len(), 8);

    // timestamped run carries the field
    let out = ictus(&[
        "analyze",
        "--config",
        cfg_data.to_str().unwrap(),
        "--out",
        root.join("analysis-ts").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let ts: serde_json::Value =
        serde_json::from_slice(&std::fs::read(root.join("analysis-ts/p01.json")).unwrap()).unwrap();
    assert!(ts["generated_at_unix"].is_u64());
    assert_valid(&schema_for("analyze.schema.json"), &ts);

    // preprocess
    let out = ictus(&["preprocess", "--config", cfg_data.to_str().unwrap(), "--out", cache.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "preprocess: {}", String::from_utf8_lossy(&out.stderr));
    assert!(cache.join("index.json").is_file());

    // train
    let cfg_cache = config("cache", serde_json::json!({ "data": manifest, "cache": cache }));
    let out = ictus(&["train", "--config", cfg_cache.to_str().unwrap(), "--out", modeldir.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(code(&out), 0, "train: {}", String::from_utf8_lossy(&out.stderr));
    assert!(modeldir.join("model.json").is_file());
    assert!(!modeldir.join("best-epoch.params").exists(), "scratch snapshot is cleaned up");
    let history = std::fs::read_to_string(modeldir.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_auc"));
    assert_eq!(lines.count(), 2, "one row per epoch");

    // eval (twice, byte-identical)
    let cfg_model = config("model", serde_json::json!({ "data": manifest, "model": modeldir.join("model.json") }));
    for dir in ["eval-a", "eval-b"] {
        let out = ictus(&[
            "eval",
            "--config",
            cfg_model.to_str().unwrap(),
            "--out",
            root.join(dir).to_str().unwrap(),
            "--no-timestamp",
        ]);
        assert_eq!(code(&out), 0, "eval: {}", String::from_utf8_lossy(&out.stderr));
    }
    let eval_a = std::fs::read(root.join("eval-a/eval.json")).unwrap();
    let eval_b = std::fs::read(root.join("eval-b/eval.json")).unwrap();
    assert_eq!(eval_a, eval_b, "eval reruns must be byte-identical");
    let eval_doc: serde_json::Value = serde_json::from_slice(&eval_a).unwrap();
    assert_valid(&schema_for("eval.schema.json"), &eval_doc);
    assert_eq!(eval_doc["rule"], "max");
    assert_eq!(eval_doc["per_patient"].as_array().unwrap().len(), 1);
    let roc = std::fs::read_to_string(root.join("eval-a/roc.csv")).unwrap();
    assert!(roc.starts_with("patient_id,fpr,tpr\n"));
    assert!(roc.lines().count() >= 3);

    // mean rule produces a different but valid report
    let out = ictus(&[
        "eval",
        "--config",
        cfg_model.to_str().unwrap(),
        "--out",
        root.join("eval-mean").to_str().unwrap(),
        "--rule",
        "mean",
        "--no-timestamp",
    ]);
    assert_eq!(code(&out), 0);
    let mean_doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(root.join("eval-mean/eval.json")).unwrap()).unwrap();
    assert_eq!(mean_doc["rule"], "mean");
    assert_valid(&schema_for("eval.schema.json"), &mean_doc);

    // predict covers every clip (5 train + 3 test)
    let out = ictus(&["predict", "--config", cfg_model.to_str().unwrap(), "--out", root.join("pred").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "predict: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(root.join("pred/predictions.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("clip_id,patient_id,split,clip_prob,label"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        let p: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(matches!(fields[4], "interictal" | "preictal"));
    }
}
