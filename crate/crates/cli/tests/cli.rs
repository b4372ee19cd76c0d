use std::path::Path;
use std::process::{Command, Output};

fn chartrelate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chartrelate"))
        .args(args)
        .env_remove("CHARTRELATE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = chartrelate(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["gen", "--count", "10", "--seed", "7", "--out", path(&a)]);
    ok(&["gen", "--count", "10", "--seed", "7", "--out", path(&b)]);
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 21);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn extract_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&["gen", "--count", "3", "--seed", "2", "--out", path(&d)]);
    for i in 0..3 {
        let img = d.join(format!("chart_{i:05}.png"));
        let truth_path = d.join(format!("chart_{i:05}.truth.json"));
        let out = dir.path().join(format!("r{i}.json"));
        ok(&["extract", path(&img), "--facets", path(&truth_path), "--out", path(&out)]);
        let (r, t) = (read_json(&out), read_json(&truth_path));
        assert_eq!(r["config"]["correlation_threshold"], 0.4);
        assert_eq!(r["x_axis"], t["x_label"]);
        for s in t["series"].as_array().unwrap() {
            let p = r["series"].as_array().unwrap().iter().find(|p| p["legend_text"] == s["name"]).unwrap();
            assert_eq!(p["relation"], s["relation"], "chart {i}");
        }
    }
}

#[test]
fn eval_of_perfect_results_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let (d, res) = (dir.path().join("d"), dir.path().join("res"));
    ok(&["gen", "--count", "4", "--seed", "5", "--out", path(&d)]);
    std::fs::create_dir(&res).unwrap();
    for i in 0..4 {
        let t = read_json(&d.join(format!("chart_{i:05}.truth.json")));
        let series: Vec<_> = t["series"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| serde_json::json!({"legend_text": s["name"], "color": s["color"], "relation": s["relation"], "rho": s["rho"]}))
            .collect();
        let doc = serde_json::json!({"x_axis": t["x_label"], "y_axis": t["y_label"], "title": t["title"], "series": series});
        std::fs::write(res.join(format!("chart_{i:05}.result.json")), doc.to_string()).unwrap();
    }
    let report = dir.path().join("report.json");
    let table = ok(&["eval", "--corpus", path(&d), "--results", path(&res), "--out", path(&report)]);
    assert!(table.contains("A_total"));
    let r = read_json(&report);
    assert_eq!(r["a_total"], 1.0);
    assert_eq!(r["charts"], 4);
    assert!(r["config"].is_object());
}

#[test]
fn batch_extract_then_eval_and_ablations() {
    let dir = tempfile::tempdir().unwrap();
    let (d, res) = (dir.path().join("d"), dir.path().join("res"));
    ok(&["gen", "--count", "4", "--seed", "9", "--out", path(&d)]);
    ok(&["--jobs", "2", "extract", "--corpus", path(&d), "--out", path(&res)]);
    let report = dir.path().join("report.json");
    ok(&["eval", "--corpus", path(&d), "--results", path(&res), "--out", path(&report)]);
    assert!(read_json(&report)["series_noocr"].as_f64().unwrap() > 0.5);
    let k = dir.path().join("k.json");
    ok(&["ablate-k", "--corpus", path(&d), "--out", path(&k)]);
    assert!(read_json(&k)["k_accuracy_with_preprocess"].is_number());
    let seg = ok(&["ablate-seg", "--corpus", path(&d)]);
    assert!(seg.contains("segmentation errors"));
}

#[test]
fn debug_subcommands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&["gen", "--count", "1", "--seed", "4", "--min-series", "2", "--max-series", "2", "--out", path(&d)]);
    let (img, truth) = (d.join("chart_00000.png"), d.join("chart_00000.truth.json"));
    let pre = dir.path().join("pre.png");
    ok(&["preprocess", path(&img), "--facets", path(&truth), "--out", path(&pre)]);
    assert!(pre.exists());
    let k: serde_json::Value = serde_json::from_str(&ok(&["select-k", path(&img), "--facets", path(&truth)])).unwrap();
    assert_eq!(k["chosen_k"], 3);
    let masks = dir.path().join("masks");
    ok(&["segment", path(&img), "--facets", path(&truth), "--out", path(&masks)]);
    assert_eq!(read_json(&masks.join("masks.json"))["masks"].as_array().unwrap().len(), 2);
    assert!(masks.join("mask_1.png").exists());
}

#[test]
fn flags_override_file_and_env_supplies_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&["gen", "--count", "1", "--seed", "1", "--out", path(&d)]);
    let img = d.join("chart_00000.png");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 3\nkneedle_threshold = 0.9\n").unwrap();

    let doc: serde_json::Value = serde_json::from_str(&ok(&["--config", path(&cfg), "select-k", path(&img)])).unwrap();
    assert_eq!((doc["config"]["seed"].as_u64(), doc["config"]["kneedle_threshold"].as_f64()), (Some(3), Some(0.9)));

    let doc: serde_json::Value =
        serde_json::from_str(&ok(&["--config", path(&cfg), "--seed", "8", "select-k", path(&img)])).unwrap();
    assert_eq!(doc["config"]["seed"], 8);

    let out = Command::new(env!("CARGO_BIN_EXE_chartrelate"))
        .args(["select-k", path(&img)])
        .env("CHARTRELATE_SEED", "12")
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["seed"], 12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = chartrelate(&["extract", "/nonexistent.png"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[not-found]:"), "{err}");
    assert_eq!(err.lines().count(), 1);

    assert_eq!(chartrelate(&["bogus"]).status.code(), Some(2));
    assert_eq!(chartrelate(&["gen"]).status.code(), Some(2));
    let out = chartrelate(&["--k-range-max", "1", "select-k", "x.png"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sed = 3\n").unwrap();
    let out = chartrelate(&["--config", path(&bad), "select-k", "x.png"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[document]:"));
    assert_eq!(err.lines().count(), 1);

    assert_eq!(chartrelate(&["eval", "--corpus", path(dir.path()), "--results", "r"]).status.code(), Some(1));
    assert_eq!(chartrelate(&["--help"]).status.code(), Some(0));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let (d, res) = (dir.path().join("d"), dir.path().join("res"));
    ok(&["gen", "--count", "2", "--seed", "3", "--out", path(&d)]);
    let snapshot = |dir: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.clone(), std::fs::read(p).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let before = snapshot(&d);
    ok(&["extract", "--corpus", path(&d), "--out", path(&res)]);
    ok(&["eval", "--corpus", path(&d), "--results", path(&res)]);
    ok(&["ablate-seg", "--corpus", path(&d)]);
    assert_eq!(before, snapshot(&d));
}
