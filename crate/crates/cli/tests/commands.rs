//! End-to-end runs of the `steercal` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn steercal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steercal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}

fn synth(out: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", s(out)];
    args.extend_from_slice(extra);
    ok(steercal(&args));
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn probe_on_one_layer_writes_probe_and_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(
        &data,
        &[
            "--layers",
            "3",
            "--conditions",
            "pure_correctness",
            "--n-questions",
            "200",
            "--dim",
            "16",
        ],
    );
    let out = tmp.path().join("probes");
    ok(steercal(&["probe", "--data", s(&data), "--out", s(&out)]));
    assert!(out.join("probe_layer_3.json").is_file());
    let text = fs::read_to_string(out.join("probe_r2.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("layer,target,lambda,r2_train,r2_val,r2_test"));
    assert!(lines[1].starts_with("3,empirical_accuracy,"));
    assert!(out.join("resolved_config.toml").is_file());
}

#[test]
fn missing_directory_is_an_io_failure_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no_such_dump");
    let o = steercal(&["probe", "--data", s(&missing), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
}

#[test]
fn absent_target_field_is_a_validation_failure_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(
        &data,
        &[
            "--layers",
            "0",
            "--conditions",
            "joint",
            "--n-questions",
            "50",
            "--dim",
            "8",
        ],
    );
    // Strip the field from every row of the dump.
    let meta = data.join("joint/layer_0/meta.jsonl");
    let text = fs::read_to_string(&meta).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("empirical_accuracy");
            format!("{v}\n")
        })
        .collect();
    fs::write(&meta, stripped).unwrap();
    let o = steercal(&[
        "probe",
        "--data",
        s(&data),
        "--target",
        "empirical_accuracy",
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("empirical_accuracy"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_and_values_are_validation_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let o = steercal(&["probe", "--data", "x", "--out", "y", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = steercal(&["metrics", "--input", "x.csv", "--out", s(tmp.path()), "--bins", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(steercal(&["--help"]).status.success());
}

#[test]
fn flat_transfer_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(
        &data,
        &[
            "--layers",
            "0",
            "--conditions",
            "pure_correctness",
            "--n-questions",
            "200",
            "--dim",
            "16",
        ],
    );
    let probes = tmp.path().join("probes");
    ok(steercal(&["probe", "--data", s(&data), "--out", s(&probes)]));
    let transfer = tmp.path().join("transfer.csv");
    fs::write(&transfer, "alpha,mean_confidence\n-1,0.4\n0,0.4\n1,0.4\n").unwrap();
    let o = steercal(&[
        "plan",
        "--probe",
        s(&probes.join("probe_layer_0.json")),
        "--calibration",
        s(&data),
        "--transfer",
        s(&transfer),
        "--data",
        s(&data),
        "--out",
        s(&tmp.path().join("plan")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("flat"), "{}", stderr(&o));
}

#[test]
fn metrics_on_two_questions() {
    // Bins hold (0.9, 0.5) and (0.1, 0.1): ECE = (0.4 + 0) / 2.
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.csv");
    fs::write(&input, "question_id,confidence,accuracy\nq1,0.9,0.5\nq2,0.1,0.1\n").unwrap();
    let out = tmp.path().join("m");
    let o = ok(steercal(&["metrics", "--input", s(&input), "--out", s(&out)]));
    assert!(stdout(&o).contains("ece=0.200000"), "{}", stdout(&o));
    let rows = read_rows(&out.join("metrics.csv"));
    let ece: f64 = rows[0][4].parse().unwrap();
    assert!((ece - 0.2).abs() < 1e-12);
    // Per-question Brier (0.16 + 0) / 2.
    let brier: f64 = rows[0][5].parse().unwrap();
    assert!((brier - 0.08).abs() < 1e-12);
    assert_eq!(read_rows(&out.join("reliability.csv")).len(), 10);
}

#[test]
fn metrics_per_sample_brier_uses_binary_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.csv");
    fs::write(
        &input,
        "question_id,confidence,correct\nq1,0.8,1\nq1,0.8,0\nq2,0.3,false\n",
    )
    .unwrap();
    let out = tmp.path().join("m");
    ok(steercal(&[
        "metrics",
        "--input",
        s(&input),
        "--out",
        s(&out),
        "--brier",
        "per_sample",
    ]));
    let rows = read_rows(&out.join("metrics.csv"));
    // (0.04 + 0.64 + 0.09) / 3
    let brier: f64 = rows[0][5].parse().unwrap();
    assert!((brier - 0.77 / 3.0).abs() < 1e-12, "{brier}");
    assert_eq!(rows[0][6], "per_sample");
    assert_eq!(rows[0][0], "verbalized");
}

fn orthogonal_workflow(root: &Path) -> PathBuf {
    let data = root.join("data");
    synth(
        &data,
        &[
            "--layers",
            "0,1,2",
            "--n-questions",
            "1000",
            "--dim",
            "64",
            "--planted-cosine",
            "0",
            "--seed",
            "3",
        ],
    );
    ok(steercal(&[
        "probe",
        "--data",
        s(&data.join("pure_correctness")),
        "--out",
        s(&root.join("pa")),
    ]));
    ok(steercal(&[
        "probe",
        "--data",
        s(&data.join("pure_confidence")),
        "--target",
        "verbalized_confidence",
        "--out",
        s(&root.join("pc")),
    ]));
    let geom = root.join("geom");
    ok(steercal(&[
        "geometry",
        "--probes-a",
        s(&root.join("pa")),
        "--probes-b",
        s(&root.join("pc")),
        "--out",
        s(&geom),
    ]));
    geom
}

#[test]
fn planted_orthogonal_concepts_give_orthogonal_probes_every_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let geom = orthogonal_workflow(tmp.path());
    let rows = read_rows(&geom.join("probe_cosine.csv"));
    assert_eq!(rows.len(), 3);
    for r in rows {
        let c: f64 = r[1].parse().unwrap();
        assert!(c.abs() < 0.05, "layer {}: {c}", r[0]);
    }
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn full_workflow(root: &Path) {
    let data = root.join("data");
    synth(&data, &["--layers", "0,1", "--n-questions", "200", "--dim", "16"]);
    let acc = data.join("pure_correctness");
    ok(steercal(&[
        "probe",
        "--data",
        s(&acc),
        "--out",
        s(&root.join("probes")),
    ]));
    ok(steercal(&[
        "caa",
        "--data",
        s(&data.join("pure_confidence")),
        "--out",
        s(&root.join("caa")),
    ]));
    ok(steercal(&[
        "sweep",
        "--simulate",
        s(&data.join("joint/layer_1")),
        "--out",
        s(&root.join("sweep")),
    ]));
    ok(steercal(&[
        "plan",
        "--probe",
        s(&root.join("probes/probe_layer_1.json")),
        "--calibration",
        s(&acc.join("layer_1")),
        "--transfer",
        s(&root.join("sweep/transfer.csv")),
        "--data",
        s(&acc.join("layer_1")),
        "--responses",
        s(&data.join("joint/layer_1")),
        "--out",
        s(&root.join("plan")),
    ]));
    ok(steercal(&[
        "metrics",
        "--input",
        s(&root.join("plan/steered.csv")),
        "--out",
        s(&root.join("metrics")),
    ]));
    ok(steercal(&[
        "geometry",
        "--pure",
        s(&data.join("pure_confidence")),
        "--joint",
        s(&data.join("joint")),
        "--data",
        s(&data.join("joint")),
        "--pca-dim",
        "12",
        "--k",
        "3",
        "--cca-m",
        "2",
        "--trials",
        "50",
        "--out",
        s(&root.join("geom")),
    ]));
    ok(steercal(&[
        "report",
        "--in",
        s(&root.join("probes")),
        "--in",
        s(&root.join("sweep")),
        "--in",
        s(&root.join("metrics")),
        "--in",
        s(&root.join("geom")),
        "--out",
        s(&root.join("figures")),
    ]));
}

#[test]
fn workflow_is_byte_identical_across_runs_and_leaves_inputs_alone() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_workflow(a.path());
    full_workflow(b.path());
    let snap = snapshot(a.path());
    assert_eq!(snap, snapshot(b.path()));

    // Rerunning a step in place rewrites the same bytes and leaves its inputs untouched.
    let data_before = snapshot(&a.path().join("data"));
    ok(steercal(&[
        "probe",
        "--data",
        s(&a.path().join("data/pure_correctness")),
        "--out",
        s(&a.path().join("probes")),
    ]));
    assert_eq!(snapshot(&a.path().join("data")), data_before);
    assert_eq!(snapshot(a.path()), snap);

    for name in [
        "layer_curve.svg",
        "reliability.svg",
        "sweep.svg",
        "principal_angles.svg",
        "contamination.svg",
    ] {
        let svg = fs::read_to_string(a.path().join("figures").join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name}");
    }
    for dir in ["data", "probes", "caa", "sweep", "plan", "metrics", "geom", "figures"] {
        assert!(a.path().join(dir).join("resolved_config.toml").is_file(), "{dir}");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "bins = 4\nbrier = \"per_question\"\ntau_hi = 0.8\n").unwrap();
    let input = tmp.path().join("in.csv");
    fs::write(&input, "question_id,confidence,accuracy\nq1,0.9,0.5\n").unwrap();
    let out = tmp.path().join("m");
    let o = ok(steercal(&[
        "--config",
        s(&cfg),
        "metrics",
        "--input",
        s(&input),
        "--out",
        s(&out),
    ]));
    assert!(stderr(&o).contains("tau_hi"), "{}", stderr(&o));
    assert_eq!(read_rows(&out.join("reliability.csv")).len(), 4);
    let resolved = fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("bins = 4"));

    ok(steercal(&[
        "metrics",
        "--config",
        s(&cfg),
        "--input",
        s(&input),
        "--out",
        s(&out),
        "--bins",
        "5",
    ]));
    assert_eq!(read_rows(&out.join("reliability.csv")).len(), 5);
}
