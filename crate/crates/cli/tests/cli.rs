// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn attralign(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attralign"))
        .args(args)
        .current_dir(dir)
        .env_remove("ATTRALIGN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn two_triangles(dir: &Path) {
    fs::write(dir.join("g.edges"), "0 1\n1 2\n0 2\n3 4\n4 5\n3 5\n").unwrap();
    fs::write(dir.join("z.txt"), "0\n0\n0\n1\n1\n1\n").unwrap();
}

#[test]
fn synth_defaults_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let a = attralign(&["synth", "--seed", "5", "--out", "a"], dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    let b = attralign(&["synth", "--seed", "5", "--out", "b"], dir.path());
    assert!(b.status.success());
    for f in ["graph.edges", "partition.txt", "attrs.csv", "params.json"] {
        let fa = fs::read(dir.path().join("a").join(f)).unwrap();
        let fb = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(fa, fb, "{f} differs between runs with the same seed");
    }

    let params: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/params.json")).unwrap()).unwrap();
    assert_eq!(params["schema_version"], 1);
    assert_eq!(params["params"]["n"], 200);
    assert_eq!(params["params"]["blocks"], 4);
    assert_eq!(params["params"]["p_in"], 0.6);
    assert_eq!(params["params"]["p_out"], 0.02);
    assert_eq!(params["params"]["attr_dims"], 3);

    let attrs = fs::read_to_string(dir.path().join("a/attrs.csv")).unwrap();
    assert_eq!(attrs.lines().count(), 200);
    assert!(attrs.lines().all(|l| l.split(',').count() == 3));
    let labels = fs::read_to_string(dir.path().join("a/partition.txt")).unwrap();
    let mut counts = [0usize; 4];
    for l in labels.lines() {
        counts[l.parse::<usize>().unwrap()] += 1;
    }
    assert_eq!(counts, [50; 4]);
}

#[test]
fn synth_seed_from_env_and_params_file() {
    let dir = tempfile::tempdir().unwrap();
    let env_run = Command::new(env!("CARGO_BIN_EXE_attralign"))
        .args(["synth", "--out", "e"])
        .current_dir(dir.path())
        .env("ATTRALIGN_SEED", "5")
        .output()
        .unwrap();
    assert!(env_run.status.success());
    attralign(&["synth", "--seed", "5", "--out", "f"], dir.path());
    assert_eq!(
        fs::read(dir.path().join("e/graph.edges")).unwrap(),
        fs::read(dir.path().join("f/graph.edges")).unwrap()
    );

    fs::write(
        dir.path().join("p.json"),
        r#"{"n": 30, "blocks": [10, 20], "p_in": 0.5, "p_out": 0.1, "attr_dims": 2, "seed": 4}"#,
    )
    .unwrap();
    let o = attralign(&["synth", "--params", "p.json", "--out", "p"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stderr(&o).contains("seed:"), "file seed should be used");
    let labels = fs::read_to_string(dir.path().join("p/partition.txt")).unwrap();
    assert_eq!(labels.lines().filter(|l| *l == "1").count(), 20);
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = attralign(&["synth", "--n", "20", "--out", "s"], dir.path());
    assert!(o.status.success());
    let line = stderr(&o);
    let seed: u64 = line
        .trim()
        .strip_prefix("seed: ")
        .expect("seed is printed")
        .parse()
        .unwrap();
    let again = attralign(
        &["synth", "--n", "20", "--seed", &seed.to_string(), "--out", "t"],
        dir.path(),
    );
    assert!(again.status.success());
    assert_eq!(
        fs::read(dir.path().join("s/graph.edges")).unwrap(),
        fs::read(dir.path().join("t/graph.edges")).unwrap()
    );
}

#[test]
fn invalid_probability_exits_2_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let o = attralign(&["synth", "--p-in", "1.5", "--seed", "1", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p_in"));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = attralign(&["test", "--graph", "g.edges", "--seed", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = attralign(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z.txt"), "0\n1\n").unwrap();
    let o = attralign(
        &["test", "--graph", "nope.edges", "--labels", "z.txt", "--seed", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = attralign(&["nmi", "--labels", "z.txt", "nope.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.edges"), "0 1\n1 x\n").unwrap();
    fs::write(dir.path().join("z.txt"), "0\n1\n").unwrap();
    let o = attralign(
        &["test", "--graph", "bad.edges", "--labels", "z.txt", "--seed", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn isolated_node_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.edges"), "# nodes: 4\n0 1\n1 2\n").unwrap();
    fs::write(dir.path().join("z.txt"), "0\n0\n1\n1\n").unwrap();
    let o = attralign(
        &["test", "--graph", "g.edges", "--labels", "z.txt", "--l", "2", "--trials", "3", "--seed", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zero-degree"));
}

#[test]
fn nmi_of_identical_files_is_one() {
    let dir = tempfile::tempdir().unwrap();
    two_triangles(dir.path());
    let o = attralign(&["nmi", "--labels", "z.txt", "z.txt"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1.0");
}

#[test]
fn knn_three_points() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.csv"), "a,b\n0,0\n1,0\n5,0\n").unwrap();
    let o = attralign(&["knn", "--attrs", "x.csv", "--k", "1", "--out", "g.edges"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("g.edges")).unwrap();
    let edges: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(edges, vec!["0 1 1", "1 2 1"]);
}

#[test]
fn bestest_two_triangles() {
    let dir = tempfile::tempdir().unwrap();
    two_triangles(dir.path());
    let o = attralign(
        &["bestest", "--graph", "g.edges", "--labels", "z.txt", "--perms", "50", "--seed", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    let expected = -(6.0 * (2.0f64 / 3.0).ln() + 3.0 * (1.0f64 / 3.0).ln());
    assert!((v["entropy"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(v["p_value"], 0.0);
}

#[test]
fn louvain_recovers_triangles() {
    let dir = tempfile::tempdir().unwrap();
    two_triangles(dir.path());
    let o = attralign(&["louvain", "--graph", "g.edges", "--seed", "3", "--out", "c.txt"], dir.path());
    assert!(o.status.success());
    let n = attralign(&["nmi", "--labels", "c.txt", "z.txt"], dir.path());
    assert_eq!(stdout(&n).trim(), "1.0");
}

#[test]
fn label_kmeans_and_categories() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.csv"), "0,9\n0.1,9\n10,0\n10.2,0\n").unwrap();
    let o = attralign(&["label", "--attrs", "x.csv", "--K", "2", "--seed", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let labels: Vec<&str> = out.lines().collect();
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[2], labels[3]);
    assert_ne!(labels[0], labels[2]);

    let o = attralign(
        &["label", "--attrs", "x.csv", "--K", "2", "--column", "1", "--seed", "1"],
        dir.path(),
    );
    assert!(o.status.success());

    fs::write(dir.path().join("cats.txt"), "b\na\nb\nc\n").unwrap();
    let o = attralign(&["label", "--categories", "cats.txt"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0\n1\n0\n2\n");
}

#[test]
fn test_command_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let s = attralign(&["synth", "--seed", "11", "--out", "d"], dir.path());
    assert!(s.status.success());
    let args = [
        "test", "--graph", "d/graph.edges", "--attrs", "d/attrs.csv", "--K", "4", "--trials",
        "200", "--seed", "11", "--out", "r.json",
    ];
    let o = attralign(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["n_trials"], 200);
    assert_eq!(r["sample_size"], 100);
    let p = r["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let first = fs::read(dir.path().join("r.json")).unwrap();
    attralign(&args, dir.path());
    assert_eq!(first, fs::read(dir.path().join("r.json")).unwrap());

    // the planted blocks align with the graph by construction
    for transition in ["aswritten", "randomwalk"] {
        let o = attralign(
            &[
                "test", "--graph", "d/graph.edges", "--labels", "d/partition.txt", "--trials", "50",
                "--seed", "1", "--transition", transition,
            ],
            dir.path(),
        );
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["transition"], transition);
        assert!(v["p_value"].as_f64().unwrap() <= 0.05, "{transition}: {}", v["p_value"]);
    }
}

#[test]
fn constant_labels_give_zero_entropy_and_warning() {
    let dir = tempfile::tempdir().unwrap();
    two_triangles(dir.path());
    fs::write(dir.path().join("c.txt"), "0\n0\n0\n0\n0\n0\n").unwrap();
    let o = attralign(
        &["test", "--graph", "g.edges", "--labels", "c.txt", "--l", "2", "--trials", "10", "--seed", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mean_entropy"], 0.0);
    assert!(v["warnings"].as_array().unwrap().len() >= 1);
    let p = v["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn experiment_outputs_have_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = attralign(
        &[
            "experiment", "perturb", "--n", "40", "--fractions", "0,0.5,1", "--trials", "10",
            "--l", "20", "--seed", "1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# schema_version: 1");
    assert_eq!(
        lines[1],
        "fraction,mean_entropy,p_value,mean_null_entropy,bestest_entropy,bestest_p_value"
    );
    assert_eq!(lines.len(), 5);

    let o = attralign(
        &[
            "experiment", "sweep", "--n", "40", "--mean-degree", "8", "--p-in-grid", "0.2,0.4",
            "--realizations", "2", "--trials", "5", "--l", "10", "--seed", "1", "--format", "json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);

    let mut csv = String::new();
    for i in 0..60 {
        let c = (i / 20) as f64 * 10.0;
        csv.push_str(&format!("{},{},{}\n", c + (i % 7) as f64 * 0.1, c - (i % 5) as f64 * 0.1, 3.0));
    }
    fs::write(dir.path().join("f.csv"), csv).unwrap();
    let o = attralign(
        &[
            "experiment", "markers", "--attrs", "f.csv", "--l", "20", "--trials", "5", "--seed",
            "1", "--out", "m.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "marker_index,nmi,p_value,mean_entropy,warning");
    assert_eq!(lines.len(), 5);
    // the constant third column cannot be split into clusters
    assert!(lines[4].ends_with("degenerate"), "{}", lines[4]);
}

#[test]
fn experiment_rejects_bad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = attralign(
        &["experiment", "perturb", "--fractions", "1.5", "--seed", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}
