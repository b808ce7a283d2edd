use std::path::Path;
use std::process::{Command, Output};

use shiftnet::data::Dataset;
use shiftnet::graph::Graph;
use shiftnet::models::Checkpoint;

fn shiftnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = shiftnet(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|r| r.trim().to_string()))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{text}"))
        .parse()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Graph plus a small dataset in `dir`.
fn fixture(dir: &Path) -> (String, String) {
    let graph = dir.join("g.json");
    let data = dir.join("d.json");
    ok(&["gen-graph", "--seed", "3", "--out", p(&graph)]);
    ok(&[
        "gen-data", "--graph", p(&graph), "--n-train", "200", "--n-val", "60", "--n-test", "100",
        "--seed", "4", "--out", p(&data),
    ]);
    (p(&graph).to_string(), p(&data).to_string())
}

#[test]
fn gen_graph_rejects_communities_not_dividing_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = shiftnet(&["gen-graph", "--n", "50", "--c", "7", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn gen_graph_reports_the_spectral_radius_of_the_saved_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let text = ok(&["gen-graph", "--seed", "11", "--out", p(&out)]);
    let printed = value(&text, "spectral_radius");
    let g = Graph::load(&out).unwrap();
    assert_eq!(g.n(), 50);
    let a = g.adjacency();
    let m = nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.data());
    let rho = m
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    assert!((rho - printed).abs() < 1e-8, "{rho} vs {printed}");
}

#[test]
fn invalid_probability_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = shiftnet(&["gen-graph", "--p", "1.5", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(shiftnet(&["gen-graph", "--bogus"]).status.code(), Some(1));
}

#[test]
fn gen_data_at_t_zero_gives_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let data = dir.path().join("d.json");
    ok(&["gen-graph", "--out", p(&graph)]);
    ok(&[
        "gen-data", "--graph", p(&graph), "--n-train", "50", "--n-val", "10", "--n-test", "10",
        "--t-max", "0", "--out", p(&data),
    ]);
    let ds = Dataset::load(&data).unwrap();
    assert_eq!(ds.samples.len(), 70);
    for s in &ds.samples {
        let ones = s.signal.iter().filter(|v| **v == 1.0).count();
        let zeros = s.signal.iter().filter(|v| **v == 0.0).count();
        assert_eq!((ones, zeros), (1, 49));
    }
}

#[test]
fn gen_data_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let data = dir.path().join("d.json");
    ok(&["gen-graph", "--out", p(&graph)]);
    let args = [
        "gen-data", "--graph", p(&graph), "--n-train", "100", "--n-val", "20", "--n-test", "20",
        "--seed", "9", "--out", p(&data),
    ];
    ok(&args);
    let first = std::fs::read(&data).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(&data).unwrap());
}

#[test]
fn gen_data_with_missing_graph_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = shiftnet(&[
        "gen-data",
        "--graph",
        p(&dir.path().join("missing.json")),
        "--out",
        p(&dir.path().join("d.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn untrained_model_is_near_chance_and_eval_matches_report() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, data) = fixture(dir.path());
    let run = dir.path().join("run");
    let text = ok(&[
        "train", "--graph", &graph, "--data", &data, "--epochs", "0", "--kind", "gcnn",
        "--out-dir", p(&run),
    ]);
    let reported = value(&text.replace("; ", "\n"), "test_accuracy");
    assert!((reported - 0.2).abs() <= 0.1, "untrained accuracy {reported}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["test_accuracy"].as_f64().unwrap(), reported);
    assert_eq!(report["report"]["epochs"].as_array().unwrap().len(), 1);
    assert_eq!(report["meta"]["command"], "train");

    let csv = std::fs::read_to_string(run.join("report.csv")).unwrap();
    assert!(csv.starts_with("# {"));

    let conf = dir.path().join("confusion.csv");
    let eval = ok(&[
        "eval", "--checkpoint", p(&run.join("checkpoint.json")), "--graph", &graph, "--data",
        &data, "--out", p(&conf),
    ]);
    assert_eq!(value(&eval, "accuracy"), reported);
    assert_eq!(value(&eval, "samples"), 100.0);

    // confusion rows sum to the per-class test counts
    let ds = Dataset::load(Path::new(&data)).unwrap();
    let mut per_class = vec![0usize; ds.classes];
    for &i in &ds.splits.test {
        per_class[ds.samples[i].label] += 1;
    }
    let body = std::fs::read_to_string(&conf).unwrap();
    let rows: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), ds.classes);
    for (c, row) in rows.iter().enumerate() {
        let cells: Vec<usize> = row.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(cells.iter().sum::<usize>(), per_class[c]);
    }
}

#[test]
fn zero_readout_predicts_uniformly() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, data) = fixture(dir.path());
    let run = dir.path().join("run");
    ok(&[
        "train", "--graph", &graph, "--data", &data, "--epochs", "1", "--kind", "rsn",
        "--out-dir", p(&run),
    ]);
    let path = run.join("checkpoint.json");
    let mut ckpt = Checkpoint::load(&path).unwrap();
    let model = ckpt.model().unwrap();
    let readout = model.param_count().readout;
    let len = ckpt.params.len();
    ckpt.params[len - readout..].iter_mut().for_each(|v| *v = 0.0);
    ckpt.save(&path).unwrap();

    let eval = ok(&["eval", "--checkpoint", p(&path), "--graph", &graph, "--data", &data]);
    let loss = value(&eval, "mean_loss");
    assert!((loss - 5f64.ln()).abs() < 1e-12, "{loss}");
    let acc = value(&eval, "accuracy");
    assert!((acc - 0.2).abs() <= 0.1, "{acc}");
}

#[test]
fn training_learns_short_diffusions() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let data = dir.path().join("d.json");
    ok(&["gen-graph", "--seed", "3", "--out", p(&graph)]);
    ok(&[
        "gen-data", "--graph", p(&graph), "--n-train", "400", "--n-val", "100", "--n-test", "200",
        "--t-max", "2", "--seed", "4", "--out", p(&data),
    ]);
    for kind in ["gcnn", "rsn", "lssm"] {
        let run = dir.path().join(kind);
        let text = ok(&[
            "train", "--graph", p(&graph), "--data", p(&data), "--epochs", "15", "--batch-size",
            "20", "--lr", "0.01", "--kind", kind, "--out-dir", p(&run),
        ]);
        let acc = value(&text.replace("; ", "\n"), "test_accuracy");
        assert!(acc > 0.9, "{kind}: {acc}");
    }
}

#[test]
fn gradcheck_passes_and_detects_a_sign_flip() {
    let text = ok(&["gradcheck", "--instances", "2"]);
    assert!(text.contains("PASS"));
    let o = shiftnet(&["gradcheck", "--instances", "1", "--kind", "gcnn", "--inject-sign-flip"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn gradcheck_runs_long_lssm_recursions() {
    let text = ok(&["gradcheck", "--kind", "lssm", "--order", "8", "--instances", "1"]);
    assert!(text.contains("lssm"));
}

#[test]
fn diagnose_classifies_regimes_and_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    ok(&["gen-graph", "--out", p(&graph)]);

    let text = ok(&["diagnose", "--graph", p(&graph), "--order", "20", "--unnormalized"]);
    assert!(text.contains("classification exploding"), "{text}");

    let csv = dir.path().join("trace.csv");
    let text = ok(&[
        "diagnose", "--graph", p(&graph), "--order", "12", "--input", "dominant", "--out", p(&csv),
    ]);
    assert!(text.contains("classification marginal"), "{text}");
    let body = std::fs::read_to_string(&csv).unwrap();
    let rows = body.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 13);
    assert!(csv.with_extension("json").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"n": 40, "c": 4, "seed": 5}"#).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["--config", p(&config), "gen-graph", "--out", p(&a)]);
    ok(&["--config", p(&config), "gen-graph", "--n", "48", "--out", p(&b)]);
    assert_eq!(Graph::load(&a).unwrap().n(), 40);
    assert_eq!(Graph::load(&b).unwrap().n(), 48);

    std::fs::write(&config, r#"{"nodes": 40}"#).unwrap();
    let o = shiftnet(&["--config", p(&config), "gen-graph", "--out", p(&a)]);
    assert_eq!(o.status.code(), Some(1));
}
