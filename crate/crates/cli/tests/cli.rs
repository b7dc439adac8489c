use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn oncograph(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oncograph"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[synthetic]
seed = 3
signature_features_per_class = 4
n_phenotypes = 30
n_genes = 12
p_signature = 0.8
p_background = 0.05
[synthetic.class_counts]
lung = 12
prostate = 10
breast = 10
ovarian = 10
pancreas = 10
colon_rectum = 10
liver = 10
[bench.vocabulary]
phenotype_threshold = 3
gene_threshold = 2
[bench.gnn]
epochs = 15
hidden_dim = 8
heads = 2
[bench.baselines.mlp]
epochs = 15
[bench.baselines.forest]
n_trees = 5
[bench.baselines.boost]
n_rounds = 5
"#;

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn generate_defaults_and_overrides() {
    let tmp = TempDir::new().unwrap();
    let o = oncograph(&["generate", "--out", "a"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("a/cohort.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 784);

    let o = oncograph(&["generate", "--out", "b"], tmp.path());
    assert!(o.status.success());
    assert_eq!(text, fs::read_to_string(tmp.path().join("b/cohort.jsonl")).unwrap());
    assert_eq!(
        fs::read(tmp.path().join("a/generate-manifest.json")).unwrap(),
        fs::read(tmp.path().join("b/generate-manifest.json")).unwrap()
    );

    let o = oncograph(&["generate", "--out", "c", "--count", "lung=5"], tmp.path());
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("c/cohort.jsonl")).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("\"lung\"")).count(), 5);
}

#[test]
fn generate_rejects_invalid_spec() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[synthetic]\np_signature = 1.5\n").unwrap();
    let o = oncograph(&["generate", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = oncograph(&["generate", "--count", "moon=3"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ingest_round_trip_and_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = oncograph(&["generate", "--config", &cfg, "--out", "gen", "--render-reports"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = oncograph(
        &["ingest", "--reports", "gen/reports", "--phenotypes", "gen/phenotypes.tsv", "--out", "ing"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(tmp.path().join("gen/cohort.jsonl")).unwrap(),
        fs::read_to_string(tmp.path().join("ing/cohort.jsonl")).unwrap()
    );
    assert!(tmp.path().join("ing/vocabulary.tsv").exists());
    assert!(tmp.path().join("ing/skipped.tsv").exists());

    fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = oncograph(
        &["ingest", "--reports", "empty", "--phenotypes", "gen/phenotypes.tsv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no reports found"));

    fs::write(tmp.path().join("gen/reports/zz.txt"), "PATIENT ID: X\nnothing here\n").unwrap();
    let o = oncograph(
        &["ingest", "--reports", "gen/reports", "--phenotypes", "gen/phenotypes.tsv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("zz.txt"));
}

#[test]
fn single_report_gives_one_record() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir(tmp.path().join("r")).unwrap();
    fs::write(
        tmp.path().join("r/a.txt"),
        "PATIENT ID: A1\nGENOMIC FINDINGS\n  TP53 alteration\n",
    )
    .unwrap();
    fs::write(tmp.path().join("ph.tsv"), "A1\tlung\tcough;fatigue\n").unwrap();
    let o = oncograph(&["ingest", "--reports", "r", "--phenotypes", "ph.tsv", "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let cohort = fs::read_to_string(tmp.path().join("o/cohort.jsonl")).unwrap();
    assert_eq!(cohort.lines().count(), 1);
    assert!(cohort.contains("TP53"));
    assert!(fs::read_to_string(tmp.path().join("o/skipped.tsv")).unwrap().contains("A1"));
}

#[test]
fn bench_single_model_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = oncograph(&["bench", "--config", &cfg, "--models", "gcn", "--out", "res"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("res/table1.txt")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with("---") && !l.starts_with("Model")).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("GCN"));
    assert_eq!(rows[0].matches('*').count(), 4);
    let results = fs::read_to_string(tmp.path().join("res/results.jsonl")).unwrap();
    assert_eq!(results.lines().count(), 1);
    assert!(!results.contains("seconds"));
    assert!(tmp.path().join("res/roc/gcn-seed42.tsv").exists());
    assert!(stdout(&o).contains("GNN vs baseline"));
}

#[test]
fn bench_seed_sweep_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = oncograph(
        &["bench", "--config", &cfg, "--models", "gcn,nb", "--seeds", "1,2,3", "--out", "res"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let results = fs::read_to_string(tmp.path().join("res/results.jsonl")).unwrap();
    for key in ["\"gcn\"", "\"naive-bayes\""] {
        assert_eq!(results.lines().filter(|l| l.contains(key)).count(), 3);
    }
    let summary = fs::read_to_string(tmp.path().join("res/summary.txt")).unwrap();
    assert!(summary.contains("over 3 seeds"));
    assert_eq!(summary.lines().filter(|l| l.contains(" f1 ") && l.contains('±')).count(), 2);
}

#[test]
fn bench_parallel_matches_serial_and_repeats() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let models = "gcn,gat,sgc,rf,mlp";
    for (out, jobs) in [("s", "1"), ("p", "4"), ("p2", "4")] {
        let o = oncograph(
            &["bench", "--config", &cfg, "--models", models, "--jobs", jobs, "--out", out],
            tmp.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("results.jsonl")).unwrap();
    assert_eq!(read("s"), read("p"));
    assert_eq!(read("p"), read("p2"));
    let t = |d: &str| fs::read(tmp.path().join(d).join("table2.txt")).unwrap();
    assert_eq!(t("s"), t("p"));
}

#[test]
fn bench_partial_failure_exit_code() {
    let tmp = TempDir::new().unwrap();
    // A huge learning rate makes the GNN diverge while the forest is unaffected.
    let cfg = SMALL.replace("[bench.gnn]\n", "[bench.gnn]\nlr = 1e300\n");
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = oncograph(&["bench", "--config", "c.toml", "--models", "gcn,rf", "--out", "res"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let results = fs::read_to_string(tmp.path().join("res/results.jsonl")).unwrap();
    assert!(results.lines().any(|l| l.contains("\"gcn\"") && l.contains("\"failed\"")));
    assert!(results.lines().any(|l| l.contains("\"random-forest\"") && l.contains("\"ok\"")));
    assert!(fs::read_to_string(tmp.path().join("res/table1.txt")).unwrap().contains("Random Forest"));
}

#[test]
fn bench_configuration_errors() {
    let tmp = TempDir::new().unwrap();
    let o = oncograph(&["bench", "--models", "bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = oncograph(&["bench", "--split", "0.5,0.5,0.5"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = oncograph(&["bench", "--config", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(tmp.path().join("u.toml"), "[bench]\nunknown = 1\n").unwrap();
    let o = oncograph(&["bench", "--config", "u.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(tmp.path().join("bad.jsonl"), "{not json}\n").unwrap();
    let o = oncograph(&["bench", "--cohort", "bad.jsonl"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn inspect_graph_reports_and_exports() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = oncograph(&["inspect-graph", "--config", &cfg, "--out", "g"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("patients        72"));
    assert!(text.contains("lambda_max"));
    let nodes = fs::read_to_string(tmp.path().join("g/nodes.tsv")).unwrap();
    assert!(nodes.lines().filter(|l| l.contains("\tpatient\t")).count() <= 72);
    assert!(tmp.path().join("g/edges.tsv").exists());
}
