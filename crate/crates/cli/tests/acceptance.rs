//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use oncograph::autodiff::Tensor;
use oncograph::baselines::{BoostConfig, DecisionTree, GradientBoosting, NaiveBayes, TreeConfig};
use oncograph::bench::ModelId;
use oncograph::eval::{confusion, metrics, roc_curve, Averaging, ModelGroup};
use oncograph::gnn::{Activation, GnnModel, GraphContext, Mode, Operator};
use oncograph::graph::{chebyshev_apply, scaled_laplacian, LambdaMax};
use oncograph::ingest::{
    build_vocabulary, parse_report, read_cohort, render_report, write_cohort, CancerType, FeatureKey, FeatureKind,
    PatientRecord, SyntheticSpec, VocabularyConfig, DEFAULT_STOP_TERMS,
};
use rand::Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let g = six_node_graph();
    let ctx = GraphContext::new(&g).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (i, op) in Operator::ALL.into_iter().enumerate() {
        let mut model = GnnModel::new(small_config(op, 3), 4).map_err(|e| e.to_string())?;
        randomize(&mut model, &mut rng(100 + i as u64));
        let report = gnn_gradcheck(&model, &ctx, &SIX_NODE_LABELS, Mode::Eval);
        check!(
            report.passes(FD_TOLERANCE),
            "{} relative error {:.2e}",
            op.display_name(),
            report.max_rel_error
        );
        worst = worst.max(report.max_rel_error);
    }
    let report = mlp_gradcheck(g.features(), &SIX_NODE_LABELS, 3, 5);
    check!(report.passes(FD_TOLERANCE), "MLP relative error {:.2e}", report.max_rel_error);
    worst = worst.max(report.max_rel_error);
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("8 operators + MLP, max relative error {worst:.2e}, {secs:.2} s"))
}

fn spectral_oracle() -> Outcome {
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let n = r.gen_range(2..=10);
        let k = r.gen_range(1..=4);
        let g = random_graph(&mut r, n, 0.4, 3);
        let theta: Vec<Tensor> = (0..k).map(|_| uniform_tensor(&mut r, 3, 4, 1.0)).collect();
        let oracle = chebyshev_spectral_oracle(&g, g.features(), &theta);

        let l = scaled_laplacian(&g, LambdaMax::Exact).map_err(|e| e.to_string())?;
        let filtered = chebyshev_apply(&l, g.features(), &theta, k).map_err(|e| e.to_string())?;

        let mut cfg = small_config(Operator::Cheb, 4);
        cfg.k = Some(k);
        cfg.num_layers = 1;
        cfg.activation = Activation::Identity;
        let mut model = GnnModel::new(cfg, 3).map_err(|e| e.to_string())?;
        for (t, th) in theta.iter().enumerate() {
            model.set_param(&format!("conv0.weight{t}"), th.clone()).map_err(|e| e.to_string())?;
        }
        model.set_param("head.weight", Tensor::identity(4)).map_err(|e| e.to_string())?;
        let ctx = GraphContext::with_lambda_max(&g, LambdaMax::Exact).map_err(|e| e.to_string())?;
        let layer = model.logits(&ctx, ctx.features()).map_err(|e| e.to_string())?;

        let diff = filtered.max_abs_diff(&oracle).max(layer.max_abs_diff(&oracle));
        check!(diff <= 1e-6, "graph {trial} (n={n}, K={k}) differs by {diff:.2e}");
        worst = worst.max(diff);
    }
    Ok(format!("10 graphs, max abs diff {worst:.2e}"))
}

fn equivariance() -> Outcome {
    let mut r = rng(31);
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let g = random_graph(&mut r, 8, 0.35, 4);
        let perm = random_permutation(&mut r, 8);
        for op in Operator::ALL {
            let mut cfg = small_config(op, 3);
            cfg.num_layers = 2;
            let mut model = GnnModel::new(cfg, 4).map_err(|e| e.to_string())?;
            randomize(&mut model, &mut r);
            let err = equivariance_error(&model, &g, &perm);
            check!(err <= 1e-9, "graph {trial} {}: {err:.2e}", op.display_name());
            worst = worst.max(err);
        }
    }
    Ok(format!("5 graphs x 8 operators, max abs diff {worst:.2e}"))
}

fn attention_rows() -> Outcome {
    let mut r = rng(4);
    let mut graphs = vec![six_node_graph()];
    graphs.extend((0..10).map(|_| random_graph(&mut r, 9, 0.25, 4)));
    let mut worst = 0.0f64;
    let mut isolated = 0;
    for g in &graphs {
        let ctx = GraphContext::new(g).map_err(|e| e.to_string())?;
        let mut cfg = small_config(Operator::Gat, 3);
        cfg.num_layers = 2;
        let mut model = GnnModel::new(cfg, 4).map_err(|e| e.to_string())?;
        randomize(&mut model, &mut r);
        let att = model.attention(&ctx, ctx.features()).map_err(|e| e.to_string())?;
        let edges = ctx.attention_edges();
        for head in att.iter().flatten() {
            for i in 0..ctx.num_nodes() {
                let seg = edges.segment(i);
                let sum: f64 = head[seg.clone()].iter().sum();
                worst = worst.max((sum - 1.0).abs());
                if g.degree(i) == 0 {
                    check!(seg.len() == 1 && head[seg.start] == 1.0, "isolated node {i} weight {:?}", &head[seg]);
                    isolated += 1;
                }
            }
        }
    }
    check!(worst <= 1e-12, "row sum off by {worst:.2e}");
    check!(isolated > 0, "no isolated node was exercised");
    Ok(format!("{} graphs, max |row sum - 1| {worst:.2e}, {isolated} isolated-node rows exactly 1", graphs.len()))
}

fn metric_oracle() -> Outcome {
    let mut r = rng(1000);
    for trial in 0..1000 {
        let n = r.gen_range(1..60);
        let y_true: Vec<usize> = (0..n).map(|_| r.gen_range(0..7)).collect();
        let y_pred: Vec<usize> = y_true
            .iter()
            .map(|&t| if r.gen_bool(0.5) { t } else { r.gen_range(0..7) })
            .collect();
        let ours = metrics(&confusion(&y_true, &y_pred, 7).map_err(|e| e.to_string())?, Averaging::Macro)
            .map_err(|e| e.to_string())?;
        let oracle = brute_force_metrics(&y_true, &y_pred, 7);
        check!(
            ours.accuracy == oracle.accuracy
                && ours.precision == oracle.precision
                && ours.recall == oracle.recall
                && ours.f1 == oracle.f1,
            "vector {trial} differs"
        );
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(2..80);
        let mut pos: Vec<bool> = (0..n).map(|_| r.gen_bool(0.4)).collect();
        pos[0] = true;
        pos[1] = false;
        let col: Vec<f64> = pos
            .iter()
            .map(|&p| (r.gen_range(0..20) as f64 + if p { 5.0 } else { 0.0 }).min(20.0) / 20.0)
            .collect();
        let rows: Vec<Vec<f64>> = col.iter().map(|&p| vec![1.0 - p, p]).collect();
        let y: Vec<usize> = pos.iter().map(|&p| usize::from(p)).collect();
        let scores = Tensor::from_rows(&rows).map_err(|e| e.to_string())?;
        let auc = roc_curve(&scores, &y, 1).map_err(|e| e.to_string())?.ok_or("undefined curve")?.auc;
        worst = worst.max((auc - mann_whitney(&col, &pos)).abs());
    }
    check!(worst <= 1e-12, "AUC off by {worst:.2e}");
    Ok(format!("1000 label vectors exact, 100 AUC instances max diff {worst:.2e}"))
}

fn filtering_boundaries() -> Outcome {
    let cohort = |term: Option<(&str, usize)>, gene: Option<(&str, usize)>| -> Vec<PatientRecord> {
        (0..40)
            .map(|i| {
                let mut r = PatientRecord::new(format!("P{i:02}"), CancerType::Lung);
                if let Some((t, _)) = term.filter(|&(_, n)| i < n) {
                    r.phenotypes.insert(t.to_string());
                }
                if let Some((g, _)) = gene.filter(|&(_, n)| i < n) {
                    r.pathogenic.insert(g.to_string());
                }
                r
            })
            .collect()
    };
    let keys = |c: Vec<PatientRecord>| -> Vec<FeatureKey> {
        build_vocabulary(&c, &VocabularyConfig::default()).unwrap().keys().to_vec()
    };
    check!(keys(cohort(Some(("Fatigue", 19)), None)).is_empty(), "phenotype in 19 patients kept");
    check!(
        keys(cohort(Some(("Fatigue", 20)), None)) == vec![FeatureKey::new(FeatureKind::Phenotype, "Fatigue")],
        "phenotype in 20 patients dropped"
    );
    check!(keys(cohort(None, Some(("KRAS", 10)))).is_empty(), "gene in 10 patients kept");
    check!(
        keys(cohort(None, Some(("KRAS", 11)))) == vec![FeatureKey::new(FeatureKind::GenePathogenic, "KRAS")],
        "gene in 11 patients dropped"
    );
    for term in DEFAULT_STOP_TERMS {
        for variant in [term.to_string(), term.to_uppercase()] {
            check!(keys(cohort(Some((&variant, 40)), None)).is_empty(), "stop term {variant:?} kept");
        }
    }
    Ok("19 dropped / 20 kept, 10 dropped / 11 kept, 8 stop terms removed in any case".into())
}

fn round_trips() -> Outcome {
    let mut r = rng(17);
    let cohort: Vec<PatientRecord> = (0..100).map(|i| random_record(&mut r, i)).collect();
    for rec in &cohort {
        let parsed = parse_report(&render_report(rec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check!(
            parsed.patient_id.as_deref() == Some(rec.patient_id.as_str())
                && parsed.cancer_type == Some(rec.cancer_type)
                && parsed.pathogenic == rec.pathogenic
                && parsed.vus == rec.vus,
            "report of {} changed",
            rec.patient_id
        );
    }
    let mut buf = Vec::new();
    write_cohort(&mut buf, &cohort).map_err(|e| e.to_string())?;
    check!(read_cohort(buf.as_slice()).map_err(|e| e.to_string())? == cohort, "cohort file changed");
    Ok("100 records through report text and cohort file".into())
}

fn bench_run(out: &Path) -> Result<f64, String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_oncograph"))
        .args(["bench", "--models", "all", "--seed", "42", "--jobs", "1", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check!(o.status.success(), "bench exited with {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    Ok(secs)
}

fn parse_table(text: &str, ncols: usize) -> Vec<(String, Vec<(String, bool)>)> {
    text.lines()
        .filter(|l| !l.starts_with("Model") && !l.starts_with("---") && !l.trim().is_empty())
        .map(|l| {
            let tokens: Vec<&str> = l.split_whitespace().collect();
            let (name, cells) = tokens.split_at(tokens.len() - ncols);
            let cells = cells
                .iter()
                .map(|c| (c.trim_end_matches('*').to_string(), c.ends_with('*')))
                .collect();
            (name.join(" "), cells)
        })
        .collect()
}

/// Every printed cell must equal the run's value at the table precision and
/// carry the marker exactly when it is its group's column maximum.
fn check_table(
    table: &str,
    runs: &[(ModelId, Vec<f64>)],
    decimals: usize,
    ncols: usize,
) -> Result<(), String> {
    let rows = parse_table(table, ncols);
    check!(rows.len() == runs.len(), "{} rows for {} models", rows.len(), runs.len());
    for ((name, cells), (id, values)) in rows.iter().zip(runs) {
        check!(name == id.display_name(), "row {name:?} where {} was expected", id.display_name());
        for (c, ((text, marked), v)) in cells.iter().zip(values).enumerate() {
            let expected = format!("{v:.decimals$}");
            check!(*text == expected, "{name} column {c}: printed {text}, run has {expected}");
            let group_max = runs
                .iter()
                .filter(|(other, _)| other.group() == id.group())
                .map(|(_, vals)| format!("{:.decimals$}", vals[c]).parse::<f64>().unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let is_max = expected.parse::<f64>().unwrap() == group_max;
            check!(*marked == is_max, "{name} column {c}: marker {marked}, group maximum {is_max}");
        }
    }
    Ok(())
}

fn end_to_end(out: &Path) -> Outcome {
    let patients = SyntheticSpec::default().total_patients();
    let secs = bench_run(out)?;
    check!(secs < 600.0, "run took {secs:.0} s");
    let results = fs::read_to_string(out.join("results.jsonl")).map_err(|e| e.to_string())?;
    let mut runs: Vec<(ModelId, Value)> = Vec::new();
    for line in results.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let id: ModelId = v["model"].as_str().ok_or("model key")?.parse().map_err(|e| format!("{e}"))?;
        check!(v["status"] == "ok", "{} failed: {}", id.display_name(), v["error"]);
        runs.push((id, v));
    }
    check!(runs.len() == 13, "{} runs instead of 13", runs.len());
    let mut lowest_gnn = f64::INFINITY;
    for (id, v) in &runs {
        if id.group() == ModelGroup::Gnn {
            let acc = v["metrics"]["accuracy"].as_f64().ok_or("accuracy")?;
            check!(acc >= 0.85, "{} accuracy {acc:.3}", id.display_name());
            lowest_gnn = lowest_gnn.min(acc);
        }
    }
    let metric = |v: &Value, k: &str| v["metrics"][k].as_f64().unwrap();
    let overall: Vec<(ModelId, Vec<f64>)> = runs
        .iter()
        .map(|(id, v)| (*id, ["accuracy", "precision", "recall", "f1"].iter().map(|k| metric(v, k)).collect()))
        .collect();
    let per_class: Vec<(ModelId, Vec<f64>)> = runs
        .iter()
        .map(|(id, v)| {
            let f1s = v["metrics"]["per_class_f1"].as_array().unwrap();
            (*id, f1s.iter().map(|x| x.as_f64().unwrap()).collect())
        })
        .collect();
    let table1 = fs::read_to_string(out.join("table1.txt")).map_err(|e| e.to_string())?;
    let table2 = fs::read_to_string(out.join("table2.txt")).map_err(|e| e.to_string())?;
    check_table(&table1, &overall, 3, 4).map_err(|e| format!("table 1: {e}"))?;
    check_table(&table2, &per_class, 2, 7).map_err(|e| format!("table 2: {e}"))?;
    let header = table2.lines().next().unwrap_or_default();
    for class in CancerType::ALL {
        check!(header.contains(class.display_name()), "table 2 lacks {}", class.display_name());
    }

    let summary = fs::read_to_string(out.join("summary.txt")).map_err(|e| e.to_string())?;
    let mean = |g: ModelGroup| {
        let accs: Vec<f64> = overall.iter().filter(|(id, _)| id.group() == g).map(|(_, v)| v[0]).collect();
        accs.iter().sum::<f64>() / accs.len() as f64
    };
    let (gnn, base) = (mean(ModelGroup::Gnn), mean(ModelGroup::Baseline));
    let line = format!("accuracy   {gnn:.3} vs {base:.3}");
    check!(summary.contains("GNN vs baseline") && summary.contains(&line), "summary lacks {line:?}");
    Ok(format!(
        "{patients} patients (class counts sum to 784, not the stated 794), 13 models in {secs:.0} s, \
         lowest GNN accuracy {lowest_gnn:.3}, table maxima verified, mean accuracy GNN {gnn:.3} vs baseline {base:.3}"
    ))
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    bench_run(second)?;
    let mut files = vec!["results.jsonl".to_string(), "table1.txt".into(), "table2.txt".into(), "summary.txt".into()];
    let mut roc: Vec<String> = fs::read_dir(first.join("roc"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| format!("roc/{}", e.file_name().to_string_lossy()))
        .collect();
    roc.sort();
    files.extend(roc);
    for f in &files {
        let a = fs::read(first.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(second.join(f)).map_err(|e| format!("{f}: {e}"))?;
        check!(a == b, "{f} differs between runs");
    }
    Ok(format!("{} result files byte-identical across two runs", files.len()))
}

fn baseline_oracles() -> Outcome {
    let mut r = rng(404);
    for trial in 0..50 {
        let rows = r.gen_range(12..60);
        let (x, y) = class_correlated_binary(&mut r, rows, 9, 3);
        let tree = DecisionTree::fit(&bool_rows_to_tensor(&x), &y, 3, &TreeConfig::default()).map_err(|e| e.to_string())?;
        let oracle = best_gini_split(&x, &y, 3).map(|(f, _)| f);
        check!(tree.root_feature() == oracle, "instance {trial}: root {:?}, scan {oracle:?}", tree.root_feature());
    }
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let rows = r.gen_range(10..40);
        let (x, y) = class_correlated_binary(&mut r, rows, 6, 4);
        let nb = NaiveBayes::fit(&bool_rows_to_tensor(&x), &y, 4).map_err(|e| e.to_string())?;
        let probes = random_binary(&mut r, 8, 6, 0.4);
        let probs = nb.predict_proba(&bool_rows_to_tensor(&probes)).map_err(|e| e.to_string())?;
        for (i, probe) in probes.iter().enumerate() {
            for (c, p) in naive_bayes_oracle(&x, &y, 4, probe).into_iter().enumerate() {
                worst = worst.max((probs.get(i, c) - p).abs());
            }
        }
    }
    check!(worst <= 1e-12, "naive Bayes posterior off by {worst:.2e}");
    let (x, y) = class_correlated_binary(&mut rng(606), 70, 10, 5);
    let cfg = BoostConfig {
        n_rounds: 50,
        ..BoostConfig::default()
    };
    let boost = GradientBoosting::fit(&bool_rows_to_tensor(&x), &y, 5, &cfg).map_err(|e| e.to_string())?;
    let losses = &boost.train_log_loss;
    check!(losses.len() == 51, "{} loss entries", losses.len());
    check!(losses.windows(2).all(|w| w[1] <= w[0]), "log-loss increased: {losses:?}");
    Ok(format!(
        "50 root splits match, posterior max diff {worst:.2e}, log-loss {:.4} -> {:.4} over 50 rounds",
        losses[0],
        losses[50]
    ))
}

fn run(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {n}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {n}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::TempDir::new().expect("temporary directory");
    let (first, second) = (tmp.path().join("run1"), tmp.path().join("run2"));
    let results = [
        run(1, gradient_suite),
        run(2, spectral_oracle),
        run(3, equivariance),
        run(4, attention_rows),
        run(5, metric_oracle),
        run(6, filtering_boundaries),
        run(7, round_trips),
        run(8, || end_to_end(&first)),
        run(9, || determinism(&first, &second)),
        run(10, baseline_oracles),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
