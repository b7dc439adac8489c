//! End-to-end benchmark runs: vocabulary, graph, split, all selected models,
//! metrics and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::baselines::{Baseline, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::eval::{
    confusion, evaluate_probabilities, render_tables, stratified_split, Averaging, ConfusionMatrix,
    MaxScope, MetricsReport, ModelGroup, RenderedTables, RocCurve, SplitRatios, TableEntry,
};
use crate::gnn::{predict, train_model, GnnModel, GraphContext, ModelConfig, Operator};
use crate::graph::{build_feature_graph, LambdaMax};
use crate::ingest::{build_vocabulary, CancerType, PatientRecord, VocabularyConfig};
use crate::util::sha256_hex;
use crate::NUM_CLASSES;

/// One of the thirteen benchmarked models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelId {
    Gnn(Operator),
    Baseline(BaselineKind),
}

impl ModelId {
    /// All models in table order: GNNs then baselines, each alphabetical by
    /// display name.
    pub fn all() -> Vec<ModelId> {
        let mut gnn: Vec<ModelId> = Operator::ALL.into_iter().map(ModelId::Gnn).collect();
        gnn.sort_by_key(|m| m.display_name().to_ascii_lowercase());
        let mut base: Vec<ModelId> = BaselineKind::ALL.into_iter().map(ModelId::Baseline).collect();
        base.sort_by_key(|m| m.display_name().to_ascii_lowercase());
        gnn.extend(base);
        gnn
    }

    pub fn key(self) -> &'static str {
        match self {
            ModelId::Gnn(o) => o.key(),
            ModelId::Baseline(b) => b.key(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelId::Gnn(o) => o.display_name(),
            ModelId::Baseline(b) => b.display_name(),
        }
    }

    pub fn group(self) -> ModelGroup {
        match self {
            ModelId::Gnn(_) => ModelGroup::Gnn,
            ModelId::Baseline(_) => ModelGroup::Baseline,
        }
    }

    fn table_rank(self) -> usize {
        ModelId::all().iter().position(|m| *m == self).unwrap_or(usize::MAX)
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Operator::from_key(s)
            .map(ModelId::Gnn)
            .or_else(|| BaselineKind::from_key(s).map(ModelId::Baseline))
            .ok_or_else(|| Error::config(format!("unknown model {s:?}")))
    }
}

impl Serialize for ModelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated model list; `all`, `gnn` and `baselines` expand
/// to groups. Duplicates are dropped and the result is in table order.
pub fn parse_model_list(s: &str) -> Result<Vec<ModelId>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.to_ascii_lowercase().as_str() {
            "all" => out.extend(ModelId::all()),
            "gnn" | "gnns" => out.extend(ModelId::all().into_iter().filter(|m| m.group() == ModelGroup::Gnn)),
            "baseline" | "baselines" => {
                out.extend(ModelId::all().into_iter().filter(|m| m.group() == ModelGroup::Baseline))
            }
            _ => out.push(part.parse()?),
        }
    }
    out.sort_by_key(|m| m.table_rank());
    out.dedup();
    if out.is_empty() {
        return Err(Error::config("no models selected"));
    }
    Ok(out)
}

/// Hyperparameters shared by all GNNs; per-operator polynomial orders are
/// separate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnSettings {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub heads: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub cheb_k: usize,
    pub tagcn_k: usize,
    pub sgc_k: usize,
    /// Laplacian scale for ChebNet.
    pub lambda_max: LambdaMax,
}

impl Default for GnnSettings {
    fn default() -> Self {
        let d = ModelConfig::new(Operator::Gcn);
        GnnSettings {
            hidden_dim: d.hidden_dim,
            num_layers: d.num_layers,
            heads: d.heads,
            dropout: d.dropout,
            lr: d.lr,
            weight_decay: d.weight_decay,
            epochs: d.epochs,
            patience: d.patience,
            cheb_k: Operator::Cheb.default_order(),
            tagcn_k: Operator::Tagcn.default_order(),
            sgc_k: Operator::Sgc.default_order(),
            lambda_max: LambdaMax::default(),
        }
    }
}

impl GnnSettings {
    pub fn model_config(&self, op: Operator, seed: u64) -> ModelConfig {
        let mut c = ModelConfig::new(op);
        c.hidden_dim = self.hidden_dim;
        c.num_layers = self.num_layers;
        c.heads = self.heads;
        c.dropout = self.dropout;
        c.lr = self.lr;
        c.weight_decay = self.weight_decay;
        c.epochs = self.epochs;
        c.patience = self.patience;
        c.k = match op {
            Operator::Cheb => Some(self.cheb_k),
            Operator::Tagcn => Some(self.tagcn_k),
            Operator::Sgc => Some(self.sgc_k),
            _ => None,
        };
        c.seed = seed;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub models: Vec<ModelId>,
    pub vocabulary: VocabularyConfig,
    pub split: SplitRatios,
    pub seeds: Vec<u64>,
    pub gnn: GnnSettings,
    pub baselines: BaselineConfig,
    pub averaging: Averaging,
    pub max_scope: MaxScope,
    /// Worker threads for model runs; 0 uses every core. Never affects
    /// results.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            models: ModelId::all(),
            vocabulary: VocabularyConfig::default(),
            split: SplitRatios::default(),
            seeds: vec![42],
            gnn: GnnSettings::default(),
            baselines: BaselineConfig::default(),
            averaging: Averaging::Macro,
            max_scope: MaxScope::Group,
            jobs: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::config("no models selected"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("no seeds given"));
        }
        self.split.validate()?;
        for m in &self.models {
            if let ModelId::Gnn(op) = m {
                self.gnn.model_config(*op, 0).validate()?;
            }
        }
        Ok(())
    }

    /// Hash of everything that influences results (the worker count does
    /// not).
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.jobs = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(text.as_bytes())[..16].to_string()
    }
}

/// Outcome of one model under one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelId,
    pub seed: u64,
    pub config_hash: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_run: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub roc: Vec<Option<RocCurve>>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cohort_size: usize,
    pub vocab_hash: String,
    pub vocab_size: usize,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub skipped_patients: Vec<String>,
    pub split_sizes: BTreeMap<u64, SplitSizes>,
    pub warnings: Vec<String>,
    pub runs: Vec<RunOutcome>,
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

pub fn mean_sd(v: &[f64]) -> MeanSd {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanSd { mean, sd }
}

struct Prepared {
    ctx: GraphContext,
    /// Patient node ids in label order.
    patient_nodes: Vec<usize>,
    labels: Vec<usize>,
    patient_features: Tensor,
}

fn prepare(cohort: &[PatientRecord], config: &BenchConfig) -> Result<(Prepared, BenchReport)> {
    let vocab = build_vocabulary(cohort, &config.vocabulary)?;
    let graph = build_feature_graph(cohort, &vocab, true)?;
    let patient_nodes = graph.labeled_nodes();
    if patient_nodes.is_empty() {
        return Err(Error::data("no patient survived vocabulary filtering"));
    }
    let labels: Vec<usize> = patient_nodes
        .iter()
        .map(|&i| graph.labels()[i].expect("labeled node"))
        .collect();
    let patient_features = graph.features().select_rows(&patient_nodes)?;
    let ctx = GraphContext::with_lambda_max(&graph, config.gnn.lambda_max)?;
    let mut warnings = Vec::new();
    if ctx.scaled_laplacian().fell_back {
        warnings.push("power iteration did not converge; lambda_max = 2".to_string());
    }
    if !graph.skipped_patients().is_empty() {
        warnings.push(format!(
            "{} patients had no features after filtering and were skipped",
            graph.skipped_patients().len()
        ));
    }
    let report = BenchReport {
        config: config.clone(),
        cohort_size: cohort.len(),
        vocab_hash: vocab.hash(),
        vocab_size: vocab.len(),
        graph_nodes: graph.num_nodes(),
        graph_edges: graph.edges().len(),
        skipped_patients: graph.skipped_patients().to_vec(),
        split_sizes: BTreeMap::new(),
        warnings,
        runs: Vec::new(),
    };
    Ok((
        Prepared {
            ctx,
            patient_nodes,
            labels,
            patient_features,
        },
        report,
    ))
}

struct SplitView {
    /// Positions into the patient list.
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn run_one(
    p: &Prepared,
    split: &SplitView,
    model: ModelId,
    seed: u64,
    config: &BenchConfig,
) -> Result<(MetricsReport, ConfusionMatrix, Vec<Option<RocCurve>>, Option<(usize, Option<usize>)>)> {
    let y_test: Vec<usize> = split.test.iter().map(|&i| p.labels[i]).collect();
    let (probs, epochs) = match model {
        ModelId::Gnn(op) => {
            let nodes = |pos: &[usize]| pos.iter().map(|&i| p.patient_nodes[i]).collect::<Vec<_>>();
            let mc = config.gnn.model_config(op, seed);
            let init = GnnModel::new(mc, p.ctx.num_features())?;
            let trained = train_model(&p.ctx, init, &nodes(&split.train), &nodes(&split.val))?;
            let pred = predict(&trained.model, &p.ctx, &nodes(&split.test))?;
            (pred.probabilities, Some((trained.trace.len(), trained.best_epoch)))
        }
        ModelId::Baseline(kind) => {
            let rows = |pos: &[usize]| p.patient_features.select_rows(pos);
            let labels = |pos: &[usize]| pos.iter().map(|&i| p.labels[i]).collect::<Vec<_>>();
            let m = Baseline::fit(
                kind,
                &config.baselines,
                &rows(&split.train)?,
                &labels(&split.train),
                &rows(&split.val)?,
                &labels(&split.val),
                NUM_CLASSES,
                seed,
            )?;
            let epochs = match &m {
                Baseline::Mlp(mlp) => Some((
                    mlp.trace.len(),
                    mlp.trace
                        .iter()
                        .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
                        .map(|r| r.epoch),
                )),
                _ => None,
            };
            (m.predict_proba(&rows(&split.test)?)?, epochs)
        }
    };
    let (metrics, roc) = evaluate_probabilities(&probs, &y_test, NUM_CLASSES, config.averaging)?;
    let cm = confusion(&y_test, &probs.argmax_rows(), NUM_CLASSES)?;
    Ok((metrics, cm, roc, epochs))
}

/// Trains and scores every configured model for every seed. A failing model
/// is recorded and the run continues.
pub fn run_benchmark(cohort: &[PatientRecord], config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let (prepared, mut report) = prepare(cohort, config)?;
    let hash = config.config_hash();

    let mut splits = Vec::new();
    for &seed in &config.seeds {
        let masks = stratified_split(&prepared.labels, config.split, seed)?;
        report.warnings.extend(masks.warnings.iter().cloned());
        if masks.test.is_empty() || masks.val.is_empty() {
            return Err(Error::config("split leaves the validation or test set empty"));
        }
        report.split_sizes.insert(
            seed,
            SplitSizes {
                train: masks.train.len(),
                val: masks.val.len(),
                test: masks.test.len(),
            },
        );
        splits.push((
            seed,
            SplitView {
                train: masks.train,
                val: masks.val,
                test: masks.test,
            },
        ));
    }

    let tasks: Vec<(usize, ModelId)> = (0..splits.len())
        .flat_map(|s| config.models.iter().map(move |&m| (s, m)))
        .collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(s, model)| {
                let (seed, split) = &splits[s];
                let started = std::time::Instant::now();
                info!("training {} (seed {seed})", model.key());
                let result = run_one(&prepared, split, model, *seed, config);
                let seconds = started.elapsed().as_secs_f64();
                let mut record = RunRecord {
                    model,
                    seed: *seed,
                    config_hash: hash.clone(),
                    status: RunStatus::Ok,
                    error: None,
                    metrics: None,
                    confusion: None,
                    epochs_run: None,
                    best_epoch: None,
                };
                let roc = match result {
                    Ok((metrics, cm, roc, epochs)) => {
                        record.metrics = Some(metrics);
                        record.confusion = Some(cm);
                        if let Some((run, best)) = epochs {
                            record.epochs_run = Some(run);
                            record.best_epoch = best;
                        }
                        roc
                    }
                    Err(e) => {
                        warn!("{} failed (seed {seed}): {e}", model.key());
                        record.status = RunStatus::Failed;
                        record.error = Some(e.to_string());
                        Vec::new()
                    }
                };
                RunOutcome {
                    record,
                    roc,
                    seconds,
                }
            })
            .collect::<Vec<_>>()
    };
    report.runs = if config.jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(work)
    };
    report
        .runs
        .sort_by_key(|r| (r.record.model.table_rank(), config.seeds.iter().position(|&s| s == r.record.seed)));
    Ok(report)
}

impl BenchReport {
    pub fn failures(&self) -> Vec<&RunRecord> {
        self.runs
            .iter()
            .map(|r| &r.record)
            .filter(|r| r.status == RunStatus::Failed)
            .collect()
    }

    /// One JSON line per (model, seed) in table order. Contains no timings.
    pub fn results_jsonl(&self) -> String {
        self.runs
            .iter()
            .map(|r| serde_json::to_string(&r.record).expect("record serializes") + "\n")
            .collect()
    }

    /// Per-model metrics averaged over seeds, successful runs only.
    pub fn mean_reports(&self) -> Vec<(ModelId, MetricsReport)> {
        let mut by_model: BTreeMap<usize, (ModelId, Vec<&MetricsReport>)> = BTreeMap::new();
        for r in &self.runs {
            if let Some(m) = &r.record.metrics {
                by_model
                    .entry(r.record.model.table_rank())
                    .or_insert_with(|| (r.record.model, Vec::new()))
                    .1
                    .push(m);
            }
        }
        by_model
            .into_values()
            .map(|(id, reports)| (id, average_reports(&reports)))
            .collect()
    }

    pub fn tables(&self) -> RenderedTables {
        let means = self.mean_reports();
        let entries: Vec<TableEntry<'_>> = means
            .iter()
            .map(|(id, r)| TableEntry {
                name: id.display_name(),
                group: id.group(),
                report: r,
            })
            .collect();
        render_tables(&entries, self.config.max_scope)
    }

    /// Mean of each overall metric within each model group, from the
    /// per-model means.
    pub fn group_means(&self) -> BTreeMap<ModelGroup, [f64; 4]> {
        let mut acc: BTreeMap<ModelGroup, (usize, [f64; 4])> = BTreeMap::new();
        for (id, r) in self.mean_reports() {
            let e = acc.entry(id.group()).or_insert((0, [0.0; 4]));
            e.0 += 1;
            for (s, v) in e.1.iter_mut().zip([r.accuracy, r.precision, r.recall, r.f1]) {
                *s += v;
            }
        }
        acc.into_iter()
            .map(|(g, (n, s))| (g, s.map(|v| v / n as f64)))
            .collect()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let means = self.group_means();
        let names = ["accuracy", "precision", "recall", "F1"];
        let _ = writeln!(out, "Mean over models (GNN vs baseline):");
        for (i, name) in names.iter().enumerate() {
            let g = means.get(&ModelGroup::Gnn).map(|v| format!("{:.3}", v[i]));
            let b = means.get(&ModelGroup::Baseline).map(|v| format!("{:.3}", v[i]));
            let _ = writeln!(
                out,
                "  {name:<10} {} vs {}",
                g.unwrap_or_else(|| "n/a".into()),
                b.unwrap_or_else(|| "n/a".into())
            );
        }
        if self.config.seeds.len() > 1 {
            let _ = writeln!(out, "\nPer-model mean ± sd over {} seeds:", self.config.seeds.len());
            for id in &self.config.models {
                let runs: Vec<&MetricsReport> = self
                    .runs
                    .iter()
                    .filter(|r| r.record.model == *id)
                    .filter_map(|r| r.record.metrics.as_ref())
                    .collect();
                if runs.is_empty() {
                    continue;
                }
                let _ = write!(out, "  {:<24}", id.display_name());
                for (name, f) in [
                    ("acc", (|r: &MetricsReport| r.accuracy) as fn(&MetricsReport) -> f64),
                    ("prec", |r| r.precision),
                    ("rec", |r| r.recall),
                    ("f1", |r| r.f1),
                ] {
                    let v: Vec<f64> = runs.iter().map(|r| f(r)).collect();
                    let ms = mean_sd(&v);
                    let _ = write!(out, " {name} {:.3}±{:.3}", ms.mean, ms.sd);
                }
                out.push('\n');
            }
        }
        let failures = self.failures();
        if !failures.is_empty() {
            let _ = writeln!(out, "\nFailed runs:");
            for f in failures {
                let _ = writeln!(
                    out,
                    "  {} (seed {}): {}",
                    f.model.key(),
                    f.seed,
                    f.error.as_deref().unwrap_or("")
                );
            }
        }
        out
    }

    /// ROC points as TSV: `class\tfpr\ttpr`.
    pub fn roc_tsv(outcome: &RunOutcome) -> String {
        let mut out = String::from("class\tfpr\ttpr\n");
        for (c, curve) in outcome.roc.iter().enumerate() {
            let Some(curve) = curve else { continue };
            let key = CancerType::from_index(c).map_or_else(|| c.to_string(), |t| t.key().to_string());
            for (fpr, tpr) in &curve.points {
                let _ = writeln!(out, "{key}\t{fpr}\t{tpr}");
            }
        }
        out
    }

    /// Writes `results.jsonl`, `table1.txt`, `table2.txt`, `summary.txt`,
    /// `roc/<model>-seed<seed>.tsv` and `manifest.json` into `dir`. Only the
    /// manifest carries timings.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("roc"))?;
        fs::write(dir.join("results.jsonl"), self.results_jsonl())?;
        let tables = self.tables();
        fs::write(dir.join("table1.txt"), &tables.overall)?;
        fs::write(dir.join("table2.txt"), &tables.per_class)?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        for r in &self.runs {
            if r.record.status == RunStatus::Ok {
                let name = format!("{}-seed{}.tsv", r.record.model.key(), r.record.seed);
                fs::write(dir.join("roc").join(name), Self::roc_tsv(r))?;
            }
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest())?)?;
        Ok(())
    }

    pub fn manifest(&self) -> serde_json::Value {
        let timings: Vec<serde_json::Value> = self
            .runs
            .iter()
            .map(|r| {
                serde_json::json!({
                    "model": r.record.model,
                    "seed": r.record.seed,
                    "seconds": r.seconds,
                })
            })
            .collect();
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        serde_json::json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "created_unix": created,
            "config": self.config,
            "config_hash": self.config.config_hash(),
            "cohort_size": self.cohort_size,
            "vocab_hash": self.vocab_hash,
            "vocab_size": self.vocab_size,
            "graph_nodes": self.graph_nodes,
            "graph_edges": self.graph_edges,
            "skipped_patients": self.skipped_patients,
            "split_sizes": self.split_sizes,
            "warnings": self.warnings,
            "timings": timings,
        })
    }
}

fn average_reports(reports: &[&MetricsReport]) -> MetricsReport {
    let n = reports.len() as f64;
    let avg = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    let avg_vec = |f: &dyn Fn(&MetricsReport) -> &Vec<f64>| {
        let len = f(reports[0]).len();
        (0..len)
            .map(|i| reports.iter().map(|r| f(r)[i]).sum::<f64>() / n)
            .collect()
    };
    MetricsReport {
        accuracy: avg(&|r| r.accuracy),
        precision: avg(&|r| r.precision),
        recall: avg(&|r| r.recall),
        f1: avg(&|r| r.f1),
        per_class_precision: avg_vec(&|r| &r.per_class_precision),
        per_class_recall: avg_vec(&|r| &r.per_class_recall),
        per_class_f1: avg_vec(&|r| &r.per_class_f1),
        per_class_auc: None,
    }
}
