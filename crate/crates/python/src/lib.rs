//! Python bindings: cohorts, feature vocabularies, feature graphs, the graph
//! models, the classical baselines, metrics and the full benchmark.

use std::path::PathBuf;

use oncograph::autodiff::Tensor;
use oncograph::baselines::{Baseline as CoreBaseline, BaselineConfig, BaselineKind};
use oncograph::bench::{run_benchmark, BenchConfig};
use oncograph::eval::{self, Averaging, SplitRatios};
use oncograph::gnn::{self, GraphContext, ModelConfig, Operator};
use oncograph::graph::{build_feature_graph, FeatureGraph};
use oncograph::ingest::{self, CancerType, FeatureVocabulary, PatientRecord, SyntheticSpec, VocabularyConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: oncograph::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_tensor(rows: Vec<Vec<f64>>) -> PyResult<Tensor> {
    Tensor::from_rows(&rows).map_err(py_err)
}

fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn averaging(name: &str) -> PyResult<Averaging> {
    match name {
        "macro" => Ok(Averaging::Macro),
        "micro" => Ok(Averaging::Micro),
        other => Err(PyValueError::new_err(format!("unknown averaging {other:?}"))),
    }
}

/// A list of patients with their cancer type, phenotypes and reported genes.
#[pyclass(frozen)]
struct Cohort {
    records: Vec<PatientRecord>,
}

#[pymethods]
impl Cohort {
    /// The seeded synthetic cohort used by the benchmark.
    #[staticmethod]
    #[pyo3(signature = (seed = None))]
    fn synthetic(seed: Option<u64>) -> PyResult<Self> {
        let mut spec = SyntheticSpec::default();
        if let Some(s) = seed {
            spec.seed = s;
        }
        let records = ingest::generate_synthetic_cohort(&spec).map_err(py_err)?;
        Ok(Cohort { records })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let records = ingest::load_cohort(path).map_err(py_err)?;
        Ok(Cohort { records })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        ingest::save_cohort(path, &self.records).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }

    fn patient_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.patient_id.clone()).collect()
    }

    /// Class indices in cohort order.
    fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.cancer_type.index()).collect()
    }

    fn record<'py>(&self, py: Python<'py>, i: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = self
            .records
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("no record {i}")))?;
        let d = PyDict::new(py);
        d.set_item("patient_id", &r.patient_id)?;
        d.set_item("cancer_type", r.cancer_type.key())?;
        d.set_item("phenotypes", r.phenotypes.iter().collect::<Vec<_>>())?;
        d.set_item("pathogenic", r.pathogenic.iter().collect::<Vec<_>>())?;
        d.set_item("vus", r.vus.iter().collect::<Vec<_>>())?;
        Ok(d)
    }

    /// The record rendered as a genetic report.
    fn report(&self, i: usize) -> PyResult<String> {
        let r = self
            .records
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("no record {i}")))?;
        ingest::render_report(r).map_err(py_err)
    }
}

/// Features that survive the frequency and stop-term filters.
#[pyclass(frozen)]
struct Vocabulary {
    inner: FeatureVocabulary,
}

#[pymethods]
impl Vocabulary {
    #[new]
    #[pyo3(signature = (cohort, phenotype_threshold = None, gene_threshold = None))]
    fn new(cohort: &Cohort, phenotype_threshold: Option<usize>, gene_threshold: Option<usize>) -> PyResult<Self> {
        let mut config = VocabularyConfig::default();
        if let Some(t) = phenotype_threshold {
            config.phenotype_threshold = t;
        }
        if let Some(t) = gene_threshold {
            config.gene_threshold = t;
        }
        let inner = ingest::build_vocabulary(&cohort.records, &config).map_err(py_err)?;
        Ok(Vocabulary { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(kind, name)` pairs in column order.
    fn keys(&self) -> Vec<(String, String)> {
        self.inner
            .keys()
            .iter()
            .map(|k| (k.kind.as_str().to_string(), k.name.clone()))
            .collect()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// Multi-hot rows for `cohort`, one per patient.
    fn encode(&self, cohort: &Cohort) -> PyResult<Vec<Vec<f64>>> {
        let x = ingest::encode_multihot(&cohort.records, &self.inner).map_err(py_err)?;
        Ok(to_rows(&x))
    }
}

/// The phenotype-gene feature graph with patient nodes.
#[pyclass(frozen)]
struct Graph {
    graph: FeatureGraph,
    ctx: GraphContext,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(cohort: &Cohort, vocabulary: &Vocabulary) -> PyResult<Self> {
        let graph = build_feature_graph(&cohort.records, &vocabulary.inner, true).map_err(py_err)?;
        let ctx = GraphContext::new(&graph).map_err(py_err)?;
        Ok(Graph { graph, ctx })
    }

    /// An unlabeled graph from an edge list and node features.
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>, features: Vec<Vec<f64>>) -> PyResult<Self> {
        let graph = FeatureGraph::unlabeled(n, &edges, to_tensor(features)?).map_err(py_err)?;
        let ctx = GraphContext::new(&graph).map_err(py_err)?;
        Ok(Graph { graph, ctx })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.graph.num_features()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.graph.edges().to_vec()
    }

    fn labels(&self) -> Vec<Option<usize>> {
        self.graph.labels().to_vec()
    }

    fn patient_nodes(&self) -> Vec<usize> {
        self.graph.patient_nodes()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        to_rows(self.graph.features())
    }
}

/// One of the eight graph operators with a linear classification head.
#[pyclass]
struct GnnModel {
    inner: gnn::GnnModel,
}

#[pymethods]
impl GnnModel {
    #[new]
    #[pyo3(signature = (
        operator, in_dim, *, n_classes = 7, hidden_dim = None, num_layers = None, k = None,
        heads = None, dropout = None, lr = None, epochs = None, patience = None, seed = 0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        operator: &str,
        in_dim: usize,
        n_classes: usize,
        hidden_dim: Option<usize>,
        num_layers: Option<usize>,
        k: Option<usize>,
        heads: Option<usize>,
        dropout: Option<f64>,
        lr: Option<f64>,
        epochs: Option<usize>,
        patience: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let op = Operator::from_key(operator)
            .ok_or_else(|| PyValueError::new_err(format!("unknown operator {operator:?}")))?;
        let mut c = ModelConfig::new(op);
        c.n_classes = n_classes;
        c.seed = seed;
        c.k = k.or(c.k);
        c.hidden_dim = hidden_dim.unwrap_or(c.hidden_dim);
        c.num_layers = num_layers.unwrap_or(c.num_layers);
        c.heads = heads.unwrap_or(c.heads);
        c.dropout = dropout.unwrap_or(c.dropout);
        c.lr = lr.unwrap_or(c.lr);
        c.epochs = epochs.unwrap_or(c.epochs);
        c.patience = patience.unwrap_or(c.patience);
        let inner = gnn::GnnModel::new(c, in_dim).map_err(py_err)?;
        Ok(GnnModel { inner })
    }

    #[getter]
    fn operator(&self) -> &'static str {
        self.inner.operator().key()
    }

    fn param_names(&self) -> Vec<String> {
        self.inner.param_names().to_vec()
    }

    fn num_parameters(&self) -> usize {
        self.inner.num_scalars()
    }

    fn get_param(&self, name: &str) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let t = self
            .inner
            .param(name)
            .ok_or_else(|| PyValueError::new_err(format!("no parameter {name:?}")))?;
        Ok((t.shape().to_vec(), t.values().to_vec()))
    }

    fn set_param(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) -> PyResult<()> {
        let t = Tensor::new(shape, values).map_err(py_err)?;
        self.inner.set_param(name, t).map_err(py_err)
    }

    /// Evaluation-mode logits for every node.
    fn logits(&self, graph: &Graph) -> PyResult<Vec<Vec<f64>>> {
        let out = self.inner.logits(&graph.ctx, graph.ctx.features()).map_err(py_err)?;
        Ok(to_rows(&out))
    }

    /// GAT attention coefficients indexed `[layer][head][edge]`.
    fn attention(&self, graph: &Graph) -> PyResult<Vec<Vec<Vec<f64>>>> {
        self.inner.attention(&graph.ctx, graph.ctx.features()).map_err(py_err)
    }

    /// Trains on `train` with early stopping on `val`; returns the per-epoch
    /// trace.
    fn fit<'py>(
        &mut self,
        py: Python<'py>,
        graph: &Graph,
        train: Vec<usize>,
        val: Vec<usize>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let trained = py
            .detach(|| gnn::train_model(&graph.ctx, self.inner.clone(), &train, &val))
            .map_err(py_err)?;
        self.inner = trained.model;
        trained
            .trace
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("epoch", e.epoch)?;
                d.set_item("train_loss", e.train_loss)?;
                d.set_item("train_accuracy", e.train_accuracy)?;
                d.set_item("val_loss", e.val_loss)?;
                d.set_item("val_accuracy", e.val_accuracy)?;
                Ok(d)
            })
            .collect()
    }

    /// `(classes, probabilities)` for `nodes`.
    fn predict(&self, graph: &Graph, nodes: Vec<usize>) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
        let p = gnn::predict(&self.inner, &graph.ctx, &nodes).map_err(py_err)?;
        Ok((p.classes, to_rows(&p.probabilities)))
    }
}

/// A classical model over multi-hot patient vectors.
#[pyclass]
struct Baseline {
    kind: BaselineKind,
    seed: u64,
    fitted: Option<CoreBaseline>,
}

#[pymethods]
impl Baseline {
    #[new]
    #[pyo3(signature = (kind, seed = 0))]
    fn new(kind: &str, seed: u64) -> PyResult<Self> {
        let kind =
            BaselineKind::from_key(kind).ok_or_else(|| PyValueError::new_err(format!("unknown baseline {kind:?}")))?;
        Ok(Baseline { kind, seed, fitted: None })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.kind.key()
    }

    /// Fits on `(x, y)`; the validation pair drives the MLP's early
    /// stopping and defaults to the training data.
    #[pyo3(signature = (x, y, n_classes = 7, x_val = None, y_val = None))]
    fn fit(
        &mut self,
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        n_classes: usize,
        x_val: Option<Vec<Vec<f64>>>,
        y_val: Option<Vec<usize>>,
    ) -> PyResult<()> {
        let x = to_tensor(x)?;
        let x_val = x_val.map(to_tensor).transpose()?.unwrap_or_else(|| x.clone());
        let y_val = y_val.unwrap_or_else(|| y.clone());
        let (kind, seed) = (self.kind, self.seed);
        let fitted = py
            .detach(|| {
                CoreBaseline::fit(kind, &BaselineConfig::default(), &x, &y, &x_val, &y_val, n_classes, seed)
            })
            .map_err(py_err)?;
        self.fitted = Some(fitted);
        Ok(())
    }

    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let p = self.model()?.predict_proba(&to_tensor(x)?).map_err(py_err)?;
        Ok(to_rows(&p))
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        self.model()?.predict(&to_tensor(x)?).map_err(py_err)
    }
}

impl Baseline {
    fn model(&self) -> PyResult<&CoreBaseline> {
        self.fitted
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("baseline is not fitted"))
    }
}

/// Accuracy, averaged precision/recall/F1 and the per-class scores.
#[pyfunction]
#[pyo3(signature = (y_true, y_pred, n_classes = 7, average = "macro"))]
fn metrics<'py>(
    py: Python<'py>,
    y_true: Vec<usize>,
    y_pred: Vec<usize>,
    n_classes: usize,
    average: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cm = eval::confusion(&y_true, &y_pred, n_classes).map_err(py_err)?;
    let m = eval::metrics(&cm, averaging(average)?).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    d.set_item("per_class_precision", m.per_class_precision)?;
    d.set_item("per_class_recall", m.per_class_recall)?;
    d.set_item("per_class_f1", m.per_class_f1)?;
    d.set_item("confusion", cm.counts().to_vec())?;
    Ok(d)
}

/// One-vs-rest ROC AUC of column `class`, or `None` when only one side is
/// present.
#[pyfunction]
fn roc_auc(scores: Vec<Vec<f64>>, y_true: Vec<usize>, class: usize) -> PyResult<Option<f64>> {
    let curve = eval::roc_curve(&to_tensor(scores)?, &y_true, class).map_err(py_err)?;
    Ok(curve.map(|c| c.auc))
}

/// Stratified `(train, val, test)` index lists.
#[pyfunction]
#[pyo3(signature = (labels, train = 0.6, val = 0.2, test = 0.2, seed = 42))]
fn stratified_split(
    labels: Vec<usize>,
    train: f64,
    val: f64,
    test: f64,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let ratios = SplitRatios::new(train, val, test).map_err(py_err)?;
    let m = eval::stratified_split(&labels, ratios, seed).map_err(py_err)?;
    Ok((m.train, m.val, m.test))
}

/// Runs the benchmark on `cohort`. `config` is a JSON object using the
/// same keys as the command-line config; `out` also writes the run
/// directory.
#[pyfunction]
#[pyo3(signature = (cohort, config = None, out = None))]
fn run_bench<'py>(
    py: Python<'py>,
    cohort: &Cohort,
    config: Option<&str>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let config: BenchConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => BenchConfig::default(),
    };
    let report = py.detach(|| run_benchmark(&cohort.records, &config)).map_err(py_err)?;
    if let Some(dir) = out {
        report.write(&dir).map_err(py_err)?;
    }
    let tables = report.tables();
    let d = PyDict::new(py);
    d.set_item("summary", report.summary())?;
    d.set_item("table1", tables.overall)?;
    d.set_item("table2", tables.per_class)?;
    d.set_item("results", report.results_jsonl())?;
    d.set_item("failures", report.failures().len())?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "oncograph")]
fn oncograph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CANCER_TYPES", CancerType::ALL.iter().map(|c| c.key()).collect::<Vec<_>>())?;
    m.add("OPERATORS", Operator::ALL.iter().map(|o| o.key()).collect::<Vec<_>>())?;
    m.add("BASELINES", BaselineKind::ALL.iter().map(|b| b.key()).collect::<Vec<_>>())?;
    m.add_class::<Cohort>()?;
    m.add_class::<Vocabulary>()?;
    m.add_class::<Graph>()?;
    m.add_class::<GnnModel>()?;
    m.add_class::<Baseline>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
