//! Python bindings. Matrices cross the boundary as lists of rows.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use sgr::aux_graph::{AuxParams, DEFAULT_SIZE_CAP};
use sgr::embed::{walk_matrix, EmbedRun, DEFAULT_DIM, DEFAULT_NEG, DEFAULT_ORDER};
use sgr::eval::{self, Protocol, Task, DEFAULT_REPEATS, DEFAULT_TRAIN_FRACTION};
use sgr::semantic::{describe_direct, describe_topics, Metric};
use sgr::side::{build_side_info, side_enhance};
use sgr::{build_hetero_adjacency, embed_run, load_graph, write_embeddings, AttributedGraph, EmbeddingModel, GraphBuilder, SgrError};

fn py_err(e: SgrError) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        SgrError::Io { .. } => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Attributed graph with optional node labels.
#[pyclass(frozen)]
struct Graph {
    inner: AttributedGraph,
}

#[pymethods]
impl Graph {
    /// Builds a graph from `(u, v)` edges, `(node, attr, weight)` entries
    /// and optional `(node, class)` pairs.
    #[new]
    #[pyo3(signature = (edges, attrs, labels=None))]
    fn new(edges: Vec<(String, String)>, attrs: Vec<(String, String, f64)>, labels: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let mut b = GraphBuilder::new();
        for (u, v) in &edges {
            b.add_edge(u, v);
        }
        for (i, w, x) in &attrs {
            b.add_attr(i, w, *x).map_err(py_err)?;
        }
        for (i, c) in labels.iter().flatten() {
            b.add_label(i, c);
        }
        Ok(Graph { inner: b.build().map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (edges, attrs, labels=None))]
    fn load(edges: &str, attrs: &str, labels: Option<&str>) -> PyResult<Self> {
        let inner = load_graph(edges.as_ref(), attrs.as_ref(), labels.map(AsRef::as_ref)).map_err(py_err)?;
        Ok(Graph { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.node_ids().to_vec()
    }

    #[getter]
    fn attr_ids(&self) -> Vec<String> {
        self.inner.attr_ids().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<String>> {
        let names = self.inner.class_names();
        self.inner.labels().map(|l| l.iter().map(|&c| names[c].clone()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={}, m={})", self.inner.n(), self.inner.edge_count(), self.inner.m())
    }
}

/// Node and attribute vectors from one embedding run.
#[pyclass(frozen)]
struct Embedding {
    run: EmbedRun,
}

#[pymethods]
impl Embedding {
    #[getter]
    fn dim(&self) -> usize {
        self.run.model.dim()
    }

    fn node_vectors(&self) -> Vec<Vec<f64>> {
        rows(&self.run.model.node_vectors().into_owned())
    }

    fn attr_vectors(&self) -> Vec<Vec<f64>> {
        rows(&self.run.model.attr_vectors().into_owned())
    }

    fn context_vectors(&self) -> Vec<Vec<f64>> {
        rows(self.run.model.y())
    }

    /// Refines the vectors with the modularity and attribute-cosine
    /// Laplacians weighted by `lambda1` and `lambda2`.
    #[pyo3(signature = (graph, lambda1=0.0, lambda2=0.0, iterations=1))]
    fn enhance(&self, py: Python<'_>, graph: &Graph, lambda1: f64, lambda2: f64, iterations: usize) -> PyResult<Embedding> {
        let run = py
            .detach(|| {
                let side = build_side_info(&graph.inner, [lambda1, lambda2])?;
                let enhanced = side_enhance(&self.run.model, &self.run.walk, &side, iterations)?;
                Ok(EmbedRun {
                    adjacency: self.run.adjacency.clone(),
                    walk: self.run.walk.clone(),
                    model: enhanced.model,
                })
            })
            .map_err(py_err)?;
        Ok(Embedding { run })
    }

    fn save(&self, graph: &Graph, path: &str) -> PyResult<()> {
        write_embeddings(&self.run.model, &graph.inner, path.as_ref()).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (
    graph, dim=DEFAULT_DIM, order=DEFAULT_ORDER, neg=DEFAULT_NEG,
    deltas=(1.0, 1.0, 1.0), weighted_motifs=false, size_cap=DEFAULT_SIZE_CAP,
))]
#[allow(clippy::too_many_arguments)]
fn embed(
    py: Python<'_>,
    graph: &Graph,
    dim: usize,
    order: usize,
    neg: usize,
    deltas: (f64, f64, f64),
    weighted_motifs: bool,
    size_cap: usize,
) -> PyResult<Embedding> {
    let params = sgr::EmbedParams {
        dim,
        order,
        neg,
        aux: AuxParams {
            deltas: [deltas.0, deltas.1, deltas.2],
            weighted_motifs,
            size_cap,
            ..AuxParams::default()
        },
    };
    let run = py.detach(|| embed_run(&graph.inner, &params)).map_err(py_err)?;
    Ok(Embedding { run })
}

/// Walk matrix `Z` of the auxiliary graph, nodes first.
#[pyfunction]
#[pyo3(signature = (graph, order=DEFAULT_ORDER, neg=DEFAULT_NEG))]
fn proximity(graph: &Graph, order: usize, neg: usize) -> PyResult<Vec<Vec<f64>>> {
    let b = build_hetero_adjacency(&graph.inner, &AuxParams::default()).map_err(py_err)?;
    Ok(rows(walk_matrix(&b, order, neg).map_err(py_err)?.z()))
}

/// Mean metrics over repeated clustering or classification runs.
#[pyfunction]
#[pyo3(signature = (
    embedding, graph, task="clustering", repeats=DEFAULT_REPEATS, seed=0,
    train_fraction=DEFAULT_TRAIN_FRACTION,
))]
fn evaluate(
    py: Python<'_>,
    embedding: &Embedding,
    graph: &Graph,
    task: &str,
    repeats: usize,
    seed: u64,
    train_fraction: f64,
) -> PyResult<Vec<(String, f64)>> {
    let task = match task {
        "clustering" => Task::Clustering,
        "classification" => Task::Classification,
        other => return Err(PyValueError::new_err(format!("unknown task {other:?}"))),
    };
    let mut protocol = Protocol::new(task);
    protocol.repeats = repeats;
    protocol.seed = seed;
    protocol.train_fraction = train_fraction;
    let report = py
        .detach(|| eval::evaluate(&embedding.run.model, &graph.inner, &protocol))
        .map_err(py_err)?;
    let mut out = Vec::new();
    if let Some(v) = report.nmi {
        out.push(("nmi".to_string(), v));
    }
    out.push(("ac".to_string(), report.ac));
    if let Some(v) = report.macro_f1 {
        out.push(("macro_f1".to_string(), v));
    }
    Ok(out)
}

/// k-means++ with restarts; returns `(assignment, centers)`.
#[pyfunction]
#[pyo3(signature = (points, k, seed=0))]
fn kmeans(points: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let c = eval::kmeans(&matrix(&points)?, k, seed).map_err(py_err)?;
    Ok((c.assignment, rows(&c.centers)))
}

#[pyfunction]
fn nmi(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    eval::nmi(&a, &b).map_err(py_err)
}

#[pyfunction]
fn clustering_accuracy(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    eval::clustering_accuracy(&pred, &truth).map_err(py_err)
}

/// Keyword attribute ids for each node community. With `topics`, every
/// community lists its nearest attribute clusters, flattened in order.
#[pyfunction]
#[pyo3(signature = (
    embedding, graph, node_clusters=None, keywords=5, topics=None,
    attr_clusters=None, cosine=false, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn describe(
    embedding: &Embedding,
    graph: &Graph,
    node_clusters: Option<usize>,
    keywords: usize,
    topics: Option<usize>,
    attr_clusters: Option<usize>,
    cosine: bool,
    seed: u64,
) -> PyResult<Vec<Vec<String>>> {
    let g = &graph.inner;
    let model: &EmbeddingModel = &embedding.run.model;
    let k1 = match node_clusters {
        Some(k) => k,
        None if g.num_classes() > 0 => g.num_classes(),
        None => return Err(PyValueError::new_err("node_clusters is required without labels")),
    };
    let metric = if cosine { Metric::Cosine } else { Metric::Euclidean };
    let communities = eval::kmeans(&model.node_vectors().into_owned(), k1, seed).map_err(py_err)?;
    let descriptions = match topics {
        None => describe_direct(model, &communities, keywords, metric),
        Some(t) => {
            let k2 = attr_clusters.ok_or_else(|| PyValueError::new_err("topics needs attr_clusters"))?;
            let topic_clusters = eval::kmeans(&model.attr_vectors().into_owned(), k2, seed).map_err(py_err)?;
            describe_topics(model, &communities, &topic_clusters, keywords, t, metric)
        }
    }
    .map_err(py_err)?;
    Ok(descriptions
        .iter()
        .map(|d| {
            d.topics
                .iter()
                .flat_map(|t| t.keywords.iter().map(|kw| g.attr_ids()[kw.attr].clone()))
                .collect()
        })
        .collect())
}

#[pymodule]
fn sgr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Embedding>()?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(proximity, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
