//! Downstream evaluation: k-means clustering and linear classification of
//! node vectors against ground-truth labels.

mod classifier;
mod kmeans;
mod metrics;

use std::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use classifier::{logistic_loss_grad, train_classifier, LinearClassifier, DEFAULT_L2};
pub use kmeans::{centroid, kmeans, kmeans_with, Clustering, KMeansConfig};
pub use metrics::{accuracy, clustering_accuracy, hungarian, macro_f1, match_clusters, nmi};

use crate::embed::EmbeddingModel;
use crate::error::{Result, SgrError};
use crate::graph::AttributedGraph;

pub const DEFAULT_REPEATS: usize = 100;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.1;
const SPLIT_ATTEMPTS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Clustering,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Clustering => "clustering",
            Task::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    pub task: Task,
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub l2: f64,
    pub kmeans: KMeansConfig,
}

impl Protocol {
    pub fn new(task: Task) -> Self {
        Protocol {
            task,
            repeats: DEFAULT_REPEATS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: 0,
            l2: DEFAULT_L2,
            kmeans: KMeansConfig::default(),
        }
    }
}

/// Metrics averaged over the repeats of one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub nmi: Option<f64>,
    pub ac: f64,
    pub macro_f1: Option<f64>,
    pub repeats: usize,
    pub seed: u64,
    pub config: String,
}

impl EvalReport {
    /// `metric<TAB>value` records, one per line.
    pub fn records(&self) -> String {
        let mut out = format!("task\t{}\n", self.task);
        if let Some(v) = self.nmi {
            out += &format!("nmi\t{v:.6}\n");
        }
        out += &format!("ac\t{:.6}\n", self.ac);
        if let Some(v) = self.macro_f1 {
            out += &format!("macro_f1\t{v:.6}\n");
        }
        out += &format!("repeats\t{}\nseed\t{}\nconfig\t{}\n", self.repeats, self.seed, self.config);
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} repeats, seed {})", self.task, self.repeats, self.seed)?;
        writeln!(f, "  {:<10} {:>8}", "metric", "mean")?;
        if let Some(v) = self.nmi {
            writeln!(f, "  {:<10} {:>8.4}", "NMI", v)?;
        }
        writeln!(f, "  {:<10} {:>8.4}", "AC", self.ac)?;
        if let Some(v) = self.macro_f1 {
            writeln!(f, "  {:<10} {:>8.4}", "Macro-F1", v)?;
        }
        write!(f, "  config: {}", self.config)
    }
}

/// SplitMix64 step, used to derive independent per-repeat seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    sum / count as f64
}

/// Random split with `fraction` of the rows for training, resampled until
/// every class appears in the training part.
pub fn train_test_split(labels: &[usize], num_classes: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if n < 2 {
        return Err(SgrError::InvalidParam("need at least two labeled nodes".into()));
    }
    let train_size = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    for attempt in 0..SPLIT_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (train, test) = idx.split_at(train_size);
        let mut seen = vec![false; num_classes];
        for &i in train {
            seen[labels[i]] = true;
        }
        if seen.iter().all(|&s| s) {
            return Ok((train.to_vec(), test.to_vec()));
        }
    }
    Err(SgrError::InvalidParam(format!(
        "no split with all {num_classes} classes in {train_size} training nodes after {SPLIT_ATTEMPTS} attempts"
    )))
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Evaluates node vectors (one row per node) against `labels`.
pub fn evaluate_vectors(
    points: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    protocol: &Protocol,
) -> Result<EvalReport> {
    if points.nrows() != labels.len() {
        return Err(SgrError::Shape(format!(
            "{} vectors for {} labels",
            points.nrows(),
            labels.len()
        )));
    }
    if protocol.repeats == 0 {
        return Err(SgrError::InvalidParam("repeats must be >= 1".into()));
    }
    if num_classes == 0 {
        return Err(SgrError::MissingLabels);
    }
    let seeds: Vec<u64> = (0..protocol.repeats as u64)
        .map(|r| derive_seed(protocol.seed, r))
        .collect();
    match protocol.task {
        Task::Clustering => {
            let runs = seeds
                .par_iter()
                .map(|&s| {
                    let c = kmeans_with(points, num_classes, s, &protocol.kmeans)?;
                    Ok((nmi(&c.assignment, labels)?, clustering_accuracy(&c.assignment, labels)?))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            Ok(EvalReport {
                task: protocol.task,
                nmi: Some(mean(runs.iter().map(|r| r.0))),
                ac: mean(runs.iter().map(|r| r.1)),
                macro_f1: None,
                repeats: protocol.repeats,
                seed: protocol.seed,
                config: format!(
                    "kmeans k={num_classes} restarts={} max_iter={}",
                    protocol.kmeans.restarts, protocol.kmeans.max_iter
                ),
            })
        }
        Task::Classification => {
            if !(protocol.train_fraction > 0.0 && protocol.train_fraction < 1.0) {
                return Err(SgrError::InvalidParam(format!(
                    "train fraction {} outside (0, 1)",
                    protocol.train_fraction
                )));
            }
            let runs = seeds
                .par_iter()
                .map(|&s| {
                    let (train, test) = train_test_split(labels, num_classes, protocol.train_fraction, s)?;
                    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                    let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
                    let clf = train_classifier(&select_rows(points, &train), &train_labels, num_classes, protocol.l2)?;
                    let pred = clf.classify(&select_rows(points, &test))?;
                    Ok((accuracy(&pred, &test_labels)?, macro_f1(&pred, &test_labels, num_classes)?))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            Ok(EvalReport {
                task: protocol.task,
                nmi: None,
                ac: mean(runs.iter().map(|r| r.0)),
                macro_f1: Some(mean(runs.iter().map(|r| r.1))),
                repeats: protocol.repeats,
                seed: protocol.seed,
                config: format!(
                    "logistic one-vs-rest l2={} train_fraction={}",
                    protocol.l2, protocol.train_fraction
                ),
            })
        }
    }
}

/// Evaluates the node vectors of `model` against the labels of `g`.
pub fn evaluate(model: &EmbeddingModel, g: &AttributedGraph, protocol: &Protocol) -> Result<EvalReport> {
    let labels = g.labels().ok_or(SgrError::MissingLabels)?;
    if model.n() != g.n() {
        return Err(SgrError::Shape(format!("model has {} nodes, graph {}", model.n(), g.n())));
    }
    evaluate_vectors(&model.node_vectors().into_owned(), labels, g.num_classes(), protocol)
}
