//! Attributed graph container and its TSV loaders.
//!
//! Input files are UTF-8 text with one record per line and tab-separated
//! fields. Blank lines and lines starting with `#` are skipped.
//!
//! * edges: `u<TAB>v`
//! * attributes: `node<TAB>attr[<TAB>weight]` (weight defaults to 1.0)
//! * labels: `node<TAB>class`

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SgrError};

/// Undirected graph whose nodes carry nonnegative attribute weights.
///
/// Nodes and attributes are addressed by dense indices; the external string
/// ids are kept for output. Adjacency and the node-attribute relation are
/// stored sparsely and densified on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    node_ids: Vec<String>,
    attr_ids: Vec<String>,
    neighbors: Vec<Vec<usize>>,
    node_attrs: Vec<Vec<(usize, f64)>>,
    edge_count: usize,
    labels: Option<Vec<usize>>,
    class_names: Vec<String>,
}

impl AttributedGraph {
    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn m(&self) -> usize {
        self.attr_ids.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn attr_ids(&self) -> &[String] {
        &self.attr_ids
    }

    /// Sorted neighbor indices of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Positive `(attribute, weight)` entries of node `i`, sorted by attribute.
    pub fn node_attrs(&self, i: usize) -> &[(usize, f64)] {
        &self.node_attrs[i]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Class count `c`, or 0 when unlabeled.
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Iterates undirected edges once each as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Dense symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (u, nb) in self.neighbors.iter().enumerate() {
            for &v in nb {
                a[(u, v)] = 1.0;
            }
        }
        a
    }

    /// Dense n×m node-attribute weight matrix.
    pub fn attr_matrix(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.n(), self.m());
        for (i, row) in self.node_attrs.iter().enumerate() {
            for &(w, x) in row {
                r[(i, w)] = x;
            }
        }
        r
    }

    /// Copy of the graph with every attribute removed. Fails if a node would
    /// be left without edges.
    pub fn topology_only(&self) -> Result<AttributedGraph> {
        if let Some(i) = (0..self.n()).find(|&i| self.neighbors[i].is_empty()) {
            return Err(SgrError::InvalidGraph(format!(
                "node {} has no edges",
                self.node_ids[i]
            )));
        }
        Ok(AttributedGraph {
            attr_ids: Vec::new(),
            node_attrs: vec![Vec::new(); self.n()],
            ..self.clone()
        })
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|s| s == id)
    }

    pub fn attr_index(&self, id: &str) -> Option<usize> {
        self.attr_ids.iter().position(|s| s == id)
    }
}

/// Incremental construction of an [`AttributedGraph`] from string ids.
///
/// Node ids get dense indices in first-appearance order across edges and
/// attribute records; attribute ids likewise. `build` applies all of the
/// graph invariants.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    node_ids: Vec<String>,
    node_index: HashMap<String, usize>,
    attr_ids: Vec<String>,
    attr_index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    attrs: Vec<(usize, usize, f64)>,
    labels: Vec<(String, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.node_index.get(id) {
            return i;
        }
        let i = self.node_ids.len();
        self.node_ids.push(id.to_string());
        self.node_index.insert(id.to_string(), i);
        i
    }

    fn intern_attr(&mut self, id: &str) -> usize {
        if let Some(&i) = self.attr_index.get(id) {
            return i;
        }
        let i = self.attr_ids.len();
        self.attr_ids.push(id.to_string());
        self.attr_index.insert(id.to_string(), i);
        i
    }

    /// Registers a node without any incident record.
    pub fn add_node(&mut self, id: &str) -> &mut Self {
        self.intern_node(id);
        self
    }

    pub fn add_edge(&mut self, u: &str, v: &str) -> &mut Self {
        let a = self.intern_node(u);
        let b = self.intern_node(v);
        self.edges.push((a, b));
        self
    }

    /// Adds a node-attribute weight. Repeated pairs accumulate.
    pub fn add_attr(&mut self, node: &str, attr: &str, weight: f64) -> Result<&mut Self> {
        if !weight.is_finite() {
            return Err(SgrError::InvalidGraph(format!(
                "non-finite weight for ({node}, {attr})"
            )));
        }
        if weight < 0.0 {
            return Err(SgrError::InvalidGraph(format!(
                "negative weight {weight} for ({node}, {attr})"
            )));
        }
        let i = self.intern_node(node);
        let w = self.intern_attr(attr);
        self.attrs.push((i, w, weight));
        Ok(self)
    }

    pub fn add_label(&mut self, node: &str, class: &str) -> &mut Self {
        self.labels.push((node.to_string(), class.to_string()));
        self
    }

    pub fn build(self) -> Result<AttributedGraph> {
        let n = self.node_ids.len();

        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            if u != v {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        let mut edge_count = 0;
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
            edge_count += nb.len();
        }
        edge_count /= 2;

        let mut weights: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
        for &(i, w, x) in &self.attrs {
            *weights[i].entry(w).or_insert(0.0) += x;
        }

        // Attribute columns with no positive entry are dropped and the
        // survivors re-indexed in their original order.
        let mut used = vec![false; self.attr_ids.len()];
        for row in &weights {
            for (&w, &x) in row {
                if x > 0.0 {
                    used[w] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.attr_ids.len()];
        let mut attr_ids = Vec::new();
        for (w, id) in self.attr_ids.into_iter().enumerate() {
            if used[w] {
                remap[w] = attr_ids.len();
                attr_ids.push(id);
            }
        }
        let node_attrs: Vec<Vec<(usize, f64)>> = weights
            .into_iter()
            .map(|row| {
                let mut v: Vec<(usize, f64)> = row
                    .into_iter()
                    .filter(|&(_, x)| x > 0.0)
                    .map(|(w, x)| (remap[w], x))
                    .collect();
                v.sort_unstable_by_key(|&(w, _)| w);
                v
            })
            .collect();

        for i in 0..n {
            if neighbors[i].is_empty() && node_attrs[i].is_empty() {
                return Err(SgrError::InvalidGraph(format!(
                    "node {} has no edges and no attributes",
                    self.node_ids[i]
                )));
            }
        }

        let (labels, class_names) = if self.labels.is_empty() {
            (None, Vec::new())
        } else {
            let mut class_names: Vec<String> = Vec::new();
            let mut class_index: HashMap<String, usize> = HashMap::new();
            let mut labels = vec![usize::MAX; n];
            for (node, class) in &self.labels {
                let i = *self.node_index.get(node).ok_or_else(|| {
                    SgrError::InvalidGraph(format!("label references unknown node {node}"))
                })?;
                let next = class_names.len();
                let c = *class_index.entry(class.clone()).or_insert_with(|| {
                    class_names.push(class.clone());
                    next
                });
                labels[i] = c;
            }
            if let Some(i) = labels.iter().position(|&c| c == usize::MAX) {
                return Err(SgrError::InvalidGraph(format!(
                    "node {} has no label",
                    self.node_ids[i]
                )));
            }
            (Some(labels), class_names)
        };

        Ok(AttributedGraph {
            node_ids: self.node_ids,
            attr_ids,
            neighbors,
            node_attrs,
            edge_count,
            labels,
            class_names,
        })
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SgrError::io(path, e))
}

/// Yields `(line_number, fields)` for every non-blank, non-comment line.
fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

/// Parses the three TSV sources into a builder. Exposed separately from
/// [`load_graph`] so in-memory text can be ingested without touching disk.
pub fn parse_graph(
    edges: (&str, &str),
    attrs: (&str, &str),
    labels: Option<(&str, &str)>,
) -> Result<AttributedGraph> {
    let mut b = GraphBuilder::new();
    let parse_err = |file: &str, line: usize, msg: String| SgrError::Parse {
        file: file.to_string(),
        line,
        msg,
    };

    let (edges_name, edges_text) = edges;
    for (line, f) in records(edges_text) {
        if f.len() != 2 || f[0].is_empty() || f[1].is_empty() {
            return Err(parse_err(
                edges_name,
                line,
                format!("expected 2 fields, got {}", f.len()),
            ));
        }
        b.add_edge(f[0], f[1]);
    }

    let (attrs_name, attrs_text) = attrs;
    for (line, f) in records(attrs_text) {
        if !(f.len() == 2 || f.len() == 3) || f[0].is_empty() || f[1].is_empty() {
            return Err(parse_err(
                attrs_name,
                line,
                format!("expected 2 or 3 fields, got {}", f.len()),
            ));
        }
        let weight = match f.get(2) {
            None => 1.0,
            Some(s) => s
                .parse::<f64>()
                .map_err(|e| parse_err(attrs_name, line, format!("bad weight {s:?}: {e}")))?,
        };
        if weight < 0.0 {
            return Err(parse_err(attrs_name, line, format!("negative weight {weight}")));
        }
        if !weight.is_finite() {
            return Err(parse_err(attrs_name, line, format!("non-finite weight {s}", s = f[2])));
        }
        b.add_attr(f[0], f[1], weight)?;
    }

    if let Some((labels_name, labels_text)) = labels {
        for (line, f) in records(labels_text) {
            if f.len() != 2 || f[0].is_empty() || f[1].is_empty() {
                return Err(parse_err(
                    labels_name,
                    line,
                    format!("expected 2 fields, got {}", f.len()),
                ));
            }
            if !b.node_index.contains_key(f[0]) {
                return Err(parse_err(
                    labels_name,
                    line,
                    format!("label references unknown node {}", f[0]),
                ));
            }
            b.add_label(f[0], f[1]);
        }
    }

    b.build()
}

/// Loads an attributed graph from edge, attribute and optional label files.
pub fn load_graph(
    edges_path: &Path,
    attrs_path: &Path,
    labels_path: Option<&Path>,
) -> Result<AttributedGraph> {
    let edges = read_text(edges_path)?;
    let attrs = read_text(attrs_path)?;
    let labels = labels_path.map(read_text).transpose()?;
    let name = |p: &Path| p.display().to_string();
    let (en, an) = (name(edges_path), name(attrs_path));
    let ln = labels_path.map(name);
    parse_graph(
        (&en, &edges),
        (&an, &attrs),
        match (&ln, &labels) {
            (Some(n), Some(t)) => Some((n.as_str(), t.as_str())),
            _ => None,
        },
    )
}
