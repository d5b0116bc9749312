//! Random-walk proximity matrix and its truncated-SVD factorization.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::aux_graph::{build_hetero_adjacency, AuxParams, HeteroAdjacency};
use crate::error::{Result, SgrError};
use crate::graph::AttributedGraph;
use crate::linalg::{ensure_finite, fix_signs, svd};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_NEG: usize = 1;

/// Log-proximity target `Z` with the degree statistics it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMatrix {
    z: DMatrix<f64>,
    degrees: DVector<f64>,
    vol: f64,
    n: usize,
    m: usize,
    order: usize,
    neg: usize,
}

impl WalkMatrix {
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn neg(&self) -> usize {
        self.neg
    }
}

fn check_walk_params(order: usize, neg: usize) -> Result<()> {
    if order == 0 {
        return Err(SgrError::InvalidParam("walk order must be >= 1".into()));
    }
    if neg == 0 {
        return Err(SgrError::InvalidParam("negative-sample count must be >= 1".into()));
    }
    Ok(())
}

/// Row sums of `b`, failing on any non-positive one.
pub(crate) fn positive_degrees(b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = DVector::from_iterator(b.nrows(), b.row_iter().map(|r| r.sum()));
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(SgrError::IsolatedEntity(format!("#{i}")));
    }
    Ok(d)
}

/// Untruncated proximity `vol/(o·b) · (Σ_{r=1..o} (D⁻¹B)^r) · D⁻¹`.
pub fn proximity(b: &DMatrix<f64>, order: usize, neg: usize) -> Result<DMatrix<f64>> {
    check_walk_params(order, neg)?;
    ensure_finite(b, "adjacency")?;
    if b.nrows() != b.ncols() {
        return Err(SgrError::Shape(format!("adjacency is {:?}", b.shape())));
    }
    let d = positive_degrees(b)?;
    let vol = d.sum();

    let mut step = b.clone();
    for (i, mut row) in step.row_iter_mut().enumerate() {
        row /= d[i];
    }
    let mut acc = step.clone();
    let mut power = step.clone();
    for _ in 1..order {
        power = &power * &step;
        acc += &power;
    }
    let scale = vol / (order as f64 * neg as f64);
    for (j, mut col) in acc.column_iter_mut().enumerate() {
        col *= scale / d[j];
    }
    Ok(acc)
}

/// Builds the truncated-log walk matrix `Z = log(max(M, 1))` of `b`.
pub fn walk_matrix(b: &HeteroAdjacency, order: usize, neg: usize) -> Result<WalkMatrix> {
    let m = proximity(b.matrix(), order, neg)?;
    let degrees = positive_degrees(b.matrix())?;
    let vol = degrees.sum();
    Ok(WalkMatrix {
        z: m.map(|x| x.max(1.0).ln()),
        degrees,
        vol,
        n: b.n(),
        m: b.m(),
        order,
        neg,
    })
}

/// Rank-`k` factors of a matrix with their singular spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Splits `z ≈ X Yᵀ` with `X = U_k √Σ_k` and `Y = V_k √Σ_k`.
///
/// Column signs are fixed so the largest-magnitude entry of each `U`
/// column is positive.
pub fn truncated_factors(z: &DMatrix<f64>, k: usize) -> Result<Factors> {
    ensure_finite(z, "walk matrix")?;
    let max_rank = z.nrows().min(z.ncols());
    if k == 0 || k > max_rank {
        return Err(SgrError::InvalidParam(format!(
            "embedding dimension {k} outside 1..={max_rank}"
        )));
    }
    let d = svd(z.clone())?;
    let mut u = d.u.expect("u requested").columns(0, k).into_owned();
    let mut v = d.v_t.expect("v requested").rows(0, k).transpose();
    fix_signs(&mut u, &mut v);
    let roots: Vec<f64> = d.singular_values.iter().take(k).map(|s| s.sqrt()).collect();
    for j in 0..k {
        u.column_mut(j).scale_mut(roots[j]);
        v.column_mut(j).scale_mut(roots[j]);
    }
    Ok(Factors {
        x: u,
        y: v,
        singular_values: d.singular_values.iter().copied().collect(),
    })
}

/// Joint node/attribute embedding: rows `0..n` are nodes, `n..n+m`
/// attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    n: usize,
    m: usize,
    order: usize,
    neg: usize,
}

impl EmbeddingModel {
    pub fn new(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        n: usize,
        m: usize,
        order: usize,
        neg: usize,
    ) -> Result<Self> {
        if x.nrows() != n + m || y.shape() != x.shape() {
            return Err(SgrError::Shape(format!(
                "X {:?}, Y {:?} for n={n}, m={m}",
                x.shape(),
                y.shape()
            )));
        }
        check_walk_params(order, neg)?;
        ensure_finite(&x, "embedding")?;
        ensure_finite(&y, "context embedding")?;
        Ok(EmbeddingModel {
            x,
            y,
            n,
            m,
            order,
            neg,
        })
    }

    /// The embedding matrix `X`.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// The context matrix `Y`.
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn neg(&self) -> usize {
        self.neg
    }

    pub fn node_vectors(&self) -> DMatrixView<'_, f64> {
        self.x.rows(0, self.n)
    }

    pub fn attr_vectors(&self) -> DMatrixView<'_, f64> {
        self.x.rows(self.n, self.m)
    }
}

/// Factors `w.z()` at rank `k`.
pub fn factorize(w: &WalkMatrix, k: usize) -> Result<EmbeddingModel> {
    let f = truncated_factors(&w.z, k)?;
    EmbeddingModel::new(f.x, f.y, w.n, w.m, w.order, w.neg)
}

/// Full set of embedding hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedParams {
    pub dim: usize,
    pub order: usize,
    pub neg: usize,
    pub aux: AuxParams,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            dim: DEFAULT_DIM,
            order: DEFAULT_ORDER,
            neg: DEFAULT_NEG,
            aux: AuxParams::default(),
        }
    }
}

/// Intermediate state of one embedding run, kept for side enhancement.
#[derive(Debug, Clone)]
pub struct EmbedRun {
    pub adjacency: HeteroAdjacency,
    pub walk: WalkMatrix,
    pub model: EmbeddingModel,
}

/// Runs auxiliary-graph construction, the walk matrix and factorization.
pub fn embed_run(g: &AttributedGraph, params: &EmbedParams) -> Result<EmbedRun> {
    let adjacency = build_hetero_adjacency(g, &params.aux)?;
    let walk = walk_matrix(&adjacency, params.order, params.neg)?;
    let model = factorize(&walk, params.dim)?;
    Ok(EmbedRun {
        adjacency,
        walk,
        model,
    })
}

pub fn embed(g: &AttributedGraph, params: &EmbedParams) -> Result<EmbeddingModel> {
    embed_run(g, params).map(|r| r.model)
}
