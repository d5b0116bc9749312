//! Laplacian side information and the closed-form refinement of a
//! factorization.
//!
//! The refined objective is
//!
//! ```text
//! O(X, Y) = ‖Z − X Yᵀ‖²_F + Σ_l λ_l · tr(Xᵀ L_l X)
//! ```
//!
//! where each `L_l = D_l − T_l` is the Laplacian of a nonnegative
//! similarity `T_l` supported on the node block. Two sources ship: the
//! rescaled modularity matrix and the rescaled node attribute cosine.
//!
//! The X step uses `X' = (I + L)^† Z Y (YᵀY + I_k)^†`. Note this is not the
//! exact stationary point of `O` in X (that would solve the Sylvester
//! equation `X YᵀY + L X = Z Y`); the Y step `Y' = Zᵀ X (XᵀX)^†` is exact.

use log::info;
use nalgebra::DMatrix;

use crate::aux_graph::mnorm;
use crate::embed::{EmbeddingModel, WalkMatrix};
use crate::error::{Result, SgrError};
use crate::graph::AttributedGraph;
use crate::linalg::{asymmetry, ensure_finite, pinv};

/// Modularity matrix `Q = A − d dᵀ / (2e)`.
pub fn modularity_matrix(g: &AttributedGraph) -> Result<DMatrix<f64>> {
    let e = g.edge_count();
    if e == 0 {
        return Err(SgrError::InvalidGraph(
            "modularity is undefined for a graph without edges".into(),
        ));
    }
    let n = g.n();
    let two_e = 2.0 * e as f64;
    let d: Vec<f64> = (0..n).map(|i| g.degree(i) as f64).collect();
    let mut q = DMatrix::from_fn(n, n, |i, j| -d[i] * d[j] / two_e);
    for (u, v) in g.edges() {
        q[(u, v)] += 1.0;
        q[(v, u)] += 1.0;
    }
    Ok(q)
}

/// Row-wise cosine similarity (n×n). Zero rows are dissimilar to
/// everything, themselves included.
pub fn attribute_cosine(r0: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r0.nrows();
    let sq: Vec<f64> = r0.row_iter().map(|r| r.norm_squared()).collect();
    let gram = r0 * r0.transpose();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        if sq[i] == 0.0 {
            continue;
        }
        s[(i, i)] = 1.0;
        for j in (i + 1)..n {
            if sq[j] == 0.0 {
                continue;
            }
            let c = gram[(i, j)] / (sq[i] * sq[j]).sqrt();
            s[(i, j)] = c;
            s[(j, i)] = c;
        }
    }
    s
}

/// Graph Laplacian `diag(T·1) − T`.
pub fn laplacian(t: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -t.clone();
    for (i, row) in t.row_iter().enumerate() {
        l[(i, i)] += row.sum();
    }
    l
}

/// Embeds an n×n block in the top-left of a zero (n+m)×(n+m) matrix.
pub fn pad_node_block(block: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = block.nrows();
    let mut t = DMatrix::zeros(n + m, n + m);
    t.view_mut((0, 0), (n, n)).copy_from(block);
    t
}

/// Regularizers built from one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    pub q_norm: DMatrix<f64>,
    pub s_norm: DMatrix<f64>,
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
    pub lambdas: [f64; 2],
    /// `λ1·L1 + λ2·L2`.
    pub l: DMatrix<f64>,
}

impl SideInfo {
    pub fn entities(&self) -> usize {
        self.l.nrows()
    }
}

pub fn build_side_info(g: &AttributedGraph, lambdas: [f64; 2]) -> Result<SideInfo> {
    if lambdas.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(SgrError::InvalidParam(format!(
            "side weights must be finite and nonnegative, got {lambdas:?}"
        )));
    }
    let q_norm = mnorm(&modularity_matrix(g)?)?;
    let s_norm = mnorm(&attribute_cosine(&g.attr_matrix()))?;
    let t1 = pad_node_block(&q_norm, g.m());
    let t2 = pad_node_block(&s_norm, g.m());
    let l = laplacian(&t1) * lambdas[0] + laplacian(&t2) * lambdas[1];
    Ok(SideInfo {
        q_norm,
        s_norm,
        t1,
        t2,
        lambdas,
        l,
    })
}

/// `½ Σ_{i,j} T[i,j] ‖X_i − X_j‖²` evaluated pairwise.
pub fn regularization_value(x: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
    if t.nrows() != t.ncols() || t.nrows() != x.nrows() {
        return Err(SgrError::Shape(format!(
            "X {:?} against T {:?}",
            x.shape(),
            t.shape()
        )));
    }
    let scale = t.amax().max(1.0);
    if asymmetry(t) > 1e-12 * scale {
        return Err(SgrError::InvalidParam("regularizer matrix is not symmetric".into()));
    }
    let n = x.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = t[(i, j)];
            if w != 0.0 {
                total += w * (x.row(i) - x.row(j)).norm_squared();
            }
        }
    }
    Ok(0.5 * total)
}

/// `tr(Xᵀ L X)`.
pub fn trace_form(x: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    x.dot(&(l * x))
}

/// Refined objective `‖Z − XYᵀ‖² + tr(XᵀLX)`.
pub fn objective(z: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    (z - x * y.transpose()).norm_squared() + trace_form(x, l)
}

/// `∂O/∂X = 2(X YᵀY − Z Y + L X)`.
pub fn grad_x(z: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    (x * (y.transpose() * y) - z * y + l * x) * 2.0
}

/// `∂O/∂Y = 2(Y XᵀX − Zᵀ X)`.
pub fn grad_y(z: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    (y * (x.transpose() * x) - z.transpose() * x) * 2.0
}

fn check_update_shapes(z: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<()> {
    if z.nrows() != z.ncols() || f.nrows() != z.nrows() {
        return Err(SgrError::Shape(format!(
            "Z {:?} against factor {:?}",
            z.shape(),
            f.shape()
        )));
    }
    Ok(())
}

/// `X' = (I + L)^† Z Y (YᵀY + I_k)^†`.
pub fn update_x(z: &DMatrix<f64>, y: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_update_shapes(z, y)?;
    if l.shape() != z.shape() {
        return Err(SgrError::Shape(format!("L {:?} against Z {:?}", l.shape(), z.shape())));
    }
    ensure_finite(z, "walk matrix")?;
    ensure_finite(y, "context embedding")?;
    ensure_finite(l, "laplacian")?;
    let k = y.ncols();
    let left = pinv(&(DMatrix::identity(l.nrows(), l.ncols()) + l))?;
    let right = pinv(&(y.transpose() * y + DMatrix::identity(k, k)))?;
    Ok(left * (z * y) * right)
}

/// Unregularized least-squares X step `Z Y (YᵀY)^†`.
pub fn update_x_least_squares(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_update_shapes(z, y)?;
    ensure_finite(z, "walk matrix")?;
    ensure_finite(y, "context embedding")?;
    Ok(z * y * pinv(&(y.transpose() * y))?)
}

/// `Y' = Zᵀ X (XᵀX)^†`.
pub fn update_y(z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_update_shapes(z, x)?;
    ensure_finite(z, "walk matrix")?;
    ensure_finite(x, "embedding")?;
    Ok(z.transpose() * x * pinv(&(x.transpose() * x))?)
}

/// Result of [`side_enhance`] with the objective before and after.
#[derive(Debug, Clone)]
pub struct Enhanced {
    pub model: EmbeddingModel,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Applies `iterations` rounds of (X step, Y step) starting from `model`.
/// One round is the standard setting.
pub fn side_enhance(
    model: &EmbeddingModel,
    walk: &WalkMatrix,
    side: &SideInfo,
    iterations: usize,
) -> Result<Enhanced> {
    let entities = model.n() + model.m();
    if walk.z().nrows() != entities || side.entities() != entities {
        return Err(SgrError::Shape(format!(
            "model has {entities} entities, walk matrix {}, side info {}",
            walk.z().nrows(),
            side.entities()
        )));
    }
    if iterations == 0 {
        return Err(SgrError::InvalidParam("at least one update round is required".into()));
    }
    let z = walk.z();
    let mut x = model.x().clone();
    let mut y = model.y().clone();
    let objective_before = objective(z, &x, &y, &side.l);
    info!("side enhancement: objective before update {objective_before:.9e}");
    for round in 0..iterations {
        x = update_x(z, &y, &side.l)?;
        y = update_y(z, &x)?;
        info!(
            "side enhancement: round {} objective {:.9e}",
            round + 1,
            objective(z, &x, &y, &side.l)
        );
    }
    let objective_after = objective(z, &x, &y, &side.l);
    let model = EmbeddingModel::new(x, y, model.n(), model.m(), model.order(), model.neg())?;
    Ok(Enhanced {
        model,
        objective_before,
        objective_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use approx::assert_relative_eq;

    fn triangle() -> AttributedGraph {
        parse_graph(("e", "0\t1\n1\t2\n0\t2\n"), ("a", "0\tx\n1\tx\n2\ty\n"), None).unwrap()
    }

    #[test]
    fn modularity_of_triangle() {
        let q = modularity_matrix(&triangle()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -2.0 / 3.0 } else { 1.0 / 3.0 };
                assert_relative_eq!(q[(i, j)], want, epsilon = 1e-15);
            }
            assert!(q.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn modularity_of_single_edge() {
        let g = parse_graph(("e", "0\t1\n"), ("a", ""), None).unwrap();
        let q = modularity_matrix(&g).unwrap();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));
    }

    #[test]
    fn modularity_requires_edges() {
        let g = parse_graph(("e", ""), ("a", "0\tx\n1\tx\n"), None).unwrap();
        assert!(modularity_matrix(&g).is_err());
    }

    #[test]
    fn cosine_examples() {
        let r0 = DMatrix::from_row_slice(4, 3, &[
            1.0, 1.0, 0.0, //
            0.0, 1.0, 1.0, //
            2.0, 2.0, 0.0, //
            0.0, 0.0, 0.0,
        ]);
        let s = attribute_cosine(&r0);
        assert_eq!(s[(0, 2)], 1.0);
        assert_relative_eq!(s[(0, 1)], 0.5, epsilon = 1e-15);
        assert_eq!(s[(3, 3)], 0.0);
        assert_eq!(s.row(3).sum(), 0.0);
        let disjoint = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert_eq!(attribute_cosine(&disjoint)[(0, 1)], 0.0);
    }

    #[test]
    fn side_info_padding_and_kernel() {
        let g = triangle();
        let off = build_side_info(&g, [0.0, 0.0]).unwrap();
        assert_eq!(off.l, DMatrix::zeros(5, 5));

        let q_only = build_side_info(&g, [1.0, 0.0]).unwrap();
        for i in 3..5 {
            assert!(q_only.l.row(i).iter().all(|&x| x == 0.0));
            assert!(q_only.t1.column(i).iter().all(|&x| x == 0.0));
        }

        let both = build_side_info(&g, [1.0, 1.0]).unwrap();
        let ones = DMatrix::from_element(5, 1, 1.0);
        assert!((&both.l * &ones).norm() < 1e-12);
        assert!((ones.transpose() * &both.l).norm() < 1e-12);
        assert!(build_side_info(&g, [-1.0, 0.0]).is_err());
    }

    #[test]
    fn regularization_examples() {
        let t = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.0, 0.2, 0.5, 0.2, 0.0]);
        let constant = DMatrix::from_element(3, 2, 1.7);
        assert_eq!(regularization_value(&constant, &t).unwrap(), 0.0);
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, -1.0, 1.0]);
        assert_eq!(regularization_value(&x, &DMatrix::zeros(3, 3)).unwrap(), 0.0);
        // pairs: (0,1) |(1,-2)|²=5 ·1, (0,2) |(2,-1)|²=5 ·0.5, (1,2) |(1,1)|²=2 ·0.2
        let want = 5.0 + 2.5 + 0.4;
        assert_relative_eq!(regularization_value(&x, &t).unwrap(), want, epsilon = 1e-12);
        assert_relative_eq!(trace_form(&x, &laplacian(&t)), want, epsilon = 1e-12);
        let mut asym = t.clone();
        asym[(0, 1)] = 3.0;
        assert!(regularization_value(&x, &asym).is_err());
    }

    #[test]
    fn x_step_with_orthonormal_y() {
        // Y with orthonormal columns: YᵀY = I, so X' = Z Y / 2 when L = 0.
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5]);
        let x = update_x(&z, &y, &DMatrix::zeros(3, 3)).unwrap();
        assert_relative_eq!(x, &z * &y / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_target_gives_zero_updates() {
        let z = DMatrix::zeros(3, 3);
        let y = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let x = update_x(&z, &y, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(x, DMatrix::zeros(3, 1));
        assert_eq!(update_y(&z, &y).unwrap(), DMatrix::zeros(3, 1));
    }

    #[test]
    fn update_rejects_non_finite() {
        let mut z = DMatrix::zeros(2, 2);
        z[(0, 0)] = f64::NAN;
        let y = DMatrix::zeros(2, 1);
        assert!(matches!(update_y(&z, &y), Err(SgrError::NonFinite(_))));
    }

    #[test]
    fn enhance_is_deterministic_and_checks_shapes() {
        let g = triangle();
        let params = crate::embed::EmbedParams {
            dim: 3,
            ..Default::default()
        };
        let run = crate::embed::embed_run(&g, &params).unwrap();
        let side = build_side_info(&g, [1.0, 1.0]).unwrap();
        let a = side_enhance(&run.model, &run.walk, &side, 1).unwrap();
        let b = side_enhance(&run.model, &run.walk, &side, 1).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.objective_before.is_finite() && a.objective_after.is_finite());

        let other = parse_graph(("e", "0\t1\n"), ("a", ""), None).unwrap();
        let wrong = build_side_info(&other, [1.0, 0.0]).unwrap();
        assert!(matches!(
            side_enhance(&run.model, &run.walk, &wrong, 1),
            Err(SgrError::Shape(_))
        ));
    }
}
