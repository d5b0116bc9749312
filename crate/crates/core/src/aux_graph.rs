//! Auxiliary heterogeneous graph over nodes and attributes.
//!
//! Entities `0..n` are nodes and `n..n+m` are attributes. The weighted
//! adjacency is assembled from three blocks: node-node topology, the
//! motif-weighted node-attribute relation, and attribute-attribute
//! similarity, each rescaled onto `[0, 1]`.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Result, SgrError};
use crate::graph::AttributedGraph;
use crate::linalg::ensure_finite;

/// Default cap on `n + m` for dense construction.
pub const DEFAULT_SIZE_CAP: usize = 20_000;

/// Max-min rescaling of all entries jointly onto `[0, 1]`.
///
/// A constant matrix (including the empty one) maps to zeros.
pub fn mnorm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(m, "mnorm input")?;
    if m.is_empty() {
        return Ok(m.clone());
    }
    let lo = m.min();
    let hi = m.max();
    if hi == lo {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    let span = hi - lo;
    Ok(m.map(|x| (x - lo) / span))
}

/// Column-wise cosine similarity of `r0` (m×m), with an exact unit diagonal.
pub fn column_cosine(r0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = r0.ncols();
    let sq: Vec<f64> = r0.column_iter().map(|c| c.norm_squared()).collect();
    if let Some(w) = sq.iter().position(|&x| x == 0.0) {
        return Err(SgrError::InvalidGraph(format!(
            "attribute column {w} has zero norm"
        )));
    }
    // dot / sqrt(|a|²|b|²) keeps parallel integer columns at exactly 1
    let gram = r0.tr_mul(r0);
    let mut p0 = DMatrix::identity(m, m);
    for w in 0..m {
        for s in (w + 1)..m {
            let c = (gram[(w, s)] / (sq[w] * sq[s]).sqrt()).clamp(0.0, 1.0);
            p0[(w, s)] = c;
            p0[(s, w)] = c;
        }
    }
    Ok(p0)
}

/// Symmetrically degree-normalized attribute similarity, before rescaling.
pub fn normalized_similarity(p0: &DMatrix<f64>) -> DMatrix<f64> {
    let inv_sqrt: Vec<f64> = p0.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    DMatrix::from_fn(p0.nrows(), p0.ncols(), |i, j| {
        (inv_sqrt[i] * inv_sqrt[j]) * p0[(i, j)]
    })
}

/// Attribute-attribute block: cosine similarity of attribute columns,
/// degree-normalized as `D^-1/2 P0 D^-1/2`, then max-min rescaled.
pub fn attribute_similarity(r0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(r0, "relation matrix")?;
    let p0 = column_cosine(r0)?;
    mnorm(&normalized_similarity(&p0))
}

/// Second-order relation matrices derived from the support of `r0`.
///
/// `shared` counts, for each `(i, w)` with `r0[i,w] > 0`, the other nodes
/// that also carry `w`; `co` counts the other attributes carried by `i`.
/// In weighted mode each count is scaled by `r0[i,w]`.
pub fn motif_relations(r0: &DMatrix<f64>, weighted: bool) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_finite(r0, "relation matrix")?;
    if r0.iter().any(|&x| x < 0.0) {
        return Err(SgrError::InvalidGraph("negative relation weight".into()));
    }
    let (n, m) = r0.shape();
    let col_support: Vec<usize> = (0..m)
        .map(|w| r0.column(w).iter().filter(|&&x| x > 0.0).count())
        .collect();
    let row_support: Vec<usize> = (0..n)
        .map(|i| r0.row(i).iter().filter(|&&x| x > 0.0).count())
        .collect();
    let mut shared = DMatrix::zeros(n, m);
    let mut co = DMatrix::zeros(n, m);
    for i in 0..n {
        for w in 0..m {
            let x = r0[(i, w)];
            if x > 0.0 {
                let scale = if weighted { x } else { 1.0 };
                shared[(i, w)] = scale * (col_support[w] - 1) as f64;
                co[(i, w)] = scale * (row_support[i] - 1) as f64;
            }
        }
    }
    Ok((shared, co))
}

/// Rescales each relation matrix, mixes them with `deltas`, and rescales
/// the mixture.
pub fn combine_relations(
    r0: &DMatrix<f64>,
    r1: &DMatrix<f64>,
    r2: &DMatrix<f64>,
    deltas: [f64; 3],
) -> Result<DMatrix<f64>> {
    check_deltas(deltas)?;
    if r0.shape() != r1.shape() || r0.shape() != r2.shape() {
        return Err(SgrError::Shape(format!(
            "relation matrices {:?}, {:?}, {:?}",
            r0.shape(),
            r1.shape(),
            r2.shape()
        )));
    }
    let mut mix = DMatrix::zeros(r0.nrows(), r0.ncols());
    for (r, &d) in [r0, r1, r2].into_iter().zip(&deltas) {
        if d != 0.0 {
            mix += mnorm(r)? * d;
        }
    }
    mnorm(&mix)
}

fn check_deltas(deltas: [f64; 3]) -> Result<()> {
    if deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(SgrError::InvalidParam(format!(
            "motif weights must be finite and nonnegative, got {deltas:?}"
        )));
    }
    Ok(())
}

/// Options controlling auxiliary-graph construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxParams {
    /// Weights of the direct, shared-attribute and co-attribute relations.
    pub deltas: [f64; 3],
    /// Scale motif counts by the relation weight instead of counting.
    pub weighted_motifs: bool,
    /// Include the attribute-attribute similarity block; when false it is
    /// zeroed.
    pub attr_similarity: bool,
    /// Largest `n + m` allowed for dense construction.
    pub size_cap: usize,
}

impl Default for AuxParams {
    fn default() -> Self {
        AuxParams {
            deltas: [1.0, 1.0, 1.0],
            weighted_motifs: false,
            attr_similarity: true,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

/// Symmetric weighted adjacency of the auxiliary graph.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroAdjacency {
    b: DMatrix<f64>,
    n: usize,
    m: usize,
    deltas: [f64; 3],
}

impl HeteroAdjacency {
    /// Assembles `[[A, R], [Rᵀ, P]]` from its blocks.
    pub fn from_blocks(
        block_a: &DMatrix<f64>,
        block_r: &DMatrix<f64>,
        block_p: &DMatrix<f64>,
        deltas: [f64; 3],
    ) -> Result<Self> {
        let n = block_a.nrows();
        let m = block_p.nrows();
        if block_a.shape() != (n, n) || block_r.shape() != (n, m) || block_p.shape() != (m, m) {
            return Err(SgrError::Shape(format!(
                "blocks {:?}, {:?}, {:?}",
                block_a.shape(),
                block_r.shape(),
                block_p.shape()
            )));
        }
        let mut b = DMatrix::zeros(n + m, n + m);
        b.view_mut((0, 0), (n, n)).copy_from(block_a);
        b.view_mut((0, n), (n, m)).copy_from(block_r);
        b.view_mut((n, 0), (m, n)).copy_from(&block_r.transpose());
        b.view_mut((n, n), (m, m)).copy_from(block_p);
        Ok(HeteroAdjacency { b, n, m, deltas })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn deltas(&self) -> [f64; 3] {
        self.deltas
    }

    pub fn block_a(&self) -> DMatrix<f64> {
        self.b.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn block_r(&self) -> DMatrix<f64> {
        self.b.view((0, self.n), (self.n, self.m)).into_owned()
    }

    pub fn block_p(&self) -> DMatrix<f64> {
        self.b.view((self.n, self.n), (self.m, self.m)).into_owned()
    }

    /// Writes nonzero entries as `i<TAB>j<TAB>value` lines.
    pub fn write_triples<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.b.nrows() {
            for j in 0..self.b.ncols() {
                let x = self.b[(i, j)];
                if x != 0.0 {
                    writeln!(out, "{i}\t{j}\t{}", crate::embedding_io::format_g17(x))?;
                }
            }
        }
        Ok(())
    }
}

/// External tag of entity `e` in the auxiliary graph (`n:<id>` / `a:<id>`).
pub(crate) fn entity_tag(g: &AttributedGraph, e: usize) -> String {
    if e < g.n() {
        format!("n:{}", g.node_ids()[e])
    } else {
        format!("a:{}", g.attr_ids()[e - g.n()])
    }
}

/// Builds the auxiliary adjacency for `g`. Fails if any entity ends up with
/// no incident weight.
pub fn build_hetero_adjacency(g: &AttributedGraph, params: &AuxParams) -> Result<HeteroAdjacency> {
    check_deltas(params.deltas)?;
    let (n, m) = (g.n(), g.m());
    if n + m > params.size_cap {
        return Err(SgrError::SizeCap {
            entities: n + m,
            cap: params.size_cap,
        });
    }
    let a = g.adjacency();
    let r0 = g.attr_matrix();

    let p = if params.attr_similarity && m > 0 {
        attribute_similarity(&r0)?
    } else {
        DMatrix::zeros(m, m)
    };
    let (r1, r2) = motif_relations(&r0, params.weighted_motifs)?;
    let r = combine_relations(&r0, &r1, &r2, params.deltas)?;

    let hetero = HeteroAdjacency::from_blocks(&a, &r, &p, params.deltas)?;
    for (e, row) in hetero.b.row_iter().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            return Err(SgrError::IsolatedEntity(entity_tag(g, e)));
        }
    }
    Ok(hetero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use approx::assert_relative_eq;

    fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn mnorm_examples() {
        assert_eq!(
            mnorm(&mat(1, 3, &[-1.0, 0.0, 3.0])).unwrap(),
            mat(1, 3, &[0.0, 0.25, 1.0])
        );
        assert_eq!(mnorm(&DMatrix::from_element(2, 2, 2.0)).unwrap(), DMatrix::zeros(2, 2));
        let unit = mat(2, 2, &[0.0, 0.3, 1.0, 0.5]);
        assert_eq!(mnorm(&unit).unwrap(), unit);
    }

    #[test]
    fn mnorm_rejects_nan() {
        assert!(matches!(
            mnorm(&mat(1, 2, &[0.0, f64::NAN])),
            Err(SgrError::NonFinite(_))
        ));
        assert!(mnorm(&mat(1, 2, &[0.0, f64::INFINITY])).is_err());
    }

    #[test]
    fn similarity_of_identical_columns_is_degenerate() {
        let r0 = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p0 = column_cosine(&r0).unwrap();
        assert_relative_eq!(p0, DMatrix::from_element(2, 2, 1.0), epsilon = 1e-15);
        assert_eq!(attribute_similarity(&r0).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn similarity_of_overlapping_columns() {
        let r0 = mat(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let p = normalized_similarity(&column_cosine(&r0).unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(p[(0, 0)], 1.0 / (1.0 + h), epsilon = 1e-15);
        assert_relative_eq!(p[(0, 0)], 0.585786437626905, epsilon = 1e-12);
        assert_relative_eq!(p[(0, 1)], 0.414213562373095, epsilon = 1e-12);
        assert_eq!(attribute_similarity(&r0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn similarity_of_orthogonal_columns() {
        let r0 = mat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(attribute_similarity(&r0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn motif_examples() {
        let (r1, r2) = motif_relations(&mat(2, 2, &[1.0, 1.0, 0.0, 1.0]), false).unwrap();
        assert_eq!(r1, mat(2, 2, &[0.0, 1.0, 0.0, 1.0]));
        assert_eq!(r2, mat(2, 2, &[1.0, 1.0, 0.0, 0.0]));

        let mut single = DMatrix::zeros(3, 3);
        single[(1, 2)] = 4.0;
        let (r1, r2) = motif_relations(&single, false).unwrap();
        assert_eq!(r1, DMatrix::zeros(3, 3));
        assert_eq!(r2, DMatrix::zeros(3, 3));

        let (r1, r2) = motif_relations(&DMatrix::from_element(4, 3, 1.0), false).unwrap();
        assert_eq!(r1, DMatrix::from_element(4, 3, 3.0));
        assert_eq!(r2, DMatrix::from_element(4, 3, 2.0));
    }

    #[test]
    fn weighted_motifs_scale_by_weight() {
        let r0 = mat(2, 2, &[2.0, 0.5, 0.0, 3.0]);
        let (r1, r2) = motif_relations(&r0, true).unwrap();
        assert_eq!(r1, mat(2, 2, &[0.0, 0.5, 0.0, 3.0]));
        assert_eq!(r2, mat(2, 2, &[2.0, 0.5, 0.0, 0.0]));
    }

    #[test]
    fn combine_direct_only_is_identity_on_binary() {
        let r0 = mat(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let (r1, r2) = motif_relations(&r0, false).unwrap();
        assert_eq!(combine_relations(&r0, &r1, &r2, [1.0, 0.0, 0.0]).unwrap(), r0);
        assert_eq!(
            combine_relations(&r0, &r1, &r2, [0.0, 0.0, 0.0]).unwrap(),
            DMatrix::zeros(2, 3)
        );
    }

    #[test]
    fn combine_all_motifs() {
        // R0=[[1,1],[0,1]]: R̃0 = R0, R̃1 = R1 = [[0,1],[0,1]], R̃2 = R2 = [[1,1],[0,0]]
        // sum = [[2,3],[0,2]] → /3
        let r0 = mat(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let (r1, r2) = motif_relations(&r0, false).unwrap();
        let r = combine_relations(&r0, &r1, &r2, [1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(r, mat(2, 2, &[2.0 / 3.0, 1.0, 0.0, 2.0 / 3.0]), epsilon = 1e-15);
    }

    #[test]
    fn negative_deltas_rejected() {
        let z = DMatrix::zeros(1, 1);
        assert!(matches!(
            combine_relations(&z, &z, &z, [1.0, -1.0, 0.0]),
            Err(SgrError::InvalidParam(_))
        ));
    }

    #[test]
    fn hetero_minimal_example() {
        let g = parse_graph(("e", "0\t1\n"), ("a", "0\tx\n"), None).unwrap();
        let params = AuxParams {
            deltas: [1.0, 0.0, 0.0],
            ..AuxParams::default()
        };
        let h = build_hetero_adjacency(&g, &params).unwrap();
        assert_eq!(
            h.matrix(),
            &mat(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        assert_eq!((h.n(), h.m()), (2, 1));
    }

    #[test]
    fn hetero_without_attributes_is_adjacency() {
        let g = parse_graph(("e", "0\t1\n1\t2\n"), ("a", "0\tx\t0\n"), None).unwrap();
        assert_eq!(g.m(), 0);
        let h = build_hetero_adjacency(&g, &AuxParams::default()).unwrap();
        assert_eq!(h.matrix(), &g.adjacency());
    }

    #[test]
    fn hetero_reports_isolated_entity() {
        let g = parse_graph(("e", "0\t1\n"), ("a", "0\tx\n1\ty\n"), None).unwrap();
        let params = AuxParams {
            deltas: [0.0, 0.0, 0.0],
            attr_similarity: false,
            ..AuxParams::default()
        };
        match build_hetero_adjacency(&g, &params) {
            Err(SgrError::IsolatedEntity(tag)) => assert_eq!(tag, "a:x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn size_cap_enforced() {
        let g = parse_graph(("e", "0\t1\n1\t2\n"), ("a", "0\tx\n"), None).unwrap();
        let params = AuxParams {
            size_cap: 3,
            ..AuxParams::default()
        };
        assert!(matches!(
            build_hetero_adjacency(&g, &params),
            Err(SgrError::SizeCap { entities: 4, cap: 3 })
        ));
    }

    #[test]
    fn triples_dump() {
        let g = parse_graph(("e", "0\t1\n"), ("a", "0\tx\n"), None).unwrap();
        let params = AuxParams {
            deltas: [1.0, 0.0, 0.0],
            ..AuxParams::default()
        };
        let h = build_hetero_adjacency(&g, &params).unwrap();
        let mut buf = Vec::new();
        h.write_triples(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "0\t1\t1\n0\t2\t1\n1\t0\t1\n2\t0\t1\n"
        );
    }
}
