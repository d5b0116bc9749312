//! Brute-force reference computations and random instance generators.
//!
//! Nothing here calls the routines it is used to check: matrices are plain
//! nested `Vec`s, powers are formed explicitly, and motif counts come from
//! enumerating every motif instance.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::graph::{AttributedGraph, GraphBuilder};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &DMatrix<f64>) -> Dense {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            let x = a[i][t];
            if x != 0.0 {
                for j in 0..m {
                    out[i][j] += x * b[t][j];
                }
            }
        }
    }
    out
}

/// `vol/(o·b) · Σ_{r=1..o} (D⁻¹B)^r · D⁻¹` with each power formed from
/// scratch, and its truncated log `log(max(·, 1))`.
pub fn walk_matrix_reference(b: &Dense, order: usize, neg: usize) -> (Dense, Dense) {
    let n = b.len();
    let deg: Vec<f64> = b.iter().map(|r| r.iter().sum()).collect();
    let vol: f64 = deg.iter().sum();
    let step: Dense = (0..n)
        .map(|i| (0..n).map(|j| b[i][j] / deg[i]).collect())
        .collect();
    let mut sum = vec![vec![0.0; n]; n];
    for r in 1..=order {
        let mut power = step.clone();
        for _ in 1..r {
            power = matmul(&power, &step);
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += power[i][j];
            }
        }
    }
    let m: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| vol * sum[i][j] / order as f64 / deg[j] / neg as f64)
                .collect()
        })
        .collect();
    let z = m
        .iter()
        .map(|row| row.iter().map(|&x| if x > 1.0 { x.ln() } else { 0.0 }).collect())
        .collect();
    (m, z)
}

/// Counts, for every `(i, w)` on the support of `r0`, the motif instances
/// containing it: pairs of distinct nodes sharing `w`, and pairs of distinct
/// attributes on `i`.
pub fn motif_counts_by_enumeration(r0: &[Vec<bool>]) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
    let n = r0.len();
    let m = if n == 0 { 0 } else { r0[0].len() };
    let mut shared = vec![vec![0u64; m]; n];
    let mut co = vec![vec![0u64; m]; n];
    for w in 0..m {
        for i in 0..n {
            for j in (i + 1)..n {
                if r0[i][w] && r0[j][w] {
                    shared[i][w] += 1;
                    shared[j][w] += 1;
                }
            }
        }
    }
    for i in 0..n {
        for w in 0..m {
            for s in (w + 1)..m {
                if r0[i][w] && r0[i][s] {
                    co[i][w] += 1;
                    co[i][s] += 1;
                }
            }
        }
    }
    (shared, co)
}

/// Inverse of a nonsingular matrix by Gauss-Jordan elimination with
/// partial pivoting.
pub fn gauss_jordan_inverse(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let mut aug: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for x in aug[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn add_identity(a: &mut Dense) {
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
}

/// `(I + L)⁻¹ Z Y (YᵀY + I)⁻¹` by explicit inversion. Both bracketed
/// matrices are symmetric positive definite when `L` is a Laplacian.
pub fn x_update_reference(z: &Dense, y: &Dense, l: &Dense) -> Option<Dense> {
    let mut left = l.clone();
    add_identity(&mut left);
    let mut gram = matmul(&transpose(y), y);
    add_identity(&mut gram);
    Some(matmul(
        &matmul(&gauss_jordan_inverse(&left)?, &matmul(z, y)),
        &gauss_jordan_inverse(&gram)?,
    ))
}

/// Random connected attributed graph: a random spanning tree plus extra
/// edges, and `m` attributes each carried by at least one node.
pub fn random_attributed_graph<R: Rng>(rng: &mut R, n: usize, m: usize, weighted: bool) -> Result<AttributedGraph> {
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(&i.to_string());
    }
    for i in 1..n {
        let j = rng.gen_range(0..i);
        b.add_edge(&i.to_string(), &j.to_string());
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.3) {
                b.add_edge(&i.to_string(), &j.to_string());
            }
        }
    }
    let weight = |rng: &mut R| if weighted { rng.gen_range(0.1..3.0) } else { 1.0 };
    for w in 0..m {
        let owner = rng.gen_range(0..n);
        let x = weight(rng);
        b.add_attr(&owner.to_string(), &format!("a{w}"), x)?;
        for i in 0..n {
            if i != owner && rng.gen_bool(0.35) {
                let x = weight(rng);
                b.add_attr(&i.to_string(), &format!("a{w}"), x)?;
            }
        }
    }
    b.build()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// Central finite-difference gradient of `f` at `x`, step `h·max(|x_ij|, 1)`.
pub fn finite_difference<F>(x: &DMatrix<f64>, h: f64, f: F) -> DMatrix<f64>
where
    F: Fn(&DMatrix<f64>) -> f64,
{
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let step = h * x[(i, j)].abs().max(1.0);
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + step;
            let up = f(&probe);
            probe[(i, j)] = orig - step;
            let down = f(&probe);
            probe[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * step);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_walk_examples() {
        let b = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let (m, z) = walk_matrix_reference(&b, 2, 1);
        assert_eq!(m, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(z, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let k3 = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let (_, z) = walk_matrix_reference(&k3, 1, 1);
        assert!((z[0][1] - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn enumeration_examples() {
        let r0 = vec![vec![true, true], vec![false, true]];
        let (shared, co) = motif_counts_by_enumeration(&r0);
        assert_eq!(shared, vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(co, vec![vec![1, 1], vec![0, 0]]);
    }

    #[test]
    fn inverse_round_trip() {
        let a = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
        let inv = gauss_jordan_inverse(&a).unwrap();
        let id = matmul(&a, &inv);
        for i in 0..2 {
            for j in 0..2 {
                assert!((id[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        assert!(gauss_jordan_inverse(&vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }
}
