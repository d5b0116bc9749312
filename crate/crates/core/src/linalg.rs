//! Dense linear-algebra helpers shared by the factorization and update steps.

use log::debug;
use nalgebra::{DMatrix, DVector, Dyn, SVD};

use crate::error::{Result, SgrError};

/// Relative cutoff below which singular values are treated as zero in
/// [`pinv`].
pub const PINV_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SgrError::NonFinite(what))
    }
}

/// Convergence tolerance handed to the SVD, the one `SVD::new` uses.
const SVD_EPS: f64 = 5.0 * f64::EPSILON;

/// Accepted `‖A − UΣVᵀ‖ / ‖A‖`, `‖UᵀU − I‖` and `‖VᵀV − I‖`, in units of
/// `ε · max(rows, cols)`. A converged bidiagonal solve stays near 1.
const SVD_CHECK_FACTOR: f64 = 20.0;

const JACOBI_MAX_SWEEPS: usize = 100;

type Svd = SVD<f64, Dyn, Dyn>;

/// Thin SVD with singular values in descending order.
///
/// The bidiagonal QR solver occasionally returns wrong singular vectors
/// for rank-deficient input, so its result is checked and, on a miss,
/// recomputed with one-sided Jacobi.
pub fn svd(m: DMatrix<f64>) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let max_abs = m.amax();
    let failed = SgrError::SvdFailed { rows, cols, max_abs };
    if let Some(d) = SVD::try_new(m.clone(), true, true, SVD_EPS, 0) {
        let tol = SVD_CHECK_FACTOR * f64::EPSILON * rows.max(cols) as f64;
        if svd_error(&m, &d) <= tol {
            return Ok(d);
        }
    }
    debug!("bidiagonal SVD of a {rows}x{cols} matrix failed its check; using Jacobi");
    let d = jacobi_svd(&m).ok_or(failed)?;
    Ok(d)
}

/// Worst of the relative reconstruction error and the orthonormality
/// defects of `U` and `V`.
pub fn svd_error(m: &DMatrix<f64>, d: &Svd) -> f64 {
    let u = d.u.as_ref().expect("u requested");
    let vt = d.v_t.as_ref().expect("v requested");
    let k = d.singular_values.len();
    let mut us = u.clone();
    for (j, &s) in d.singular_values.iter().enumerate() {
        us.column_mut(j).scale_mut(s);
    }
    let norm = m.norm();
    let recon = if norm > 0.0 { (m - us * vt).norm() / norm } else { (us * vt).norm() };
    let id = DMatrix::<f64>::identity(k, k);
    let ou = (u.transpose() * u - &id).norm();
    let ov = (vt * vt.transpose() - &id).norm();
    recon.max(ou).max(ov)
}

/// One-sided Jacobi SVD. Slower than the bidiagonal solver but accurate
/// on rank-deficient input. `None` if the sweeps do not converge.
pub fn jacobi_svd(m: &DMatrix<f64>) -> Option<Svd> {
    if m.nrows() < m.ncols() {
        let d = jacobi_svd(&m.transpose())?;
        return Some(SVD {
            u: d.v_t.map(|vt| vt.transpose()),
            v_t: d.u.map(|u| u.transpose()),
            singular_values: d.singular_values,
        });
    }
    let (rows, cols) = m.shape();
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let tol = (rows as f64).sqrt() * f64::EPSILON;
    // columns this small are rounding noise and are zeroed
    let negligible = (f64::EPSILON * m.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    let sigma: Vec<f64> = w
        .column_iter()
        .map(|c| if c.norm_squared() <= negligible { 0.0 } else { c.norm() })
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let mut u = DMatrix::zeros(rows, cols);
    let mut vs = DMatrix::zeros(cols, cols);
    for (j, &src) in order.iter().enumerate() {
        if sigma[src] > 0.0 {
            u.set_column(j, &(w.column(src) / sigma[src]));
        }
        vs.set_column(j, &v.column(src));
    }
    // zero singular values leave their U columns to be completed
    for j in 0..cols {
        if sigma[order[j]] > 0.0 {
            continue;
        }
        for e in 0..rows {
            let mut c = nalgebra::DVector::<f64>::zeros(rows);
            c[e] = 1.0;
            for _ in 0..2 {
                for i in 0..cols {
                    if i != j && u.column(i).norm_squared() > 0.0 {
                        let proj = u.column(i).dot(&c);
                        c -= u.column(i) * proj;
                    }
                }
            }
            let norm = c.norm();
            if norm > 0.5 {
                u.set_column(j, &(c / norm));
                break;
            }
        }
    }
    Some(SVD {
        u: Some(u),
        v_t: Some(vs.transpose()),
        singular_values: DVector::from_iterator(cols, order.iter().map(|&i| sigma[i])),
    })
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// `PINV_TOL * max` are dropped.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(m, "pseudo-inverse input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let d = svd(m.clone())?;
    let u = d.u.as_ref().expect("u requested");
    let vt = d.v_t.as_ref().expect("v requested");
    let smax = d.singular_values.max();
    let cutoff = PINV_TOL * smax;
    let mut out = DMatrix::zeros(cols, rows);
    for (i, &s) in d.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            // out += v_i u_iᵀ / s
            let v = vt.row(i).transpose();
            let ui = u.column(i);
            out.ger(1.0 / s, &v, &ui, 1.0);
        }
    }
    Ok(out)
}

/// Flips each column of `u` (and the matching column of `v`) so that the
/// largest-magnitude entry of the `u` column is positive. Ties resolve to
/// the lowest row index.
pub fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..u.ncols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in u.column(j).iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
}

/// Maximum absolute asymmetry `max |M - Mᵀ|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = pinv(&m).unwrap();
        assert_relative_eq!(&m * &p, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient_satisfies_penrose() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let p = pinv(&m).unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert_relative_eq!(&m * &p * &m, m.clone(), epsilon = 1e-10);
        assert_relative_eq!(&p * &m * &p, p.clone(), epsilon = 1e-10);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let p = pinv(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(p, DMatrix::zeros(2, 3));
    }

    fn check(m: &DMatrix<f64>, d: &Svd, tol: f64) {
        assert!(svd_error(m, d) <= tol, "svd error {:e}", svd_error(m, d));
        let s = d.singular_values.as_slice();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn jacobi_matches_bidiagonal_spectrum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (r, c) in [(6, 6), (9, 4), (3, 8), (1, 5)] {
            let m = crate::oracle::random_matrix(&mut rng, r, c, -1.0, 1.0);
            let j = jacobi_svd(&m).unwrap();
            check(&m, &j, 1e-13);
            let reference = SVD::new(m.clone(), false, false);
            assert_relative_eq!(j.singular_values, reference.singular_values, epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobi_completes_null_directions() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 0.0]);
        let j = jacobi_svd(&m).unwrap();
        check(&m, &j, 1e-13);
        assert_eq!(&j.singular_values.as_slice()[1..], &[0.0, 0.0]);
        let z = DMatrix::zeros(2, 3);
        let j = jacobi_svd(&z).unwrap();
        check(&z, &j, 1e-15);
    }

    /// A rank-deficient walk matrix on which the bidiagonal solver returns
    /// singular vectors with a 4% reconstruction error.
    #[test]
    fn rank_deficient_walk_matrix_reconstructs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10890);
        let n = rng.gen_range(3..12);
        let m = rng.gen_range(1..6);
        let g = crate::oracle::random_attributed_graph(&mut rng, n, m, false).unwrap();
        let b = crate::aux_graph::build_hetero_adjacency(&g, &crate::aux_graph::AuxParams::default()).unwrap();
        let z = crate::embed::walk_matrix(&b, rng.gen_range(1..6), 1).unwrap().z().clone();
        let raw = SVD::try_new(z.clone(), true, true, SVD_EPS, 0).unwrap();
        assert!(svd_error(&z, &raw) > 1e-3);
        check(&z, &svd(z.clone()).unwrap(), 1e-13);
    }

    #[test]
    fn sign_fix_makes_dominant_entry_positive() {
        let mut u = DMatrix::from_row_slice(2, 2, &[0.1, -0.2, -0.9, 0.1]);
        let mut v = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        fix_signs(&mut u, &mut v);
        assert_eq!(u[(1, 0)], 0.9);
        assert_eq!(u[(0, 1)], 0.2);
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]));
    }
}
