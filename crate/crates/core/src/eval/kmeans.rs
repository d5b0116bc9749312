use nalgebra::{DMatrix, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SgrError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 10,
            max_iter: 300,
        }
    }
}

/// A hard partition of points with its cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub k: usize,
    /// k × dim.
    pub centers: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

impl Clustering {
    /// Indices of the points assigned to cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == c)
            .map(|(i, _)| i)
            .collect()
    }
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centers.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.nrows() {
        let d = sq_dist(points, i, centers, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// D²-weighted seeding.
fn seed_centers(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = *chosen.last().unwrap();
        for i in 0..n {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(points.row(last).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[i] = d2[i].min(d);
        }
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    if target < d {
                        pick = i;
                        break;
                    }
                    target -= d;
                    pick = i;
                }
            }
            pick
        } else {
            // every point coincides with a center; take any unused index
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
    }
    DMatrix::from_fn(k, points.ncols(), |c, j| points[(chosen[c], j)])
}

fn lloyd(points: &DMatrix<f64>, mut centers: DMatrix<f64>, max_iter: usize) -> Clustering {
    let (n, dim) = points.shape();
    let k = centers.nrows();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest(points, i, &centers);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        repair_empty(points, &mut assignment, &centers, k);
        centers = means(points, &assignment, k, dim);
    }
    let wcss = (0..n)
        .map(|i| sq_dist(points, i, &centers, assignment[i]))
        .sum();
    Clustering {
        assignment,
        k,
        centers,
        wcss,
    }
}

/// Moves the point farthest from its center in the largest cluster into
/// each empty cluster.
fn repair_empty(points: &DMatrix<f64>, assignment: &mut [usize], centers: &DMatrix<f64>, k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
        let far = (0..assignment.len())
            .filter(|&i| assignment[i] == largest)
            .max_by(|&a, &b| {
                sq_dist(points, a, centers, largest)
                    .total_cmp(&sq_dist(points, b, centers, largest))
                    .then(b.cmp(&a))
            })
            .unwrap();
        assignment[far] = empty;
    }
}

fn means(points: &DMatrix<f64>, assignment: &[usize], k: usize, dim: usize) -> DMatrix<f64> {
    let mut sums = DMatrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        let mut row = sums.row_mut(a);
        row += points.row(i);
        counts[a] += 1;
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            let mut row = sums.row_mut(c);
            row /= cnt as f64;
        }
    }
    sums
}

/// k-means with default restarts and iteration cap.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<Clustering> {
    kmeans_with(points, k, seed, &KMeansConfig::default())
}

/// Best-of-`restarts` Lloyd clustering by within-cluster sum of squares.
pub fn kmeans_with(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<Clustering> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(SgrError::InvalidParam(format!(
            "cluster count {k} outside 1..={n}"
        )));
    }
    if !points.iter().all(|x| x.is_finite()) {
        return Err(SgrError::NonFinite("k-means points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..config.restarts.max(1) {
        let centers = seed_centers(points, k, &mut rng);
        let c = lloyd(points, centers, config.max_iter.max(1));
        if best.as_ref().is_none_or(|b| c.wcss < b.wcss) {
            best = Some(c);
        }
    }
    Ok(best.unwrap())
}

/// Mean of the given rows.
pub fn centroid(points: &DMatrix<f64>, rows: &[usize]) -> RowDVector<f64> {
    let mut acc = RowDVector::zeros(points.ncols());
    for &i in rows {
        acc += points.row(i);
    }
    if !rows.is_empty() {
        acc /= rows.len() as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let off = if c == 0 { -5.0 } else { 5.0 };
            rows.push(off + noise.sample(&mut rng));
            rows.push(off + noise.sample(&mut rng));
            truth.push(c);
        }
        (DMatrix::from_row_slice(40, 2, &rows), truth)
    }

    #[test]
    fn separates_blobs() {
        let (p, truth) = blobs(3);
        let c = kmeans(&p, 2, 7).unwrap();
        let first = c.assignment[0];
        for (a, t) in c.assignment.iter().zip(&truth) {
            assert_eq!(*a == first, *t == truth[0]);
        }
    }

    #[test]
    fn one_point_per_cluster() {
        let p = DMatrix::from_row_slice(3, 1, &[0.0, 10.0, 20.0]);
        let c = kmeans(&p, 3, 0).unwrap();
        assert_eq!(c.wcss, 0.0);
        let mut a = c.assignment.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_points_still_fill_clusters() {
        let p = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let c = kmeans(&p, 3, 0).unwrap();
        for cl in 0..3 {
            assert!(!c.members(cl).is_empty());
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (p, _) = blobs(5);
        assert_eq!(kmeans(&p, 3, 11).unwrap(), kmeans(&p, 3, 11).unwrap());
    }

    #[test]
    fn errors() {
        let p = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(kmeans(&p, 3, 0).is_err());
        assert!(kmeans(&p, 0, 0).is_err());
        let bad = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(matches!(kmeans(&bad, 1, 0), Err(SgrError::NonFinite(_))));
    }
}
