use std::collections::HashMap;

use crate::error::{Result, SgrError};

fn check_len(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(SgrError::Shape(format!(
            "partitions of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Relabels to dense ids `0..k` in first-appearance order.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (a, ka) = densify(a);
    let (b, kb) = densify(b);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1;
    }
    (table, ka, kb)
}

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, normalized by the arithmetic mean of the
/// two entropies.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    check_len(a, b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    let (table, ka, kb) = contingency(a, b);
    let total = a.len() as f64;
    let row: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<usize> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let ha = entropy(row.iter().copied(), total);
    let hb = entropy(col.iter().copied(), total);
    if ha == 0.0 || hb == 0.0 {
        // a constant partition only matches another constant partition
        return Ok(if ka == 1 && kb == 1 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let nij = table[i][j];
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / total * (nij * total / (row[i] as f64 * col[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

/// Minimum-cost perfect assignment on a square cost matrix. Returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // potentials formulation, 1-based with a virtual column 0
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Fraction of elements correct after optimally matching predicted clusters
/// to true classes one-to-one.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_len(pred, truth)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let (table, kp, kt) = contingency(pred, truth);
    let size = kp.max(kt);
    let max = pred.len() as f64;
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let overlap = if i < kp && j < kt { table[i][j] } else { 0 };
                    max - overlap as f64
                })
                .collect()
        })
        .collect();
    let matched: usize = hungarian(&cost)
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < kp && j < kt)
        .map(|(i, &j)| table[i][j])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// Optimal one-to-one map from predicted cluster index to true class
/// index, as used by [`clustering_accuracy`]. Unmatched clusters map to
/// `None`.
pub fn match_clusters(pred: &[usize], k: usize, truth: &[usize], c: usize) -> Result<Vec<Option<usize>>> {
    check_len(pred, truth)?;
    let size = k.max(c);
    let mut table = vec![vec![0usize; c]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= c {
            return Err(SgrError::InvalidParam(format!("label ({p}, {t}) out of range")));
        }
        table[p][t] += 1;
    }
    let max = pred.len() as f64;
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| max - if i < k && j < c { table[i][j] as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let assign = hungarian(&cost);
    Ok((0..k).map(|i| Some(assign[i]).filter(|&j| j < c)).collect())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_len(pred, truth)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1 over classes `0..num_classes`. A class
/// with no true and no predicted members scores 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    check_len(pred, truth)?;
    if num_classes == 0 {
        return Err(SgrError::InvalidParam("macro-F1 needs at least one class".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fneg = vec![0usize; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(SgrError::InvalidParam(format!("label ({p}, {t}) out of range")));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_relative_eq!(nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(nmi(&[3, 3], &[1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_independent_partitions() {
        // a splits by halves, b alternates: contingency is uniform → MI 0
        assert_relative_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[2, 2, 0, 1], &[0, 0, 1, 2]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0; 6], &[0, 0, 1, 1, 2, 2]).unwrap(), 1.0 / 3.0);
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.75);
        assert!(clustering_accuracy(&[0], &[]).is_err());
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn cluster_matching() {
        let m = match_clusters(&[0, 0, 1, 1, 2], 3, &[1, 1, 0, 0, 0], 2).unwrap();
        assert_eq!(m, vec![Some(1), Some(0), None]);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(macro_f1(&[0, 1, 1], &[0, 1, 1], 2).unwrap(), 1.0);
        let pred = [0, 0, 0, 0];
        let truth = [0, 0, 1, 1];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.5);
        assert_relative_eq!(macro_f1(&pred, &truth, 2).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // class 2 absent from both sides scores 0
        assert_relative_eq!(macro_f1(&[0, 1], &[0, 1], 3).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
        // try every injective relabeling of predicted clusters
        let k = pred.iter().max().unwrap() + 1;
        let c = truth.iter().max().unwrap() + 1;
        let size = k.max(c);
        let mut perm: Vec<usize> = (0..size).collect();
        let mut best = 0;
        permute(&mut perm, 0, &mut |p| {
            let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
            best = best.max(hits);
        });
        best as f64 / pred.len() as f64
    }

    fn permute(v: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
        if i == v.len() {
            f(v);
            return;
        }
        for j in i..v.len() {
            v.swap(i, j);
            permute(v, i + 1, f);
            v.swap(i, j);
        }
    }

    proptest! {
        #[test]
        fn nmi_symmetric_and_bounded(a in prop::collection::vec(0usize..4, 1..30), seed in 0usize..4) {
            let b: Vec<usize> = a.iter().enumerate().map(|(i, x)| (x + i * seed) % 3).collect();
            let ab = nmi(&a, &b).unwrap();
            let ba = nmi(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn accuracy_matches_brute_force(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..25),
            shift in 0usize..4,
        ) {
            let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let acc = clustering_accuracy(&pred, &truth).unwrap();
            prop_assert!((acc - brute_force_accuracy(&pred, &truth)).abs() < 1e-12);
            let relabeled: Vec<usize> = pred.iter().map(|p| (p + shift) % 4).collect();
            prop_assert!((clustering_accuracy(&relabeled, &truth).unwrap() - acc).abs() < 1e-12);
            // any single cluster/class pairing is a feasible matching
            let best_cell = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| pairs.iter().filter(|p| p.0 == i && p.1 == j).count())
                .max()
                .unwrap();
            prop_assert!(acc + 1e-12 >= best_cell as f64 / truth.len() as f64);
            let largest = (0..4).map(|c| truth.iter().filter(|&&t| t == c).count()).max().unwrap();
            let constant = vec![0; truth.len()];
            prop_assert!((clustering_accuracy(&constant, &truth).unwrap() - largest as f64 / truth.len() as f64).abs() < 1e-12);
        }
    }
}
