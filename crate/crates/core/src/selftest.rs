//! Numbered self-checks with fixed tolerances, shared by the acceptance
//! test target and `sgr selftest`.

use std::env;
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aux_graph::{attribute_similarity, build_hetero_adjacency, mnorm, motif_relations, AuxParams};
use crate::embed::{embed, proximity, truncated_factors, walk_matrix, EmbedParams};
use crate::error::{Result, SgrError};
use crate::eval::{
    clustering_accuracy, evaluate, kmeans, match_clusters, nmi, train_classifier, Protocol, Task,
};
use crate::graph::{load_graph, AttributedGraph};
use crate::linalg::asymmetry;
use crate::oracle::{
    finite_difference, motif_counts_by_enumeration, random_attributed_graph, random_matrix, to_dense,
    walk_matrix_reference, x_update_reference,
};
use crate::semantic::{describe_direct, Metric};
use crate::side::{
    attribute_cosine, build_side_info, grad_x, grad_y, laplacian, modularity_matrix,
    regularization_value, trace_form, update_x, update_x_least_squares, update_y,
};
use crate::synth::{planted_graph, PlantedConfig};

pub const CHECK_COUNT: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {:<24} {:>8.2}s  {}",
            self.status,
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "walk-matrix oracle",
        2 => "motif oracle",
        3 => "factorization",
        4 => "structural identities",
        5 => "gradient checks",
        6 => "update optimality",
        7 => "metric sanity",
        8 => "planted structure",
        9 => "description fidelity",
        10 => "cora (optional)",
        _ => "unknown",
    }
}

fn limit(id: u8) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(30)),
        2 => Some(Duration::from_secs(10)),
        8 => Some(Duration::from_secs(120)),
        10 => Some(Duration::from_secs(15 * 60)),
        _ => None,
    }
}

/// Runs check `id` (1..=10).
pub fn run(id: u8) -> CheckReport {
    let start = Instant::now();
    let result = match id {
        1 => walk_oracle(),
        2 => motif_oracle(),
        3 => factorization(),
        4 => structural(),
        5 => gradients(),
        6 => updates(),
        7 => metrics(),
        8 => planted(),
        9 => descriptions(),
        10 => match cora() {
            Ok(None) => {
                return CheckReport {
                    id,
                    name: name(id),
                    status: Status::Skip,
                    detail: "set SGR_CORA_DIR to a directory with edges.txt, attrs.txt, labels.txt".into(),
                    elapsed: start.elapsed(),
                }
            }
            Ok(Some(o)) => Ok(o),
            Err(e) => Err(e),
        },
        _ => Err(SgrError::InvalidParam(format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let (mut status, mut detail) = match result {
        Ok(o) => (if o.passed { Status::Pass } else { Status::Fail }, o.detail),
        Err(e) => (Status::Fail, format!("error: {e}")),
    };
    if let Some(max) = limit(id) {
        if elapsed > max {
            status = Status::Fail;
            detail += &format!("; over the {}s limit", max.as_secs());
        }
    }
    CheckReport {
        id,
        name: name(id),
        status,
        detail,
        elapsed,
    }
}

pub fn run_all() -> Vec<CheckReport> {
    (1..=CHECK_COUNT).map(run).collect()
}

fn frob_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

fn dense_frob_diff(a: &[Vec<f64>], b: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            s += (x - b[(i, j)]).powi(2);
        }
    }
    s.sqrt()
}

fn random_deltas(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)]
}

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Result<AttributedGraph> {
    let n = rng.gen_range(2..=max_n);
    let m = rng.gen_range(1..=max_m);
    let weighted = rng.gen_bool(0.3);
    random_attributed_graph(rng, n, m, weighted)
}

fn walk_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 240 {
        let g = random_graph(&mut rng, 8, 5)?;
        let params = AuxParams {
            deltas: random_deltas(&mut rng),
            weighted_motifs: rng.gen_bool(0.5),
            ..AuxParams::default()
        };
        let b = match build_hetero_adjacency(&g, &params) {
            Ok(b) => b,
            Err(SgrError::IsolatedEntity(_)) => continue,
            Err(e) => return Err(e),
        };
        let order = rng.gen_range(1..=4);
        let neg = rng.gen_range(1..=3);
        let (m_ref, z_ref) = walk_matrix_reference(&to_dense(b.matrix()), order, neg);
        let m = proximity(b.matrix(), order, neg)?;
        let z = walk_matrix(&b, order, neg)?;
        let m_norm: f64 = m_ref.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let z_norm: f64 = z_ref.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst
            .max(dense_frob_diff(&m_ref, &m) / m_norm.max(1.0))
            .max(dense_frob_diff(&z_ref, z.z()) / z_norm.max(1.0));
        cases += 1;
    }
    outcome(worst <= 1e-10, format!("{cases} graphs, max relative error {worst:.2e} (tol 1e-10)"))
}

fn motif_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let cases = 300;
    for _ in 0..cases {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=5);
        let bits: Vec<Vec<bool>> = (0..n).map(|_| (0..m).map(|_| rng.gen_bool(0.5)).collect()).collect();
        let r0 = DMatrix::from_fn(n, m, |i, j| if bits[i][j] { 1.0 } else { 0.0 });
        let (r1, r2) = motif_relations(&r0, false)?;
        let (shared, co) = motif_counts_by_enumeration(&bits);
        for i in 0..n {
            for w in 0..m {
                if r1[(i, w)] != shared[i][w] as f64 || r2[(i, w)] != co[i][w] as f64 {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0, format!("{cases} matrices, {mismatches} mismatched entries"))
}

fn factorization() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_tail: f64 = 0.0;
    let mut worst_full: f64 = 0.0;
    let cases = 60;
    for case in 0..cases {
        let z = if case % 2 == 0 {
            let size = rng.gen_range(2..=14);
            random_matrix(&mut rng, size, size, -3.0, 3.0)
        } else {
            let g = random_graph(&mut rng, 8, 5)?;
            match build_hetero_adjacency(&g, &AuxParams::default()) {
                Ok(b) => walk_matrix(&b, rng.gen_range(1..=4), 1)?.z().clone(),
                Err(SgrError::IsolatedEntity(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        let mut theta: Vec<f64> = z.singular_values().iter().copied().collect();
        theta.sort_by(|a, b| b.total_cmp(a));
        let r = theta.len();
        for k in 1..=r {
            let f = truncated_factors(&z, k)?;
            let err = (&z - &f.x * f.y.transpose()).norm();
            let tail = theta[k..].iter().map(|t| t * t).sum::<f64>().sqrt();
            worst_tail = worst_tail.max((err - tail).abs());
            if k == r {
                worst_full = worst_full.max(err / z.norm().max(f64::MIN_POSITIVE));
            }
        }
    }
    outcome(
        worst_tail <= 1e-8 && worst_full <= 1e-8,
        format!("{cases} matrices, max |err - tail| {worst_tail:.2e}, full-rank relative {worst_full:.2e} (tol 1e-8)"),
    )
}

fn structural() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut asym: f64 = 0.0;
    let mut range_ok = true;
    let mut row_sum: f64 = 0.0;
    let mut kernel: f64 = 0.0;
    let mut eq9: f64 = 0.0;
    let cases = 100;
    let mut done = 0;
    while done < cases {
        let g = random_graph(&mut rng, 8, 5)?;
        let b = match build_hetero_adjacency(
            &g,
            &AuxParams {
                deltas: random_deltas(&mut rng),
                ..AuxParams::default()
            },
        ) {
            Ok(b) => b,
            Err(SgrError::IsolatedEntity(_)) => continue,
            Err(e) => return Err(e),
        };
        let p = attribute_similarity(&g.attr_matrix())?;
        let q = modularity_matrix(&g)?;
        let s = attribute_cosine(&g.attr_matrix());
        for mat in [b.matrix(), &p, &q, &s] {
            asym = asym.max(asymmetry(mat));
        }
        let raw = random_matrix(&mut rng, 5, 4, -10.0, 10.0);
        for mat in [mnorm(&raw)?, mnorm(&q)?, mnorm(&s)?, p.clone()] {
            range_ok &= mat.iter().all(|&x| (0.0..=1.0).contains(&x));
        }
        for row in q.row_iter() {
            row_sum = row_sum.max(row.sum().abs());
        }
        let side = build_side_info(&g, [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)])?;
        let ones = DMatrix::from_element(side.entities(), 1, 1.0);
        kernel = kernel.max((&side.l * ones).norm());
        let x = random_matrix(&mut rng, side.entities(), 3, -2.0, 2.0);
        for t in [&side.t1, &side.t2] {
            let pair = regularization_value(&x, t)?;
            let trace = trace_form(&x, &laplacian(t));
            eq9 = eq9.max((pair - trace).abs() / pair.abs().max(1.0));
        }
        done += 1;
    }
    outcome(
        asym <= 1e-12 && range_ok && row_sum <= 1e-10 && kernel <= 1e-10 && eq9 <= 1e-8,
        format!(
            "{cases} graphs, asymmetry {asym:.1e}, mnorm in [0,1] {range_ok}, modularity row sum {row_sum:.1e}, \
             |L1| {kernel:.1e}, pairwise vs trace {eq9:.1e}"
        ),
    )
}

fn gradients() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let cases = 60;
    let mut done = 0;
    while done < cases {
        let n = rng.gen_range(2..=7);
        let m = rng.gen_range(1..=5);
        let g = random_attributed_graph(&mut rng, n, m, false)?;
        let b = match build_hetero_adjacency(&g, &AuxParams::default()) {
            Ok(b) => b,
            Err(SgrError::IsolatedEntity(_)) => continue,
            Err(e) => return Err(e),
        };
        let w = walk_matrix(&b, rng.gen_range(1..=4), 1)?;
        let z = w.z();
        let lambdas = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let side = build_side_info(&g, lambdas)?;
        let k = rng.gen_range(1..=4);
        let x = random_matrix(&mut rng, z.nrows(), k, -1.0, 1.0);
        let y = random_matrix(&mut rng, z.nrows(), k, -1.0, 1.0);
        let full = |x: &DMatrix<f64>, y: &DMatrix<f64>| -> f64 {
            (z - x * y.transpose()).norm_squared()
                + lambdas[0] * regularization_value(x, &side.t1).expect("symmetric")
                + lambdas[1] * regularization_value(x, &side.t2).expect("symmetric")
        };
        let fd_x = finite_difference(&x, 1e-5, |p| full(p, &y));
        let fd_y = finite_difference(&y, 1e-5, |p| full(&x, p));
        let gx = grad_x(z, &x, &y, &side.l);
        let gy = grad_y(z, &x, &y);
        worst = worst
            .max(frob_diff(&fd_x, &gx) / gx.norm().max(1e-12))
            .max(frob_diff(&fd_y, &gy) / gy.norm().max(1e-12));
        done += 1;
    }
    outcome(worst <= 1e-5, format!("{cases} instances, max relative error {worst:.2e} (tol 1e-5)"))
}

fn updates() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut y_grad: f64 = 0.0;
    let mut normal_reg: f64 = 0.0;
    let mut normal_ls: f64 = 0.0;
    let mut literal: f64 = 0.0;
    let cases = 60;
    let mut done = 0;
    while done < cases {
        let g = random_graph(&mut rng, 8, 5)?;
        let b = match build_hetero_adjacency(&g, &AuxParams::default()) {
            Ok(b) => b,
            Err(SgrError::IsolatedEntity(_)) => continue,
            Err(e) => return Err(e),
        };
        let w = walk_matrix(&b, rng.gen_range(1..=4), 1)?;
        let z = w.z();
        let side = build_side_info(&g, [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)])?;
        let k = rng.gen_range(1..=4.min(z.nrows()));
        let x = random_matrix(&mut rng, z.nrows(), k, -1.0, 1.0);
        let y = random_matrix(&mut rng, z.nrows(), k, -1.0, 1.0);

        let y_new = update_y(z, &x)?;
        let scale = 1.0 + (z.transpose() * &x).norm();
        y_grad = y_grad.max(grad_y(z, &x, &y_new).norm() / scale);

        let zy = z * &y;
        let gram = y.transpose() * &y;
        let zero = DMatrix::zeros(z.nrows(), z.ncols());
        let x_reg = update_x(z, &y, &zero)?;
        let resid = &x_reg * (&gram + DMatrix::identity(k, k)) - &zy;
        normal_reg = normal_reg.max(resid.norm() / (1.0 + zy.norm()));
        let x_ls = update_x_least_squares(z, &y)?;
        normal_ls = normal_ls.max((&x_ls * &gram - &zy).norm() / (1.0 + zy.norm()));

        let x_lit = update_x(z, &y, &side.l)?;
        let reference = x_update_reference(&to_dense(z), &to_dense(&y), &to_dense(&side.l))
            .ok_or_else(|| SgrError::InvalidParam("reference inverse is singular".into()))?;
        let ref_norm = reference.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        literal = literal.max(dense_frob_diff(&reference, &x_lit) / ref_norm.max(1.0));
        done += 1;
    }
    outcome(
        y_grad <= 1e-8 && normal_reg <= 1e-8 && normal_ls <= 1e-8 && literal <= 1e-10,
        format!(
            "{cases} instances, Y gradient {y_grad:.1e}, L=0 normal eq {normal_reg:.1e}, \
             least-squares normal eq {normal_ls:.1e}, literal X vs dense {literal:.1e}"
        ),
    )
}

fn metrics() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let len = rng.gen_range(2..40);
        let a: Vec<usize> = (0..len).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<usize> = (0..len).map(|_| rng.gen_range(0..5)).collect();
        if (nmi(&a, &a)? - 1.0).abs() > 1e-12 && a.iter().any(|&x| x != a[0]) {
            failures.push("NMI(identical) != 1");
        }
        if (nmi(&a, &b)? - nmi(&b, &a)?).abs() > 1e-12 {
            failures.push("NMI asymmetric");
        }
        let mut perm: Vec<usize> = (0..4).collect();
        perm.rotate_left(rng.gen_range(0..4));
        perm.swap(0, rng.gen_range(0..4));
        let relabeled: Vec<usize> = a.iter().map(|&x| perm[x]).collect();
        if (clustering_accuracy(&a, &b)? - clustering_accuracy(&relabeled, &b)?).abs() > 1e-12 {
            failures.push("AC not permutation invariant");
        }
    }
    let mut separable_runs = 0;
    for _ in 0..10 {
        let classes = rng.gen_range(2..=4);
        let dim = rng.gen_range(2..=5);
        let centers = random_matrix(&mut rng, classes, dim, -10.0, 10.0);
        let per = 15;
        let labels: Vec<usize> = (0..classes * per).map(|i| i / per).collect();
        let x = DMatrix::from_fn(labels.len(), dim, |i, j| {
            centers[(labels[i], j)] + rng.gen_range(-0.05..0.05)
        });
        let clf = train_classifier(&x, &labels, classes, crate::eval::DEFAULT_L2)?;
        if clf.classify(&x)? == labels {
            separable_runs += 1;
        } else {
            failures.push("classifier below 1.0 train accuracy on separable data");
        }
    }
    failures.dedup();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("100 label pairs, {separable_runs}/10 separable fixtures fit exactly")
        } else {
            failures.join("; ")
        },
    )
}

const PLANTED_SEEDS: u64 = 20;
const PLANTED_KMEANS_REPEATS: usize = 10;

fn planted() -> Result<Outcome> {
    let cfg = PlantedConfig::default();
    let params = EmbedParams::default();
    let mut full = 0.0;
    let mut topo = 0.0;
    for seed in 0..PLANTED_SEEDS {
        let g = planted_graph(&cfg, seed)?;
        let mut protocol = Protocol::new(Task::Clustering);
        protocol.repeats = PLANTED_KMEANS_REPEATS;
        protocol.seed = seed;
        full += evaluate(&embed(&g, &params)?, &g, &protocol)?.nmi.unwrap_or(0.0);
        let t = g.topology_only()?;
        topo += evaluate(&embed(&t, &params)?, &t, &protocol)?.nmi.unwrap_or(0.0);
    }
    let full = full / PLANTED_SEEDS as f64;
    let topo = topo / PLANTED_SEEDS as f64;
    outcome(
        full - topo >= 0.10,
        format!(
            "{PLANTED_SEEDS} seeds, NMI with attributes {full:.3}, topology only {topo:.3}, gain {:.3} (need 0.10)",
            full - topo
        ),
    )
}

const DESCRIPTION_SEEDS: u64 = 10;
const KEYWORDS: usize = 10;
const EXCLUSIVE_NEEDED: usize = 8;

fn descriptions() -> Result<Outcome> {
    let cfg = PlantedConfig::default();
    let mut worst = KEYWORDS;
    let mut failing = Vec::new();
    for seed in 0..DESCRIPTION_SEEDS {
        let g = planted_graph(&cfg, seed)?;
        let model = embed(&g, &EmbedParams::default())?;
        let labels = g.labels().ok_or(SgrError::MissingLabels)?;
        let c = g.num_classes();
        let communities = kmeans(&model.node_vectors().into_owned(), c, seed)?;
        let matched = match_clusters(&communities.assignment, c, labels, c)?;
        let mut seed_worst = KEYWORDS;
        for desc in describe_direct(&model, &communities, KEYWORDS, Metric::Euclidean)? {
            let exclusive = match matched[desc.community] {
                Some(class) => {
                    // planted attribute b<k>w<j> belongs to class c<k> only
                    let block = g.class_names()[class].trim_start_matches('c');
                    let prefix = format!("b{block}w");
                    desc.topics[0]
                        .keywords
                        .iter()
                        .filter(|kw| g.attr_ids()[kw.attr].starts_with(&prefix))
                        .count()
                }
                None => 0,
            };
            seed_worst = seed_worst.min(exclusive);
        }
        if seed_worst < EXCLUSIVE_NEEDED {
            failing.push(format!(
                "seed {seed} ({seed_worst}/{KEYWORDS}, clustering NMI {:.3})",
                nmi(&communities.assignment, labels)?
            ));
        }
        worst = worst.min(seed_worst);
    }
    let failing = if failing.is_empty() { "none".to_string() } else { failing.join(", ") };
    outcome(
        worst >= EXCLUSIVE_NEEDED,
        format!(
            "{DESCRIPTION_SEEDS} seeds, fewest block-exclusive keywords in a top-{KEYWORDS} list: {worst} \
             (need {EXCLUSIVE_NEEDED}); failing seeds: {failing}"
        ),
    )
}

/// Reference NMI for the dataset, in percent.
const CORA_NMI: f64 = 49.33;
const CORA_BAND: f64 = 7.0;

fn cora() -> Result<Option<Outcome>> {
    let Some(dir) = env::var_os("SGR_CORA_DIR") else {
        return Ok(None);
    };
    let dir = Path::new(&dir);
    let g = load_graph(&dir.join("edges.txt"), &dir.join("attrs.txt"), Some(&dir.join("labels.txt")))?;
    let mut best = (0.0, 0);
    for order in 1..=10 {
        let params = EmbedParams {
            order,
            ..EmbedParams::default()
        };
        let model = embed(&g, &params)?;
        let report = evaluate(&model, &g, &Protocol::new(Task::Clustering))?;
        let v = 100.0 * report.nmi.unwrap_or(0.0);
        if v > best.0 {
            best = (v, order);
        }
    }
    Ok(Some(Outcome {
        passed: (best.0 - CORA_NMI).abs() <= CORA_BAND,
        detail: format!(
            "n={} m={} best NMI {:.2} at order {} (target {CORA_NMI} +/- {CORA_BAND})",
            g.n(),
            g.m(),
            best.0,
            best.1
        ),
    }))
}
