//! Keyword descriptions of node communities from the shared node/attribute
//! embedding space.
//!
//! Direct mode ranks attribute vectors by distance to each community
//! center. Topic mode first clusters the attribute vectors; each community
//! is then described by its nearest attribute clusters, each listing the
//! attributes closest to that cluster's own center.

use std::fmt::Write as _;

use log::warn;
use nalgebra::{DMatrix, RowDVector};

use crate::embed::EmbeddingModel;
use crate::error::{Result, SgrError};
use crate::eval::Clustering;
use crate::graph::AttributedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 − cos`; a zero vector is at distance 1 from everything.
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &RowDVector<f64>, b: &RowDVector<f64>) -> f64 {
        match self {
            Metric::Euclidean => (a - b).norm(),
            Metric::Cosine => {
                let na = a.norm();
                let nb = b.norm();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - a.dot(b) / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    Topic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyword {
    pub attr: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicKeywords {
    /// Attribute cluster index; `None` in direct mode.
    pub topic: Option<usize>,
    /// Distance from the community center to the topic center.
    pub distance: Option<f64>,
    pub keywords: Vec<Keyword>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityDescription {
    pub community: usize,
    pub mode: Mode,
    pub q: usize,
    pub topics: Vec<TopicKeywords>,
}

/// Indices of `candidates` sorted by distance to `center`, ties broken by
/// index, truncated to `q`.
fn nearest(
    center: &RowDVector<f64>,
    vectors: &DMatrix<f64>,
    candidates: impl Iterator<Item = usize>,
    q: usize,
    metric: Metric,
) -> Vec<Keyword> {
    let mut ranked: Vec<Keyword> = candidates
        .map(|w| Keyword {
            attr: w,
            distance: metric.distance(center, &vectors.row(w).into_owned()),
        })
        .collect();
    ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.attr.cmp(&b.attr)));
    ranked.truncate(q);
    ranked
}

fn check_dims(model: &EmbeddingModel, c: &Clustering, what: &str) -> Result<()> {
    if c.centers.ncols() != model.dim() {
        return Err(SgrError::Shape(format!(
            "{what} centers have dim {}, embedding dim {}",
            c.centers.ncols(),
            model.dim()
        )));
    }
    Ok(())
}

/// Top-`q` nearest attributes for every community center.
pub fn describe_direct(
    model: &EmbeddingModel,
    communities: &Clustering,
    q: usize,
    metric: Metric,
) -> Result<Vec<CommunityDescription>> {
    check_dims(model, communities, "community")?;
    let m = model.m();
    if q == 0 || q > m {
        return Err(SgrError::InvalidParam(format!("keyword count {q} outside 1..={m}")));
    }
    let attrs = model.attr_vectors().into_owned();
    Ok((0..communities.k)
        .map(|c| {
            let center = communities.centers.row(c).into_owned();
            CommunityDescription {
                community: c,
                mode: Mode::Direct,
                q,
                topics: vec![TopicKeywords {
                    topic: None,
                    distance: None,
                    keywords: nearest(&center, &attrs, 0..m, q, metric),
                }],
            }
        })
        .collect())
}

/// Describes every community by its `t` nearest attribute clusters, each
/// with the `q` attributes nearest that cluster's center.
pub fn describe_topics(
    model: &EmbeddingModel,
    communities: &Clustering,
    topics: &Clustering,
    q: usize,
    t: usize,
    metric: Metric,
) -> Result<Vec<CommunityDescription>> {
    check_dims(model, communities, "community")?;
    check_dims(model, topics, "topic")?;
    if topics.assignment.len() != model.m() {
        return Err(SgrError::Shape(format!(
            "topic clustering covers {} attributes, model has {}",
            topics.assignment.len(),
            model.m()
        )));
    }
    if t == 0 || t > topics.k {
        return Err(SgrError::InvalidParam(format!("topic count {t} outside 1..={}", topics.k)));
    }
    if q == 0 {
        return Err(SgrError::InvalidParam("keyword count must be >= 1".into()));
    }
    let attrs = model.attr_vectors().into_owned();
    let members: Vec<Vec<usize>> = (0..topics.k).map(|k| topics.members(k)).collect();
    for (k, mem) in members.iter().enumerate() {
        if mem.len() < q {
            warn!("topic {k} has {} attributes; listing fewer than {q} keywords", mem.len());
        }
    }
    let topic_centers = &topics.centers;
    Ok((0..communities.k)
        .map(|c| {
            let center = communities.centers.row(c).into_owned();
            let ranked = nearest(&center, topic_centers, 0..topics.k, t, metric);
            CommunityDescription {
                community: c,
                mode: Mode::Topic,
                q,
                topics: ranked
                    .into_iter()
                    .map(|tk| {
                        let tc = topic_centers.row(tk.attr).into_owned();
                        TopicKeywords {
                            topic: Some(tk.attr),
                            distance: Some(tk.distance),
                            keywords: nearest(&tc, &attrs, members[tk.attr].iter().copied(), q, metric),
                        }
                    })
                    .collect(),
            }
        })
        .collect())
}

/// Renders descriptions as `community <id>` blocks with optional
/// `topic <id> (dist <d>)` headers and `rank<TAB>attr_id<TAB>distance` lines.
pub fn format_descriptions(descriptions: &[CommunityDescription], g: &AttributedGraph) -> String {
    let mut out = String::new();
    for d in descriptions {
        writeln!(out, "community {}", d.community).unwrap();
        for t in &d.topics {
            if let (Some(id), Some(dist)) = (t.topic, t.distance) {
                writeln!(out, "topic {id} (dist {dist:.6})").unwrap();
            }
            for (r, k) in t.keywords.iter().enumerate() {
                writeln!(out, "{}\t{}\t{:.6}", r + 1, g.attr_ids()[k.attr], k.distance).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::kmeans;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_from(x: DMatrix<f64>, n: usize) -> EmbeddingModel {
        let m = x.nrows() - n;
        EmbeddingModel::new(x.clone(), x, n, m, 1, 1).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> EmbeddingModel {
        model_from(DMatrix::from_fn(n + m, 3, |_, _| rng.gen_range(-1.0..1.0)), n)
    }

    #[test]
    fn single_attribute() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = random_model(&mut rng, 6, 1);
        let c = kmeans(&model.node_vectors().into_owned(), 2, 0).unwrap();
        let d = describe_direct(&model, &c, 1, Metric::Euclidean).unwrap();
        assert_eq!(d.len(), 2);
        for desc in d {
            assert_eq!(desc.topics[0].keywords[0].attr, 0);
        }
    }

    #[test]
    fn attribute_at_center_ranks_first() {
        let x = DMatrix::from_row_slice(5, 2, &[
            0.0, 0.0, 2.0, 0.0, // nodes
            1.0, 0.0, 5.0, 5.0, 1.5, 0.0, // attrs
        ]);
        let model = model_from(x, 2);
        let c = kmeans(&model.node_vectors().into_owned(), 1, 0).unwrap();
        let d = describe_direct(&model, &c, 3, Metric::Euclidean).unwrap();
        let kw = &d[0].topics[0].keywords;
        assert_eq!(kw[0].attr, 0);
        assert_eq!(kw[0].distance, 0.0);
        assert_eq!(kw.iter().map(|k| k.attr).collect::<Vec<_>>(), vec![0, 2, 1]);
        assert!(describe_direct(&model, &c, 4, Metric::Euclidean).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, -1.0]);
        let model = model_from(x, 1);
        let c = kmeans(&model.node_vectors().into_owned(), 1, 0).unwrap();
        let d = describe_direct(&model, &c, 2, Metric::Euclidean).unwrap();
        let kw = &d[0].topics[0].keywords;
        assert_eq!((kw[0].attr, kw[1].attr), (0, 1));
    }

    #[test]
    fn full_ranking_is_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, 10, 7);
        let c = kmeans(&model.node_vectors().into_owned(), 3, 0).unwrap();
        for d in describe_direct(&model, &c, 7, Metric::Euclidean).unwrap() {
            let kw = &d.topics[0].keywords;
            assert_eq!(kw.len(), 7);
            assert!(kw.windows(2).all(|w| w[0].distance <= w[1].distance));
            let mut ids: Vec<usize> = kw.iter().map(|k| k.attr).collect();
            ids.sort();
            assert_eq!(ids, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn single_topic_describes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random_model(&mut rng, 8, 5);
        let nodes = kmeans(&model.node_vectors().into_owned(), 2, 0).unwrap();
        let topics = kmeans(&model.attr_vectors().into_owned(), 1, 0).unwrap();
        let d = describe_topics(&model, &nodes, &topics, 3, 1, Metric::Euclidean).unwrap();
        for desc in &d {
            assert_eq!(desc.topics.len(), 1);
            assert_eq!(desc.topics[0].topic, Some(0));
            assert_eq!(desc.topics[0].keywords.len(), 3);
        }
        assert!(describe_topics(&model, &nodes, &topics, 3, 2, Metric::Euclidean).is_err());
    }

    #[test]
    fn topic_keywords_match_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let model = random_model(&mut rng, 12, 15);
            let attrs = model.attr_vectors().into_owned();
            let nodes = kmeans(&model.node_vectors().into_owned(), 3, 1).unwrap();
            let topics = kmeans(&attrs, 4, 2).unwrap();
            let d = describe_topics(&model, &nodes, &topics, 5, 2, Metric::Euclidean).unwrap();
            for desc in d {
                for t in desc.topics {
                    let k = t.topic.unwrap();
                    let center = topics.centers.row(k);
                    // exhaustive: every member not listed is at least as far as the last listed
                    let listed: Vec<usize> = t.keywords.iter().map(|x| x.attr).collect();
                    let members = topics.members(k);
                    assert_eq!(listed.len(), members.len().min(5));
                    let worst = t.keywords.last().unwrap().distance;
                    for &w in &members {
                        let dist = (attrs.row(w) - center).norm();
                        assert!(listed.contains(&w) || dist >= worst);
                        assert!(topics.assignment[w] == k);
                    }
                }
            }
        }
    }

    #[test]
    fn rankings_invariant_under_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let model = random_model(&mut rng, 10, 8);
            let rot = Rotation3::new(nalgebra::Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ));
            let rt = DMatrix::from_fn(3, 3, |i, j| rot.matrix()[(j, i)]);
            let rotated = model_from(model.x() * &rt, 10);
            let c = kmeans(&model.node_vectors().into_owned(), 2, 0).unwrap();
            let c_rot = Clustering {
                centers: &c.centers * &rt,
                ..c.clone()
            };
            let a = describe_direct(&model, &c, 8, Metric::Euclidean).unwrap();
            let b = describe_direct(&rotated, &c_rot, 8, Metric::Euclidean).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let ix: Vec<usize> = x.topics[0].keywords.iter().map(|k| k.attr).collect();
                let iy: Vec<usize> = y.topics[0].keywords.iter().map(|k| k.attr).collect();
                assert_eq!(ix, iy);
            }
        }
    }

    #[test]
    fn cosine_metric() {
        let a = RowDVector::from_row_slice(&[1.0, 0.0]);
        let b = RowDVector::from_row_slice(&[0.0, 2.0]);
        assert!((Metric::Cosine.distance(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(Metric::Cosine.distance(&a, &(a.clone() * 3.0)), 0.0);
        assert_eq!(Metric::Cosine.distance(&a, &RowDVector::zeros(2)), 1.0);
    }
}
