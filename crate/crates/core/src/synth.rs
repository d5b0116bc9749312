//! Planted-partition attributed graphs for testing and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{AttributedGraph, GraphBuilder};

/// Stochastic block model with block-exclusive attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub attrs_per_block: usize,
    pub attr_prob: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            nodes: 200,
            blocks: 4,
            p_in: 0.10,
            p_out: 0.02,
            attrs_per_block: 10,
            attr_prob: 0.5,
        }
    }
}

/// Block of node `i`: contiguous blocks of near-equal size.
pub fn block_of(cfg: &PlantedConfig, i: usize) -> usize {
    i * cfg.blocks / cfg.nodes
}

pub fn node_id(i: usize) -> String {
    format!("v{i}")
}

/// Attribute `j` of block `b`.
pub fn attr_id(b: usize, j: usize) -> String {
    format!("b{b}w{j}")
}

/// Samples a labeled planted-partition graph. Nodes `v0..` get labels by
/// block (`c0..`); attribute `b<k>w<j>` is only ever carried by block `k`.
/// Any node the sampler leaves without edges is linked to a random node of
/// its own block so every node stays connected to the topology.
pub fn planted_graph(cfg: &PlantedConfig, seed: u64) -> Result<AttributedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.nodes;
    let mut degree = vec![0usize; n];
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(&node_id(i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block_of(cfg, i) == block_of(cfg, j) { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                b.add_edge(&node_id(i), &node_id(j));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    for i in 0..n {
        if degree[i] == 0 {
            let peers: Vec<usize> = (0..n)
                .filter(|&j| j != i && block_of(cfg, j) == block_of(cfg, i))
                .collect();
            if let Some(&j) = peers.get(rng.gen_range(0..peers.len().max(1))) {
                b.add_edge(&node_id(i), &node_id(j));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    for i in 0..n {
        let blk = block_of(cfg, i);
        for j in 0..cfg.attrs_per_block {
            if rng.gen::<f64>() < cfg.attr_prob {
                b.add_attr(&node_id(i), &attr_id(blk, j), 1.0)?;
            }
        }
        b.add_label(&node_id(i), &format!("c{blk}"));
    }
    b.build()
}
