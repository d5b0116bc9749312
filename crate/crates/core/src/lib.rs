//! Joint embedding of nodes and attributes of an attributed graph.
//!
//! Nodes and attributes become entities of one weighted auxiliary graph;
//! a random-walk proximity matrix over that graph is factored by truncated
//! SVD, optionally refined with Laplacian side information, and the
//! resulting vectors feed clustering, classification and keyword
//! descriptions of communities.

pub mod aux_graph;
pub mod embed;
pub mod embedding_io;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod selftest;
pub mod semantic;
pub mod side;
pub mod synth;

pub use aux_graph::{build_hetero_adjacency, mnorm, AuxParams, HeteroAdjacency};
pub use embed::{embed, embed_run, factorize, walk_matrix, EmbedParams, EmbedRun, EmbeddingModel, WalkMatrix};
pub use embedding_io::{read_embeddings, write_embeddings, EmbeddingFile};
pub use error::{Result, SgrError};
pub use graph::{load_graph, AttributedGraph, GraphBuilder};
pub use side::{build_side_info, side_enhance, SideInfo};
