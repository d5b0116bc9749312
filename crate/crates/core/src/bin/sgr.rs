//! Command-line front end: embed, enhance, evaluate and describe attributed
//! graphs. Worker threads follow `RAYON_NUM_THREADS`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn, LevelFilter};

use sgr::aux_graph::{AuxParams, DEFAULT_SIZE_CAP};
use sgr::embed::{walk_matrix, DEFAULT_DIM, DEFAULT_NEG, DEFAULT_ORDER};
use sgr::eval::{evaluate, kmeans, Protocol, Task, DEFAULT_REPEATS, DEFAULT_TRAIN_FRACTION};
use sgr::selftest::{self, Status};
use sgr::semantic::{describe_direct, describe_topics, format_descriptions, Metric};
use sgr::side::{build_side_info, side_enhance, update_y};
use sgr::{
    build_hetero_adjacency, embed_run, load_graph, read_embeddings, write_embeddings, AttributedGraph,
    EmbedParams, EmbeddingModel, Result, SgrError,
};

#[derive(Parser)]
#[command(name = "sgr", version, about = "Joint node and attribute embeddings for attributed graphs")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed nodes and attributes and write the embedding file.
    Embed {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        embed: EmbedArgs,
        /// Embedding file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine an embedding with modularity and attribute-similarity side information.
    Enhance {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        side: SideArgs,
        /// Start from this embedding instead of a fresh factorization.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Embedding file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// k-means on node vectors scored by NMI and matched accuracy.
    EvalCluster {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Logistic-regression node classification scored by accuracy and Macro-F1.
    EvalClassify {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Fraction of nodes used for training in each repeat.
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        train_frac: f64,
    },
    /// Keyword descriptions of node communities.
    Describe {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        source: SourceArgs,
        /// Number of node communities (K1); defaults to the class count of --labels.
        #[arg(long)]
        node_clusters: Option<usize>,
        /// Number of attribute clusters (K2) for topic descriptions.
        #[arg(long)]
        attr_clusters: Option<usize>,
        /// Topics per community; enables topic mode (needs --attr-clusters).
        #[arg(long)]
        topics: Option<usize>,
        /// Keywords per community or topic.
        #[arg(long, default_value_t = 5)]
        keywords: usize,
        /// Rank by cosine distance instead of Euclidean.
        #[arg(long)]
        cosine_describe: bool,
        /// Seed for the k-means runs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the descriptions here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numbered oracle and reproduction checks.
    Selftest {
        /// Only these checks (comma separated, 1-10).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, one "u<TAB>v" per line.
    #[arg(long)]
    edges: PathBuf,
    /// Node attributes, one "node<TAB>attr[<TAB>weight]" per line.
    #[arg(long)]
    attrs: PathBuf,
    /// Node labels, one "node<TAB>class" per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Embedding dimension k (clamped to the entity count).
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Random-walk window o.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Negative-sample count b.
    #[arg(long, default_value_t = DEFAULT_NEG)]
    neg: usize,
    /// Weight of direct node-attribute relations.
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    /// Weight of shared-attribute (node pair) relations.
    #[arg(long, default_value_t = 1.0)]
    delta1: f64,
    /// Weight of co-attribute (attribute pair) relations.
    #[arg(long, default_value_t = 1.0)]
    delta2: f64,
    /// Scale motif counts by the relation weight.
    #[arg(long)]
    weighted_motifs: bool,
    /// Largest node + attribute count for dense construction.
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    size_cap: usize,
}

#[derive(Args)]
struct SideArgs {
    /// Weight of the modularity regularizer.
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    /// Weight of the attribute-similarity regularizer.
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// Alternating update rounds.
    #[arg(long, default_value_t = 1)]
    iterations: usize,
}

#[derive(Args)]
struct SourceArgs {
    /// Read vectors from this embedding file instead of embedding the graph.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Repeats averaged into the report.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Base seed; each repeat derives its own.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write "metric<TAB>value" records here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &GraphArgs) -> Result<AttributedGraph> {
    let g = load_graph(&args.edges, &args.attrs, args.labels.as_deref())?;
    info!("loaded n={} e={} m={}", g.n(), g.edge_count(), g.m());
    Ok(g)
}

fn embed_params(args: &EmbedArgs, g: &AttributedGraph) -> Result<EmbedParams> {
    let deltas = [args.delta0, args.delta1, args.delta2];
    if deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(SgrError::InvalidParam(format!("relation weights must be finite and >= 0, got {deltas:?}")));
    }
    let entities = g.n() + g.m();
    if entities > args.size_cap {
        return Err(SgrError::SizeCap {
            entities,
            cap: args.size_cap,
        });
    }
    let mut dim = args.dim;
    if dim == 0 {
        return Err(SgrError::InvalidParam("dimension must be >= 1".into()));
    }
    if dim > entities {
        warn!("dimension {dim} exceeds the {entities} entities; using {entities}");
        dim = entities;
    }
    Ok(EmbedParams {
        dim,
        order: args.order,
        neg: args.neg,
        aux: AuxParams {
            deltas,
            weighted_motifs: args.weighted_motifs,
            size_cap: args.size_cap,
            ..AuxParams::default()
        },
    })
}

fn model_for(g: &AttributedGraph, source: &SourceArgs) -> Result<EmbeddingModel> {
    match &source.embeddings {
        Some(path) => read_embeddings(path)?.to_model(g),
        None => Ok(embed_run(g, &embed_params(&source.embed, g)?)?.model),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SgrError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run_eval(g: &AttributedGraph, source: &SourceArgs, eval: &EvalArgs, task: Task, train_frac: f64) -> Result<()> {
    if g.labels().is_none() {
        return Err(SgrError::MissingLabels);
    }
    let model = model_for(g, source)?;
    let mut protocol = Protocol::new(task);
    protocol.repeats = eval.repeats;
    protocol.seed = eval.seed;
    protocol.train_fraction = train_frac;
    let report = evaluate(&model, g, &protocol)?;
    println!("{report}");
    print!("{}", report.records());
    if let Some(out) = &eval.out {
        write_text(out, &report.records())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Embed { graph, embed, out } => {
            let g = load(&graph)?;
            let run = embed_run(&g, &embed_params(&embed, &g)?)?;
            write_embeddings(&run.model, &g, &out)?;
        }
        Command::Enhance {
            graph,
            embed,
            side,
            embeddings,
            out,
        } => {
            let g = load(&graph)?;
            let params = embed_params(&embed, &g)?;
            let info = build_side_info(&g, [side.lambda1, side.lambda2])?;
            let (start, walk) = match embeddings {
                Some(path) => {
                    let adjacency = build_hetero_adjacency(&g, &params.aux)?;
                    let walk = walk_matrix(&adjacency, params.order, params.neg)?;
                    let prior = read_embeddings(&path)?.to_model(&g)?;
                    let y = update_y(walk.z(), prior.x())?;
                    let start = EmbeddingModel::new(prior.x().clone(), y, g.n(), g.m(), params.order, params.neg)?;
                    (start, walk)
                }
                None => {
                    let run = embed_run(&g, &params)?;
                    (run.model, run.walk)
                }
            };
            let enhanced = side_enhance(&start, &walk, &info, side.iterations)?;
            info!(
                "objective {:.6e} -> {:.6e}",
                enhanced.objective_before, enhanced.objective_after
            );
            write_embeddings(&enhanced.model, &g, &out)?;
        }
        Command::EvalCluster { graph, source, eval } => {
            let g = load(&graph)?;
            run_eval(&g, &source, &eval, Task::Clustering, DEFAULT_TRAIN_FRACTION)?;
        }
        Command::EvalClassify {
            graph,
            source,
            eval,
            train_frac,
        } => {
            let g = load(&graph)?;
            run_eval(&g, &source, &eval, Task::Classification, train_frac)?;
        }
        Command::Describe {
            graph,
            source,
            node_clusters,
            attr_clusters,
            topics,
            keywords,
            cosine_describe,
            seed,
            out,
        } => {
            let g = load(&graph)?;
            let k1 = match node_clusters {
                Some(k) => k,
                None if g.num_classes() > 0 => g.num_classes(),
                None => {
                    return Err(SgrError::InvalidParam(
                        "--node-clusters is required without --labels".into(),
                    ))
                }
            };
            let model = model_for(&g, &source)?;
            let metric = if cosine_describe { Metric::Cosine } else { Metric::Euclidean };
            let communities = kmeans(&model.node_vectors().into_owned(), k1, seed)?;
            let descriptions = match topics {
                None => describe_direct(&model, &communities, keywords, metric)?,
                Some(t) => {
                    let k2 = attr_clusters.ok_or_else(|| {
                        SgrError::InvalidParam("--topics needs --attr-clusters".into())
                    })?;
                    let topic_clusters = kmeans(&model.attr_vectors().into_owned(), k2, seed)?;
                    describe_topics(&model, &communities, &topic_clusters, keywords, t, metric)?
                }
            };
            let text = format_descriptions(&descriptions, &g);
            print!("{text}");
            if let Some(out) = &out {
                write_text(out, &text)?;
            }
        }
        Command::Selftest { only } => {
            let ids: Vec<u8> = if only.is_empty() {
                (1..=selftest::CHECK_COUNT).collect()
            } else {
                only
            };
            let mut ok = true;
            for id in ids {
                let report = selftest::run(id);
                println!("{report}");
                ok &= report.status != Status::Fail;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { LevelFilter::Info } else { LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{msg}", e.kind());
            ExitCode::from(2)
        }
    }
}
