//! `relnet`: generate graphs, train graph-masked MLPs, and run sweeps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use relnet::connectome::{import_connectome, matched_er, sample_subgraph, ConnectomeSource};
use relnet::data::load_cifar10;
use relnet::generate::BaseFamily;
use relnet::graph::{read_edge_list, write_edge_list};
use relnet::sweep::{
    aggregate, append_record, correlation_report, read_records_file, run_sweep, write_aggregate,
    write_records_file, BlobSpec, RunOptions, XField,
};
use relnet::train::{train_with, LrSchedule};
use relnet::{
    generate, Checkpoint, Dataset, Family, GeneratorSpec, Graph, GraphMetrics, MlpModel,
    ModelConfig, Normalization, Precision, Scalar, SweepSpec, TrainConfig,
};

#[derive(Parser)]
#[command(name = "relnet", version, about = "Relational-graph MLP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it as an edge list.
    Gen {
        #[command(flatten)]
        graph: GenArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Import a connectome edge list, optionally subsample it or draw a
    /// density-matched random graph.
    Import(ImportArgs),
    /// Print structural metrics of an edge-list graph as JSON.
    Metrics {
        edges: PathBuf,
    },
    /// Train one model on one graph.
    Train(TrainArgs),
    /// Run a sweep spec and write one CSV row per (cell, seed).
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Keep rows already in --out and run only the missing cells.
        #[arg(long)]
        resume: bool,
    },
    /// Seed-averaged summary of a records CSV.
    Aggregate {
        #[arg(long)]
        records: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadratic fit of mean top-1 error against a graph quantity.
    Correlate {
        #[arg(long)]
        records: PathBuf,
        /// One of p, gamma, m, mu, communities, mean_degree, clustering,
        /// avg_path_len, modularity, cross_density.
        #[arg(long)]
        x: XField,
        /// Keep only rows with this community count.
        #[arg(long)]
        communities: Option<usize>,
        /// Keep only rows of this family.
        #[arg(long)]
        family: Option<String>,
    },
}

#[derive(Args, Clone)]
struct GenArgs {
    /// complete, er, sf or composed.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    /// Per-community generator of a composed graph: er or sf.
    #[arg(long)]
    base: Option<BaseFamily>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenArgs {
    fn spec(&self) -> Result<GeneratorSpec> {
        let family = self.family.context("--family is required")?;
        let n = self.n.context("--n is required")?;
        let spec = GeneratorSpec {
            family,
            n,
            p: self.p,
            gamma: self.gamma,
            m: self.m,
            communities: self.communities,
            mu: self.mu,
            base: self.base,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Declared node count; isolated trailing nodes are kept up to it.
    #[arg(long)]
    expect_nodes: Option<usize>,
    /// Report reciprocal directed lines instead of merging them silently.
    #[arg(long)]
    keep_directed_warnings: bool,
    /// Sample this many nodes uniformly and keep the largest component.
    #[arg(long)]
    sample: Option<usize>,
    /// Replace the result with an ER graph of equal size and density.
    #[arg(long)]
    matched_er: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Graph from an edge-list file instead of generator flags.
    #[arg(long, conflicts_with = "family")]
    edges: Option<PathBuf>,
    #[command(flatten)]
    graph: GenArgs,

    /// CIFAR-10 binary directory; synthetic blobs when absent.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Scale CIFAR pixels to [0, 1] without per-channel standardization.
    #[arg(long)]
    raw_pixels: bool,
    #[arg(long, default_value_t = BlobSpec::default().n_per_class)]
    blob_per_class: usize,
    #[arg(long, default_value_t = BlobSpec::default().classes)]
    blob_classes: usize,
    #[arg(long, default_value_t = BlobSpec::default().dim)]
    blob_dim: usize,
    #[arg(long, default_value_t = BlobSpec::default().spread)]
    blob_spread: f64,

    #[arg(long, default_value_t = ModelConfig::DEFAULT_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = ModelConfig::DEFAULT_ROUNDS)]
    rounds: usize,
    #[arg(long)]
    no_bias: bool,

    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    weight_decay: f64,
    #[arg(long, value_enum, default_value_t = Schedule::Cosine)]
    schedule: Schedule,
    #[arg(long, value_enum, default_value_t = Prec::Single)]
    precision: Prec,
    /// Seed for model init and batch order (the graph uses --seed).
    #[arg(long, default_value_t = 0)]
    train_seed: u64,

    /// JSON-lines epoch log; stdout when absent.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Save the trained model here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Cosine,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prec {
    Single,
    Double,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { graph, out } => {
            let generated = generate(&graph.spec()?)?;
            if generated.bridges > 0 {
                info!("added {} bridge edges", generated.bridges);
            }
            write_text(out.as_deref(), &write_edge_list(&generated.graph))
        }
        Command::Import(args) => cmd_import(args),
        Command::Metrics { edges } => {
            let graph = load_graph(&edges)?;
            print_json(&MetricsReport::new(&graph))
        }
        Command::Train(args) => cmd_train(args),
        Command::Sweep {
            spec,
            out,
            workers,
            resume,
        } => cmd_sweep(&spec, &out, workers, resume),
        Command::Aggregate { records, out } => {
            let rows = aggregate(&read_records_file(&records)?);
            match out {
                Some(path) => write_aggregate(create(&path)?, &rows)?,
                None => write_aggregate(io::stdout().lock(), &rows)?,
            }
            Ok(())
        }
        Command::Correlate {
            records,
            x,
            communities,
            family,
        } => {
            let mut rows = read_records_file(&records)?;
            rows.retain(|r| {
                communities.is_none_or(|k| r.communities == k)
                    && family.as_ref().is_none_or(|f| &r.family == f)
            });
            print_json(&correlation_report(&rows, x)?)
        }
    }
}

#[derive(Serialize)]
struct MetricsReport {
    nodes: usize,
    edges: usize,
    communities: usize,
    connected: bool,
    #[serde(flatten)]
    metrics: GraphMetrics,
}

impl MetricsReport {
    fn new(graph: &Graph) -> Self {
        MetricsReport {
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            communities: graph.community_count(),
            connected: graph.is_connected(),
            metrics: GraphMetrics::compute(graph),
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    read_edge_list(path)?
        .into_graph()
        .with_context(|| format!("reading {}", path.display()))
}

fn cmd_import(args: ImportArgs) -> Result<()> {
    let mut source = ConnectomeSource::new(&args.edges);
    source.declared_nodes = args.expect_nodes;
    source.symmetrize = !args.keep_directed_warnings;
    let imported = import_connectome(&source)?;
    for w in &imported.warnings {
        warn!("{w}");
    }
    let mut graph = imported.graph;
    if let Some(k) = args.sample {
        graph = sample_subgraph(&graph, k, args.seed)?;
        info!("sampled {} of {k} requested nodes in the largest component", graph.node_count());
    }
    if args.matched_er {
        graph = matched_er(&graph, args.seed)?;
    }
    write_text(args.out.as_deref(), &write_edge_list(&graph))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let graph = match &args.edges {
        Some(path) => load_graph(path)?,
        None => generate(&args.graph.spec()?)?.graph,
    };
    let (train_set, test_set) = match &args.data_dir {
        Some(dir) => {
            let norm = if args.raw_pixels {
                Normalization::Raw
            } else {
                Normalization::Standardize
            };
            load_cifar10(dir, norm)?
        }
        None => {
            if args.raw_pixels {
                bail!("--raw-pixels only applies with --data-dir");
            }
            BlobSpec {
                n_per_class: args.blob_per_class,
                classes: args.blob_classes,
                dim: args.blob_dim,
                spread: args.blob_spread,
                ..BlobSpec::default()
            }
            .load()?
        }
    };
    let mut model_cfg = ModelConfig::new(
        args.width,
        args.rounds,
        train_set.dim(),
        train_set.classes(),
        args.train_seed,
    );
    model_cfg.bias = !args.no_bias;
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        momentum: args.momentum,
        weight_decay: args.weight_decay,
        lr_schedule: match args.schedule {
            Schedule::Cosine => LrSchedule::Cosine,
            Schedule::Constant => LrSchedule::Constant,
        },
        seed: args.train_seed,
        precision: match args.precision {
            Prec::Single => Precision::Single,
            Prec::Double => Precision::Double,
        },
    };
    let log: Box<dyn Write> = match &args.log {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let run = TrainRun {
        graph: &graph,
        model_cfg,
        train_cfg,
        train_set: &train_set,
        test_set: &test_set,
        checkpoint: args.checkpoint.as_deref(),
    };
    let error = match train_cfg.precision {
        Precision::Single => run.execute::<f32>(log)?,
        Precision::Double => run.execute::<f64>(log)?,
    };
    eprintln!(
        "nodes {} edges {} top1_error {error:.2}%",
        graph.node_count(),
        graph.edge_count()
    );
    Ok(())
}

struct TrainRun<'a> {
    graph: &'a Graph,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_set: &'a Dataset,
    test_set: &'a Dataset,
    checkpoint: Option<&'a Path>,
}

impl TrainRun<'_> {
    fn execute<F: Scalar>(&self, mut log: Box<dyn Write>) -> Result<f64> {
        let mut model = MlpModel::<F>::for_graph(self.graph, self.model_cfg)?;
        let mut write_err = None;
        let report = train_with(&mut model, self.train_set, self.test_set, &self.train_cfg, |entry, _| {
            if write_err.is_none() {
                let line = serde_json::to_string(entry).expect("epoch log serializes");
                if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                    write_err = Some(e);
                }
            }
        })?;
        if let Some(e) = write_err {
            return Err(e).context("writing epoch log");
        }
        if let Some(path) = self.checkpoint {
            Checkpoint::from_model(&model).save(path)?;
        }
        Ok(report.final_eval.top1_error_percent)
    }
}

fn cmd_sweep(spec_path: &Path, out: &Path, workers: Option<usize>, resume: bool) -> Result<()> {
    let spec = SweepSpec::from_file(spec_path)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let existing = if resume && out.exists() {
        read_records_file(out)?
    } else {
        if out.exists() {
            std::fs::remove_file(out).with_context(|| format!("replacing {}", out.display()))?;
        }
        Vec::new()
    };
    info!(
        "sweep {}: {} jobs, {} rows already present",
        spec.name,
        spec.jobs().len(),
        existing.len()
    );
    // Rows are appended as they finish so an interrupted sweep can resume;
    // the file is rewritten in canonical order at the end.
    // Workers report concurrently; one writer at a time keeps lines whole.
    let file_lock = Mutex::new(());
    let append = |record: &relnet::ExperimentRecord| {
        let _guard = file_lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = append_record(out, record) {
            warn!("could not append record: {e}");
        }
    };
    let records = run_sweep(
        &spec,
        RunOptions {
            workers,
            existing,
            on_record: Some(&append),
        },
    )?;
    write_records_file(out, &records)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    info!("wrote {} rows ({failed} failed) to {}", records.len(), out.display());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
