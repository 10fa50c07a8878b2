use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use expandgraph::attachment::AttachmentModel;
use expandgraph::data::{filter_min_ratings, load_movielens, make_cold_start_split, ItemVectors};
use expandgraph::experiments::{
    derive_seed, run_cold_start, run_convergence_study, run_synthetic, ColdStartConfig, SyntheticConfig,
};
use expandgraph::filter::{build_shifted_matrix, geometric_coefficients, FilterSpec};
use expandgraph::graph::{barabasi_albert, erdos_renyi, read_edge_list, smooth_signal, write_edge_list, Graph, GraphSignal};
use expandgraph::optimizer::{self, closed_form_mse, read_training_csv, Norm, OptimizerConfig};

use crate::manifest;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Er,
    Ba,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn write_config(dir: &Path, toml: &str) -> Result<()> {
    let path = dir.join("config.toml");
    fs::write(&path, toml).with_context(|| format!("writing {}", path.display()))
}

/// Flags shared by the synthetic experiments.
#[derive(Debug, Args)]
pub struct SyntheticOverrides {
    /// TOML config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration used when no --config is given.
    #[arg(long, value_enum, default_value = "er")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// Descent iterations per fit.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    mu_p: Option<f64>,
    #[arg(long)]
    mu_w: Option<f64>,
}

impl SyntheticOverrides {
    fn resolve(&self) -> Result<SyntheticConfig> {
        let mut cfg = match &self.config {
            Some(path) => SyntheticConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => match self.preset {
                Preset::Er => SyntheticConfig::erdos_renyi(),
                Preset::Ba => SyntheticConfig::barabasi_albert(),
            },
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.iterations {
            cfg.training.iterations = v;
        }
        if let Some(v) = self.mu_p {
            cfg.training.mu_p = v;
        }
        if let Some(v) = self.mu_w {
            cfg.training.mu_w = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    #[command(flatten)]
    common: SyntheticOverrides,
    /// Output directory.
    #[arg(long, default_value = "results/synthetic")]
    out: PathBuf,
    /// Independent signal and incoming-node draws on the fixed graph.
    #[arg(long)]
    realizations: Option<usize>,
    /// Train/test resplits per realization.
    #[arg(long)]
    splits: Option<usize>,
    /// Select (mu_p, mu_w) by k-fold cross-validation over the configured grid.
    #[arg(long)]
    cross_validate: bool,
}

pub fn synthetic(a: SyntheticArgs) -> Result<()> {
    let mut cfg = a.common.resolve()?;
    if let Some(v) = a.realizations {
        cfg.trials.realizations = v;
    }
    if let Some(v) = a.splits {
        cfg.trials.splits = v;
    }
    if a.cross_validate {
        cfg.training.cross_validate = true;
    }
    cfg.validate()?;
    create_dir(&a.out)?;
    let toml = cfg.to_toml()?;
    write_config(&a.out, &toml)?;
    log::info!(
        "synthetic: {} realizations x {} splits on {} nodes",
        cfg.trials.realizations,
        cfg.trials.splits,
        cfg.graph.nodes
    );
    let report = run_synthetic(&cfg)?;
    report.write_trials_csv(create(&a.out.join("mse_trials.csv"))?)?;
    report.write_summary_csv(create(&a.out.join("mse_summary.csv"))?)?;
    manifest::write(&a.out.join("manifest.toml"), "synthetic", cfg.seed, Some(&toml))?;
    print!("{}", report.summary_table());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    common: SyntheticOverrides,
    /// Output directory.
    #[arg(long, default_value = "results/convergence")]
    out: PathBuf,
    /// Random initializations per regime.
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    /// mu_p of the convex regime; must reach the convexity floor.
    #[arg(long, default_value_t = 30.0)]
    mu_p_convex: f64,
}

pub fn convergence(a: ConvergenceArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    cfg.validate()?;
    create_dir(&a.out)?;
    let toml = cfg.to_toml()?;
    write_config(&a.out, &toml)?;
    let report = run_convergence_study(&cfg, a.restarts, a.mu_p_convex)?;
    let traces = a.out.join("traces");
    create_dir(&traces)?;
    let paths = report.write_traces(&traces)?;
    report.write_final_csv(create(&a.out.join("final_costs.csv"))?)?;
    manifest::write(&a.out.join("manifest.toml"), "convergence", cfg.seed, Some(&toml))?;
    println!(
        "convexity floor {:.6}; wrote {} traces to {}",
        report.threshold,
        paths.len(),
        traces.display()
    );
    for regime in report.regimes() {
        let finals: Vec<f64> = regime.fits.iter().map(|f| f.final_cost()).collect();
        let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{:<10} mu_p {:>8}  final cost in [{lo:.6}, {hi:.6}]", regime.name, regime.mu_p);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ColdStartArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// MovieLens-100K `u.data` file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results/coldstart")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Users sampled per interaction bucket (0 keeps all).
    #[arg(long)]
    users_per_bucket: Option<usize>,
    /// Attachment draws averaged per prediction.
    #[arg(long)]
    draws: Option<usize>,
    /// Descent iterations per user.
    #[arg(long)]
    iterations: Option<usize>,
}

pub fn coldstart(a: ColdStartArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ColdStartConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ColdStartConfig::default(),
    };
    if let Some(v) = a.data {
        cfg.data.path = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.users_per_bucket {
        cfg.evaluation.users_per_bucket = v;
    }
    if let Some(v) = a.draws {
        cfg.evaluation.draws = v;
    }
    if let Some(v) = a.iterations {
        cfg.training.iterations = v;
    }
    cfg.validate()?;
    create_dir(&a.out)?;
    let toml = cfg.to_toml()?;
    write_config(&a.out, &toml)?;
    let report = run_cold_start(&cfg).with_context(|| format!("cold-start run on {}", cfg.data.path.display()))?;
    report.write_users_csv(create(&a.out.join("mae_users.csv"))?)?;
    report.write_summary_csv(create(&a.out.join("mae_summary.csv"))?)?;
    fs::write(a.out.join("split.txt"), &report.split_manifest)?;
    report.filter.write_text(create(&a.out.join("filter.txt"))?)?;
    manifest::write(&a.out.join("manifest.toml"), "coldstart", cfg.seed, Some(&toml))?;
    print!("{}", report.summary_table());
    Ok(())
}

/// Graph filter taps: a file, or geometric taps `alpha^l`.
#[derive(Debug, Args)]
pub struct FilterArgs {
    /// File with one line of filter coefficients.
    #[arg(long, conflicts_with = "alpha")]
    filter: Option<PathBuf>,
    /// Geometric filter decay.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Number of geometric taps.
    #[arg(long, default_value_t = 3)]
    order: usize,
}

impl FilterArgs {
    fn load(&self) -> Result<FilterSpec> {
        match &self.filter {
            Some(path) => Ok(FilterSpec::read_text(open(path)?)?),
            None => Ok(geometric_coefficients(self.alpha, self.order)?),
        }
    }
}

fn load_graph_and_signal(graph: &Path, signal: &Path) -> Result<(Graph, GraphSignal)> {
    let g = read_edge_list(open(graph)?, false).with_context(|| format!("reading {}", graph.display()))?;
    let x = GraphSignal::read_text(open(signal)?).with_context(|| format!("reading {}", signal.display()))?;
    if x.len() != g.node_count() {
        bail!("signal has {} values for a graph with {} nodes", x.len(), g.node_count());
    }
    Ok((g, x))
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Edge-list file of the existing graph.
    #[arg(long)]
    graph: PathBuf,
    /// Signal file: one line of node values.
    #[arg(long)]
    signal: PathBuf,
    /// Training CSV with `x_plus,a_plus,b_plus` columns.
    #[arg(long)]
    train: PathBuf,
    /// Model output file.
    #[arg(long)]
    out: PathBuf,
    /// Optional `iteration,cost` trace output.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, default_value_t = 1.0)]
    mu_p: f64,
    #[arg(long, default_value_t = 1.0)]
    mu_w: f64,
    /// Norm exponent on p (1 or 2).
    #[arg(long, default_value_t = 1)]
    q_p: u32,
    /// Norm exponent on w (1 or 2).
    #[arg(long, default_value_t = 2)]
    q_w: u32,
    #[arg(long, default_value_t = 1e-4)]
    lambda_p: f64,
    #[arg(long, default_value_t = 1e-4)]
    lambda_w: f64,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    /// Upper bound on edge weights.
    #[arg(long, default_value_t = 1.0)]
    w_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn fit(a: FitArgs) -> Result<()> {
    let (g, x) = load_graph_and_signal(&a.graph, &a.signal)?;
    let f = a.filter.load()?;
    let training = read_training_csv(open(&a.train)?).with_context(|| format!("reading {}", a.train.display()))?;
    let cfg = OptimizerConfig {
        mu_p: a.mu_p,
        mu_w: a.mu_w,
        q_p: Norm::from_exponent(a.q_p)?,
        q_w: Norm::from_exponent(a.q_w)?,
        lambda_p: a.lambda_p,
        lambda_w: a.lambda_w,
        iterations: a.iterations,
        w_max: a.w_max,
        seed: a.seed,
        ..OptimizerConfig::default()
    };
    let ax = build_shifted_matrix(&g, &x, f.order())?;
    let result = optimizer::fit(&training, &ax, &f, &cfg)?;
    result.model()?.write_text(create(&a.out)?)?;
    if let Some(trace) = &a.trace {
        result.write_trace_csv(create(trace)?)?;
    }
    let mut manifest_path = a.out.clone().into_os_string();
    manifest_path.push(".manifest.toml");
    manifest::write(Path::new(&manifest_path), "fit", a.seed, None)?;
    println!(
        "fit {} training nodes: cost {:.6} -> {:.6}",
        training.len(),
        result.initial_cost(),
        result.final_cost()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    /// Model file written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    /// Also average this many sampled attachments.
    #[arg(long, default_value_t = 0)]
    draws: usize,
    /// Report the expected squared error against this value.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let (g, x) = load_graph_and_signal(&a.graph, &a.signal)?;
    let f = a.filter.load()?;
    let model = AttachmentModel::read_text(open(&a.model)?).with_context(|| format!("reading {}", a.model.display()))?;
    if model.len() != g.node_count() {
        bail!("model has {} nodes, graph has {}", model.len(), g.node_count());
    }
    let ax = build_shifted_matrix(&g, &x, f.order())?;
    let c = ax.apply(&f)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "expected\t{}", model.mean().dot(&c))?;
    if a.draws > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let total: f64 = (0..a.draws).map(|_| model.sample_with(&mut rng).a_plus.dot(&c)).sum();
        writeln!(out, "sampled\t{}", total / a.draws as f64)?;
    }
    if let Some(t) = a.target {
        writeln!(out, "mse\t{}", closed_form_mse(&model, &ax, &f, t)?)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GraphBuildArgs {
    #[command(subcommand)]
    kind: GraphKind,
}

#[derive(Debug, Subcommand)]
enum GraphKind {
    /// Erdos-Renyi graph.
    Er {
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 0.1)]
        edge_probability: f64,
        #[command(flatten)]
        out: SyntheticGraphOut,
    },
    /// Barabasi-Albert graph.
    Ba {
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        /// Edges attached by each new node.
        #[arg(long, default_value_t = 2)]
        attach_edges: usize,
        #[command(flatten)]
        out: SyntheticGraphOut,
    },
    /// Item kNN graph over the core items of a MovieLens cold-start split.
    Knn {
        /// MovieLens-100K `u.data` file.
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, default_value_t = 10)]
        min_ratings: usize,
        #[arg(long, default_value_t = 50)]
        core_items: usize,
        #[arg(long, default_value_t = 700)]
        train_items: usize,
        #[arg(long, default_value_t = 35)]
        neighbours: usize,
        /// Same seed as `coldstart --seed` gives the same split.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory for `graph.edges` and `split.txt`.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SyntheticGraphOut {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Edge-list output file.
    #[arg(long)]
    out: PathBuf,
    /// Also write a smooth signal on the graph to this file.
    #[arg(long)]
    signal_out: Option<PathBuf>,
    /// Laplacian eigenvectors mixed into the signal.
    #[arg(long, default_value_t = 30)]
    eigenvectors: usize,
}

impl SyntheticGraphOut {
    fn write(&self, command: &str, g: &Graph) -> Result<()> {
        write_edge_list(g, create(&self.out)?)?;
        if let Some(path) = &self.signal_out {
            smooth_signal(g, self.eigenvectors, derive_seed(self.seed, &[1]))?.write_text(create(path)?)?;
        }
        let mut manifest_path = self.out.clone().into_os_string();
        manifest_path.push(".manifest.toml");
        manifest::write(Path::new(&manifest_path), command, self.seed, None)?;
        println!("{} nodes, {} edges -> {}", g.node_count(), g.edge_count(), self.out.display());
        Ok(())
    }
}

pub fn graph_build(a: GraphBuildArgs) -> Result<()> {
    match a.kind {
        GraphKind::Er {
            nodes,
            edge_probability,
            out,
        } => out.write("graph-build er", &erdos_renyi(nodes, edge_probability, out.seed)?),
        GraphKind::Ba {
            nodes,
            attach_edges,
            out,
        } => out.write("graph-build ba", &barabasi_albert(nodes, attach_edges, out.seed)?),
        GraphKind::Knn {
            ratings,
            min_ratings,
            core_items,
            train_items,
            neighbours,
            seed,
            out,
        } => {
            let d = filter_min_ratings(&load_movielens(&ratings)?, min_ratings);
            let split = make_cold_start_split(&d, core_items, train_items, derive_seed(seed, &[10]))?;
            let g = ItemVectors::new(&d).knn_graph(&split.core_items, neighbours)?;
            create_dir(&out)?;
            write_edge_list(&g, create(&out.join("graph.edges"))?)?;
            split.write_manifest(&d, create(&out.join("split.txt"))?)?;
            manifest::write(&out.join("manifest.toml"), "graph-build knn", seed, None)?;
            println!(
                "{} users, {} items; core graph with {} edges -> {}",
                d.user_count(),
                d.item_count(),
                g.edge_count(),
                out.display()
            );
            Ok(())
        }
    }
}
