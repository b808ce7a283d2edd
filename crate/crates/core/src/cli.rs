//! Command-line front end: graph and dataset generation, training, evaluation, gradient
//! checks and stability diagnostics.
//!
//! Settings resolve as command-line flag, then `--config` file value, then built-in default.
//! One root `--seed` feeds independent streams for the graph, data, initialization and
//! shuffling stages.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{make_source_loc_dataset, Dataset, Split};
use crate::diagnostics::{compare_filter_traces, state_norm_trace};
use crate::error::{Error, Result};
use crate::filters::{FilterActivations, FilterKind, FilterParams};
use crate::graph::{normalize_shift, sbm_generate, Graph, ShiftOperator, SHIFT_MAX_ITERS, SHIFT_TOL};
use crate::models::{Checkpoint, Model, ModelConfig};
use crate::numerics::{power_iteration, Activation, RealVector};
use crate::rng::{Rng, Stage};
use crate::training::{
    evaluate, loss_gradient, run_gradcheck, train, GradcheckConfig, TrainConfig,
};

/// Flat experiment configuration; also the schema of `--config` files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub c: usize,
    pub p: f64,
    pub q: f64,
    pub graph: Option<PathBuf>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub t_max: usize,
    pub data: Option<PathBuf>,
    pub kind: FilterKind,
    pub layers: usize,
    pub features: usize,
    pub order: usize,
    /// σ between layers.
    pub activation: Activation,
    /// σ_w of the RSN state update.
    pub state_activation: Activation,
    /// σ_y of the RSN/LSSM outputs.
    pub output_activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            n: 50,
            c: 5,
            p: 0.8,
            q: 0.2,
            graph: None,
            n_train: 10240,
            n_val: 2560,
            n_test: 2560,
            t_max: 50,
            data: None,
            kind: FilterKind::Gcnn,
            layers: 1,
            features: 4,
            order: 4,
            activation: Activation::Relu,
            state_activation: Activation::Relu,
            output_activation: Activation::Relu,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            beta1: train.beta1,
            beta2: train.beta2,
            epsilon: train.epsilon,
            out: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }

    pub fn filter_activations(&self) -> FilterActivations {
        FilterActivations::new(self.state_activation, self.output_activation)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig::uniform(
            self.n,
            self.c,
            self.kind,
            self.layers,
            self.features,
            self.order,
            self.activation,
            self.filter_activations(),
        )
    }

    fn graph_path(&self) -> Result<&Path> {
        existing(self.graph.as_deref(), "--graph")
    }

    fn data_path(&self) -> Result<&Path> {
        existing(self.data.as_deref(), "--data")
    }

    fn out_path(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::invalid("an output path (--out) is required"))
    }

    fn stamp(&self, command: &str) -> serde_json::Value {
        json!({
            "command": command,
            "seed": self.seed,
            "config": self,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

fn existing<'a>(path: Option<&'a Path>, flag: &str) -> Result<&'a Path> {
    let path = path.ok_or_else(|| Error::invalid(format!("{flag} is required")))?;
    if !path.exists() {
        return Err(Error::invalid(format!("{} does not exist", path.display())));
    }
    Ok(path)
}

#[derive(Debug, Parser)]
#[command(name = "shiftnet", version, about = "Graph filters as state-space recursions")]
pub struct Cli {
    /// Flat JSON experiment configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a connected stochastic block model graph.
    GenGraph(GenGraphArgs),
    /// Generate a diffused-source localization dataset on a graph.
    GenData(GenDataArgs),
    /// Train a model and write report and checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Compare exact gradients against finite differences on small random models.
    Gradcheck(GradcheckArgs),
    /// Trace state norms of the shift recursion and of all filter kinds.
    Diagnose(DiagnoseArgs),
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

#[derive(Debug, Args)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenGraphArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.n, self.n);
        set(&mut cfg.c, self.c);
        set(&mut cfg.p, self.p);
        set(&mut cfg.q, self.q);
        set(&mut cfg.seed, self.seed);
        set_path(&mut cfg.out, &self.out);
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenDataArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        set_path(&mut cfg.graph, &self.graph);
        set(&mut cfg.n_train, self.n_train);
        set(&mut cfg.n_val, self.n_val);
        set(&mut cfg.n_test, self.n_test);
        set(&mut cfg.t_max, self.t_max);
        set(&mut cfg.seed, self.seed);
        set_path(&mut cfg.out, &self.out);
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub kind: Option<FilterKind>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    /// Filter order K.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub state_activation: Option<Activation>,
    #[arg(long)]
    pub output_activation: Option<Activation>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.kind, self.kind);
        set(&mut cfg.layers, self.layers);
        set(&mut cfg.features, self.features);
        set(&mut cfg.order, self.order);
        set(&mut cfg.activation, self.activation);
        set(&mut cfg.state_activation, self.state_activation);
        set(&mut cfg.output_activation, self.output_activation);
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving report.json, report.csv and checkpoint.json.
    #[arg(long = "out-dir")]
    pub out: Option<PathBuf>,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        set_path(&mut cfg.graph, &self.graph);
        set_path(&mut cfg.data, &self.data);
        self.model.apply(cfg);
        set(&mut cfg.epochs, self.epochs);
        set(&mut cfg.batch_size, self.batch_size);
        set(&mut cfg.learning_rate, self.learning_rate);
        set(&mut cfg.beta1, self.beta1);
        set(&mut cfg.beta2, self.beta2);
        set(&mut cfg.epsilon, self.epsilon);
        set(&mut cfg.seed, self.seed);
        set_path(&mut cfg.out, &self.out);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Also write the confusion matrix CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Restrict to one filter kind (default: all).
    #[arg(long)]
    pub kind: Option<FilterKind>,
    /// Use this single filter order instead of the default set {2, 3}.
    #[arg(long)]
    pub order: Option<usize>,
    /// Use this single layer count instead of the default set {1, 2}.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Random instances per (kind, layers, order) combination.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Negate the analytic gradient; the check must then fail.
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DiagnoseInput {
    /// All-ones signal.
    Ones,
    /// Dominant eigenvector of the shift operator.
    Dominant,
    /// Kronecker delta at node 0.
    Delta,
    /// Uniform random signal from the data stream of the seed.
    Random,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Number of shifts K.
    #[arg(long)]
    pub order: Option<usize>,
    /// Use the raw adjacency instead of `A / ρ(A)`.
    #[arg(long)]
    pub unnormalized: bool,
    #[arg(long, value_enum, default_value = "ones")]
    pub input: DiagnoseInput,
    #[arg(long)]
    pub state_activation: Option<Activation>,
    #[arg(long)]
    pub output_activation: Option<Activation>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV path; the JSON summary goes next to it with a `.json` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Execute a parsed command line, writing human-readable progress to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    run_with_output(cli, &mut stdout)
}

pub fn run_with_output(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::GenGraph(args) => {
            args.apply(&mut cfg);
            cmd_gen_graph(&cfg, out)
        }
        Command::GenData(args) => {
            args.apply(&mut cfg);
            cmd_gen_data(&cfg, out)
        }
        Command::Train(args) => {
            args.apply(&mut cfg);
            cmd_train(&cfg, out)
        }
        Command::Eval(args) => {
            set_path(&mut cfg.graph, &args.graph);
            set_path(&mut cfg.data, &args.data);
            cmd_eval(&cfg, &args, out)
        }
        Command::Gradcheck(args) => {
            set(&mut cfg.seed, args.seed);
            cmd_gradcheck(&cfg, &args, out)
        }
        Command::Diagnose(args) => {
            set_path(&mut cfg.graph, &args.graph);
            set(&mut cfg.order, args.order);
            set(&mut cfg.state_activation, args.state_activation);
            set(&mut cfg.output_activation, args.output_activation);
            set(&mut cfg.seed, args.seed);
            set_path(&mut cfg.out, &args.out);
            cmd_diagnose(&cfg, &args, out)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// CSV preceded by a `#` line carrying the resolved configuration.
fn write_csv_with_stamp(
    path: &Path,
    stamp: &serde_json::Value,
    body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let mut buf = format!("# {}\n", serde_json::to_string(stamp)?).into_bytes();
    body(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn load_shift(cfg: &ExperimentConfig) -> Result<(Graph, ShiftOperator)> {
    let g = Graph::load(cfg.graph_path()?)?;
    let s = normalize_shift(&g)?;
    Ok((g, s))
}

pub fn cmd_gen_graph(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let path = cfg.out_path()?;
    let g = sbm_generate(cfg.n, cfg.c, cfg.p, cfg.q, &mut Rng::for_stage(cfg.seed, Stage::Graph))?;
    let rho = power_iteration(g.adjacency(), SHIFT_TOL, SHIFT_MAX_ITERS)?.magnitude;
    let mut meta = cfg.stamp("gen-graph");
    meta["spectral_radius"] = json!(rho);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    g.save(path, Some(meta))?;
    writeln!(
        out,
        "wrote {}: {} nodes, {} communities, {} edges",
        path.display(),
        g.n(),
        cfg.c,
        g.edge_count()
    )?;
    writeln!(out, "spectral_radius {rho:?}")?;
    Ok(())
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let path = cfg.out_path()?;
    let (g, s) = load_shift(cfg)?;
    let mut ds = make_source_loc_dataset(
        &g,
        &s,
        cfg.n_train,
        cfg.n_val,
        cfg.n_test,
        cfg.t_max,
        &mut Rng::for_stage(cfg.seed, Stage::Data),
    )?;
    let mut stamp = cfg.stamp("gen-data");
    stamp["generator"] = json!(ds.provenance);
    ds.provenance = serde_json::to_string(&stamp)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    ds.save(path)?;
    writeln!(
        out,
        "wrote {}: {} samples ({} train / {} val / {} test), {} classes",
        path.display(),
        ds.samples.len(),
        ds.splits.train.len(),
        ds.splits.val.len(),
        ds.splits.test.len(),
        ds.classes
    )?;
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::invalid("--out-dir is required"))?;
    let (g, s) = load_shift(cfg)?;
    let ds = Dataset::load(cfg.data_path()?)?;
    // node and class counts come from the inputs, not the generation defaults
    let mut cfg = cfg.clone();
    cfg.n = g.n();
    cfg.c = ds.classes;
    if ds.n != g.n() {
        return Err(Error::dims("dataset node count vs graph", g.n(), ds.n));
    }
    let tc = cfg.train_config();
    tc.validate()?;
    let mut model = Model::random(cfg.model_config(), &mut Rng::for_stage(cfg.seed, Stage::Init))?;
    let report = train(&mut model, &s, &ds, &tc)?;

    std::fs::create_dir_all(dir)?;
    let stamp = cfg.stamp("train");
    write_json(
        &dir.join("report.json"),
        &json!({ "meta": stamp, "report": report }),
    )?;
    write_csv_with_stamp(&dir.join("report.csv"), &stamp, |buf| report.write_csv(buf))?;
    Checkpoint::new(&model, stamp).save(&dir.join("checkpoint.json"))?;

    let params = model.param_count();
    writeln!(
        out,
        "{} L={} F={} K={}: {} filter parameters ({} by closed form), {} readout",
        cfg.kind, cfg.layers, cfg.features, cfg.order, params.literal, params.closed_form,
        params.readout
    )?;
    writeln!(
        out,
        "best epoch {} (val {:.4}); test_accuracy {}",
        report.best_epoch, report.best_val_accuracy, report.test_accuracy
    )?;
    writeln!(out, "wall_clock_seconds {:.2}", report.wall_clock_seconds)?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

pub fn cmd_eval(cfg: &ExperimentConfig, args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.model()?;
    let (g, s) = load_shift(cfg)?;
    let ds = Dataset::load(cfg.data_path()?)?;
    if g.n() != model.nodes() {
        return Err(Error::dims("checkpoint nodes vs graph", model.nodes(), g.n()));
    }
    let eval = evaluate(&model, &s, &ds, args.split.into())?;
    writeln!(out, "accuracy {}", eval.accuracy)?;
    writeln!(out, "mean_loss {}", eval.mean_loss)?;
    writeln!(out, "samples {}", eval.count)?;
    eval.write_confusion_csv(&mut *out)?;
    if let Some(path) = &args.out {
        let stamp = json!({
            "command": "eval",
            "checkpoint": args.checkpoint,
            "checkpoint_meta": ckpt.meta,
            "graph": cfg.graph,
            "data": cfg.data,
            "split": format!("{:?}", args.split).to_lowercase(),
            "accuracy": eval.accuracy,
        });
        write_csv_with_stamp(path, &stamp, |buf| eval.write_confusion_csv(buf))?;
    }
    Ok(())
}

pub fn cmd_gradcheck(cfg: &ExperimentConfig, args: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let mut gc = GradcheckConfig {
        seed: cfg.seed,
        ..GradcheckConfig::default()
    };
    if let Some(kind) = args.kind {
        gc.kinds = vec![kind];
    }
    if let Some(order) = args.order {
        gc.orders = vec![order];
    }
    if let Some(layers) = args.layers {
        gc.layers = vec![layers];
    }
    set(&mut gc.instances, args.instances);
    set(&mut gc.tolerance, args.tolerance);

    let report = if args.inject_sign_flip {
        let flipped = |m: &Model, s: &ShiftOperator, x: &[f64], y: usize| {
            loss_gradient(m, s, x, y).map(|g| g.into_iter().map(|v| -v).collect())
        };
        run_gradcheck(&gc, &flipped)?
    } else {
        run_gradcheck(&gc, &loss_gradient)?
    };
    for kind in &gc.kinds {
        writeln!(
            out,
            "{kind}: {} instances, worst relative error {:.3e}",
            report.cases_for(*kind),
            report.worst_for(*kind)
        )?;
    }
    writeln!(out, "worst_rel_error {:e}", report.worst_rel_error)?;
    writeln!(out, "{}", if report.passed { "PASS" } else { "FAIL" })?;
    if report.passed {
        Ok(())
    } else {
        Err(Error::NumericalAbort(format!(
            "gradient check failed: worst relative error {:e} >= {:e}",
            report.worst_rel_error, gc.tolerance
        )))
    }
}

pub fn cmd_diagnose(cfg: &ExperimentConfig, args: &DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let g = Graph::load(cfg.graph_path()?)?;
    let s = if args.unnormalized {
        ShiftOperator::unnormalized(g.adjacency().clone())?
    } else {
        normalize_shift(&g)?
    };
    let n = g.n();
    let x: RealVector = match args.input {
        DiagnoseInput::Ones => RealVector::filled(n, 1.0),
        DiagnoseInput::Delta => RealVector::delta(n, 0),
        DiagnoseInput::Dominant => power_iteration(s.matrix(), SHIFT_TOL, SHIFT_MAX_ITERS)?.vector,
        DiagnoseInput::Random => {
            let mut rng = Rng::for_stage(cfg.seed, Stage::Data);
            (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
        }
    };
    let stability = state_norm_trace(&s, &x, cfg.order)?;

    let mut rng = Rng::for_stage(cfg.seed, Stage::Init);
    let gcnn = match FilterParams::random(FilterKind::Gcnn, cfg.order, &mut rng) {
        FilterParams::Gcnn(p) => p,
        _ => unreachable!("requested a linear filter"),
    };
    let rsn = match FilterParams::random(FilterKind::Rsn, cfg.order, &mut rng) {
        FilterParams::Rsn(p) => p,
        _ => unreachable!("requested an RSN filter"),
    };
    let lssm = match FilterParams::random(FilterKind::Lssm, cfg.order, &mut rng) {
        FilterParams::Lssm(p) => p,
        _ => unreachable!("requested an LSSM filter"),
    };
    let comparison = compare_filter_traces(&s, &x, &gcnn, &rsn, &lssm, cfg.filter_activations())?;

    writeln!(
        out,
        "{} shift, input {:?}: rate {:.6}, spectral radius {:.6}, alignment {:.6}",
        if args.unnormalized { "unnormalized" } else { "normalized" },
        args.input,
        stability.growth_rate,
        stability.spectral_radius,
        stability.alignment
    )?;
    writeln!(out, "classification {}", stability.classification)?;

    if let Some(path) = &cfg.out {
        let mut stamp = cfg.stamp("diagnose");
        stamp["input"] = json!(args.input);
        stamp["unnormalized"] = json!(args.unnormalized);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        write_csv_with_stamp(path, &stamp, |buf| comparison.write_csv(buf))?;
        let summary = json!({
            "meta": stamp,
            "stability": stability,
            "comparison": comparison,
        });
        write_json(&path.with_extension("json"), &summary)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}
