//! Command-line driver: `simulate`, `gen-data`, `train` and `evaluate`.
//!
//! Exit status 0 means success, 1 a failure during the run and 2 an invalid
//! configuration or command line.

pub mod config;
pub mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

pub use config::RunConfig;
pub use pipeline::{load_network, simulate_dnnmg, simulate_level, RunOutput, Snapshots};

use crate::dnnmg::{generate_training_data, train, DataConfig, TrainingRun, Variant};
use crate::error::{Error, Result};
use crate::metrics::{write_relative_error_csv, write_stats_csv, FunctionalSeries, RunStats};
use crate::neural::checkpoint;

/// Environment variable with the requested number of worker threads.
pub const THREADS_ENV: &str = "DNNMG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dnnmg", version, about = "Channel flow with multigrid and learned fine-level corrections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation and write functionals, statistics and snapshots.
    Simulate(SimulateArgs),
    /// Produce a training dataset from a fine simulation.
    GenData(GenDataArgs),
    /// Train a network variant (generating the dataset if it is missing).
    Train(TrainArgs),
    /// Run several variants and compare them with a fine reference.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub end_time: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// off, plain, p1, p2 or psi.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Solve on the finest level instead (reference run).
    #[arg(long)]
    pub fine: bool,
    /// `train` or `test` obstacle position.
    #[arg(long)]
    pub obstacle: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub record_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub record_steps: Option<usize>,
    /// Checkpoint to write; defaults to `<out>/<variant>.bin`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Functional series CSV of the fine reference run.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) if !p.exists() => return Err(Error::Config(format!("config file {} does not exist", p.display()))),
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    if let Some(l) = c.levels {
        cfg.scenario.levels = l;
    }
    if let Some(t) = c.end_time {
        cfg.scenario.end_time = t;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Reads the thread override. The solver runs on one thread, so any valid
/// value is accepted and larger values only produce a warning.
pub fn thread_override() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if n > 1 {
                    warn!("{THREADS_ENV}={n}: computations run on a single thread");
                }
                Ok(Some(n))
            }
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn stats_window(cfg: &RunConfig) -> (f64, f64) {
    (cfg.output.stats_from, cfg.scenario.end_time + 0.5 * cfg.scenario.timestep)
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(v) = &args.variant {
        cfg.dnnmg.variant = v.clone();
    }
    if let Some(c) = &args.checkpoint {
        cfg.dnnmg.checkpoint = Some(c.clone());
    }
    if let Some(o) = &args.obstacle {
        cfg.scenario.obstacle = o.clone();
    }
    let scenario = cfg.scenario()?;
    let solver = cfg.solver()?;
    let variant = cfg.variant()?;
    let net = match variant.mode() {
        Some(mode) if !args.fine => Some(load_network(cfg.dnnmg.checkpoint.as_deref(), mode)?),
        _ => None,
    };
    let problem = scenario.build()?;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let snaps = Snapshots { dir: Some(dir.join("vtk")), every: cfg.output.vtk_every };
    if snaps.every > 0 {
        create_dir(&dir.join("vtk"))?;
    }
    let steps = cfg.num_steps();
    let name = if args.fine { "fine" } else { variant.name() };
    info!("{name}: {steps} steps on {} levels", scenario.levels);
    let out = if args.fine {
        simulate_level(&problem, scenario.fine_level(), solver, steps, &snaps, |n, x, r| {
            if n % 100 == 0 {
                info!("step {n} t={:.2} newton {}", x.t, r.iterations());
            }
        })?
    } else {
        simulate_dnnmg(&problem, solver, net, cfg.dnnmg.start_time, steps, &snaps)?
    };
    info!("{name}: {:.1} s", out.seconds);
    out.series.write_csv(&dir.join("series.csv"))?;
    if let Some(c) = &out.coarse_series {
        c.write_csv(&dir.join("coarse_series.csv"))?;
    }
    match RunStats::from_series(&out.series, stats_window(&cfg)) {
        Ok(s) => write_stats_csv(&dir.join("stats.csv"), &[(name.to_string(), s)])?,
        Err(e) => warn!("no statistics: {e}"),
    }
    Ok(())
}

fn dataset_config(cfg: &RunConfig, total: Option<usize>, record: Option<usize>) -> Result<DataConfig> {
    Ok(DataConfig {
        total_steps: total.unwrap_or(cfg.train.total_steps),
        record_steps: record.unwrap_or(cfg.train.record_steps),
        solver: cfg.solver()?,
    })
}

fn make_dataset(cfg: &RunConfig, dir: &Path, data: &DataConfig) -> Result<TrainingRun> {
    let scenario = cfg.train_scenario()?;
    let problem = scenario.build()?;
    let mut series = FunctionalSeries::default();
    let mut step = 0;
    let run = generate_training_data(&problem, &scenario, data, |x, prev, r| {
        step += 1;
        if step % 100 == 0 {
            info!("fine step {step} t={:.2} newton {}", x.t, r.iterations());
        }
        let (d, l) = crate::metrics::drag_lift(&problem, x, Some(prev), crate::metrics::ForceMethod::Residual)
            .unwrap_or((f64::NAN, f64::NAN));
        let div = crate::metrics::divergence_norm(problem.level(x.level), x.velocity(), true).unwrap_or(f64::NAN);
        series.push(x.t, d, l, div);
    })?;
    run.save(dir)?;
    series.write_csv(&dir.join("fine_series.csv"))?;
    info!("dataset with {} patches × {} steps written to {}", run.num_patches(), run.num_steps(), dir.display());
    Ok(run)
}

fn gen_data(args: &GenDataArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(d) = &args.dataset {
        cfg.train.dataset = d.clone();
    }
    let data = dataset_config(&cfg, args.total_steps, args.record_steps)?;
    make_dataset(&cfg, &cfg.train.dataset.clone(), &data).map(|_| ())
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(v) = &args.variant {
        cfg.dnnmg.variant = v.clone();
    }
    if let Some(g) = args.gamma {
        cfg.dnnmg.gamma = g;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(d) = &args.dataset {
        cfg.train.dataset = d.clone();
    }
    let variant = cfg.variant()?;
    let tcfg = cfg.train_config(variant)?;
    let data = dataset_config(&cfg, args.total_steps, args.record_steps)?;
    let scenario = cfg.train_scenario()?;
    let dir = cfg.train.dataset.clone();
    let run =
        if dir.join("manifest.txt").exists() { TrainingRun::load(&dir)? } else { make_dataset(&cfg, &dir, &data)? };
    let problem = scenario.build()?;
    let (net, report) =
        train(&problem, &run, &tcfg, |e| info!("epoch {} loss {:.6e} ({:.1} s)", e.epoch, e.loss, e.seconds))?;
    create_dir(&cfg.output.dir)?;
    let path = args.checkpoint.clone().unwrap_or_else(|| cfg.output.dir.join(format!("{}.bin", variant.name())));
    let meta = [
        ("variant", variant.name().to_string()),
        ("gamma", cfg.dnnmg.gamma.to_string()),
        ("epochs", tcfg.epochs.to_string()),
        ("window", tcfg.window.to_string()),
        ("batch", tcfg.batch.to_string()),
        ("learning_rate", tcfg.adam.lr.to_string()),
        ("seed", tcfg.seed.to_string()),
        ("target", cfg.train.target.clone()),
        ("output_scale", report.output_scale.to_string()),
    ];
    checkpoint::save(&net, &path, &meta)?;
    let loss_path = path.with_extension("loss.csv");
    let mut w = csv::Writer::from_path(&loss_path)?;
    w.write_record(["epoch", "loss"])?;
    for e in &report.epochs {
        w.write_record([e.epoch.to_string(), crate::metrics::sig6(e.loss)])?;
    }
    w.flush().map_err(|e| Error::io(&loss_path, e))?;
    info!("{} written; mean epoch time {:.2} s", path.display(), report.mean_epoch_seconds());
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(r) = &args.reference {
        cfg.evaluate.reference = Some(r.clone());
    }
    if let Some(v) = &args.variants {
        cfg.evaluate.variants = v.clone();
    }
    if let Some(d) = &args.checkpoint_dir {
        cfg.evaluate.checkpoint_dir = d.clone();
    }
    let reference = cfg
        .evaluate
        .reference
        .clone()
        .ok_or_else(|| Error::Config("evaluate needs a reference series (--reference)".into()))?;
    if !reference.exists() {
        return Err(Error::Config(format!("reference series {} does not exist", reference.display())));
    }
    let variants: Vec<Variant> = cfg.evaluate.variants.iter().map(|v| v.parse()).collect::<Result<_>>()?;
    let nets = variants
        .iter()
        .map(|v| match v.mode() {
            Some(mode) => {
                load_network(Some(&cfg.evaluate.checkpoint_dir.join(format!("{}.bin", v.name()))), mode).map(Some)
            }
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let window = stats_window(&cfg);
    let reference = RunStats::from_series(&FunctionalSeries::read_csv(&reference)?, window)?;
    let scenario = cfg.scenario()?;
    let solver = cfg.solver()?;
    let problem = scenario.build()?;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let mut rows = vec![("fine".to_string(), reference)];
    for (v, net) in variants.iter().zip(nets) {
        info!("evaluating {}", v.name());
        let out = simulate_dnnmg(&problem, solver, net, cfg.dnnmg.start_time, cfg.num_steps(), &Snapshots::default())?;
        out.series.write_csv(&dir.join(format!("{}_series.csv", v.name())))?;
        rows.push((v.name().to_string(), RunStats::from_series(&out.series, window)?));
    }
    write_stats_csv(&dir.join("stats.csv"), &rows)?;
    write_relative_error_csv(&dir.join("relative_error.csv"), &rows[1..], &reference)?;
    Ok(())
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    thread_override()?;
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

/// Exit status for an outcome.
pub fn exit_code(r: &Result<()>) -> u8 {
    match r {
        Ok(()) => 0,
        Err(Error::Config(_)) => 2,
        Err(_) => 1,
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let r = run(&cli);
    if let Err(e) = &r {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&r))
}
