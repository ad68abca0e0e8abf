//! Command implementations behind the `biesn` binary.

pub mod config;
pub mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use biesn::dataset::{generate_synthetic, load_dataset, write_dataset, Split, SyntheticSpec};
use biesn::model_io::{load_model, save_model};
use biesn::pipeline::{benchmark, train};
use biesn::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Numerical => EXIT_NUMERICAL,
                ErrorKind::Validation | ErrorKind::Io => EXIT_DATA,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    write!(f, ": {s}")?;
                    src = s.source();
                }
                Ok(())
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => CliError::Usage(e.to_string()),
            e => CliError::Core(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "biesn", version, about = "Bidirectional echo state network classifier for keypoint sequences")]
pub struct Cli {
    /// Worker threads (default: all cores). Does not change results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic motif-order dataset (KPS1 files + manifest.json).
    Generate(GenerateArgs),
    /// Fit a model on the train split and save it.
    Train(RunArgs),
    /// Evaluate a saved model on one split.
    Eval(EvalArgs),
    /// Compare bidirectional and unidirectional reservoirs over several seeds.
    Benchmark(RunArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// File of `key = value` lines (n_classes, samples_per_class, ...).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// File of `key = value` lines using the flag names below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `bi` or `uni`.
    #[arg(long)]
    pub direction: Option<String>,
    /// Total reservoir units (split evenly between directions for bi).
    #[arg(long)]
    pub units: Option<String>,
    #[arg(long)]
    pub leak_rate: Option<String>,
    #[arg(long)]
    pub spectral_radius: Option<String>,
    #[arg(long)]
    pub input_scaling: Option<String>,
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub bias_scale: Option<String>,
    #[arg(long)]
    pub noise_level: Option<String>,
    #[arg(long)]
    pub washout: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// Comma-separated values or `default`; picks lambda on the val split.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// `final`, `mean` or `mean_plus_final`.
    #[arg(long)]
    pub agg: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub shared_weights: Option<String>,
    #[arg(long)]
    pub wrist_center: Option<String>,
}

impl RunArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, o: &Option<String>| {
            if let Some(x) = o {
                v.push((k, x.clone()));
            }
        };
        push("direction", &self.direction);
        push("units", &self.units);
        push("leak-rate", &self.leak_rate);
        push("spectral-radius", &self.spectral_radius);
        push("input-scaling", &self.input_scaling);
        push("density", &self.density);
        push("bias-scale", &self.bias_scale);
        push("noise-level", &self.noise_level);
        push("washout", &self.washout);
        push("lambda", &self.lambda);
        push("lambda-grid", &self.lambda_grid);
        push("agg", &self.agg);
        push("seeds", &self.seeds);
        push("seed", &self.seed);
        push("shared-weights", &self.shared_weights);
        push("wrist-center", &self.wrist_center);
        v
    }

    /// File values first, then flags on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            for (k, v) in config::read_pairs(path)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in self.flag_pairs() {
            cfg.set(k, &v)?;
        }
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.pipeline.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match &cli.command {
        Command::Train(a) | Command::Benchmark(a) => cli.threads.or(a.resolve()?.threads),
        _ => cli.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::data(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a.resolve()?),
        Command::Eval(a) => cmd_eval(&a),
        Command::Benchmark(a) => cmd_benchmark(&a.resolve()?),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes());
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut spec = SyntheticSpec::default();
    if let Some(path) = &args.spec {
        for (k, v) in config::read_pairs(path)? {
            config::set_synthetic(&mut spec, &k, &v)?;
        }
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let ds = generate_synthetic(&spec)?;
    let manifest = write_dataset(&ds, &args.out)?;
    let mut text = format!("wrote {}\n", manifest.display());
    for split in Split::ALL {
        text.push_str(&format!("{:<5} {}\n", split.as_str(), ds.split(split).len()));
    }
    emit(&text);
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg.manifest()?)?;
    let outcome = train(&ds, &cfg.pipeline, &cfg.train_options())?;
    create_dir(&cfg.out)?;
    let model_path = cfg.out.join("model.besn");
    save_model(&outcome.model, &model_path)?;
    let rep = report::train_report(cfg, &ds, &outcome);
    write_text(&cfg.out.join("train_report.json"), &report::to_json(&rep))?;
    emit(&format!(
        "trained on {} sequences in {:.3}s (lambda {}), model at {}\n",
        ds.train.len(),
        outcome.train_seconds,
        outcome.chosen_lambda,
        model_path.display()
    ));
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let split: Split = args
        .split
        .parse()
        .map_err(|_| CliError::usage(format!("unknown split `{}` (train, val, test)", args.split)))?;
    let model = load_model(&args.model)?;
    let ds = load_dataset(&args.manifest)?;
    let start = Instant::now();
    let samples = ds.split(split);
    if samples.is_empty() {
        return Err(Error::EmptySplit(split.as_str()).into());
    }
    let mut rep = model.evaluate(samples)?;
    rep.wall_clock_eval_s = start.elapsed().as_secs_f64();
    let json = report::to_json(&report::eval_report(split, &rep));
    if let Some(out) = &args.out {
        write_text(out, &json)?;
    }
    emit(&json);
    Ok(())
}

pub fn cmd_benchmark(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg.manifest()?)?;
    if cfg.seeds == 1 {
        log::warn!("benchmark with a single seed: SD is reported as 0");
    }
    let start = Instant::now();
    let table = benchmark(&ds, &cfg.pipeline, &cfg.train_options(), cfg.seeds)?;
    let total = start.elapsed().as_secs_f64();
    create_dir(&cfg.out)?;
    let rep = report::benchmark_report(cfg, &table, total);
    write_text(&cfg.out.join("benchmark.json"), &report::to_json(&rep))?;
    let text = report::benchmark_text(&table, cfg.seeds);
    write_text(&cfg.out.join("benchmark.txt"), &text)?;
    emit(&text);
    Ok(())
}
