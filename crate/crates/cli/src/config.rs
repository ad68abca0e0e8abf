//! Plain-text `key = value` configuration.
//!
//! Keys are the long flag names (`leak-rate`, `lambda-grid`, ...); `#`
//! starts a comment. A flag given on the command line overrides the same
//! key from the file.

use std::fs;
use std::path::{Path, PathBuf};

use biesn::dataset::SyntheticSpec;
use biesn::pipeline::{default_lambda_grid, Direction, PipelineConfig, TrainOptions};
use biesn::AggregationMode;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub lambda: f64,
    pub lambda_grid: Option<Vec<f64>>,
    pub seeds: usize,
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            lambda: TrainOptions::default().lambda,
            lambda_grid: None,
            seeds: 5,
            manifest: None,
            out: PathBuf::from("out"),
            threads: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::usage(format!("invalid value `{value}` for `{key}` (expected true/false)"))),
    }
}

/// `default`, or a comma-separated list of positive reals.
pub fn parse_lambda_grid(value: &str) -> Result<Vec<f64>, CliError> {
    if value == "default" {
        return Ok(default_lambda_grid());
    }
    let grid: Vec<f64> = value
        .split(',')
        .map(|v| parse::<f64>("lambda-grid", v.trim()))
        .collect::<Result<_, _>>()?;
    if grid.is_empty() || grid.iter().any(|l| !l.is_finite() || *l <= 0.0) {
        return Err(CliError::usage("lambda-grid entries must be > 0"));
    }
    Ok(grid)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let r = &mut self.pipeline.reservoir;
        match key {
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "direction" => {
                self.pipeline.direction = value.parse::<Direction>().map_err(CliError::usage)?
            }
            "units" => r.n_units = parse(key, value)?,
            "leak-rate" => r.leak_rate = parse(key, value)?,
            "spectral-radius" => r.spectral_radius = parse(key, value)?,
            "input-scaling" => r.input_scaling = parse(key, value)?,
            "density" => r.density = parse(key, value)?,
            "bias-scale" => r.bias_scale = parse(key, value)?,
            "noise-level" => r.noise_level = parse(key, value)?,
            "washout" => r.washout = parse(key, value)?,
            "seed" => r.seed = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "lambda-grid" => self.lambda_grid = Some(parse_lambda_grid(value)?),
            "agg" => {
                self.pipeline.aggregation = value.parse::<AggregationMode>().map_err(CliError::usage)?
            }
            "seeds" => self.seeds = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "shared-weights" => self.pipeline.shared_weights = parse_bool(key, value)?,
            "wrist-center" => self.pipeline.wrist_center = parse_bool(key, value)?,
            other => return Err(CliError::usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            lambda: self.lambda,
            lambda_grid: self.lambda_grid.clone(),
        }
    }

    pub fn manifest(&self) -> Result<&Path, CliError> {
        self.manifest
            .as_deref()
            .ok_or_else(|| CliError::usage("no manifest given (use --manifest or `manifest =` in --config)"))
    }
}

pub fn set_synthetic(spec: &mut SyntheticSpec, key: &str, value: &str) -> Result<(), CliError> {
    let k = key.replace('-', "_");
    match k.as_str() {
        "n_classes" => spec.n_classes = parse(key, value)?,
        "prefix_motifs" => spec.prefix_motifs = parse(key, value)?,
        "samples_per_class" => spec.samples_per_class = parse(key, value)?,
        "min_len" => spec.min_len = parse(key, value)?,
        "max_len" => spec.max_len = parse(key, value)?,
        "feature_dim" => spec.feature_dim = parse(key, value)?,
        "motif_length" => spec.motif_length = parse(key, value)?,
        "noise_std" => spec.noise_std = parse(key, value)?,
        "filler_std" => spec.filler_std = parse(key, value)?,
        "seed" => spec.seed = parse(key, value)?,
        _ => return Err(CliError::usage(format!("unknown spec key `{key}`"))),
    }
    Ok(())
}

/// Reads `key = value` pairs, skipping blank lines and `#` comments.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    parse_pairs(&text).map_err(|line| {
        CliError::usage(format!("{}:{line}: expected `key = value`", path.display()))
    })
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, usize> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(i + 1)?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}
