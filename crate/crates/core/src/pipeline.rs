//! End-to-end pipeline: reservoir features, ridge fit, evaluation and the
//! uni- vs bidirectional benchmark.
//!
//! Per-sample work runs on the current rayon pool. Results are collected in
//! sample order and every sample's noise comes from its own stream, so the
//! output does not depend on the pool size.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bidirectional::{
    aggregate, backward_seed, reduce_trajectory, run_bidirectional, AggregationMode,
};
use crate::dataset::{center_on_wrists, Dataset, KeypointSequence, Split};
use crate::error::{Error, Result};
use crate::readout::{evaluate, mean_and_sd, EvalReport, ReadoutModel, RidgeProblem, DEFAULT_LAMBDA};
use crate::reservoir::{run_forward, ReservoirConfig, ReservoirWeights};
use crate::rng::SeededRng;

const NOISE_SALT: u64 = 0x6e6f_6973_6521;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uni,
    Bi,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Uni => "uni",
            Direction::Bi => "bi",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uni" => Ok(Direction::Uni),
            "bi" => Ok(Direction::Bi),
            other => Err(format!("unknown direction `{other}` (expected uni or bi)")),
        }
    }
}

/// Everything that determines the feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// `n_units` is the total state width: bidirectional runs split it
    /// evenly between the two directions.
    pub reservoir: ReservoirConfig,
    pub direction: Direction,
    pub aggregation: AggregationMode,
    /// Backward pass reuses the forward weights.
    pub shared_weights: bool,
    pub wrist_center: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reservoir: ReservoirConfig {
                n_units: 200,
                ..Default::default()
            },
            direction: Direction::Bi,
            aggregation: AggregationMode::Final,
            shared_weights: true,
            wrist_center: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        if self.direction == Direction::Bi && (self.reservoir.n_units < 2 || !self.reservoir.n_units.is_multiple_of(2)) {
            return Err(Error::config(
                "n_units",
                "bidirectional runs need an even total of at least 2 units",
            ));
        }
        Ok(())
    }

    pub fn units_per_direction(&self) -> usize {
        match self.direction {
            Direction::Uni => self.reservoir.n_units,
            Direction::Bi => self.reservoir.n_units / 2,
        }
    }

    /// Reservoir config for one direction.
    pub fn direction_config(&self) -> ReservoirConfig {
        ReservoirConfig {
            n_units: self.units_per_direction(),
            ..self.reservoir.clone()
        }
    }

    pub fn feature_width(&self) -> usize {
        let per_dir = self.aggregation.width(self.units_per_direction());
        match self.direction {
            Direction::Uni => per_dir,
            Direction::Bi => 2 * per_dir,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.reservoir.seed = seed;
        c
    }
}

/// Fixed reservoirs plus the aggregation that turns a clip into a vector.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    config: PipelineConfig,
    direction_config: ReservoirConfig,
    forward: ReservoirWeights,
    backward: Option<ReservoirWeights>,
}

impl FeaturePipeline {
    pub fn new(config: &PipelineConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        let direction_config = config.direction_config();
        let forward = ReservoirWeights::init(&direction_config, input_dim)?;
        let backward = if config.direction == Direction::Bi && !config.shared_weights {
            let cfg = ReservoirConfig {
                seed: backward_seed(direction_config.seed),
                ..direction_config.clone()
            };
            Some(ReservoirWeights::init(&cfg, input_dim)?)
        } else {
            None
        };
        Ok(Self {
            config: config.clone(),
            direction_config,
            forward,
            backward,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn width(&self) -> usize {
        self.config.feature_width()
    }

    pub fn forward_weights(&self) -> &ReservoirWeights {
        &self.forward
    }

    /// Feature vector for one `T x D` sequence. `noise_stream` enables the
    /// configured state noise using that stream id.
    pub fn features_of(&self, frames: &Array2<f64>, noise_stream: Option<u64>) -> Result<Array1<f64>> {
        if frames.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                context: "sequence feature dimension",
                expected: self.input_dim(),
                actual: frames.ncols(),
            });
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input sequence"));
        }
        let cfg = &self.direction_config;
        let noisy = noise_stream.filter(|_| cfg.noise_level > 0.0);
        let mut rngs = noisy.map(|s| {
            let seed = cfg.seed ^ NOISE_SALT;
            (
                SeededRng::with_stream(seed, 2 * s),
                SeededRng::with_stream(seed, 2 * s + 1),
            )
        });
        match self.config.direction {
            Direction::Uni => {
                let states = run_forward(&self.forward, frames.view(), cfg, rngs.as_mut().map(|r| &mut r.0))?;
                Ok(reduce_trajectory(states.states.view(), self.config.aggregation, cfg.washout))
            }
            Direction::Bi => {
                let bi = run_bidirectional(
                    &self.forward,
                    self.backward.as_ref(),
                    frames.view(),
                    cfg,
                    rngs.as_mut().map(|(a, b)| (a, b)),
                )?;
                Ok(aggregate(&bi, self.config.aggregation, cfg.washout))
            }
        }
    }

    fn prepare(&self, sample: &KeypointSequence) -> Array2<f64> {
        if self.config.wrist_center {
            let mut frames = sample.frames.clone();
            center_on_wrists(&mut frames);
            frames.mapv(f64::from)
        } else {
            sample.frames_f64()
        }
    }

    /// Feature matrix (`N x width`) for `samples`, computed in parallel.
    /// With `training_noise`, sample `i` draws noise from stream `i`.
    pub fn features(&self, samples: &[KeypointSequence], training_noise: bool) -> Result<Array2<f64>> {
        let rows: Vec<Array1<f64>> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                self.features_of(&self.prepare(s), training_noise.then_some(i as u64))
                    .map_err(|e| Error::Sample {
                        id: s.sample_id.clone(),
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        let width = self.width();
        let mut out = Array2::<f64>::zeros((rows.len(), width));
        for (mut dst, src) in out.outer_iter_mut().zip(&rows) {
            dst.assign(src);
        }
        Ok(out)
    }
}

/// A fitted classifier: feature pipeline settings plus the readout.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub pipeline: PipelineConfig,
    pub input_dim: usize,
    pub readout: ReadoutModel,
}

impl TrainedModel {
    /// Rebuilds the (deterministic) reservoir and checks its width against
    /// the readout.
    pub fn feature_pipeline(&self) -> Result<FeaturePipeline> {
        let p = FeaturePipeline::new(&self.pipeline, self.input_dim)?;
        if p.width() != self.readout.n_features() {
            return Err(Error::ModelWidth {
                model: self.readout.n_features(),
                pipeline: p.width(),
            });
        }
        Ok(p)
    }

    /// Evaluates on labelled samples.
    pub fn evaluate(&self, samples: &[KeypointSequence]) -> Result<EvalReport> {
        let pipeline = self.feature_pipeline()?;
        if let Some(s) = samples.first() {
            if s.feature_dim() != self.input_dim {
                return Err(Error::ModelWidth {
                    model: self.input_dim,
                    pipeline: s.feature_dim(),
                });
            }
        }
        let labels = samples
            .iter()
            .map(|s| {
                self.readout
                    .class_index(&s.label)
                    .ok_or_else(|| Error::UnknownLabel(s.label.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let start = Instant::now();
        let features = pipeline.features(samples, false)?;
        let mut report = evaluate(&self.readout, features.view(), &labels, self.pipeline.reservoir.seed)?;
        report.wall_clock_eval_s = start.elapsed().as_secs_f64();
        Ok(report)
    }

    /// Predicted labels for unlabelled samples.
    pub fn predict(&self, samples: &[KeypointSequence]) -> Result<Vec<String>> {
        let pipeline = self.feature_pipeline()?;
        let features = pipeline.features(samples, false)?;
        Ok(self
            .readout
            .predict(features.view())?
            .into_iter()
            .map(|i| self.readout.classes[i].clone())
            .collect())
    }
}

/// Readout regularization: a fixed `lambda`, or a grid searched on the
/// validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lambda: f64,
    pub lambda_grid: Option<Vec<f64>>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            lambda_grid: None,
        }
    }
}

/// `1e-6, 1e-5, ..., 1e2`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-6..=2).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub chosen_lambda: f64,
    pub lambda_sweep: Vec<LambdaScore>,
    /// Validation metrics; `None` when the dataset has no validation split.
    pub val_report: Option<EvalReport>,
    /// Linear solves performed; training has no epochs.
    pub linear_solves: usize,
    /// Feature computation plus readout fit (and the sweep, if any).
    pub train_seconds: f64,
    pub feature_seconds: f64,
    pub fit_seconds: f64,
}

/// Fits the readout on the train split. With a `lambda_grid`, each value is
/// scored on the validation split and the best one kept (ties go to the
/// earlier grid entry).
pub fn train(dataset: &Dataset, config: &PipelineConfig, options: &TrainOptions) -> Result<TrainOutcome> {
    dataset.validate()?;
    let start = Instant::now();
    let pipeline = FeaturePipeline::new(config, dataset.feature_dim)?;
    let train_labels = dataset.label_indices(Split::Train)?;
    let val_labels = dataset.label_indices(Split::Val)?;

    let t_feat = Instant::now();
    let train_x = pipeline.features(&dataset.train, true)?;
    let grid = options.lambda_grid.as_deref().filter(|g| !g.is_empty());
    let val_x = if !dataset.val.is_empty() {
        Some(pipeline.features(&dataset.val, false)?)
    } else {
        None
    };
    let feature_seconds = t_feat.elapsed().as_secs_f64();

    let t_fit = Instant::now();
    let problem = RidgeProblem::new(train_x.view(), &train_labels, dataset.classes.clone())?;
    let mut sweep = Vec::new();
    let mut linear_solves = 0;
    let readout = match (grid, &val_x) {
        (Some(grid), Some(val_x)) => {
            let mut best: Option<(f64, ReadoutModel)> = None;
            for &lambda in grid {
                let model = problem.solve(lambda)?;
                linear_solves += 1;
                let acc = evaluate(&model, val_x.view(), &val_labels, config.reservoir.seed)?.accuracy;
                sweep.push(LambdaScore {
                    lambda,
                    val_accuracy: acc,
                });
                if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    best = Some((acc, model));
                }
            }
            best.expect("non-empty grid").1
        }
        (Some(_), None) => {
            log::warn!("no validation split; ignoring lambda grid and using lambda = {}", options.lambda);
            linear_solves += 1;
            problem.solve(options.lambda)?
        }
        (None, _) => {
            linear_solves += 1;
            problem.solve(options.lambda)?
        }
    };
    let fit_seconds = t_fit.elapsed().as_secs_f64();
    let train_seconds = start.elapsed().as_secs_f64();

    let val_report = match val_x {
        Some(val_x) => {
            let mut r = evaluate(&readout, val_x.view(), &val_labels, config.reservoir.seed)?;
            r.wall_clock_train_s = train_seconds;
            Some(r)
        }
        None => None,
    };
    let chosen_lambda = readout.lambda;
    Ok(TrainOutcome {
        model: TrainedModel {
            pipeline: config.clone(),
            input_dim: dataset.feature_dim,
            readout,
        },
        chosen_lambda,
        lambda_sweep: sweep,
        val_report,
        linear_solves,
        train_seconds,
        feature_seconds,
        fit_seconds,
    })
}

/// One training + test evaluation per seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub chosen_lambda: f64,
    pub test: EvalReport,
    pub train_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MultiSeedSummary {
    pub mean_accuracy: f64,
    /// Sample SD over seeds; 0 for a single seed.
    pub sd_accuracy: f64,
    pub runs: Vec<SeedRun>,
}

impl MultiSeedSummary {
    pub fn mean_train_seconds(&self) -> f64 {
        self.runs.iter().map(|r| r.train_seconds).sum::<f64>() / self.runs.len().max(1) as f64
    }
}

/// Trains with seeds `base, base + 1, ...` and evaluates each on the test
/// split. Only the reservoir (and its noise) changes between seeds.
pub fn multi_seed_run(
    dataset: &Dataset,
    config: &PipelineConfig,
    options: &TrainOptions,
    n_seeds: usize,
) -> Result<MultiSeedSummary> {
    if n_seeds == 0 {
        return Err(Error::config("seeds", "must be at least 1"));
    }
    if dataset.test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    let base = config.reservoir.seed;
    let mut runs = Vec::with_capacity(n_seeds);
    for i in 0..n_seeds as u64 {
        let seed = base.wrapping_add(i);
        let outcome = train(dataset, &config.with_seed(seed), options)?;
        let mut test = outcome.model.evaluate(&dataset.test)?;
        test.wall_clock_train_s = outcome.train_seconds;
        runs.push(SeedRun {
            seed,
            chosen_lambda: outcome.chosen_lambda,
            test,
            train_seconds: outcome.train_seconds,
        });
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.test.accuracy).collect();
    let (mean_accuracy, sd_accuracy) = mean_and_sd(&accs);
    Ok(MultiSeedSummary {
        mean_accuracy,
        sd_accuracy,
        runs,
    })
}

#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub method: String,
    pub direction: Direction,
    pub units_per_direction: usize,
    pub summary: MultiSeedSummary,
}

/// Bidirectional vs unidirectional at equal total state width.
#[derive(Debug, Clone)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

/// Runs the bi-ESN row then the uni-ESN row. `config.reservoir.n_units` is
/// the total width: `n/2 + n/2` for bi, `n` for uni.
pub fn benchmark(
    dataset: &Dataset,
    config: &PipelineConfig,
    options: &TrainOptions,
    n_seeds: usize,
) -> Result<BenchmarkTable> {
    let mut rows = Vec::with_capacity(2);
    for (method, direction) in [("bi-ESN", Direction::Bi), ("uni-ESN", Direction::Uni)] {
        let cfg = PipelineConfig {
            direction,
            ..config.clone()
        };
        let summary = multi_seed_run(dataset, &cfg, options, n_seeds)?;
        rows.push(BenchmarkRow {
            method: method.into(),
            direction,
            units_per_direction: cfg.units_per_direction(),
            summary,
        });
    }
    Ok(BenchmarkTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    fn tiny() -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n_classes: 4,
            prefix_motifs: 2,
            samples_per_class: 20,
            min_len: 20,
            max_len: 24,
            motif_length: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn widths_follow_direction() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(cfg.units_per_direction(), 100);
        assert_eq!(cfg.feature_width(), 200);
        cfg.direction = Direction::Uni;
        assert_eq!(cfg.units_per_direction(), 200);
        assert_eq!(cfg.feature_width(), 200);
        cfg.aggregation = AggregationMode::MeanPlusFinal;
        assert_eq!(cfg.feature_width(), 400);
    }

    #[test]
    fn odd_units_rejected_for_bi() {
        let mut cfg = PipelineConfig::default();
        cfg.reservoir.n_units = 201;
        assert!(cfg.validate().unwrap_err().to_string().contains("n_units"));
        cfg.direction = Direction::Uni;
        cfg.validate().unwrap();
    }

    #[test]
    fn train_and_evaluate_tiny() {
        let ds = tiny();
        let cfg = PipelineConfig {
            reservoir: ReservoirConfig {
                n_units: 40,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = train(&ds, &cfg, &TrainOptions::default()).unwrap();
        assert_eq!(out.linear_solves, 1);
        assert_eq!(out.model.readout.n_features(), 40);
        let report = out.model.evaluate(&ds.test).unwrap();
        assert_eq!(report.n_samples, ds.test.len());
        let preds = out.model.predict(&ds.test).unwrap();
        assert_eq!(preds.len(), ds.test.len());
    }

    #[test]
    fn lambda_sweep_records_choice() {
        let ds = tiny();
        let cfg = PipelineConfig {
            reservoir: ReservoirConfig {
                n_units: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let opts = TrainOptions {
            lambda_grid: Some(default_lambda_grid()),
            ..Default::default()
        };
        let out = train(&ds, &cfg, &opts).unwrap();
        assert_eq!(out.lambda_sweep.len(), 9);
        assert_eq!(out.linear_solves, 9);
        let best = out
            .lambda_sweep
            .iter()
            .map(|s| s.val_accuracy)
            .fold(f64::MIN, f64::max);
        let first_best = out.lambda_sweep.iter().find(|s| s.val_accuracy == best).unwrap();
        assert_eq!(out.chosen_lambda, first_best.lambda);
    }

    #[test]
    fn features_independent_of_thread_count() {
        let ds = tiny();
        let cfg = PipelineConfig {
            reservoir: ReservoirConfig {
                n_units: 30,
                noise_level: 1e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let p = FeaturePipeline::new(&cfg, ds.feature_dim).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| p.features(&ds.train, true).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn model_width_mismatch_detected() {
        let ds = tiny();
        let cfg = PipelineConfig {
            reservoir: ReservoirConfig {
                n_units: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut model = train(&ds, &cfg, &TrainOptions::default()).unwrap().model;
        model.pipeline.aggregation = AggregationMode::MeanPlusFinal;
        assert!(matches!(model.feature_pipeline(), Err(Error::ModelWidth { .. })));
    }
}
