//! Bidirectional echo state network classifier for keypoint sequences.
//!
//! A fixed random leaky-tanh reservoir is run over each clip forwards and
//! over its time reversal; the final states of both passes are
//! concatenated and a ridge-regression readout maps them to class scores.
//! The readout is the only trained component and is fitted in closed form.
//!
//! ```no_run
//! use biesn::dataset::{generate_synthetic, SyntheticSpec};
//! use biesn::pipeline::{train, PipelineConfig, TrainOptions};
//!
//! let data = generate_synthetic(&SyntheticSpec::default())?;
//! let outcome = train(&data, &PipelineConfig::default(), &TrainOptions::default())?;
//! let report = outcome.model.evaluate(&data.test)?;
//! println!("test accuracy {:.3}", report.accuracy);
//! # Ok::<(), biesn::Error>(())
//! ```

pub mod bidirectional;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod model_io;
pub mod pipeline;
pub mod readout;
pub mod reservoir;
pub mod rng;

pub use bidirectional::{aggregate, reverse_sequence, run_bidirectional, AggregationMode, BiStates};
pub use error::{Error, ErrorKind, Result};
pub use linalg::spectral_radius as estimate_spectral_radius;
pub use pipeline::{Direction, PipelineConfig, TrainOptions, TrainedModel};
pub use readout::{fit_ridge, EvalReport, ReadoutModel};
pub use reservoir::{run_forward, run_forward_from, step, ReservoirConfig, ReservoirWeights, StateSequence};
