//! Backward pass over the time-reversed input and per-sequence feature
//! aggregation.
//!
//! The backward trajectory is stored re-reversed, so row `t` of both
//! trajectories corresponds to input frame `t`. The backward reservoir's
//! final state (after it has consumed the whole reversed clip) therefore
//! sits at row 0.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{run_forward, ReservoirConfig, ReservoirWeights, StateSequence};
use crate::rng::SeededRng;

/// Reverses a `T x D` sequence along time.
pub fn reverse_sequence(sequence: ArrayView2<f64>) -> Result<Array2<f64>> {
    if sequence.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(sequence.slice(s![..;-1, ..]).to_owned())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiStates {
    pub forward: StateSequence,
    /// Aligned to original frame order.
    pub backward: StateSequence,
}

impl BiStates {
    pub fn n_units_each(&self) -> usize {
        self.forward.n_units()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// The backward trajectory in the order the backward reservoir visited it.
    pub fn backward_raw(&self) -> Array2<f64> {
        self.backward.states.slice(s![..;-1, ..]).to_owned()
    }
}

/// Seed for the backward reservoir when weights are not shared.
pub fn backward_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs `weights` forward over `sequence` and `backward_weights` (or
/// `weights` again when `None`) over its time reversal.
///
/// `noise` supplies one stream per direction when state noise is active.
pub fn run_bidirectional(
    weights: &ReservoirWeights,
    backward_weights: Option<&ReservoirWeights>,
    sequence: ArrayView2<f64>,
    config: &ReservoirConfig,
    noise: Option<(&mut SeededRng, &mut SeededRng)>,
) -> Result<BiStates> {
    let (fwd_rng, bwd_rng) = match noise {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let forward = run_forward(weights, sequence, config, fwd_rng)?;
    let reversed = reverse_sequence(sequence)?;
    let raw = run_forward(backward_weights.unwrap_or(weights), reversed.view(), config, bwd_rng)?;
    let backward = StateSequence {
        states: raw.states.slice(s![..;-1, ..]).to_owned(),
    };
    Ok(BiStates { forward, backward })
}

/// Time reduction applied to a state trajectory before the readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    #[default]
    Final,
    Mean,
    MeanPlusFinal,
}

impl AggregationMode {
    /// Features produced per direction for `n_units` reservoir units.
    pub fn width(self, n_units: usize) -> usize {
        match self {
            AggregationMode::Final | AggregationMode::Mean => n_units,
            AggregationMode::MeanPlusFinal => 2 * n_units,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            AggregationMode::Final => 0,
            AggregationMode::Mean => 1,
            AggregationMode::MeanPlusFinal => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AggregationMode::Final),
            1 => Some(AggregationMode::Mean),
            2 => Some(AggregationMode::MeanPlusFinal),
            _ => None,
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::Final => "final",
            AggregationMode::Mean => "mean",
            AggregationMode::MeanPlusFinal => "mean_plus_final",
        })
    }
}

impl FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "final" => Ok(AggregationMode::Final),
            "mean" => Ok(AggregationMode::Mean),
            "mean_plus_final" => Ok(AggregationMode::MeanPlusFinal),
            other => Err(format!(
                "unknown aggregation `{other}` (expected final, mean or mean_plus_final)"
            )),
        }
    }
}

/// Reduces one direction's trajectory. `states` is in visiting order, so
/// the last row is the final state and `washout` drops leading rows from
/// the mean (clamped so at least one row remains).
pub fn reduce_trajectory(
    states: ArrayView2<f64>,
    mode: AggregationMode,
    washout: usize,
) -> Array1<f64> {
    let t_len = states.nrows();
    let last = states.row(t_len - 1).to_owned();
    let mean = || {
        let skip = washout.min(t_len - 1);
        states
            .slice(s![skip.., ..])
            .mean_axis(Axis(0))
            .expect("non-empty trajectory")
    };
    match mode {
        AggregationMode::Final => last,
        AggregationMode::Mean => mean(),
        AggregationMode::MeanPlusFinal => concat(mean().view(), last.view()),
    }
}

fn concat(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    a.iter().chain(b.iter()).copied().collect()
}

/// Feature vector for one sample: forward block, then backward block.
pub fn aggregate(bi: &BiStates, mode: AggregationMode, washout: usize) -> Array1<f64> {
    let fwd = reduce_trajectory(bi.forward.states.view(), mode, washout);
    let raw = bi.backward.states.slice(s![..;-1, ..]);
    let bwd = reduce_trajectory(raw, mode, washout);
    concat(fwd.view(), bwd.view())
}
