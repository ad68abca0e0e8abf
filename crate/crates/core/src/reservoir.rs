//! Fixed random reservoir and the forward leaky-integrator state update.
//!
//! ```text
//! x(t+1) = (1 - a) x(t) + a tanh(W_r x(t) + W_in u(t) + b)
//! ```
//!
//! `W_r`, `W_in` and `b` are drawn once from the config seed and never
//! trained.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::rng::SeededRng;

/// Reservoir hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    /// Units per reservoir (one direction).
    pub n_units: usize,
    pub spectral_radius: f64,
    /// Half-width of the uniform distribution for `W_in` entries.
    pub input_scaling: f64,
    pub leak_rate: f64,
    /// Fraction of nonzero `W_r` entries.
    pub density: f64,
    pub bias_scale: f64,
    /// Half-width of the uniform per-step state noise. Training only.
    pub noise_level: f64,
    /// Leading states excluded from time-averaged aggregation.
    pub washout: usize,
    pub seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            n_units: 100,
            spectral_radius: 0.9,
            input_scaling: 0.5,
            leak_rate: 0.3,
            density: 0.1,
            bias_scale: 0.0,
            noise_level: 0.0,
            washout: 0,
            seed: 42,
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(Error::config("n_units", "must be at least 1"));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return Err(Error::config("spectral_radius", "must be a finite value > 0"));
        }
        if !(self.input_scaling >= 0.0 && self.input_scaling.is_finite()) {
            return Err(Error::config("input_scaling", "must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.leak_rate) {
            return Err(Error::config("leak_rate", "must lie in [0, 1]"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::config("density", "must lie in (0, 1]"));
        }
        if !(self.bias_scale >= 0.0 && self.bias_scale.is_finite()) {
            return Err(Error::config("bias_scale", "must be a finite value >= 0"));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::config("noise_level", "must be a finite value >= 0"));
        }
        Ok(())
    }
}

/// The fixed reservoir matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirWeights {
    w_r: CsrMatrix,
    /// `n_units x input_dim`, row-major.
    w_in: Array2<f64>,
    bias: Array1<f64>,
    achieved_spectral_radius: f64,
}

impl ReservoirWeights {
    /// Draws weights from `config.seed`.
    ///
    /// Draw order: `W_r` sparsity mask (row-major, one draw per entry), `W_r`
    /// values for the kept positions (same order), `W_in` (row-major), `b`.
    /// `W_r` is then rescaled to `config.spectral_radius`.
    pub fn init(config: &ReservoirConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::config("input_dim", "must be at least 1"));
        }
        let n = config.n_units;
        let mut rng = SeededRng::new(config.seed);

        let mut positions = Vec::with_capacity((n as f64 * n as f64 * config.density) as usize + n);
        for r in 0..n {
            for c in 0..n {
                if rng.next_f64() < config.density {
                    positions.push((r, c));
                }
            }
        }
        let triplets: Vec<(usize, usize, f64)> = positions
            .into_iter()
            .map(|(r, c)| (r, c, rng.uniform(-1.0, 1.0)))
            .collect();
        let mut w_r = CsrMatrix::from_sorted_triplets(n, &triplets);

        let w_in = Array2::from_shape_fn((n, input_dim), |_| {
            rng.uniform(-config.input_scaling, config.input_scaling)
        });
        let bias = Array1::from_shape_fn(n, |_| rng.uniform(-config.bias_scale, config.bias_scale));

        let raw_radius = w_r.spectral_radius();
        if raw_radius == 0.0 {
            return Err(Error::DegenerateReservoir);
        }
        w_r.scale(config.spectral_radius / raw_radius);
        let achieved_spectral_radius = w_r.spectral_radius();

        Ok(Self {
            w_r,
            w_in,
            bias,
            achieved_spectral_radius,
        })
    }

    /// Assembles weights from explicit matrices (tests, hand-built reservoirs).
    pub fn from_parts(w_r: ArrayView2<f64>, w_in: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let n = w_r.nrows();
        if w_r.ncols() != n {
            return Err(Error::Dimension {
                context: "W_r columns",
                expected: n,
                actual: w_r.ncols(),
            });
        }
        if w_in.nrows() != n {
            return Err(Error::Dimension {
                context: "W_in rows",
                expected: n,
                actual: w_in.nrows(),
            });
        }
        if bias.len() != n {
            return Err(Error::Dimension {
                context: "bias length",
                expected: n,
                actual: bias.len(),
            });
        }
        let w_r = CsrMatrix::from_dense(w_r);
        let achieved_spectral_radius = w_r.spectral_radius();
        Ok(Self {
            w_r,
            w_in: w_in.as_standard_layout().into_owned(),
            bias,
            achieved_spectral_radius,
        })
    }

    pub fn n_units(&self) -> usize {
        self.bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn achieved_spectral_radius(&self) -> f64 {
        self.achieved_spectral_radius
    }

    pub fn recurrent(&self) -> &CsrMatrix {
        &self.w_r
    }

    pub fn input_weights(&self) -> &Array2<f64> {
        &self.w_in
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    /// Writes the leaky update for `state` and `input` into `out`.
    /// Callers have checked dimensions.
    #[inline]
    fn update_into(&self, state: &[f64], input: &[f64], leak_rate: f64, out: &mut [f64]) {
        let d = self.input_dim();
        let w_in = self.w_in.as_slice().expect("standard layout");
        for (i, o) in out.iter_mut().enumerate() {
            let row = &w_in[i * d..(i + 1) * d];
            *o = self.bias[i] + row.iter().zip(input).map(|(w, u)| w * u).sum::<f64>();
        }
        self.w_r.mul_add(state, out);
        for (o, &s) in out.iter_mut().zip(state) {
            *o = (1.0 - leak_rate) * s + leak_rate * o.tanh();
        }
    }
}

/// States visited while consuming a sequence: row `t` is the state after
/// input frame `t`. The zero initial state is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    pub states: Array2<f64>,
}

impl StateSequence {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn n_units(&self) -> usize {
        self.states.ncols()
    }

    pub fn last(&self) -> ndarray::ArrayView1<'_, f64> {
        self.states.row(self.states.nrows() - 1)
    }
}

/// One application of the leaky update. When `noise > 0`, a
/// uniform(-noise, noise) perturbation drawn from `rng` is added per unit.
pub fn step(
    weights: &ReservoirWeights,
    state: &[f64],
    input: &[f64],
    leak_rate: f64,
    noise: f64,
    rng: Option<&mut SeededRng>,
) -> Result<Vec<f64>> {
    check_dims(weights, state.len(), input.len())?;
    let mut out = vec![0.0; weights.n_units()];
    weights.update_into(state, input, leak_rate, &mut out);
    if noise > 0.0 {
        if let Some(rng) = rng {
            out.iter_mut().for_each(|v| *v += rng.uniform(-noise, noise));
        }
    }
    Ok(out)
}

fn check_dims(weights: &ReservoirWeights, state_len: usize, input_len: usize) -> Result<()> {
    if state_len != weights.n_units() {
        return Err(Error::Dimension {
            context: "reservoir state",
            expected: weights.n_units(),
            actual: state_len,
        });
    }
    if input_len != weights.input_dim() {
        return Err(Error::Dimension {
            context: "input frame",
            expected: weights.input_dim(),
            actual: input_len,
        });
    }
    Ok(())
}

/// Runs the reservoir over `sequence` (`T x D`) from the zero state.
///
/// Noise is applied only when `noise_rng` is given and
/// `config.noise_level > 0`.
pub fn run_forward(
    weights: &ReservoirWeights,
    sequence: ArrayView2<f64>,
    config: &ReservoirConfig,
    noise_rng: Option<&mut SeededRng>,
) -> Result<StateSequence> {
    let zero = vec![0.0; weights.n_units()];
    run_forward_from(weights, sequence, config, &zero, noise_rng)
}

/// As [`run_forward`] but starting from an arbitrary initial state.
pub fn run_forward_from(
    weights: &ReservoirWeights,
    sequence: ArrayView2<f64>,
    config: &ReservoirConfig,
    initial_state: &[f64],
    mut noise_rng: Option<&mut SeededRng>,
) -> Result<StateSequence> {
    let t_len = sequence.nrows();
    if t_len == 0 {
        return Err(Error::EmptySequence);
    }
    check_dims(weights, initial_state.len(), sequence.ncols())?;
    if initial_state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let n = weights.n_units();
    let noise = config.noise_level;
    let mut states = Array2::<f64>::zeros((t_len, n));
    let mut prev = initial_state.to_vec();
    let mut frame = vec![0.0; sequence.ncols()];
    for (t, row) in sequence.outer_iter().enumerate() {
        frame.iter_mut().zip(row.iter()).for_each(|(f, &v)| *f = v);
        let out = states
            .row_mut(t)
            .into_slice()
            .expect("row of a standard-layout array is contiguous");
        weights.update_into(&prev, &frame, config.leak_rate, out);
        if noise > 0.0 {
            if let Some(rng) = noise_rng.as_deref_mut() {
                out.iter_mut().for_each(|v| *v += rng.uniform(-noise, noise));
            }
        }
        prev.copy_from_slice(out);
    }
    Ok(StateSequence { states })
}
