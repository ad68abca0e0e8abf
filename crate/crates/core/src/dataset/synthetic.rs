//! Synthetic prefix/suffix gesture task.
//!
//! Each class is a pair (prefix motif, suffix motif). A sample is the
//! prefix motif, a random-walk filler of random length, then the suffix
//! motif, all with additive Gaussian noise. Telling classes apart needs
//! evidence from both ends of the clip, which a fading-memory reservoir
//! read out only at its final state cannot retain for the prefix.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, KeypointSequence};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    /// Number of distinct prefix motifs; `n_classes / prefix_motifs`
    /// suffix motifs are drawn.
    pub prefix_motifs: usize,
    pub samples_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub feature_dim: usize,
    pub motif_length: usize,
    pub noise_std: f64,
    /// Step size of the filler random walk.
    pub filler_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 9,
            prefix_motifs: 3,
            samples_per_class: 60,
            min_len: 40,
            max_len: 60,
            feature_dim: 8,
            motif_length: 10,
            noise_std: 0.05,
            filler_std: 0.3,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn suffix_motifs(&self) -> usize {
        self.n_classes / self.prefix_motifs.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config("n_classes", "must be at least 2"));
        }
        if self.prefix_motifs == 0 || !self.n_classes.is_multiple_of(self.prefix_motifs) {
            return Err(Error::config(
                "prefix_motifs",
                format!("must divide n_classes ({})", self.n_classes),
            ));
        }
        if self.samples_per_class < 2 {
            return Err(Error::config(
                "samples_per_class",
                "must be at least 2 so every class reaches train",
            ));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim", "must be at least 1"));
        }
        if self.motif_length == 0 {
            return Err(Error::config("motif_length", "must be at least 1"));
        }
        if self.max_len < self.min_len {
            return Err(Error::config("max_len", "must be >= min_len"));
        }
        if 2 * self.motif_length > self.min_len {
            return Err(Error::config(
                "motif_length",
                format!(
                    "2 * motif_length ({}) exceeds min_len ({})",
                    2 * self.motif_length,
                    self.min_len
                ),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std", "must be a finite value >= 0"));
        }
        if !(self.filler_std >= 0.0 && self.filler_std.is_finite()) {
            return Err(Error::config("filler_std", "must be a finite value >= 0"));
        }
        Ok(())
    }

    /// Train/val/test counts per class (70/15/15, remainder to test).
    pub fn split_counts(&self) -> (usize, usize, usize) {
        let n = self.samples_per_class;
        let train = n * 70 / 100;
        let val = n * 15 / 100;
        (train, val, n - train - val)
    }
}

/// A smooth pattern: one sinusoid per feature with random amplitude,
/// frequency and phase.
fn draw_motif(rng: &mut SeededRng, length: usize, dim: usize) -> Array2<f64> {
    let params: Vec<(f64, f64, f64)> = (0..dim)
        .map(|_| {
            let amp = rng.uniform(0.5, 1.0);
            let cycles = rng.uniform(0.5, 2.0);
            let phase = rng.uniform(0.0, std::f64::consts::TAU);
            (amp, cycles, phase)
        })
        .collect();
    Array2::from_shape_fn((length, dim), |(t, d)| {
        let (amp, cycles, phase) = params[d];
        amp * (std::f64::consts::TAU * cycles * t as f64 / length as f64 + phase).sin()
    })
}

/// Noise-free class prototypes `(prefix, suffix)`, as used by the generator.
pub fn class_motifs(spec: &SyntheticSpec) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let mut rng = SeededRng::with_stream(spec.seed, 0);
    let prefixes = (0..spec.prefix_motifs)
        .map(|_| draw_motif(&mut rng, spec.motif_length, spec.feature_dim))
        .collect();
    let suffixes = (0..spec.suffix_motifs())
        .map(|_| draw_motif(&mut rng, spec.motif_length, spec.feature_dim))
        .collect();
    (prefixes, suffixes)
}

/// Generates the dataset. Class `k` pairs prefix `k / n_suffix` with suffix
/// `k % n_suffix` and is labelled `p<i>s<j>`. Each sample draws from its
/// own stream, so the output depends only on the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let (prefixes, suffixes) = class_motifs(spec);
    let n_suffix = spec.suffix_motifs();
    let (n_train, n_val, _) = spec.split_counts();
    let m = spec.motif_length;
    let dim = spec.feature_dim;

    let classes: Vec<String> = (0..spec.n_classes)
        .map(|k| format!("p{}s{}", k / n_suffix, k % n_suffix))
        .collect();
    let mut dataset = Dataset {
        classes: classes.clone(),
        feature_dim: dim,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        skipped: Vec::new(),
    };

    for (k, label) in classes.iter().enumerate() {
        let prefix = &prefixes[k / n_suffix];
        let suffix = &suffixes[k % n_suffix];
        for j in 0..spec.samples_per_class {
            let stream = 1 + (k * spec.samples_per_class + j) as u64;
            let mut rng = SeededRng::with_stream(spec.seed, stream);
            let t_len = rng.range_inclusive(spec.min_len, spec.max_len);
            let mut frames = Array2::<f64>::zeros((t_len, dim));
            let mut walk = vec![0.0; dim];
            for t in 0..t_len {
                for d in 0..dim {
                    let clean = if t < m {
                        prefix[[t, d]]
                    } else if t >= t_len - m {
                        suffix[[t - (t_len - m), d]]
                    } else {
                        walk[d] += spec.filler_std * rng.normal();
                        walk[d]
                    };
                    let noise = if spec.noise_std > 0.0 {
                        spec.noise_std * rng.normal()
                    } else {
                        0.0
                    };
                    frames[[t, d]] = clean + noise;
                }
            }
            let sample = KeypointSequence {
                frames: frames.mapv(|v| v as f32),
                label: label.clone(),
                sample_id: format!("syn{k:03}_{j:04}"),
                fps_hint: None,
            };
            if j < n_train {
                dataset.train.push(sample);
            } else if j < n_train + n_val {
                dataset.val.push(sample);
            } else {
                dataset.test.push(sample);
            }
        }
    }
    Ok(dataset)
}
