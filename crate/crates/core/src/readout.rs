//! Ridge-regression readout: the only trained part of the model.
//!
//! Features are z-scored with training statistics, an all-ones intercept
//! column is appended, and one-hot targets are fitted in closed form:
//!
//! ```text
//! (X'X + lambda I') W' = X'Y
//! ```
//!
//! where `I'` is the identity with a zero in the intercept slot, so the
//! intercept is not shrunk.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Trained readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// `C x (F + 1)`; the last column is the intercept.
    pub w_out: Array2<f64>,
    pub classes: Vec<String>,
    pub feature_mean: Array1<f64>,
    pub feature_std: Array1<f64>,
    pub lambda: f64,
}

impl ReadoutModel {
    pub fn n_features(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Raw class scores, `N x C`.
    pub fn scores(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features() {
            return Err(Error::Dimension {
                context: "readout feature width",
                expected: self.n_features(),
                actual: features.ncols(),
            });
        }
        let f = self.n_features();
        let z = (&features - &self.feature_mean) / &self.feature_std;
        let weights = self.w_out.slice(s![.., ..f]);
        let intercept = self.w_out.column(f);
        Ok(z.dot(&weights.t()) + intercept)
    }

    /// Predicted class indices into [`ReadoutModel::classes`].
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        let scores = self.scores(features)?;
        Ok(scores.outer_iter().map(|row| argmax(row)).collect())
    }

    /// Prediction for a single feature vector: class index and scores.
    pub fn predict_one(&self, features: ArrayView1<f64>) -> Result<(usize, Array1<f64>)> {
        let scores = self.scores(features.insert_axis(Axis(0)))?;
        let row = scores.row(0).to_owned();
        Ok((argmax(row.view()), row))
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Solves `(X'X + lambda diag(penalize)) W = X'Y` for `W` (`F x C`).
pub fn ridge_solve(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    lambda: f64,
    penalize: &[bool],
) -> Result<Array2<f64>> {
    let mut gram = x.t().dot(&x);
    let xty = x.t().dot(&y);
    add_penalty(&mut gram, lambda, penalize);
    solve_spd(gram.view(), xty.view())
}

fn add_penalty(gram: &mut Array2<f64>, lambda: f64, penalize: &[bool]) {
    for (i, &p) in penalize.iter().enumerate() {
        if p {
            gram[[i, i]] += lambda;
        }
    }
}

/// Normalized design matrix products, reusable across several `lambda`s.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    classes: Vec<String>,
    mean: Array1<f64>,
    std: Array1<f64>,
    gram: Array2<f64>,
    xty: Array2<f64>,
}

impl RidgeProblem {
    /// `labels` index into `classes`.
    pub fn new(features: ArrayView2<f64>, labels: &[usize], classes: Vec<String>) -> Result<Self> {
        let (n, f) = features.dim();
        let c = classes.len();
        if c < 2 {
            return Err(Error::TooFewClasses(c));
        }
        if labels.len() != n {
            return Err(Error::Dimension {
                context: "label count",
                expected: n,
                actual: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("readout features"));
        }
        let mut counts = vec![0usize; c];
        for &l in labels {
            if l >= c {
                return Err(Error::UnknownLabel(l.to_string()));
            }
            counts[l] += 1;
        }
        if let Some(missing) = counts.iter().position(|&k| k == 0) {
            return Err(Error::MissingClass(classes[missing].clone()));
        }

        let mean = features.mean_axis(Axis(0)).expect("n >= c >= 2");
        let std = features
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });

        let mut design = Array2::<f64>::ones((n, f + 1));
        {
            let mut body = design.slice_mut(s![.., ..f]);
            body.assign(&((&features - &mean) / &std));
        }
        let mut targets = Array2::<f64>::zeros((n, c));
        for (row, &l) in labels.iter().enumerate() {
            targets[[row, l]] = 1.0;
        }
        let gram = design.t().dot(&design);
        let xty = design.t().dot(&targets);
        Ok(Self {
            classes,
            mean,
            std,
            gram,
            xty,
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<ReadoutModel> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config("lambda", "must be a finite value > 0"));
        }
        let f = self.mean.len();
        let mut penalize = vec![true; f + 1];
        penalize[f] = false;
        let mut gram = self.gram.clone();
        add_penalty(&mut gram, lambda, &penalize);
        let w = solve_spd(gram.view(), self.xty.view())?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization);
        }
        Ok(ReadoutModel {
            w_out: w.t().to_owned(),
            classes: self.classes.clone(),
            feature_mean: self.mean.clone(),
            feature_std: self.std.clone(),
            lambda,
        })
    }
}

/// Fits a readout with classes given explicitly; `labels` index into them.
pub fn fit_ridge_indexed(
    features: ArrayView2<f64>,
    labels: &[usize],
    classes: Vec<String>,
    lambda: f64,
) -> Result<ReadoutModel> {
    RidgeProblem::new(features, labels, classes)?.solve(lambda)
}

/// Fits a readout from string labels. Classes are the sorted distinct labels.
pub fn fit_ridge<S: AsRef<str>>(
    features: ArrayView2<f64>,
    labels: &[S],
    lambda: f64,
) -> Result<ReadoutModel> {
    let mut classes: Vec<String> = labels.iter().map(|l| l.as_ref().to_owned()).collect();
    classes.sort();
    classes.dedup();
    let idx: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search_by(|c| c.as_str().cmp(l.as_ref())).expect("present"))
        .collect();
    fit_ridge_indexed(features, &idx, classes, lambda)
}

/// Classification metrics over one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Only classes with at least one sample in the evaluated split.
    pub per_class_accuracy: BTreeMap<String, f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(skip)]
    pub wall_clock_train_s: f64,
    #[serde(skip)]
    pub wall_clock_eval_s: f64,
}

/// Scores `model` on `features` against class-index `labels`.
/// The eval clock covers prediction only.
pub fn evaluate(
    model: &ReadoutModel,
    features: ArrayView2<f64>,
    labels: &[usize],
    seed: u64,
) -> Result<EvalReport> {
    if labels.len() != features.nrows() {
        return Err(Error::Dimension {
            context: "label count",
            expected: features.nrows(),
            actual: labels.len(),
        });
    }
    let start = Instant::now();
    let predicted = model.predict(features)?;
    let wall_clock_eval_s = start.elapsed().as_secs_f64();
    let mut report = report_from_predictions(&model.classes, labels, &predicted)?;
    report.seed = seed;
    report.wall_clock_eval_s = wall_clock_eval_s;
    Ok(report)
}

pub fn report_from_predictions(
    classes: &[String],
    labels: &[usize],
    predicted: &[usize],
) -> Result<EvalReport> {
    let c = classes.len();
    let mut confusion = vec![vec![0u64; c]; c];
    for (&t, &p) in labels.iter().zip(predicted) {
        if t >= c {
            return Err(Error::UnknownLabel(t.to_string()));
        }
        confusion[t][p] += 1;
    }
    let n = labels.len();
    let correct: u64 = (0..c).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = classes
        .iter()
        .enumerate()
        .filter_map(|(i, name)| {
            let row: u64 = confusion[i].iter().sum();
            (row > 0).then(|| (name.clone(), confusion[i][i] as f64 / row as f64))
        })
        .collect();
    Ok(EvalReport {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        per_class_accuracy,
        confusion,
        n_samples: n,
        seed: 0,
        wall_clock_train_s: 0.0,
        wall_clock_eval_s: 0.0,
    })
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Accuracy fractions rendered as percentages, e.g. `57.71 ± 1.35`.
pub fn format_mean_sd(mean: f64, sd: f64) -> String {
    format!("{:.2} ± {:.2}", mean * 100.0, sd * 100.0)
}
