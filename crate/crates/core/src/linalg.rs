//! Small dense/sparse linear algebra used by the reservoir and the readout.

use nalgebra::{Complex, DMatrix, DVector};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Iteration cap for [`spectral_radius`].
pub const POWER_MAX_ITER: usize = 1000;
/// Relative residual at which the dominant Ritz pair is accepted.
pub const POWER_REL_TOL: f64 = 1e-6;
const POWER_BLOCK: usize = 12;
const POWER_START_SEED: u64 = 0x005e_ed0f_5eed;

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets already sorted by row then column.
    pub fn from_sorted_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(dense: ArrayView2<f64>) -> Self {
        let n = dense.nrows();
        assert_eq!(n, dense.ncols(), "CsrMatrix must be square");
        let mut triplets = Vec::new();
        for ((r, c), &v) in dense.indexed_iter() {
            if v != 0.0 {
                triplets.push((r, c, v));
            }
        }
        Self::from_sorted_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `out[i] += sum_j self[i, j] * x[j]`.
    #[inline]
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o += acc;
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[[i, self.col_idx[k]]] = self.values[k];
            }
        }
        out
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius_of(self.n, |x, y| {
            y.fill(0.0);
            self.mul_add(x, y);
        })
    }
}

/// Largest absolute eigenvalue of a dense square matrix.
///
/// Block power iteration (12 vectors) with a Rayleigh-Ritz projection each
/// step, so complex-conjugate dominant pairs converge as well as real ones.
/// Stops when the dominant Ritz pair's residual falls below 1e-6 relative,
/// or after 1000 iterations. The zero matrix gives 0.
pub fn spectral_radius(matrix: ArrayView2<f64>) -> Result<f64> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Dimension {
            context: "spectral_radius (square matrix)",
            expected: n,
            actual: matrix.ncols(),
        });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral_radius input"));
    }
    Ok(spectral_radius_of(n, |x, y| {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = matrix.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }))
}

fn spectral_radius_of(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = n.min(POWER_BLOCK);
    let mut rng = SeededRng::new(POWER_START_SEED);
    let start: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let mut basis = orthonormalize(start);
    let mut estimate = 0.0;

    for _ in 0..POWER_MAX_ITER {
        if basis.is_empty() {
            return 0.0;
        }
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|q| {
                let mut z = vec![0.0; n];
                apply(q, &mut z);
                z
            })
            .collect();
        if images.iter().all(|z| z.iter().all(|&v| v == 0.0)) {
            return 0.0;
        }

        let k = basis.len();
        let mut projected = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                projected[(i, j)] = dot(&basis[i], &images[j]);
            }
        }
        let (lambda, coeffs) = dominant_eigenpair(&projected);
        estimate = lambda.norm();

        if estimate > 0.0 {
            // r = A Q y - lambda Q y
            let mut res_sq = 0.0;
            let mut y_sq = 0.0;
            for c in coeffs.iter() {
                y_sq += c.norm_sqr();
            }
            for row in 0..n {
                let mut r = Complex::new(0.0, 0.0);
                for (j, c) in coeffs.iter().enumerate() {
                    r += *c * (images[j][row] - lambda * basis[j][row]);
                }
                res_sq += r.norm_sqr();
            }
            if res_sq.sqrt() <= POWER_REL_TOL * estimate * y_sq.sqrt() {
                return estimate;
            }
        }
        basis = orthonormalize(images);
    }
    estimate
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt with one re-orthogonalization pass; columns that
/// collapse to (numerically) zero are dropped.
fn orthonormalize(mut cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let scale = cols
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols.drain(..) {
        for _ in 0..2 {
            for q in &out {
                let proj = dot(q, &c);
                c.iter_mut().zip(q).for_each(|(ci, qi)| *ci -= proj * qi);
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm > 1e-12 * scale {
            c.iter_mut().for_each(|v| *v /= norm);
            out.push(c);
        }
    }
    out
}

/// Max-modulus eigenvalue of a small real matrix and a matching eigenvector
/// (complex in general), the latter by two steps of inverse iteration.
fn dominant_eigenpair(h: &DMatrix<f64>) -> (Complex<f64>, DVector<Complex<f64>>) {
    let k = h.nrows();
    let eigs = h.complex_eigenvalues();
    let lambda = eigs
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex::new(0.0, 0.0));

    let hc: DMatrix<Complex<f64>> = h.map(|v| Complex::new(v, 0.0));
    let shift = lambda + Complex::new(1e-10 * lambda.norm().max(1e-300), 0.0);
    let shifted = &hc - DMatrix::<Complex<f64>>::identity(k, k) * shift;
    let lu = shifted.lu();
    let mut y = DVector::<Complex<f64>>::from_element(k, Complex::new(1.0, 0.0));
    for _ in 0..2 {
        match lu.solve(&y) {
            Some(next) => {
                let norm = next.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    break;
                }
                y = next.map(|c| c / norm);
            }
            None => break,
        }
    }
    (lambda, y)
}

/// Solves `a * x = b` for symmetric positive-definite `a` by Cholesky.
///
/// If the first factorization fails, 1e-8 is added to the diagonal and the
/// factorization retried once before giving up.
pub fn solve_spd(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            context: "solve_spd (square system)",
            expected: n,
            actual: a.ncols(),
        });
    }
    if b.nrows() != n {
        return Err(Error::Dimension {
            context: "solve_spd (right-hand side rows)",
            expected: n,
            actual: b.nrows(),
        });
    }
    let factor = match cholesky(a, 0.0) {
        Some(l) => l,
        None => cholesky(a, 1e-8).ok_or(Error::Factorization)?,
    };

    let m = b.ncols();
    let mut x = b.to_owned();
    for col in 0..m {
        // L z = b
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s -= factor[i * n + k] * x[[k, col]];
            }
            x[[i, col]] = s / factor[i * n + i];
        }
        // L^T x = z
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in i + 1..n {
                s -= factor[k * n + i] * x[[k, col]];
            }
            x[[i, col]] = s / factor[i * n + i];
        }
    }
    Ok(x)
}

/// Lower-triangular factor, row-major; `None` if not positive definite.
fn cholesky(a: ArrayView2<f64>, jitter: f64) -> Option<Vec<f64>> {
    let n = a.nrows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !s.is_finite() || s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_radius() {
        let m = array![[0.5, 0.0], [0.0, -0.8]];
        let r = spectral_radius(m.view()).unwrap();
        assert!((r - 0.8).abs() < 1e-9, "{r}");
    }

    #[test]
    fn zero_matrix_radius() {
        let m = Array2::<f64>::zeros((3, 3));
        assert_eq!(spectral_radius(m.view()).unwrap(), 0.0);
    }

    #[test]
    fn nilpotent_radius_is_zero() {
        let m = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        assert_eq!(spectral_radius(m.view()).unwrap(), 0.0);
    }

    #[test]
    fn rotation_radius() {
        // Eigenvalues 0.7 * e^{+-i pi/3}: a pure complex pair.
        let c = 0.7 * (std::f64::consts::PI / 3.0).cos();
        let s = 0.7 * (std::f64::consts::PI / 3.0).sin();
        let m = array![[c, -s], [s, c]];
        let r = spectral_radius(m.view()).unwrap();
        assert!((r - 0.7).abs() < 1e-9, "{r}");
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        let m = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            spectral_radius(m.view()),
            Err(Error::Dimension { .. })
        ));
        let m = array![[1.0, f64::NAN], [0.0, 1.0]];
        assert!(matches!(spectral_radius(m.view()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn csr_matches_dense() {
        let d = array![[0.0, 2.0, 0.0], [1.0, 0.0, -1.0], [0.0, 0.0, 3.0]];
        let s = CsrMatrix::from_dense(d.view());
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.to_dense(), d);
        let mut y = vec![1.0; 3];
        s.mul_add(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![5.0, -1.0, 10.0]);
    }

    #[test]
    fn spd_solve() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![[2.0], [1.0]];
        let x = solve_spd(a.view(), b.view()).unwrap();
        assert!((x[[0, 0]] - 0.5).abs() < 1e-14);
        assert!(x[[1, 0]].abs() < 1e-14);
    }

    #[test]
    fn indefinite_system_fails() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        let b = array![[1.0], [1.0]];
        assert!(matches!(
            solve_spd(a.view(), b.view()),
            Err(Error::Factorization)
        ));
    }

    #[test]
    fn singular_psd_recovers_with_jitter() {
        let a = array![[1.0, 0.0], [0.0, 0.0]];
        let b = array![[1.0], [0.0]];
        let x = solve_spd(a.view(), b.view()).unwrap();
        assert!((x[[0, 0]] - 1.0).abs() < 1e-6);
    }
}
