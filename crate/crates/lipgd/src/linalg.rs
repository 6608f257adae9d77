//! Dense row-major matrices, vectors, seeded sampling, and spectral-norm
//! estimation. Deliberately minimal: everything the trainer and the bound
//! evaluators need at widths up to ~10³, nothing more.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative-change tolerance for the power iteration.
const POWER_ITER_RTOL: f64 = 1e-10;
/// Iteration budget before falling back to the dense Gram eigen solve.
const POWER_ITER_MAX: usize = 10_000;

// ---------------------------------------------------------------------------
// Vector
// ---------------------------------------------------------------------------

/// Dense vector of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Euclidean norm √(Σ vᵢ²).
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry (0 for the empty vector).
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "dot: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Euclidean norm of a raw slice.
pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Outcome of a spectral-norm computation.
#[derive(Debug, Clone, Copy)]
pub struct OpNorm {
    pub value: f64,
    pub iterations: usize,
    /// True when the power iteration did not converge and the dense
    /// Gram-matrix eigen solve produced the result instead.
    pub used_fallback: bool,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `out = self * x`; `out` must have `rows` entries.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matvec(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matvec: matrix has {} cols, vector has {}",
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x.as_slice(), &mut out);
        Ok(Vector(out))
    }

    /// `out = selfᵀ * x`; `out` must have `cols` entries.
    pub fn transpose_matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for i in 0..self.rows {
            let xi = x[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += xi * a;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest singular value (spectral norm).
    ///
    /// Power iteration on the implicit Gram matrix MᵀM from the normalized
    /// all-ones start vector, stopping on relative change below 1e-10. If the
    /// iteration stalls or fails to converge within the budget, the result
    /// comes from an exact dense Gram eigen solve instead (see
    /// [`Matrix::operator_norm_report`] for the fallback flag).
    pub fn operator_norm(&self) -> Result<f64> {
        self.operator_norm_report().map(|r| r.value)
    }

    /// As [`Matrix::operator_norm`], also reporting iteration count and
    /// whether the dense fallback was used.
    pub fn operator_norm_report(&self) -> Result<OpNorm> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let fro = self.frobenius_norm();
        if fro == 0.0 {
            return Ok(OpNorm {
                value: 0.0,
                iterations: 0,
                used_fallback: false,
            });
        }

        let mut v = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut mv = vec![0.0; self.rows];
        let mut gram_v = vec![0.0; self.cols];
        let mut sigma_prev = f64::NAN;

        for iter in 1..=POWER_ITER_MAX {
            self.matvec_into(&v, &mut mv);
            let sigma = euclidean_norm(&mv);
            self.transpose_matvec_into(&mv, &mut gram_v);
            let gram_norm = euclidean_norm(&gram_v);

            if gram_norm <= f64::MIN_POSITIVE * fro {
                // Start vector landed (numerically) in the null space; the
                // iteration cannot recover, so solve the Gram problem exactly.
                break;
            }
            if sigma_prev.is_finite() && (sigma - sigma_prev).abs() <= POWER_ITER_RTOL * sigma {
                return Ok(OpNorm {
                    value: sigma,
                    iterations: iter,
                    used_fallback: false,
                });
            }
            sigma_prev = sigma;
            for (vi, gi) in v.iter_mut().zip(gram_v.iter()) {
                *vi = gi / gram_norm;
            }
        }

        Ok(OpNorm {
            value: self.gram_eigen_norm(),
            iterations: POWER_ITER_MAX,
            used_fallback: true,
        })
    }

    /// Exact spectral norm via a cyclic-Jacobi eigen solve of the smaller of
    /// MᵀM and MMᵀ.
    fn gram_eigen_norm(&self) -> f64 {
        let k = self.rows.min(self.cols);
        let mut gram = vec![0.0; k * k];
        if self.cols <= self.rows {
            // MᵀM
            for a in 0..k {
                for b in a..k {
                    let mut s = 0.0;
                    for i in 0..self.rows {
                        s += self.get(i, a) * self.get(i, b);
                    }
                    gram[a * k + b] = s;
                    gram[b * k + a] = s;
                }
            }
        } else {
            // MMᵀ
            for a in 0..k {
                for b in a..k {
                    let s = self
                        .row(a)
                        .iter()
                        .zip(self.row(b).iter())
                        .map(|(x, y)| x * y)
                        .sum();
                    gram[a * k + b] = s;
                    gram[b * k + a] = s;
                }
            }
        }
        let lambda_max = symmetric_max_eigenvalue(&mut gram, k);
        lambda_max.max(0.0).sqrt()
    }
}

/// Largest eigenvalue of a dense symmetric matrix by cyclic Jacobi rotations.
/// `a` is row-major `n`×`n` and is destroyed.
pub fn symmetric_max_eigenvalue(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    if n == 1 {
        return a[0];
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).fold(f64::NEG_INFINITY, f64::max)
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

/// Stream tags so that independent concerns draw from disjoint substreams of
/// the same seed.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const DATA: u64 = 2;
    pub const LIP_POINTS: u64 = 3;
    pub const PROBE: u64 = 4;
    pub const MC: u64 = 5;
}

/// Seeded, counter-based generator. Identical (seed, stream) pairs yield
/// identical draws on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// One standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// One uniform draw from [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        if lo == hi {
            return lo;
        }
        self.inner.random_range(lo..hi)
    }
}

/// splitmix64-style mixing for deriving per-cell seeds from a base seed.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix with i.i.d. standard normal entries, reproducible under a fixed
/// generator state.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Vector with i.i.d. standard normal entries.
pub fn gaussian_vector(len: usize, rng: &mut Rng) -> Vector {
    Vector((0..len).map(|_| rng.standard_normal()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use crate::linalg::Rng;

    #[test]
    fn euclidean_norm_basics() {
        assert_eq!(Vector::from_vec(vec![0.0, 0.0, 0.0]).norm(), 0.0);
        assert_eq!(Vector::from_vec(vec![3.0, 4.0]).norm(), 5.0);
        assert_eq!(Vector::from_vec(vec![1.0, 1.0, 1.0, 1.0]).norm(), 2.0);
    }

    #[test]
    fn operator_norm_identity() {
        let m = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_relative_eq!(m.operator_norm().unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn operator_norm_diagonal() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_relative_eq!(m.operator_norm().unwrap(), 4.0, max_relative = 1e-10);
    }

    #[test]
    fn operator_norm_shear_matches_quadratic_oracle() {
        // Oracle: for M = [[1,1],[0,1]], MᵀM = [[1,1],[1,2]] has eigenvalues
        // (3 ± √5)/2 by the quadratic formula, so σ_max = √((3+√5)/2) = (1+√5)/2.
        let expected = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(m.operator_norm().unwrap(), expected, max_relative = 1e-9);
    }

    #[test]
    fn operator_norm_empty_errors() {
        let m = Matrix::zeros(0, 3);
        assert!(matches!(m.operator_norm(), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn operator_norm_null_space_start_recovers() {
        // The normalized all-ones start vector is in the null space here; the
        // Gram fallback must still find σ = √2.
        let m = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let r = m.operator_norm_report().unwrap();
        assert!(r.used_fallback);
        assert_relative_eq!(r.value, 2.0_f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn gram_eigen_norm_agrees_on_rectangular() {
        let mut rng = Rng::new(11);
        for &(r, c) in &[(4usize, 2usize), (2, 4), (5, 5), (1, 3), (3, 1)] {
            let m = gaussian_matrix(r, c, &mut rng).unwrap();
            let power = m.operator_norm().unwrap();
            let exact = m.gram_eigen_norm();
            assert_relative_eq!(power, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn gaussian_matrix_deterministic() {
        let a = gaussian_matrix(2, 2, &mut Rng::new(7)).unwrap();
        let b = gaussian_matrix(2, 2, &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_matrix_streams_differ() {
        let a = gaussian_matrix(2, 2, &mut Rng::with_stream(7, 1)).unwrap();
        let b = gaussian_matrix(2, 2, &mut Rng::with_stream(7, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn gaussian_sample_mean_clt() {
        let m = gaussian_matrix(1000, 1, &mut Rng::new(1)).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.1, "sample mean {mean} outside CLT band");
    }

    #[test]
    fn gaussian_sample_covariance_near_identity() {
        let m = gaussian_matrix(1000, 2, &mut Rng::new(1)).unwrap();
        let n = 1000.0;
        let mean0 = (0..1000).map(|i| m.get(i, 0)).sum::<f64>() / n;
        let mean1 = (0..1000).map(|i| m.get(i, 1)).sum::<f64>() / n;
        let mut cov = [[0.0_f64; 2]; 2];
        for i in 0..1000 {
            let d0 = m.get(i, 0) - mean0;
            let d1 = m.get(i, 1) - mean1;
            cov[0][0] += d0 * d0;
            cov[0][1] += d0 * d1;
            cov[1][0] += d1 * d0;
            cov[1][1] += d1 * d1;
        }
        for (a, row) in cov.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (v / n - target).abs() < 0.15,
                    "cov[{a}][{b}] = {} too far from identity",
                    v / n
                );
            }
        }
    }

    proptest! {
        #[test]
        fn op_norm_dominates_rayleigh_quotient(
            rows in 1usize..6, cols in 1usize..6, seed in 0u64..500,
        ) {
            let mut rng = Rng::new(seed);
            let m = gaussian_matrix(rows, cols, &mut rng).unwrap();
            let v = gaussian_vector(cols, &mut rng);
            let vn = v.norm();
            prop_assume!(vn > 1e-9);
            let mv = m.matvec(&v).unwrap();
            let quotient = mv.norm() / vn;
            let op = m.operator_norm().unwrap();
            prop_assert!(op >= quotient * (1.0 - 1e-9),
                "op {} < quotient {}", op, quotient);
        }

        #[test]
        fn op_norm_frobenius_sandwich(
            rows in 1usize..7, cols in 1usize..7, seed in 0u64..500,
        ) {
            let mut rng = Rng::new(seed);
            let m = gaussian_matrix(rows, cols, &mut rng).unwrap();
            let op = m.operator_norm().unwrap();
            let fro = m.frobenius_norm();
            let k = rows.min(cols) as f64;
            prop_assert!(fro >= op * (1.0 - 1e-9));
            prop_assert!(op >= fro / k.sqrt() * (1.0 - 1e-9));
        }
    }
}
