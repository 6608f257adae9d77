//! Toy-regression data generation: Y = f(X) + βε with X, ε standard normal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::expr::Expr;
use crate::linalg::{Matrix, Rng, Vector};
use crate::losses::Dataset;

/// The regression targets used by the toy experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetFunction {
    /// f(x) = x³ + √|x|.
    CubicSqrt,
    /// f(x) = sin x.
    Sine,
    /// f(x) = 1/x on ℝ∖{0}; sampling resamples |x| < 1e-3.
    Reciprocal,
    /// Arbitrary single-variable expression, e.g. `"x^2 - cos(3*x)"`.
    Custom { expr: String },
}

/// A compiled target ready for repeated evaluation.
#[derive(Debug, Clone)]
pub enum CompiledTarget {
    CubicSqrt,
    Sine,
    Reciprocal,
    Custom(Expr),
}

impl TargetFunction {
    pub fn compile(&self) -> Result<CompiledTarget> {
        Ok(match self {
            TargetFunction::CubicSqrt => CompiledTarget::CubicSqrt,
            TargetFunction::Sine => CompiledTarget::Sine,
            TargetFunction::Reciprocal => CompiledTarget::Reciprocal,
            TargetFunction::Custom { expr } => CompiledTarget::Custom(Expr::parse(expr)?),
        })
    }
}

impl CompiledTarget {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CompiledTarget::CubicSqrt => x.powi(3) + x.abs().sqrt(),
            CompiledTarget::Sine => x.sin(),
            CompiledTarget::Reciprocal => 1.0 / x,
            CompiledTarget::Custom(expr) => expr.eval(x),
        }
    }

    /// Whether a sampled input must be rejected for this target.
    fn rejects(&self, x: f64) -> bool {
        matches!(self, CompiledTarget::Reciprocal) && x.abs() < 1e-3
    }
}

/// Additive-noise level β in Y = f(X) + βε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub beta: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if self.beta >= 0.0 && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "noise beta must be finite and >= 0, got {}",
                self.beta
            )))
        }
    }
}

/// Draw one admissible input: standard normal, with target-specific rejection
/// and optional truncation to [−x_max, x_max] (for compact-support settings).
fn sample_x(target: &CompiledTarget, x_max: Option<f64>, rng: &mut Rng) -> f64 {
    loop {
        let x = rng.standard_normal();
        if target.rejects(x) {
            continue;
        }
        if let Some(bound) = x_max {
            if x.abs() > bound {
                continue;
            }
        }
        return x;
    }
}

/// Generate N i.i.d. samples (X, f(X) + βε), univariate inputs.
pub fn generate_dataset(
    target: &TargetFunction,
    noise: NoiseModel,
    n: usize,
    rng: &mut Rng,
    x_max: Option<f64>,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be >= 1".into()));
    }
    noise.validate()?;
    if let Some(bound) = x_max {
        if !(bound > 0.0) {
            return Err(Error::InvalidParameter("x_max must be > 0".into()));
        }
    }
    let compiled = target.compile()?;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sample_x(&compiled, x_max, rng);
        let eps = rng.standard_normal();
        xs.push(vec![x]);
        ys.push(compiled.eval(x) + noise.beta * eps);
    }
    Dataset::new(Matrix::from_rows(&xs)?, Vector::from_vec(ys))
}

/// A sampler closure for Monte-Carlo true-risk estimation, drawing from the
/// same process as [`generate_dataset`].
pub fn mc_sampler(
    target: &TargetFunction,
    noise: NoiseModel,
    x_max: Option<f64>,
) -> Result<impl FnMut(&mut Rng) -> (Vec<f64>, f64)> {
    let compiled = target.compile()?;
    Ok(move |rng: &mut Rng| {
        let x = sample_x(&compiled, x_max, rng);
        let eps = rng.standard_normal();
        (vec![x], compiled.eval(x) + noise.beta * eps)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_sine_is_exact() {
        let mut rng = Rng::new(3);
        let data = generate_dataset(
            &TargetFunction::Sine,
            NoiseModel { beta: 0.0 },
            3,
            &mut rng,
            None,
        )
        .unwrap();
        for n in 0..3 {
            assert_eq!(data.y(n), data.x(n)[0].sin());
        }
    }

    #[test]
    fn fixed_seed_reproduces() {
        let mk = || {
            generate_dataset(
                &TargetFunction::CubicSqrt,
                NoiseModel { beta: 0.5 },
                16,
                &mut Rng::new(9),
                None,
            )
            .unwrap()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn noise_variance_moment_match() {
        let mut rng = Rng::new(14);
        let data = generate_dataset(
            &TargetFunction::Sine,
            NoiseModel { beta: 1.0 },
            10_000,
            &mut rng,
            None,
        )
        .unwrap();
        let residuals: Vec<f64> = (0..data.len())
            .map(|n| data.y(n) - data.x(n)[0].sin())
            .collect();
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / residuals.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "residual variance {var} off by > 10%");
    }

    #[test]
    fn reciprocal_resamples_near_zero() {
        let mut rng = Rng::new(21);
        let data = generate_dataset(
            &TargetFunction::Reciprocal,
            NoiseModel { beta: 0.0 },
            5_000,
            &mut rng,
            None,
        )
        .unwrap();
        for n in 0..data.len() {
            assert!(data.x(n)[0].abs() >= 1e-3);
        }
    }

    #[test]
    fn truncation_bounds_inputs() {
        let mut rng = Rng::new(5);
        let data = generate_dataset(
            &TargetFunction::CubicSqrt,
            NoiseModel { beta: 0.0 },
            2_000,
            &mut rng,
            Some(1.5),
        )
        .unwrap();
        for n in 0..data.len() {
            assert!(data.x(n)[0].abs() <= 1.5);
        }
    }

    #[test]
    fn custom_expression_target() {
        let target = TargetFunction::Custom { expr: "x^2".into() };
        let mut rng = Rng::new(2);
        let data = generate_dataset(&target, NoiseModel { beta: 0.0 }, 8, &mut rng, None).unwrap();
        for n in 0..data.len() {
            let x = data.x(n)[0];
            assert_eq!(data.y(n), x * x);
        }
    }
}
