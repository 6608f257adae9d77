//! Training and evaluation objectives: MSE empirical risk (training), Huber
//! loss and Huber empirical risk (evaluation), and a Monte-Carlo estimate of
//! the true risk under a data-generating process.
//!
//! The MSE risk carries no ½ factor, so the gradient-descent recursion picks
//! up explicit 2α/N factors.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng, Vector};
use crate::network::{Activation, Params};

use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// A regression sample (x_n, y_n)_{n=1..N} with x_n ∈ ℝ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Matrix,
    ys: Vector,
}

impl Dataset {
    pub fn new(xs: Matrix, ys: Vector) -> Result<Self> {
        if xs.rows() == 0 {
            return Err(Error::InvalidParameter("dataset needs N >= 1".into()));
        }
        if xs.rows() != ys.len() {
            return Err(Error::Dimension(format!(
                "dataset: {} inputs vs {} targets",
                xs.rows(),
                ys.len()
            )));
        }
        if !xs.all_finite() || !ys.all_finite() {
            return Err(Error::InvalidParameter("non-finite dataset entry".into()));
        }
        Ok(Dataset { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees N >= 1
    }

    pub fn input_dim(&self) -> usize {
        self.xs.cols()
    }

    pub fn x(&self, n: usize) -> &[f64] {
        self.xs.row(n)
    }

    pub fn y(&self, n: usize) -> f64 {
        self.ys[n]
    }

    pub fn targets(&self) -> &Vector {
        &self.ys
    }

    /// The first `n` samples as their own dataset (for nested sample-size
    /// comparisons).
    pub fn prefix(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidParameter(format!(
                "prefix needs 1 <= n <= {}, got {n}",
                self.len()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| self.x(i).to_vec()).collect();
        Dataset::new(
            Matrix::from_rows(&rows)?,
            Vector::from_vec(self.ys.0[..n].to_vec()),
        )
    }

    /// Per-dimension bounding box of the inputs.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let d = self.input_dim();
        let mut boxes = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for n in 0..self.len() {
            for (j, v) in self.x(n).iter().enumerate() {
                boxes[j].0 = boxes[j].0.min(*v);
                boxes[j].1 = boxes[j].1.max(*v);
            }
        }
        boxes
    }

    /// Write as CSV with header `x_0,...,x_{d-1},y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.input_dim()).map(|j| format!("x_{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for n in 0..self.len() {
            let mut record: Vec<String> = self.x(n).iter().map(|v| v.to_string()).collect();
            record.push(self.y(n).to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        if d == 0 || header.get(d) != Some("y") {
            return Err(Error::Config(
                "dataset CSV must have columns x_0,...,x_{d-1},y".into(),
            ));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for record in r.records() {
            let record = record?;
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                row.push(parse_f64(record.get(j), "x")?);
            }
            xs.push(row);
            ys.push(parse_f64(record.get(d), "y")?);
        }
        Dataset::new(Matrix::from_rows(&xs)?, Vector::from_vec(ys))
    }

    pub fn from_csv_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn parse_f64(field: Option<&str>, what: &str) -> Result<f64> {
    field
        .ok_or_else(|| Error::Config(format!("missing {what} field")))?
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Config(format!("bad {what} value: {e}")))
}

/// Evaluation-loss configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Huber threshold δ > 0.
    pub huber_delta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { huber_delta: 1.0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.huber_delta > 0.0 && self.huber_delta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter("huber_delta must be > 0".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// Losses and risks
// ---------------------------------------------------------------------------

/// Huber loss: ½r² for |r| ≤ δ, δ(|r| − δ/2) otherwise, with r = ŷ − y.
/// At δ = 1 the linear branch reduces to |r| − ½.
pub fn huber(yhat: f64, y: f64, delta: f64) -> f64 {
    let r = (yhat - y).abs();
    if r <= delta {
        0.5 * r * r
    } else {
        delta * (r - 0.5 * delta)
    }
}

/// MSE empirical risk (1/N) Σ (f(x_n) − y_n)², no ½ factor.
pub fn mse_risk(params: &Params, act: Activation, data: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for n in 0..data.len() {
        let r = params.forward(act, data.x(n))? - data.y(n);
        acc += r * r;
    }
    Ok(acc / data.len() as f64)
}

/// Huber empirical risk (1/N) Σ ℓ(f(x_n), y_n).
pub fn huber_risk(params: &Params, act: Activation, data: &Dataset, delta: f64) -> Result<f64> {
    let mut acc = 0.0;
    for n in 0..data.len() {
        acc += huber(params.forward(act, data.x(n))?, data.y(n), delta);
    }
    Ok(acc / data.len() as f64)
}

/// Monte-Carlo estimate of the true (Huber) risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Estimate E[ℓ(f(X), Y)] by averaging over `m_samples` fresh draws from the
/// sampler; the standard error of the mean is reported alongside.
pub fn true_risk_mc<F>(
    params: &Params,
    act: Activation,
    mut sampler: F,
    m_samples: usize,
    rng: &mut Rng,
    delta: f64,
) -> Result<McEstimate>
where
    F: FnMut(&mut Rng) -> (Vec<f64>, f64),
{
    if m_samples == 0 {
        return Err(Error::InvalidParameter("true_risk_mc needs m_samples >= 1".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..m_samples {
        let (x, y) = sampler(rng);
        let loss = huber(params.forward(act, &x)?, y, delta);
        sum += loss;
        sum_sq += loss * loss;
    }
    let m = m_samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    let std_error = if m_samples > 1 {
        (var / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error,
        samples: m_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Rng};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn zero_net(d: usize) -> Params {
        Params {
            w1: Matrix::zeros(2, d),
            b1: Vector::zeros(2),
            w2: Vector::zeros(2),
            b2: 0.0,
        }
    }

    fn dataset(xs: &[f64], ys: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            Vector::from_vec(ys.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn huber_branch_values() {
        assert_eq!(huber(0.0, 0.0, 1.0), 0.0);
        assert_relative_eq!(huber(0.5, 0.0, 1.0), 0.125, max_relative = 1e-15);
        assert_relative_eq!(huber(2.0, 0.0, 1.0), 1.5, max_relative = 1e-15);
    }

    #[test]
    fn huber_c1_at_threshold() {
        for delta in [0.5, 1.0, 2.5] {
            let at = huber(delta, 0.0, delta);
            assert_relative_eq!(at, 0.5 * delta * delta, max_relative = 1e-12);
            // One-sided difference quotients agree at |r| = δ with slope δ.
            let h = 1e-7;
            let left = (at - huber(delta - h, 0.0, delta)) / h;
            let right = (huber(delta + h, 0.0, delta) - at) / h;
            assert_relative_eq!(left, delta, max_relative = 1e-5);
            assert_relative_eq!(right, delta, max_relative = 1e-5);
        }
    }

    #[test]
    fn mse_risk_examples() {
        let net = zero_net(1);
        assert_eq!(
            mse_risk(&net, Activation::Swish, &dataset(&[1.0], &[1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            mse_risk(&net, Activation::Swish, &dataset(&[1.0, 1.0], &[1.0, 3.0])).unwrap(),
            5.0
        );
        // Perfect interpolation: constant network matching a constant target.
        let mut constant = zero_net(1);
        constant.b2 = 2.0;
        assert_eq!(
            mse_risk(&constant, Activation::Swish, &dataset(&[0.5, -1.0], &[2.0, 2.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn huber_risk_examples() {
        let net = zero_net(1);
        assert_relative_eq!(
            huber_risk(&net, Activation::Swish, &dataset(&[1.0], &[0.5]), 1.0).unwrap(),
            0.125,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            huber_risk(&net, Activation::Swish, &dataset(&[1.0], &[2.0]), 1.0).unwrap(),
            1.5,
            max_relative = 1e-15
        );
        let mut constant = zero_net(1);
        constant.b2 = 2.0;
        assert_eq!(
            huber_risk(&constant, Activation::Swish, &dataset(&[0.5], &[2.0]), 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn true_risk_mc_constants() {
        let net = zero_net(1);
        let mut rng = Rng::new(4);
        let zero = true_risk_mc(&net, Activation::Swish, |_| (vec![0.0], 0.0), 64, &mut rng, 1.0)
            .unwrap();
        assert_eq!(zero.mean, 0.0);

        let two = true_risk_mc(&net, Activation::Swish, |_| (vec![0.0], 2.0), 64, &mut rng, 1.0)
            .unwrap();
        assert_relative_eq!(two.mean, 1.5, max_relative = 1e-12);
        assert_eq!(two.std_error, 0.0);
    }

    #[test]
    fn true_risk_mc_two_point_target() {
        // Exact expectation by enumeration: (ℓ(0, 0.5) + ℓ(0, 2)) / 2 = 0.8125.
        let net = zero_net(1);
        let mut rng = Rng::new(11);
        let est = true_risk_mc(
            &net,
            Activation::Swish,
            |r| {
                let y = if r.uniform(0.0, 1.0) < 0.5 { 0.5 } else { 2.0 };
                (vec![0.0], y)
            },
            20_000,
            &mut rng,
            1.0,
        )
        .unwrap();
        assert!(
            (est.mean - 0.8125).abs() <= 3.0 * est.std_error,
            "MC mean {} ± {} missed 0.8125",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn csv_round_trip() {
        let data = dataset(&[0.25, -1.5, 3.0], &[1.0, 0.0, -2.25]);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,y\n"));
        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(data, back);
    }

    proptest! {
        #[test]
        fn huber_minorizes_half_square(a in -10.0f64..10.0, y in -10.0f64..10.0,
                                       delta in 0.05f64..5.0) {
            let h = huber(a, y, delta);
            let sq = 0.5 * (a - y) * (a - y);
            prop_assert!(h <= sq + 1e-12);
            prop_assert!(h >= 0.0);
        }

        #[test]
        fn huber_is_one_lipschitz_at_unit_delta(a in -10.0f64..10.0, b in -10.0f64..10.0,
                                                y in -10.0f64..10.0) {
            let diff = (huber(a, y, 1.0) - huber(b, y, 1.0)).abs();
            prop_assert!(diff <= (a - b).abs() + 1e-12);
        }

        #[test]
        fn huber_shares_minimizer_with_square(y in -5.0f64..5.0, delta in 0.1f64..3.0) {
            prop_assert_eq!(huber(y, y, delta), 0.0);
            prop_assert!(huber(y + 0.1, y, delta) > 0.0);
        }
    }
}
