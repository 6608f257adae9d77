//! Two-layer MLP realization, activations with derivatives, initialization,
//! and both Lipschitz measures.
//!
//! A parameter quadruple realizes the scalar-output network
//!
//! ```text
//! f(x) = w2ᵀ σ∙(w1 x + b1) + b2
//! ```
//!
//! with hidden weights `w1 ∈ ℝ^{p×d}`, hidden bias `b1 ∈ ℝ^p`, output weights
//! `w2 ∈ ℝ^p`, and output bias `b2 ∈ ℝ`, where the activation σ acts
//! componentwise. (In the bound formulas and CSV logs these blocks go by the
//! letters W, b, B, c respectively.)

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, gaussian_vector, Matrix, Rng, Vector};

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

/// Input dimension and hidden width of a two-layer network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    /// Input dimension d.
    pub d: usize,
    /// Hidden width p.
    pub p: usize,
}

impl NetworkShape {
    pub fn new(d: usize, p: usize) -> Result<Self> {
        if d == 0 || p == 0 {
            return Err(Error::InvalidParameter(
                "network shape needs d >= 1 and p >= 1".into(),
            ));
        }
        Ok(NetworkShape { d, p })
    }

    /// The nominal parameter-space dimension P = (1+d)(p+1), the quantity the
    /// width-dependence results and figures are stated in.
    pub fn param_count(&self) -> usize {
        (1 + self.d) * (self.p + 1)
    }

    /// Number of stored scalars in (w1, w2, b1, b2): pd + 2p + 1. This is the
    /// flat-serialization length; it coincides with [`Self::param_count`]
    /// only when d = p.
    pub fn flat_len(&self) -> usize {
        self.p * self.d + 2 * self.p + 1
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Componentwise activation with closed-form first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Swish,
    Identity,
    Tanh,
}

/// swish(x) = x / (1 + e^{−x}) = x·s(x) with the logistic sigmoid s.
pub fn swish(x: f64) -> f64 {
    x * logistic(x)
}

/// swish'(x) = s(x)(1 + x(1 − s(x))).
pub fn swish_d1(x: f64) -> f64 {
    let s = logistic(x);
    s * (1.0 + x * (1.0 - s))
}

/// swish''(x) = s(x)(1 − s(x))(2 + x(1 − 2s(x))).
pub fn swish_d2(x: f64) -> f64 {
    let s = logistic(x);
    s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Global Lipschitz constant of swish: the maximum of swish' on ℝ, attained at
/// the positive root of swish''. Computed once by bisection.
fn swish_lipschitz() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        // swish'' is positive at 1 and negative at 4; bisect for its root.
        let (mut lo, mut hi) = (1.0_f64, 4.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if swish_d2(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        swish_d1(0.5 * (lo + hi))
    })
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Swish => swish(x),
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            Activation::Swish => swish_d1(x),
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Activation::Swish => swish_d2(x),
            Activation::Identity => 0.0,
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }

    /// Global Lipschitz constant L_σ = sup |σ'|.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Swish => swish_lipschitz(),
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0,
        }
    }

    /// (σ_max, σ¹_max, σ²_max) over the closed interval [lo, hi] by dense
    /// grid search. Swish is only bounded on compacts, so the interval is
    /// part of the contract.
    pub fn bounds_on(self, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "bounds_on needs a finite interval, got [{lo}, {hi}]"
            )));
        }
        const GRID: usize = 20_001;
        let mut m0 = 0.0_f64;
        let mut m1 = 0.0_f64;
        let mut m2 = 0.0_f64;
        for i in 0..GRID {
            let x = lo + (hi - lo) * i as f64 / (GRID - 1) as f64;
            m0 = m0.max(self.eval(x).abs());
            m1 = m1.max(self.d1(x).abs());
            m2 = m2.max(self.d2(x).abs());
        }
        Ok((m0, m1, m2))
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// The four trainable blocks of a two-layer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Hidden weight matrix (p×d); `W` in the logs.
    pub w1: Matrix,
    /// Hidden bias (p); `b` in the logs.
    pub b1: Vector,
    /// Output weight vector (p); `B` in the logs.
    pub w2: Vector,
    /// Output bias; `c` in the logs.
    pub b2: f64,
}

/// How biases are initialized; weights are always i.i.d. standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BiasInit {
    /// b1 = 0, b2 = 0 so the norm-growth baselines start at zero.
    #[default]
    Zero,
    /// Standard normal biases as well.
    Gaussian,
}

impl Params {
    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            d: self.w1.cols(),
            p: self.w1.rows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.w1.rows();
        if self.b1.len() != p || self.w2.len() != p {
            return Err(Error::Dimension(format!(
                "params: w1 has {p} rows but b1 has {} and w2 has {} entries",
                self.b1.len(),
                self.w2.len()
            )));
        }
        if !(self.w1.all_finite() && self.b1.all_finite() && self.w2.all_finite())
            || !self.b2.is_finite()
        {
            return Err(Error::InvalidParameter("non-finite parameter entry".into()));
        }
        Ok(())
    }

    /// Network output f(x) = w2ᵀ σ∙(w1 x + b1) + b2.
    pub fn forward(&self, act: Activation, x: &[f64]) -> Result<f64> {
        if x.len() != self.w1.cols() {
            return Err(Error::Dimension(format!(
                "forward: expected input of length {}, got {}",
                self.w1.cols(),
                x.len()
            )));
        }
        let p = self.w1.rows();
        let mut out = 0.0;
        for i in 0..p {
            let z: f64 = self
                .w1
                .row(i)
                .iter()
                .zip(x.iter())
                .map(|(w, xi)| w * xi)
                .sum::<f64>()
                + self.b1[i];
            out += self.w2[i] * act.eval(z);
        }
        Ok(out + self.b2)
    }

    /// Preactivation z = w1 x + b1 written into `out` (length p).
    pub fn preactivation_into(&self, x: &[f64], out: &mut [f64]) {
        self.w1.matvec_into(x, out);
        for (o, b) in out.iter_mut().zip(self.b1.as_slice()) {
            *o += b;
        }
    }

    /// Input-space gradient ∇ₓ f(x) = w1ᵀ (w2 ⊙ σ'∙(w1 x + b1)).
    pub fn input_gradient(&self, act: Activation, x: &[f64]) -> Result<Vector> {
        if x.len() != self.w1.cols() {
            return Err(Error::Dimension(format!(
                "input_gradient: expected input of length {}, got {}",
                self.w1.cols(),
                x.len()
            )));
        }
        let p = self.w1.rows();
        let mut z = vec![0.0; p];
        self.preactivation_into(x, &mut z);
        for (zi, w2i) in z.iter_mut().zip(self.w2.as_slice()) {
            *zi = w2i * act.d1(*zi);
        }
        let mut grad = vec![0.0; self.w1.cols()];
        self.w1.transpose_matvec_into(&z, &mut grad);
        Ok(Vector(grad))
    }

    /// Flatten in the order (w1 row-major, w2, b1, b2) — the wire order used
    /// by the JSON sidecars.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape().flat_len());
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(self.b1.as_slice());
        out.push(self.b2);
        out
    }

    pub fn from_flat(shape: NetworkShape, flat: &[f64]) -> Result<Self> {
        let expected = shape.flat_len();
        if flat.len() != expected {
            return Err(Error::Dimension(format!(
                "flat params: expected {expected} values, got {}",
                flat.len()
            )));
        }
        let (d, p) = (shape.d, shape.p);
        let w1 = Matrix::from_vec(p, d, flat[..p * d].to_vec())?;
        let w2 = Vector::from_vec(flat[p * d..p * d + p].to_vec());
        let b1 = Vector::from_vec(flat[p * d + p..p * d + 2 * p].to_vec());
        let b2 = flat[p * d + 2 * p];
        let params = Params { w1, b1, w2, b2 };
        params.validate()?;
        Ok(params)
    }

    /// Largest absolute entry per block, in the order (w1, w2, b1, b2).
    pub fn block_max_abs(&self) -> [f64; 4] {
        [
            self.w1.max_abs(),
            self.w2.max_abs(),
            self.b1.max_abs(),
            self.b2.abs(),
        ]
    }
}

/// Sample fresh parameters: w1 and w2 entries i.i.d. standard normal
/// (independent, centered, isotropic rows), biases per `bias_init`.
pub fn init_params(shape: NetworkShape, rng: &mut Rng, bias_init: BiasInit) -> Result<Params> {
    let w1 = gaussian_matrix(shape.p, shape.d, rng)?;
    let w2 = gaussian_vector(shape.p, rng);
    let (b1, b2) = match bias_init {
        BiasInit::Zero => (Vector::zeros(shape.p), 0.0),
        BiasInit::Gaussian => (gaussian_vector(shape.p, rng), rng.standard_normal()),
    };
    Ok(Params { w1, b1, w2, b2 })
}

/// Product upper bound Lip(f) ≤ L_σ ‖w2‖ ‖w1‖_op.
pub fn lipschitz_upper_bound(params: &Params, act: Activation) -> Result<f64> {
    Ok(act.lipschitz() * params.w2.norm() * params.w1.operator_norm()?)
}

/// Empirical lower estimate of the Lipschitz constant on a box: the largest
/// input-gradient norm over uniformly sampled points.
pub fn empirical_lipschitz(
    params: &Params,
    act: Activation,
    domain: &[(f64, f64)],
    n_samples: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if domain.len() != params.w1.cols() {
        return Err(Error::Dimension(format!(
            "empirical_lipschitz: domain has {} dims, network expects {}",
            domain.len(),
            params.w1.cols()
        )));
    }
    if domain.iter().any(|(lo, hi)| lo > hi || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidParameter("empty or non-finite domain box".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidParameter(
            "empirical_lipschitz needs n_samples >= 2".into(),
        ));
    }
    let mut best = 0.0_f64;
    let mut x = vec![0.0; domain.len()];
    for _ in 0..n_samples {
        for (xi, (lo, hi)) in x.iter_mut().zip(domain.iter()) {
            *xi = rng.uniform(*lo, *hi);
        }
        best = best.max(params.input_gradient(act, &x)?.norm());
    }
    Ok(best)
}
