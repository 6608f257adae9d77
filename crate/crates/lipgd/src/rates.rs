//! Rate functions G with derivative g.
//!
//! A rate function modulates how fast the learning-rate caps decay: the cap
//! at step s is proportional to g(s), and the cumulative growth budget up to
//! step t is controlled by G(t) + g(1). Three parametric families are
//! provided, plus a constant-g variant for vanilla comparisons.
//!
//! The exponential and polynomial families use their closed forms
//!   G_exp(t) = λ(1 − e^{−rt}),   G_poly(t) = λ(1 − t^{1−r}/(1−r))   (r > 1),
//! evaluated verbatim, with derivatives g_exp(t) = λ r e^{−rt} and
//! g_poly(t) = λ t^{−r}. The hybrid family is defined through its derivative
//!   g(t) = λ for t ≤ τ, λ e^{−r(t−τ)} for t > τ,
//! with G(t) = λ + ∫₀ᵗ g(s) ds.
//!
//! Note the polynomial closed form above is *decreasing* in t even though its
//! derivative λ t^{−r} is positive; both are kept verbatim, so the asymptotic
//! value reported by [`RateFunction::sup_and_g1`] is the t → ∞ limit of the
//! closed form for every family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate function family with parameters (λ, r, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateFunction {
    /// g(t) = λ r e^{−rt}; G(t) = λ(1 − e^{−rt}).
    Exponential { lambda: f64, r: f64 },
    /// g(t) = λ t^{−r}; G(t) = λ(1 − t^{1−r}/(1−r)), requires r > 1.
    Polynomial { lambda: f64, r: f64 },
    /// g constant at λ until horizon τ, then exponential decay at rate r.
    Hybrid { lambda: f64, r: f64, tau: f64 },
    /// g ≡ λ (G unbounded); for constant-g comparison arms only.
    Constant { lambda: f64 },
}

impl RateFunction {
    pub fn exponential(lambda: f64, r: f64) -> Result<Self> {
        let rf = RateFunction::Exponential { lambda, r };
        rf.validate()?;
        Ok(rf)
    }

    pub fn polynomial(lambda: f64, r: f64) -> Result<Self> {
        let rf = RateFunction::Polynomial { lambda, r };
        rf.validate()?;
        Ok(rf)
    }

    pub fn hybrid(lambda: f64, r: f64, tau: f64) -> Result<Self> {
        let rf = RateFunction::Hybrid { lambda, r, tau };
        rf.validate()?;
        Ok(rf)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(msg.to_string()))
            }
        };
        match *self {
            RateFunction::Exponential { lambda, r } => {
                check(lambda > 0.0 && lambda.is_finite(), "exponential: lambda must be > 0")?;
                check(r > 0.0 && r.is_finite(), "exponential: r must be > 0")
            }
            RateFunction::Polynomial { lambda, r } => {
                check(lambda > 0.0 && lambda.is_finite(), "polynomial: lambda must be > 0")?;
                check(
                    r > 1.0 && r.is_finite(),
                    "polynomial: r must be > 1 (G unbounded otherwise)",
                )
            }
            RateFunction::Hybrid { lambda, r, tau } => {
                check(lambda >= 0.0 && lambda.is_finite(), "hybrid: lambda must be >= 0")?;
                check(r > 0.0 && r.is_finite(), "hybrid: r must be > 0")?;
                check(tau >= 0.0 && tau.is_finite(), "hybrid: tau must be >= 0")
            }
            RateFunction::Constant { lambda } => {
                check(lambda >= 0.0 && lambda.is_finite(), "constant: lambda must be >= 0")
            }
        }
    }

    /// Derivative g(t); t must be finite and non-negative.
    pub fn g(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rate derivative needs finite t >= 0, got {t}"
            )));
        }
        Ok(match *self {
            RateFunction::Exponential { lambda, r } => lambda * r * (-r * t).exp(),
            RateFunction::Polynomial { lambda, r } => lambda * t.powf(-r),
            RateFunction::Hybrid { lambda, r, tau } => {
                if t <= tau {
                    lambda
                } else {
                    lambda * (-r * (t - tau)).exp()
                }
            }
            RateFunction::Constant { lambda } => lambda,
        })
    }

    /// Cumulative value G(t); t must be finite and non-negative.
    pub fn big_g(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rate function needs finite t >= 0, got {t}"
            )));
        }
        Ok(match *self {
            RateFunction::Exponential { lambda, r } => lambda * (1.0 - (-r * t).exp()),
            RateFunction::Polynomial { lambda, r } => {
                lambda * (1.0 - t.powf(1.0 - r) / (1.0 - r))
            }
            RateFunction::Hybrid { lambda, r, tau } => {
                let constant_part = lambda * t.min(tau);
                let decay_part = if t > tau {
                    (lambda / r) * (1.0 - (-r * (t - tau)).exp())
                } else {
                    0.0
                };
                lambda + constant_part + decay_part
            }
            RateFunction::Constant { lambda } => lambda * (1.0 + t),
        })
    }

    /// (G*, g(1)): the asymptotic value of G and the derivative at t = 1,
    /// which together drive every bound formula. G* is infinite for the
    /// constant family.
    pub fn sup_and_g1(&self) -> (f64, f64) {
        let g1 = self.g(1.0).expect("g(1) is always defined");
        let sup = match *self {
            RateFunction::Exponential { lambda, .. } => lambda,
            RateFunction::Polynomial { lambda, .. } => lambda,
            RateFunction::Hybrid { lambda, r, tau } => lambda + lambda * tau + lambda / r,
            RateFunction::Constant { .. } => f64::INFINITY,
        };
        (sup, g1)
    }
}
