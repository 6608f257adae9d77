//! Data-dependent learning-rate caps and the effective learning-rate modes.
//!
//! At step s, each of the four parameter blocks gets its own cap
//! ᾱ_s = C·g(s) / denominator, where the denominator is a sum over training
//! samples of norm products evaluated at the exact parameter snapshot the
//! block's update sees. The index discipline is strict and matches the
//! sequential update order (w1, then b1, then w2, then b2):
//!
//! - `cap_w1` uses the full previous iterate;
//! - `cap_b1` uses the fresh w1 with the previous b1, w2, b2;
//! - `cap_w2` uses the fresh w1 and b1 with the previous w2, b2;
//! - `cap_b2` uses the fresh w1, b1, w2 with the previous b2.
//!
//! A denominator below 1e-300 means the corresponding gradient block is
//! exactly zero, so the cap degenerates to the configured `alpha_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean_norm, Matrix, Vector};
use crate::losses::Dataset;
use crate::network::{Activation, Params};
use crate::rates::RateFunction;

/// Denominators below this threshold clamp the cap to `alpha_max`.
pub const DEGENERATE_DENOM: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How effective learning rates are derived from the caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrMode {
    /// α = cap: ride the decay caps exactly.
    DecayCap,
    /// Fixed α; optionally clipped to the caps.
    Constant {
        alpha: f64,
        #[serde(default)]
        enforce_caps: bool,
    },
    /// α = min(1/Lip(R_S), cap); the constant-then-decay schedule.
    /// `lip_rs` may be preset; otherwise the trainer estimates it by probing.
    HybridMin {
        #[serde(default)]
        lip_rs: Option<f64>,
    },
}

/// Free parameters and rate function for the cap computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// C_W: cap multiplier for the hidden weight block.
    #[serde(rename = "C_W", default = "one")]
    pub c_w1: f64,
    /// C_B: cap multiplier for the output weight block.
    #[serde(rename = "C_B", default = "one")]
    pub c_w2: f64,
    /// C_b: cap multiplier for the hidden bias block.
    #[serde(rename = "C_b", default = "one")]
    pub c_b1: f64,
    /// C_c: cap multiplier for the output bias block.
    #[serde(rename = "C_c", default = "one")]
    pub c_b2: f64,
    pub rate: RateFunction,
    pub mode: LrMode,
    /// Cap used when a denominator degenerates to zero.
    #[serde(default = "one")]
    pub alpha_max: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            c_w1: 1.0,
            c_w2: 1.0,
            c_b1: 1.0,
            c_b2: 1.0,
            rate: RateFunction::Hybrid {
                lambda: 0.01,
                r: 0.1,
                tau: 50.0,
            },
            mode: LrMode::DecayCap,
            alpha_max: 1.0,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("C_W", self.c_w1),
            ("C_B", self.c_w2),
            ("C_b", self.c_b1),
            ("C_c", self.c_b2),
            ("alpha_max", self.alpha_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if let LrMode::Constant { alpha, .. } = self.mode {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "constant alpha must be >= 0, got {alpha}"
                )));
            }
        }
        self.rate.validate()
    }
}

/// The four effective learning rates of one iteration together with the four
/// evaluated caps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LrVector {
    pub alpha_w1: f64,
    pub alpha_w2: f64,
    pub alpha_b1: f64,
    pub alpha_b2: f64,
    pub cap_w1: f64,
    pub cap_w2: f64,
    pub cap_b1: f64,
    pub cap_b2: f64,
}

/// Evaluated caps for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    pub w1: f64,
    pub w2: f64,
    pub b1: f64,
    pub b2: f64,
}

// ---------------------------------------------------------------------------
// Cap evaluation
// ---------------------------------------------------------------------------

fn finish(c: f64, g_s: f64, denom: f64, alpha_max: f64) -> f64 {
    if denom < DEGENERATE_DENOM {
        alpha_max
    } else {
        c * g_s / denom
    }
}

fn activation_norm(
    w1: &Matrix,
    b1: &Vector,
    act: Activation,
    x: &[f64],
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.resize(w1.rows(), 0.0);
    w1.matvec_into(x, scratch);
    let mut acc = 0.0;
    for (z, b) in scratch.iter().zip(b1.as_slice()) {
        let s = act.eval(z + b);
        acc += s * s;
    }
    acc.sqrt()
}

/// Cap for the hidden weight update, evaluated at the full previous iterate:
/// C_W g(s) / (L_σ ‖w2‖ Σ_n [‖w2‖‖σ∙(w1 x_n + b1)‖ + |b2| + |y_n|] ‖x_n‖).
pub fn cap_w1(
    prev: &Params,
    data: &Dataset,
    act: Activation,
    c_w: f64,
    g_s: f64,
    alpha_max: f64,
) -> Result<f64> {
    if data.input_dim() != prev.w1.cols() {
        return Err(Error::Dimension(format!(
            "cap_w1: data dim {} vs network dim {}",
            data.input_dim(),
            prev.w1.cols()
        )));
    }
    let w2_norm = prev.w2.norm();
    let mut scratch = Vec::new();
    let mut sum = 0.0;
    for n in 0..data.len() {
        let x = data.x(n);
        let act_norm = activation_norm(&prev.w1, &prev.b1, act, x, &mut scratch);
        let bracket = w2_norm * act_norm + prev.b2.abs() + data.y(n).abs();
        sum += bracket * euclidean_norm(x);
    }
    let denom = act.lipschitz() * w2_norm * sum;
    Ok(finish(c_w, g_s, denom, alpha_max))
}

/// Cap for the hidden bias update, evaluated at the fresh w1 and previous
/// (b1, w2, b2): C_b g(s) / (‖w2‖ Σ_n [‖w2‖‖σ∙(w1⁺ x_n + b1)‖ + |b2| + |y_n|]).
pub fn cap_b1(
    w1_new: &Matrix,
    b1_prev: &Vector,
    w2_prev: &Vector,
    b2_prev: f64,
    data: &Dataset,
    act: Activation,
    c_b: f64,
    g_s: f64,
    alpha_max: f64,
) -> Result<f64> {
    if data.input_dim() != w1_new.cols() {
        return Err(Error::Dimension("cap_b1: data/network dim mismatch".into()));
    }
    let w2_norm = w2_prev.norm();
    let mut scratch = Vec::new();
    let mut sum = 0.0;
    for n in 0..data.len() {
        let act_norm = activation_norm(w1_new, b1_prev, act, data.x(n), &mut scratch);
        sum += w2_norm * act_norm + b2_prev.abs() + data.y(n).abs();
    }
    let denom = w2_norm * sum;
    Ok(finish(c_b, g_s, denom, alpha_max))
}

/// Cap for the output weight update, evaluated at the fresh (w1, b1) and
/// previous (w2, b2):
/// C_B g(s) / (Σ_n [‖w2‖‖σ∙(w1⁺ x_n + b1⁺)‖ + |b2| + |y_n|] ‖σ∙(w1⁺ x_n + b1⁺)‖).
#[allow(clippy::too_many_arguments)]
pub fn cap_w2(
    w1_new: &Matrix,
    b1_new: &Vector,
    w2_prev: &Vector,
    b2_prev: f64,
    data: &Dataset,
    act: Activation,
    c_cap: f64,
    g_s: f64,
    alpha_max: f64,
) -> Result<f64> {
    if data.input_dim() != w1_new.cols() {
        return Err(Error::Dimension("cap_w2: data/network dim mismatch".into()));
    }
    let w2_norm = w2_prev.norm();
    let mut scratch = Vec::new();
    let mut denom = 0.0;
    for n in 0..data.len() {
        let act_norm = activation_norm(w1_new, b1_new, act, data.x(n), &mut scratch);
        let bracket = w2_norm * act_norm + b2_prev.abs() + data.y(n).abs();
        denom += bracket * act_norm;
    }
    Ok(finish(c_cap, g_s, denom, alpha_max))
}

/// Cap for the output bias update, evaluated at the fresh (w1, b1, w2) and
/// previous b2: C_c g(s) / (Σ_n [‖w2⁺‖‖σ∙(w1⁺ x_n + b1⁺)‖ + |b2| + |y_n|]).
#[allow(clippy::too_many_arguments)]
pub fn cap_b2(
    w1_new: &Matrix,
    b1_new: &Vector,
    w2_new: &Vector,
    b2_prev: f64,
    data: &Dataset,
    act: Activation,
    c_c: f64,
    g_s: f64,
    alpha_max: f64,
) -> Result<f64> {
    if data.input_dim() != w1_new.cols() {
        return Err(Error::Dimension("cap_b2: data/network dim mismatch".into()));
    }
    let w2_norm = w2_new.norm();
    let mut scratch = Vec::new();
    let mut denom = 0.0;
    for n in 0..data.len() {
        let act_norm = activation_norm(w1_new, b1_new, act, data.x(n), &mut scratch);
        denom += w2_norm * act_norm + b2_prev.abs() + data.y(n).abs();
    }
    Ok(finish(c_c, g_s, denom, alpha_max))
}

// ---------------------------------------------------------------------------
// Effective learning rates
// ---------------------------------------------------------------------------

/// Apply the mode rule to a single cap.
pub fn effective_alpha(cap: f64, mode: LrMode, lip_rs: Option<f64>) -> Result<f64> {
    Ok(match mode {
        LrMode::DecayCap => cap,
        LrMode::Constant {
            alpha,
            enforce_caps,
        } => {
            if enforce_caps {
                alpha.min(cap)
            } else {
                alpha
            }
        }
        LrMode::HybridMin { lip_rs: preset } => {
            let lip = preset.or(lip_rs).ok_or(Error::MissingLipEstimate)?;
            if lip <= 0.0 {
                cap
            } else {
                (1.0 / lip).min(cap)
            }
        }
    })
}

/// Assemble the full learning-rate vector for one step from its caps.
pub fn effective_lr(caps: Caps, config: &SchedulerConfig, lip_rs: Option<f64>) -> Result<LrVector> {
    Ok(LrVector {
        alpha_w1: effective_alpha(caps.w1, config.mode, lip_rs)?,
        alpha_w2: effective_alpha(caps.w2, config.mode, lip_rs)?,
        alpha_b1: effective_alpha(caps.b1, config.mode, lip_rs)?,
        alpha_b2: effective_alpha(caps.b2, config.mode, lip_rs)?,
        cap_w1: caps.w1,
        cap_w2: caps.w2,
        cap_b1: caps.b1,
        cap_b2: caps.b2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, gaussian_vector, Rng};
    use crate::network::NetworkShape;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_setup(y: f64) -> (Params, Dataset) {
        let params = Params {
            w1: Matrix::from_rows(&[vec![1.0]]).unwrap(),
            b1: Vector::from_vec(vec![0.0]),
            w2: Vector::from_vec(vec![1.0]),
            b2: 0.0,
        };
        let data = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![y]),
        )
        .unwrap();
        (params, data)
    }

    #[test]
    fn cap_w1_hand_values() {
        let (params, data) = unit_setup(0.0);
        let cap = cap_w1(&params, &data, Activation::Identity, 1.0, 1.0, 1e6).unwrap();
        assert_relative_eq!(cap, 1.0, max_relative = 1e-15);

        let (params, data) = unit_setup(1.0);
        let cap = cap_w1(&params, &data, Activation::Identity, 1.0, 1.0, 1e6).unwrap();
        assert_relative_eq!(cap, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn cap_w1_degenerate_output_weights() {
        let (mut params, data) = unit_setup(0.0);
        params.w2 = Vector::from_vec(vec![0.0]);
        let cap = cap_w1(&params, &data, Activation::Identity, 1.0, 1.0, 7.5).unwrap();
        assert_eq!(cap, 7.5);
    }

    #[test]
    fn cap_w2_hand_value_and_degenerate() {
        let (params, data) = unit_setup(0.0);
        let cap = cap_w2(
            &params.w1, &params.b1, &params.w2, params.b2,
            &data, Activation::Identity, 1.0, 1.0, 1e6,
        )
        .unwrap();
        assert_relative_eq!(cap, 1.0, max_relative = 1e-15);

        // σ∙(w1 x + b1) = 0 for all samples degenerates the denominator, even
        // though |y_n| alone would not.
        let zero_pre = Params {
            w1: Matrix::from_rows(&[vec![0.0]]).unwrap(),
            b1: Vector::from_vec(vec![0.0]),
            w2: Vector::from_vec(vec![1.0]),
            b2: 0.0,
        };
        let data_y = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![3.0]),
        )
        .unwrap();
        let cap = cap_w2(
            &zero_pre.w1, &zero_pre.b1, &zero_pre.w2, zero_pre.b2,
            &data_y, Activation::Swish, 1.0, 1.0, 9.0,
        )
        .unwrap();
        assert_eq!(cap, 9.0);
    }

    #[test]
    fn cap_b1_hand_value_and_zero_w2() {
        let (params, data) = unit_setup(0.0);
        let cap = cap_b1(
            &params.w1, &params.b1, &params.w2, params.b2,
            &data, Activation::Identity, 1.0, 1.0, 1e6,
        )
        .unwrap();
        assert_relative_eq!(cap, 1.0, max_relative = 1e-15);

        let zero = Vector::from_vec(vec![0.0]);
        let cap = cap_b1(
            &params.w1, &params.b1, &zero, params.b2,
            &data, Activation::Identity, 1.0, 1.0, 3.25,
        )
        .unwrap();
        assert_eq!(cap, 3.25);
    }

    #[test]
    fn cap_b2_hand_value_and_zero_w2_stays_finite() {
        let (params, data) = unit_setup(0.0);
        let cap = cap_b2(
            &params.w1, &params.b1, &params.w2, params.b2,
            &data, Activation::Identity, 1.0, 1.0, 1e6,
        )
        .unwrap();
        assert_relative_eq!(cap, 1.0, max_relative = 1e-15);

        // Zero w2 leaves the |y_n| term in the denominator.
        let (params, data) = unit_setup(2.0);
        let zero = Vector::from_vec(vec![0.0]);
        let cap = cap_b2(
            &params.w1, &params.b1, &zero, params.b2,
            &data, Activation::Identity, 1.0, 1.0, 1e6,
        )
        .unwrap();
        assert_relative_eq!(cap, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn caps_linear_in_g() {
        let (params, data) = unit_setup(0.7);
        let c1 = cap_w1(&params, &data, Activation::Swish, 1.0, 1.0, 1e6).unwrap();
        let c2 = cap_w1(&params, &data, Activation::Swish, 1.0, 2.0, 1e6).unwrap();
        assert_relative_eq!(c2, 2.0 * c1, max_relative = 1e-12);
    }

    #[test]
    fn effective_lr_modes() {
        let caps = Caps { w1: 0.3, w2: 1.0, b1: 1.0, b2: 1.0 };
        let mut cfg = SchedulerConfig::default();

        cfg.mode = LrMode::DecayCap;
        let lr = effective_lr(caps, &cfg, None).unwrap();
        assert_eq!(lr.alpha_w1, 0.3);
        assert_eq!(lr.cap_w1, 0.3);

        cfg.mode = LrMode::HybridMin { lip_rs: None };
        let lr = effective_lr(caps, &cfg, Some(4.0)).unwrap();
        assert_eq!(lr.alpha_w2, 0.25);
        let lr = effective_lr(caps, &cfg, Some(0.5)).unwrap();
        assert_eq!(lr.alpha_w2, 1.0);
        assert!(effective_lr(caps, &cfg, None).is_err());

        cfg.mode = LrMode::Constant { alpha: 0.05, enforce_caps: false };
        let lr = effective_lr(caps, &cfg, None).unwrap();
        assert_eq!(lr.alpha_w1, 0.05);
        cfg.mode = LrMode::Constant { alpha: 0.5, enforce_caps: true };
        let lr = effective_lr(caps, &cfg, None).unwrap();
        assert_eq!(lr.alpha_w1, 0.3);
    }

    #[test]
    fn config_json_matches_wire_names() {
        let json = r#"{"C_W":1.0,"C_B":2.0,"C_b":3.0,"C_c":4.0,"mode":"decay_cap",
                       "alpha_max":1.0,"rate":{"kind":"hybrid","lambda":1.0,"r":1.0,"tau":50}}"#;
        let cfg: SchedulerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.c_w1, 1.0);
        assert_eq!(cfg.c_w2, 2.0);
        assert_eq!(cfg.c_b1, 3.0);
        assert_eq!(cfg.c_b2, 4.0);
        assert_eq!(cfg.mode, LrMode::DecayCap);
    }

    fn random_instance(seed: u64) -> (Params, Dataset) {
        let mut rng = Rng::new(seed);
        let shape = NetworkShape::new(2, 4).unwrap();
        let params = crate::network::init_params(shape, &mut rng, crate::network::BiasInit::Gaussian)
            .unwrap();
        let xs = gaussian_matrix(3, 2, &mut rng).unwrap();
        let ys = gaussian_vector(3, &mut rng);
        (params, Dataset::new(xs, ys).unwrap())
    }

    proptest! {
        #[test]
        fn caps_homogeneous_in_g_and_c(seed in 0u64..100, scale in 0.1f64..10.0) {
            let (params, data) = random_instance(seed);
            let act = Activation::Swish;
            let base = cap_w1(&params, &data, act, 1.0, 1.0, 1e18).unwrap();
            let scaled_g = cap_w1(&params, &data, act, 1.0, scale, 1e18).unwrap();
            let scaled_c = cap_w1(&params, &data, act, scale, 1.0, 1e18).unwrap();
            prop_assert!((scaled_g - scale * base).abs() <= 1e-9 * scaled_g.abs().max(1.0));
            prop_assert!((scaled_c - scale * base).abs() <= 1e-9 * scaled_c.abs().max(1.0));
        }

        #[test]
        fn caps_invariant_under_data_permutation(seed in 0u64..50) {
            let (params, data) = random_instance(seed);
            let act = Activation::Swish;
            let rows: Vec<Vec<f64>> = (0..data.len()).map(|n| data.x(n).to_vec()).collect();
            let ys: Vec<f64> = (0..data.len()).map(|n| data.y(n)).collect();
            let perm = [2usize, 0, 1];
            let permuted = Dataset::new(
                Matrix::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>())
                    .unwrap(),
                Vector::from_vec(perm.iter().map(|&i| ys[i]).collect()),
            ).unwrap();
            let a = cap_w1(&params, &data, act, 1.0, 1.0, 1e18).unwrap();
            let b = cap_w1(&params, &permuted, act, 1.0, 1.0, 1e18).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
