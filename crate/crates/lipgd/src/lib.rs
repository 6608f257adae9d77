//! Gradient descent for two-layer MLPs under learning-rate decay caps.
//!
//! This library trains width-`p` two-layer perceptrons `x ↦ w2ᵀ σ∙(w1 x + b1) + b2`
//! by plain (full-batch) gradient descent on the mean-squared empirical risk,
//! where the four parameter blocks are updated sequentially and each block's
//! learning rate is capped by a data-dependent quantity driven by a decaying
//! rate function. Enforcing the caps yields deterministic, per-iteration bounds
//! on weight-norm growth and hence on the Lipschitz constant of the trained
//! network; [`bounds`] evaluates every such bound in closed form and audits
//! recorded trajectories against them.
//!
//! Modules:
//! - [`linalg`] — dense vectors/matrices, seeded RNG, spectral norm estimation
//! - [`network`] — two-layer MLP realization, activations, Lipschitz measures
//! - [`rates`] — rate functions G with derivative g (exponential/polynomial/hybrid)
//! - [`losses`] — MSE and Huber empirical risks, Monte-Carlo true risk
//! - [`scheduler`] — the four per-block learning-rate caps and LR modes
//! - [`trainer`] — the sequential GD recursion, logging, line search
//! - [`bounds`] — closed-form bound evaluators and trajectory audits
//! - [`harness`] — toy-experiment datasets, sweeps, CSV/SVG output, CLI
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `lipgd` binary for the `train` / `sweep` / `verify` / `plot`
//! subcommands.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod network;
pub mod rates;
pub mod scheduler;
pub mod trainer;

pub use error::{Error, Result};
