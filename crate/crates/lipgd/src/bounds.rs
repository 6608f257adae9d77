//! Closed-form evaluation of the Lipschitz, norm-growth, parameter-cube, and
//! generalization bounds, plus auditing of recorded trajectories against them.
//!
//! Every evaluator is a verbatim transcription of the corresponding display;
//! the audit then checks a [`crate::trainer::TrainLog`] row by row:
//!
//! 1. four norm-growth inequalities `norm_t ≤ norm_0 + (2C/N)(G(t) + g(1))`;
//! 2. the product Lipschitz bound against its seed-wise upper envelope;
//! 3. entrywise parameter containment in the cube `[−M, M]^P`;
//! 4. `α ≤ cap` for all four blocks.
//!
//! A check passes when its slack (rhs − lhs) is at least −1e-9.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::LrMode;
use crate::trainer::TrainLog;

/// Additive slack tolerance for every audited inequality.
pub const SLACK_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Closed-form evaluators
// ---------------------------------------------------------------------------

/// Inputs for the high-probability Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub l_sigma: f64,
    pub p: usize,
    pub d: usize,
    /// Absolute constant κ from the singular-value concentration step.
    pub kappa: f64,
    /// Tail parameter η (probability floor 1 − 4e^{−η²}).
    pub eta: f64,
    pub c_w: f64,
    pub c_b_out: f64,
    pub n: usize,
    /// G(T) for the audited horizon.
    pub g_total: f64,
    /// g(1).
    pub g_one: f64,
}

/// Right-hand side of the high-probability Lipschitz bound:
/// L_σ (√p + κ(√max{p,d} + η) + 2 max{C_W, C_B}(G(T) + g(1))/N)².
pub fn lipschitz_bound_rhs(inputs: &BoundInputs) -> f64 {
    let BoundInputs {
        l_sigma,
        p,
        d,
        kappa,
        eta,
        c_w,
        c_b_out,
        n,
        g_total,
        g_one,
    } = *inputs;
    let root_p = (p as f64).sqrt();
    let root_max = (p.max(d) as f64).sqrt();
    let growth = 2.0 * c_w.max(c_b_out) * (g_total + g_one) / n as f64;
    let base = root_p + kappa * (root_max + eta) + growth;
    l_sigma * base * base
}

/// Seed-wise Lipschitz envelope:
/// L_σ [‖W₀‖_op + 2C_W(G(t)+g(1))/N] [‖B₀‖ + 2C_B(G(t)+g(1))/N].
#[allow(clippy::too_many_arguments)]
pub fn per_omega_lip_bound(
    norm_w1_op0: f64,
    norm_w2_0: f64,
    c_w: f64,
    c_b_out: f64,
    n: usize,
    g_t: f64,
    g_one: f64,
    l_sigma: f64,
) -> f64 {
    let growth = g_t + g_one;
    l_sigma
        * (norm_w1_op0 + 2.0 * c_w * growth / n as f64)
        * (norm_w2_0 + 2.0 * c_b_out * growth / n as f64)
}

/// Norm-growth right-hand side: norm₀ + (2C/N)(G(t) + g(1)).
pub fn norm_growth_rhs(norm0: f64, c: f64, n: usize, g_t: f64, g_one: f64) -> f64 {
    norm0 + 2.0 * c * (g_t + g_one) / n as f64
}

/// Half-width M of the deterministic parameter cube [−M, M]^P: the largest of
/// the four expressions √d‖·₀‖_∞ + (2C/N)(G* + g(1)), one per block in the
/// order (w1, w2, b1, b2).
pub fn param_cube_m(
    sup_norms0: [f64; 4],
    c: [f64; 4],
    n: usize,
    d: usize,
    g_star: f64,
    g_one: f64,
) -> f64 {
    let root_d = (d as f64).sqrt();
    sup_norms0
        .iter()
        .zip(c.iter())
        .map(|(sup, ci)| root_d * sup + 2.0 * ci * (g_star + g_one) / n as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Dimensional constant C_k of the empirical Wasserstein concentration step,
/// defined for k = d + D ≥ 3:
/// 2 ((k/2 − 1) / (2(1 − 2^{1−k/2})))^{2/k} (1 + 1/(2(k/2 − 1))) √k.
pub fn dimensional_constant(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "dimensional constant needs d + D > 2, got {k}"
        )));
    }
    let kf = k as f64;
    let half = kf / 2.0 - 1.0;
    let ratio = half / (2.0 * (1.0 - 2.0_f64.powf(1.0 - kf / 2.0)));
    Ok(2.0 * ratio.powf(2.0 / kf) * (1.0 + 1.0 / (2.0 * half)) * kf.sqrt())
}

/// Inputs for the generalization bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenBoundInputs {
    /// diam(supp Q).
    pub diam_q: f64,
    /// Confidence level δ ∈ (0, 1].
    pub delta: f64,
    pub d: usize,
    /// Output dimension D (d + D > 2 required).
    pub out_dim: usize,
    pub n: usize,
    /// Evaluated Λ(T, N); use [`GenBoundInputs::from_bound_inputs`] to apply
    /// the η = diam/√(2N) rule.
    pub lambda: f64,
}

impl GenBoundInputs {
    /// Build the generalization inputs from Lipschitz-bound inputs, setting
    /// η := diam(supp Q)/√(2N) before evaluating Λ.
    pub fn from_bound_inputs(
        mut bound: BoundInputs,
        diam_q: f64,
        delta: f64,
        out_dim: usize,
    ) -> Self {
        bound.eta = diam_q / (2.0 * bound.n as f64).sqrt();
        GenBoundInputs {
            diam_q,
            delta,
            d: bound.d,
            out_dim,
            n: bound.n,
            lambda: lipschitz_bound_rhs(&bound),
        }
    }
}

fn generalization_formula(
    lambda: f64,
    diam_q: f64,
    c_k: f64,
    d: usize,
    n: usize,
    delta: f64,
) -> f64 {
    let nf = n as f64;
    lambda * diam_q * (c_k / nf.powf(1.0 / d as f64) + (8.0 / delta).ln().sqrt() / (2.0 * nf).sqrt())
}

/// Generalization bound Λ(T,N) · C_Q · (C_{d+D}/N^{1/d} + √(ln(8/δ))/√(2N)).
pub fn generalization_bound(gin: &GenBoundInputs) -> Result<f64> {
    if !(gin.delta > 0.0 && gin.delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence delta must lie in (0, 1], got {}",
            gin.delta
        )));
    }
    if gin.diam_q <= 0.0 {
        return Err(Error::InvalidParameter("diam_q must be > 0".into()));
    }
    let c_k = dimensional_constant(gin.d + gin.out_dim)?;
    Ok(generalization_formula(
        gin.lambda, gin.diam_q, c_k, gin.d, gin.n, gin.delta,
    ))
}

/// Unvalidated generalization formula, for exercising the closed form at
/// parameter values outside the corollary's hypotheses.
pub fn generalization_bound_unchecked(gin: &GenBoundInputs) -> Result<f64> {
    let c_k = dimensional_constant(gin.d + gin.out_dim)?;
    Ok(generalization_formula(
        gin.lambda, gin.diam_q, c_k, gin.d, gin.n, gin.delta,
    ))
}

// ---------------------------------------------------------------------------
// Trajectory audit
// ---------------------------------------------------------------------------

/// One audited inequality at one logged iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationCheck {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

/// All checks of one inequality family across a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: String,
    pub pass: bool,
    pub worst_slack: f64,
    pub first_violation: Option<usize>,
    pub checks: Vec<IterationCheck>,
}

impl FamilyReport {
    fn from_checks(family: &str, checks: Vec<IterationCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let worst_slack = checks
            .iter()
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min);
        let first_violation = checks.iter().find(|c| !c.pass).map(|c| c.t);
        FamilyReport {
            family: family.to_string(),
            pass,
            worst_slack,
            first_violation,
            checks,
        }
    }
}

/// Audit outcome for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub families: Vec<FamilyReport>,
    pub all_pass: bool,
}

impl BoundReport {
    pub fn family(&self, name: &str) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == name)
    }
}

fn check(t: usize, lhs: f64, rhs: f64) -> IterationCheck {
    let slack = rhs - lhs;
    IterationCheck {
        t,
        lhs,
        rhs,
        slack,
        pass: slack >= -SLACK_TOL,
    }
}

/// Audit a trajectory produced in a cap-enforcing mode against every
/// deterministic bound. The rate function, C constants, and activation are
/// taken from the log's own configuration snapshot.
pub fn audit_trajectory(log: &TrainLog) -> Result<BoundReport> {
    let auditable = matches!(
        log.config.scheduler.mode,
        LrMode::DecayCap | LrMode::HybridMin { .. } | LrMode::Constant { enforce_caps: true, .. }
    );
    if !auditable {
        return Err(Error::Config(
            "audit needs a cap-enforcing mode (decay_cap, hybrid_min, or constant with enforce_caps)"
                .into(),
        ));
    }
    let first = log
        .records
        .first()
        .ok_or_else(|| Error::Config("audit needs a non-empty log".into()))?;
    if first.t != 0 {
        return Err(Error::Config("audit needs the initialization record".into()));
    }

    let sched = &log.config.scheduler;
    let n = log.data_len;
    if n == 0 {
        return Err(Error::Config("log carries no sample count".into()));
    }
    let (g_star, g_one) = sched.rate.sup_and_g1();
    let l_sigma = log.config.activation.lipschitz();
    let c = [sched.c_w1, sched.c_w2, sched.c_b1, sched.c_b2];

    let norm0 = [
        first.norm_w1_op,
        first.norm_w2,
        first.norm_b1,
        first.abs_b2,
    ];
    let sup0 = [first.sup_w1, first.sup_w2, first.sup_b1, first.abs_b2];
    let cube_m = param_cube_m(sup0, c, n, log.config.shape.d, g_star, g_one);

    let names = ["norm_growth_W", "norm_growth_B", "norm_growth_b", "norm_growth_c"];
    let mut growth_checks: [Vec<IterationCheck>; 4] = Default::default();
    let mut lip_checks = Vec::new();
    let mut cube_checks = Vec::new();
    let mut cap_checks = Vec::new();

    for rec in &log.records {
        let g_t = sched.rate.big_g(rec.t as f64)?;
        let norms_t = [rec.norm_w1_op, rec.norm_w2, rec.norm_b1, rec.abs_b2];
        for k in 0..4 {
            let rhs = norm_growth_rhs(norm0[k], c[k], n, g_t, g_one);
            growth_checks[k].push(check(rec.t, norms_t[k], rhs));
        }

        let envelope = per_omega_lip_bound(
            norm0[0], norm0[1], sched.c_w1, sched.c_w2, n, g_t, g_one, l_sigma,
        );
        lip_checks.push(check(rec.t, rec.lip_bound, envelope));

        let sup_t = rec
            .sup_w1
            .max(rec.sup_w2)
            .max(rec.sup_b1)
            .max(rec.abs_b2);
        cube_checks.push(check(rec.t, sup_t, cube_m));

        for (alpha, cap) in [
            (rec.lr.alpha_w1, rec.lr.cap_w1),
            (rec.lr.alpha_w2, rec.lr.cap_w2),
            (rec.lr.alpha_b1, rec.lr.cap_b1),
            (rec.lr.alpha_b2, rec.lr.cap_b2),
        ] {
            cap_checks.push(check(rec.t, alpha, cap));
        }
    }

    let mut families = Vec::with_capacity(7);
    for (name, checks) in names.iter().zip(growth_checks.into_iter()) {
        families.push(FamilyReport::from_checks(name, checks));
    }
    families.push(FamilyReport::from_checks("lipschitz_product", lip_checks));
    families.push(FamilyReport::from_checks("param_cube", cube_checks));
    families.push(FamilyReport::from_checks("lr_caps", cap_checks));

    let all_pass = families.iter().all(|f| f.pass);
    Ok(BoundReport { families, all_pass })
}

// ---------------------------------------------------------------------------
// Convergence-rate check
// ---------------------------------------------------------------------------

/// Comparison of min-gradient-norm trajectories across iteration budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    /// (budget T, m(T)) sorted by budget.
    pub entries: Vec<(usize, f64)>,
    /// True when some m(T) reached zero (interpolation); the ratio test is
    /// then skipped.
    pub converged: bool,
    /// m(T₁)/m(T₂) for the smallest and largest budget.
    pub ratio: Option<f64>,
    /// The rate prediction √((T₂+1)/(T₁+1)).
    pub predicted_ratio: f64,
}

/// Compare min_{t≤T} ‖∇R_S(Θ_t)‖ across budgets against the 1/√(T+1) rate.
pub fn convergence_rate_check(entries: &[(usize, f64)]) -> Result<RateCheck> {
    if entries.len() < 2 {
        return Err(Error::InsufficientBudgets);
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|(t, _)| *t);
    let (t1, m1) = sorted[0];
    let (t2, m2) = sorted[sorted.len() - 1];
    if t1 == t2 {
        return Err(Error::InsufficientBudgets);
    }
    let predicted_ratio = ((t2 as f64 + 1.0) / (t1 as f64 + 1.0)).sqrt();
    let converged = sorted.iter().any(|(_, m)| *m <= 1e-14);
    let ratio = if converged { None } else { Some(m1 / m2) };
    Ok(RateCheck {
        entries: sorted,
        converged,
        ratio,
        predicted_ratio,
    })
}
