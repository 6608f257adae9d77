//! The sequential gradient-descent recursion with per-block learning rates,
//! full per-iteration logging, Armijo backtracking, and an empirical
//! Lip(R_S) estimator.
//!
//! One GD step updates the four blocks strictly in the order w1, b1, w2, b2,
//! each block seeing the freshest values of the blocks updated before it
//! (a Gauss–Seidel sweep, exactly as the recursion is displayed):
//!
//! - w1 update from (w1, b1, w2, b2) at t−1;
//! - b1 update from (w1 at t, b1, w2, b2 at t−1);
//! - w2 update from (w1, b1 at t, w2, b2 at t−1);
//! - b2 update from (w1, b1, w2 at t, b2 at t−1).
//!
//! Each block's cap is recomputed from the exact snapshot its display
//! references. The `grad_norm` column, by contrast, is the norm of the
//! *simultaneous* gradient ∇R_S(Θ_t) with all four blocks evaluated at the
//! same iterate — that is the quantity whose running minimum the optimal-rate
//! guarantee speaks about. A `simultaneous` toggle (off by default) switches
//! the update itself to a plain joint gradient step for comparison.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::linalg::{streams, Matrix, Rng, Vector};
use crate::losses::{huber_risk, mse_risk, Dataset, LossConfig};
use crate::network::{
    empirical_lipschitz, init_params, lipschitz_upper_bound, Activation, BiasInit, NetworkShape,
    Params,
};
use crate::scheduler::{
    cap_b1, cap_b2, cap_w1, cap_w2, effective_alpha, Caps, LrMode, LrVector, SchedulerConfig,
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Scale applied to freshly sampled weights. The sampler itself always draws
/// unit-variance Gaussians (isotropic rows); the width-scaled option then
/// divides by √p, which puts the initial network at O(1) output scale — the
/// regime the toy experiments run in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScale {
    #[default]
    Unit,
    InvSqrtWidth,
    Fixed(f64),
}

impl InitScale {
    pub fn factor(&self, width: usize) -> f64 {
        match self {
            InitScale::Unit => 1.0,
            InitScale::InvSqrtWidth => 1.0 / (width as f64).sqrt(),
            InitScale::Fixed(f) => *f,
        }
    }
}

/// Full specification of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub shape: NetworkShape,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    /// Iteration budget T.
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init_scale: InitScale,
    #[serde(default)]
    pub loss: LossConfig,
    /// Logging stride; every `log_every`-th iterate gets a record.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Box for the empirical Lipschitz estimate; data bounding box inflated
    /// by 20% when absent.
    #[serde(default)]
    pub lip_domain: Option<Vec<(f64, f64)>>,
    /// Sample count for the empirical Lipschitz estimate (0 disables it).
    #[serde(default = "default_lip_samples")]
    pub lip_samples: usize,
    #[serde(default)]
    pub bias_init: BiasInit,
    /// Replace the sequential sweep with a joint gradient step (comparison
    /// toggle; caps are then all evaluated at the previous iterate).
    #[serde(default)]
    pub simultaneous: bool,
    /// Probe count for the Lip(R_S) estimate in hybrid_min mode.
    #[serde(default = "default_lip_probes")]
    pub lip_probes: usize,
}

fn default_log_every() -> usize {
    1
}

fn default_lip_samples() -> usize {
    512
}

fn default_lip_probes() -> usize {
    64
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        NetworkShape::new(self.shape.d, self.shape.p)?;
        self.scheduler.validate()?;
        self.loss.validate()?;
        if self.log_every == 0 {
            return Err(Error::InvalidParameter("log_every must be >= 1".into()));
        }
        if let Some(domain) = &self.lip_domain {
            if domain.len() != self.shape.d {
                return Err(Error::Dimension(format!(
                    "lip_domain has {} dims, network has {}",
                    domain.len(),
                    self.shape.d
                )));
            }
        }
        if matches!(self.scheduler.mode, LrMode::HybridMin { .. }) {
            let (sup, _) = self.scheduler.rate.sup_and_g1();
            if !sup.is_finite() {
                return Err(Error::InvalidParameter(
                    "hybrid_min mode needs a bounded rate function".into(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub lr: LrVector,
    /// ‖w1‖_op (the `norm_W_op` column).
    pub norm_w1_op: f64,
    /// ‖w2‖ (the `norm_B` column).
    pub norm_w2: f64,
    /// ‖b1‖ (the `norm_b` column).
    pub norm_b1: f64,
    /// |b2| (the `abs_c` column).
    pub abs_b2: f64,
    /// Product bound L_σ ‖w2‖ ‖w1‖_op.
    pub lip_bound: f64,
    /// Sampled input-gradient maximum (0 when sampling is disabled).
    pub lip_empirical: f64,
    pub mse_risk: f64,
    pub huber_risk: f64,
    /// Norm of the simultaneous gradient ∇R_S at this iterate.
    pub grad_norm: f64,
    pub wallclock_ns: u64,
    /// Largest absolute entries per block, for the parameter-cube audit.
    pub sup_w1: f64,
    pub sup_w2: f64,
    pub sup_b1: f64,
}

impl IterationRecord {
    /// CSV column order. The blocks go by their customary letters:
    /// W = hidden weights, B = output weights, b = hidden bias, c = output bias.
    pub const CSV_HEADER: [&'static str; 22] = [
        "t",
        "alpha_W",
        "alpha_B",
        "alpha_b",
        "alpha_c",
        "cap_W",
        "cap_B",
        "cap_b",
        "cap_c",
        "norm_W_op",
        "norm_B",
        "norm_b",
        "abs_c",
        "lip_bound",
        "lip_empirical",
        "mse_risk",
        "huber_risk",
        "grad_norm",
        "wallclock_ns",
        "sup_W",
        "sup_B",
        "sup_b",
    ];

    /// Numeric column names (everything except the iteration index).
    pub const NUMERIC_COLUMNS: [&'static str; 21] = [
        "alpha_W",
        "alpha_B",
        "alpha_b",
        "alpha_c",
        "cap_W",
        "cap_B",
        "cap_b",
        "cap_c",
        "norm_W_op",
        "norm_B",
        "norm_b",
        "abs_c",
        "lip_bound",
        "lip_empirical",
        "mse_risk",
        "huber_risk",
        "grad_norm",
        "wallclock_ns",
        "sup_W",
        "sup_B",
        "sup_b",
    ];

    pub fn numeric_values(&self) -> [f64; 21] {
        [
            self.lr.alpha_w1,
            self.lr.alpha_w2,
            self.lr.alpha_b1,
            self.lr.alpha_b2,
            self.lr.cap_w1,
            self.lr.cap_w2,
            self.lr.cap_b1,
            self.lr.cap_b2,
            self.norm_w1_op,
            self.norm_w2,
            self.norm_b1,
            self.abs_b2,
            self.lip_bound,
            self.lip_empirical,
            self.mse_risk,
            self.huber_risk,
            self.grad_norm,
            self.wallclock_ns as f64,
            self.sup_w1,
            self.sup_w2,
            self.sup_b1,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.numeric_values().iter().all(|v| v.is_finite())
    }

    /// Equality up to the wallclock column (which is never reproducible).
    pub fn same_numbers(&self, other: &Self) -> bool {
        self.t == other.t
            && self
                .numeric_values()
                .iter()
                .zip(other.numeric_values().iter())
                .enumerate()
                .all(|(i, (a, b))| Self::NUMERIC_COLUMNS[i] == "wallclock_ns" || a == b)
    }
}

/// A complete training trajectory: config snapshot, records, final weights.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub config: TrainConfig,
    pub records: Vec<IterationRecord>,
    pub final_params: Params,
    /// Sample count N of the training set; the bound audits need it.
    pub data_len: usize,
    /// The Lip(R_S) value hybrid_min mode actually used, when applicable.
    pub resolved_lip_rs: Option<f64>,
}

/// JSON sidecar stored next to each log CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: TrainConfig,
    pub final_params: Vec<f64>,
    pub data_len: usize,
    #[serde(default)]
    pub resolved_lip_rs: Option<f64>,
}

impl TrainLog {
    /// Bitwise equality of every logged number except wallclock.
    pub fn same_numbers(&self, other: &Self) -> bool {
        self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(other.records.iter())
                .all(|(a, b)| a.same_numbers(b))
            && self.final_params == other.final_params
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(IterationRecord::CSV_HEADER)?;
        for rec in &self.records {
            let mut fields = vec![rec.t.to_string()];
            for (name, v) in IterationRecord::NUMERIC_COLUMNS
                .iter()
                .zip(rec.numeric_values())
            {
                if *name == "wallclock_ns" {
                    fields.push(format!("{}", v as u64));
                } else {
                    fields.push(v.to_string());
                }
            }
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `<dir>/log_seed<k>.csv` and its JSON sidecar; returns both paths.
    pub fn write_files(&self, dir: &Path, seed_label: u64) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("log_seed{seed_label}.csv"));
        let json_path = dir.join(format!("log_seed{seed_label}.json"));
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        let sidecar = Sidecar {
            config: self.config.clone(),
            final_params: self.final_params.to_flat(),
            data_len: self.data_len,
            resolved_lip_rs: self.resolved_lip_rs,
        };
        serde_json::to_writer_pretty(std::fs::File::create(&json_path)?, &sidecar)?;
        Ok((csv_path, json_path))
    }

    /// Reload a trajectory from a log CSV and its sidecar.
    pub fn load_files(csv_path: &Path, json_path: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_reader(std::fs::File::open(json_path)?)?;
        let mut reader = csv::Reader::from_reader(std::fs::File::open(csv_path)?);
        let headers = reader.headers()?.clone();
        let index_of = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let mut cols = Vec::with_capacity(IterationRecord::CSV_HEADER.len());
        for name in IterationRecord::CSV_HEADER {
            cols.push(index_of(name)?);
        }
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row?;
            let field = |k: usize| -> Result<f64> {
                row.get(cols[k])
                    .ok_or_else(|| Error::MissingColumn(IterationRecord::CSV_HEADER[k].into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad log value: {e}")))
            };
            records.push(IterationRecord {
                t: field(0)? as usize,
                lr: LrVector {
                    alpha_w1: field(1)?,
                    alpha_w2: field(2)?,
                    alpha_b1: field(3)?,
                    alpha_b2: field(4)?,
                    cap_w1: field(5)?,
                    cap_w2: field(6)?,
                    cap_b1: field(7)?,
                    cap_b2: field(8)?,
                },
                norm_w1_op: field(9)?,
                norm_w2: field(10)?,
                norm_b1: field(11)?,
                abs_b2: field(12)?,
                lip_bound: field(13)?,
                lip_empirical: field(14)?,
                mse_risk: field(15)?,
                huber_risk: field(16)?,
                grad_norm: field(17)?,
                wallclock_ns: field(18)? as u64,
                sup_w1: field(19)?,
                sup_w2: field(20)?,
                sup_b1: field(21)?,
            });
        }
        let final_params = Params::from_flat(sidecar.config.shape, &sidecar.final_params)?;
        Ok(TrainLog {
            config: sidecar.config,
            records,
            final_params,
            data_len: sidecar.data_len,
            resolved_lip_rs: sidecar.resolved_lip_rs,
        })
    }
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// The four blocks of ∇R_S evaluated jointly at one iterate.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Vector,
    pub b2: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        (self.w1.as_slice().iter().map(|v| v * v).sum::<f64>()
            + self.b1.as_slice().iter().map(|v| v * v).sum::<f64>()
            + self.w2.as_slice().iter().map(|v| v * v).sum::<f64>()
            + self.b2 * self.b2)
            .sqrt()
    }
}

/// Simultaneous gradient of the MSE risk: all four blocks at the same Θ.
pub fn simultaneous_gradient(params: &Params, data: &Dataset, act: Activation) -> Result<Gradient> {
    if data.input_dim() != params.w1.cols() {
        return Err(Error::Dimension(
            "gradient: data and network dimensions differ".into(),
        ));
    }
    let p = params.w1.rows();
    let d = params.w1.cols();
    let n = data.len() as f64;
    let mut gw1 = Matrix::zeros(p, d);
    let mut gb1 = Vector::zeros(p);
    let mut gw2 = Vector::zeros(p);
    let mut gb2 = 0.0;
    let mut z = vec![0.0; p];
    for idx in 0..data.len() {
        let x = data.x(idx);
        params.preactivation_into(x, &mut z);
        let mut f = params.b2;
        for i in 0..p {
            f += params.w2[i] * act.eval(z[i]);
        }
        let resid = f - data.y(idx);
        let scale = 2.0 * resid / n;
        for i in 0..p {
            let si = act.eval(z[i]);
            let di = act.d1(z[i]);
            let hidden_coef = scale * params.w2[i] * di;
            let row = &mut gw1.as_mut_slice()[i * d..(i + 1) * d];
            for (g, xj) in row.iter_mut().zip(x.iter()) {
                *g += hidden_coef * xj;
            }
            gb1[i] += hidden_coef;
            gw2[i] += scale * si;
        }
        gb2 += scale;
    }
    Ok(Gradient {
        w1: gw1,
        b1: gb1,
        w2: gw2,
        b2: gb2,
    })
}

/// Euclidean norm of the full simultaneous gradient of R_S at Θ.
pub fn grad_norm(params: &Params, data: &Dataset, act: Activation) -> Result<f64> {
    Ok(simultaneous_gradient(params, data, act)?.norm())
}

// ---------------------------------------------------------------------------
// The GD step
// ---------------------------------------------------------------------------

/// One sequential GD step. Returns the next iterate and the learning rates /
/// caps that produced it.
pub fn gd_step(
    prev: &Params,
    data: &Dataset,
    act: Activation,
    sched: &SchedulerConfig,
    g_s: f64,
    lip_rs: Option<f64>,
) -> Result<(Params, LrVector)> {
    if data.input_dim() != prev.w1.cols() {
        return Err(Error::Dimension(
            "gd_step: data and network dimensions differ".into(),
        ));
    }
    let p = prev.w1.rows();
    let d = prev.w1.cols();
    let n = data.len() as f64;
    let amax = sched.alpha_max;
    let mut z = vec![0.0; p];

    // Block 1: hidden weights, everything at t−1.
    let cw1 = cap_w1(prev, data, act, sched.c_w1, g_s, amax)?;
    let alpha_w1 = effective_alpha(cw1, sched.mode, lip_rs)?;
    let mut w1_new = prev.w1.clone();
    for idx in 0..data.len() {
        let x = data.x(idx);
        prev.w1.matvec_into(x, &mut z);
        let mut f = prev.b2;
        for i in 0..p {
            z[i] += prev.b1[i];
            f += prev.w2[i] * act.eval(z[i]);
        }
        let scale = 2.0 * alpha_w1 * (f - data.y(idx)) / n;
        for i in 0..p {
            let coef = scale * prev.w2[i] * act.d1(z[i]);
            let row = &mut w1_new.as_mut_slice()[i * d..(i + 1) * d];
            for (w, xj) in row.iter_mut().zip(x.iter()) {
                *w -= coef * xj;
            }
        }
    }

    // Block 2: hidden bias, with the fresh w1.
    let cb1 = cap_b1(&w1_new, &prev.b1, &prev.w2, prev.b2, data, act, sched.c_b1, g_s, amax)?;
    let alpha_b1 = effective_alpha(cb1, sched.mode, lip_rs)?;
    let mut b1_new = prev.b1.clone();
    for idx in 0..data.len() {
        let x = data.x(idx);
        w1_new.matvec_into(x, &mut z);
        let mut f = prev.b2;
        for i in 0..p {
            z[i] += prev.b1[i];
            f += prev.w2[i] * act.eval(z[i]);
        }
        let scale = 2.0 * alpha_b1 * (f - data.y(idx)) / n;
        for i in 0..p {
            b1_new[i] -= scale * prev.w2[i] * act.d1(z[i]);
        }
    }

    // Block 3: output weights, with the fresh w1 and b1.
    let cw2 = cap_w2(&w1_new, &b1_new, &prev.w2, prev.b2, data, act, sched.c_w2, g_s, amax)?;
    let alpha_w2 = effective_alpha(cw2, sched.mode, lip_rs)?;
    let mut w2_new = prev.w2.clone();
    for idx in 0..data.len() {
        let x = data.x(idx);
        w1_new.matvec_into(x, &mut z);
        let mut f = prev.b2;
        for i in 0..p {
            z[i] = act.eval(z[i] + b1_new[i]);
            f += prev.w2[i] * z[i];
        }
        let scale = 2.0 * alpha_w2 * (f - data.y(idx)) / n;
        for i in 0..p {
            w2_new[i] -= scale * z[i];
        }
    }

    // Block 4: output bias, with the fresh w1, b1, w2.
    let cb2 = cap_b2(&w1_new, &b1_new, &w2_new, prev.b2, data, act, sched.c_b2, g_s, amax)?;
    let alpha_b2 = effective_alpha(cb2, sched.mode, lip_rs)?;
    let mut b2_new = prev.b2;
    for idx in 0..data.len() {
        let x = data.x(idx);
        w1_new.matvec_into(x, &mut z);
        let mut f = prev.b2;
        for i in 0..p {
            f += w2_new[i] * act.eval(z[i] + b1_new[i]);
        }
        b2_new -= 2.0 * alpha_b2 * (f - data.y(idx)) / n;
    }

    let next = Params {
        w1: w1_new,
        b1: b1_new,
        w2: w2_new,
        b2: b2_new,
    };
    let lr = LrVector {
        alpha_w1,
        alpha_w2,
        alpha_b1,
        alpha_b2,
        cap_w1: cw1,
        cap_w2: cw2,
        cap_b1: cb1,
        cap_b2: cb2,
    };
    Ok((next, lr))
}

/// Joint gradient step used by the `simultaneous` toggle. All four gradients
/// and all four caps are evaluated at the previous iterate.
fn simultaneous_step(
    prev: &Params,
    data: &Dataset,
    act: Activation,
    sched: &SchedulerConfig,
    g_s: f64,
    lip_rs: Option<f64>,
) -> Result<(Params, LrVector)> {
    let amax = sched.alpha_max;
    let caps = Caps {
        w1: cap_w1(prev, data, act, sched.c_w1, g_s, amax)?,
        b1: cap_b1(&prev.w1, &prev.b1, &prev.w2, prev.b2, data, act, sched.c_b1, g_s, amax)?,
        w2: cap_w2(&prev.w1, &prev.b1, &prev.w2, prev.b2, data, act, sched.c_w2, g_s, amax)?,
        b2: cap_b2(&prev.w1, &prev.b1, &prev.w2, prev.b2, data, act, sched.c_b2, g_s, amax)?,
    };
    let lr = crate::scheduler::effective_lr(caps, sched, lip_rs)?;
    let grad = simultaneous_gradient(prev, data, act)?;
    let mut next = prev.clone();
    for (w, g) in next.w1.as_mut_slice().iter_mut().zip(grad.w1.as_slice()) {
        *w -= lr.alpha_w1 * g;
    }
    for (b, g) in next.b1.as_mut_slice().iter_mut().zip(grad.b1.as_slice()) {
        *b -= lr.alpha_b1 * g;
    }
    for (w, g) in next.w2.as_mut_slice().iter_mut().zip(grad.w2.as_slice()) {
        *w -= lr.alpha_w2 * g;
    }
    next.b2 -= lr.alpha_b2 * grad.b2;
    Ok((next, lr))
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// Run the full training loop, logging every `log_every`-th iterate
/// (the initialization always gets a record). Deterministic for a fixed
/// (config, data): the wallclock column is the only thing that varies.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<TrainLog> {
    config.validate()?;
    if data.input_dim() != config.shape.d {
        return Err(Error::Dimension(format!(
            "train: data dimension {} vs configured {}",
            data.input_dim(),
            config.shape.d
        )));
    }
    let start = Instant::now();
    let act = config.activation;

    let mut init_rng = Rng::with_stream(config.seed, streams::INIT);
    let mut params = init_params(config.shape, &mut init_rng, config.bias_init)?;
    let scale = config.init_scale.factor(config.shape.p);
    if scale != 1.0 {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad init scale {scale}")));
        }
        for v in params.w1.as_mut_slice() {
            *v *= scale;
        }
        for v in params.w2.as_mut_slice() {
            *v *= scale;
        }
        for v in params.b1.as_mut_slice() {
            *v *= scale;
        }
        params.b2 *= scale;
    }

    // Fixed point set for the empirical Lipschitz series: the same points are
    // reused at every logged iterate.
    let lip_domain: Vec<(f64, f64)> = match &config.lip_domain {
        Some(domain) => domain.clone(),
        None => data
            .bounding_box()
            .into_iter()
            .map(|(lo, hi)| {
                let pad = 0.2 * (hi - lo).abs().max(1e-6);
                (lo - pad, hi + pad)
            })
            .collect(),
    };

    let lip_rs = match config.scheduler.mode {
        LrMode::HybridMin { lip_rs: preset } => Some(match preset {
            Some(v) => v,
            None => {
                let (g_star, g_one) = config.scheduler.rate.sup_and_g1();
                let cube_m = bounds::param_cube_m(
                    params.block_max_abs(),
                    [
                        config.scheduler.c_w1,
                        config.scheduler.c_w2,
                        config.scheduler.c_b1,
                        config.scheduler.c_b2,
                    ],
                    data.len(),
                    config.shape.d,
                    g_star,
                    g_one,
                );
                let mut probe_rng = Rng::with_stream(config.seed, streams::PROBE);
                estimate_lip_rs(
                    data,
                    act,
                    config.shape,
                    cube_m,
                    config.lip_probes,
                    &mut probe_rng,
                )?
            }
        }),
        _ => None,
    };

    let mut lip_rng = Rng::with_stream(config.seed, streams::LIP_POINTS);
    let mut log = TrainLog {
        config: config.clone(),
        records: Vec::with_capacity(config.steps / config.log_every + 1),
        final_params: params.clone(),
        data_len: data.len(),
        resolved_lip_rs: lip_rs,
    };

    let record = |params: &Params,
                  t: usize,
                  lr: LrVector,
                  lip_rng: &mut Rng|
     -> Result<IterationRecord> {
        let lip_empirical = if config.lip_samples >= 2 {
            // Re-seed per record so every logged iterate sees the same points.
            let mut point_rng = Rng::with_stream(lip_rng.seed(), lip_rng.stream());
            empirical_lipschitz(params, act, &lip_domain, config.lip_samples, &mut point_rng)?
        } else {
            0.0
        };
        let [sup_w1, sup_w2, sup_b1, _] = params.block_max_abs();
        let rec = IterationRecord {
            t,
            lr,
            norm_w1_op: params.w1.operator_norm()?,
            norm_w2: params.w2.norm(),
            norm_b1: params.b1.norm(),
            abs_b2: params.b2.abs(),
            lip_bound: lipschitz_upper_bound(params, act)?,
            lip_empirical,
            mse_risk: mse_risk(params, act, data)?,
            huber_risk: huber_risk(params, act, data, config.loss.huber_delta)?,
            grad_norm: grad_norm(params, data, act)?,
            wallclock_ns: start.elapsed().as_nanos() as u64,
            sup_w1,
            sup_w2,
            sup_b1,
        };
        if !rec.all_finite() {
            return Err(Error::NonFinite {
                what: "iteration record".into(),
                step: t,
            });
        }
        Ok(rec)
    };

    log.records
        .push(record(&params, 0, LrVector::default(), &mut lip_rng)?);

    for t in 1..=config.steps {
        let g_s = config.scheduler.rate.g(t as f64)?;
        let (next, lr) = if config.simultaneous {
            simultaneous_step(&params, data, act, &config.scheduler, g_s, lip_rs)?
        } else {
            gd_step(&params, data, act, &config.scheduler, g_s, lip_rs)?
        };
        if next.validate().is_err() {
            return Err(Error::NonFinite {
                what: "parameter update".into(),
                step: t,
            });
        }
        params = next;
        if t % config.log_every == 0 {
            log.records.push(record(&params, t, lr, &mut lip_rng)?);
        }
    }

    log.final_params = params;
    Ok(log)
}

// ---------------------------------------------------------------------------
// Lip(R_S) estimation and line search
// ---------------------------------------------------------------------------

/// Estimate Lip(R_S) on the cube [−M, M]^P: the largest simultaneous-gradient
/// norm over `n_probe` uniformly sampled parameter vectors, inflated by 1.5.
pub fn estimate_lip_rs(
    data: &Dataset,
    act: Activation,
    shape: NetworkShape,
    cube_m: f64,
    n_probe: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if !(cube_m > 0.0 && cube_m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "estimate_lip_rs needs cube_m > 0, got {cube_m}"
        )));
    }
    if n_probe == 0 {
        return Err(Error::InvalidParameter("estimate_lip_rs needs n_probe >= 1".into()));
    }
    let count = shape.flat_len();
    let mut best = 0.0_f64;
    for _ in 0..n_probe {
        let flat: Vec<f64> = (0..count).map(|_| rng.uniform(-cube_m, cube_m)).collect();
        let theta = Params::from_flat(shape, &flat)?;
        best = best.max(grad_norm(&theta, data, act)?);
    }
    Ok(1.5 * best)
}

/// Result of one Armijo backtracking step.
#[derive(Debug, Clone)]
pub struct Backtrack {
    pub params: Params,
    pub alpha_used: f64,
    /// False when 60 shrinks never satisfied the Armijo condition; the
    /// returned iterate is then unchanged.
    pub accepted: bool,
}

/// Standard Armijo backtracking on R_S along the simultaneous negative
/// gradient: accept the first α with
/// R_S(θ − α∇) ≤ R_S(θ) − armijo_c · α · ‖∇‖².
pub fn backtracking_step(
    params: &Params,
    data: &Dataset,
    act: Activation,
    alpha0: f64,
    shrink: f64,
    armijo_c: f64,
) -> Result<Backtrack> {
    if !(alpha0 > 0.0) || !(shrink > 0.0 && shrink < 1.0) || !(armijo_c > 0.0 && armijo_c < 1.0) {
        return Err(Error::InvalidParameter(
            "backtracking needs alpha0 > 0, 0 < shrink < 1, 0 < armijo_c < 1".into(),
        ));
    }
    let grad = simultaneous_gradient(params, data, act)?;
    let gnorm_sq = grad.norm().powi(2);
    let base_risk = mse_risk(params, act, data)?;
    if gnorm_sq == 0.0 {
        // Stationary point: the zero step is accepted immediately.
        return Ok(Backtrack {
            params: params.clone(),
            alpha_used: alpha0,
            accepted: true,
        });
    }
    let mut alpha = alpha0;
    for _ in 0..60 {
        let mut cand = params.clone();
        for (w, g) in cand.w1.as_mut_slice().iter_mut().zip(grad.w1.as_slice()) {
            *w -= alpha * g;
        }
        for (b, g) in cand.b1.as_mut_slice().iter_mut().zip(grad.b1.as_slice()) {
            *b -= alpha * g;
        }
        for (w, g) in cand.w2.as_mut_slice().iter_mut().zip(grad.w2.as_slice()) {
            *w -= alpha * g;
        }
        cand.b2 -= alpha * grad.b2;
        if cand.validate().is_ok() {
            let risk = mse_risk(&cand, act, data)?;
            if risk <= base_risk - armijo_c * alpha * gnorm_sq {
                return Ok(Backtrack {
                    params: cand,
                    alpha_used: alpha,
                    accepted: true,
                });
            }
        }
        alpha *= shrink;
    }
    Ok(Backtrack {
        params: params.clone(),
        alpha_used: 0.0,
        accepted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use approx::assert_relative_eq;

    fn unit_config(steps: usize) -> TrainConfig {
        TrainConfig {
            shape: NetworkShape::new(1, 1).unwrap(),
            activation: Activation::Identity,
            scheduler: SchedulerConfig {
                mode: LrMode::Constant {
                    alpha: 0.1,
                    enforce_caps: false,
                },
                ..SchedulerConfig::default()
            },
            steps,
            seed: 3,
            loss: LossConfig::default(),
            log_every: 1,
            lip_domain: None,
            lip_samples: 8,
            bias_init: BiasInit::Zero,
            simultaneous: false,
            lip_probes: 8,
            init_scale: Default::default(),
        }
    }

    fn unit_instance() -> (Params, Dataset) {
        let params = Params {
            w1: Matrix::from_rows(&[vec![1.0]]).unwrap(),
            b1: Vector::from_vec(vec![0.0]),
            w2: Vector::from_vec(vec![1.0]),
            b2: 0.0,
        };
        let data = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![0.0]),
        )
        .unwrap();
        (params, data)
    }

    #[test]
    fn gd_step_hand_computed_sequence() {
        // d = p = N = 1, identity activation, all α = 0.1. Worked by hand:
        // W: 1 → 0.8, then b: 0 → −0.16, then B: 1 → 0.91808,
        // then c: 0 → −0.2·(0.91808·0.64) = −0.11751424.
        let (params, data) = unit_instance();
        let sched = SchedulerConfig {
            mode: LrMode::Constant {
                alpha: 0.1,
                enforce_caps: false,
            },
            ..SchedulerConfig::default()
        };
        let (next, lr) = gd_step(&params, &data, Activation::Identity, &sched, 1.0, None).unwrap();
        assert_relative_eq!(next.w1.get(0, 0), 0.8, max_relative = 1e-12);
        assert_relative_eq!(next.b1[0], -0.16, max_relative = 1e-12);
        assert_relative_eq!(next.w2[0], 0.91808, max_relative = 1e-12);
        assert_relative_eq!(next.b2, -0.11751424, max_relative = 1e-12);
        assert_eq!(lr.alpha_w1, 0.1);
    }

    #[test]
    fn gd_step_zero_alpha_is_identity() {
        let (params, data) = unit_instance();
        let sched = SchedulerConfig {
            mode: LrMode::Constant {
                alpha: 0.0,
                enforce_caps: false,
            },
            ..SchedulerConfig::default()
        };
        let (next, _) = gd_step(&params, &data, Activation::Identity, &sched, 1.0, None).unwrap();
        assert_eq!(next, params);
    }

    #[test]
    fn gd_step_zero_residual_is_identity() {
        // Perfect fit: f(1) = 1 matches y = 1, so every block gradient is 0.
        let (params, _) = unit_instance();
        let perfect = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![1.0]),
        )
        .unwrap();
        let sched = SchedulerConfig {
            mode: LrMode::Constant {
                alpha: 0.1,
                enforce_caps: false,
            },
            ..SchedulerConfig::default()
        };
        let (next, _) = gd_step(&params, &perfect, Activation::Identity, &sched, 1.0, None).unwrap();
        assert_eq!(next, params);
    }

    #[test]
    fn grad_norm_zero_at_interpolation() {
        let (params, _) = unit_instance();
        let perfect = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![1.0]),
        )
        .unwrap();
        assert_eq!(grad_norm(&params, &perfect, Activation::Identity).unwrap(), 0.0);
    }

    #[test]
    fn grad_norm_matches_finite_differences() {
        let mut rng = Rng::new(17);
        for _ in 0..10 {
            let shape = NetworkShape::new(2, 3).unwrap();
            let params = init_params(shape, &mut rng, BiasInit::Gaussian).unwrap();
            let xs = crate::linalg::gaussian_matrix(4, 2, &mut rng).unwrap();
            let ys = crate::linalg::gaussian_vector(4, &mut rng);
            let data = Dataset::new(xs, ys).unwrap();
            let act = Activation::Swish;
            let grad = simultaneous_gradient(&params, &data, act).unwrap();

            let flat = params.to_flat();
            let grad_flat = {
                let g = Gradient {
                    w1: grad.w1.clone(),
                    b1: grad.b1.clone(),
                    w2: grad.w2.clone(),
                    b2: grad.b2,
                };
                let p = Params {
                    w1: g.w1,
                    b1: g.b1,
                    w2: g.w2,
                    b2: g.b2,
                };
                p.to_flat()
            };
            let h = 1e-5;
            for k in 0..flat.len() {
                let mut up = flat.clone();
                let mut dn = flat.clone();
                up[k] += h;
                dn[k] -= h;
                let fu = mse_risk(&Params::from_flat(shape, &up).unwrap(), act, &data).unwrap();
                let fd = mse_risk(&Params::from_flat(shape, &dn).unwrap(), act, &data).unwrap();
                let fd_grad = (fu - fd) / (2.0 * h);
                let scale = grad_flat[k].abs().max(1e-6);
                assert!(
                    ((grad_flat[k] - fd_grad) / scale).abs() < 1e-5,
                    "coords {k}: analytic {} vs fd {fd_grad}",
                    grad_flat[k]
                );
            }
        }
    }

    #[test]
    fn grad_scales_linearly_with_residual_for_identity() {
        // With identity activation and y ↦ f(x) − s·r the residual scales by s
        // at fixed Θ, so the gradient does too.
        let (params, _) = unit_instance();
        let mk = |y: f64| {
            Dataset::new(
                Matrix::from_rows(&[vec![1.0]]).unwrap(),
                Vector::from_vec(vec![y]),
            )
            .unwrap()
        };
        let g1 = grad_norm(&params, &mk(0.0), Activation::Identity).unwrap(); // residual 1
        let g3 = grad_norm(&params, &mk(-2.0), Activation::Identity).unwrap(); // residual 3
        assert_relative_eq!(g3, 3.0 * g1, max_relative = 1e-12);
    }

    #[test]
    fn train_zero_steps_logs_initialization_only() {
        let config = unit_config(0);
        let (_, data) = unit_instance();
        let log = train(&config, &data).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].t, 0);
    }

    #[test]
    fn train_record_count_follows_stride() {
        let mut config = unit_config(5);
        config.log_every = 2;
        let (_, data) = unit_instance();
        let log = train(&config, &data).unwrap();
        let ts: Vec<usize> = log.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 2, 4]);
        assert_eq!(log.records.len(), 5 / 2 + 1);
    }

    #[test]
    fn train_deterministic_up_to_wallclock() {
        let mut config = unit_config(10);
        config.shape = NetworkShape::new(1, 4).unwrap();
        config.activation = Activation::Swish;
        let mut rng = Rng::new(5);
        let xs = crate::linalg::gaussian_matrix(6, 1, &mut rng).unwrap();
        let ys = crate::linalg::gaussian_vector(6, &mut rng);
        let data = Dataset::new(xs, ys).unwrap();
        let a = train(&config, &data).unwrap();
        let b = train(&config, &data).unwrap();
        assert!(a.same_numbers(&b));
    }

    #[test]
    fn constant_target_risk_non_increasing() {
        // Width-1 fit of a constant target: convex in the output bias, so a
        // small constant step keeps the risk non-increasing across seeds.
        for seed in 0..10 {
            let mut config = unit_config(60);
            config.seed = seed;
            config.activation = Activation::Swish;
            config.scheduler.mode = LrMode::Constant {
                alpha: 0.01,
                enforce_caps: false,
            };
            let xs = Matrix::from_rows(&[vec![0.4], vec![-0.3], vec![1.1], vec![0.0]]).unwrap();
            let ys = Vector::from_vec(vec![0.7; 4]);
            let data = Dataset::new(xs, ys).unwrap();
            let log = train(&config, &data).unwrap();
            for pair in log.records.windows(2) {
                assert!(
                    pair[1].mse_risk <= pair[0].mse_risk + 1e-12,
                    "seed {seed}: risk rose from {} to {} at t={}",
                    pair[0].mse_risk,
                    pair[1].mse_risk,
                    pair[1].t
                );
            }
        }
    }

    #[test]
    fn log_round_trips_through_files() {
        let mut config = unit_config(4);
        config.shape = NetworkShape::new(1, 3).unwrap();
        let mut rng = Rng::new(2);
        let xs = crate::linalg::gaussian_matrix(5, 1, &mut rng).unwrap();
        let ys = crate::linalg::gaussian_vector(5, &mut rng);
        let data = Dataset::new(xs, ys).unwrap();
        let log = train(&config, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, json_path) = log.write_files(dir.path(), 2).unwrap();
        let back = TrainLog::load_files(&csv_path, &json_path).unwrap();
        assert!(log.same_numbers(&back));
        assert_eq!(log.config, back.config);
    }

    #[test]
    fn estimate_lip_rs_constant_risk_is_zero() {
        // A dataset whose target equals the (constant-zero) network on a
        // width where every probe is still the zero function is impossible;
        // instead check the monotonicity contract and the constant case via
        // zero-variance probing on a degenerate cube.
        let (_, data) = unit_instance();
        let shape = NetworkShape::new(1, 2).unwrap();
        let mut rng = Rng::new(1);
        let small = estimate_lip_rs(&data, Activation::Swish, shape, 1e-9, 16, &mut rng).unwrap();
        assert!(small < 1e-6, "near-zero cube should give near-zero estimate, got {small}");

        let mut rng_a = Rng::new(1);
        let mut rng_b = Rng::new(1);
        let m1 = estimate_lip_rs(&data, Activation::Swish, shape, 1.0, 32, &mut rng_a).unwrap();
        let m2 = estimate_lip_rs(&data, Activation::Swish, shape, 3.0, 32, &mut rng_b).unwrap();
        assert!(m2 >= m1, "larger cube should not shrink the estimate");
    }

    #[test]
    fn estimate_lip_rs_quadratic_toy_within_factor_two() {
        // Width 1, identity activation, single sample (x, y) = (1, 0):
        // R(θ) = (w2(w1 + b1) + b2)². Analytic gradient maximization over the
        // cube is a smooth box-constrained problem; a dense corner/grid scan
        // is the oracle.
        let data = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![0.0]),
        )
        .unwrap();
        let shape = NetworkShape::new(1, 1).unwrap();
        let act = Activation::Identity;
        let m = 1.0;

        let mut oracle = 0.0_f64;
        let grid = 21;
        for a in 0..grid {
            for b in 0..grid {
                for c in 0..grid {
                    for d in 0..grid {
                        let f = |k: usize| -1.0 + 2.0 * k as f64 / (grid - 1) as f64;
                        let theta = Params::from_flat(shape, &[f(a), f(b), f(c), f(d)]).unwrap();
                        oracle = oracle.max(grad_norm(&theta, &data, act).unwrap());
                    }
                }
            }
        }

        let mut rng = Rng::new(9);
        let est = estimate_lip_rs(&data, act, shape, m, 4096, &mut rng).unwrap();
        // est carries a 1.5 inflation; require agreement within 2x either way.
        assert!(est >= oracle / 2.0 && est <= oracle * 2.0,
            "estimate {est} vs oracle {oracle}");
    }

    #[test]
    fn backtracking_at_stationary_point() {
        let params = Params {
            w1: Matrix::from_rows(&[vec![1.0]]).unwrap(),
            b1: Vector::from_vec(vec![0.0]),
            w2: Vector::from_vec(vec![1.0]),
            b2: 0.0,
        };
        let perfect = Dataset::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Vector::from_vec(vec![1.0]),
        )
        .unwrap();
        let out = backtracking_step(&params, &perfect, Activation::Identity, 1.0, 0.5, 0.1).unwrap();
        assert!(out.accepted);
        assert_eq!(out.params, params);
    }

    #[test]
    fn backtracking_satisfies_armijo_and_converges_on_toy() {
        let data = Dataset::new(
            Matrix::from_rows(&[vec![1.0], vec![-0.5], vec![0.25]]).unwrap(),
            Vector::from_vec(vec![0.5, -0.25, 0.125]),
        )
        .unwrap();
        let shape = NetworkShape::new(1, 1).unwrap();
        let act = Activation::Identity;
        let mut params = init_params(shape, &mut Rng::new(4), BiasInit::Zero).unwrap();
        let mut risk = mse_risk(&params, act, &data).unwrap();
        for step in 0..200 {
            let g = grad_norm(&params, &data, act).unwrap();
            let out = backtracking_step(&params, &data, act, 1.0, 0.5, 1e-4).unwrap();
            let new_risk = mse_risk(&out.params, act, &data).unwrap();
            assert!(
                new_risk <= risk - 1e-4 * out.alpha_used * g * g + 1e-12,
                "Armijo violated at step {step}"
            );
            params = out.params;
            risk = new_risk;
            if risk < 1e-6 {
                return;
            }
        }
        panic!("toy regression failed to interpolate within 200 steps: risk {risk}");
    }
}
