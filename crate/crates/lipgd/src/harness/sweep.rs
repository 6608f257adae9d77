//! Multi-seed sweeps over N, P, or β with paired decay/constant arms,
//! per-cell logs on disk, and deterministic mean/std aggregation.
//!
//! Pairing: for a given seed index, every arm (and, off the P axis, every
//! axis value) sees the same initialization stream, the same dataset stream,
//! and the same held-out test draws, so arm comparisons are per-seed paired.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{Arm, ExperimentConfig, SweepAxis, SweepSpec};
use crate::harness::data::{generate_dataset, mc_sampler};
use crate::linalg::{mix_seed, streams, Rng};
use crate::losses::true_risk_mc;
use crate::scheduler::LrMode;
use crate::trainer::{train, IterationRecord, TrainConfig};

/// Per-cell end-of-run summary (one line of `final.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub axis: String,
    pub value: f64,
    pub arm: String,
    pub seed: usize,
    pub p: usize,
    pub param_count: usize,
    pub n: usize,
    pub beta: f64,
    pub final_lip_bound: f64,
    pub final_lip_empirical: f64,
    pub final_mse_risk: f64,
    pub final_huber_risk: f64,
    pub test_huber_risk: f64,
    pub test_std_error: f64,
    pub min_grad_norm: f64,
}

/// One aggregated row: mean and population std across seeds of every numeric
/// log column, at one (axis value, arm, t).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub axis: String,
    pub value: f64,
    pub arm: String,
    pub p: usize,
    pub param_count: usize,
    pub n: usize,
    pub beta: f64,
    pub t: usize,
    pub means: [f64; 21],
    pub stds: [f64; 21],
}

/// Everything a sweep produces.
#[derive(Debug)]
pub struct SweepOutput {
    pub aggregate: Vec<AggregateRow>,
    pub finals: Vec<CellSummary>,
    /// Human-readable descriptions of aborted cells.
    pub failures: Vec<String>,
    pub run_dir: PathBuf,
}

/// The training configuration and data-process parameters of one cell.
fn cell_setup(config: &ExperimentConfig, spec: &SweepSpec, value: f64, arm: Arm) -> (TrainConfig, usize, f64) {
    let mut train_cfg = config.train.clone();
    let mut n = config.n_samples;
    let mut beta = config.beta;
    match spec.axis {
        SweepAxis::N => n = value as usize,
        SweepAxis::P => train_cfg.shape.p = value as usize,
        SweepAxis::Beta => beta = value,
    }
    if arm == Arm::Constant {
        train_cfg.scheduler.mode = LrMode::Constant {
            alpha: spec.constant_alpha,
            enforce_caps: false,
        };
    }
    (train_cfg, n, beta)
}

struct CellOutcome {
    summary: CellSummary,
    records: Vec<IterationRecord>,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    config: &ExperimentConfig,
    spec: &SweepSpec,
    run_dir: &Path,
    value_idx: usize,
    value: f64,
    seed_idx: usize,
    arm: Arm,
) -> Result<CellOutcome> {
    let (mut train_cfg, n, beta) = cell_setup(config, spec, value, arm);
    let base_seed = config.train.seed;
    let cell_seed = mix_seed(base_seed, seed_idx as u64);
    train_cfg.seed = cell_seed;

    // Pairing across cells: on the P axis all widths share one dataset; on
    // the N axis every sample size is a prefix of the same max-N draw; on the
    // beta axis each noise level draws its own data.
    let data_salt = match spec.axis {
        SweepAxis::N | SweepAxis::P => 0,
        SweepAxis::Beta => value_idx as u64 + 1,
    };
    let data_seed = mix_seed(cell_seed, data_salt);
    let mut data_rng = Rng::with_stream(data_seed, streams::DATA);
    let noise = crate::harness::data::NoiseModel { beta };
    let data = match spec.axis {
        SweepAxis::N => {
            let n_max = spec.values.iter().fold(0.0_f64, |m, v| m.max(*v)) as usize;
            generate_dataset(&config.target, noise, n_max, &mut data_rng, config.x_max)?
                .prefix(n)?
        }
        _ => generate_dataset(&config.target, noise, n, &mut data_rng, config.x_max)?,
    };

    let log = train(&train_cfg, &data)?;

    let mut mc_rng = Rng::with_stream(data_seed, streams::MC);
    let sampler = mc_sampler(&config.target, crate::harness::data::NoiseModel { beta }, config.x_max)?;
    let test = true_risk_mc(
        &log.final_params,
        train_cfg.activation,
        sampler,
        spec.test_samples,
        &mut mc_rng,
        train_cfg.loss.huber_delta,
    )?;

    let cell_dir = run_dir
        .join(format!("value_{value}"))
        .join(arm.label());
    log.write_files(&cell_dir, seed_idx as u64)?;

    let last = log.records.last().expect("log always has records");
    let min_grad = log
        .records
        .iter()
        .map(|r| r.grad_norm)
        .fold(f64::INFINITY, f64::min);
    let summary = CellSummary {
        axis: axis_label(spec.axis).to_string(),
        value,
        arm: arm.label().to_string(),
        seed: seed_idx,
        p: train_cfg.shape.p,
        param_count: train_cfg.shape.param_count(),
        n,
        beta,
        final_lip_bound: last.lip_bound,
        final_lip_empirical: last.lip_empirical,
        final_mse_risk: last.mse_risk,
        final_huber_risk: last.huber_risk,
        test_huber_risk: test.mean,
        test_std_error: test.std_error,
        min_grad_norm: min_grad,
    };
    Ok(CellOutcome {
        summary,
        records: log.records,
    })
}

pub fn axis_label(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::N => "N",
        SweepAxis::P => "P",
        SweepAxis::Beta => "beta",
    }
}

/// Run the full sweep below `out_dir/<name>/`, writing per-cell logs,
/// `aggregate.csv`, and `final.csv`. Cells run concurrently; a failing cell
/// aborts only itself and is reported in `failures`.
pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<SweepOutput> {
    config.validate()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no sweep section".into()))?;
    let run_dir = out_dir.join(&config.name);
    std::fs::create_dir_all(&run_dir)?;

    let mut cells = Vec::new();
    for (value_idx, &value) in spec.values.iter().enumerate() {
        for seed_idx in 0..spec.n_seeds {
            for &arm in &spec.arms {
                cells.push((value_idx, value, seed_idx, arm));
            }
        }
    }

    let outcomes: Vec<(usize, f64, usize, Arm, Result<CellOutcome>)> = cells
        .par_iter()
        .map(|&(value_idx, value, seed_idx, arm)| {
            let outcome = run_cell(config, spec, &run_dir, value_idx, value, seed_idx, arm);
            (value_idx, value, seed_idx, arm, outcome)
        })
        .collect();

    let mut failures = Vec::new();
    let mut finals = Vec::new();
    // (value_idx, arm) -> per-seed record series, seed-ordered.
    let mut grouped: std::collections::BTreeMap<(usize, usize), Vec<(usize, Vec<IterationRecord>)>> =
        std::collections::BTreeMap::new();
    for (value_idx, value, seed_idx, arm, outcome) in outcomes {
        match outcome {
            Ok(cell) => {
                finals.push(cell.summary);
                let arm_idx = spec.arms.iter().position(|a| *a == arm).unwrap();
                grouped
                    .entry((value_idx, arm_idx))
                    .or_default()
                    .push((seed_idx, cell.records));
            }
            Err(e) => failures.push(format!(
                "cell value={value} seed={seed_idx} arm={}: {e}",
                arm.label()
            )),
        }
    }
    finals.sort_by(|a, b| {
        (a.value, &a.arm, a.seed)
            .partial_cmp(&(b.value, &b.arm, b.seed))
            .unwrap()
    });

    let mut aggregate = Vec::new();
    for ((value_idx, arm_idx), mut seed_logs) in grouped {
        seed_logs.sort_by_key(|(seed, _)| *seed);
        let value = spec.values[value_idx];
        let arm = spec.arms[arm_idx];
        let (train_cfg, n, beta) = cell_setup(config, spec, value, arm);
        let t_count = seed_logs[0].1.len();
        if seed_logs.iter().any(|(_, recs)| recs.len() != t_count) {
            failures.push(format!(
                "value={value} arm={}: inconsistent record counts across seeds, skipped in aggregate",
                arm.label()
            ));
            continue;
        }
        for row_idx in 0..t_count {
            let t = seed_logs[0].1[row_idx].t;
            let mut means = [0.0_f64; 21];
            let mut stds = [0.0_f64; 21];
            let k = seed_logs.len() as f64;
            for (_, recs) in &seed_logs {
                for (m, v) in means.iter_mut().zip(recs[row_idx].numeric_values()) {
                    *m += v;
                }
            }
            for m in means.iter_mut() {
                *m /= k;
            }
            for (_, recs) in &seed_logs {
                for (s, (m, v)) in stds
                    .iter_mut()
                    .zip(means.iter().zip(recs[row_idx].numeric_values()))
                {
                    *s += (v - m) * (v - m);
                }
            }
            for s in stds.iter_mut() {
                *s = (*s / k).sqrt();
            }
            aggregate.push(AggregateRow {
                axis: axis_label(spec.axis).to_string(),
                value,
                arm: arm.label().to_string(),
                p: train_cfg.shape.p,
                param_count: train_cfg.shape.param_count(),
                n,
                beta,
                t,
                means,
                stds,
            });
        }
    }

    write_aggregate_csv(&aggregate, &run_dir.join("aggregate.csv"))?;
    write_finals_csv(&finals, &run_dir.join("final.csv"))?;
    if !failures.is_empty() {
        std::fs::write(run_dir.join("failures.txt"), failures.join("\n"))?;
    }
    Ok(SweepOutput {
        aggregate,
        finals,
        failures,
        run_dir,
    })
}

// ---------------------------------------------------------------------------
// CSV I/O for aggregates
// ---------------------------------------------------------------------------

pub fn aggregate_header() -> Vec<String> {
    let mut header = vec![
        "axis".to_string(),
        "value".to_string(),
        "arm".to_string(),
        "p".to_string(),
        "P".to_string(),
        "N".to_string(),
        "beta".to_string(),
        "t".to_string(),
    ];
    for col in IterationRecord::NUMERIC_COLUMNS {
        header.push(format!("mean_{col}"));
    }
    for col in IterationRecord::NUMERIC_COLUMNS {
        header.push(format!("std_{col}"));
    }
    header
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path)?);
    w.write_record(aggregate_header())?;
    for row in rows {
        let mut fields = vec![
            row.axis.clone(),
            row.value.to_string(),
            row.arm.clone(),
            row.p.to_string(),
            row.param_count.to_string(),
            row.n.to_string(),
            row.beta.to_string(),
            row.t.to_string(),
        ];
        fields.extend(row.means.iter().map(|v| v.to_string()));
        fields.extend(row.stds.iter().map(|v| v.to_string()));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_reader(std::fs::File::open(path)?);
    let headers = reader.headers()?.clone();
    let expected = aggregate_header();
    for name in &expected {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let idx: Vec<usize> = expected
        .iter()
        .map(|name| headers.iter().position(|h| h == name.as_str()).unwrap())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |k: usize| -> Result<&str> {
            record
                .get(idx[k])
                .ok_or_else(|| Error::Config("short aggregate row".into()))
        };
        let parse = |k: usize| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad aggregate number: {e}")))
        };
        let mut means = [0.0_f64; 21];
        let mut stds = [0.0_f64; 21];
        for (j, m) in means.iter_mut().enumerate() {
            *m = parse(8 + j)?;
        }
        for (j, s) in stds.iter_mut().enumerate() {
            *s = parse(8 + 21 + j)?;
        }
        rows.push(AggregateRow {
            axis: get(0)?.to_string(),
            value: parse(1)?,
            arm: get(2)?.to_string(),
            p: parse(3)? as usize,
            param_count: parse(4)? as usize,
            n: parse(5)? as usize,
            beta: parse(6)?,
            t: parse(7)? as usize,
            means,
            stds,
        });
    }
    Ok(rows)
}

pub fn write_finals_csv(rows: &[CellSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path)?);
    w.write_record([
        "axis",
        "value",
        "arm",
        "seed",
        "p",
        "P",
        "N",
        "beta",
        "final_lip_bound",
        "final_lip_empirical",
        "final_mse_risk",
        "final_huber_risk",
        "test_huber_risk",
        "test_std_error",
        "min_grad_norm",
    ])?;
    for r in rows {
        w.write_record([
            r.axis.clone(),
            r.value.to_string(),
            r.arm.clone(),
            r.seed.to_string(),
            r.p.to_string(),
            r.param_count.to_string(),
            r.n.to_string(),
            r.beta.to_string(),
            r.final_lip_bound.to_string(),
            r.final_lip_empirical.to_string(),
            r.final_mse_risk.to_string(),
            r.final_huber_risk.to_string(),
            r.test_huber_risk.to_string(),
            r.test_std_error.to_string(),
            r.min_grad_norm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::TargetFunction;
    use crate::network::NetworkShape;
    use crate::scheduler::SchedulerConfig;
    use crate::trainer::TrainLog;

    fn small_config(arms: Vec<Arm>) -> ExperimentConfig {
        ExperimentConfig {
            name: "unit".into(),
            target: TargetFunction::Sine,
            beta: 0.05,
            n_samples: 6,
            x_max: None,
            train: TrainConfig {
                shape: NetworkShape::new(1, 3).unwrap(),
                activation: Default::default(),
                scheduler: SchedulerConfig::default(),
                steps: 2,
                seed: 11,
                loss: Default::default(),
                log_every: 1,
                lip_domain: None,
                lip_samples: 4,
                bias_init: Default::default(),
                simultaneous: false,
                lip_probes: 4,
                init_scale: Default::default(),
            },
            sweep: Some(SweepSpec {
                axis: SweepAxis::N,
                values: vec![6.0],
                n_seeds: 1,
                arms,
                constant_alpha: 0.01,
                test_samples: 32,
            }),
        }
    }

    #[test]
    fn single_cell_sweep_row_count() {
        let config = small_config(vec![Arm::Decay]);
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&config, dir.path()).unwrap();
        assert!(out.failures.is_empty());
        // T = 2 at stride 1: rows for t = 0, 1, 2.
        assert_eq!(out.aggregate.len(), 3);
        let text = std::fs::read_to_string(out.run_dir.join("aggregate.csv")).unwrap();
        assert_eq!(text.lines().count(), 4, "3 data rows + header");
    }

    #[test]
    fn aggregate_matches_recomputation_from_raw_logs() {
        let mut config = small_config(vec![Arm::Decay, Arm::Constant]);
        config.sweep.as_mut().unwrap().n_seeds = 3;
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&config, dir.path()).unwrap();
        assert!(out.failures.is_empty());

        // Recompute a mean/std from the raw per-seed logs on disk.
        let cell_dir = out.run_dir.join("value_6").join("decay");
        let mut logs = Vec::new();
        for seed in 0..3 {
            let log = TrainLog::load_files(
                &cell_dir.join(format!("log_seed{seed}.csv")),
                &cell_dir.join(format!("log_seed{seed}.json")),
            )
            .unwrap();
            logs.push(log);
        }
        let col = IterationRecord::NUMERIC_COLUMNS
            .iter()
            .position(|c| *c == "lip_bound")
            .unwrap();
        for (row_idx, row) in out
            .aggregate
            .iter()
            .filter(|r| r.arm == "decay")
            .enumerate()
        {
            let vals: Vec<f64> = logs
                .iter()
                .map(|l| l.records[row_idx].numeric_values()[col])
                .collect();
            let mean = vals.iter().sum::<f64>() / 3.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
            assert!((row.means[col] - mean).abs() < 1e-12);
            assert!((row.stds[col] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn arms_share_data_and_initialization() {
        let config = small_config(vec![Arm::Decay, Arm::Constant]);
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&config, dir.path()).unwrap();
        let load = |arm: &str| {
            TrainLog::load_files(
                &out.run_dir.join("value_6").join(arm).join("log_seed0.csv"),
                &out.run_dir.join("value_6").join(arm).join("log_seed0.json"),
            )
            .unwrap()
        };
        let a = load("decay");
        let b = load("constant");
        // Identical initialization record (t = 0) means same init and data.
        assert!(a.records[0].same_numbers(&b.records[0]));
        // But the arms then diverge.
        assert!(!a.records[2].same_numbers(&b.records[2]));
    }

    #[test]
    fn aggregate_round_trips_through_csv() {
        let config = small_config(vec![Arm::Decay]);
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&config, dir.path()).unwrap();
        let back = read_aggregate_csv(&out.run_dir.join("aggregate.csv")).unwrap();
        assert_eq!(out.aggregate.len(), back.len());
        for (a, b) in out.aggregate.iter().zip(back.iter()) {
            assert_eq!(a.t, b.t);
            for (x, y) in a.means.iter().zip(b.means.iter()) {
                assert_eq!(x, y, "means must round-trip bit-exactly");
            }
        }
    }
}
