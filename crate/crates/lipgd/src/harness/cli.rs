//! Command-line interface: `train`, `sweep`, `verify`, and `plot`.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure,
//! 3 verification FAIL.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{audit_trajectory, BoundReport};
use crate::error::Error;
use crate::harness::config::ExperimentConfig;
use crate::harness::data::generate_dataset;
use crate::harness::plot::emit_plots_from_csv;
use crate::harness::sweep::run_sweep;
use crate::linalg::{streams, Rng};
use crate::trainer::{train, TrainLog};

#[derive(Parser, Debug)]
#[command(
    name = "lipgd",
    about = "Train two-layer MLPs under learning-rate decay caps and audit the Lipschitz bounds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one training job from a JSON config.
    Train {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (run files land in <out>/<name>/).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a multi-seed sweep with comparison arms.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit recorded trajectories against every bound.
    Verify {
        /// Run directory containing log_seed*.csv (searched recursively),
        /// or a single log CSV.
        #[arg(long)]
        log: PathBuf,
    },
    /// Render SVG plots from an aggregate.csv.
    Plot {
        /// Directory containing aggregate.csv (or the file itself).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::Json(_)
        | Error::Expr(_)
        | Error::MissingColumn(_) => 1,
        _ => 2,
    }
}

/// Entry point behind the binary; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help text; --help and --version are
            // successful outcomes.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Train { config, out } => cmd_train(&config, &out),
        Command::Sweep { config, out } => cmd_sweep(&config, &out),
        Command::Verify { log } => cmd_verify(&log),
        Command::Plot { input, out } => cmd_plot(&input, &out),
    }
}

fn cmd_train(config_path: &Path, out: &Path) -> i32 {
    let config = match ExperimentConfig::from_json_file(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    let run = || -> crate::Result<()> {
        let run_dir = out.join(&config.name);
        std::fs::create_dir_all(&run_dir)?;
        let mut data_rng = Rng::with_stream(config.train.seed, streams::DATA);
        let data = generate_dataset(
            &config.target,
            config.noise(),
            config.n_samples,
            &mut data_rng,
            config.x_max,
        )?;
        data.to_csv_file(run_dir.join("dataset.csv"))?;
        let log = train(&config.train, &data)?;
        let (csv_path, _) = log.write_files(&run_dir, config.train.seed)?;
        let last = log.records.last().expect("log has records");
        println!(
            "trained '{}': T={} mse={:.6} huber={:.6} lip_bound={:.4} -> {}",
            config.name,
            config.train.steps,
            last.mse_risk,
            last.huber_risk,
            last.lip_bound,
            csv_path.display()
        );
        Ok(())
    };
    match run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("train failed: {e}");
            exit_code_for(&e)
        }
    }
}

fn cmd_sweep(config_path: &Path, out: &Path) -> i32 {
    let config = match ExperimentConfig::from_json_file(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    if config.sweep.is_none() {
        eprintln!("config error: '{}' has no sweep section", config.name);
        return 1;
    }
    match run_sweep(&config, out) {
        Ok(output) => {
            println!(
                "sweep '{}': {} aggregate rows, {} cells summarized -> {}",
                config.name,
                output.aggregate.len(),
                output.finals.len(),
                output.run_dir.display()
            );
            for failure in &output.failures {
                eprintln!("warning: {failure}");
            }
            if output.finals.is_empty() {
                eprintln!("sweep failed: every cell aborted");
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("sweep failed: {e}");
            exit_code_for(&e)
        }
    }
}

#[derive(Serialize)]
struct VerifyEntry {
    log: String,
    report: BoundReport,
}

#[derive(Serialize)]
struct VerifyDocument {
    logs_audited: usize,
    logs_skipped: usize,
    all_pass: bool,
    entries: Vec<VerifyEntry>,
}

fn find_logs(root: &Path) -> crate::Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    if root.is_file() {
        found.push(root.to_path_buf());
        return Ok(found);
    }
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                if name.starts_with("log_seed") && name.ends_with(".csv") {
                    found.push(path);
                }
            }
        }
    }
    found.sort();
    Ok(found)
}

fn cmd_verify(log_path: &Path) -> i32 {
    let run = || -> crate::Result<(VerifyDocument, PathBuf)> {
        let logs = find_logs(log_path)?;
        if logs.is_empty() {
            return Err(Error::Config(format!(
                "no log_seed*.csv found under {}",
                log_path.display()
            )));
        }
        let mut entries = Vec::new();
        let mut skipped = 0usize;
        for csv_path in &logs {
            let sidecar = csv_path.with_extension("json");
            let log = TrainLog::load_files(csv_path, &sidecar)?;
            match audit_trajectory(&log) {
                Ok(report) => entries.push(VerifyEntry {
                    log: csv_path.display().to_string(),
                    report,
                }),
                Err(Error::Config(_)) => skipped += 1, // constant-LR arm logs
                Err(e) => return Err(e),
            }
        }
        if entries.is_empty() {
            return Err(Error::Config(
                "no auditable logs (all runs used an uncapped constant learning rate)".into(),
            ));
        }
        let all_pass = entries.iter().all(|e| e.report.all_pass);
        let doc = VerifyDocument {
            logs_audited: entries.len(),
            logs_skipped: skipped,
            all_pass,
            entries,
        };
        let report_dir = if log_path.is_file() {
            log_path.parent().unwrap_or(Path::new(".")).to_path_buf()
        } else {
            log_path.to_path_buf()
        };
        let report_path = report_dir.join("bound_report.json");
        serde_json::to_writer_pretty(std::fs::File::create(&report_path)?, &doc)?;
        Ok((doc, report_path))
    };
    match run() {
        Ok((doc, report_path)) => {
            // One summary line per inequality family, merged across logs.
            let mut family_names: Vec<String> = Vec::new();
            for entry in &doc.entries {
                for family in &entry.report.families {
                    if !family_names.contains(&family.family) {
                        family_names.push(family.family.clone());
                    }
                }
            }
            for name in &family_names {
                let mut pass = true;
                let mut worst = f64::INFINITY;
                for entry in &doc.entries {
                    if let Some(f) = entry.report.family(name) {
                        pass &= f.pass;
                        worst = worst.min(f.worst_slack);
                    }
                }
                println!(
                    "{} {name} (worst slack {worst:.3e})",
                    if pass { "PASS" } else { "FAIL" }
                );
            }
            println!(
                "audited {} logs ({} skipped) -> {}",
                doc.logs_audited,
                doc.logs_skipped,
                report_path.display()
            );
            if doc.all_pass {
                0
            } else {
                3
            }
        }
        Err(e) => {
            eprintln!("verify failed: {e}");
            exit_code_for(&e)
        }
    }
}

fn cmd_plot(input: &Path, out: &Path) -> i32 {
    let csv_path = if input.is_file() {
        input.to_path_buf()
    } else {
        input.join("aggregate.csv")
    };
    match emit_plots_from_csv(&csv_path, out) {
        Ok(summary) => {
            println!(
                "wrote {} plots to {} ({} metrics skipped)",
                summary.written.len(),
                out.display(),
                summary.skipped.len()
            );
            0
        }
        Err(e) => {
            eprintln!("plot failed: {e}");
            exit_code_for(&e)
        }
    }
}
