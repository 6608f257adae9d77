//! Experiment configuration: one JSON file drives `train` and `sweep`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::data::{NoiseModel, TargetFunction};
use crate::trainer::TrainConfig;

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Sample size.
    N,
    /// Hidden width (the parameter count P = (1+d)(p+1) moves with it).
    P,
    /// Noise level β.
    Beta,
}

/// A comparison arm of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Learning rates honor the decay caps, in whatever cap-enforcing mode
    /// the experiment's scheduler configures.
    Decay,
    /// Vanilla GD at a fixed step size.
    Constant,
}

impl Arm {
    pub fn label(&self) -> &'static str {
        match self {
            Arm::Decay => "decay",
            Arm::Constant => "constant",
        }
    }
}

fn default_arms() -> Vec<Arm> {
    vec![Arm::Decay, Arm::Constant]
}

fn default_constant_alpha() -> f64 {
    0.01
}

fn default_seeds() -> usize {
    20
}

fn default_test_samples() -> usize {
    4000
}

/// Multi-seed sweep over one axis, with paired comparison arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    /// Step size of the constant arm.
    #[serde(default = "default_constant_alpha")]
    pub constant_alpha: f64,
    /// Fresh-draw count for the held-out Huber test risk per cell.
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one axis value".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::Config("sweep needs n_seeds >= 1".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::Config("sweep needs at least one arm".into()));
        }
        for v in &self.values {
            let ok = match self.axis {
                SweepAxis::N | SweepAxis::P => v.fract() == 0.0 && *v >= 1.0,
                SweepAxis::Beta => *v >= 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!(
                    "bad value {v} for sweep axis {:?}",
                    self.axis
                )));
            }
        }
        Ok(())
    }
}

/// Everything one experiment needs: data process, base training config, and
/// optionally a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub target: TargetFunction,
    #[serde(default)]
    pub beta: f64,
    pub n_samples: usize,
    /// Truncate inputs to [−x_max, x_max] (compact support).
    #[serde(default)]
    pub x_max: Option<f64>,
    pub train: TrainConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || self
                .name
                .chars()
                .any(|c| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        {
            return Err(Error::Config(
                "experiment name must be non-empty and filesystem-friendly".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        NoiseModel { beta: self.beta }.validate()?;
        self.target.compile()?;
        self.train.validate()?;
        if self.train.shape.d != 1 {
            return Err(Error::Config(
                "the experiment harness generates univariate data (d = 1)".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel { beta: self.beta }
    }

    pub fn from_json_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let json = r#"{
            "name": "quickstart",
            "target": {"kind": "sine"},
            "beta": 0.05,
            "n_samples": 50,
            "train": {"shape": {"d": 1, "p": 50}, "steps": 50, "seed": 7}
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
        assert_eq!(config.train.log_every, 1);
        assert_eq!(config.train.lip_samples, 512);
        assert!(config.sweep.is_none());
    }

    #[test]
    fn sweep_config_parses() {
        let json = r#"{
            "name": "n-sweep",
            "target": {"kind": "cubic_sqrt"},
            "beta": 0.03,
            "n_samples": 100,
            "train": {"shape": {"d": 1, "p": 200}, "steps": 100, "seed": 1},
            "sweep": {"axis": "n", "values": [25, 100, 400], "n_seeds": 20}
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
        let sweep = config.sweep.unwrap();
        assert_eq!(sweep.axis, SweepAxis::N);
        assert_eq!(sweep.arms, vec![Arm::Decay, Arm::Constant]);
        assert_eq!(sweep.constant_alpha, 0.01);
    }

    #[test]
    fn rejects_bad_values() {
        let mut spec = SweepSpec {
            axis: SweepAxis::N,
            values: vec![25.5],
            n_seeds: 2,
            arms: default_arms(),
            constant_alpha: 0.01,
            test_samples: 100,
        };
        assert!(spec.validate().is_err());
        spec.values = vec![25.0];
        spec.validate().unwrap();
        spec.axis = SweepAxis::Beta;
        spec.values = vec![-0.1];
        assert!(spec.validate().is_err());
    }
}
