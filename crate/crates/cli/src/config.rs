//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ifprony::{ModeSpec, PronyConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The four IF estimators the runner can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Prony,
    IfSr,
    IfFsstr,
    IfFsstrOg,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Prony,
        Estimator::IfSr,
        Estimator::IfFsstr,
        Estimator::IfFsstrOg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Prony => "prony",
            Estimator::IfSr => "if-sr",
            Estimator::IfFsstr => "if-fsstr",
            Estimator::IfFsstrOg => "if-fsstr-og",
        }
    }

    pub fn is_ridge(self) -> bool {
        self != Estimator::Prony
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                CliError::Config(format!(
                    "unknown estimator '{s}' (expected one of prony, if-sr, if-fsstr, if-fsstr-og)"
                ))
            })
    }
}

/// Parses a comma-separated estimator list.
pub fn parse_estimators(list: &str) -> Result<Vec<Estimator>, CliError> {
    let mut out: Vec<Estimator> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(CliError::Config("estimator list is empty".into()));
    }
    Ok(out)
}

/// A single window width or an inclusive linear sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Single(f64),
    Sweep { min: f64, max: f64, steps: usize },
}

impl SigmaSpec {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            SigmaSpec::Single(s) => vec![s],
            SigmaSpec::Sweep { min, steps: 1, .. } => vec![min],
            SigmaSpec::Sweep { min, max, steps } => (0..steps)
                .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        match *self {
            SigmaSpec::Single(s) if !(s.is_finite() && s > 0.0) => {
                Err(CliError::Config(format!("sigma must be positive, got {s}")))
            }
            SigmaSpec::Sweep { min, max, steps } => {
                if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) {
                    return Err(CliError::Config(format!(
                        "sigma sweep needs 0 < min <= max, got min={min} max={max}"
                    )));
                }
                if steps == 0 || (steps == 1 && max != min) {
                    return Err(CliError::Config(format!(
                        "sigma sweep from {min} to {max} needs at least 2 steps, got {steps}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for SigmaSpec {
    type Err = CliError;

    /// `0.04` or `min:max:steps`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Config(format!(
                "cannot parse sigma '{s}' (use 0.04 or 0.01:0.08:15)"
            ))
        };
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let spec = match parts.as_slice() {
            [v] => SigmaSpec::Single(v.parse().map_err(|_| bad())?),
            [lo, hi, n] => SigmaSpec::Sweep {
                min: lo.parse().map_err(|_| bad())?,
                max: hi.parse().map_err(|_| bad())?,
                steps: n.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn one() -> f64 {
    1.0
}

/// One mode of the synthetic signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModeConfig {
    Tone {
        #[serde(default = "one")]
        amplitude: f64,
        freq: f64,
    },
    Chirp {
        #[serde(default = "one")]
        amplitude: f64,
        freq: f64,
        rate: f64,
    },
    Fm {
        #[serde(default = "one")]
        amplitude: f64,
        freq: f64,
        depth: f64,
        rate: f64,
    },
}

impl ModeConfig {
    pub fn to_spec(self) -> ModeSpec {
        match self {
            ModeConfig::Tone { amplitude, freq } => ModeSpec::pure_tone(amplitude, freq),
            ModeConfig::Chirp {
                amplitude,
                freq,
                rate,
            } => ModeSpec::linear_chirp(amplitude, freq, rate),
            ModeConfig::Fm {
                amplitude,
                freq,
                depth,
                rate,
            } => ModeSpec::sinusoidal_fm(amplitude, freq, depth, rate),
        }
    }
}

/// Optional overrides of the Prony defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PronyOverrides {
    /// Number of modes P. Defaults to the number of synthetic modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    /// Number of Gaussian components Q.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    /// Truncation order M0 of the Fourier series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_half_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_negative_run: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_tol: Option<f64>,
}

impl PronyOverrides {
    pub fn build(&self, default_modes: usize) -> PronyConfig {
        let mut cfg = PronyConfig::new(self.modes.unwrap_or(default_modes));
        if let Some(q) = self.components {
            cfg = cfg.with_components(q);
        }
        if let Some(m0) = self.fourier_order {
            cfg.fourier_order = m0;
        }
        if let Some(r) = self.amplitude_ratio {
            cfg.amplitude_ratio = r;
        }
        if self.jump_hz.is_some() {
            cfg.jump_hz = self.jump_hz;
        }
        if let Some(w) = self.median_half_window {
            cfg.median_half_window = w;
        }
        if let Some(r) = self.min_negative_run {
            cfg.min_negative_run = r;
        }
        if let Some(c) = self.max_condition {
            cfg.max_condition = c;
        }
        if let Some(t) = self.radius_tol {
            cfg.radius_tol = t;
        }
        cfg
    }
}

fn default_name() -> String {
    "custom".into()
}
fn default_fs() -> f64 {
    1024.0
}
fn default_samples() -> usize {
    1024
}
fn default_bins() -> usize {
    512
}
fn default_sigma() -> SigmaSpec {
    SigmaSpec::Single(0.04)
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Prony]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Sampling rate in Hz. Ignored when `input` is set (the file carries it).
    #[serde(default = "default_fs")]
    pub fs: f64,
    /// Signal length N. Ignored when `input` is set.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Frequency bins K.
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_sigma")]
    pub sigma: SigmaSpec,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
    /// Raw signal CSV used instead of `modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub prony: PronyOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative `input` path is taken relative to
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(input), Some(dir)) = (&cfg.input, path.parent()) {
            if input.is_relative() {
                cfg.input = Some(dir.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(CliError::Config(format!(
                "fs must be positive, got {}",
                self.fs
            )));
        }
        if self.input.is_none() {
            if self.samples == 0 {
                return Err(CliError::Config("samples must be >= 1".into()));
            }
            if self.modes.is_empty() {
                return Err(CliError::Config(
                    "either [[modes]] or an input file is required".into(),
                ));
            }
            let duration = self.samples as f64 / self.fs;
            for m in &self.modes {
                m.to_spec()
                    .validate(duration)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        } else if !self.modes.is_empty() {
            return Err(CliError::Config(
                "give either [[modes]] or an input file, not both".into(),
            ));
        } else if self.prony.modes.is_none() {
            return Err(CliError::Config(
                "prony.modes is required when analysing a raw input signal".into(),
            ));
        }
        if self.bins < 2 {
            return Err(CliError::Config(format!(
                "bins must be >= 2, got {}",
                self.bins
            )));
        }
        self.sigma.validate()?;
        if self.estimators.is_empty() {
            return Err(CliError::Config("estimator set is empty".into()));
        }
        if self.mode_count() == 0 {
            return Err(CliError::Config("prony.modes must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of modes P the estimators look for.
    pub fn mode_count(&self) -> usize {
        self.prony.modes.unwrap_or(self.modes.len())
    }

    pub fn prony_config(&self) -> PronyConfig {
        self.prony.build(self.modes.len())
    }

    pub fn mode_specs(&self) -> Vec<ModeSpec> {
        self.modes.iter().map(|m| m.to_spec()).collect()
    }
}
