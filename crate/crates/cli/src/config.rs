//! JSON experiment configuration: one `command` plus its parameter block.
//! Validation happens eagerly so every downstream operation's preconditions
//! are decidable from the config alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qet_core::rng::SeedSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    pub seed: SeedSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub format: Option<ReportFormat>,
    pub params: CommandParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Moments,
    Tails,
    BoundsGrid,
    Equilibrate,
    TheoremT1,
    TheoremMain,
    CalibrateConstants,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::Moments => "moments",
            CommandName::Tails => "tails",
            CommandName::BoundsGrid => "bounds-grid",
            CommandName::Equilibrate => "equilibrate",
            CommandName::TheoremT1 => "theorem-t1",
            CommandName::TheoremMain => "theorem-main",
            CommandName::CalibrateConstants => "calibrate-constants",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "moments" => CommandName::Moments,
            "tails" => CommandName::Tails,
            "bounds-grid" => CommandName::BoundsGrid,
            "equilibrate" => CommandName::Equilibrate,
            "theorem-t1" => CommandName::TheoremT1,
            "theorem-main" => CommandName::TheoremMain,
            "calibrate-constants" => CommandName::CalibrateConstants,
            _ => return None,
        })
    }
}

/// Block profile plus the redundant declared total, cross-checked on
/// validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub dims: Vec<usize>,
    pub total_dim: usize,
}

impl ProfileSpec {
    pub fn validate(&self, field: &str) -> Result<qet_core::DimensionProfile, ConfigError> {
        let sum: usize = self.dims.iter().sum();
        if sum != self.total_dim {
            return Err(invalid(
                &format!("{field}.total_dim"),
                format!("dims sum to {sum}, declared total is {}", self.total_dim),
            ));
        }
        qet_core::DimensionProfile::new(self.dims.clone())
            .map_err(|e| invalid(&format!("{field}.dims"), e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommandParams {
    Moments(MomentsParams),
    Tails(TailsParams),
    BoundsGrid(BoundsGridParams),
    Equilibrate(EquilibrateParams),
    Theorem(TheoremParams),
    Calibrate(CalibrateParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    #[serde(flatten)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub block: usize,
    pub n_samples: usize,
    #[serde(default = "default_mode")]
    pub mode: qet_core::moments::SampleMode,
}

fn default_mode() -> qet_core::moments::SampleMode {
    qet_core::moments::SampleMode::VaryState
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsParams {
    pub d: usize,
    pub total_dim: usize,
    pub thresholds: Vec<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsGridParams {
    #[serde(default = "default_diag_d")]
    pub diag_d_values: Vec<usize>,
    #[serde(default = "default_diag_dim")]
    pub diag_dim_values: Vec<usize>,
    /// Positions of sqrt(a) inside the admissible window (0, 1): fractions
    /// of the way from 1/D to d/(8D).
    #[serde(default = "default_fractions")]
    pub sqrt_a_fractions: Vec<f64>,
    #[serde(default = "default_off_d")]
    pub offdiag_d_values: Vec<usize>,
    #[serde(default = "default_off_dim")]
    pub offdiag_dim_values: Vec<usize>,
    #[serde(default = "default_off_a")]
    pub offdiag_a_values: Vec<f64>,
}

fn default_diag_d() -> Vec<usize> {
    vec![48, 64, 96, 128]
}
fn default_diag_dim() -> Vec<usize> {
    vec![1000, 2000, 4000, 7000, 10_000]
}
fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_off_d() -> Vec<usize> {
    vec![2, 3, 4, 5, 6, 8]
}
fn default_off_dim() -> Vec<usize> {
    vec![20, 30, 40, 60, 80, 120, 160]
}
fn default_off_a() -> Vec<f64> {
    vec![0.01, 0.03, 0.08, 0.15, 0.22]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibrateParams {
    #[serde(flatten)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub block: usize,
    pub horizons: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremParams {
    #[serde(flatten)]
    pub profile: ProfileSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub n_decompositions: usize,
    /// Sampled states per decomposition (uniform-estimate experiment only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_states: Option<usize>,
    /// Diagnostic time grid (per-state experiment only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_grid: Option<Vec<f64>>,
    /// Window constant for the uniform-estimate dimension hypothesis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c1: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateParams {
    /// `(d, D)` pairs probed by the g-integral calibration.
    #[serde(default = "default_calibrate_profiles")]
    pub gnu_points: Vec<(usize, usize)>,
    #[serde(default = "default_calibrate_mc")]
    pub n_mc: usize,
    /// Candidate window constants, tried in order.
    #[serde(default = "default_candidates")]
    pub candidates: Vec<f64>,
}

fn default_calibrate_profiles() -> Vec<(usize, usize)> {
    vec![(8, 32), (16, 64), (16, 96), (32, 128)]
}
fn default_calibrate_mc() -> usize {
    2000
}
fn default_candidates() -> Vec<f64> {
    vec![1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0]
}

/// Parse shim: the command tag selects the parameter type, so field errors
/// come back with the exact field name instead of an untagged-enum blur.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: CommandName,
    seed: SeedSpec,
    #[serde(default)]
    out: Option<String>,
    #[serde(default)]
    format: Option<ReportFormat>,
    params: serde_json::Value,
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let params = match raw.command {
            CommandName::Moments => CommandParams::Moments(serde_json::from_value(raw.params)?),
            CommandName::Tails => CommandParams::Tails(serde_json::from_value(raw.params)?),
            CommandName::BoundsGrid => {
                CommandParams::BoundsGrid(serde_json::from_value(raw.params)?)
            }
            CommandName::Equilibrate => {
                CommandParams::Equilibrate(serde_json::from_value(raw.params)?)
            }
            CommandName::TheoremT1 | CommandName::TheoremMain => {
                CommandParams::Theorem(serde_json::from_value(raw.params)?)
            }
            CommandName::CalibrateConstants => {
                CommandParams::Calibrate(serde_json::from_value(raw.params)?)
            }
        };
        let cfg = ExperimentConfig {
            command: raw.command,
            seed: raw.seed,
            out: raw.out,
            format: raw.format,
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Semantic validation beyond what the type system carries.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.command, &self.params) {
            (CommandName::Moments, CommandParams::Moments(p)) => {
                let profile = p.profile.validate("params")?;
                if p.block >= profile.n_blocks() {
                    return Err(invalid(
                        "params.block",
                        format!(
                            "block {} out of range for {} blocks",
                            p.block,
                            profile.n_blocks()
                        ),
                    ));
                }
                if p.n_samples < 2 {
                    return Err(invalid("params.n_samples", "need at least 2 samples"));
                }
            }
            (CommandName::Tails, CommandParams::Tails(p)) => {
                if p.d < 1 || p.d + 1 > p.total_dim {
                    return Err(invalid("params.d", "require 1 <= d <= D-1"));
                }
                if p.n_samples < 2 {
                    return Err(invalid("params.n_samples", "need at least 2 samples"));
                }
                let ratio = p.d as f64 / p.total_dim as f64;
                for (i, &a) in p.thresholds.iter().enumerate() {
                    if a < 0.0 {
                        return Err(invalid(
                            &format!("params.thresholds[{i}]"),
                            "thresholds must be nonnegative",
                        ));
                    }
                    let s = a.sqrt();
                    if a > 0.0 && (s >= ratio || s + ratio >= 1.0) {
                        return Err(invalid(
                            &format!("params.thresholds[{i}]"),
                            format!(
                                "sqrt(a) = {s} outside the diagonal-tail domain for d/D = {ratio}"
                            ),
                        ));
                    }
                    if a > 0.25 {
                        return Err(invalid(
                            &format!("params.thresholds[{i}]"),
                            "off-diagonal thresholds cannot exceed 1/4",
                        ));
                    }
                }
                if p.d < 2 || p.d + 2 > p.total_dim {
                    return Err(invalid(
                        "params.d",
                        "off-diagonal tail requires 1 < d < D-1",
                    ));
                }
            }
            (CommandName::BoundsGrid, CommandParams::BoundsGrid(p)) => {
                if p.sqrt_a_fractions.iter().any(|&f| !(0.0 < f && f < 1.0)) {
                    return Err(invalid(
                        "params.sqrt_a_fractions",
                        "fractions must lie strictly inside (0, 1)",
                    ));
                }
                if p.offdiag_a_values
                    .iter()
                    .any(|&a| !(0.0..0.25).contains(&a))
                {
                    return Err(invalid(
                        "params.offdiag_a_values",
                        "off-diagonal thresholds must lie in [0, 1/4)",
                    ));
                }
            }
            (CommandName::Equilibrate, CommandParams::Equilibrate(p)) => {
                let profile = p.profile.validate("params")?;
                if p.block >= profile.n_blocks() {
                    return Err(invalid("params.block", "block index out of range"));
                }
                if p.horizons.is_empty() || p.horizons.iter().any(|&t| !(t > 0.0)) {
                    return Err(invalid("params.horizons", "horizons must be positive"));
                }
                if profile.total() > 32 {
                    return Err(invalid(
                        "params.total_dim",
                        "exact expansion supports total dimension up to 32",
                    ));
                }
            }
            (CommandName::TheoremT1, CommandParams::Theorem(p))
            | (CommandName::TheoremMain, CommandParams::Theorem(p)) => {
                p.profile.validate("params")?;
                if !(p.epsilon > 0.0) {
                    return Err(invalid("params.epsilon", "must be positive"));
                }
                for (name, v) in [("delta", p.delta), ("delta_prime", p.delta_prime)] {
                    if !(v > 0.0 && v < 1.0) {
                        return Err(invalid(&format!("params.{name}"), "must lie in (0, 1)"));
                    }
                }
                if p.n_decompositions == 0 {
                    return Err(invalid("params.n_decompositions", "need at least 1"));
                }
                if self.command == CommandName::TheoremMain && p.n_states.unwrap_or(0) == 0 {
                    return Err(invalid(
                        "params.n_states",
                        "uniform-estimate experiment needs at least 1 state",
                    ));
                }
            }
            (CommandName::CalibrateConstants, CommandParams::Calibrate(p)) => {
                if p.gnu_points.iter().any(|&(d, dim)| d < 1 || d + 1 > dim) {
                    return Err(invalid(
                        "params.gnu_points",
                        "each point needs 1 <= d <= D-1",
                    ));
                }
                if p.n_mc < 2 {
                    return Err(invalid("params.n_mc", "need at least 2 samples"));
                }
                if p.candidates.is_empty() {
                    return Err(invalid("params.candidates", "need at least one candidate"));
                }
            }
            (cmd, _) => {
                return Err(invalid(
                    "params",
                    format!("parameter block does not match command `{}`", cmd.as_str()),
                ));
            }
        }
        Ok(())
    }
}
