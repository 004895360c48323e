//! Experiment reports: per-metric records with verdicts, JSON/CSV emission,
//! atomic file writes.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::config::{ExperimentConfig, ReportFormat};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Recorded but not counted: the governing hypotheses do not apply.
    Skip,
}

impl Verdict {
    fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skip => "skip",
        }
    }

    pub fn from_check(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hypotheses_met: Option<bool>,
    pub verdict: Verdict,
    /// Name of the module invariant this verdict instantiates.
    pub invariant: String,
}

impl MetricRecord {
    pub fn new(name: impl Into<String>, invariant: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            closed_form: None,
            estimate: None,
            std_error: None,
            bound: None,
            hypotheses_met: None,
            verdict: Verdict::Pass,
            invariant: invariant.into(),
        }
    }

    pub fn closed_form(mut self, v: f64) -> Self {
        self.closed_form = Some(v);
        self
    }

    pub fn estimate(mut self, v: f64) -> Self {
        self.estimate = Some(v);
        self
    }

    pub fn std_error(mut self, v: f64) -> Self {
        self.std_error = Some(v);
        self
    }

    pub fn bound(mut self, v: f64) -> Self {
        self.bound = Some(v);
        self
    }

    pub fn hypotheses_met(mut self, v: bool) -> Self {
        self.hypotheses_met = Some(v);
        self
    }

    pub fn verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct VerdictSummary {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    /// Effective configuration (after flag overrides); replaying it with the
    /// embedded seed reproduces every number below.
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricRecord>,
    pub verdict_summary: VerdictSummary,
    /// Milliseconds of wall clock; the single field excluded from the
    /// reproducibility contract.
    pub wall_clock_ms: u64,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, metrics: Vec<MetricRecord>, wall_clock_ms: u64) -> Self {
        let mut summary = VerdictSummary::default();
        for m in &metrics {
            match m.verdict {
                Verdict::Pass => summary.pass += 1,
                Verdict::Fail => summary.fail += 1,
                Verdict::Skip => summary.skip += 1,
            }
        }
        Self {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: config.command.as_str().into(),
            config,
            metrics,
            verdict_summary: summary,
            wall_clock_ms,
        }
    }

    pub fn any_failure(&self) -> bool {
        self.verdict_summary.fail > 0
    }

    /// Serializes in the requested format. JSON round-trips through
    /// [`ExperimentReport`]; CSV holds one metric per row under a fixed
    /// header.
    pub fn emit(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Csv => {
                let mut out = String::from(
                    "name,closed_form,estimate,std_error,bound,hypotheses_met,verdict\n",
                );
                for m in &self.metrics {
                    let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        m.name,
                        fmt(&m.closed_form),
                        fmt(&m.estimate),
                        fmt(&m.std_error),
                        fmt(&m.bound),
                        m.hypotheses_met.map(|b| b.to_string()).unwrap_or_default(),
                        m.verdict.as_str(),
                    ));
                }
                out
            }
        }
    }

    /// Writes atomically: temp file in the target directory, then rename.
    pub fn write_to(&self, path: &Path, format: ReportFormat) -> std::io::Result<()> {
        let payload = self.emit(format);
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(payload.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)
    }
}
