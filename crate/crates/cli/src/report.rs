use jed_core::{DecompositionResult, JedParams, SolveReport};
use serde::{Deserialize, Serialize};

use crate::metrics::Patch;

/// Machine-readable summary of one `jed` invocation, one entry per input in
/// the order given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub subcommand: String,
    pub succeeded: usize,
    pub failed: usize,
    pub entries: Vec<ReportEntry>,
}

impl RunReport {
    pub fn new(subcommand: &str, entries: Vec<ReportEntry>) -> Self {
        let succeeded = entries.iter().filter(|e| e.success).count();
        RunReport {
            subcommand: subcommand.to_string(),
            succeeded,
            failed: entries.len() - succeeded,
            entries,
        }
    }

    pub fn all_succeeded(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub input: String,
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illumination_output: Option<String>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub params: Option<JedParams>,
    pub solver_reports: Vec<StageReport>,
    /// False when any solve hit its iteration budget; the output was still written.
    pub converged: bool,
    pub metrics: Option<Metrics>,
    pub wall_clock_ms: f64,
}

impl ReportEntry {
    pub fn failure(input: String, error: String, wall_clock_ms: f64) -> Self {
        ReportEntry {
            input,
            output: None,
            illumination_output: None,
            success: false,
            error: Some(error),
            params: None,
            solver_reports: Vec::new(),
            converged: false,
            metrics: None,
            wall_clock_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

impl StageReport {
    fn new(stage: &str, r: &SolveReport) -> Self {
        StageReport {
            stage: stage.to_string(),
            iterations: r.iterations,
            relative_residual: r.relative_residual,
            converged: r.converged,
        }
    }

    pub fn from_decomposition(d: &DecompositionResult) -> Vec<StageReport> {
        let [r, g, b] = &d.reflectance_reports;
        vec![
            StageReport::new("illumination", &d.illumination_report),
            StageReport::new("reflectance_r", r),
            StageReport::new("reflectance_g", g),
            StageReport::new("reflectance_b", b),
        ]
    }
}

/// Brightness and noise of the input and, when there is one, the output.
/// Noise is measured on the flattest patch of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_brightness_in: f64,
    pub mean_brightness_out: Option<f64>,
    pub brightness_gain: Option<f64>,
    pub noise_patch: Option<Patch>,
    pub noise_std_in: Option<f64>,
    pub noise_std_out: Option<f64>,
}
