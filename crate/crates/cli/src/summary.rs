//! JSON documents written by the CLI.

use gaussrbf::{PhaseTimes, SolveConfig, SolveReport, TestFunction};
use serde::{Deserialize, Serialize};

/// Bumped whenever a field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How a point file was produced. Written by `generate` as a sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorInfo {
    /// `lattice` or `scattered`.
    pub name: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub spacing: f64,
    pub domain: [f64; 4],
    pub function: TestFunction,
    pub n_points: usize,
    pub tool_version: String,
}

/// Residual norms at exit. `preconditioned` is the quantity GMRES monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Residuals {
    pub preconditioned: f64,
    pub true_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub schema_version: u32,
    pub tool_version: String,
    pub input: String,
    pub config: SolveConfig,
    pub n_points: usize,
    pub subdomain_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Residuals,
    pub wall_times: PhaseTimes,
    pub storage_estimate: usize,
    pub generator: Option<GeneratorInfo>,
}

impl RunSummary {
    pub fn new(input: String, config: SolveConfig, report: &SolveReport, generator: Option<GeneratorInfo>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            input,
            config,
            n_points: report.n_points,
            subdomain_count: report.subdomain_count,
            iterations: report.iterations,
            converged: report.converged,
            residuals: Residuals {
                preconditioned: report.preconditioned_residual,
                true_residual: report.true_residual,
            },
            wall_times: report.wall_times,
            storage_estimate: report.storage_estimate,
            generator,
        }
    }
}

/// Fitted exponents and thread ratios from `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub schema_version: u32,
    pub h_over_sigma: f64,
    /// Slope of log(total seconds) against log(N) at the first thread count.
    pub time_slope: Option<f64>,
    pub storage_slope: Option<f64>,
    /// Thread series on the largest size.
    pub thread_scaling: Vec<gaussrbf::ThreadScaling>,
}
