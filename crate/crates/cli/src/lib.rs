//! Command-line front end for `jed_core`: batch enhancement, layer export,
//! a histogram-equalization baseline, and JSON run reports.

pub mod metrics;
pub mod report;
mod run;

pub use metrics::{flat_patch_noise_std, flattest_patch, histogram_equalize, Patch};
pub use report::{Metrics, ReportEntry, RunReport, StageReport};
pub use run::{run_cli, EXIT_IMAGE_FAILURE, EXIT_OK, EXIT_USAGE};
