//! Experiment plumbing: configuration, reports, CSV output and the run entry point.

mod config;
mod experiments;
mod output;
mod reports;

use std::path::Path;

pub use config::{ConfigFile, Entry};
pub use experiments::{
    embedding_verdict, run_experiment, Check, EmbedMode, EmbedSpec, Experiment, InputSpec,
    LabConfig, Outcome, QpSpec, RunOptions, Tolerances,
};
pub use output::{blob_hash, csv_to_dat, Artifacts};
pub use reports::{
    convex_sum_report, embedding_report, embedding_rows, partition_audit, rows_csv,
    tree_budget_report, trees_csv, Charge, ConvexReport, PartitionAudit, ReportRow, TreeReport,
    TreeRow,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ASSERT: i32 = 2;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sizes the global worker pool; later calls are ignored.
pub fn set_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
}

/// Exit code of an outcome: 0 when every check passes, 2 otherwise, 1 for errors.
pub fn exit_code(outcome: &crate::Result<Outcome>) -> i32 {
    match outcome {
        Ok(o) if o.pass() => EXIT_PASS,
        Ok(_) => EXIT_ASSERT,
        Err(_) => EXIT_CONFIG,
    }
}

/// Loads a configuration, runs the experiment it names, and returns the exit code.
pub fn run(config: &Path, opts: &RunOptions) -> (i32, crate::Result<Outcome>) {
    let res = LabConfig::load(config).and_then(|cfg| {
        let kind = cfg.experiment.ok_or_else(|| crate::Error::Config {
            path: config.to_path_buf(),
            line: 1,
            msg: "missing [experiment] kind".into(),
        })?;
        run_experiment(kind, Some(&cfg), opts)
    });
    (exit_code(&res), res)
}
