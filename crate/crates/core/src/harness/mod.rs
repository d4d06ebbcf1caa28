//! Experiment configuration, seed-parallel runs with regret accounting and
//! per-episode checks, the verification suites and the command-line front end.

mod cli;
mod config;
mod runner;
mod verify;

pub use cli::{cli_main, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK};
pub use config::{
    ApproximationSection, Check, ConfidenceSection, ExperimentConfig, ResolvedExperiment,
    SEED_ENV_VAR,
};
pub use runner::{
    run_baseline, run_experiment, run_seed, theoretical_bound, uniform_policy_value, write_csv,
    write_outputs, BaselineRun, CheckStatus, EpisodeDiagnostics, ExperimentResult, RunRecord,
    SeedRun, CHECK_SLACK, CLOSED_FORM_TOLERANCE, CSV_COLUMNS,
};
pub use verify::{
    closed_form_suite, coverage_suite, duality_suite, info_gain_curve, invariants_suite,
    random_mdp, ClosedFormReport, CoverageOptions, CoverageReport, DualityReport, InvariantReport,
};
