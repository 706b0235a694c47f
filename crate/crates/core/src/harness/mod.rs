//! Scenario-driven Monte Carlo studies, diagnostics and their tabular
//! output.

mod checks;
mod config;
mod output;
mod study;

pub use checks::{run_design_check, run_kernel_check, DesignCheckRow, DesignReport, KernelCell, KernelReport};
pub use config::{
    load_config, parse_config, Profile, ScenarioConfig, DEFAULT_P_GRID, DEFAULT_RHO_GRID, DESK_REPLICATES,
    DESK_REPS, FULL_REPLICATES, FULL_REPS,
};
pub use output::{write_report, Format, Tabular};
pub use study::{
    rate_se, run_quantile_study, run_test_study, QuantileCell, QuantileReport, TestCell, TestKind, TestReport,
};
