//! Strong averaging-rate study over an `ε` grid: configuration, Monte Carlo
//! error estimation, fit and report files.

mod config;
mod rate;
mod report;

pub use config::{load_config, parse_config, ConfigError, ModeTag, StudyConfig, DEFAULT_SLOPE_THRESHOLD};
pub use rate::{
    fit_rate, run_aux_diagnostic, run_rate_study, strong_error, strong_error_uncoupled, sup_error_sq, with_workers,
    AuxRow, AuxTable, GridFailure, RateFit, RateReport, RateRow, ReplicationResult, StrongError, StudyError,
};
pub use report::{
    fit_csv, rate_report_csv, read_rate_report, summary_text, verdict, write_report, FIT_HEADER, RATE_REPORT_HEADER,
};
