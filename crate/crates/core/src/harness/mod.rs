//! Experiment driver: run configuration, single cases, table suites and
//! their CSV output.

mod config;
mod run;
mod suite;
pub mod tables;

pub use config::{
    CoeffKind, CoefficientSpec, CondMode, DiscKind, ErrMode, Formulation, Nsub, PVersion, PrecKind, RhsKind, RunConfig,
    RunSpec, SolverChoice, DEFAULT_E,
};
pub use run::{run_case, run_case_with, write_residual_history, CaseResult, DENSE_COND_LIMIT, ERR_DIM_LIMIT};
pub use suite::{
    loglog_slope, run_suite, write_csv, Check, CheckOutcome, Metric, Row, Series, SeriesResult, SlopeFit,
    SuiteOptions, SuiteResult, SweepVar, TableSuite, CSV_HEADER,
};
