//! Scenario files, runs, sweeps, refinement studies and their flat-file reports.

pub mod report;
pub mod run;
pub mod scenario;
pub mod selftest;

pub use report::emit_reports;
pub use run::{refine, run, sweep, ConvergenceRow, RunReport, SweepParam};
pub use scenario::{parse_scenario, CheckKind, Scenario};
pub use selftest::{builtin_scenarios, selftest, SelftestItem};
