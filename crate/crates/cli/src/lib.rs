//! Scenario runner: resolves a configuration, drives the solvers and writes
//! CSV tables, SVG plots and a JSON run report.

pub mod analysis;
pub mod plot;
pub mod report;
pub mod run;
pub mod scenario;

pub use plot::{emit_plot, PlotKind, Table};
pub use report::RunReport;
pub use run::run_scenario;
pub use scenario::{Scenario, ScenarioName, SolverChoice};
