//! Scenario runner for `chainsim-core`: JSON configs, CSV artifacts and a
//! run manifest.

pub mod config;
pub mod error;
pub mod run;
pub mod sampling;
pub mod table;

pub use config::{Analysis, AnalysisKind, ScenarioConfig};
pub use error::RunError;
pub use run::{run_scenario, Manifest};
pub use table::{emit_csv, read_csv, Cell, Table};
