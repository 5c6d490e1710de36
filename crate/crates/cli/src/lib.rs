//! Experiment drivers for the dielectric sphere solver: TOML specs in, CSV out.

pub mod csv;
pub mod error;
pub mod run;
pub mod spec;

pub use csv::{emit_csv, to_csv, ResultRow, HEADER};
pub use error::{CliError, CliResult};
pub use run::{compute, run, RunOptions, Table};
pub use spec::{ExperimentSpec, Kind};
