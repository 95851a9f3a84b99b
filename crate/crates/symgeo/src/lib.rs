//! Command-line front end for `symgeo-core`: configuration files, the
//! `check`, `simulate`, `sweep` and `scenario` commands, and CSV/JSON
//! export.
//!
//! Exit codes are a stable contract: 0 success, 1 certificate failure,
//! 2 configuration or usage error, 3 numeric abort.

pub mod check;
pub mod cli;
pub mod error;
pub mod io;
pub mod simulate;
pub mod sweep;

pub use error::{CliError, CliResult};
