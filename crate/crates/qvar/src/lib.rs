//! Standard-library companion to `qvar-core`: circuit files, JSON/CSV
//! reports, a rayon-backed sample scheduler and the `qvar` command line.

pub mod cli;
pub mod error;
pub mod format;
pub mod parallel;
pub mod report;

pub use error::CliError;
