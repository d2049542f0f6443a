//! Validation, brute-force oracle, reporting and command line for the
//! restoration scheduler.

pub mod cli;
pub mod generate;
pub mod oracle;
pub mod recourse;
pub mod report;
pub mod validate;
