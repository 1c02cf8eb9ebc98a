//! Command-line front end: instance files, reports and the four commands.

pub mod commands;
pub mod instance;
pub mod json;
pub mod report;
