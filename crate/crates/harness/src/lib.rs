//! Experiment runner, results matrix, error analysis and the interactive
//! parser session.

pub mod experiment;
pub mod matrix;
pub mod repl;
pub mod report;
