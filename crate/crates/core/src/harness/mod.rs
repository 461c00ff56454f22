//! Experiment harness: instance families, statistics suites for every
//! probabilistic bound, exact small-instance oracles and report rendering.

pub mod correlations;
pub mod generate;
pub mod oracle;
pub mod stats;
pub mod suites;
