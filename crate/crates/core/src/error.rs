use crate::graph::EdgeId;
use thiserror::Error;

/// Failures inside a piece sampler.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("graph has no perfect matching")]
    NoPerfectMatching,
    #[error("greedy colouring of the contracted matching needed more than {0} colours")]
    ColoringOverflow(usize),
    #[error("shifted point lies outside the constrained spanning-tree polytope: {0}")]
    InfeasibleShift(String),
    #[error("maximum-entropy target touches the polytope boundary: {0}")]
    BoundaryTarget(String),
    #[error("maximum-entropy fit stalled after {rounds} rounds at relative error {error:e}")]
    NonConvergence { rounds: usize, error: f64 },
    #[error("conditional marginal {value} of {edge} left [0, 1]")]
    NumericalBreakdown { edge: EdgeId, value: f64 },
    #[error("exact arithmetic overflowed the fixed-width representation")]
    Overflow,
}
