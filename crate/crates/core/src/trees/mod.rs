//! Spanning-tree samplers for piece interiors.

pub mod decomposition;
pub mod matroid;
pub mod maxent;
pub mod piece;
