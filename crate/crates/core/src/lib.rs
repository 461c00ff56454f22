pub mod graph;
pub mod hierarchy;
pub mod instance;
pub mod rational;
pub mod convex;
pub mod error;
pub mod shift;
pub mod trees;
pub mod pipeline;
pub mod params;
pub mod ojoin;
pub mod harness;
