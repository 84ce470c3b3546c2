//! Random walks on weighted pre-fractal graphs: generators, exact walk
//! quantities, electric-network potential theory and condition checkers.

pub mod domain;
pub mod error;
pub mod generators;
pub mod graph;
pub mod linalg;
pub mod potential;
pub mod checkers;
pub mod walk;

pub use error::{LabError, Result};
pub use generators::{GeneratorSpec, WeightRule};
pub use graph::{DistanceField, VertexSet, WeightedGraph};
