//! Streaming estimation of temporal triangle counts.
//!
//! A temporal edge stream is processed once, in timestamp order. Edges that a
//! heaviness predictor flags are kept for as long as they can still close a
//! triangle; every other edge is kept with probability `p`. Triangles closed
//! against the retained sample are counted in three banks (by how many of the
//! two earlier edges were heavy) and reweighted into unbiased estimates for all
//! eight temporal triangle kinds.
//!
//! The crate also ships the exact windowed oracle, the predictor builders, the
//! no-predictor baseline and the experiment harness used to evaluate them.
//!
//! Real-valued outputs are generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases below fix the common instantiations.

pub mod baseline;
pub mod error;
pub mod graph;
pub mod harness;
pub mod num;
pub mod predictor;
pub mod step;
pub mod triangle;

pub use error::{Error, Result};
pub use graph::{EdgeStream, NodeId, PreprocessReport, TemporalEdge, TimeDelta, Timestamp};
pub use num::Scalar;
pub use predictor::{Predictor, PredictorKind, PredictorRequest, PredictorSpec, RankedEdges};
pub use step::{Counters, EstimatorConfig, RunStats, SampleState, StepRun};
pub use triangle::{CountVector, EdgeWeights, TriangleKind};

/// Exact per-kind counts.
pub type ExactCounts = CountVector<u64>;
/// Double-precision per-kind estimates.
pub type Estimates = CountVector<f64>;
/// Single-precision per-kind estimates.
pub type Estimates32 = CountVector<f32>;
/// Output of a double-precision estimator run.
pub type StepRun64 = StepRun<f64>;
/// Double-precision trial report.
pub type TrialReport64 = harness::TrialReport<f64>;
