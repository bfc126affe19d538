//! Deduction of the full-face stress state of a circular tunnel lining from a
//! handful of sensors.
//!
//! A ring section is flattened into a `layers x parts` matrix with the sensor
//! readings as its only known entries. The matrix is completed by a
//! non-negative low-rank factorization whose loss also penalizes differences
//! between adjacent parts (weighted by how similar an analytical load model
//! says their tangential forces are) and between mirrored parts.

pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod geometry;
pub mod mechanics;
pub mod pipeline;

pub use error::{Error, Result};
pub use evaluation::{
    cross_test, grid_search, kfold_split, metrics, CrossTestResult, MetricReport, SearchResult,
};
pub use factorization::{
    factorize, gradient, init_factors, loss, reconstruct, FactorPair, LossBreakdown, ShiftPolicy,
    TrainConfig, TrainReport,
};
pub use geometry::{
    assemble_observation, CellIndex, ObservationMatrix, SensorEntry, SensorLayout, TunnelGrid,
};
pub use mechanics::{
    adjacency_weights, resultants, similarity, GroundLayer, LoadField, SectionProfile,
};
