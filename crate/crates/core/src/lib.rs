//! Hierarchical growing-grid networks for skeleton-based action recognition.
//!
//! The processing chain is: [`preprocess`] (ego-centered transform, link
//! scaling, optional body-part attention) → first-layer [`growing_grid`]
//! producing winner trajectories → [`ordered`] fixed-length resampling →
//! second-layer growing grid → [`label`] supervised readout. [`som`] is the
//! fixed-topology baseline and [`pipeline`] wires the layers together.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are the double-precision instantiations used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod growing_grid;
pub mod label;
pub mod lattice;
pub mod ordered;
mod persist;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod skeleton;
pub mod som;

pub use persist::ModelError;
pub use scalar::Real;

pub type GrowingGrid64 = growing_grid::GrowingGrid<f64>;
pub type SomNet64 = som::SomNet<f64>;
pub type LabelingLayer64 = label::LabelingLayer<f64>;
pub type PipelineConfig64 = pipeline::PipelineConfig<f64>;
pub type PipelineModel64 = pipeline::PipelineModel<f64>;
pub type Dataset64 = skeleton::Dataset<f64>;
pub type SkeletonSequence64 = skeleton::SkeletonSequence<f64>;
