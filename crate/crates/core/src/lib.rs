//! Synthesis of tampered text images with pixel-exact ground truth.
//!
//! A [`model::ParameterTable`] lists, per tampering type, the operation
//! variants human editors use and how often. Edit logs fit a
//! [`model::PopulationModel`]; [`sampler::sample_plan`] draws a
//! [`sampler::TamperingPlan`] from it; [`pipeline::synthesize_sample`]
//! executes the plan with the [`raster`] primitives and derives the mask;
//! [`dataset`] handles files, annotations and metrics.

pub mod dataset;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod sampler;
