//! Desk-scale molecular screening for immersion-cooling fluids.
//!
//! The crate covers the whole pipeline: parsing molecules, structural
//! filters, single-step virtual reactions, a multi-task geometrically
//! aligned property model with its single-task baseline, a distilled
//! pair surrogate, threshold screening, and numerical tools for the bias
//! that appears when independently modeled criteria are combined.

pub mod biaslab;
pub mod encoder;
pub mod filters;
pub mod gate;
pub mod molgraph;
pub mod nncore;
pub mod pipeline;
pub mod properties;
pub mod reactor;
pub mod screening;
pub mod stats;
pub mod surrogate;
