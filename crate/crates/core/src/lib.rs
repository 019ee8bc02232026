//! Synthesis of hazy, defocus-blurred and motion-blurred frames with exact
//! per-pixel blindness ground truth, classical blindness estimators, and the
//! evaluation harness used to score blindness maps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defocus;
pub mod depth;
pub mod error;
pub mod filter;
pub mod flow;
pub mod haze;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod raster;
pub mod scene;

pub use depth::{fill_depth, DepthMap};
pub use error::{Error, Result};
pub use flow::{dense_flow, FlowField, FlowParams};
pub use metrics::{BinaryMap, EvalReport};
pub use raster::{resize_bilinear, BlindnessMap, BlindnessType, Plane, RasterImage};
