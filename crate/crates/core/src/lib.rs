//! Pragmatic color generation.
//!
//! A literal speaker network maps a reference color and a modifier embedding
//! to a target color. A reconstructor listener maps the target back to the
//! reference. The pragmatic speaker samples candidates from the literal
//! speaker and rescores them by how well the listener recovers the reference,
//! mixing the two distributions with a weight lambda.

pub mod colorspace;
pub mod config;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod net;
pub mod seeds;
pub mod speakers;
pub mod swatch;

pub use colorspace::{delta_e_2000, delta_e_rgb, srgb_to_lab, Lab, Rgb};
pub use error::{Error, Result};
