//! Retinal fundus biometrics from segmentation masks.
//!
//! Given a fundus photograph plus optic-disc, vessel and field-of-view
//! masks and a fovea location, this crate measures 14 anatomical
//! parameters (disc area/brightness/edge sharpness, peripapillary
//! brightness, regional vessel coverage, vessel-graph structure and
//! the foveal avascular zone) and provides the statistical machinery
//! for two-phase group comparisons: t-tests, Benjamini-Hochberg
//! adjustment, chi-square tests and seeded bootstrap evaluation. A
//! synthetic-eye generator with analytically known ground truth backs
//! end-to-end validation.

pub mod biometrics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mask;
pub mod raster;
pub mod special;
pub mod stats;
pub mod synth;
pub mod vesselgraph;

pub use error::{CoreError, Result};
