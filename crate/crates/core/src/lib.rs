//! Signal region detection for two-sample high-dimensional data.
//!
//! [`birs`] locates contiguous column regions where the means of two samples
//! differ, using binary segmentation driven by the sup-norm test in [`dcf`]
//! and re-searching after detected columns are removed. [`scan`] is a
//! fixed-window baseline on the same test, [`simulation`] generates the
//! benchmark designs and [`metrics`] scores detections.

pub mod birs;
pub mod dcf;
pub mod detector;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod region;
pub mod rng;
pub mod scan;
pub mod simulation;

pub use birs::{birs_detect, BirsConfig};
pub use dcf::{dcf_statistic, dcf_test, TestOutcome};
pub use detector::Detector;
pub use error::{Error, Result};
pub use matrix::SampleMatrix;
pub use region::{DetectedSegment, DetectionResult, Region};
pub use rng::{make_rng, RngStream};
pub use scan::{scan_detect, ScanConfig};
