use crate::birs::{birs_detect, BirsConfig};
use crate::error::Result;
use crate::matrix::SampleMatrix;
use crate::region::DetectionResult;
use crate::rng::RngStream;
use crate::scan::{scan_detect, ScanConfig};

/// A configured detection method.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Birs(BirsConfig),
    Scan(ScanConfig),
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Birs(_) => "birs",
            Self::Scan(_) => "scan",
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Self::Birs(c) => c.alpha,
            Self::Scan(c) => c.alpha,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Self::Birs(c) => c.validate(p),
            Self::Scan(c) => c.validate(p),
        }
    }

    pub fn detect(
        &self,
        x: &SampleMatrix,
        y: &SampleMatrix,
        rng: &RngStream,
    ) -> Result<DetectionResult> {
        match self {
            Self::Birs(c) => birs_detect(x, y, c, rng),
            Self::Scan(c) => scan_detect(x, y, c, rng),
        }
    }
}
