//! Permutation calibration on observed data and the BiRS-versus-scan
//! benchmark.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::birs::{birs_detect, BirsConfig};
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::metrics::prop1_bound;
use crate::region::DetectionResult;
use crate::rng::RngStream;
use crate::scan::{scan_detect, ScanConfig};
use crate::simulation::{build_covariance, simulate_pair, ExperimentConfig};

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub runs: usize,
    /// Fraction of permutations with at least one detected region.
    pub fwer: f64,
    pub detections: Vec<DetectionResult>,
}

/// Pool the rows of `x` and `y`, reassign group labels at random `runs`
/// times and run the detector on each relabelled pair. Permutation `r` uses
/// `rng.substream(r)`: its substream 0 shuffles, substream 1 detects.
pub fn permutation_calibration(
    x: &SampleMatrix,
    y: &SampleMatrix,
    detector: &Detector,
    runs: usize,
    rng: &RngStream,
) -> Result<CalibrationResult> {
    if runs == 0 {
        return Err(Error::EmptyExperiment);
    }
    detector.validate(x.cols())?;
    let pooled = x.vstack(y)?;
    let n = x.rows();
    let detections = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let run_rng = rng.substream(r);
            let mut order: Vec<usize> = (0..pooled.rows()).collect();
            order.shuffle(run_rng.substream(0).generator());
            let px = pooled.select_rows(&order[..n])?;
            let py = pooled.select_rows(&order[n..])?;
            detector.detect(&px, &py, &run_rng.substream(1))
        })
        .collect::<Result<Vec<_>>>()?;
    let hits = detections.iter().filter(|d| !d.regions.is_empty()).count();
    Ok(CalibrationResult {
        runs,
        fwer: hits as f64 / runs as f64,
        detections,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub birs_tests: u64,
    pub scan_tests: u64,
    pub birs_bound: u64,
    pub birs_ms: f64,
    pub scan_ms: f64,
    pub birs: DetectionResult,
    pub scan: DetectionResult,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub p: usize,
    pub windows: Vec<usize>,
    pub runs: Vec<BenchRun>,
}

impl BenchReport {
    pub fn total_birs_ms(&self) -> f64 {
        self.runs.iter().map(|r| r.birs_ms).sum()
    }

    pub fn total_scan_ms(&self) -> f64 {
        self.runs.iter().map(|r| r.scan_ms).sum()
    }

    pub fn max_test_ratio(&self) -> f64 {
        self.runs
            .iter()
            .map(|r| r.birs_tests as f64 / r.scan_tests as f64)
            .fold(0.0, f64::max)
    }
}

/// Time BiRS and the scan on the same simulated data sets. Runs are
/// sequential so wall times are not distorted by each other.
pub fn bench(
    design: &ExperimentConfig,
    birs: &BirsConfig,
    scan: &ScanConfig,
    runs: usize,
    rng: &RngStream,
) -> Result<BenchReport> {
    if runs == 0 {
        return Err(Error::EmptyExperiment);
    }
    birs.validate(design.p)?;
    scan.validate(design.p)?;
    let (sx, sy) = design.design.covariances(design.p);
    let factors = (build_covariance(&sx)?, build_covariance(&sy)?);
    let mut out = Vec::with_capacity(runs);
    for r in 0..runs as u64 {
        let run_rng = rng.substream(r);
        let pair = simulate_pair(design, &factors, &run_rng)?;
        let detect_rng = run_rng.substream(4);

        let started = Instant::now();
        let b = birs_detect(&pair.x, &pair.y, birs, &detect_rng)?;
        let birs_ms = started.elapsed().as_secs_f64() * 1e3;

        let started = Instant::now();
        let s = scan_detect(&pair.x, &pair.y, scan, &detect_rng)?;
        let scan_ms = started.elapsed().as_secs_f64() * 1e3;

        out.push(BenchRun {
            birs_tests: b.tests_performed,
            scan_tests: s.tests_performed,
            birs_bound: prop1_bound(design.p, birs.trunc_s, u64::from(b.rounds_used))?,
            birs_ms,
            scan_ms,
            birs: b,
            scan: s,
        });
    }
    Ok(BenchReport {
        p: design.p,
        windows: scan.window_lengths.clone(),
        runs: out,
    })
}
