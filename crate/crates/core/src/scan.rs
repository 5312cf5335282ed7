//! Fixed-window scan over all contiguous windows of the configured lengths,
//! thresholded by one bootstrap critical value shared by every window.

use crate::dcf::{self, MultiplierDesign};
use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::region::{DetectedSegment, DetectionResult, Region};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Strictly decreasing window lengths.
    pub window_lengths: Vec<usize>,
    pub alpha: f64,
    pub n_boot: usize,
}

impl ScanConfig {
    pub fn new(mut window_lengths: Vec<usize>, alpha: f64, n_boot: usize) -> Self {
        window_lengths.sort_unstable_by(|a, b| b.cmp(a));
        window_lengths.dedup();
        Self {
            window_lengths,
            alpha,
            n_boot,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        dcf::validate_alpha(self.alpha)?;
        if self.n_boot == 0 {
            return Err(Error::InvalidBootstrapSize);
        }
        if self.window_lengths.is_empty() {
            return Err(Error::Config(
                "at least one window length is required".into(),
            ));
        }
        if !self.window_lengths.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::Config(
                "window lengths must be strictly decreasing".into(),
            ));
        }
        if let Some(&bad) = self.window_lengths.iter().find(|&&l| l == 0 || l > p) {
            return Err(Error::Config(format!(
                "window length {bad} must lie in 1..={p}"
            )));
        }
        Ok(())
    }

    /// Number of windows scanned: `sum_i (p - L_i + 1)`.
    pub fn window_count(&self, p: usize) -> u64 {
        self.window_lengths
            .iter()
            .map(|&l| (p + 1).saturating_sub(l) as u64)
            .sum()
    }
}

/// Statistic of every window, length by length, each window evaluated on
/// its own columns.
fn window_statistics(contrasts: &[f64], lengths: &[usize]) -> Vec<(Region, f64)> {
    let p = contrasts.len();
    let mut out = Vec::new();
    for &len in lengths {
        for start in 0..=p - len {
            let stat = dcf::max_abs(&contrasts[start..start + len]);
            out.push((
                Region::new(start, start + len).expect("window inside [0, p)"),
                stat,
            ));
        }
    }
    out
}

fn max_window_statistic(contrasts: &[f64], lengths: &[usize]) -> f64 {
    let p = contrasts.len();
    let mut best = 0.0f64;
    for &len in lengths {
        for start in 0..=p - len {
            best = best.max(dcf::max_abs(&contrasts[start..start + len]));
        }
    }
    best
}

pub fn scan_detect(
    x: &SampleMatrix,
    y: &SampleMatrix,
    cfg: &ScanConfig,
    rng: &RngStream,
) -> Result<DetectionResult> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            x_cols: x.cols(),
            y_cols: y.cols(),
        });
    }
    let p = x.cols();
    cfg.validate(p)?;

    let contrasts = dcf::column_contrasts(x, y)?;
    let windows = window_statistics(&contrasts, &cfg.window_lengths);

    // Each replicate shares one multiplier vector across all windows.
    let design = MultiplierDesign::from_pair(x, y)?;
    let replicates = design.replicates_with(&rng.substream(0), cfg.n_boot, |v| {
        max_window_statistic(v, &cfg.window_lengths)
    });
    let threshold = dcf::critical_value_from_replicates(&replicates, cfg.alpha)?;

    let mut significant: Vec<&(Region, f64)> =
        windows.iter().filter(|(_, s)| *s > threshold).collect();
    significant.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.0.start().cmp(&b.0.start()))
            .then(b.0.len().cmp(&a.0.len()))
    });
    let mut selected: Vec<DetectedSegment> = Vec::new();
    for &&(region, statistic) in &significant {
        if selected.iter().all(|s| !s.region.overlaps(&region)) {
            selected.push(DetectedSegment {
                region,
                round: 0,
                depth: 0,
                statistic,
            });
        }
    }

    Ok(DetectionResult {
        regions: crate::birs::rearrange(&selected)?,
        segments: selected,
        tests_performed: cfg.window_count(p),
        rounds_used: 0,
        bootstrap_runs: 1,
        capped: false,
    })
}
