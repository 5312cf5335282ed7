//! Detection accuracy and work accounting.

use crate::error::{Error, Result};
use crate::region::{normalize_regions, region_intersection_size, region_union_size, Region};

/// Jaccard index of two index sets given as regions. Two empty sets have
/// index 1.
pub fn jaccard(a: &[Region], b: &[Region]) -> f64 {
    let inter = region_intersection_size(a, b);
    let union = region_union_size(a) + region_union_size(b) - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Largest Jaccard index between `truth` and any single detected region.
pub fn best_jaccard(detected: &[Region], truth: Region) -> f64 {
    detected
        .iter()
        .map(|d| jaccard(&[*d], &[truth]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// |detected ∩ truth| / |truth|; 0 when there is no truth.
    pub tpr: f64,
    /// |detected \ truth| / max(|detected|, 1).
    pub fdp: f64,
    pub per_region_jaccard: Vec<(Region, f64)>,
    pub n_detected_points: usize,
    pub n_false_points: usize,
}

pub fn eval_detection(detected: &[Region], truth: &[Region], p: usize) -> Result<EvalReport> {
    if let Some(bad) = detected.iter().chain(truth).find(|r| r.end() > p) {
        return Err(Error::InvalidRegion {
            start: bad.start(),
            end: bad.end(),
            p,
        });
    }
    let n_detected = region_union_size(detected);
    let n_truth = region_union_size(truth);
    let hits = region_intersection_size(detected, truth);
    let false_points = n_detected - hits;
    let merged = normalize_regions(detected);
    Ok(EvalReport {
        tpr: if n_truth == 0 {
            0.0
        } else {
            hits as f64 / n_truth as f64
        },
        fdp: false_points as f64 / n_detected.max(1) as f64,
        per_region_jaccard: truth
            .iter()
            .map(|&t| (t, best_jaccard(&merged, t)))
            .collect(),
        n_detected_points: n_detected,
        n_false_points: false_points,
    })
}

/// Upper bound on the number of tests after `m` re-searches:
/// `ceil((m + 1) * (p / 2^(s-1) + log2(p) - s))`.
pub fn prop1_bound(p: usize, s: u32, m: u64) -> Result<u64> {
    let terminal = 1usize
        .checked_shl(s)
        .ok_or_else(|| Error::Config(format!("truncation {s} too large")))?;
    if terminal >= p {
        return Err(Error::Config(format!(
            "truncation 2^{s} must be smaller than the dimension {p}"
        )));
    }
    let p = p as f64;
    let per_round = p / 2f64.powi(s as i32 - 1) + p.log2() - f64::from(s);
    Ok(((m + 1) as f64 * per_round).ceil() as u64)
}
