use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open column interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    start: usize,
    end: usize,
}

impl Region {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidRegion { start, end, p: end });
        }
        Ok(Self { start, end })
    }

    /// Region checked against a dimension `p`.
    pub fn within(start: usize, end: usize, p: usize) -> Result<Self> {
        if start >= end || end > p {
            return Err(Error::InvalidRegion { start, end, p });
        }
        Ok(Self { start, end })
    }

    pub fn full(p: usize) -> Result<Self> {
        Self::within(0, p, p)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..self.end).contains(&index)
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn intersection_len(&self, other: &Region) -> usize {
        self.end
            .min(other.end)
            .saturating_sub(self.start.max(other.start))
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    /// 1-based inclusive bounds, as used in reports.
    pub fn one_based(&self) -> (usize, usize) {
        (self.start + 1, self.end)
    }

    pub fn from_one_based(start: usize, end_inclusive: usize) -> Result<Self> {
        if start == 0 {
            return Err(Error::InvalidRegion {
                start,
                end: end_inclusive,
                p: end_inclusive,
            });
        }
        Self::new(start - 1, end_inclusive)
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Sorted, merged copy of a region set (overlapping or touching regions fused).
pub fn normalize_regions(regions: &[Region]) -> Vec<Region> {
    let mut sorted = regions.to_vec();
    sorted.sort_unstable();
    let mut merged: Vec<Region> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match merged.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => merged.push(r),
        }
    }
    merged
}

/// Number of distinct indices covered by `regions`.
pub fn region_union_size(regions: &[Region]) -> usize {
    normalize_regions(regions).iter().map(Region::len).sum()
}

/// Size of the intersection of two region sets.
pub fn region_intersection_size(a: &[Region], b: &[Region]) -> usize {
    let a = normalize_regions(a);
    let b = normalize_regions(b);
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        total += a[i].intersection_len(&b[j]);
        if a[i].end <= b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// A terminal segment accepted by the search, with where it was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedSegment {
    pub region: Region,
    /// Re-search round; 0 is the initial binary search.
    pub round: u32,
    /// Number of ancestral splits when accepted.
    pub depth: u32,
    pub statistic: f64,
}

/// A reported region with the provenance of the segments merged into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSummary {
    pub region: Region,
    pub round: u32,
    pub depth: u32,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionResult {
    /// Merged regions: sorted, disjoint, separated by at least one index.
    pub regions: Vec<Region>,
    /// Pre-merge terminal segments.
    pub segments: Vec<DetectedSegment>,
    pub tests_performed: u64,
    /// Binary-search rounds executed (0 when the global test does not reject).
    pub rounds_used: u32,
    /// Bootstrap critical values computed.
    pub bootstrap_runs: u64,
    /// True when the re-search loop stopped at the round cap.
    pub capped: bool,
}

impl DetectionResult {
    pub fn detected_points(&self) -> usize {
        region_union_size(&self.regions)
    }

    /// Per merged region: earliest round, shallowest depth and largest
    /// statistic among the segments it contains.
    pub fn summaries(&self) -> Vec<RegionSummary> {
        self.regions
            .iter()
            .map(|&region| {
                let mut inside = self
                    .segments
                    .iter()
                    .filter(|s| region.overlaps(&s.region))
                    .peekable();
                let mut summary = RegionSummary {
                    region,
                    round: inside.peek().map_or(0, |s| s.round),
                    depth: inside.peek().map_or(0, |s| s.depth),
                    statistic: 0.0,
                };
                for s in inside {
                    summary.round = summary.round.min(s.round);
                    summary.depth = summary.depth.min(s.depth);
                    summary.statistic = summary.statistic.max(s.statistic);
                }
                summary
            })
            .collect()
    }

    /// Checks the output invariants: sorted, strictly separated regions whose
    /// union equals the union of the segments.
    pub fn is_well_formed(&self) -> bool {
        let separated = self.regions.windows(2).all(|w| w[0].end() < w[1].start());
        let seg_regions: Vec<Region> = self.segments.iter().map(|s| s.region).collect();
        separated && normalize_regions(&seg_regions) == self.regions
    }
}
