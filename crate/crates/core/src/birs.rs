//! Binary segmentation with dynamic critical values, re-search after
//! removing detected columns, and final rearrangement of adjacent segments.

use std::ops::Range;

use crate::dcf::{self, MultiplierDesign, TestOutcome};
use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::region::{DetectedSegment, DetectionResult, Region};
use crate::rng::RngStream;

pub const DEFAULT_MAX_ROUNDS: u32 = 32;
pub const DEFAULT_TRUNC: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirsConfig {
    pub alpha: f64,
    /// Segments of length at most `2^trunc_s` are terminal.
    pub trunc_s: u32,
    pub n_boot: usize,
    pub max_rounds: u32,
}

impl Default for BirsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            trunc_s: DEFAULT_TRUNC,
            n_boot: 1000,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl BirsConfig {
    pub fn terminal_length(&self) -> usize {
        1usize.checked_shl(self.trunc_s).unwrap_or(usize::MAX)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        dcf::validate_alpha(self.alpha)?;
        if self.n_boot == 0 {
            return Err(Error::InvalidBootstrapSize);
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if self.terminal_length() >= p {
            return Err(Error::Config(format!(
                "truncation 2^{} must be smaller than the dimension {p}",
                self.trunc_s
            )));
        }
        Ok(())
    }
}

pub fn split_region(r: Region) -> Result<(Region, Region)> {
    if r.len() < 2 {
        return Err(Error::Unsplittable {
            start: r.start(),
            end: r.end(),
        });
    }
    let mid = r.start() + r.len() / 2;
    Ok((Region::new(r.start(), mid)?, Region::new(mid, r.end())?))
}

/// Copy of `m` with every column in `regions` set to zero.
pub fn zero_out(m: &SampleMatrix, regions: &[Region]) -> Result<SampleMatrix> {
    let p = m.cols();
    if let Some(bad) = regions.iter().find(|r| r.end() > p) {
        return Err(Error::InvalidRegion {
            start: bad.start(),
            end: bad.end(),
            p,
        });
    }
    let mut out = m.clone();
    for row in out.values_mut().chunks_exact_mut(p) {
        for r in regions {
            row[r.indices()].fill(0.0);
        }
    }
    Ok(out)
}

/// Sort segments and merge runs where each segment starts exactly where the
/// previous one ends.
pub fn rearrange(segments: &[DetectedSegment]) -> Result<Vec<Region>> {
    let mut regions: Vec<Region> = segments.iter().map(|s| s.region).collect();
    regions.sort_unstable();
    let mut merged: Vec<Region> = Vec::with_capacity(regions.len());
    for r in regions {
        match merged.last_mut() {
            Some(last) if r.start() < last.end() => {
                return Err(Error::OverlappingSegments {
                    a_start: last.start(),
                    a_end: last.end(),
                    b_start: r.start(),
                    b_end: r.end(),
                })
            }
            Some(last) if r.start() == last.end() => {
                *last = Region::new(last.start(), r.end())?;
            }
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

/// Columns still under test, addressed by their original index, with the
/// bootstrap design restricted to those columns.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    p: usize,
    /// Signed contrasts for every original column.
    contrasts: Vec<f64>,
    /// Sorted original indices of the columns present in `design`.
    live: Vec<usize>,
    design: MultiplierDesign,
}

impl Workspace {
    pub(crate) fn new(x: &SampleMatrix, y: &SampleMatrix) -> Result<Self> {
        let contrasts = dcf::column_contrasts(x, y)?;
        let design = MultiplierDesign::from_pair(x, y)?;
        Ok(Self {
            p: x.cols(),
            contrasts,
            live: (0..x.cols()).collect(),
            design,
        })
    }

    pub(crate) fn p(&self) -> usize {
        self.p
    }

    /// Positions within `live` of the live columns inside `r`.
    fn positions(&self, r: Region) -> Range<usize> {
        let lo = self.live.partition_point(|&c| c < r.start());
        let hi = self.live.partition_point(|&c| c < r.end());
        lo..hi
    }

    pub(crate) fn region_statistic(&self, r: Region) -> f64 {
        self.live[self.positions(r)]
            .iter()
            .fold(0.0, |acc: f64, &c| acc.max(self.contrasts[c].abs()))
    }

    pub(crate) fn global_test(&self, cfg: &BirsConfig, rng: &RngStream) -> Result<TestOutcome> {
        let statistic = self
            .live
            .iter()
            .fold(0.0, |acc: f64, &c| acc.max(self.contrasts[c].abs()));
        let critical = self.design.critical_value(cfg.alpha, cfg.n_boot, rng)?;
        Ok(TestOutcome::new(statistic, critical, cfg.n_boot, cfg.alpha))
    }

    /// Bootstrap critical value over the live columns of all `regions`.
    pub(crate) fn critical_value(
        &self,
        regions: &[Region],
        cfg: &BirsConfig,
        rng: &RngStream,
    ) -> Result<f64> {
        let ranges: Vec<Range<usize>> = regions.iter().map(|&r| self.positions(r)).collect();
        self.design
            .restrict_ranges(&ranges)
            .critical_value(cfg.alpha, cfg.n_boot, rng)
    }

    /// Remove the columns of `regions` from further testing.
    pub(crate) fn drop_regions(&mut self, regions: &[Region]) {
        let keep: Vec<usize> = (0..self.live.len())
            .filter(|&i| !regions.iter().any(|r| r.contains(self.live[i])))
            .collect();
        self.design = self.design.restrict(&keep);
        self.live = keep.iter().map(|&i| self.live[i]).collect();
        for r in regions {
            self.contrasts[r.indices()].fill(0.0);
        }
    }
}

#[derive(Debug, Default)]
struct RoundOutcome {
    segments: Vec<DetectedSegment>,
    tests: u64,
    bootstraps: u64,
}

/// One level-by-level binary search. Depth `j` draws its bootstrap from
/// `rng.substream(j)`; index 0 is left to the round's global test.
fn search_round(
    ws: &Workspace,
    cfg: &BirsConfig,
    round: u32,
    rng: &RngStream,
) -> Result<RoundOutcome> {
    let terminal = cfg.terminal_length();
    let (left, right) = split_region(Region::full(ws.p())?)?;
    let mut active = vec![left, right];
    let mut depth = 1u32;
    let mut out = RoundOutcome::default();
    while !active.is_empty() {
        let stats: Vec<f64> = active.iter().map(|&r| ws.region_statistic(r)).collect();
        let critical = ws.critical_value(&active, cfg, &rng.substream(u64::from(depth)))?;
        out.tests += active.len() as u64 + 1;
        out.bootstraps += 1;
        let mut next = Vec::new();
        for (&region, &statistic) in active.iter().zip(&stats) {
            if statistic <= critical {
                continue;
            }
            if region.len() > terminal {
                let (a, b) = split_region(region)?;
                next.push(a);
                next.push(b);
            } else {
                out.segments.push(DetectedSegment {
                    region,
                    round,
                    depth,
                    statistic,
                });
            }
        }
        active = next;
        depth += 1;
    }
    Ok(out)
}

/// Binary search over all columns of `(x, y)`, assuming the global test has
/// already rejected. Returns the terminal segments and the number of tests.
pub fn binary_search_round(
    x: &SampleMatrix,
    y: &SampleMatrix,
    cfg: &BirsConfig,
    rng: &RngStream,
) -> Result<(Vec<DetectedSegment>, u64)> {
    cfg.validate(x.cols())?;
    let ws = Workspace::new(x, y)?;
    let out = search_round(&ws, cfg, 0, rng)?;
    Ok((out.segments, out.tests))
}

/// How detected columns are taken out before the next round.
enum Removal {
    /// Drop the columns from the working design, keeping an index map.
    Drop,
    /// Overwrite the columns with zeros and rebuild from the full matrices.
    ZeroSubstitute { x: SampleMatrix, y: SampleMatrix },
}

fn detect(
    x: &SampleMatrix,
    y: &SampleMatrix,
    cfg: &BirsConfig,
    rng: &RngStream,
    mut removal: Removal,
) -> Result<DetectionResult> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            x_cols: x.cols(),
            y_cols: y.cols(),
        });
    }
    cfg.validate(x.cols())?;
    let mut ws = Workspace::new(x, y)?;
    let mut result = DetectionResult::default();

    // Round r uses rng.substream(r): its global test on substream 0, its
    // binary-search depths on substreams 1, 2, ...
    let mut round_rng = rng.substream(0);
    let mut global = ws.global_test(cfg, &round_rng.substream(0))?;
    result.tests_performed += 1;
    result.bootstrap_runs += 1;

    while global.reject {
        if result.rounds_used == cfg.max_rounds {
            result.capped = true;
            break;
        }
        let round = search_round(&ws, cfg, result.rounds_used, &round_rng)?;
        result.rounds_used += 1;
        result.tests_performed += round.tests;
        result.bootstrap_runs += round.bootstraps;
        if round.segments.is_empty() {
            log::debug!(
                "round {} rejected globally but no segment passed depth 1",
                result.rounds_used - 1
            );
            break;
        }
        let found: Vec<Region> = round.segments.iter().map(|s| s.region).collect();
        result.segments.extend(round.segments);

        ws = match &mut removal {
            Removal::Drop => {
                ws.drop_regions(&found);
                ws
            }
            Removal::ZeroSubstitute { x, y } => {
                *x = zero_out(x, &found)?;
                *y = zero_out(y, &found)?;
                Workspace::new(x, y)?
            }
        };
        if result.rounds_used == cfg.max_rounds {
            result.capped = true;
            break;
        }
        round_rng = rng.substream(u64::from(result.rounds_used));
        global = ws.global_test(cfg, &round_rng.substream(0))?;
        result.tests_performed += 1;
        result.bootstrap_runs += 1;
    }

    result.regions = rearrange(&result.segments)?;
    Ok(result)
}

/// Full detection: global test, binary search, re-search on the remaining
/// columns while the global test keeps rejecting, then rearrangement.
pub fn birs_detect(
    x: &SampleMatrix,
    y: &SampleMatrix,
    cfg: &BirsConfig,
    rng: &RngStream,
) -> Result<DetectionResult> {
    detect(x, y, cfg, rng, Removal::Drop)
}

/// Same search, but detected columns are zeroed in full-width copies of the
/// samples instead of being dropped. Produces the same result as
/// [`birs_detect`]; kept as a reference path.
pub fn birs_detect_zero_substituted(
    x: &SampleMatrix,
    y: &SampleMatrix,
    cfg: &BirsConfig,
    rng: &RngStream,
) -> Result<DetectionResult> {
    let removal = Removal::ZeroSubstitute {
        x: x.clone(),
        y: y.clone(),
    };
    detect(x, y, cfg, rng, removal)
}
