//! Signal layouts, mean-shift injection, the genotype transform and the
//! decayed-strength adjustment.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::covariance::CovarianceFactor;
use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::region::Region;
use crate::rng::RngStream;

/// Region lengths at the reference dimension.
pub const REFERENCE_LENGTHS: [usize; 7] = [128, 160, 192, 224, 256, 288, 320];
pub const REFERENCE_P: usize = 8192;
pub const MAX_REGIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalMode {
    /// Strong values uniform on `(-delta, delta)`.
    Normal,
    /// Strong values uniform on `[-delta, -delta + delta0] ∪ [delta - delta0, delta]`.
    Genetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalLayout {
    pub regions: Vec<Region>,
    /// Strong-signal bound for each region.
    pub deltas: Vec<f64>,
    pub mode: SignalMode,
}

impl SignalLayout {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.deltas = vec![delta; self.regions.len()];
        self
    }

    pub fn with_mode(mut self, mode: SignalMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Candidate region lengths for dimension `p`: the reference set when it
/// fits (`p >= 8 * 320`), otherwise that set scaled by `p / 8192`.
pub fn length_set(p: usize) -> Vec<usize> {
    if p >= 8 * REFERENCE_LENGTHS[REFERENCE_LENGTHS.len() - 1] {
        REFERENCE_LENGTHS.to_vec()
    } else {
        REFERENCE_LENGTHS
            .iter()
            .map(|&l| ((l * p) as f64 / REFERENCE_P as f64).round().max(1.0) as usize)
            .collect()
    }
}

/// `beta` regions; region `i` (1-based) starts at `(2i - 1) p / 8` and takes
/// a length drawn without replacement from [`length_set`].
pub fn generate_signal_layout(rng: &mut RngStream, beta: usize, p: usize) -> Result<SignalLayout> {
    generate_signal_layout_from(rng, beta, p, &length_set(p))
}

pub fn generate_signal_layout_from(
    rng: &mut RngStream,
    beta: usize,
    p: usize,
    lengths: &[usize],
) -> Result<SignalLayout> {
    if !(1..=MAX_REGIONS).contains(&beta) {
        return Err(Error::Config(format!(
            "number of signal regions must lie in 1..={MAX_REGIONS}, got {beta}"
        )));
    }
    if p == 0 || !p.is_multiple_of(8) {
        return Err(Error::Config(format!(
            "dimension {p} must be a positive multiple of 8"
        )));
    }
    if lengths.len() < MAX_REGIONS {
        return Err(Error::Config(format!(
            "need at least {MAX_REGIONS} candidate lengths"
        )));
    }
    let eighth = p / 8;
    if let Some(&bad) = lengths.iter().find(|&&l| l == 0 || l > eighth) {
        return Err(Error::Config(format!(
            "region length {bad} does not fit the layout spacing {eighth}"
        )));
    }
    let g = rng.generator();
    let mut picked: Vec<usize> = index::sample(g, lengths.len(), MAX_REGIONS)
        .into_iter()
        .map(|i| lengths[i])
        .collect();
    picked.shuffle(g);
    let regions = (1..=beta)
        .map(|i| {
            let start = (2 * i - 1) * eighth;
            Region::within(start, start + picked[i - 1], p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SignalLayout {
        deltas: vec![0.0; regions.len()],
        regions,
        mode: SignalMode::Normal,
    })
}

fn uniform_symmetric(g: &mut impl Rng, bound: f64) -> f64 {
    if bound > 0.0 {
        g.random_range(-bound..bound)
    } else {
        0.0
    }
}

/// Mean vector of the shifted sample. Inside a region of length `L`,
/// `floor(gamma * L)` uniformly placed positions get strong values bounded by
/// the region's delta; the rest get regular values on `(-delta0, delta0)`.
/// Outside all regions the mean is zero.
pub fn inject_signals(
    layout: &SignalLayout,
    p: usize,
    delta0: f64,
    gamma: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if layout.deltas.len() != layout.regions.len() {
        return Err(Error::Config("one delta per region is required".into()));
    }
    if delta0 < 0.0 {
        return Err(Error::Config(format!(
            "delta0 must be nonnegative, got {delta0}"
        )));
    }
    let mut mu = vec![0.0; p];
    let g = rng.generator();
    for (region, &delta) in layout.regions.iter().zip(&layout.deltas) {
        if region.end() > p {
            return Err(Error::InvalidRegion {
                start: region.start(),
                end: region.end(),
                p,
            });
        }
        if delta < delta0 {
            return Err(Error::Config(format!(
                "delta {delta} must be at least delta0 {delta0}"
            )));
        }
        let len = region.len();
        let n_strong = (gamma * len as f64).floor() as usize;
        let mut strong = vec![false; len];
        for i in index::sample(g, len, n_strong) {
            strong[i] = true;
        }
        for (offset, is_strong) in strong.into_iter().enumerate() {
            mu[region.start() + offset] = if !is_strong {
                uniform_symmetric(g, delta0)
            } else {
                match layout.mode {
                    SignalMode::Normal => uniform_symmetric(g, delta),
                    SignalMode::Genetic => {
                        let magnitude = if delta0 > 0.0 {
                            g.random_range(delta - delta0..=delta)
                        } else {
                            delta
                        };
                        if g.random_bool(0.5) {
                            magnitude
                        } else {
                            -magnitude
                        }
                    }
                }
            };
        }
    }
    Ok(mu)
}

/// Per-region deltas for the decayed design: region 1 keeps `delta1`, region
/// `j >= 2` gets `delta1 - rho_j` with
/// `rho_j = 50 / sqrt(n) * (sqrt(ln(p n)) - sqrt(ln((p - sum_{k<j} L_k) n)))`.
pub fn decay_adjust(delta1: f64, layout: &SignalLayout, n: usize, p: usize) -> Result<Vec<f64>> {
    let n_f = n as f64;
    let head = (p as f64 * n_f).ln().sqrt();
    let mut removed = 0usize;
    let mut out = Vec::with_capacity(layout.regions.len());
    for (j, region) in layout.regions.iter().enumerate() {
        if removed >= p {
            return Err(Error::Config(format!(
                "regions before region {} cover the whole dimension",
                j + 1
            )));
        }
        let rho = if removed == 0 {
            0.0
        } else {
            50.0 / n_f.sqrt() * (head - (((p - removed) as f64) * n_f).ln().sqrt())
        };
        let adjusted = delta1 - rho;
        if j > 0 && adjusted <= 0.0 {
            return Err(Error::Config(format!(
                "decayed delta for region {} is {adjusted}, not positive",
                j + 1
            )));
        }
        out.push(adjusted);
        removed += region.len();
    }
    Ok(out)
}

/// Genotype coding `f(x) = 1{1.5 < x <= 3} + 2 * 1{x > 3}`.
pub fn genotype_code(x: f64) -> f64 {
    if x > 3.0 {
        2.0
    } else if x > 1.5 {
        1.0
    } else {
        0.0
    }
}

pub fn genotype_transform(m: &SampleMatrix) -> SampleMatrix {
    m.map(genotype_code)
}

/// `n` rows of `mean + F z` with `z` standard normal.
pub fn sample_mvn(
    rng: &mut RngStream,
    n: usize,
    mean: &[f64],
    factor: &CovarianceFactor,
) -> Result<SampleMatrix> {
    let p = factor.dim();
    if mean.len() != p {
        return Err(Error::Config(format!(
            "mean has length {}, covariance has dimension {p}",
            mean.len()
        )));
    }
    let mut values = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    for row in values.chunks_exact_mut(p) {
        rng.fill_standard_normal(&mut z);
        factor.apply(&z, row);
        for (v, m) in row.iter_mut().zip(mean) {
            *v += m;
        }
    }
    SampleMatrix::new(n, p, values)
}
