//! Two-sample sup-norm mean test with Gaussian multiplier bootstrap
//! calibration.
//!
//! The statistic is `max_j |S_n^X[j] - sqrt(n/m) S_m^Y[j]|` over the columns
//! under test, where `S` are column sums scaled by `1/sqrt(rows)`. Each
//! bootstrap replicate multiplies the centered rows of both samples by one
//! vector of `n + m` standard normal weights and takes the same sup-norm.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::rng::RngStream;

/// Replicates evaluated together so each design row is loaded once per block.
const REPLICATE_BLOCK: usize = 8;
/// Columns per cache tile of the projection kernel.
const COLUMN_TILE: usize = 256;
/// Design rows folded into each pass over an accumulator tile.
const ROW_UNROLL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
    pub n_boot: usize,
    pub alpha: f64,
}

impl TestOutcome {
    pub fn new(statistic: f64, critical: f64, n_boot: usize, alpha: f64) -> Self {
        Self {
            statistic,
            critical,
            reject: statistic > critical,
            n_boot,
            alpha,
        }
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn check_pair(x: &SampleMatrix, y: &SampleMatrix) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            x_cols: x.cols(),
            y_cols: y.cols(),
        });
    }
    Ok(())
}

/// Column sums divided by `sqrt(rows)`.
pub fn normalized_sum(m: &SampleMatrix) -> Vec<f64> {
    let scale = (m.rows() as f64).sqrt();
    m.column_sums().into_iter().map(|s| s / scale).collect()
}

/// Signed per-column contrasts `S_n^X[j] - sqrt(n/m) S_m^Y[j]`.
pub fn column_contrasts(x: &SampleMatrix, y: &SampleMatrix) -> Result<Vec<f64>> {
    check_pair(x, y)?;
    let ratio = (x.rows() as f64 / y.rows() as f64).sqrt();
    Ok(normalized_sum(x)
        .into_iter()
        .zip(normalized_sum(y))
        .map(|(sx, sy)| sx - ratio * sy)
        .collect())
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

pub fn dcf_statistic(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    Ok(max_abs(&column_contrasts(x, y)?))
}

pub fn center_columns(m: &SampleMatrix) -> Result<SampleMatrix> {
    if m.rows() < 2 {
        return Err(Error::TooFewRows {
            rows: m.rows(),
            required: 2,
        });
    }
    let n = m.rows() as f64;
    let means: Vec<f64> = m.column_sums().into_iter().map(|s| s / n).collect();
    let mut out = m.clone();
    let cols = out.cols();
    for row in out.values_mut().chunks_exact_mut(cols) {
        for (v, mean) in row.iter_mut().zip(&means) {
            *v -= mean;
        }
    }
    Ok(out)
}

/// Column-centered copies of both samples.
#[derive(Debug, Clone)]
pub struct CenteredPair {
    pub xc: SampleMatrix,
    pub yc: SampleMatrix,
    pub n: usize,
    pub m: usize,
    /// `sqrt(n / m)`.
    pub scale: f64,
}

impl CenteredPair {
    pub fn new(x: &SampleMatrix, y: &SampleMatrix) -> Result<Self> {
        check_pair(x, y)?;
        Ok(Self {
            xc: center_columns(x)?,
            yc: center_columns(y)?,
            n: x.rows(),
            m: y.rows(),
            scale: (x.rows() as f64 / y.rows() as f64).sqrt(),
        })
    }

    pub fn cols(&self) -> usize {
        self.xc.cols()
    }

    pub fn design(&self) -> MultiplierDesign {
        MultiplierDesign::from_centered(self)
    }
}

/// One multiplier bootstrap replicate, evaluated directly from the two
/// weighted sums.
pub fn bootstrap_replicate(cp: &CenteredPair, e: &[f64]) -> Result<f64> {
    if e.len() != cp.n + cp.m {
        return Err(Error::MultiplierLength {
            expected: cp.n + cp.m,
            found: e.len(),
        });
    }
    let p = cp.cols();
    let mut sx = vec![0.0; p];
    let mut sy = vec![0.0; p];
    for (row, &w) in cp.xc.row_iter().zip(&e[..cp.n]) {
        for (acc, v) in sx.iter_mut().zip(row) {
            *acc += w * v;
        }
    }
    for (row, &w) in cp.yc.row_iter().zip(&e[cp.n..]) {
        for (acc, v) in sy.iter_mut().zip(row) {
            *acc += w * v;
        }
    }
    let (rn, rm) = ((cp.n as f64).sqrt(), (cp.m as f64).sqrt());
    Ok(sx.iter().zip(&sy).fold(0.0, |acc: f64, (a, b)| {
        acc.max((a / rn - cp.scale * b / rm).abs())
    }))
}

/// Stacked, pre-scaled centered rows: the first `n` rows are `xc_i / sqrt(n)`
/// and the last `m` rows are `-sqrt(n) / m * yc_i`, so a replicate's
/// contrast vector is `sum_k e_k * row_k`.
///
/// Every output column is accumulated over rows in the same fixed order no
/// matter how columns are tiled or which other columns are present, so a
/// column's replicate value is bit-identical across column subsets.
#[derive(Debug, Clone)]
pub struct MultiplierDesign {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MultiplierDesign {
    pub fn from_centered(cp: &CenteredPair) -> Self {
        let p = cp.cols();
        let x_scale = 1.0 / (cp.n as f64).sqrt();
        let y_scale = -(cp.n as f64).sqrt() / cp.m as f64;
        let mut data = Vec::with_capacity((cp.n + cp.m) * p);
        data.extend(cp.xc.values().iter().map(|v| v * x_scale));
        data.extend(cp.yc.values().iter().map(|v| v * y_scale));
        Self {
            rows: cp.n + cp.m,
            cols: p,
            data,
        }
    }

    pub fn from_pair(x: &SampleMatrix, y: &SampleMatrix) -> Result<Self> {
        Ok(CenteredPair::new(x, y)?.design())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Design over a subset of columns, in the given order.
    pub fn restrict(&self, columns: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for row in self.data.chunks_exact(self.cols) {
            data.extend(columns.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            cols: columns.len(),
            data,
        }
    }

    /// Design over a union of contiguous column ranges.
    pub fn restrict_ranges(&self, ranges: &[std::ops::Range<usize>]) -> Self {
        let cols = ranges.iter().map(|r| r.len()).sum();
        let mut data = Vec::with_capacity(self.rows * cols);
        for row in self.data.chunks_exact(self.cols) {
            for r in ranges {
                data.extend_from_slice(&row[r.clone()]);
            }
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// Contrast vectors for a block of multiplier vectors, written into
    /// `out[b * cols .. (b + 1) * cols]`.
    ///
    /// Every column is accumulated over rows `0..rows` in order starting from
    /// zero, so its value does not depend on which other columns are present.
    fn project_block(&self, weights: &[Vec<f64>], out: &mut [f64]) {
        let p = self.cols;
        out.fill(0.0);
        if p == 0 {
            return;
        }
        let rows: Vec<&[f64]> = self.data.chunks_exact(p).collect();
        let unrolled = self.rows - self.rows % ROW_UNROLL;
        let mut tile_start = 0;
        while tile_start < p {
            let tile = tile_start..(tile_start + COLUMN_TILE).min(p);
            for k in (0..unrolled).step_by(ROW_UNROLL) {
                let z0 = &rows[k][tile.clone()];
                let z1 = &rows[k + 1][tile.clone()];
                let z2 = &rows[k + 2][tile.clone()];
                let z3 = &rows[k + 3][tile.clone()];
                for (b, e) in weights.iter().enumerate() {
                    let (w0, w1, w2, w3) = (e[k], e[k + 1], e[k + 2], e[k + 3]);
                    let acc = &mut out[b * p + tile.start..b * p + tile.end];
                    for j in 0..acc.len() {
                        let mut a = acc[j];
                        a += w0 * z0[j];
                        a += w1 * z1[j];
                        a += w2 * z2[j];
                        a += w3 * z3[j];
                        acc[j] = a;
                    }
                }
            }
            for k in unrolled..self.rows {
                let z = &rows[k][tile.clone()];
                for (b, e) in weights.iter().enumerate() {
                    let w = e[k];
                    let acc = &mut out[b * p + tile.start..b * p + tile.end];
                    for (a, v) in acc.iter_mut().zip(z) {
                        *a += w * v;
                    }
                }
            }
            tile_start = tile.end;
        }
    }

    /// Contrast vector for a single multiplier vector.
    pub fn project(&self, e: &[f64]) -> Result<Vec<f64>> {
        if e.len() != self.rows {
            return Err(Error::MultiplierLength {
                expected: self.rows,
                found: e.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        self.project_block(&[e.to_vec()], &mut out);
        Ok(out)
    }

    pub fn replicate(&self, e: &[f64]) -> Result<f64> {
        Ok(max_abs(&self.project(e)?))
    }

    /// `n_boot` replicates, each reduced from its contrast vector by
    /// `reduce`. Replicate `b` draws its `n + m` weights from
    /// `rng.substream(b)`, so the output does not depend on thread count.
    pub fn replicates_with<F>(&self, rng: &RngStream, n_boot: usize, reduce: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let blocks: Vec<usize> = (0..n_boot).step_by(REPLICATE_BLOCK).collect();
        let per_block: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|&first| {
                let last = (first + REPLICATE_BLOCK).min(n_boot);
                let weights: Vec<Vec<f64>> = (first..last)
                    .map(|b| rng.substream(b as u64).sample_standard_normal(self.rows))
                    .collect();
                let mut out = vec![0.0; weights.len() * self.cols];
                self.project_block(&weights, &mut out);
                if self.cols == 0 {
                    return vec![0.0; weights.len()];
                }
                out.chunks_exact(self.cols).map(&reduce).collect()
            })
            .collect();
        per_block.into_iter().flatten().collect()
    }

    pub fn replicates(&self, rng: &RngStream, n_boot: usize) -> Vec<f64> {
        self.replicates_with(rng, n_boot, max_abs)
    }

    pub fn critical_value(&self, alpha: f64, n_boot: usize, rng: &RngStream) -> Result<f64> {
        validate_alpha(alpha)?;
        if n_boot == 0 {
            return Err(Error::InvalidBootstrapSize);
        }
        critical_value_from_replicates(&self.replicates(rng, n_boot), alpha)
    }
}

/// 1-based rank `ceil(n_boot * (1 - alpha))` of the order statistic used as
/// critical value, clamped to `[1, n_boot]`. Products within `1e-9` of an
/// integer are taken as that integer so that decimal levels such as 0.3
/// behave as written.
pub fn percentile_rank(n_boot: usize, alpha: f64) -> usize {
    let target = n_boot as f64 * (1.0 - alpha);
    let nearest = target.round();
    let rank = if (target - nearest).abs() <= 1e-9 * target.max(1.0) {
        nearest
    } else {
        target.ceil()
    };
    (rank as usize).clamp(1, n_boot)
}

/// Critical value from precomputed replicate values.
pub fn critical_value_from_replicates(replicates: &[f64], alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    if replicates.is_empty() {
        return Err(Error::InvalidBootstrapSize);
    }
    let rank = percentile_rank(replicates.len(), alpha);
    let mut sorted = replicates.to_vec();
    let (_, value, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*value)
}

/// Critical value from explicit multiplier vectors, one per replicate.
pub fn critical_value_with_multipliers(
    cp: &CenteredPair,
    multipliers: &[Vec<f64>],
    alpha: f64,
) -> Result<f64> {
    let design = cp.design();
    let replicates = multipliers
        .iter()
        .map(|e| design.replicate(e))
        .collect::<Result<Vec<_>>>()?;
    critical_value_from_replicates(&replicates, alpha)
}

pub fn bootstrap_critical_value(
    x: &SampleMatrix,
    y: &SampleMatrix,
    alpha: f64,
    n_boot: usize,
    rng: &RngStream,
) -> Result<f64> {
    validate_alpha(alpha)?;
    if n_boot == 0 {
        return Err(Error::InvalidBootstrapSize);
    }
    MultiplierDesign::from_pair(x, y)?.critical_value(alpha, n_boot, rng)
}

pub fn dcf_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    alpha: f64,
    n_boot: usize,
    rng: &RngStream,
) -> Result<TestOutcome> {
    let statistic = dcf_statistic(x, y)?;
    let critical = bootstrap_critical_value(x, y, alpha, n_boot, rng)?;
    Ok(TestOutcome::new(statistic, critical, n_boot, alpha))
}
