//! Toeplitz covariance structures used by the simulation designs, and their
//! lower-triangular factors.

use crate::error::{Error, Result};

/// Initial jitter tried when a banded matrix is not positive definite.
pub const BASE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceKind {
    /// `(1 + |j-k|)^(-exponent)` for `|j-k| <= bandwidth`, zero beyond.
    MDependent { bandwidth: usize, exponent: f64 },
    /// `rho^|j-k|`.
    Weak { rho: f64 },
    /// `rho^|j-k|` for `|j-k| <= bandwidth`, zero beyond.
    GeneticBand { rho: f64, bandwidth: usize },
}

impl CovarianceKind {
    pub fn entry(&self, lag: usize) -> f64 {
        match *self {
            Self::MDependent {
                bandwidth,
                exponent,
            } => {
                if lag <= bandwidth {
                    (1.0 + lag as f64).powf(-exponent)
                } else {
                    0.0
                }
            }
            Self::Weak { rho } => rho.powi(lag as i32),
            Self::GeneticBand { rho, bandwidth } => {
                if lag <= bandwidth {
                    rho.powi(lag as i32)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub p: usize,
    /// Multiplier applied to the whole matrix (2 for the unequal designs).
    pub scale: f64,
}

impl CovarianceSpec {
    pub fn m_dependent(p: usize) -> Self {
        Self {
            kind: CovarianceKind::MDependent {
                bandwidth: 64,
                exponent: 0.25,
            },
            p,
            scale: 1.0,
        }
    }

    pub fn weak(p: usize) -> Self {
        Self {
            kind: CovarianceKind::Weak { rho: 0.9 },
            p,
            scale: 1.0,
        }
    }

    pub fn genetic_band(p: usize) -> Self {
        Self {
            kind: CovarianceKind::GeneticBand {
                rho: 0.9,
                bandwidth: 64,
            },
            p,
            scale: 1.0,
        }
    }

    pub fn scaled(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.scale * self.kind.entry(j.abs_diff(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    /// Row `i` holds `L[i][i-b..=i]`, left-padded with zeros near the top.
    Banded { bandwidth: usize, band: Vec<f64> },
    /// Exact factor of `rho^|j-k|`, applied as an AR(1) recursion.
    Ar1 { rho: f64 },
}

/// Lower-triangular `F` with `F F^T` equal to the (possibly regularized)
/// covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFactor {
    p: usize,
    factor: Factor,
    /// `sqrt(scale)`.
    multiplier: f64,
    /// Diagonal loading added before factorization (0 if none was needed).
    jitter: f64,
}

/// Banded Cholesky of the Toeplitz matrix with first row `entries`
/// (length `bandwidth + 1`) plus `jitter` on the diagonal.
fn banded_cholesky(p: usize, entries: &[f64], jitter: f64) -> Option<Vec<f64>> {
    let b = entries.len() - 1;
    let w = b + 1;
    let mut band = vec![0.0; p * w];
    for i in 0..p {
        let lo = i.saturating_sub(b);
        for j in lo..=i {
            let mut sum = entries[i - j] + if i == j { jitter } else { 0.0 };
            let k_lo = lo.max(j.saturating_sub(b));
            for k in k_lo..j {
                sum -= band[i * w + (k + b - i)] * band[j * w + (k + b - j)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                band[i * w + b] = sum.sqrt();
            } else {
                band[i * w + (j + b - i)] = sum / band[j * w + b];
            }
        }
    }
    Some(band)
}

/// Factor a banded Toeplitz matrix, loading the diagonal with the smallest
/// jitter (found by bisection) that makes it positive definite, then
/// rescaling back to unit diagonal.
fn regularized_banded(p: usize, entries: &[f64]) -> Result<(Vec<f64>, f64)> {
    if let Some(band) = banded_cholesky(p, entries, 0.0) {
        return Ok((band, 0.0));
    }
    let mut hi = BASE_JITTER;
    let mut found = banded_cholesky(p, entries, hi);
    let mut lo = 0.0;
    while found.is_none() {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Factorization(format!(
                "banded matrix of dimension {p} is not positive definite under any tested loading"
            )));
        }
        found = banded_cholesky(p, entries, hi);
    }
    if hi > BASE_JITTER {
        while hi - lo > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            match banded_cholesky(p, entries, mid) {
                Some(band) => {
                    hi = mid;
                    found = Some(band);
                }
                None => lo = mid,
            }
        }
    }
    let mut band = found.expect("loop exits with a factor");
    let rescale = 1.0 / (entries[0] + hi).sqrt();
    band.iter_mut().for_each(|v| *v *= rescale);
    Ok((band, hi))
}

pub fn build_covariance(spec: &CovarianceSpec) -> Result<CovarianceFactor> {
    if spec.p == 0 {
        return Err(Error::Config(
            "covariance dimension must be positive".into(),
        ));
    }
    if !(spec.scale >= 0.0 && spec.scale.is_finite()) {
        return Err(Error::Config(format!(
            "covariance scale must be nonnegative, got {}",
            spec.scale
        )));
    }
    let (factor, jitter) = match spec.kind {
        CovarianceKind::Weak { rho } => {
            if rho.is_nan() || rho.abs() >= 1.0 {
                return Err(Error::Factorization(format!(
                    "autoregressive coefficient {rho} must lie in (-1, 1)"
                )));
            }
            (Factor::Ar1 { rho }, 0.0)
        }
        CovarianceKind::MDependent { bandwidth, .. }
        | CovarianceKind::GeneticBand { bandwidth, .. } => {
            let b = bandwidth.min(spec.p - 1);
            let entries: Vec<f64> = (0..=b).map(|lag| spec.kind.entry(lag)).collect();
            let (band, jitter) = regularized_banded(spec.p, &entries)?;
            (Factor::Banded { bandwidth: b, band }, jitter)
        }
    };
    Ok(CovarianceFactor {
        p: spec.p,
        factor,
        multiplier: spec.scale.sqrt(),
        jitter,
    })
}

impl CovarianceFactor {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `out = F z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.p);
        debug_assert_eq!(out.len(), self.p);
        let s = self.multiplier;
        match &self.factor {
            Factor::Banded { bandwidth, band } => {
                let b = *bandwidth;
                let w = b + 1;
                for i in 0..self.p {
                    let lo = i.saturating_sub(b);
                    let row = &band[i * w + (lo + b - i)..(i + 1) * w];
                    let acc: f64 = row.iter().zip(&z[lo..=i]).map(|(l, v)| l * v).sum();
                    out[i] = s * acc;
                }
            }
            Factor::Ar1 { rho } => {
                let innov = (1.0 - rho * rho).sqrt();
                let mut prev = z[0];
                out[0] = s * prev;
                for i in 1..self.p {
                    prev = rho * prev + innov * z[i];
                    out[i] = s * prev;
                }
            }
        }
    }

    /// Dense row-major copy of `F`.
    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.p;
        let mut dense = vec![0.0; p * p];
        let mut unit = vec![0.0; p];
        let mut col = vec![0.0; p];
        for k in 0..p {
            unit.fill(0.0);
            unit[k] = 1.0;
            self.apply(&unit, &mut col);
            for i in 0..p {
                dense[i * p + k] = col[i];
            }
        }
        dense
    }

    /// Dense row-major `F F^T`.
    pub fn covariance(&self) -> Vec<f64> {
        let p = self.p;
        let f = self.to_dense();
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| f[i * p + k] * f[j * p + k]).sum();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn target(spec: &CovarianceSpec) -> Vec<f64> {
        let p = spec.p;
        (0..p * p).map(|i| spec.entry(i / p, i % p)).collect()
    }

    #[test]
    fn weak_two_by_two() {
        let spec = CovarianceSpec::weak(2);
        let f = build_covariance(&spec).unwrap();
        let sigma = f.covariance();
        assert!(max_abs_diff(&sigma, &[1.0, 0.9, 0.9, 1.0]) < 1e-10);
        // lower triangular
        assert_eq!(f.to_dense()[1], 0.0);
    }

    #[test]
    fn weak_factor_reproduces_matrix() {
        let spec = CovarianceSpec::weak(40).scaled(2.0);
        let f = build_covariance(&spec).unwrap();
        assert!(max_abs_diff(&f.covariance(), &target(&spec)) < 1e-10);
    }

    #[test]
    fn m_dependent_entries() {
        let spec = CovarianceSpec::m_dependent(200);
        assert_eq!(spec.entry(5, 5), 1.0);
        assert!((spec.entry(3, 4) - 0.840_896_415_253_714_5).abs() < 1e-12);
        assert_eq!(spec.entry(0, 65), 0.0);
    }

    #[test]
    fn genetic_band_is_positive_definite() {
        let spec = CovarianceSpec::genetic_band(150);
        let f = build_covariance(&spec).unwrap();
        assert_eq!(f.jitter(), 0.0);
        assert!(max_abs_diff(&f.covariance(), &target(&spec)) < 1e-10);
    }

    #[test]
    fn small_band_needs_no_loading() {
        let spec = CovarianceSpec {
            kind: CovarianceKind::MDependent {
                bandwidth: 2,
                exponent: 0.25,
            },
            p: 30,
            scale: 1.0,
        };
        let f = build_covariance(&spec).unwrap();
        if f.jitter() == 0.0 {
            assert!(max_abs_diff(&f.covariance(), &target(&spec)) < 1e-10);
        }
    }

    #[test]
    fn indefinite_band_gets_minimal_loading() {
        let spec = CovarianceSpec::m_dependent(300);
        let f = build_covariance(&spec).unwrap();
        let tau = f.jitter();
        assert!(tau > 0.0);
        // loaded and rescaled: unit diagonal, off-diagonals shrunk by 1 + tau
        let sigma = f.covariance();
        let p = 300;
        for i in 0..p {
            assert!((sigma[i * p + i] - 1.0).abs() < 1e-9);
        }
        let expected = spec.entry(0, 1) / (1.0 + tau);
        assert!((sigma[1] - expected).abs() < 1e-9);
        // a visibly smaller loading does not factor
        let entries: Vec<f64> = (0..=64).map(|l| spec.kind.entry(l)).collect();
        assert!(banded_cholesky(p, &entries, tau * 0.99).is_none());
    }

    #[test]
    fn zero_scale_gives_zero_factor() {
        let f = build_covariance(&CovarianceSpec::weak(5).scaled(0.0)).unwrap();
        assert!(f.to_dense().iter().all(|&v| v == 0.0));
    }
}
