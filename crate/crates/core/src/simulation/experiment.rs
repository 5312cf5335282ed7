use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::covariance::{build_covariance, CovarianceFactor, CovarianceSpec};
use super::signals::{
    decay_adjust, generate_signal_layout_from, genotype_transform, inject_signals, length_set,
    sample_mvn, SignalMode,
};
use crate::birs::BirsConfig;
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::metrics::{eval_detection, EvalReport};
use crate::region::{DetectionResult, Region};
use crate::rng::RngStream;

/// Covariance and data-type scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// M-dependence, equal covariances.
    Mes,
    /// M-dependence, `Sigma^X = 2 Sigma^Y`.
    Mns,
    /// Weak dependence, equal covariances.
    Wes,
    /// Weak dependence, `Sigma^X = 2 Sigma^Y`.
    Wns,
    /// Banded covariance with genotype coding.
    Genetic,
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mes => "mes",
            Self::Mns => "mns",
            Self::Wes => "wes",
            Self::Wns => "wns",
            Self::Genetic => "genetic",
        }
    }

    pub fn mode(&self) -> SignalMode {
        match self {
            Self::Genetic => SignalMode::Genetic,
            _ => SignalMode::Normal,
        }
    }

    /// Covariance specs for X and Y.
    pub fn covariances(&self, p: usize) -> (CovarianceSpec, CovarianceSpec) {
        let base = match self {
            Self::Mes | Self::Mns => CovarianceSpec::m_dependent(p),
            Self::Wes | Self::Wns => CovarianceSpec::weak(p),
            Self::Genetic => CovarianceSpec::genetic_band(p),
        };
        let x_scale = match self {
            Self::Mns | Self::Wns => 2.0,
            _ => 1.0,
        };
        (base.scaled(x_scale), base)
    }

    /// Default proportion of strong positions.
    pub fn default_gamma(&self) -> f64 {
        match self {
            Self::Genetic => 0.0625,
            _ => 0.25,
        }
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mes" | "mdep" | "m_dep" => Ok(Self::Mes),
            "mns" => Ok(Self::Mns),
            "wes" | "weak" => Ok(Self::Wes),
            "wns" => Ok(Self::Wns),
            "genetic" => Ok(Self::Genetic),
            other => Err(Error::Config(format!(
                "unknown design '{other}' (expected mes, mns, wes, wns or genetic)"
            ))),
        }
    }
}

/// Truncation parameter matched to the dimension: 6 at `p = 8192`, one less
/// per halving, never below 1 and always with `2^s < p`.
pub fn default_trunc(p: usize) -> u32 {
    let log2p = usize::BITS - 1 - p.max(2).leading_zeros();
    let scaled = 6i64 - (13i64 - i64::from(log2p)).max(0);
    (scaled.max(1) as u32).min(log2p.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub design: Design,
    /// Number of planted regions, 1..=4.
    pub beta: usize,
    pub delta: f64,
    pub delta0: f64,
    pub gamma: f64,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub runs: usize,
    pub detector: Detector,
    /// Weaken regions after the first by the decay adjustment.
    pub decay: bool,
    /// Candidate region lengths; `None` uses the dimension's default set.
    pub lengths: Option<Vec<usize>>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: p = 1024, n = 300, m = 200, 300 bootstrap
    /// draws, 200 runs, null signal.
    pub fn desk(design: Design) -> Self {
        let p = 1024;
        Self {
            design,
            beta: 4,
            delta: 0.0,
            delta0: 0.0,
            gamma: design.default_gamma(),
            p,
            n: 300,
            m: 200,
            runs: 200,
            detector: Detector::Birs(BirsConfig {
                alpha: 0.05,
                trunc_s: default_trunc(p),
                n_boot: 300,
                max_rounds: crate::birs::DEFAULT_MAX_ROUNDS,
            }),
            decay: false,
            lengths: None,
        }
    }

    pub fn is_null(&self) -> bool {
        self.delta == 0.0 && self.delta0 == 0.0
    }

    pub fn label(&self) -> String {
        if self.decay {
            format!("{}-decay", self.design.name())
        } else {
            self.design.name().to_string()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::EmptyExperiment);
        }
        if self.n < 2 || self.m < 2 {
            return Err(Error::Config(
                "sample sizes n and m must be at least 2".into(),
            ));
        }
        if self.delta < self.delta0 || self.delta0 < 0.0 {
            return Err(Error::Config(format!(
                "need delta >= delta0 >= 0, got delta {} and delta0 {}",
                self.delta, self.delta0
            )));
        }
        self.detector.validate(self.p)
    }
}

/// One simulated two-sample data set with its true signal regions.
#[derive(Debug, Clone)]
pub struct SimulatedPair {
    pub x: SampleMatrix,
    pub y: SampleMatrix,
    /// Regions carrying a nonzero mean difference (empty under the null).
    pub truth: Vec<Region>,
    pub mean: Vec<f64>,
}

/// Draw one data set. Substreams of `rng`: 0 layout, 1 signal values,
/// 2 the X sample, 3 the Y sample.
pub fn simulate_pair(
    cfg: &ExperimentConfig,
    factors: &(CovarianceFactor, CovarianceFactor),
    rng: &RngStream,
) -> Result<SimulatedPair> {
    let lengths = cfg.lengths.clone().unwrap_or_else(|| length_set(cfg.p));
    let layout = generate_signal_layout_from(&mut rng.substream(0), cfg.beta, cfg.p, &lengths)?
        .with_mode(cfg.design.mode())
        .with_delta(cfg.delta);
    let layout = if cfg.decay && !cfg.is_null() {
        let deltas = decay_adjust(cfg.delta, &layout, cfg.n, cfg.p)?;
        super::signals::SignalLayout { deltas, ..layout }
    } else {
        layout
    };
    let mean = inject_signals(&layout, cfg.p, cfg.delta0, cfg.gamma, &mut rng.substream(1))?;
    let mut x = sample_mvn(&mut rng.substream(2), cfg.n, &mean, &factors.0)?;
    let mut y = sample_mvn(&mut rng.substream(3), cfg.m, &vec![0.0; cfg.p], &factors.1)?;
    if cfg.design.mode() == SignalMode::Genetic {
        x = genotype_transform(&x);
        y = genotype_transform(&y);
    }
    let truth = if cfg.is_null() {
        Vec::new()
    } else {
        layout.regions.clone()
    };
    Ok(SimulatedPair { x, y, truth, mean })
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub truth: Vec<Region>,
    pub detection: DetectionResult,
    pub eval: EvalReport,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub label: String,
    pub method: &'static str,
    pub delta: f64,
    pub runs: usize,
    /// Fraction of runs with at least one detected point outside the truth.
    pub fwer: f64,
    /// Mean false discovery proportion.
    pub fdr: f64,
    /// Mean point-wise true positive rate.
    pub tpr: f64,
    pub mean_tests: f64,
    pub mean_runtime_ms: f64,
    pub records: Vec<RunRecord>,
}

impl ExperimentResult {
    pub const CSV_HEADER: &'static str =
        "design,method,delta,fwer,fdr,tpr,mean_tests,mean_runtime_ms";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.3},{:.3}",
            self.label,
            self.method,
            self.delta,
            self.fwer,
            self.fdr,
            self.tpr,
            self.mean_tests,
            self.mean_runtime_ms
        )
    }
}

/// Run `cfg.runs` independent replications; run `i` uses
/// `rng.substream(i)` (data on its substreams 0..=3, detection on 4).
pub fn run_experiment(cfg: &ExperimentConfig, rng: &RngStream) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (sx, sy) = cfg.design.covariances(cfg.p);
    let factors = (build_covariance(&sx)?, build_covariance(&sy)?);
    if factors.0.jitter() > 0.0 {
        log::info!(
            "{} covariance loaded with diagonal jitter {:.6e}",
            cfg.design.name(),
            factors.0.jitter()
        );
    }

    let records = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|run| {
            let run_rng = rng.substream(run);
            let pair = simulate_pair(cfg, &factors, &run_rng)?;
            let started = Instant::now();
            let detection = cfg
                .detector
                .detect(&pair.x, &pair.y, &run_rng.substream(4))?;
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            let eval = eval_detection(&detection.regions, &pair.truth, cfg.p)?;
            Ok(RunRecord {
                truth: pair.truth,
                detection,
                eval,
                runtime_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let runs = records.len() as f64;
    let mean = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).sum::<f64>() / runs;
    Ok(ExperimentResult {
        label: cfg.label(),
        method: cfg.detector.name(),
        delta: cfg.delta,
        runs: records.len(),
        fwer: mean(&|r| f64::from(u8::from(r.eval.n_false_points > 0))),
        fdr: mean(&|r| r.eval.fdp),
        tpr: mean(&|r| r.eval.tpr),
        mean_tests: mean(&|r| r.detection.tests_performed as f64),
        mean_runtime_ms: mean(&|r| r.runtime_ms),
        records,
    })
}
