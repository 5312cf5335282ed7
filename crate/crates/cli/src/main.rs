//! `birs` command-line tool: detection on matrix files, simulation grids,
//! permutation calibration and the BiRS-versus-scan benchmark.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use birs_core::birs::{DEFAULT_MAX_ROUNDS, DEFAULT_TRUNC};
use birs_core::harness::{bench, permutation_calibration};
use birs_core::io::{
    experiment_csv, read_labels, read_matrix, split_by_labels, MatrixFormat, ResultDocument,
    ResultFormat,
};
use birs_core::simulation::{default_trunc, length_set, run_experiment, Design, ExperimentConfig};
use birs_core::{make_rng, BirsConfig, Detector, Error, SampleMatrix, ScanConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{parse_list, parse_switch, ConfigFile};

const DEFAULT_SEED: u64 = 20240101;
const DEFAULT_ALPHA: f64 = 0.05;
const DEFAULT_BOOT: usize = 1000;
const DESK_BOOT: usize = 300;
const DEFAULT_CALIBRATION_RUNS: usize = 200;
const DEFAULT_BENCH_RUNS: usize = 5;
const DEFAULT_BENCH_P: usize = 8192;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn config(message: String) -> Self {
        Self { code: 3, message }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Self::config(e.to_string())
        } else {
            Self::input(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "birs",
    version,
    about = "Signal region detection for two-sample data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect signal regions in a pair of samples.
    Detect(Opts),
    /// Run a Monte Carlo grid from a config file and write a CSV summary.
    Simulate(Opts),
    /// Permute group labels and report the empirical family-wise error rate.
    Calibrate(Opts),
    /// Time BiRS against the window scan on simulated data.
    Bench(Opts),
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// First sample (label 1), or the pooled matrix with --labels.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Second sample (label 0).
    #[arg(long)]
    y: Option<PathBuf>,
    /// Newline-delimited 0/1 labels splitting the rows of --x.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Multiplier bootstrap size.
    #[arg(long)]
    boot: Option<usize>,
    /// Truncation parameter: segments of length at most 2^trunc are terminal.
    #[arg(long)]
    trunc: Option<u32>,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// birs or scan (simulate accepts a comma separated list).
    #[arg(long)]
    method: Option<String>,
    /// Scan window lengths, comma separated.
    #[arg(long)]
    windows: Option<String>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or tsv for detection results.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; 0 uses all available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo runs or permutations.
    #[arg(long)]
    runs: Option<usize>,
    /// Flat key = value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Flags merged with the config file.
struct Settings {
    opts: Opts,
    file: ConfigFile,
}

impl Settings {
    fn new(opts: Opts) -> CliResult<Self> {
        let file = match &opts.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Ok(Self { opts, file })
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone()
            .or_else(|| self.file.raw(key).map(PathBuf::from))
    }

    fn alpha(&self) -> CliResult<f64> {
        Ok(self
            .file
            .pick(self.opts.alpha, "alpha")?
            .unwrap_or(DEFAULT_ALPHA))
    }

    fn boot(&self, default: usize) -> CliResult<usize> {
        Ok(self.file.pick(self.opts.boot, "boot")?.unwrap_or(default))
    }

    fn trunc(&self, default: u32) -> CliResult<u32> {
        Ok(self.file.pick(self.opts.trunc, "trunc")?.unwrap_or(default))
    }

    fn max_rounds(&self) -> CliResult<u32> {
        Ok(self
            .file
            .pick(self.opts.max_rounds, "max_rounds")?
            .unwrap_or(DEFAULT_MAX_ROUNDS))
    }

    fn seed(&self) -> CliResult<u64> {
        Ok(self
            .file
            .pick(self.opts.seed, "seed")?
            .unwrap_or(DEFAULT_SEED))
    }

    fn threads(&self) -> CliResult<usize> {
        Ok(self.file.pick(self.opts.threads, "threads")?.unwrap_or(0))
    }

    fn runs(&self, default: usize) -> CliResult<usize> {
        Ok(self.file.pick(self.opts.runs, "runs")?.unwrap_or(default))
    }

    fn methods(&self) -> CliResult<Vec<String>> {
        let text = self
            .file
            .pick_string(self.opts.method.clone(), "method")
            .unwrap_or_else(|| "birs".into());
        let methods: Vec<String> = text
            .split(',')
            .map(|m| m.trim().to_ascii_lowercase())
            .collect();
        for m in &methods {
            if m != "birs" && m != "scan" {
                return Err(CliError::config(format!(
                    "unknown method '{m}' (expected birs or scan)"
                )));
            }
        }
        Ok(methods)
    }

    fn single_method(&self) -> CliResult<String> {
        let mut methods = self.methods()?;
        if methods.len() != 1 {
            return Err(CliError::config(
                "exactly one method is required here".into(),
            ));
        }
        Ok(methods.remove(0))
    }

    fn windows(&self) -> CliResult<Option<Vec<usize>>> {
        self.file
            .pick_string(self.opts.windows.clone(), "windows")
            .map(|w| parse_list(&w, "window length"))
            .transpose()
    }

    fn out(&self) -> Option<PathBuf> {
        self.path(&self.opts.out, "out")
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.file.pick(None, key)
    }

    fn echo(&self, detector: &Detector, seed: u64) -> serde_json::Value {
        match detector {
            Detector::Birs(c) => json!({
                "method": "birs",
                "alpha": c.alpha,
                "n_boot": c.n_boot,
                "trunc_s": c.trunc_s,
                "max_rounds": c.max_rounds,
                "seed": seed,
            }),
            Detector::Scan(c) => json!({
                "method": "scan",
                "alpha": c.alpha,
                "n_boot": c.n_boot,
                "windows": c.window_lengths,
                "seed": seed,
            }),
        }
    }

    /// Detector for dimension `p`; `default_windows` applies to the scan
    /// when no lengths are configured.
    fn detector(
        &self,
        method: &str,
        p: usize,
        boot_default: usize,
        trunc_default: u32,
        default_windows: Option<Vec<usize>>,
    ) -> CliResult<Detector> {
        let alpha = self.alpha()?;
        let n_boot = self.boot(boot_default)?;
        let detector = match method {
            "birs" => Detector::Birs(BirsConfig {
                alpha,
                trunc_s: self.trunc(trunc_default)?,
                n_boot,
                max_rounds: self.max_rounds()?,
            }),
            "scan" => {
                let windows = self
                    .windows()?
                    .or(default_windows)
                    .ok_or_else(|| CliError::config("the scan method needs --windows".into()))?;
                Detector::Scan(ScanConfig::new(windows, alpha, n_boot))
            }
            other => return Err(CliError::config(format!("unknown method '{other}'"))),
        };
        detector.validate(p)?;
        Ok(detector)
    }

    /// X and Y from `--x`/`--y` or from `--x` split by `--labels`.
    fn samples(&self) -> CliResult<(SampleMatrix, SampleMatrix)> {
        let x_path = self
            .path(&self.opts.x, "x")
            .ok_or_else(|| CliError::config("--x is required".into()))?;
        let load = |p: &Path| read_matrix(p, MatrixFormat::from_path(p));
        let x = load(&x_path)?;
        if let Some(labels) = self.path(&self.opts.labels, "labels") {
            if self.path(&self.opts.y, "y").is_some() {
                return Err(CliError::config(
                    "use either --y or --labels, not both".into(),
                ));
            }
            return Ok(split_by_labels(&x, &read_labels(&labels)?)?);
        }
        let y_path = self
            .path(&self.opts.y, "y")
            .ok_or_else(|| CliError::config("--y or --labels is required".into()))?;
        let y = load(&y_path)?;
        if x.cols() != y.cols() {
            return Err(Error::DimensionMismatch {
                x_cols: x.cols(),
                y_cols: y.cols(),
            }
            .into());
        }
        Ok((x, y))
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::input(format!("cannot write to standard output: {e}"))),
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(f))
}

fn cmd_detect(s: &Settings) -> CliResult<()> {
    let (x, y) = s.samples()?;
    let method = s.single_method()?;
    let detector = s.detector(&method, x.cols(), DEFAULT_BOOT, DEFAULT_TRUNC, None)?;
    let seed = s.seed()?;
    let out = s.out();
    let format = match s.file.pick_string(s.opts.format.clone(), "format") {
        Some(f) => f.parse::<ResultFormat>()?,
        None => match out
            .as_deref()
            .and_then(|p| p.extension())
            .and_then(|e| e.to_str())
        {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => ResultFormat::Tsv,
            _ => ResultFormat::Json,
        },
    };

    let started = Instant::now();
    let result = with_pool(s.threads()?, || detector.detect(&x, &y, &make_rng(seed)))??;
    let elapsed = started.elapsed().as_secs_f64();

    let doc = ResultDocument::new(&result, s.echo(&detector, seed));
    let text = match format {
        ResultFormat::Json => doc.to_json()? + "\n",
        ResultFormat::Tsv => doc.to_tsv(),
    };
    emit(out.as_deref(), &text)?;
    eprintln!(
        "{method}: {} region(s), {} tests, {elapsed:.3} s",
        result.regions.len(),
        result.tests_performed
    );
    for r in &doc.regions {
        eprintln!(
            "  [{}, {}] round {} depth {} statistic {:.4}",
            r.start_1based, r.end_1based_inclusive, r.round, r.depth, r.statistic
        );
    }
    Ok(())
}

fn cmd_simulate(s: &Settings) -> CliResult<()> {
    let designs: Vec<Design> = parse_list(s.file.raw("design").unwrap_or("mes"), "design")
        .map_err(|_| {
            CliError::config(format!(
                "invalid design list '{}'",
                s.file.raw("design").unwrap_or("")
            ))
        })?;
    let deltas: Vec<f64> = match s.file.raw("delta") {
        Some(d) => parse_list(d, "delta")?,
        None => vec![0.0],
    };
    let decays = match s.file.raw("decay") {
        Some(d) => parse_switch(d)?,
        None => vec![false],
    };
    let methods = s.methods()?;
    let seed = s.seed()?;

    let mut results = Vec::new();
    for &design in &designs {
        for &delta in &deltas {
            for method in &methods {
                for &decay in &decays {
                    let mut cfg = ExperimentConfig::desk(design);
                    if let Some(p) = s.get("p")? {
                        cfg.p = p;
                    }
                    cfg.n = s.get("n")?.unwrap_or(cfg.n);
                    cfg.m = s.get("m")?.unwrap_or(cfg.m);
                    cfg.beta = s.get("beta")?.unwrap_or(cfg.beta);
                    cfg.gamma = s.get("gamma")?.unwrap_or(cfg.gamma);
                    cfg.runs = s.runs(cfg.runs)?;
                    cfg.delta = delta;
                    let default_delta0 = if delta > 0.0 { 0.05f64.min(delta) } else { 0.0 };
                    cfg.delta0 = s.get("delta0")?.unwrap_or(default_delta0);
                    cfg.decay = decay;
                    cfg.detector = s.detector(
                        method,
                        cfg.p,
                        DESK_BOOT,
                        default_trunc(cfg.p),
                        Some(length_set(cfg.p)),
                    )?;
                    cfg.validate()?;
                    let started = Instant::now();
                    let res = with_pool(s.threads()?, || run_experiment(&cfg, &make_rng(seed)))??;
                    eprintln!(
                        "{} {} delta {}: fwer {:.3} fdr {:.3} tpr {:.3} ({:.1} s)",
                        res.label,
                        res.method,
                        res.delta,
                        res.fwer,
                        res.fdr,
                        res.tpr,
                        started.elapsed().as_secs_f64()
                    );
                    results.push(res);
                }
            }
        }
    }
    emit(s.out().as_deref(), &experiment_csv(&results))
}

fn cmd_calibrate(s: &Settings) -> CliResult<()> {
    let (x, y) = s.samples()?;
    let method = s.single_method()?;
    let detector = s.detector(&method, x.cols(), DEFAULT_BOOT, DEFAULT_TRUNC, None)?;
    let seed = s.seed()?;
    let runs = s.runs(DEFAULT_CALIBRATION_RUNS)?;
    let started = Instant::now();
    let cal = with_pool(s.threads()?, || {
        permutation_calibration(&x, &y, &detector, runs, &make_rng(seed))
    })??;
    let rejections = cal
        .detections
        .iter()
        .filter(|d| !d.regions.is_empty())
        .count();
    let detections: Vec<ResultDocument> = cal
        .detections
        .iter()
        .map(|d| ResultDocument::new(d, serde_json::Value::Null))
        .collect();
    let doc = json!({
        "runs": cal.runs,
        "rejections": rejections,
        "fwer": cal.fwer,
        "config_echo": s.echo(&detector, seed),
        "detections": detections,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
    emit(s.out().as_deref(), &text)?;
    eprintln!(
        "{method}: {rejections} of {runs} permutation(s) with a detection, fwer {:.4} ({:.1} s)",
        cal.fwer,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_bench(s: &Settings) -> CliResult<()> {
    let design: Design = s
        .file
        .raw("design")
        .unwrap_or("mes")
        .parse()
        .map_err(CliError::from)?;
    let mut cfg = ExperimentConfig::desk(design);
    cfg.p = s.get("p")?.unwrap_or(DEFAULT_BENCH_P);
    cfg.n = s.get("n")?.unwrap_or(cfg.n);
    cfg.m = s.get("m")?.unwrap_or(cfg.m);
    cfg.beta = s.get("beta")?.unwrap_or(cfg.beta);
    cfg.gamma = s.get("gamma")?.unwrap_or(cfg.gamma);
    cfg.delta = s.get("delta")?.unwrap_or(0.0);
    let default_delta0 = if cfg.delta > 0.0 {
        0.05f64.min(cfg.delta)
    } else {
        0.0
    };
    cfg.delta0 = s.get("delta0")?.unwrap_or(default_delta0);
    let runs = s.runs(DEFAULT_BENCH_RUNS)?;
    let seed = s.seed()?;

    let birs = match s.detector("birs", cfg.p, DESK_BOOT, default_trunc(cfg.p), None)? {
        Detector::Birs(c) => c,
        Detector::Scan(_) => unreachable!("birs requested"),
    };
    let scan = match s.detector("scan", cfg.p, DESK_BOOT, 0, Some(length_set(cfg.p)))? {
        Detector::Scan(c) => c,
        Detector::Birs(_) => unreachable!("scan requested"),
    };
    cfg.detector = Detector::Birs(birs);
    cfg.runs = runs;
    cfg.validate()?;

    let report = with_pool(s.threads()?, || {
        bench(&cfg, &birs, &scan, runs, &make_rng(seed))
    })??;
    let rows: Vec<serde_json::Value> = report
        .runs
        .iter()
        .map(|r| {
            json!({
                "birs_tests": r.birs_tests,
                "birs_bound": r.birs_bound,
                "scan_tests": r.scan_tests,
                "birs_ms": r.birs_ms,
                "scan_ms": r.scan_ms,
                "birs": ResultDocument::new(&r.birs, serde_json::Value::Null),
                "scan": ResultDocument::new(&r.scan, serde_json::Value::Null),
            })
        })
        .collect();
    let doc = json!({
        "p": report.p,
        "windows": report.windows,
        "birs_ms_total": report.total_birs_ms(),
        "scan_ms_total": report.total_scan_ms(),
        "runs": rows,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
    emit(s.out().as_deref(), &text)?;

    eprintln!("run  birs_tests  bound  scan_tests  birs_ms  scan_ms");
    for (i, r) in report.runs.iter().enumerate() {
        eprintln!(
            "{i:>3}  {:>10}  {:>5}  {:>10}  {:>7.1}  {:>7.1}",
            r.birs_tests, r.birs_bound, r.scan_tests, r.birs_ms, r.scan_ms
        );
    }
    eprintln!(
        "total wall time: birs {:.1} ms, scan {:.1} ms",
        report.total_birs_ms(),
        report.total_scan_ms()
    );
    if report.windows.len() >= 2 && report.runs.iter().any(|r| r.birs_tests >= r.scan_tests) {
        return Err(CliError {
            code: 1,
            message: "birs used at least as many tests as the scan".into(),
        });
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Detect(o) => cmd_detect(&Settings::new(o)?),
        Command::Simulate(o) => cmd_simulate(&Settings::new(o)?),
        Command::Calibrate(o) => cmd_calibrate(&Settings::new(o)?),
        Command::Bench(o) => cmd_bench(&Settings::new(o)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
