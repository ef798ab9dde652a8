//! Experiment orchestration behind the `qbm` command line: ensemble runs,
//! baseline curves, noise checks and the bundled presets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bath::BathSpec;
use crate::config::{ExperimentConfig, ReferenceSection};
use crate::dump;
use crate::dynamics::{run_ensemble, Ensemble, EnsembleOptions, ProgressFn, Schedule};
use crate::error::{Error, Result};
use crate::noise::{autocorrelation_per_path, FrequencyGrid, NoiseStatistics, NoiseSynthesizer};
use crate::observables::{estimate, msd, ObservableSeries};
use crate::reference::{p2_quadrature, response, sigma_analytical, stationary_p2};
use crate::rng::{stream, StreamPurpose};
use crate::stats::{mean_and_se, runs_test, whiten};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QBM_OUT_DIR";

/// Column header of every series CSV.
pub const CSV_HEADER: &str = "time,estimate,standard_error,effective_n";

/// Largest tolerated |z| in a noise check.
pub const NOISE_CHECK_Z: f64 = 4.0;

/// Bundled experiment configs, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig2-white", include_str!("../presets/fig2-white.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig3-classical", include_str!("../presets/fig3-classical.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// First comment line of a preset, without the `#`.
pub fn preset_summary(text: &str) -> &str {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(str::trim)
        .unwrap_or("")
}

/// Load a config from a file, or from the preset of that name when no such
/// file exists.
pub fn load_config(arg: &str) -> Result<ExperimentConfig> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = preset(arg) {
            return ExperimentConfig::parse(text, &format!("preset:{arg}"));
        }
    }
    ExperimentConfig::from_path(path)
}

/// Command-line overrides applied on top of a config.
#[derive(Default, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub n_traj: Option<usize>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub dump_noise: bool,
    pub dump_trajectories: bool,
    pub progress: Option<Arc<ProgressFn>>,
}

impl RunOptions {
    /// Config with overrides applied and re-validated.
    pub fn apply(&self, cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = cfg.clone();
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(n) = self.n_traj {
            cfg.run.n_traj = n;
        }
        if let Some(w) = self.workers {
            cfg.run.workers = Some(w);
        }
        if let Some(d) = &self.out_dir {
            cfg.run.out_dir = Some(d.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output directory: explicit setting, then `QBM_OUT_DIR`, then `.`.
pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.run
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Run `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Misuse(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    schedule: &'a Schedule,
    master_seed: u64,
    n_traj: usize,
    workers: usize,
    noise_grid: FrequencyGrid,
    failed_trajectories: Vec<FailureEntry>,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

#[derive(Debug, Serialize)]
struct FailureEntry {
    id: u64,
    error: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// One series per configured observable, in config order.
    pub series: Vec<ObservableSeries>,
    pub reference: Option<ObservableSeries>,
    pub failed: usize,
    pub wall_time: f64,
}

/// Run an experiment and write its CSVs, manifest and optional dumps.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = opts.apply(cfg)?;
    let workers = cfg.workers();
    with_workers(workers, || run_inner(&cfg, opts))?
}

fn run_inner(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let started = Instant::now();
    let spec = cfg.bath()?;
    let sched = cfg.schedule()?;
    let n_traj = cfg.run.n_traj;
    let seed = cfg.run.seed;
    let out_dir = resolve_out_dir(cfg);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let ens_opts = EnsembleOptions {
        keep_noise: opts.dump_noise,
        progress: opts.progress.clone(),
        ..Default::default()
    };
    let ens = run_ensemble(&spec, &cfg.potential, &sched, n_traj, cfg.noise.statistics, seed, &ens_opts)?;

    let mut series = Vec::new();
    for o in &cfg.observables {
        let mut s = estimate(&ens.trajectories, &o.symbol, spec.hbar)?;
        s.name = o.name.clone();
        series.push(s);
    }
    let reference = match &cfg.reference {
        Some(r) => Some(reference_series(cfg, r, &spec, &sched, &ens)?),
        None => None,
    };

    let mut files = Vec::new();
    for s in &series {
        files.push(write_csv(&out_dir.join(format!("{}.csv", s.name)), s)?);
    }
    if let Some(r) = &reference {
        files.push(write_csv(&out_dir.join(format!("{}_reference.csv", r.name)), r)?);
    }
    if opts.dump_noise {
        let p = out_dir.join("noise.bin");
        dump::write_noise(&p, seed, &ens.noise)?;
        files.push(p);
    }
    if opts.dump_trajectories {
        let p = out_dir.join("trajectories.bin");
        dump::write_trajectories(&p, seed, &ens.trajectories)?;
        files.push(p);
    }

    let wall_time = started.elapsed().as_secs_f64();
    let manifest_path = out_dir.join("manifest.json");
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        schedule: &sched,
        master_seed: seed,
        n_traj,
        workers: rayon::current_num_threads(),
        noise_grid: ens.grid,
        failed_trajectories: ens
            .failures
            .iter()
            .map(|(id, e)| FailureEntry {
                id: *id,
                error: e.to_string(),
            })
            .collect(),
        outputs: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        wall_time_seconds: wall_time,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    files.push(manifest_path);

    Ok(RunSummary {
        out_dir,
        files,
        series,
        reference,
        failed: ens.failures.len(),
        wall_time,
    })
}

fn reference_series(
    cfg: &ExperimentConfig,
    r: &ReferenceSection,
    spec: &BathSpec,
    sched: &Schedule,
    ens: &Ensemble,
) -> Result<ObservableSeries> {
    let name = r.observable().to_string();
    let times = sched.record_times();
    let constant = |value: f64| ObservableSeries {
        name: name.clone(),
        times: times.clone(),
        estimates: vec![value; times.len()],
        standard_errors: vec![0.0; times.len()],
        effective_n: vec![f64::INFINITY; times.len()],
    };
    let mut s = match r {
        ReferenceSection::SigmaAnalytical { .. } => {
            let sigma0 = cfg.sigma0().expect("validated");
            // Independent unprepared ensemble: ids continue after the main run.
            let plain = Schedule {
                interventions: Vec::new(),
                ..sched.clone()
            };
            let opts = EnsembleOptions {
                first_id: cfg.run.n_traj as u64,
                grid: Some(ens.grid),
                ..Default::default()
            };
            let free = run_ensemble(spec, &cfg.potential, &plain, cfg.run.n_traj, cfg.noise.statistics, cfg.run.seed, &opts)?;
            let d2 = msd(&free.trajectories, 0.0)?;
            let resp = response(spec, &cfg.potential, sched.t_end, sched.dt, sched.record_stride)?;
            sigma_analytical(sigma0, &d2, &resp)?
        }
        ReferenceSection::P2Quadrature { .. } => {
            let values = times
                .par_iter()
                .map(|&t| p2_quadrature(spec, t))
                .collect::<Result<Vec<_>>>()?;
            ObservableSeries {
                estimates: values,
                ..constant(0.0)
            }
        }
        ReferenceSection::StationaryP2 { .. } => constant(stationary_p2(spec, cfg.noise.statistics)?),
        ReferenceSection::Comparator { statistics, .. } => {
            let opts = EnsembleOptions {
                grid: Some(ens.grid),
                ..Default::default()
            };
            let other = run_ensemble(spec, &cfg.potential, sched, cfg.run.n_traj, *statistics, cfg.run.seed, &opts)?;
            let entry = cfg.observables.iter().find(|o| o.name == name).expect("validated");
            estimate(&other.trajectories, &entry.symbol, spec.hbar)?
        }
    };
    s.name = name;
    Ok(s)
}

/// Series as CSV text with 17 significant digits.
pub fn series_csv(s: &ObservableSeries) -> String {
    let mut out = String::with_capacity(80 * (s.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..s.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            s.times[i], s.estimates[i], s.standard_errors[i], s.effective_n[i]
        )
        .unwrap();
    }
    out
}

pub fn write_csv(path: &Path, s: &ObservableSeries) -> Result<PathBuf> {
    std::fs::write(path, series_csv(s)).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Parse a series CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<ObservableSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::Format {
        path: format!("{}:{line}", path.display()),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, format!("expected header `{CSV_HEADER}`")));
    }
    let mut s = ObservableSeries {
        name: path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        times: Vec::new(),
        estimates: Vec::new(),
        standard_errors: Vec::new(),
        effective_n: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let v = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(i + 2, e.to_string()))?;
        if v.len() != 4 {
            return Err(bad(i + 2, format!("expected 4 columns, got {}", v.len())));
        }
        s.times.push(v[0]);
        s.estimates.push(v[1]);
        s.standard_errors.push(v[2]);
        s.effective_n.push(v[3]);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagCheck {
    pub lag: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub target: f64,
    pub z: f64,
    /// Component of the residual vector after decorrelation across lags.
    pub decorrelated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCheckReport {
    pub statistics: NoiseStatistics,
    pub n_paths: usize,
    /// Temperature of the target the paths were compared with.
    pub target_kt: f64,
    pub lags: Vec<LagCheck>,
    pub max_abs_z: f64,
    /// Runs test on the signs of the decorrelated residuals.
    pub runs_p_value: f64,
    pub passed: bool,
    pub warning: Option<String>,
}

impl NoiseCheckReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("lag,estimate,standard_error,target,z,decorrelated\n");
        for l in &self.lags {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                l.lag, l.estimate, l.standard_error, l.target, l.z, l.decorrelated
            )
            .unwrap();
        }
        out
    }
}

/// Lags `0, …, max_lag` on the sampling grid, at most `n` of them.
pub fn lag_grid(max_lag: f64, n: usize, dt: f64) -> Vec<f64> {
    let mut steps: Vec<usize> = (0..n)
        .map(|i| {
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            (frac * max_lag / dt).round() as usize
        })
        .collect();
    steps.dedup();
    steps.into_iter().map(|k| k as f64 * dt).collect()
}

/// Autocorrelation target of the given noise statistics.
pub fn noise_target(spec: &BathSpec, statistics: NoiseStatistics, lag: f64, dt: f64) -> Result<f64> {
    Ok(match statistics {
        NoiseStatistics::Quantum => spec.quantum_correlation(lag)?,
        NoiseStatistics::Classical => spec.classical_correlation(lag),
        NoiseStatistics::White => {
            if lag == 0.0 {
                2.0 * spec.mass * spec.gamma * spec.kt / dt
            } else {
                0.0
            }
        }
    })
}

/// Synthesize an ensemble of noise paths and compare the empirical
/// autocorrelation with its target lag by lag.
pub fn noise_check(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<NoiseCheckReport> {
    let cfg = opts.apply(cfg)?;
    with_workers(cfg.workers(), || noise_check_inner(&cfg))?
}

fn noise_check_inner(cfg: &ExperimentConfig) -> Result<NoiseCheckReport> {
    let spec = cfg.bath()?;
    let nc = cfg.noise_check;
    let statistics = cfg.noise.statistics;
    let target_kt = nc.target_kt.unwrap_or(spec.kt);
    if spec.gamma == 0.0 {
        return Ok(NoiseCheckReport {
            statistics,
            n_paths: 0,
            target_kt,
            lags: Vec::new(),
            max_abs_z: 0.0,
            runs_p_value: 1.0,
            passed: true,
            warning: Some("gamma = 0: the bath is decoupled and the noise vanishes identically; nothing to check".into()),
        });
    }
    let dt = cfg.schedule()?.dt;
    let grid = FrequencyGrid::for_span(&spec, dt, nc.n_times, 0.0)?;
    let synth = NoiseSynthesizer::new(&spec, grid, statistics)?;
    let seed = cfg.run.seed;
    let paths = (0..nc.n_paths as u64)
        .into_par_iter()
        .map(|i| synth.generate(&mut stream(seed, i, StreamPurpose::Noise)))
        .collect::<Result<Vec<_>>>()?;
    let max_lag = nc.max_lag.unwrap_or(4.0 * spec.eps).min((nc.n_times - 1) as f64 * dt);
    let lags = lag_grid(max_lag, nc.n_lags, dt);
    let samples = autocorrelation_per_path(&paths, &lags, 0..nc.n_times)?;
    drop(paths);
    let target_spec = BathSpec { kt: target_kt, ..spec };
    let mut checks = Vec::with_capacity(lags.len());
    for (&lag, values) in lags.iter().zip(&samples) {
        let (estimate, standard_error) = mean_and_se(values);
        let target = noise_target(&target_spec, statistics, lag, dt)?;
        let diff = estimate - target;
        let z = if standard_error > 0.0 {
            diff / standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        checks.push(LagCheck {
            lag,
            estimate,
            standard_error,
            target,
            z,
            decorrelated: f64::NAN,
        });
    }
    let max_abs_z = checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    // Estimates at neighbouring lags share paths, so their residuals form a
    // smooth curve; the sign-pattern test runs on decorrelated residuals.
    let residuals: Vec<f64> = checks.iter().map(|c| c.estimate - c.target).collect();
    let signs = match whiten(&residuals, &samples) {
        Some(w) => {
            for (c, v) in checks.iter_mut().zip(&w) {
                c.decorrelated = *v;
            }
            w
        }
        None => checks.iter().map(|c| c.z).collect(),
    };
    let runs_p_value = runs_test(&signs).p_value;
    Ok(NoiseCheckReport {
        statistics,
        n_paths: nc.n_paths,
        target_kt,
        lags: checks,
        max_abs_z,
        runs_p_value,
        passed: max_abs_z <= NOISE_CHECK_Z,
        warning: None,
    })
}

/// Write `noise_check.csv` and `noise_check.json` into `dir`.
pub fn write_noise_report(dir: &Path, report: &NoiseCheckReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("noise_check.csv");
    std::fs::write(&csv, report.csv()).map_err(|e| Error::io(&csv, e))?;
    let json = dir.join("noise_check.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(vec![csv, json])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, text) in PRESETS {
            let cfg = ExperimentConfig::parse(text, name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!preset_summary(text).is_empty(), "{name} lacks a summary line");
            assert!(!cfg.observables.is_empty());
        }
    }

    #[test]
    fn fig1_preset_parameters() {
        let cfg = load_config("fig1").unwrap();
        let b = cfg.bath().unwrap();
        assert_eq!((b.gamma, b.eps, b.kt, b.mass, b.hbar), (std::f64::consts::FRAC_PI_2, 0.5, 0.0, 1.0, 1.0));
        assert_eq!(cfg.sigma0(), Some(1.0));
        assert_eq!(cfg.observables[0].name, "sigma2");
    }

    #[test]
    fn lag_grid_is_on_the_sampling_grid() {
        let lags = lag_grid(2.0, 20, 0.025);
        assert_eq!(lags.len(), 20);
        assert_eq!(lags[0], 0.0);
        assert!((lags[19] - 2.0).abs() < 1e-12);
        for l in &lags {
            let k = l / 0.025;
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert_eq!(lag_grid(0.05, 20, 0.025).len(), 3);
    }

    #[test]
    fn csv_round_trip_keeps_every_bit() {
        let s = ObservableSeries {
            name: "x".into(),
            times: vec![0.0, 0.1, 0.2],
            estimates: vec![1.0 / 3.0, -2.5e-300, 7.0],
            standard_errors: vec![0.0, 1e-17, f64::MIN_POSITIVE],
            effective_n: vec![10.0, 9.5, f64::INFINITY],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, &s).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn overrides_are_revalidated() {
        let cfg = load_config("fig3").unwrap();
        let bad = RunOptions {
            n_traj: Some(0),
            ..Default::default()
        };
        assert!(matches!(bad.apply(&cfg), Err(Error::Config { .. })));
    }
}
