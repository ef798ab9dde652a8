//! Experiment configuration files.
//!
//! A config is TOML with one table per concern. Everything is dimensionless;
//! `mass` and `hbar` default to 1. Unknown keys are rejected. Example:
//!
//! ```toml
//! [bath]
//! gamma = 1.5707963267948966
//! eps = 0.5
//! kt = 0.0
//!
//! [potential]
//! form = "free"
//!
//! [schedule]
//! t_end = 10.0
//! dt = 0.025
//! t_eq = 25.0
//! record_stride = 4
//!
//! [noise]
//! statistics = "quantum"
//!
//! [[intervention]]
//! time = 0.0
//! preparation = { form = "gaussian_localize", sigma0 = 1.0 }
//!
//! [[observable]]
//! name = "sigma2"
//! symbol = { form = "x2" }
//!
//! [run]
//! n_traj = 50000
//! seed = 1
//! ```
//!
//! See `docs/config.md` in the repository for every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::dynamics::{default_dt, default_t_eq, Intervention, Potential, Schedule};
use crate::error::{Error, Result};
use crate::noise::NoiseStatistics;
use crate::observables::WeylObservable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bath: BathSection,
    #[serde(default)]
    pub potential: Potential,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default, rename = "intervention")]
    pub interventions: Vec<Intervention>,
    #[serde(default, rename = "observable")]
    pub observables: Vec<ObservableEntry>,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSection>,
    #[serde(default)]
    pub noise_check: NoiseCheckSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub gamma: f64,
    pub eps: f64,
    #[serde(default = "unit")]
    pub mass: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
    #[serde(default)]
    pub kt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub t_end: f64,
    /// Defaults to ε/20.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to max(10/γ, 50ε) on the dt grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_eq: Option<f64>,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub initial_x: f64,
    #[serde(default)]
    pub initial_p: f64,
    #[serde(default)]
    pub position_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub statistics: NoiseStatistics,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            statistics: NoiseStatistics::Quantum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableEntry {
    /// File stem of the output CSV.
    pub name: String,
    pub symbol: WeylObservable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Baseline written next to one observable as `<name>_reference.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSection {
    /// σ₀² + d²(t) + A²(t)/σ₀² from an unprepared ensemble and the response
    /// function; σ₀ is taken from the Gaussian intervention at t = 0.
    SigmaAnalytical { observable: String },
    /// Zero-temperature momentum variance by quadrature.
    P2Quadrature { observable: String },
    /// Stationary momentum variance, constant in time.
    StationaryP2 { observable: String },
    /// The same experiment rerun with different noise statistics.
    Comparator {
        observable: String,
        statistics: NoiseStatistics,
    },
}

impl ReferenceSection {
    /// Name of the observable the baseline belongs to.
    pub fn observable(&self) -> &str {
        match self {
            ReferenceSection::SigmaAnalytical { observable }
            | ReferenceSection::P2Quadrature { observable }
            | ReferenceSection::StationaryP2 { observable }
            | ReferenceSection::Comparator { observable, .. } => observable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCheckSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_lags")]
    pub n_lags: usize,
    /// Largest lag; defaults to 4ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<f64>,
    /// Path length in samples.
    #[serde(default = "default_path_len")]
    pub n_times: usize,
    /// Compare against the target of a bath at this temperature instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_kt: Option<f64>,
}

impl Default for NoiseCheckSection {
    fn default() -> Self {
        NoiseCheckSection {
            n_paths: default_paths(),
            n_lags: default_lags(),
            max_lag: None,
            n_times: default_path_len(),
            target_kt: None,
        }
    }
}

fn unit() -> f64 {
    1.0
}
fn one() -> usize {
    1
}
fn default_paths() -> usize {
    20_000
}
fn default_lags() -> usize {
    20
}
fn default_path_len() -> usize {
    256
}

impl ExperimentConfig {
    /// Read and validate a config file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse and validate config text; `origin` names it in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            Error::Format {
                path: match line {
                    Some(l) => format!("{origin}:{l}"),
                    None => origin.to_string(),
                },
                message: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|e| locate(e, text, origin))?;
        Ok(cfg)
    }

    pub fn bath(&self) -> Result<BathSpec> {
        let b = &self.bath;
        BathSpec::ohmic(b.gamma, b.eps, b.mass, b.hbar, b.kt)
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let spec = self.bath()?;
        let s = &self.schedule;
        let dt = s.dt.unwrap_or_else(|| default_dt(&spec));
        Ok(Schedule {
            t_eq: s.t_eq.unwrap_or_else(|| default_t_eq(&spec, dt)),
            t_end: s.t_end,
            dt,
            interventions: self.interventions.clone(),
            record_stride: s.record_stride,
            initial_x: s.initial_x,
            initial_p: s.initial_p,
            position_spread: s.position_spread,
        })
    }

    /// Worker count after command-line overrides; `None` means all cores.
    pub fn workers(&self) -> Option<usize> {
        self.run.workers
    }

    /// Check every invariant the simulator relies on.
    pub fn validate(&self) -> Result<()> {
        let spec = self.bath()?;
        self.potential.validate()?;
        for (i, iv) in self.interventions.iter().enumerate() {
            iv.preparation.validate().map_err(|e| prefix(e, &format!("intervention[{i}]")))?;
        }
        self.schedule()?.validate(&spec, &self.potential)?;
        if self.run.n_traj == 0 {
            return Err(Error::config("run.n_traj", "must be >= 1"));
        }
        if self.run.workers == Some(0) {
            return Err(Error::config("run.workers", "must be >= 1"));
        }
        let mut names = std::collections::HashSet::new();
        for (i, o) in self.observables.iter().enumerate() {
            o.symbol.validate().map_err(|e| prefix(e, &format!("observable[{i}]")))?;
            let valid = !o.name.is_empty()
                && o.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid {
                return Err(Error::config(
                    format!("observable[{i}].name"),
                    format!("`{}` is not a valid file stem (use letters, digits, _ and -)", o.name),
                ));
            }
            if !names.insert(o.name.as_str()) {
                return Err(Error::config(format!("observable[{i}].name"), format!("duplicate name `{}`", o.name)));
            }
        }
        if let Some(r) = &self.reference {
            if !names.contains(r.observable()) {
                return Err(Error::config(
                    "reference.observable",
                    format!("no observable named `{}`", r.observable()),
                ));
            }
            match r {
                ReferenceSection::SigmaAnalytical { .. } => {
                    self.sigma0().ok_or_else(|| {
                        Error::config(
                            "reference.kind",
                            "sigma_analytical needs a gaussian_localize intervention at t = 0",
                        )
                    })?;
                    if !self.potential.is_quadratic() {
                        return Err(Error::config("reference.kind", "sigma_analytical needs a quadratic potential"));
                    }
                }
                ReferenceSection::P2Quadrature { .. } => {
                    if spec.kt != 0.0 {
                        return Err(Error::config("reference.kind", "p2_quadrature holds at kt = 0 only"));
                    }
                }
                ReferenceSection::StationaryP2 { .. } => {
                    if spec.gamma == 0.0 {
                        return Err(Error::config("reference.kind", "stationary_p2 needs gamma > 0"));
                    }
                }
                ReferenceSection::Comparator { .. } => {}
            }
        }
        let nc = &self.noise_check;
        if nc.n_paths < 2 {
            return Err(Error::config("noise_check.n_paths", "must be >= 2"));
        }
        if nc.n_lags == 0 {
            return Err(Error::config("noise_check.n_lags", "must be >= 1"));
        }
        if let Some(l) = nc.max_lag {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config("noise_check.max_lag", "must be > 0"));
            }
        }
        if nc.n_times < 2 {
            return Err(Error::config("noise_check.n_times", "must be >= 2"));
        }
        if let Some(kt) = nc.target_kt {
            if !(kt >= 0.0 && kt.is_finite()) {
                return Err(Error::config("noise_check.target_kt", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Width of a Gaussian localization applied at t = 0, if any.
    pub fn sigma0(&self) -> Option<f64> {
        self.interventions.iter().find_map(|iv| match iv.preparation {
            crate::preparation::PreparationFunction::GaussianLocalize { sigma0 } if iv.time == 0.0 => Some(sigma0),
            _ => None,
        })
    }
}

fn prefix(e: Error, scope: &str) -> Error {
    match e {
        Error::Config { key, message } => Error::Config {
            key: format!("{scope}.{key}"),
            message,
        },
        other => other,
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Attach `origin:line` to a config error by finding the key in the text.
fn locate(e: Error, text: &str, origin: &str) -> Error {
    match e {
        Error::Config { key, message } => {
            let at = match find_key(text, &key) {
                Some(l) => format!("{origin}:{l}"),
                None => origin.to_string(),
            };
            Error::Config {
                key,
                message: format!("{message} ({at})"),
            }
        }
        other => other,
    }
}

/// Line of `key` (dotted, e.g. `bath.gamma` or `intervention[1].time`), or of
/// its table header when the key itself is absent.
fn find_key(text: &str, key: &str) -> Option<usize> {
    let mut parts = key.split('.');
    let head = parts.next()?;
    let field = parts.last();
    let (table, index) = match head.split_once('[') {
        Some((t, rest)) => (t, rest.trim_end_matches(']').parse::<usize>().ok()?),
        None => (head, 0),
    };
    let mut header_line = None;
    let mut seen = 0usize;
    let mut inside = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            inside = false;
            if name == table {
                if seen == index {
                    inside = true;
                    header_line = Some(i + 1);
                }
                seen += 1;
            }
            continue;
        }
        if inside {
            if let Some(f) = field {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == f {
                        return Some(i + 1);
                    }
                }
                if line.contains(&format!("{f} =")) || line.contains(&format!("{f}=")) {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[bath]
gamma = 1.5
eps = 0.5

[schedule]
t_end = 1.0

[run]
n_traj = 10
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL, "m.toml").unwrap();
        assert_eq!((c.bath.mass, c.bath.hbar, c.bath.kt), (1.0, 1.0, 0.0));
        assert_eq!(c.potential, Potential::Free);
        assert_eq!(c.noise.statistics, NoiseStatistics::Quantum);
        let s = c.schedule().unwrap();
        assert_eq!(s.dt, 0.025);
        assert!(s.t_eq >= 10.0 / 1.5);
    }

    #[test]
    fn missing_gamma_names_the_key() {
        let text = MINIMAL.replace("gamma = 1.5\n", "");
        let err = ExperimentConfig::parse(&text, "m.toml").unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
        assert!(err.contains("m.toml:1"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = MINIMAL.replace("eps = 0.5", "eps = 0.5\ngama = 2.0");
        let err = ExperimentConfig::parse(&text, "m.toml").unwrap_err().to_string();
        assert!(err.contains("gama") && err.contains("m.toml:4"), "{err}");
    }

    #[test]
    fn zero_trajectories_is_a_config_error() {
        let text = MINIMAL.replace("n_traj = 10", "n_traj = 0");
        match ExperimentConfig::parse(&text, "m.toml").unwrap_err() {
            Error::Config { key, message } => {
                assert_eq!(key, "run.n_traj");
                assert!(message.contains("m.toml:9"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn invariant_violation_points_at_line() {
        let text = MINIMAL.replace("eps = 0.5", "eps = -0.5");
        match ExperimentConfig::parse(&text, "m.toml").unwrap_err() {
            Error::Config { key, message } => {
                assert_eq!(key, "bath.eps");
                assert!(message.contains("m.toml:3"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn intervention_errors_are_scoped() {
        let text = format!(
            "{MINIMAL}\n[[intervention]]\ntime = 0.0\npreparation = {{ form = \"gaussian_localize\", sigma0 = -1.0 }}\n"
        );
        match ExperimentConfig::parse(&text, "m.toml").unwrap_err() {
            Error::Config { key, message } => {
                assert_eq!(key, "intervention[0].preparation.sigma0");
                assert!(message.contains("m.toml:13"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn reference_must_name_an_observable() {
        let text = format!("{MINIMAL}\n[reference]\nobservable = \"p2\"\nkind = \"p2_quadrature\"\n");
        let err = ExperimentConfig::parse(&text, "m.toml").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "reference.observable"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let text = format!(
            "{MINIMAL}\n[[observable]]\nname = \"p2\"\nsymbol = {{ form = \"p2\" }}\n\n[reference]\nobservable = \"p2\"\nkind = \"comparator\"\nstatistics = \"white\"\n"
        );
        let c = ExperimentConfig::parse(&text, "m.toml").unwrap();
        let back = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::parse(&back, "back").unwrap(), c);
    }
}
