//! Frequency-domain synthesis of stationary Gaussian bath noise.
//!
//! A realization is
//! `ξ(t) = Σ_{k=-N}^{N} √(Δω/2π) √S(|ω_k|) z_k e^{-iω_k t}` with Hermitian
//! auxiliary coefficients `z_{-k} = z_k*`, evaluated on a uniform time grid by
//! one FFT. The frequency spacing is tied to the time step through
//! `Δω·Δt = 2π/L` for an FFT of length `L`, so the same `(Δω, N)` and the
//! same random stream describe the same continuous function at any time step
//! that divides the period.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::error::{Error, Result};
use crate::rng::SeedRecord;
use crate::stats::mean_and_se;

/// Which fluctuation–dissipation target the noise follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStatistics {
    /// Spectrum `ħJ(ω)coth(ħω/2kT)`, zero-point fluctuations included.
    Quantum,
    /// Spectrum `2kT J(ω)/ω`, correlation `kT·M(t)`.
    Classical,
    /// Markovian limit: independent samples of variance `2mγkT/Δt`.
    White,
}

/// Minimum spectral coverage `N·Δω` in units of `1/ε`.
pub const MIN_COVERAGE: f64 = 20.0;
/// Coverage used when a grid is chosen automatically.
const AUTO_COVERAGE: f64 = 40.0;
/// The synthesis period must exceed this multiple of the simulated span.
pub const PERIOD_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub delta_omega: f64,
    /// Modes run over `k = -N..=N`.
    pub n_modes: usize,
    pub t_step: f64,
    pub n_times: usize,
    /// Time of the first output sample.
    pub t_start: f64,
}

impl FrequencyGrid {
    /// Grid for `n_times` samples at `t_step` starting at `t_start`, with the
    /// period at least three spans and coverage up to `40/ε` or Nyquist.
    pub fn for_span(spec: &BathSpec, t_step: f64, n_times: usize, t_start: f64) -> Result<Self> {
        if !(t_step > 0.0) || n_times == 0 {
            return Err(Error::config("noise.grid", "need t_step > 0 and n_times >= 1"));
        }
        let min_len = (PERIOD_FACTOR * n_times as f64).ceil() as usize + 1;
        let fft_len = fast_length(min_len.max(16));
        let delta_omega = 2.0 * PI / (fft_len as f64 * t_step);
        let nyquist_modes = (fft_len - 1) / 2;
        let wanted = (AUTO_COVERAGE / (spec.eps * delta_omega)).ceil() as usize;
        let grid = FrequencyGrid {
            delta_omega,
            n_modes: wanted.min(nyquist_modes).max(1),
            t_step,
            n_times,
            t_start,
        };
        Ok(grid)
    }

    /// FFT length `L = 2π/(Δω·Δt)`; errors if that is not an integer.
    pub fn fft_len(&self) -> Result<usize> {
        let raw = 2.0 * PI / (self.delta_omega * self.t_step);
        let len = raw.round();
        if !(len >= 1.0) || (raw - len).abs() > 1e-9 * len {
            return Err(Error::config(
                "noise.grid",
                format!("2π/(Δω·Δt) = {raw} is not an integer FFT length"),
            ));
        }
        Ok(len as usize)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.delta_omega
    }

    pub fn span(&self) -> f64 {
        self.n_times as f64 * self.t_step
    }

    /// Check the coverage and resolution bounds against a bath.
    pub fn validate(&self, spec: &BathSpec) -> Result<()> {
        if !(self.delta_omega > 0.0) {
            return Err(Error::config("noise.grid.delta_omega", "must be > 0"));
        }
        if self.n_modes < 1 {
            return Err(Error::config("noise.grid.n_modes", "must be >= 1"));
        }
        if !(self.t_step > 0.0) || self.n_times == 0 {
            return Err(Error::config("noise.grid", "need t_step > 0 and n_times >= 1"));
        }
        let len = self.fft_len()?;
        if len < 2 * self.n_modes + 1 {
            return Err(Error::config(
                "noise.grid.n_modes",
                format!(
                    "{} modes exceed the Nyquist limit of an FFT of length {len}",
                    self.n_modes
                ),
            ));
        }
        let coverage = self.n_modes as f64 * self.delta_omega;
        if coverage < MIN_COVERAGE / spec.eps {
            return Err(Error::config(
                "noise.grid.coverage",
                format!(
                    "N·Δω = {coverage} is below {MIN_COVERAGE}/ε = {}; reduce the time step",
                    MIN_COVERAGE / spec.eps
                ),
            ));
        }
        let limit = 2.0 * PI / (PERIOD_FACTOR * self.span());
        if self.delta_omega > limit * (1.0 + 1e-12) {
            return Err(Error::config(
                "noise.grid.resolution",
                format!(
                    "Δω = {} exceeds 2π/(3·T_total) = {limit}",
                    self.delta_omega
                ),
            ));
        }
        Ok(())
    }
}

/// Smallest length `>= n` whose only prime factors are 2, 3 and 5.
fn fast_length(n: usize) -> usize {
    let mut m = n;
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// One sampled force history.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub seed: Option<SeedRecord>,
    pub t_start: f64,
    pub t_step: f64,
    pub values: Vec<f64>,
}

impl NoisePath {
    pub fn zeros(t_start: f64, t_step: f64, n_times: usize) -> Self {
        NoisePath {
            seed: None,
            t_start,
            t_step,
            values: vec![0.0; n_times],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.t_step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|n| self.time(n))
    }
}

/// Draw the auxiliary coefficients `z_{-N..=N}`, stored at index `k + N`.
///
/// `z_0` is a real standard normal, `z_k = (η_k + iζ_k)/√2` for `k > 0`, and
/// `z_{-k} = conj(z_k)`. Normals are consumed in the order
/// `η_0, η_1, ζ_1, η_2, ζ_2, …`.
pub fn draw_auxiliary<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Vec<Complex64> {
    let mut z = vec![Complex64::new(0.0, 0.0); 2 * n_modes + 1];
    z[n_modes] = Complex64::new(rng.sample(StandardNormal), 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=n_modes {
        let eta: f64 = rng.sample(StandardNormal);
        let zeta: f64 = rng.sample(StandardNormal);
        let zk = Complex64::new(eta * s, zeta * s);
        z[n_modes + k] = zk;
        z[n_modes - k] = zk.conj();
    }
    z
}

/// Reusable synthesizer: amplitudes and the FFT plan are computed once per
/// (bath, grid, statistics) and shared across an ensemble.
#[derive(Clone)]
pub struct NoiseSynthesizer {
    grid: FrequencyGrid,
    statistics: NoiseStatistics,
    fft_len: usize,
    /// `√(Δω/2π)·√S(ω_k)·e^{-iω_k t_start}` for `k = 0..=N`.
    weights: Vec<Complex64>,
    white_sd: f64,
    fft: Option<Arc<dyn Fft<f64>>>,
    silent: bool,
}

impl std::fmt::Debug for NoiseSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseSynthesizer")
            .field("grid", &self.grid)
            .field("statistics", &self.statistics)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl NoiseSynthesizer {
    pub fn new(spec: &BathSpec, grid: FrequencyGrid, statistics: NoiseStatistics) -> Result<Self> {
        spec.validate()?;
        if statistics == NoiseStatistics::White {
            if !(grid.t_step > 0.0) || grid.n_times == 0 {
                return Err(Error::config("noise.grid", "need t_step > 0 and n_times >= 1"));
            }
            let variance = 2.0 * spec.mass * spec.gamma * spec.kt / grid.t_step;
            return Ok(NoiseSynthesizer {
                grid,
                statistics,
                fft_len: 0,
                weights: Vec::new(),
                white_sd: variance.sqrt(),
                fft: None,
                silent: variance == 0.0,
            });
        }
        grid.validate(spec)?;
        let fft_len = grid.fft_len()?;
        let norm = (grid.delta_omega / (2.0 * PI)).sqrt();
        let mut silent = true;
        let weights = (0..=grid.n_modes)
            .map(|k| {
                let w = k as f64 * grid.delta_omega;
                let s = match statistics {
                    NoiseStatistics::Quantum => spec.noise_psd_unchecked(w),
                    NoiseStatistics::Classical => spec.classical_psd(w),
                    NoiseStatistics::White => unreachable!(),
                };
                if s > 0.0 {
                    silent = false;
                }
                let phase = -w * grid.t_start;
                Complex64::from_polar(norm * s.sqrt(), phase)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        Ok(NoiseSynthesizer {
            grid,
            statistics,
            fft_len,
            weights,
            white_sd: 0.0,
            fft: Some(fft),
            silent,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn statistics(&self) -> NoiseStatistics {
        self.statistics
    }

    /// True when every realization is identically zero (γ = 0, or a
    /// classical/white target at kT = 0).
    pub fn is_silent(&self) -> bool {
        self.silent
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<NoisePath> {
        let g = &self.grid;
        let mut path = NoisePath::zeros(g.t_start, g.t_step, g.n_times);
        if self.statistics == NoiseStatistics::White {
            if !self.silent {
                for v in path.values.iter_mut() {
                    let n: f64 = rng.sample(StandardNormal);
                    *v = self.white_sd * n;
                }
            }
            return Ok(path);
        }

        let n = g.n_modes;
        let z = draw_auxiliary(n, rng);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        buf[0] = self.weights[0] * z[n];
        for k in 1..=n {
            let c = self.weights[k] * z[n + k];
            buf[k] = c;
            buf[self.fft_len - k] = c.conj();
        }
        self.fft.as_ref().expect("planned").process(&mut buf);

        let head = &buf[..g.n_times];
        let rms = (head.iter().map(|c| c.re * c.re).sum::<f64>() / g.n_times as f64).sqrt();
        let residue = head.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if residue > 1e-10 * rms.max(f64::MIN_POSITIVE) && residue > 1e-300 {
            return Err(Error::Domain(format!(
                "synthesized noise has imaginary residue {residue:e} (rms {rms:e})"
            )));
        }
        for (v, c) in path.values.iter_mut().zip(head) {
            *v = c.re;
        }
        Ok(path)
    }
}

/// Synthesize one noise realization.
pub fn synthesize<R: Rng + ?Sized>(
    spec: &BathSpec,
    grid: &FrequencyGrid,
    statistics: NoiseStatistics,
    rng: &mut R,
) -> Result<NoisePath> {
    NoiseSynthesizer::new(spec, *grid, statistics)?.generate(rng)
}

/// Ensemble estimate of `⟨ξ(t₀)ξ(t₀+lag)⟩` at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub lag: f64,
    pub estimate: f64,
    pub standard_error: f64,
}

/// Autocorrelation over all admissible `t₀` of each path, averaged across
/// paths; the standard error comes from the spread between paths.
pub fn empirical_autocorrelation(
    paths: &[NoisePath],
    lags: &[f64],
) -> Result<Vec<CorrelationEstimate>> {
    let len = paths.first().map(|p| p.len()).unwrap_or(0);
    empirical_autocorrelation_window(paths, lags, 0..len)
}

/// As [`empirical_autocorrelation`], restricted to samples in `window`
/// (both `t₀` and `t₀+lag` must fall inside it).
pub fn empirical_autocorrelation_window(
    paths: &[NoisePath],
    lags: &[f64],
    window: std::ops::Range<usize>,
) -> Result<Vec<CorrelationEstimate>> {
    let per_path = autocorrelation_per_path(paths, lags, window)?;
    Ok(lags
        .iter()
        .zip(per_path)
        .map(|(&lag, values)| {
            let (estimate, standard_error) = mean_and_se(&values);
            CorrelationEstimate {
                lag,
                estimate,
                standard_error,
            }
        })
        .collect())
}

/// Per-path autocorrelation estimates, one vector per lag. Estimates at
/// different lags share paths and are correlated.
pub fn autocorrelation_per_path(
    paths: &[NoisePath],
    lags: &[f64],
    window: std::ops::Range<usize>,
) -> Result<Vec<Vec<f64>>> {
    if paths.len() < 2 {
        return Err(Error::Domain(format!(
            "autocorrelation needs at least 2 paths, got {}",
            paths.len()
        )));
    }
    let first = &paths[0];
    for p in paths {
        if p.len() != first.len() || p.t_step != first.t_step {
            return Err(Error::Domain("paths do not share a time grid".into()));
        }
    }
    if window.end > first.len() || window.start >= window.end {
        return Err(Error::Domain(format!(
            "window {window:?} outside path of length {}",
            first.len()
        )));
    }
    let dt = first.t_step;
    let mut out = Vec::with_capacity(lags.len());
    for &lag in lags {
        let steps_f = lag.abs() / dt;
        let steps = steps_f.round() as usize;
        if (steps_f - steps as f64).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "lag {lag} is not a multiple of the time step {dt}"
            )));
        }
        let width = window.end - window.start;
        if steps >= width {
            return Err(Error::Domain(format!(
                "lag {lag} exceeds the sampled window"
            )));
        }
        let count = width - steps;
        out.push(
            paths
                .iter()
                .map(|p| {
                    let v = &p.values[window.clone()];
                    v[..count]
                        .iter()
                        .zip(&v[steps..])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / count as f64
                })
                .collect(),
        );
    }
    Ok(out)
}
