//! Weighted ensemble estimates of Weyl-symbol observables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// Times whose effective sample size is below this are flagged.
pub const MIN_EFFECTIVE_N: f64 = 100.0;
/// `|Σw|` must exceed this many standard errors of the sum.
pub const SIGN_PROBLEM_SIGMAS: f64 = 5.0;

/// One monomial `c·x^i p^j` of a polynomial Weyl symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub x_power: u32,
    pub p_power: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeylObservable {
    X2,
    P2,
    /// Symbol of `(x̂p̂ + p̂x̂)/2`.
    XpSym,
    /// `4 exp(−x²/2σ² − 2σ²p²/ħ²) cos(2x₀p/ħ)`.
    CatCoherence { x0: f64, sigma: f64 },
    PolynomialXp { terms: Vec<Monomial> },
}

impl WeylObservable {
    pub fn name(&self) -> &'static str {
        match self {
            WeylObservable::X2 => "x2",
            WeylObservable::P2 => "p2",
            WeylObservable::XpSym => "xp_sym",
            WeylObservable::CatCoherence { .. } => "cat_coherence",
            WeylObservable::PolynomialXp { .. } => "polynomial_xp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeylObservable::CatCoherence { x0, sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0 && x0.is_finite()) {
                    return Err(Error::config("observables.cat_coherence", "need finite x0 and sigma > 0"));
                }
            }
            WeylObservable::PolynomialXp { terms } => {
                if terms.iter().any(|t| !t.coefficient.is_finite()) {
                    return Err(Error::config("observables.polynomial_xp", "coefficients must be finite"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    #[inline]
    pub fn evaluate(&self, hbar: f64, x: f64, p: f64) -> f64 {
        match self {
            WeylObservable::X2 => x * x,
            WeylObservable::P2 => p * p,
            WeylObservable::XpSym => x * p,
            WeylObservable::CatCoherence { x0, sigma } => {
                let s2 = sigma * sigma;
                4.0 * (-x * x / (2.0 * s2) - 2.0 * s2 * p * p / (hbar * hbar)).exp() * (2.0 * x0 * p / hbar).cos()
            }
            WeylObservable::PolynomialXp { terms } => terms
                .iter()
                .map(|t| t.coefficient * x.powi(t.x_power as i32) * p.powi(t.p_power as i32))
                .sum(),
        }
    }
}

/// Estimates on the recording grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub effective_n: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Indices whose effective sample size is below [`MIN_EFFECTIVE_N`].
    pub fn low_effective_n(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.effective_n[i] < MIN_EFFECTIVE_N).collect()
    }

    /// Index of time `t` on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let scale = self.times.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * scale)
    }
}

/// Weighted ratio estimate at one time, with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub effective_n: f64,
}

/// `R = Σwₒ/Σw` with `SE = √(N/(N−1)·Σw²(O−R)²)/|Σw|`.
pub fn ratio_estimate(weights: &[f64], values: &[f64], time: f64) -> Result<RatioEstimate> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::Domain("empty ensemble".into()));
    }
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    let nf = n as f64;
    let bessel = if n > 1 { nf / (nf - 1.0) } else { f64::NAN };
    let wbar = sw / nf;
    let sum_se = (bessel * weights.iter().map(|w| (w - wbar) * (w - wbar)).sum::<f64>()).sqrt();
    if sw == 0.0 || sw.abs() < SIGN_PROBLEM_SIGMAS * sum_se {
        return Err(Error::SignProblem {
            time,
            sum: sw,
            se: sum_se,
        });
    }
    let r = weights.iter().zip(values).map(|(w, o)| w * o).sum::<f64>() / sw;
    let spread: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, o)| w * w * (o - r) * (o - r))
        .sum();
    Ok(RatioEstimate {
        estimate: r,
        standard_error: (bessel * spread).sqrt() / sw.abs(),
        effective_n: sw * sw / sw2,
    })
}

fn check_grid(trajs: &[Trajectory]) -> Result<&[f64]> {
    let first = trajs.first().ok_or_else(|| Error::Domain("empty ensemble".into()))?;
    for t in trajs {
        if t.times.len() != first.times.len()
            || t.times.iter().zip(first.times.iter()).any(|(a, b)| a != b)
        {
            return Err(Error::Domain(format!(
                "trajectory {} is recorded on a different grid than trajectory {}",
                t.id, first.id
            )));
        }
    }
    Ok(&first.times)
}

/// Weighted ensemble average of `obs` at every recorded time. Each time is
/// reduced in trajectory order, so results are reproducible.
pub fn estimate(trajs: &[Trajectory], obs: &WeylObservable, hbar: f64) -> Result<ObservableSeries> {
    obs.validate()?;
    let times = check_grid(trajs)?.to_vec();
    let per_time: Vec<Result<RatioEstimate>> = (0..times.len())
        .into_par_iter()
        .map(|i| {
            let t = times[i];
            let w: Vec<f64> = trajs.iter().map(|tr| tr.weight_at(t)).collect();
            let o: Vec<f64> = trajs.iter().map(|tr| obs.evaluate(hbar, tr.x[i], tr.p[i])).collect();
            ratio_estimate(&w, &o, t)
        })
        .collect();
    let mut series = ObservableSeries {
        name: obs.name().to_string(),
        times,
        estimates: Vec::new(),
        standard_errors: Vec::new(),
        effective_n: Vec::new(),
    };
    for r in per_time {
        let r = r?;
        series.estimates.push(r.estimate);
        series.standard_errors.push(r.standard_error);
        series.effective_n.push(r.effective_n);
    }
    Ok(series)
}

/// Mean squared displacement `⟨(x(t) − x(t₀))²⟩` of an unprepared ensemble.
pub fn msd(trajs: &[Trajectory], t0: f64) -> Result<ObservableSeries> {
    let times = check_grid(trajs)?.to_vec();
    if let Some(t) = trajs.iter().find(|t| t.interventions.iter().any(|r| r.factor != 1.0)) {
        return Err(Error::Misuse(format!(
            "mean squared displacement needs an unweighted ensemble; trajectory {} carries weight {}",
            t.id,
            t.weight()
        )));
    }
    let scale = times.last().copied().unwrap_or(1.0).abs().max(1.0);
    let i0 = times
        .iter()
        .position(|&s| (s - t0).abs() <= 1e-9 * scale)
        .ok_or_else(|| Error::Domain(format!("reference time {t0} is not on the recording grid")))?;
    let n = trajs.len() as f64;
    let mut series = ObservableSeries {
        name: "msd".to_string(),
        times,
        estimates: Vec::new(),
        standard_errors: Vec::new(),
        effective_n: Vec::new(),
    };
    for i in 0..series.times.len() {
        let d: Vec<f64> = trajs
            .iter()
            .map(|tr| {
                let dx = tr.x[i] - tr.x[i0];
                dx * dx
            })
            .collect();
        let (m, se) = crate::stats::mean_and_se(&d);
        series.estimates.push(m);
        series.standard_errors.push(if i == i0 { 0.0 } else { se });
        series.effective_n.push(n);
    }
    Ok(series)
}

/// `⟨O⟩` for the cat observable in the freshly prepared cat state:
/// `1 + e^{−x₀²/2σ²}`.
pub fn cat_initial_value(x0: f64, sigma: f64) -> f64 {
    1.0 + (-x0 * x0 / (2.0 * sigma * sigma)).exp()
}
