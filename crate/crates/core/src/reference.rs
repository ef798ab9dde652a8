//! Analytical and semi-analytical baselines.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::bath::BathSpec;
use crate::dynamics::{integrate, Potential, Schedule};
use crate::error::{Error, Result};
use crate::noise::{NoisePath, NoiseStatistics};
use crate::observables::ObservableSeries;
use crate::quad::{integrate as quadrature, oscillatory_panels, QuadOptions};
use crate::special::{e1_scaled, ei_scaled};

/// Solution of the homogeneous equation `m G̈ + ∫₀ᵗ M(t−s) Ġ(s) ds = −V″G`
/// with `G(0) = 0`, `Ġ(0) = 1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseFunction {
    pub times: Arc<[f64]>,
    pub g: Vec<f64>,
    pub hbar: f64,
}

impl ResponseFunction {
    /// Commutator amplitude `A(t) = (ħ/2)·G(t)`.
    pub fn amplitude(&self) -> Vec<f64> {
        self.g.iter().map(|g| 0.5 * self.hbar * g).collect()
    }
}

/// Response function from the trajectory integrator: a unit momentum at
/// `t = 0`, no history, no noise.
pub fn response(spec: &BathSpec, pot: &Potential, t_end: f64, dt: f64, record_stride: usize) -> Result<ResponseFunction> {
    if !pot.is_quadratic() {
        return Err(Error::Unsupported(
            "the response function describes linear dynamics only; the potential is not quadratic".into(),
        ));
    }
    let sched = Schedule {
        initial_p: 1.0,
        ..Schedule::new(spec, t_end).with_dt(dt).with_t_eq(0.0).with_stride(record_stride)
    };
    let noise = NoisePath::zeros(0.0, dt, sched.total_steps() + 1);
    let tr = integrate(spec, pot, &sched, &noise, &mut |_| unreachable!("no interventions"))?;
    Ok(ResponseFunction {
        times: tr.times,
        g: tr.x,
        hbar: spec.hbar,
    })
}

/// `σ²(t) = σ₀² + d²(t) + A²(t)/σ₀²`, carrying the standard errors of `d²`.
pub fn sigma_analytical(sigma0: f64, d2: &ObservableSeries, resp: &ResponseFunction) -> Result<ObservableSeries> {
    if !(sigma0 > 0.0) {
        return Err(Error::Domain(format!("sigma0 must be > 0, got {sigma0}")));
    }
    let same_grid = d2.times.len() == resp.times.len()
        && d2
            .times
            .iter()
            .zip(resp.times.iter())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
    if !same_grid {
        return Err(Error::Domain(format!(
            "displacement series ({} points) and response ({} points) are on different grids",
            d2.times.len(),
            resp.times.len()
        )));
    }
    let s2 = sigma0 * sigma0;
    let estimates = d2
        .estimates
        .iter()
        .zip(resp.amplitude())
        .map(|(d, a)| s2 + d + a * a / s2)
        .collect();
    Ok(ObservableSeries {
        name: "sigma2".into(),
        times: d2.times.clone(),
        estimates,
        standard_errors: d2.standard_errors.clone(),
        effective_n: d2.effective_n.clone(),
    })
}

fn options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        ..QuadOptions::default()
    }
}

/// Zero-temperature momentum variance after a start from rest,
/// `(mγħ/π) ∫₀^∞ ω e^{−εω} |e^{iωt} − e^{−γt}|² / (ω² + γ²) dω`.
pub fn p2_quadrature(spec: &BathSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if spec.kt != 0.0 {
        return Err(Error::Unsupported(format!(
            "the momentum-variance formula holds at kT = 0; got kT = {}",
            spec.kt
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if spec.gamma == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let (g, eps) = (spec.gamma, spec.eps);
    let a = (-g * t).exp();
    let upper = spec.omega_max();
    let f = |w: f64| w * (-eps * w).exp() * (1.0 - 2.0 * a * (w * t).cos() + a * a) / (w * w + g * g);
    let opts = options().with_panels(oscillatory_panels(upper, t).max(64));
    let r = quadrature(f, 0.0, upper, opts)?;
    Ok(spec.mass * g * spec.hbar / PI * r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceLength {
    pub lambda: f64,
    pub p2_eq: f64,
}

/// Equilibrium momentum variance of the free particle with Markovian
/// friction, `(1/π) ∫₀^∞ S(ω) / (ω² + γ²) dω`, and `λ = ħ/√⟨p²⟩`. At
/// `kT = 0` this is the long-time limit of [`p2_quadrature`].
pub fn coherence_length(spec: &BathSpec) -> Result<CoherenceLength> {
    spec.validate()?;
    if spec.gamma == 0.0 {
        return Ok(CoherenceLength {
            lambda: f64::INFINITY,
            p2_eq: 0.0,
        });
    }
    let g2 = spec.gamma * spec.gamma;
    let f = |w: f64| spec.noise_psd_unchecked(w) / (w * w + g2);
    let r = quadrature(f, 0.0, spec.omega_max(), options().with_panels(64))?;
    let p2_eq = r.value / PI;
    Ok(CoherenceLength {
        lambda: spec.hbar / p2_eq.sqrt(),
        p2_eq,
    })
}

/// `∫₀^∞ M(t) e^{iωt} dt` as `(re, im)`:
/// `mγ e^{−εω}` and `(mγ/π)[e^{−εω}Ei(εω) − e^{εω}Ei(−εω)]`.
pub fn kernel_transform(spec: &BathSpec, omega: f64) -> (f64, f64) {
    let mg = spec.mass * spec.gamma;
    let x = spec.eps * omega.abs();
    if x == 0.0 {
        return (mg, 0.0);
    }
    let im = mg / PI * (ei_scaled(x) + e1_scaled(x));
    (mg * (-x).exp(), im * omega.signum())
}

/// Stationary momentum variance of the free particle under the full memory
/// friction, `(m²/π) ∫₀^∞ S(ω) / |M̃(ω) − imω|² dω`, for the given noise
/// spectrum.
pub fn stationary_p2(spec: &BathSpec, statistics: NoiseStatistics) -> Result<f64> {
    spec.validate()?;
    if spec.gamma == 0.0 {
        return Err(Error::Domain("no stationary state without friction".into()));
    }
    let m = spec.mass;
    let f = |w: f64| {
        let s = match statistics {
            NoiseStatistics::Quantum => spec.noise_psd_unchecked(w),
            NoiseStatistics::Classical => spec.classical_psd(w),
            NoiseStatistics::White => 2.0 * m * spec.gamma * spec.kt,
        };
        let (re, im) = kernel_transform(spec, w);
        let d = im - m * w;
        s / (re * re + d * d)
    };
    let upper = match statistics {
        NoiseStatistics::White => 1e4 / spec.eps,
        _ => spec.omega_max(),
    };
    let r = quadrature(f, 0.0, upper, options().with_panels(256))?;
    Ok(m * m * r.value / PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallParameter {
    /// `λ/L`.
    pub value: f64,
    pub coherence_length: f64,
    /// `min |V′/V‴|^{1/2}` over the probed range; infinite when exact.
    pub length_scale: f64,
    /// True when `V‴ ≡ 0` and the trajectory picture is exact.
    pub exact: bool,
}

/// `λ/L` with `L = min_x |V′(x)/V‴(x)|^{1/2}` over `range`, skipping zeros
/// of `V′` and points where `V‴` vanishes.
pub fn small_parameter(spec: &BathSpec, pot: &Potential, range: (f64, f64)) -> Result<SmallParameter> {
    pot.validate()?;
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Domain(format!("invalid range [{lo}, {hi}]")));
    }
    let lambda = coherence_length(spec)?.lambda;
    let exact = SmallParameter {
        value: 0.0,
        coherence_length: lambda,
        length_scale: f64::INFINITY,
        exact: true,
    };
    if pot.is_quadratic() {
        return Ok(exact);
    }
    let n = 10_000;
    let mut best = f64::INFINITY;
    let mut any_cubic = false;
    for i in 0..=n {
        let x = if n == 0 { lo } else { lo + (hi - lo) * i as f64 / n as f64 };
        let d1 = pot.derivative(x, spec.mass);
        let d3 = pot.third_derivative(x);
        if d3 == 0.0 {
            continue;
        }
        any_cubic = true;
        if d1 == 0.0 {
            continue;
        }
        best = best.min((d1 / d3).abs().sqrt());
    }
    if !any_cubic {
        return Ok(exact);
    }
    Ok(SmallParameter {
        value: lambda / best,
        coherence_length: lambda,
        length_scale: best,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseStatistics;
    use std::f64::consts::FRAC_PI_2;

    fn bath(eps: f64, kt: f64) -> BathSpec {
        BathSpec::ohmic(FRAC_PI_2, eps, 1.0, 1.0, kt).unwrap()
    }

    #[test]
    fn response_without_bath() {
        let b = BathSpec::ohmic(0.0, 0.5, 2.0, 1.0, 0.0).unwrap();
        let r = response(&b, &Potential::Free, 5.0, 0.01, 10).unwrap();
        for (t, a) in r.times.iter().zip(r.amplitude()) {
            assert!((a - t / 4.0).abs() < 1e-12, "t = {t}");
        }
        let r = response(&b, &Potential::Harmonic { omega0: 1.5 }, 5.0, 0.001, 100).unwrap();
        for (t, a) in r.times.iter().zip(r.amplitude()) {
            let exact = (1.5 * t).sin() / (2.0 * 2.0 * 1.5);
            assert!((a - exact).abs() < 1e-6, "t = {t}: {a} vs {exact}");
        }
    }

    #[test]
    fn response_converges_at_second_order() {
        let b = bath(0.5, 0.0);
        let at_end = |dt: f64| *response(&b, &Potential::Free, 4.0, dt, 1).unwrap().g.last().unwrap();
        let (a, c, d) = (at_end(0.05), at_end(0.025), at_end(0.0125));
        let order = ((a - c) / (c - d)).abs().log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn response_rejects_anharmonic() {
        let b = bath(0.5, 0.0);
        let quartic = Potential::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 0.0, 0.25] };
        assert!(matches!(response(&b, &quartic, 1.0, 0.05, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn response_is_independent_of_temperature() {
        let cold = response(&bath(0.5, 0.0), &Potential::Free, 2.0, 0.025, 4).unwrap();
        let hot = response(&bath(0.5, 3.0), &Potential::Free, 2.0, 0.025, 4).unwrap();
        assert_eq!(cold.g, hot.g);
    }

    #[test]
    fn sigma_analytical_examples() {
        let b = BathSpec::ohmic(0.0, 0.5, 1.0, 1.0, 0.0).unwrap();
        let r = response(&b, &Potential::Free, 2.0, 0.05, 1).unwrap();
        let d2 = ObservableSeries {
            name: "msd".into(),
            times: r.times.to_vec(),
            estimates: vec![0.0; r.times.len()],
            standard_errors: vec![0.0; r.times.len()],
            effective_n: vec![1.0; r.times.len()],
        };
        let sigma0 = 0.8;
        let s = sigma_analytical(sigma0, &d2, &r).unwrap();
        assert_eq!(s.estimates[0], sigma0 * sigma0);
        for (t, v) in s.times.iter().zip(&s.estimates) {
            let exact = sigma0 * sigma0 + (t / (2.0 * sigma0)).powi(2);
            assert!((v - exact).abs() < 1e-12);
        }
        let short = ObservableSeries {
            times: d2.times[..3].to_vec(),
            ..d2
        };
        assert!(sigma_analytical(sigma0, &short, &r).is_err());
    }

    #[test]
    fn p2_short_time_quadratic() {
        let b = bath(0.01, 0.0);
        assert_eq!(p2_quadrature(&b, 0.0).unwrap(), 0.0);
        let ts: Vec<f64> = (0..=10).map(|i| b.eps / 100.0 + i as f64 * (b.eps / 10.0 - b.eps / 100.0) / 10.0).collect();
        let ratios: Vec<f64> = ts.iter().map(|&t| p2_quadrature(&b, t).unwrap() / (t * t)).collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(l, h), &r| (l.min(r), h.max(r)));
        assert!((hi - lo) / lo < 0.02, "{ratios:?}");
    }

    #[test]
    fn p2_logarithmic_growth() {
        // For ε ≪ t ≪ 1/γ, p² grows like (2mγħ/π)(1 − γt) ln(t/ε) plus a constant.
        let b = bath(0.001, 0.0);
        let ts: Vec<f64> = (0..12).map(|i| 5.0 * b.eps * 10f64.powf(i as f64 / 11.0)).collect();
        let xs: Vec<f64> = ts.iter().map(|t| (1.0 - b.gamma * t) * (t / b.eps).ln()).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| p2_quadrature(&b, t).unwrap()).collect();
        let (slope, _) = crate::stats::linear_fit(&xs, &ys);
        let predicted = 2.0 * b.mass * b.gamma * b.hbar / PI;
        assert!((slope - predicted).abs() < 0.05 * predicted, "{slope} vs {predicted}");
    }

    #[test]
    fn p2_needs_zero_temperature() {
        assert!(matches!(p2_quadrature(&bath(0.01, 1.0), 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn p2_rises_then_overshoots() {
        // Monotone growth up to about t = 0.4/γ, after which the variance
        // overshoots and settles back onto its stationary value.
        let b = bath(0.01, 0.0);
        let vals: Vec<f64> = (1..=40).map(|i| p2_quadrature(&b, i as f64 / 40.0 / b.gamma).unwrap()).collect();
        for (i, w) in vals[..12].windows(2).enumerate() {
            assert!(w[1] >= w[0], "step {}", i + 1);
        }
        let late = p2_quadrature(&b, 100.0 / b.gamma).unwrap();
        let peak = vals.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak > late && vals[39] < peak);
    }

    #[test]
    fn coherence_length_limits() {
        let b = bath(0.01, 0.0);
        let c = coherence_length(&b).unwrap();
        let late = p2_quadrature(&b, 100.0 / b.gamma).unwrap();
        assert!((c.p2_eq - late).abs() < 0.01 * c.p2_eq, "{} vs {late}", c.p2_eq);
        assert!((c.lambda - 1.0 / c.p2_eq.sqrt()).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for eps in [0.5, 0.25, 0.1, 0.05, 0.01] {
            let l = coherence_length(&bath(eps, 0.0)).unwrap().lambda;
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn kernel_transform_matches_quadrature() {
        let b = bath(0.3, 0.0);
        for w in [0.1, 1.0, 5.0, 20.0] {
            let (re, im) = kernel_transform(&b, w);
            let span = 4000.0 * b.eps;
            let opts = QuadOptions::default().with_panels(oscillatory_panels(span, w));
            let qr = quadrature(|t| b.memory_kernel(t) * (w * t).cos(), 0.0, span, opts).unwrap().value;
            let qi = quadrature(|t| b.memory_kernel(t) * (w * t).sin(), 0.0, span, opts).unwrap().value;
            // Truncating the kernel at `span` leaves an O(ε/(ω·span²)) error.
            assert!((re - qr).abs() < 1e-5, "re at {w}: {re} vs {qr}");
            assert!((im - qi).abs() < 1e-4, "im at {w}: {im} vs {qi}");
        }
    }

    #[test]
    fn classical_stationary_variance_is_equipartition() {
        for (eps, kt) in [(0.5, 1.0), (0.1, 0.3), (0.02, 2.0)] {
            let b = bath(eps, kt);
            let p2 = stationary_p2(&b, NoiseStatistics::Classical).unwrap();
            assert!((p2 - b.mass * kt).abs() < 1e-6 * kt, "eps {eps}: {p2}");
        }
    }

    #[test]
    fn quantum_stationary_variance_exceeds_markov_value() {
        // Memory lowers the effective friction at high frequency, which lets
        // more zero-point noise into the particle.
        let b = bath(0.5, 0.0);
        let exact = stationary_p2(&b, NoiseStatistics::Quantum).unwrap();
        let markov = coherence_length(&b).unwrap().p2_eq;
        assert!(exact > markov);
        assert!((exact - 0.563).abs() < 0.01, "{exact}");
    }

    #[test]
    fn small_parameter_examples() {
        let b = bath(0.1, 0.0);
        let h = small_parameter(&b, &Potential::Harmonic { omega0: 1.0 }, (0.5, 2.0)).unwrap();
        assert_eq!(h.value, 0.0);
        assert!(h.exact);
        assert_eq!(small_parameter(&b, &Potential::Free, (0.5, 2.0)).unwrap().value, 0.0);
        let quartic = Potential::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 0.0, 0.25] };
        let q = small_parameter(&b, &quartic, (0.5, 2.0)).unwrap();
        // V′ = x³, V‴ = 6x ⇒ L(x) = x/√6, smallest at the left end.
        assert!((q.length_scale - 0.5 / 6f64.sqrt()).abs() < 1e-12);
        let lambda = coherence_length(&b).unwrap().lambda;
        assert!((q.value - lambda / q.length_scale).abs() < 1e-12);
        assert!(!q.exact);
    }
}
