//! Bath spectral density, memory kernel and noise correlation targets.
//!
//! The cutoff is carried as a time `eps`; the equivalent energy cutoff is
//! `Λ = 1/eps` (see [`BathSpec::cutoff_frequency`]).
//!
//! Noise spectra follow the convention
//! `C(t) = (1/π) ∫₀^∞ S(ω) cos(ωt) dω` with the quantum spectrum
//! `S(ω) = ħ J(ω) coth(ħω / 2kT)`. In the high-temperature limit this reduces
//! to `2kT J(ω)/ω`, whose transform is exactly `kT·M(t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// Spectral density families. Only the ohmic family with exponential cutoff
/// is provided; consumers match on the tag so others can be added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectralFamily {
    #[default]
    OhmicExponential,
}

/// Physical parameters of the oscillator bath and the particle mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    #[serde(default)]
    pub family: SpectralFamily,
    /// Friction rate γ. Zero switches the bath off.
    pub gamma: f64,
    /// Cutoff time ε.
    pub eps: f64,
    pub mass: f64,
    pub hbar: f64,
    /// Thermal energy k_B·T; zero is the ground state.
    pub kt: f64,
}

/// Below this value of ħω/2kT the thermal factor uses its Laurent series.
const COTH_SERIES_THRESHOLD: f64 = 1e-4;

impl BathSpec {
    pub fn ohmic(gamma: f64, eps: f64, mass: f64, hbar: f64, kt: f64) -> Result<Self> {
        let spec = BathSpec {
            family: SpectralFamily::OhmicExponential,
            gamma,
            eps,
            mass,
            hbar,
            kt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("bath.{key}"), msg))
            }
        };
        check(self.gamma.is_finite() && self.gamma >= 0.0, "gamma", "must be finite and >= 0")?;
        check(self.eps.is_finite() && self.eps > 0.0, "eps", "must be finite and > 0")?;
        check(self.mass.is_finite() && self.mass > 0.0, "mass", "must be finite and > 0")?;
        check(self.hbar.is_finite() && self.hbar > 0.0, "hbar", "must be finite and > 0")?;
        check(self.kt.is_finite() && self.kt >= 0.0, "kt", "must be finite and >= 0")
    }

    /// Energy-scale cutoff Λ = 1/ε (in frequency units).
    pub fn cutoff_frequency(&self) -> f64 {
        1.0 / self.eps
    }

    /// Upper quadrature limit; the exponential cutoff leaves a tail below
    /// `e^{-50}` relative to the bulk.
    pub fn omega_max(&self) -> f64 {
        50.0 / self.eps
    }

    /// `J(ω) = γ m ω e^{-εω}`.
    pub fn spectral_density(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain(format!(
                "spectral density needs omega >= 0, got {omega}"
            )));
        }
        Ok(self.spectral_density_unchecked(omega))
    }

    #[inline]
    fn spectral_density_unchecked(&self, omega: f64) -> f64 {
        match self.family {
            SpectralFamily::OhmicExponential => {
                self.gamma * self.mass * omega * (-self.eps * omega).exp()
            }
        }
    }

    /// `J(ω)/ω`, finite at ω = 0.
    #[inline]
    fn density_over_omega(&self, omega: f64) -> f64 {
        match self.family {
            SpectralFamily::OhmicExponential => self.gamma * self.mass * (-self.eps * omega).exp(),
        }
    }

    /// Friction kernel `M(t) = (2/π) ∫ J(ω)/ω cos(ωt) dω`, closed form
    /// `(2mγ/π) ε / (ε² + t²)`.
    pub fn memory_kernel(&self, t: f64) -> f64 {
        match self.family {
            SpectralFamily::OhmicExponential => {
                2.0 * self.mass * self.gamma / PI * self.eps / (self.eps * self.eps + t * t)
            }
        }
    }

    /// `∫_a^b M(s) ds` in closed form.
    pub fn kernel_integral(&self, a: f64, b: f64) -> f64 {
        match self.family {
            SpectralFamily::OhmicExponential => {
                // atan difference written to stay accurate far in the tail.
                let (ua, ub) = (a / self.eps, b / self.eps);
                let diff = ((ub - ua) / (1.0 + ua * ub)).atan();
                let diff = if 1.0 + ua * ub > 0.0 {
                    diff
                } else {
                    ub.atan() - ua.atan()
                };
                2.0 * self.mass * self.gamma / PI * diff
            }
        }
    }

    /// Total friction mass `∫₀^∞ M(t) dt = mγ`.
    pub fn kernel_mass(&self) -> f64 {
        self.mass * self.gamma
    }

    /// `coth(ħω / 2kT)`, or exactly 1 at zero temperature.
    pub fn thermal_spectrum(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "thermal spectrum needs omega > 0, got {omega}"
            )));
        }
        Ok(self.thermal_spectrum_unchecked(omega))
    }

    #[inline]
    fn thermal_spectrum_unchecked(&self, omega: f64) -> f64 {
        if self.kt == 0.0 {
            return 1.0;
        }
        let x = self.hbar * omega / (2.0 * self.kt);
        if x < COTH_SERIES_THRESHOLD {
            1.0 / x + x / 3.0
        } else if x > 20.0 {
            1.0 + 2.0 * (-2.0 * x).exp()
        } else {
            1.0 / x.tanh()
        }
    }

    /// Quantum noise spectrum `S(ω) = ħ J(ω) coth(ħω/2kT)`; at ω = 0 the
    /// analytic limit `2kT·J'(0)` (zero at kT = 0).
    pub fn noise_psd(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain(format!("noise psd needs omega >= 0, got {omega}")));
        }
        Ok(self.noise_psd_unchecked(omega))
    }

    #[inline]
    pub(crate) fn noise_psd_unchecked(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 2.0 * self.kt * self.density_over_omega(0.0);
        }
        let x = self.hbar * omega / (2.0 * self.kt);
        if self.kt > 0.0 && x < COTH_SERIES_THRESHOLD {
            // ħJ·(1/x + x/3) with the 1/x folded in to avoid 0·∞ near ω = 0.
            let j_over_w = self.density_over_omega(omega);
            return 2.0 * self.kt * j_over_w + self.hbar * self.spectral_density_unchecked(omega) * x / 3.0;
        }
        self.hbar * self.spectral_density_unchecked(omega) * self.thermal_spectrum_unchecked(omega)
    }

    /// Classical spectrum `2kT J(ω)/ω`, the transform of `kT·M(t)`.
    pub fn classical_psd(&self, omega: f64) -> f64 {
        2.0 * self.kt * self.density_over_omega(omega.abs())
    }

    /// Symmetrized quantum noise correlation
    /// `(1/π) ∫₀^∞ S(ω) cos(ω·lag) dω`, by adaptive quadrature.
    pub fn quantum_correlation(&self, lag: f64) -> Result<f64> {
        self.correlation_quadrature(lag, QuadOptions::default())
    }

    pub(crate) fn correlation_quadrature(&self, lag: f64, opts: QuadOptions) -> Result<f64> {
        if self.gamma == 0.0 {
            return Ok(0.0);
        }
        let upper = self.omega_max();
        let panels = quad::oscillatory_panels(upper, lag).max(opts.initial_panels);
        let r = quad::integrate(
            |w| self.noise_psd_unchecked(w) * (w * lag).cos(),
            0.0,
            upper,
            opts.with_panels(panels),
        )?;
        Ok(r.value / PI)
    }

    /// Zero-temperature closed form `(mγħ/π)(ε² − t²)/(ε² + t²)²`; `None`
    /// when kT > 0.
    pub fn zero_temperature_correlation(&self, lag: f64) -> Option<f64> {
        if self.kt != 0.0 {
            return None;
        }
        match self.family {
            SpectralFamily::OhmicExponential => {
                let e2 = self.eps * self.eps;
                let t2 = lag * lag;
                Some(
                    self.mass * self.gamma * self.hbar / PI * (e2 - t2) / ((e2 + t2) * (e2 + t2)),
                )
            }
        }
    }

    /// Classical fluctuation–dissipation target `kT·M(lag)`.
    pub fn classical_correlation(&self, lag: f64) -> f64 {
        self.kt * self.memory_kernel(lag)
    }
}
