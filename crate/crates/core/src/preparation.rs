//! Preparation functions in the Wigner representation and the sampling rule
//! that turns them into trajectory resets with importance weights.
//!
//! A preparation `λ(r₀,p₀|r̄,p̄)` maps the pre-intervention point `(r̄,p̄)` to a
//! new point `(r₀,p₀)`. New points are drawn from a density `q ∝ |λ|` and the
//! trajectory weight is multiplied by `λ/q`, so the weighted average is an
//! unbiased importance-sampling estimate whatever the sign of `λ`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the sampling box in units of the Gaussian standard deviation.
pub const BOX_SIGMAS: f64 = 6.0;
/// Proposals allowed for one draw before the envelope is declared broken.
pub const MAX_PROPOSALS: usize = 1_000_000;
/// Smallest acceptable rejection acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// A real function of one phase-space point, used as a factor of a
/// product-form preparation `λ = post(r₀,p₀)·pre(r̄,p̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpaceFactor {
    Constant {
        value: f64,
    },
    /// `exp(−(r−r_c)²/2σ_r² − (p−p_c)²/2σ_p²)`.
    Gaussian {
        r_center: f64,
        p_center: f64,
        sigma_r: f64,
        sigma_p: f64,
    },
    /// Wigner function of the symmetric two-packet superposition.
    Cat { x0: f64, sigma: f64 },
}

impl PhaseSpaceFactor {
    pub fn validate(&self, key: &str) -> Result<()> {
        let ok = match *self {
            PhaseSpaceFactor::Constant { value } => value.is_finite(),
            PhaseSpaceFactor::Gaussian {
                r_center,
                p_center,
                sigma_r,
                sigma_p,
            } => {
                r_center.is_finite()
                    && p_center.is_finite()
                    && sigma_r.is_finite()
                    && sigma_r > 0.0
                    && sigma_p.is_finite()
                    && sigma_p > 0.0
            }
            PhaseSpaceFactor::Cat { x0, sigma } => {
                x0.is_finite() && x0 >= 0.0 && sigma.is_finite() && sigma > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(key, format!("invalid phase-space factor {self:?}")))
        }
    }

    pub fn value(&self, hbar: f64, r: f64, p: f64) -> f64 {
        match *self {
            PhaseSpaceFactor::Constant { value } => value,
            PhaseSpaceFactor::Gaussian {
                r_center,
                p_center,
                sigma_r,
                sigma_p,
            } => {
                let a = (r - r_center) / sigma_r;
                let b = (p - p_center) / sigma_p;
                (-0.5 * (a * a + b * b)).exp()
            }
            PhaseSpaceFactor::Cat { x0, sigma } => cat_wigner(x0, sigma, hbar, r, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreparationFunction {
    /// Leaves the state untouched.
    #[default]
    Identity,
    /// Position measurement with Gaussian resolution `σ₀`.
    GaussianLocalize { sigma0: f64 },
    /// Projection onto the cat state, `λ ∝ W_cat(r₀,p₀)·W_cat(r̄,p̄)`.
    CatProject { x0: f64, sigma: f64 },
    ProductForm {
        post: PhaseSpaceFactor,
        pre: PhaseSpaceFactor,
    },
}

impl PreparationFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PreparationFunction::Identity => Ok(()),
            PreparationFunction::GaussianLocalize { sigma0 } => {
                if sigma0.is_finite() && sigma0 > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("preparation.sigma0", format!("must be > 0, got {sigma0}")))
                }
            }
            PreparationFunction::CatProject { x0, sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::config("preparation.sigma", format!("must be > 0, got {sigma}")));
                }
                if !(x0.is_finite() && x0 >= 0.0) {
                    return Err(Error::config("preparation.x0", format!("must be >= 0, got {x0}")));
                }
                Ok(())
            }
            PreparationFunction::ProductForm { post, pre } => {
                post.validate("preparation.post")?;
                pre.validate("preparation.pre")?;
                if let PhaseSpaceFactor::Constant { .. } = post {
                    return Err(Error::config(
                        "preparation.post",
                        "a constant post factor has no normalizable sampling density",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Post and pre factors, for the forms that factorize.
    fn factors(&self) -> Option<(PhaseSpaceFactor, PhaseSpaceFactor)> {
        match *self {
            PreparationFunction::CatProject { x0, sigma } => {
                let f = PhaseSpaceFactor::Cat { x0, sigma };
                Some((f, f))
            }
            PreparationFunction::ProductForm { post, pre } => Some((post, pre)),
            _ => None,
        }
    }

    /// `λ(r₀,p₀|r̄,p̄)`. For the Gaussian localization this is the density
    /// with respect to `p₀` on the line `r₀ = r̄`, where the delta lives.
    pub fn value(&self, hbar: f64, r0: f64, p0: f64, rbar: f64, pbar: f64) -> f64 {
        match *self {
            PreparationFunction::Identity => {
                if r0 == rbar && p0 == pbar {
                    1.0
                } else {
                    0.0
                }
            }
            PreparationFunction::GaussianLocalize { sigma0 } => {
                gaussian_value(sigma0, hbar, r0, p0, rbar, pbar)
            }
            _ => {
                let (post, pre) = self.factors().expect("factorized form");
                post.value(hbar, r0, p0) * pre.value(hbar, rbar, pbar)
            }
        }
    }
}

/// Prefactor of the Gaussian localization, `1/(2(2π)²)`.
pub const GAUSSIAN_PREFACTOR: f64 = 1.0 / (8.0 * PI * PI);

/// Gaussian localization `λ` without the `δ(r₀−r̄)` factor.
pub fn gaussian_value(sigma0: f64, hbar: f64, r0: f64, p0: f64, _rbar: f64, pbar: f64) -> f64 {
    let dp = p0 - pbar;
    GAUSSIAN_PREFACTOR
        * (-r0 * r0 / (2.0 * sigma0 * sigma0) - 2.0 * sigma0 * sigma0 * dp * dp / (hbar * hbar)).exp()
}

/// Norm `⟨ψ|ψ⟩ = 2(1 + e^{−x₀²/2σ²})` of the unnormalized superposition of
/// two packets of width `σ` centred at `±x₀`.
pub fn cat_norm(x0: f64, sigma: f64) -> f64 {
    2.0 * (1.0 + (-x0 * x0 / (2.0 * sigma * sigma)).exp())
}

/// Wigner function of the normalized two-packet state.
pub fn cat_wigner(x0: f64, sigma: f64, hbar: f64, r: f64, p: f64) -> f64 {
    let s2 = sigma * sigma;
    let pk = -2.0 * s2 * p * p / (hbar * hbar);
    let g = |y: f64| 2.0 * (-y * y / (2.0 * s2) + pk).exp();
    let cross = 2.0 * g(r) * (2.0 * x0 * p / hbar).cos();
    (g(r - x0) + g(r + x0) + cross) / (cat_norm(x0, sigma) * 2.0 * PI * hbar)
}

#[cfg(test)]
/// Pointwise upper bound of `|cat_wigner|`: the same sum with `|cos| → 1`.
fn cat_envelope(x0: f64, sigma: f64, hbar: f64, r: f64, p: f64) -> f64 {
    let s2 = sigma * sigma;
    let pk = -2.0 * s2 * p * p / (hbar * hbar);
    let g = |y: f64| 2.0 * (-y * y / (2.0 * s2) + pk).exp();
    (g(r - x0) + g(r + x0) + 2.0 * g(r)) / (cat_norm(x0, sigma) * 2.0 * PI * hbar)
}

/// Axis-aligned box `center ± half_width` holding the essential support of
/// the sampling density. A zero half-width means that coordinate is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingBox {
    pub r_center: f64,
    pub p_center: f64,
    pub r_half_width: f64,
    pub p_half_width: f64,
}

impl SamplingBox {
    pub fn contains(&self, r: f64, p: f64) -> bool {
        (r - self.r_center).abs() <= self.r_half_width && (p - self.p_center).abs() <= self.p_half_width
    }

    pub fn area(&self) -> f64 {
        4.0 * self.r_half_width * self.p_half_width
    }
}

fn factor_box(f: &PhaseSpaceFactor, hbar: f64) -> Option<SamplingBox> {
    match *f {
        PhaseSpaceFactor::Constant { .. } => None,
        PhaseSpaceFactor::Gaussian {
            r_center,
            p_center,
            sigma_r,
            sigma_p,
        } => Some(SamplingBox {
            r_center,
            p_center,
            r_half_width: BOX_SIGMAS * sigma_r,
            p_half_width: BOX_SIGMAS * sigma_p,
        }),
        PhaseSpaceFactor::Cat { x0, sigma } => Some(SamplingBox {
            r_center: 0.0,
            p_center: 0.0,
            r_half_width: x0 + BOX_SIGMAS * sigma,
            p_half_width: BOX_SIGMAS * hbar / (2.0 * sigma),
        }),
    }
}

/// Sampling box for `prep` given the pre-intervention point.
pub fn envelope(prep: &PreparationFunction, hbar: f64, rbar: f64, pbar: f64) -> Result<SamplingBox> {
    prep.validate()?;
    match *prep {
        PreparationFunction::Identity => Ok(SamplingBox {
            r_center: rbar,
            p_center: pbar,
            r_half_width: 0.0,
            p_half_width: 0.0,
        }),
        PreparationFunction::GaussianLocalize { sigma0 } => Ok(SamplingBox {
            r_center: rbar,
            p_center: pbar,
            r_half_width: 0.0,
            p_half_width: BOX_SIGMAS * hbar / (2.0 * sigma0),
        }),
        _ => {
            let (post, _) = prep.factors().expect("factorized form");
            Ok(factor_box(&post, hbar).expect("validated post factor"))
        }
    }
}

/// Draws post-intervention points and weight factors for one preparation.
/// Construction does the one-off work (normalization of `|post|`), so a
/// sampler should be built once per ensemble.
#[derive(Debug, Clone)]
pub struct Sampler {
    prep: PreparationFunction,
    hbar: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Identity,
    Gaussian {
        sigma_p: f64,
        /// `λ/q` apart from the `exp(−r̄²/2σ₀²)` factor.
        scale: f64,
        sigma0: f64,
    },
    Factorized {
        post: PhaseSpaceFactor,
        pre: PhaseSpaceFactor,
        bx: SamplingBox,
        /// `∫|post|` over the box.
        z_abs: f64,
        /// Upper bound of `|post|` on the box.
        bound: f64,
    },
}

impl Sampler {
    pub fn new(prep: &PreparationFunction, hbar: f64) -> Result<Self> {
        prep.validate()?;
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::config("bath.hbar", "must be > 0"));
        }
        let kind = match *prep {
            PreparationFunction::Identity => SamplerKind::Identity,
            PreparationFunction::GaussianLocalize { sigma0 } => {
                let sigma_p = hbar / (2.0 * sigma0);
                // q is the normal density of p₀ truncated to the box; the
                // mass outside ±6σ (2e-9) is below any statistical resolution.
                let scale = GAUSSIAN_PREFACTOR * (2.0 * PI).sqrt() * sigma_p * box_mass();
                SamplerKind::Gaussian {
                    sigma_p,
                    scale,
                    sigma0,
                }
            }
            _ => {
                let (post, pre) = prep.factors().expect("factorized form");
                let bx = factor_box(&post, hbar).expect("validated post factor");
                let (z_abs, bound) = match post {
                    PhaseSpaceFactor::Gaussian { sigma_r, sigma_p, .. } => {
                        (2.0 * PI * sigma_r * sigma_p * box_mass() * box_mass(), 1.0)
                    }
                    PhaseSpaceFactor::Cat { x0, sigma } => {
                        let z = abs_integral(&post, hbar, &bx, 801);
                        // Each packet term is at most 2, the interference term at most 4.
                        let bound = 8.0 / (cat_norm(x0, sigma) * 2.0 * PI * hbar);
                        (z, bound)
                    }
                    PhaseSpaceFactor::Constant { .. } => unreachable!(),
                };
                let acceptance = z_abs / (bx.area() * bound);
                if matches!(post, PhaseSpaceFactor::Cat { .. }) && acceptance < MIN_ACCEPTANCE {
                    return Err(Error::Envelope {
                        accepted: (acceptance * MAX_PROPOSALS as f64) as usize,
                        proposals: MAX_PROPOSALS,
                    });
                }
                SamplerKind::Factorized {
                    post,
                    pre,
                    bx,
                    z_abs,
                    bound,
                }
            }
        };
        Ok(Sampler {
            prep: *prep,
            hbar,
            kind,
        })
    }

    pub fn preparation(&self) -> &PreparationFunction {
        &self.prep
    }

    /// `∫|post|` for factorized forms.
    pub fn abs_normalization(&self) -> Option<f64> {
        match self.kind {
            SamplerKind::Factorized { z_abs, .. } => Some(z_abs),
            _ => None,
        }
    }

    /// Draw `(r₀, p₀, λ/q)`.
    pub fn sample<R: Rng + ?Sized>(&self, rbar: f64, pbar: f64, rng: &mut R) -> Result<(f64, f64, f64)> {
        match &self.kind {
            SamplerKind::Identity => Ok((rbar, pbar, 1.0)),
            SamplerKind::Gaussian {
                sigma_p,
                scale,
                sigma0,
            } => {
                let dp = truncated_normal(rng)? * sigma_p;
                let weight = scale * (-rbar * rbar / (2.0 * sigma0 * sigma0)).exp();
                Ok((rbar, pbar + dp, weight))
            }
            SamplerKind::Factorized {
                post,
                pre,
                bx,
                z_abs,
                bound,
            } => {
                let (r0, p0, v) = match *post {
                    PhaseSpaceFactor::Gaussian {
                        r_center,
                        p_center,
                        sigma_r,
                        sigma_p,
                    } => {
                        let r = r_center + sigma_r * truncated_normal(rng)?;
                        let p = p_center + sigma_p * truncated_normal(rng)?;
                        (r, p, post.value(self.hbar, r, p))
                    }
                    _ => self.reject(post, bx, *bound, rng)?,
                };
                let sign = if v < 0.0 { -1.0 } else { 1.0 };
                Ok((r0, p0, sign * z_abs * pre.value(self.hbar, rbar, pbar)))
            }
        }
    }

    fn reject<R: Rng + ?Sized>(
        &self,
        post: &PhaseSpaceFactor,
        bx: &SamplingBox,
        bound: f64,
        rng: &mut R,
    ) -> Result<(f64, f64, f64)> {
        for _ in 0..MAX_PROPOSALS {
            let r = bx.r_center + bx.r_half_width * (2.0 * rng.random::<f64>() - 1.0);
            let p = bx.p_center + bx.p_half_width * (2.0 * rng.random::<f64>() - 1.0);
            let v = post.value(self.hbar, r, p);
            if rng.random::<f64>() * bound < v.abs() {
                return Ok((r, p, v));
            }
        }
        Err(Error::Envelope {
            accepted: 0,
            proposals: MAX_PROPOSALS,
        })
    }
}

/// Draw `(r₀, p₀, λ/q)` for a single intervention. Builds a [`Sampler`]
/// on every call; reuse a sampler when drawing many points.
pub fn sample<R: Rng + ?Sized>(
    prep: &PreparationFunction,
    hbar: f64,
    rbar: f64,
    pbar: f64,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    Sampler::new(prep, hbar)?.sample(rbar, pbar, rng)
}

/// Standard normal conditioned on `|z| ≤ 6`.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> Result<f64> {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= BOX_SIGMAS {
            return Ok(z);
        }
    }
}

/// Probability mass of a standard normal inside `±6`.
fn box_mass() -> f64 {
    libm::erf(BOX_SIGMAS / std::f64::consts::SQRT_2)
}

/// Midpoint-rule `∫|f|` over the box with `n × n` cells.
fn abs_integral(f: &PhaseSpaceFactor, hbar: f64, bx: &SamplingBox, n: usize) -> f64 {
    let hr = 2.0 * bx.r_half_width / n as f64;
    let hp = 2.0 * bx.p_half_width / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let r = bx.r_center - bx.r_half_width + (i as f64 + 0.5) * hr;
        for j in 0..n {
            let p = bx.p_center - bx.p_half_width + (j as f64 + 0.5) * hp;
            total += f.value(hbar, r, p).abs();
        }
    }
    total * hr * hp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamPurpose};
    use proptest::prelude::*;

    fn rng(seed: u64) -> rand_chacha::ChaCha20Rng {
        stream(seed, 0, StreamPurpose::Preparation)
    }

    fn mean_se(v: &[f64]) -> (f64, f64) {
        crate::stats::mean_and_se(v)
    }

    #[test]
    fn gaussian_value_examples() {
        let peak = gaussian_value(1.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!((peak - GAUSSIAN_PREFACTOR).abs() < 1e-18);
        let one_sigma = gaussian_value(1.0, 1.0, 0.0, 0.5, 0.0, 0.0);
        assert!((one_sigma / peak - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_marginal_over_momentum() {
        // ∫dp₀ λ = prefactor · exp(−r̄²/2σ₀²) · √(π ħ²/(2σ₀²)).
        let (sigma0, hbar, pbar) = (0.7, 1.3, 0.4);
        for rbar in [0.0, 0.5, 1.7] {
            let q = crate::quad::integrate(
                |p| gaussian_value(sigma0, hbar, rbar, p, rbar, pbar),
                pbar - 20.0,
                pbar + 20.0,
                crate::quad::QuadOptions::default(),
            )
            .unwrap()
            .value;
            let expected = GAUSSIAN_PREFACTOR
                * (-rbar * rbar / (2.0 * sigma0 * sigma0)).exp()
                * (PI * hbar * hbar / (2.0 * sigma0 * sigma0)).sqrt();
            assert!((q - expected).abs() < 1e-12 * expected.max(1e-300), "{q} vs {expected}");
        }
    }

    #[test]
    fn cat_wigner_examples() {
        assert!(cat_wigner(2.0, 0.5, 1.0, 0.0, 0.0) > 0.0);
        let p = PI / (2.0 * 2.0);
        assert!(cat_wigner(2.0, 0.5, 1.0, 0.0, p) < 0.0);
        // x₀ = 0 reduces to a single packet.
        let single = (-0.3f64 * 0.3 / 0.5 - 2.0 * 0.25 * 0.2 * 0.2).exp() / PI;
        assert!((cat_wigner(0.0, 0.5, 1.0, 0.3, 0.2) - single).abs() < 1e-15);
    }

    /// Wigner transform of the cat wavefunction by direct quadrature:
    /// `W(r,p) = (2πħ)⁻¹ ∫dy ψ(r+y/2) ψ(r−y/2) e^{−ipy/ħ}` for real ψ.
    fn wigner_oracle(x0: f64, sigma: f64, hbar: f64, r: f64, p: f64) -> f64 {
        let amp = (2.0 * PI * sigma * sigma).powf(-0.25) / cat_norm(x0, sigma).sqrt();
        let packet = |x: f64, c: f64| (-(x - c) * (x - c) / (4.0 * sigma * sigma)).exp();
        let psi = |x: f64| amp * (packet(x, x0) + packet(x, -x0));
        let half = 2.0 * x0 + 24.0 * sigma;
        let n = 4000;
        let h = 2.0 * half / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let y = -half + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * psi(r + 0.5 * y) * psi(r - 0.5 * y) * (p * y / hbar).cos();
        }
        acc * h / (2.0 * PI * hbar)
    }

    #[test]
    fn cat_wigner_matches_grid_transform() {
        let (x0, sigma, hbar) = (1.5, 0.5, 1.0);
        let mut worst: f64 = 0.0;
        for i in 0..101 {
            let r = -4.0 + 8.0 * i as f64 / 100.0;
            for j in 0..101 {
                let p = -4.0 + 8.0 * j as f64 / 100.0;
                let d = cat_wigner(x0, sigma, hbar, r, p) - wigner_oracle(x0, sigma, hbar, r, p);
                worst = worst.max(d.abs());
            }
        }
        assert!(worst <= 1e-6, "max deviation {worst}");
    }

    #[test]
    fn cat_wigner_is_normalized() {
        let (x0, sigma, hbar) = (2.0, 0.5, 1.0);
        let f = PhaseSpaceFactor::Cat { x0, sigma };
        let bx = factor_box(&f, hbar).unwrap();
        let n = 600;
        let hr = 2.0 * bx.r_half_width / n as f64;
        let hp = 2.0 * bx.p_half_width / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r = -bx.r_half_width + (i as f64 + 0.5) * hr;
                let p = -bx.p_half_width + (j as f64 + 0.5) * hp;
                total += cat_wigner(x0, sigma, hbar, r, p);
            }
        }
        assert!((total * hr * hp - 1.0).abs() < 1e-6, "{}", total * hr * hp);
    }

    #[test]
    fn envelope_examples() {
        let g = envelope(&PreparationFunction::GaussianLocalize { sigma0: 1.0 }, 1.0, 0.3, -0.2).unwrap();
        assert_eq!(g.p_half_width, 3.0);
        assert_eq!(g.r_half_width, 0.0);
        let c = envelope(&PreparationFunction::CatProject { x0: 2.0, sigma: 0.5 }, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(c.r_half_width, 5.0);
        assert_eq!(c.p_half_width, 6.0);
        // Tail mass of |W| outside the box is bounded by the Gaussian tail of
        // its envelope, 2·erfc(6/√2) per axis.
        let tail = 2.0 * libm::erfc(6.0 / std::f64::consts::SQRT_2);
        assert!(tail < 1e-8);
    }

    #[test]
    fn identity_sample_is_exact() {
        let (r, p, w) = sample(&PreparationFunction::Identity, 1.0, 0.25, -1.5, &mut rng(1)).unwrap();
        assert_eq!((r, p, w), (0.25, -1.5, 1.0));
    }

    #[test]
    fn gaussian_sample_moments() {
        let s = Sampler::new(&PreparationFunction::GaussianLocalize { sigma0: 0.8 }, 1.0).unwrap();
        let mut g = rng(2);
        let n = 100_000;
        let mut dps = Vec::with_capacity(n);
        for _ in 0..n {
            let (r, p, _) = s.sample(0.3, 1.0, &mut g).unwrap();
            assert_eq!(r, 0.3);
            dps.push(p - 1.0);
        }
        let sq: Vec<f64> = dps.iter().map(|d| d * d).collect();
        let (m2, se2) = mean_se(&sq);
        // SD estimate ± SE via the delta method.
        let sd = m2.sqrt();
        let se_sd = se2 / (2.0 * sd);
        assert!((sd - 1.0 / 1.6).abs() < 3.0 * se_sd, "sd {sd} ± {se_sd}");
    }

    #[test]
    fn cat_sampling_hits_negative_fringes() {
        let sigma = 0.5;
        let s = Sampler::new(&PreparationFunction::CatProject { x0: 4.0 * sigma, sigma }, 1.0).unwrap();
        let mut g = rng(3);
        let negative = (0..5000)
            .map(|_| s.sample(0.0, 0.0, &mut g).unwrap().2)
            .filter(|&w| w < 0.0)
            .count();
        assert!(negative > 0);
    }

    #[test]
    fn importance_identity_cat() {
        // E[w·f(r₀,p₀)] = pre(r̄,p̄) · ∫ post·f.
        let (x0, sigma, hbar) = (1.0, 0.5, 1.0);
        let prep = PreparationFunction::CatProject { x0, sigma };
        let s = Sampler::new(&prep, hbar).unwrap();
        let (rbar, pbar) = (0.2, 0.1);
        let f = |r: f64, p: f64| (r * r + 0.5 * p).cos() + r;
        let mut g = rng(4);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                let (r, p, w) = s.sample(rbar, pbar, &mut g).unwrap();
                w * f(r, p)
            })
            .collect();
        let (m, se) = mean_se(&draws);
        let post = PhaseSpaceFactor::Cat { x0, sigma };
        let bx = factor_box(&post, hbar).unwrap();
        let n = 500;
        let (hr, hp) = (2.0 * bx.r_half_width / n as f64, 2.0 * bx.p_half_width / n as f64);
        let mut integral = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r = -bx.r_half_width + (i as f64 + 0.5) * hr;
                let p = -bx.p_half_width + (j as f64 + 0.5) * hp;
                integral += post.value(hbar, r, p) * f(r, p);
            }
        }
        let expected = integral * hr * hp * post.value(hbar, rbar, pbar);
        assert!((m - expected).abs() < 3.0 * se, "{m} ± {se} vs {expected}");
    }

    #[test]
    fn importance_identity_gaussian() {
        // E[w·f(p₀)] = ∫dp₀ λ(r̄, p₀|r̄, p̄) f(p₀).
        let (sigma0, hbar, rbar, pbar) = (0.6, 1.0, 0.4, -0.3);
        let s = Sampler::new(&PreparationFunction::GaussianLocalize { sigma0 }, hbar).unwrap();
        let f = |p: f64| p * p + (2.0 * p).sin();
        let mut g = rng(5);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                let (_, p, w) = s.sample(rbar, pbar, &mut g).unwrap();
                w * f(p)
            })
            .collect();
        let (m, se) = mean_se(&draws);
        let expected = crate::quad::integrate(
            |p| gaussian_value(sigma0, hbar, rbar, p, rbar, pbar) * f(p),
            pbar - 15.0,
            pbar + 15.0,
            crate::quad::QuadOptions::default(),
        )
        .unwrap()
        .value;
        assert!((m - expected).abs() < 3.0 * se, "{m} ± {se} vs {expected}");
    }

    #[test]
    fn product_form_gaussian_post() {
        let post = PhaseSpaceFactor::Gaussian {
            r_center: 1.0,
            p_center: 0.0,
            sigma_r: 0.3,
            sigma_p: 2.0,
        };
        let prep = PreparationFunction::ProductForm {
            post,
            pre: PhaseSpaceFactor::Constant { value: 2.0 },
        };
        let s = Sampler::new(&prep, 1.0).unwrap();
        let mut g = rng(6);
        let draws: Vec<(f64, f64, f64)> = (0..50_000).map(|_| s.sample(0.0, 0.0, &mut g).unwrap()).collect();
        let expected_w = 2.0 * 2.0 * PI * 0.3 * 2.0 * box_mass() * box_mass();
        assert!(draws.iter().all(|d| (d.2 - expected_w).abs() < 1e-12));
        let rs: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let (m, se) = mean_se(&rs);
        assert!((m - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn invalid_forms_rejected() {
        assert!(PreparationFunction::GaussianLocalize { sigma0: 0.0 }.validate().is_err());
        assert!(PreparationFunction::CatProject { x0: -1.0, sigma: 1.0 }.validate().is_err());
        assert!(PreparationFunction::CatProject { x0: 1.0, sigma: 0.0 }.validate().is_err());
        let constant_post = PreparationFunction::ProductForm {
            post: PhaseSpaceFactor::Constant { value: 1.0 },
            pre: PhaseSpaceFactor::Constant { value: 1.0 },
        };
        assert!(constant_post.validate().is_err());
    }

    #[test]
    fn tiny_acceptance_is_an_envelope_error() {
        // Huge separation relative to width: the box is mostly empty.
        let err = Sampler::new(&PreparationFunction::CatProject { x0: 1e5, sigma: 1e-3 }, 1.0).unwrap_err();
        assert!(matches!(err, Error::Envelope { .. }), "{err:?}");
    }

    proptest! {
        #[test]
        fn sampling_is_deterministic(seed in 0u64..1000, rbar in -3.0f64..3.0, pbar in -3.0f64..3.0) {
            let s = Sampler::new(&PreparationFunction::CatProject { x0: 1.0, sigma: 0.5 }, 1.0).unwrap();
            let a = s.sample(rbar, pbar, &mut rng(seed)).unwrap();
            let b = s.sample(rbar, pbar, &mut rng(seed)).unwrap();
            prop_assert_eq!(a.0.to_bits(), b.0.to_bits());
            prop_assert_eq!(a.1.to_bits(), b.1.to_bits());
            prop_assert_eq!(a.2.to_bits(), b.2.to_bits());
        }

        #[test]
        fn cat_envelope_bounds_wigner(r in -6.0f64..6.0, p in -6.0f64..6.0, x0 in 0.0f64..3.0, sigma in 0.1f64..2.0) {
            let w = cat_wigner(x0, sigma, 1.0, r, p);
            prop_assert!(w.abs() <= cat_envelope(x0, sigma, 1.0, r, p) * (1.0 + 1e-12));
        }
    }
}
