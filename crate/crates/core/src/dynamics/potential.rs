use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree accepted; higher powers overflow in long runs.
pub const MAX_DEGREE: usize = 8;

/// External potential `V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Free,
    /// `V = m ω₀² x² / 2`.
    Harmonic { omega0: f64 },
    /// `V = Σ c_k x^k`, coefficients in increasing order of power.
    Polynomial { coefficients: Vec<f64> },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::Free => Ok(()),
            Potential::Harmonic { omega0 } => {
                if omega0.is_finite() && *omega0 > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("potential.omega0", format!("must be finite and > 0, got {omega0}")))
                }
            }
            Potential::Polynomial { coefficients } => {
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("potential.coefficients", "coefficients must be finite"));
                }
                if coefficients.len() > MAX_DEGREE + 1 {
                    return Err(Error::config(
                        "potential.coefficients",
                        format!("degree {} exceeds the maximum of {MAX_DEGREE}", coefficients.len() - 1),
                    ));
                }
                Ok(())
            }
        }
    }

    /// True when the force is linear in `x` (quantum and classical dynamics
    /// coincide).
    pub fn is_quadratic(&self) -> bool {
        match self {
            Potential::Free | Potential::Harmonic { .. } => true,
            Potential::Polynomial { coefficients } => {
                coefficients.iter().skip(3).all(|&c| c == 0.0)
            }
        }
    }

    pub fn value(&self, x: f64, mass: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega0 } => 0.5 * mass * omega0 * omega0 * x * x,
            Potential::Polynomial { coefficients } => horner(coefficients.iter().copied(), x),
        }
    }

    /// `V′(x)`.
    pub fn derivative(&self, x: f64, mass: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega0 } => mass * omega0 * omega0 * x,
            Potential::Polynomial { coefficients } => derivative_at(coefficients, 1, x),
        }
    }

    /// `V‴(x)`.
    pub fn third_derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Free | Potential::Harmonic { .. } => 0.0,
            Potential::Polynomial { coefficients } => derivative_at(coefficients, 3, x),
        }
    }

    /// `−V′(x)`.
    #[inline]
    pub fn force(&self, x: f64, mass: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega0 } => -mass * omega0 * omega0 * x,
            Potential::Polynomial { coefficients } => -derivative_at(coefficients, 1, x),
        }
    }
}

fn horner(coeffs: impl DoubleEndedIterator<Item = f64>, x: f64) -> f64 {
    coeffs.rev().fold(0.0, |acc, c| acc * x + c)
}

/// `d^order/dx^order Σ c_k x^k`.
fn derivative_at(coefficients: &[f64], order: usize, x: f64) -> f64 {
    let terms = coefficients.iter().enumerate().skip(order).map(|(k, &c)| {
        let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
        c * falling
    });
    horner(terms.collect::<Vec<_>>().into_iter(), x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_and_harmonic_forces() {
        assert_eq!(Potential::Free.force(3.0, 2.0), 0.0);
        let h = Potential::Harmonic { omega0: 2.0 };
        assert_eq!(h.force(0.5, 3.0), -3.0 * 4.0 * 0.5);
        assert_eq!(h.value(1.0, 1.0), 2.0);
        assert!(h.is_quadratic());
    }

    #[test]
    fn polynomial_derivatives() {
        // V = 1 + 2x - x^2 + x^4/4
        let v = Potential::Polynomial { coefficients: vec![1.0, 2.0, -1.0, 0.0, 0.25] };
        let x = 1.5;
        assert!((v.value(x, 1.0) - (1.0 + 3.0 - 2.25 + 0.25 * 5.0625)).abs() < 1e-14);
        assert!((v.derivative(x, 1.0) - (2.0 - 3.0 + 3.375)).abs() < 1e-14);
        assert!((v.third_derivative(x) - 6.0 * x).abs() < 1e-14);
        assert!(!v.is_quadratic());
    }

    #[test]
    fn validation() {
        assert!(Potential::Harmonic { omega0: 0.0 }.validate().is_err());
        assert!(Potential::Polynomial { coefficients: vec![0.0; 10] }.validate().is_err());
        assert!(Potential::Polynomial { coefficients: vec![0.0, f64::NAN] }.validate().is_err());
        assert!(Potential::Polynomial { coefficients: vec![0.0; 9] }.validate().is_ok());
    }
}
