//! Exponential integrals, in scaled form to avoid overflow.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^{x} E₁(x)` for `x > 0`.
pub fn e1_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "e1_scaled needs x > 0, got {x}");
    if x <= 1.0 {
        // E₁(x) = −γ − ln x − Σ_{k≥1} (−x)^k / (k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        // Continued fraction e^x E₁(x) = 1/(x+1− 1/(x+3− 4/(x+5− …))),
        // evaluated by the modified Lentz method.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
}

/// `E₁(x)` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    e1_scaled(x) * (-x).exp()
}

/// `e^{−x} Ei(x)` for `x > 0`.
pub fn ei_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "ei_scaled needs x > 0, got {x}");
    if x < 40.0 {
        // Ei(x) = γ + ln x + Σ_{k≥1} x^k / (k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add < 1e-17 * sum {
                break;
            }
        }
        (EULER_GAMMA + x.ln() + sum) * (-x).exp()
    } else {
        // Asymptotic series, truncated at its smallest term.
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 1..(x as usize) {
            let next = term * k as f64 / x;
            if next > term || next < 1e-17 {
                break;
            }
            term = next;
            sum += term;
        }
        sum / x
    }
}

/// `Ei(x)` for `x > 0`; `Ei(−x) = −E₁(x)`.
pub fn ei(x: f64) -> f64 {
    if x > 0.0 {
        ei_scaled(x) * x.exp()
    } else if x < 0.0 {
        -e1(-x)
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn tabulated_values() {
        assert!(rel(e1(1.0), 0.219_383_934_395_520_27) < 1e-14);
        assert!(rel(e1(0.1), 1.822_923_958_419_390_7) < 1e-14);
        assert!(rel(e1(10.0), 4.156_968_929_685_324e-6) < 1e-13);
        assert!(rel(ei(1.0), 1.895_117_816_355_936_8) < 1e-14);
        assert!(rel(ei(10.0), 2_492.228_976_241_877_7) < 1e-14);
        assert!(rel(ei(-1.0), -0.219_383_934_395_520_27) < 1e-14);
    }

    #[test]
    fn agrees_with_quadrature() {
        // E₁(x) = ∫_1^∞ e^{−xt}/t dt; substitute t = 1/u.
        for x in [0.01, 0.5, 1.0, 2.5, 7.0, 30.0] {
            let q = integrate(|u: f64| if u == 0.0 { 0.0 } else { (-x / u).exp() / u }, 0.0, 1.0, QuadOptions::default())
                .unwrap()
                .value;
            assert!(rel(e1(x), q) < 1e-9, "x = {x}: {} vs {q}", e1(x));
        }
    }

    #[test]
    fn branches_join_smoothly() {
        for (lo, hi) in [(1.0 - 1e-12, 1.0 + 1e-12)] {
            assert!(rel(e1_scaled(lo), e1_scaled(hi)) < 1e-10);
        }
        assert!(rel(ei_scaled(40.0 - 1e-9), ei_scaled(40.0)) < 1e-10);
    }
}
