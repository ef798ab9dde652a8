//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! The interval is first cut into `initial_panels` equal panels, which is how
//! oscillatory integrands are handled: callers pick roughly one panel per
//! half-period. The panel with the largest error estimate is bisected until
//! the total error drops below `max(abs_tol, rel_tol * |estimate|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 200_000,
            initial_panels: 1,
        }
    }
}

impl QuadOptions {
    pub fn with_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod evaluation with the embedded 7-point Gauss rule as
/// error estimate.
fn kronrod<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> (f64, f64) {
    let center = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrate `f` over `[lower, upper]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    if lower == upper {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let panels = opts.initial_panels.max(1);
    let width = (upper - lower) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for i in 0..panels {
        let a = lower + width * i as f64;
        let b = if i + 1 == panels { upper } else { a + width };
        let (value, error) = kronrod(&f, a, b);
        total += value;
        total_err += error;
        heap.push(Segment {
            lower: a,
            upper: b,
            value,
            error,
        });
    }

    let mut intervals = panels;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if intervals >= opts.max_intervals.max(panels + 1) {
            return Err(Error::Quadrature {
                lower,
                upper,
                estimate: total,
                error: total_err,
                intervals,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.lower + worst.upper);
        if mid <= worst.lower || mid >= worst.upper {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                lower,
                upper,
                estimate: total,
                error: total_err,
                intervals,
            });
        }
        let (v1, e1) = kronrod(&f, worst.lower, mid);
        let (v2, e2) = kronrod(&f, mid, worst.upper);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            lower: worst.lower,
            upper: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            lower: mid,
            upper: worst.upper,
            value: v2,
            error: e2,
        });
        intervals += 1;
        // Re-sum occasionally so cancellation in the running totals cannot
        // stall convergence.
        if intervals % 512 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// Number of panels that places roughly one panel per half-period of
/// `cos(frequency * x)` on an interval of length `span`, plus a floor.
pub(crate) fn oscillatory_panels(span: f64, frequency: f64) -> usize {
    let halves = (span * frequency.abs() / std::f64::consts::PI).ceil();
    (halves as usize).saturating_add(8).min(1_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_degree_22() {
        // Odd powers integrate to zero on symmetric intervals; check evens.
        for k in (0..=22).step_by(2) {
            let (v, _) = kronrod(&|x: f64| x.powi(k), -1.0, 1.0);
            let exact = 2.0 / (k as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "degree {k}: {v} vs {exact}");
        }
    }

    #[test]
    fn gauss_part_exact_for_degree_13() {
        // Error estimate vanishes when both rules are exact.
        for k in 0..=13 {
            let (_, e) = kronrod(&|x: f64| x.powi(k), 0.0, 1.0);
            assert!(e < 1e-14, "degree {k}: err {e}");
        }
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let r = integrate(|x: f64| x.exp(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-13);

        let eps = 1e-3;
        let r = integrate(
            |x: f64| eps / (eps * eps + x * x),
            -1.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - 2.0 * (1.0 / eps).atan()).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_with_panels() {
        let w = 300.0;
        let opts = QuadOptions::default().with_panels(oscillatory_panels(10.0, w));
        let r = integrate(|x: f64| (w * x).cos() * (-x).exp(), 0.0, 10.0, opts).unwrap();
        // Re ∫0^10 e^{-(1 - i w) x} dx
        let exact = {
            let d = 1.0 + w * w;
            let e = (-10.0f64).exp();
            ((1.0 - e * (10.0 * w).cos()) + w * e * (10.0 * w).sin()) / d
        };
        assert!((r.value - exact).abs() < 1e-11, "{} vs {}", r.value, exact);
    }

    #[test]
    fn non_convergence_reports_diagnostics() {
        let opts = QuadOptions {
            max_intervals: 4,
            ..QuadOptions::default()
        };
        let err = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, opts).unwrap_err();
        match err {
            Error::Quadrature { intervals, .. } => assert_eq!(intervals, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
