//! Small statistical helpers shared by tests, the CLI and the acceptance suite.

/// Sample mean and its standard error (`s/√n`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Wald–Wolfowitz runs test on the signs of `values` (zeros are dropped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunsTest {
    pub runs: usize,
    pub positive: usize,
    pub negative: usize,
    pub z: f64,
    /// Two-sided p-value from the normal approximation.
    pub p_value: f64,
}

pub fn runs_test(values: &[f64]) -> RunsTest {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    let pos = signs.iter().filter(|s| **s).count();
    let neg = signs.len() - pos;
    let runs = if signs.is_empty() {
        0
    } else {
        1 + signs.windows(2).filter(|w| w[0] != w[1]).count()
    };
    if pos == 0 || neg == 0 {
        // A single sign over many samples is the most extreme pattern.
        let p = if signs.len() < 2 { 1.0 } else { 0.5f64.powi(signs.len() as i32 - 1) };
        return RunsTest {
            runs,
            positive: pos,
            negative: neg,
            z: f64::NAN,
            p_value: p,
        };
    }
    let n = (pos + neg) as f64;
    let (a, b) = (pos as f64, neg as f64);
    let mean = 2.0 * a * b / n + 1.0;
    let var = 2.0 * a * b * (2.0 * a * b - n) / (n * n * (n - 1.0));
    let z = if var > 0.0 { (runs as f64 - mean) / var.sqrt() } else { 0.0 };
    RunsTest {
        runs,
        positive: pos,
        negative: neg,
        z,
        p_value: libm::erfc(z.abs() / std::f64::consts::SQRT_2),
    }
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Residuals of correlated mean estimates, decorrelated: `L⁻¹ r` where
/// `L Lᵀ` is the covariance of the means estimated from `samples` (one vector
/// of per-sample values per component). Under the null hypothesis the result
/// is a vector of independent standard normals. `None` when the covariance
/// is singular.
pub fn whiten(residuals: &[f64], samples: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = residuals.len();
    assert_eq!(samples.len(), k, "one sample vector per residual");
    let n = samples.first()?.len();
    if n < 2 {
        return None;
    }
    let means: Vec<f64> = samples.iter().map(|s| s.iter().sum::<f64>() / n as f64).collect();
    let cov = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        let (si, sj) = (&samples[i], &samples[j]);
        let c: f64 = si.iter().zip(sj).map(|(a, b)| (a - means[i]) * (b - means[j])).sum();
        c / ((n - 1) * n) as f64
    });
    let chol = cov.cholesky()?;
    let r = nalgebra::DVector::from_column_slice(residuals);
    let w = chol.l().solve_lower_triangular(&r)?;
    Some(w.iter().copied().collect())
}
