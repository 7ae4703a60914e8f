//! Binomial intervals and log-log regression.

use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Monte Carlo estimate of a probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProportionEstimate {
    pub replicates: u64,
    pub successes: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl ProportionEstimate {
    /// Point estimate with a 95% Wilson interval.
    pub fn wilson(successes: u64, replicates: u64) -> Self {
        let n = replicates as f64;
        let p = if replicates == 0 { 0.0 } else { successes as f64 / n };
        let (ci_lo, ci_hi) = wilson_interval(successes, replicates, Z95);
        ProportionEstimate {
            replicates,
            successes,
            estimate: p,
            stderr: if replicates == 0 { f64::NAN } else { (p * (1.0 - p) / n).sqrt() },
            ci_lo,
            ci_hi,
        }
    }
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// One-sided Clopper-Pearson upper bound at level `1 - alpha`.
pub fn clopper_pearson_upper(successes: u64, n: u64, alpha: f64) -> f64 {
    if successes >= n {
        return 1.0;
    }
    Beta::new(successes as f64 + 1.0, (n - successes) as f64)
        .expect("valid beta parameters")
        .inverse_cdf(1.0 - alpha)
}

/// One-sided Clopper-Pearson lower bound at level `1 - alpha`.
pub fn clopper_pearson_lower(successes: u64, n: u64, alpha: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    Beta::new(successes as f64, (n - successes) as f64 + 1.0)
        .expect("valid beta parameters")
        .inverse_cdf(alpha)
}

pub fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Least-squares line through `(ln scale, ln estimate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    /// Points used, already on the log scale.
    pub points: Vec<(f64, f64)>,
    /// Scales dropped because their estimate was not positive.
    pub excluded: Vec<f64>,
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for &(s, e) in points {
        if s > 0.0 && e > 0.0 && s.is_finite() && e.is_finite() {
            used.push((s.ln(), e.ln()));
        } else {
            excluded.push(s);
        }
    }
    if used.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 positive points, got {} ({} excluded)",
            used.len(),
            excluded.len()
        )));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all scales coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        r2,
        points: used,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0].iter().map(|&m: &f64| (m, m.powi(-2))).collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn constant_and_too_few() {
        let f = fit_exponent(&[(1.0, 0.3), (2.0, 0.3), (4.0, 0.3)]).unwrap();
        assert!(f.slope.abs() < 1e-15);
        let e = fit_exponent(&[(1.0, 0.3), (2.0, 0.0), (4.0, 0.3)]);
        assert!(matches!(e, Err(Error::Fit(_))));
    }

    #[test]
    fn zero_success_cells_are_excluded() {
        let f = fit_exponent(&[(1.0, 0.5), (2.0, 0.25), (4.0, 0.125), (8.0, 0.0)]).unwrap();
        assert_eq!(f.excluded, vec![8.0]);
        assert!((f.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let e = ProportionEstimate::wilson(30, 100);
        assert!(e.ci_lo < 0.3 && e.ci_hi > 0.3);
        let z = ProportionEstimate::wilson(0, 100);
        assert_eq!(z.ci_lo, 0.0);
        assert!(z.ci_hi > 0.0);
    }

    #[test]
    fn clopper_pearson_zero_successes() {
        // (1 - p)^n = alpha at the bound
        let u = clopper_pearson_upper(0, 100, 0.05);
        assert!(((1.0 - u).powi(100) - 0.05).abs() < 1e-9);
        assert_eq!(clopper_pearson_lower(0, 100, 0.05), 0.0);
        let l = clopper_pearson_lower(100, 100, 0.05);
        assert!((l.powi(100) - 0.05).abs() < 1e-9);
    }
}
