//! Sample statistics with standard errors.

use alloc::vec::Vec;

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// `|value − target| ≤ sigmas · se`, with an absolute floor for exact zeros.
    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.se + 1e-12
    }
}

/// Standard errors added in quadrature.
pub fn combined_se(ses: &[f64]) -> f64 {
    libm::sqrt(ses.iter().map(|s| s * s).sum())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Sample mean with its standard error `s / sqrt(n)`; this coincides with
/// the jackknife standard error of the mean.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n < 2 {
        return Estimate { value: mean(xs), se: 0.0 };
    }
    Estimate { value: mean(xs), se: libm::sqrt(sample_variance(xs) / n as f64) }
}

/// Unbiased sample variance with a jackknife standard error.
///
/// Leave-one-out variances are obtained in O(n) from centred power sums.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let value = sample_variance(xs);
    if n < 3 {
        return Estimate { value, se: 0.0 };
    }
    let m = mean(xs);
    let centred: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let s1: f64 = centred.iter().sum();
    let s2: f64 = centred.iter().map(|d| d * d).sum();
    let nf = n as f64;
    let loo: Vec<f64> = centred
        .iter()
        .map(|&d| {
            let t1 = s1 - d;
            let t2 = s2 - d * d;
            (t2 - t1 * t1 / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let loo_mean = mean(&loo);
    let spread: f64 = loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum();
    Estimate { value, se: libm::sqrt((nf - 1.0) / nf * spread) }
}

/// Least-squares line `y = intercept + slope · x`. `None` for fewer than two
/// distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn brute_jackknife_variance(xs: &[f64]) -> f64 {
        let n = xs.len();
        let loo: Vec<f64> = (0..n)
            .map(|k| {
                let rest: Vec<f64> = xs.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, x)| *x).collect();
                sample_variance(&rest)
            })
            .collect();
        let m = mean(&loo);
        libm::sqrt((n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let xs = vec![0.3, -1.2, 2.5, 0.0, 0.7, 1.1, -0.4, 3.3, 0.9];
        let est = variance_estimate(&xs);
        assert!((est.value - sample_variance(&xs)).abs() < 1e-15);
        assert!((est.se - brute_jackknife_variance(&xs)).abs() < 1e-13);
    }

    #[test]
    fn mean_estimate_small_inputs() {
        assert_eq!(mean_estimate(&[]).value, 0.0);
        assert_eq!(mean_estimate(&[2.0]), Estimate { value: 2.0, se: 0.0 });
        let e = mean_estimate(&[1.0, 3.0]);
        assert_eq!(e.value, 2.0);
        assert!((e.se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_samples_have_zero_spread() {
        let e = variance_estimate(&[1.5; 10]);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 2.0 * x).collect();
        let (slope, intercept) = linear_fit(&xs, &ys).unwrap();
        assert!((slope + 2.0).abs() < 1e-14 && (intercept - 0.5).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
