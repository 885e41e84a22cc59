//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, StudentsT};
use libm::erfc;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sum of squared deviations from the mean.
pub fn sum_sq_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Sample standard deviation (N - 1 denominator).
pub fn sample_sd(x: &[f64]) -> f64 {
    (sum_sq_dev(x) / (x.len() as f64 - 1.0)).sqrt()
}

/// Population standard deviation (N denominator).
pub fn population_sd(x: &[f64]) -> f64 {
    (sum_sq_dev(x) / x.len() as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Two-sided p-value of a standard normal deviate.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Upper quantile `t_{q, df}`.
pub fn t_quantile(q: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(mean(&x), 2.0);
        assert_eq!(sample_sd(&x), 1.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn reference_quantiles() {
        let p = normal_two_sided_p(1.959963984540054);
        assert!((p - 0.05).abs() < 1e-12, "{p}");
        assert!((t_quantile(0.975, 10.0) - 2.228138851986274).abs() < 1e-9);
        assert!((t_two_sided_p(2.228138851986274, 10.0) - 0.05).abs() < 1e-9);
    }
}
