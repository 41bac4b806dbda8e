use serde::Serialize;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    correction: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.correction += (self.sum - t) + value;
        } else {
            self.correction += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.correction);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.correction
    }
}

/// Mean and standard error of the mean from first and second power sums.
pub(crate) fn mean_and_stderr(sum: f64, sum_sq: f64, count: u64) -> (f64, f64) {
    if count == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = count as f64;
    let mean = sum / m;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
    (mean, (var / m).sqrt())
}

/// Least-squares fit of `log e = intercept + slope · log(1/n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Step counts left out because their error was zero.
    pub dropped: Vec<u64>,
}

pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits the convergence rate. Zero errors are dropped (with a log notice);
/// fewer than three surviving distinct step counts is an error.
pub fn fit_rate(step_counts: &[u64], errors: &[f64]) -> Result<RateFit> {
    if step_counts.len() != errors.len() {
        return Err(Error::usage("step counts and errors differ in length"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = Vec::new();
    for (&n, &e) in step_counts.iter().zip(errors) {
        if n == 0 {
            return Err(Error::usage("step counts must be positive"));
        }
        if !(e >= 0.0) || !e.is_finite() {
            return Err(Error::usage(format!("error estimate {e} at n = {n} is not a finite nonnegative number")));
        }
        if e == 0.0 {
            log::info!("dropping n = {n} from the rate fit: zero error");
            dropped.push(n);
            continue;
        }
        xs.push(-(n as f64).ln());
        ys.push(e.ln());
    }
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::usage(format!(
            "rate fit needs at least 3 distinct step counts with positive error, got {}",
            distinct.len()
        )));
    }
    let (slope, intercept) = ols_slope(&xs, &ys);
    Ok(RateFit { slope, intercept, dropped })
}

/// Linear-interpolated empirical quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const NS: [u64; 5] = [64, 128, 256, 512, 1024];

    #[test]
    fn exact_power_laws() {
        let e: Vec<f64> = NS.iter().map(|&n| 3.0 / n as f64).collect();
        assert_relative_eq!(fit_rate(&NS, &e).unwrap().slope, 1.0, max_relative = 1e-12);
        let e: Vec<f64> = NS.iter().map(|&n| 3.0 / (n as f64).sqrt()).collect();
        let fit = fit_rate(&NS, &e).unwrap();
        assert_relative_eq!(fit.slope, 0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 3f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let e: Vec<f64> = NS.iter().map(|&n| (1.0 + rng.random_range(-0.01..0.01)) / n as f64).collect();
            let s = fit_rate(&NS, &e).unwrap().slope;
            assert!((0.97..=1.03).contains(&s), "{s}");
        }
    }

    #[test]
    fn zero_errors_are_dropped() {
        let fit = fit_rate(&NS, &[0.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0, 0.0]).unwrap();
        assert_eq!(fit.dropped, vec![64, 1024]);
        assert_relative_eq!(fit.slope, 1.0, max_relative = 1e-12);
        assert!(fit_rate(&NS, &[0.0, 0.0, 0.0, 1.0, 2.0]).is_err());
        assert!(fit_rate(&[64, 64, 64], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        let (m, se) = mean_and_stderr(20.0, 40.0, 10);
        assert_eq!((m, se), (2.0, 0.0));
        assert_relative_eq!(quantile(&[1.0, 2.0, 3.0], 0.25), 1.5);
    }
}
