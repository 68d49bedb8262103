//! Small statistical helpers: streaming moments and log-linear decay fits.

use nalgebra::{DMatrix, DVector};

/// Streaming mean and covariance (Welford / outer-product update).
#[derive(Debug, Clone)]
pub struct RunningMoments {
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = x - &self.mean;
        // m2 += delta * delta2^T
        self.m2.ger(1.0, &delta, &delta2, 1.0);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Sample covariance (n−1 normalization). Zero matrix for n < 2.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.n < 2 {
            DMatrix::zeros(self.mean.len(), self.mean.len())
        } else {
            &self.m2 / (self.n - 1) as f64
        }
    }

    /// Merge two accumulators (used for ordered parallel reduction).
    pub fn merge(mut self, other: &RunningMoments) -> RunningMoments {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other.clone();
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = &other.mean - &self.mean;
        let total = n1 + n2;
        self.m2 += &other.m2;
        self.m2.ger(n1 * n2 / total, &delta, &delta, 1.0);
        self.mean += &delta * (n2 / total);
        self.n += other.n;
        self
    }
}

/// Least-squares fit of `log y[k] ~ intercept - rate * k` over `k` in `window`.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Per-step decay rate (negated slope of the log series).
    pub rate: f64,
    pub intercept: f64,
    /// Standard error of the rate from the fit residuals. Residuals of a
    /// replica-averaged curve are autocorrelated, so this underestimates the
    /// seed-to-seed spread; treat it as a floor, not a confidence radius.
    pub rate_se: f64,
    /// Number of points actually used.
    pub points: usize,
}

/// Fit the log-decay of a positive series over an index window.
///
/// The window is truncated at the first non-positive entry (a coalesced
/// coupling or an exactly solved iterate has nothing left to fit).
/// Returns `None` when fewer than 3 usable points remain.
pub fn fit_log_decay(series: &[f64], window: std::ops::Range<usize>) -> Option<DecayFit> {
    let start = window.start.min(series.len());
    let mut end = window.end.min(series.len());
    for k in start..end {
        if !(series[k] > 0.0) {
            end = k;
            break;
        }
    }
    let n = end.saturating_sub(start);
    if n < 3 {
        return None;
    }
    let mean_x = (start as f64 + (end - 1) as f64) / 2.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut mean_y = 0.0;
    for k in start..end {
        mean_y += series[k].ln();
    }
    mean_y /= n as f64;
    for k in start..end {
        let dx = k as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (series[k].ln() - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_resid = 0.0;
    for k in start..end {
        let r = series[k].ln() - (intercept + slope * k as f64);
        ss_resid += r * r;
    }
    let rate_se = if n > 2 {
        (ss_resid / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(DecayFit {
        rate: -slope,
        intercept,
        rate_se,
        points: n,
    })
}

/// Default trailing fit window `[n/5, n]` for a series of length `n + 1`
/// (indices 0..=n), skipping the transient where the difference vector is
/// still aligned with its initial direction.
pub fn trailing_window(last_index: usize) -> std::ops::Range<usize> {
    (last_index / 5)..(last_index + 1)
}

/// Ordinary least-squares slope of `y` against `x` (used for log-log scaling
/// exponents).
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<DVector<f64>> = (0..50)
            .map(|i| DVector::from_vec(vec![i as f64, (i * i) as f64 * 0.01]))
            .collect();
        let mut rm = RunningMoments::new(2);
        for x in &xs {
            rm.push(x);
        }
        let mean = xs.iter().fold(DVector::zeros(2), |a, x| a + x) / 50.0;
        assert_relative_eq!(rm.mean()[0], mean[0], max_relative = 1e-12);
        let mut cov = DMatrix::zeros(2, 2);
        for x in &xs {
            let d = x - &mean;
            cov += &d * d.transpose();
        }
        cov /= 49.0;
        assert_relative_eq!(rm.covariance()[(0, 1)], cov[(0, 1)], max_relative = 1e-10);

        // merging two halves gives the same result
        let mut a = RunningMoments::new(2);
        let mut b = RunningMoments::new(2);
        for x in &xs[..20] {
            a.push(x);
        }
        for x in &xs[20..] {
            b.push(x);
        }
        let merged = a.merge(&b);
        assert_relative_eq!(merged.mean()[1], rm.mean()[1], max_relative = 1e-12);
        assert_relative_eq!(
            merged.covariance()[(1, 1)],
            rm.covariance()[(1, 1)],
            max_relative = 1e-10
        );
    }

    #[test]
    fn exact_geometric_series_is_fit_exactly() {
        let rate = 0.05;
        let series: Vec<f64> = (0..100).map(|k| 3.0 * (-rate * k as f64).exp()).collect();
        let fit = fit_log_decay(&series, 10..100).unwrap();
        assert_relative_eq!(fit.rate, rate, max_relative = 1e-12);
        assert!(fit.rate_se < 1e-12);
    }

    #[test]
    fn window_truncates_at_nonpositive_values() {
        let mut series: Vec<f64> = (0..50).map(|k| (-0.1 * k as f64).exp()).collect();
        series[30] = 0.0;
        let fit = fit_log_decay(&series, 0..50).unwrap();
        assert_eq!(fit.points, 30);
        assert!(fit_log_decay(&series, 29..50).is_none());
    }
}
