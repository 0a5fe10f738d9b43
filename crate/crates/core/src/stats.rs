//! Estimators used to compare simulations against analytic values.

use crate::error::{Error, Result};

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 20;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `(value - reference) / std_error`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference) / self.std_error
    }

    pub fn within(&self, reference: f64, n_se: f64) -> bool {
        (self.value - reference).abs() <= n_se * self.std_error
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean with a batch-means standard error over [`BATCHES`]
/// contiguous batches, which stays honest for correlated series.
pub fn batch_means(series: &[f64]) -> Result<Estimate> {
    batch_means_with(series, BATCHES)
}

/// [`batch_means`] with a chosen number of batches. More batches give a
/// less noisy standard error as long as each batch stays much longer than
/// the correlation time of the series.
pub fn batch_means_with(series: &[f64], batches: usize) -> Result<Estimate> {
    if batches < 2 || series.len() < 2 * batches {
        return Err(Error::arg(format!(
            "batch means over {batches} batches need at least {} points, got {}",
            2 * batches.max(2),
            series.len()
        )));
    }
    let size = series.len() / batches;
    let batch: Vec<f64> = series.chunks_exact(size).take(batches).map(mean).collect();
    let grand = mean(&series[..size * batches]);
    let var = batch.iter().map(|b| (b - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(Estimate {
        value: mean(series),
        std_error: (var / batches as f64).sqrt(),
    })
}

/// Lag-`h` sample covariance `(1/N) sum (x_i - mean)(x_{i+h} - mean)` with a
/// batch-means standard error.
pub fn lag_covariance(series: &[f64], lag: usize) -> Result<Estimate> {
    lag_covariance_with(series, lag, BATCHES)
}

pub fn lag_covariance_with(series: &[f64], lag: usize, batches: usize) -> Result<Estimate> {
    if series.len() <= lag {
        return Err(Error::arg("series shorter than the lag"));
    }
    let m = mean(series);
    let products: Vec<f64> = series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .collect();
    let est = batch_means_with(&products, batches)?;
    let n = series.len() as f64;
    let scale = products.len() as f64 / n;
    Ok(Estimate {
        value: est.value * scale,
        std_error: est.std_error * scale,
    })
}

/// Normalized autocorrelation `c(h) / c(0)` for `h = 0..=max_lag`, with
/// `c(h) = (1/N) sum (x_i - mean)(x_{i+h} - mean)`.
pub fn empirical_autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() < 10 * max_lag.max(1) {
        return Err(Error::arg(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let m = mean(series);
    let n = series.len() as f64;
    let c = |h: usize| -> f64 {
        series
            .iter()
            .zip(&series[h..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / n
    };
    let c0 = c(0);
    if !(c0 > 0.0) {
        return Err(Error::arg("series is constant"));
    }
    Ok((0..=max_lag).map(|h| c(h) / c0).collect())
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
