use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Mean and sample standard deviation (n - 1 denominator).
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Draws from `N(center, sigma)` restricted to `[lo, hi]` by rejection.
pub(crate) fn truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    center: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(center);
    }
    let normal = Normal::new(center, sigma)
        .map_err(|e| Error::domain(format!("bad normal({center}, {sigma}): {e}")))?;
    for _ in 0..10_000 {
        let x = normal.sample(rng);
        if x >= lo && x <= hi {
            return Ok(x);
        }
    }
    Err(Error::domain(format!(
        "normal({center}, {sigma}) has negligible mass in [{lo}, {hi}]"
    )))
}
