//! Ordinary least-squares line fits, used for log-log rate and dimension estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)` pairs. Needs two or more points with distinct x.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Fit(format!("need at least two points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite coordinate".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * points.iter().map(|p| p.0 * p.0).sum::<f64>().max(f64::MIN_POSITIVE) {
        return Err(Error::Fit("x values are not distinct".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, -2.0 * i as f64 + 1.0)).collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_points_interpolate() {
        let fit = fit_slope(&[(1.0, 3.0), (3.0, 7.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-15);
        assert!((fit.intercept - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_slope(&[(1.0, 2.0)]).is_err());
        assert!(fit_slope(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_slope(&[(1.0, f64::NAN), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn noisy_slope_recovered() {
        let noise = Normal::new(0.0, 0.05).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<_> = (0..8)
                .map(|i| {
                    let x = (50.0 * 1.5f64.powi(i)).ln();
                    (x, -1.25 * x + 2.0 + noise.sample(&mut rng))
                })
                .collect();
            let fit = fit_slope(&pts).unwrap();
            assert!((fit.slope + 1.25).abs() <= 0.15, "seed {seed}: {}", fit.slope);
        }
    }
}
