//! Binned Gaussian kernel density estimation.

use crate::error::{DifError, Result};

/// Grid points of the binned estimate.
pub const KDE_GRID: usize = 401;
const DENSITY_FLOOR: f64 = 1e-12;

/// Gaussian KDE evaluated on an equispaced grid after linear binning;
/// off-grid queries are answered by linear interpolation.
#[derive(Debug, Clone)]
pub struct BinnedKde {
    lo: f64,
    step: f64,
    bandwidth: f64,
    density: Vec<f64>,
}

impl BinnedKde {
    pub fn new(values: &[f64]) -> Result<Self> {
        Self::weighted(values, &vec![1.0; values.len()])
    }

    /// Sample with non-negative frequency weights. The plug-in bandwidth
    /// `1.06 sd n^(-1/5)` uses the total weight as `n`.
    pub fn weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(DifError::LengthMismatch {
                what: "kde values vs weights",
                left: values.len(),
                right: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if values.is_empty() || total < 2.0 {
            return Err(DifError::InvalidData("kde needs at least two observations".into()));
        }
        let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
        let var = values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * (v - mean).powi(2))
            .sum::<f64>()
            / (total - 1.0);
        if var <= 0.0 || !var.is_finite() {
            return Err(DifError::InvalidData("kde sample has zero variance".into()));
        }
        let bandwidth = 1.06 * var.sqrt() * total.powf(-0.2);
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let lo = min - 3.0 * bandwidth;
        let hi = max + 3.0 * bandwidth;
        let step = (hi - lo) / (KDE_GRID - 1) as f64;

        let mut bins = vec![0.0; KDE_GRID];
        for (&v, &w) in values.iter().zip(weights) {
            let pos = (v - lo) / step;
            let j = (pos.floor() as usize).min(KDE_GRID - 2);
            let frac = pos - j as f64;
            bins[j] += w * (1.0 - frac);
            bins[j + 1] += w * frac;
        }

        // kernel values by grid offset, truncated where they underflow
        let norm = 1.0 / (total * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let reach = ((8.0 * bandwidth / step).ceil() as usize).min(KDE_GRID - 1);
        let kernel: Vec<f64> = (0..=reach)
            .map(|d| {
                let u = d as f64 * step / bandwidth;
                (-0.5 * u * u).exp() * norm
            })
            .collect();
        let mut density = vec![0.0; KDE_GRID];
        for (j, &c) in bins.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let from = j.saturating_sub(reach);
            let to = (j + reach).min(KDE_GRID - 1);
            for (k, d) in density.iter_mut().enumerate().take(to + 1).skip(from) {
                *d += c * kernel[k.abs_diff(j)];
            }
        }
        Ok(Self {
            lo,
            step,
            bandwidth,
            density,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..KDE_GRID).map(|k| self.lo + k as f64 * self.step).collect()
    }

    pub fn grid_density(&self) -> &[f64] {
        &self.density
    }

    /// Density at `x`, floored at `1e-12`.
    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        let value = if pos < 0.0 || pos > (KDE_GRID - 1) as f64 {
            0.0
        } else {
            let j = (pos.floor() as usize).min(KDE_GRID - 2);
            let frac = pos - j as f64;
            self.density[j] * (1.0 - frac) + self.density[j + 1] * frac
        };
        value.max(DENSITY_FLOOR)
    }
}

/// Density estimate of `values` at each query point.
pub fn kde_density(values: &[f64], query_points: &[f64]) -> Result<Vec<f64>> {
    let kde = BinnedKde::new(values)?;
    Ok(query_points.iter().map(|&x| kde.eval(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn symmetric_sample_gives_symmetric_density() {
        let kde = BinnedKde::new(&[-1.0, 0.0, 1.0]).unwrap();
        for x in [0.2, 0.7, 1.3, 2.0] {
            let (a, b) = (kde.eval(x), kde.eval(-x));
            assert!((a - b).abs() < 1e-9 * a.max(1.0), "{x}: {a} vs {b}");
        }
    }

    #[test]
    fn grid_density_integrates_to_one() {
        let kde = BinnedKde::new(&[-1.0, 0.0, 1.0, 0.5, 2.5]).unwrap();
        let d = kde.grid_density();
        let integral: f64 = d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * kde.step).sum();
        assert!((integral - 1.0).abs() < 1e-2, "{integral}");
    }

    #[test]
    fn standard_normal_peak() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = kde_density(&xs, &[0.0]).unwrap()[0];
        assert!((d - 0.398_942).abs() < 0.05, "{d}");
    }

    #[test]
    fn floors_and_errors() {
        let kde = BinnedKde::new(&[0.0, 1.0]).unwrap();
        assert_eq!(kde.eval(1e6), 1e-12);
        assert!(kde_density(&[1.0, 1.0, 1.0], &[0.0]).is_err());
        assert!(kde_density(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn weighted_equals_repeated() {
        let a = BinnedKde::weighted(&[0.0, 1.0, 2.0], &[1.0, 3.0, 2.0]).unwrap();
        let b = BinnedKde::new(&[0.0, 1.0, 1.0, 1.0, 2.0, 2.0]).unwrap();
        for x in [-0.5, 0.3, 1.0, 1.7] {
            assert!((a.eval(x) - b.eval(x)).abs() < 1e-12);
        }
    }
}
