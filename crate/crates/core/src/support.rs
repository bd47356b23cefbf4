//! Common evaluation support built from pairwise averages of the matching
//! criterion across the two groups, optionally reduced by weighted
//! resampling of its distinct values.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::GroupedScores;
use crate::error::{DifError, Result};

/// Default cap on the support mass before reduction kicks in.
pub const DEFAULT_SUPPORT_SIZE: usize = 2000;

/// Distinct evaluation points with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub points: Vec<f64>,
    pub multiplicities: Vec<u64>,
    pub total_mass: u64,
    pub reduced: bool,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplicities as `f64` frequency weights.
    pub fn weights(&self) -> Vec<f64> {
        self.multiplicities.iter().map(|&m| m as f64).collect()
    }

    /// `sum_x mult(x) f(x) / total_mass`.
    pub fn average(&self, values: &[f64]) -> f64 {
        self.multiplicities
            .iter()
            .zip(values)
            .map(|(&m, v)| m as f64 * v)
            .sum::<f64>()
            / self.total_mass as f64
    }
}

fn distinct_with_counts(values: &[f64]) -> Vec<(f64, u64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, u64)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((last, c)) if *last == v => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// All `n0 n1` averages `(theta_0 + theta_1) / 2`, collapsed to distinct
/// values. Averages that differ only by rounding are merged.
pub fn common_support(gs: &GroupedScores) -> SupportSet {
    let a = distinct_with_counts(&gs.theta0);
    let b = distinct_with_counts(&gs.theta1);
    let mut pairs: Vec<(f64, u64)> = Vec::with_capacity(a.len() * b.len());
    for &(x, cx) in &a {
        for &(y, cy) in &b {
            pairs.push(((x + y) / 2.0, cx * cy));
        }
    }
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    let mut points: Vec<f64> = Vec::new();
    let mut multiplicities: Vec<u64> = Vec::new();
    for (x, m) in pairs {
        match points.last() {
            Some(&last) if same_point(last, x) => *multiplicities.last_mut().unwrap() += m,
            _ => {
                points.push(x);
                multiplicities.push(m);
            }
        }
    }
    let total_mass = multiplicities.iter().sum();
    SupportSet {
        points,
        multiplicities,
        total_mass,
        reduced: false,
    }
}

/// Draws `target_size` points with replacement from the distinct values of the
/// full support, with probabilities proportional to their multiplicities.
pub fn reduced_support<R: Rng + ?Sized>(
    gs: &GroupedScores,
    target_size: usize,
    rng: &mut R,
) -> Result<SupportSet> {
    let full = common_support(gs);
    resample_support(&full, target_size, rng)
}

pub fn resample_support<R: Rng + ?Sized>(
    full: &SupportSet,
    target_size: usize,
    rng: &mut R,
) -> Result<SupportSet> {
    if target_size == 0 {
        return Err(DifError::Config("support size must be positive".into()));
    }
    let dist = WeightedIndex::new(&full.multiplicities)
        .map_err(|e| DifError::InvalidData(format!("support weights: {e}")))?;
    let mut counts = vec![0u64; full.len()];
    for _ in 0..target_size {
        counts[dist.sample(rng)] += 1;
    }
    let (points, multiplicities): (Vec<f64>, Vec<u64>) = full
        .points
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(&p, c)| (p, c))
        .unzip();
    Ok(SupportSet {
        points,
        multiplicities,
        total_mass: target_size as u64,
        reduced: true,
    })
}

/// How the support used by the statistic is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportPolicy {
    /// Always the full pairwise support.
    Full,
    /// Reduce to this many draws whenever `n0 n1` exceeds it.
    Cap(usize),
}

impl Default for SupportPolicy {
    fn default() -> Self {
        SupportPolicy::Cap(DEFAULT_SUPPORT_SIZE)
    }
}

impl SupportPolicy {
    pub fn build<R: Rng + ?Sized>(&self, gs: &GroupedScores, rng: &mut R) -> Result<SupportSet> {
        let full = common_support(gs);
        match *self {
            SupportPolicy::Cap(cap) if (full.total_mass as usize) > cap => {
                resample_support(&full, cap, rng)
            }
            _ => Ok(full),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gs(a: &[f64], b: &[f64]) -> GroupedScores {
        GroupedScores::from_parts(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn single_pair() {
        let s = common_support(&gs(&[0.0], &[1.0]));
        assert_eq!(s.points, vec![0.5]);
        assert_eq!(s.multiplicities, vec![1]);
        assert!(!s.reduced);
    }

    #[test]
    fn two_by_two() {
        let s = common_support(&gs(&[0.0, 1.0], &[0.0, 1.0]));
        assert_eq!(s.points, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.multiplicities, vec![1, 2, 1]);
        assert_eq!(s.total_mass, 4);
    }

    #[test]
    fn mass_is_product() {
        let s = common_support(&gs(&[0.1, 0.4, 0.9], &[0.0, 0.3, 0.3, 2.0]));
        assert_eq!(s.total_mass, 12);
        assert!(s.points.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rounding_duplicates_merge() {
        // standardized integers: (z2 + z5)/2 and (z3 + z4)/2 agree up to rounding
        let z = |t: f64| (t - 3.3) / 1.7;
        let s = common_support(&gs(&[z(2.0), z(3.0)], &[z(4.0), z(5.0)]));
        assert_eq!(s.len(), 3);
        assert_eq!(s.multiplicities, vec![1, 2, 1]);
    }

    #[test]
    fn degenerate_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = reduced_support(&gs(&[0.0, 0.0], &[1.0]), 50, &mut rng).unwrap();
        assert_eq!(s.points, vec![0.5]);
        assert_eq!(s.multiplicities, vec![50]);
        assert_eq!(s.total_mass, 50);
        assert!(s.reduced);
    }

    #[test]
    fn reduction_is_seeded() {
        let g = gs(&[0.0, 0.4, 1.0, 1.3], &[0.0, 0.2, 1.0]);
        let a = reduced_support(&g, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = reduced_support(&g, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let full = common_support(&g);
        assert!(a.points.iter().all(|p| full.points.contains(p)));
        assert_eq!(a.multiplicities.iter().sum::<u64>(), 100);
    }

    #[test]
    fn reduction_frequencies_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = reduced_support(&gs(&[0.0, 1.0], &[0.0, 1.0]), 100_000, &mut rng).unwrap();
        let mid = s.points.iter().position(|&p| p == 0.5).unwrap();
        let freq = s.multiplicities[mid] as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn policy_caps() {
        let g = gs(&[0.0, 1.0, 2.0], &[0.5, 1.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(!SupportPolicy::Cap(6).build(&g, &mut rng).unwrap().reduced);
        let r = SupportPolicy::Cap(5).build(&g, &mut rng).unwrap();
        assert!(r.reduced);
        assert_eq!(r.total_mass, 5);
        assert!(!SupportPolicy::Full.build(&g, &mut rng).unwrap().reduced);
        assert!(reduced_support(&g, 0, &mut rng).is_err());
    }
}
