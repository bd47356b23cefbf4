//! Weighted curve-difference statistic, weight functions and variance
//! estimators.
//!
//! For an item with estimated curves `m0`, `m1` on the common support and a
//! weight function `W`,
//!
//! ```text
//! T      = (1/M) sum_x mult(x) W(x) (m0(x) - m1(x))
//! c_p    = (1/M) sum_x mult(x) W(x) W_p(x)            (W_p: nearest-neighbor weight)
//! sigma2 = N sum_g sum_{p in g} v_g(theta_p) c_p^2    (N = n0 n1 / (n0 + n1))
//! z      = sqrt(N) T / sigma
//! ```
//!
//! where `M` is the support mass and `v_g` is either the Bernoulli variance
//! `m(1 - m)` or the squared residual.

use serde::{Deserialize, Serialize};

use crate::data::{GroupedScores, ResponseMatrix};
use crate::dist::{normal_cdf, normal_quantile, two_sided_normal_p};
use crate::error::{DifError, Result};
use crate::kde::BinnedKde;
use crate::kernel::{GroupSmoother, SmoothingConfig, SmoothingDesign};
use crate::support::SupportSet;

/// Denominators of the optimal weight below this are clamped.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Weight magnitudes above this mark a diverged estimate.
pub const DIVERGENCE_CAP: f64 = 1e6;

/// Detection methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Uniform weights, asymptotic normal p-value.
    NpFixed,
    /// Weights from the true curves and densities (simulation only).
    NpOptimalTrue,
    /// Estimated optimal weights, wild-bootstrap p-value.
    NpOptimalBoot,
    /// Estimated optimal weights, asymptotic normal p-value. Anti-conservative.
    NpOptimalAsymptotic,
    /// Logistic regression likelihood-ratio test.
    Logistic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::NpFixed,
        Method::NpOptimalTrue,
        Method::NpOptimalBoot,
        Method::NpOptimalAsymptotic,
        Method::Logistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NpFixed => "np_fixed",
            Method::NpOptimalTrue => "np_optimal_true",
            Method::NpOptimalBoot => "np_optimal_boot",
            Method::NpOptimalAsymptotic => "np_optimal_asymptotic",
            Method::Logistic => "logistic",
        }
    }

    /// Whether the method smooths curves and so depends on `zeta`.
    pub fn is_nonparametric(self) -> bool {
        !matches!(self, Method::Logistic)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = DifError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| DifError::UnknownMethod(s.to_owned()))
    }
}

/// Which weight function enters the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Fixed,
    OptimalTrue,
    OptimalEstimated,
}

/// Weight values on the support with a divergence flag.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub kind: WeightKind,
    pub values: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub weight_divergence: bool,
    pub support_mass: u64,
    pub zero_variance: bool,
    pub bootstrap_replicates: usize,
    pub degenerate_null_fit: bool,
    pub converged: Option<bool>,
}

/// Outcome of one item under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifResult {
    pub item: String,
    pub method: Method,
    /// `T` for the nonparametric methods, the chi-square for the logistic test.
    pub t_hat: f64,
    pub sigma2_hat: Option<f64>,
    pub z: Option<f64>,
    pub p_value: f64,
    pub diagnostics: Diagnostics,
}

impl DifResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// All-ones weights.
pub fn fixed_weights(support: &SupportSet) -> Vec<f64> {
    vec![1.0; support.len()]
}

fn weight_from_parts(
    diff: f64,
    var0: f64,
    var1: f64,
    ratio0: f64,
    ratio1: f64,
    lambda: f64,
) -> (f64, bool) {
    let denom = (1.0 - lambda) * var0 * ratio0 + lambda * var1 * ratio1;
    if diff == 0.0 {
        return (0.0, false);
    }
    let floored = denom < DENOMINATOR_FLOOR;
    let w = diff / denom.max(DENOMINATOR_FLOOR);
    (w, floored || w.abs() > DIVERGENCE_CAP)
}

/// Locally most powerful weights from known curves and densities:
/// `(m0 - m1) / [(1 - lambda) v0 e / f0 + lambda v1 e / f1]` with `v_g = m_g (1 - m_g)`.
#[allow(clippy::too_many_arguments)]
pub fn optimal_weights(
    m0: impl Fn(f64) -> f64,
    m1: impl Fn(f64) -> f64,
    f0: impl Fn(f64) -> f64,
    f1: impl Fn(f64) -> f64,
    e: impl Fn(f64) -> f64,
    lambda: f64,
    points: &[f64],
) -> Result<WeightVector> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(DifError::OutOfRange(format!("lambda {lambda} outside (0, 1)")));
    }
    let mut diverged = false;
    let mut values = Vec::with_capacity(points.len());
    for &x in points {
        let (a, b) = (m0(x), m1(x));
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(DifError::OutOfRange(format!(
                "curve values ({a}, {b}) at x = {x} outside [0, 1]"
            )));
        }
        let ex = e(x);
        let (w, d) = weight_from_parts(a - b, a * (1.0 - a), b * (1.0 - b), ex / f0(x), ex / f1(x), lambda);
        diverged |= d;
        values.push(w);
    }
    Ok(WeightVector {
        kind: WeightKind::OptimalTrue,
        values,
        diverged,
    })
}

/// `(1/M) sum_x mult(x) W(x) (m0(x) - m1(x))`.
pub fn test_statistic(m0_hat: &[f64], m1_hat: &[f64], weights: &[f64], support: &SupportSet) -> Result<f64> {
    let k = support.len();
    for (what, len) in [("m0 vs support", m0_hat.len()), ("m1 vs support", m1_hat.len()), ("weights vs support", weights.len())] {
        if len != k {
            return Err(DifError::LengthMismatch { what, left: len, right: k });
        }
    }
    let sum: f64 = (0..k)
        .map(|j| support.multiplicities[j] as f64 * weights[j] * (m0_hat[j] - m1_hat[j]))
        .sum();
    Ok(sum / support.total_mass as f64)
}

/// `z = sqrt(N) T / sigma` with its two-sided normal p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub z: f64,
    pub p_value: f64,
    /// Set when `sigma2 = 0` and `T = 0`.
    pub degenerate: bool,
}

pub fn normalized_statistic(t_hat: f64, sigma2_hat: f64, n0: usize, n1: usize) -> Result<Normalized> {
    if !(sigma2_hat > 0.0) {
        if t_hat == 0.0 {
            return Ok(Normalized {
                z: 0.0,
                p_value: 1.0,
                degenerate: true,
            });
        }
        return Err(DifError::ZeroVariance);
    }
    let n_eff = (n0 * n1) as f64 / (n0 + n1) as f64;
    let z = n_eff.sqrt() * t_hat / sigma2_hat.sqrt();
    Ok(Normalized {
        z,
        p_value: two_sided_normal_p(z),
        degenerate: false,
    })
}

/// Per-item curve estimates used by the statistic.
#[derive(Debug, Clone)]
pub struct ItemCurves {
    /// `m_g` at the support points.
    pub at_support: [Vec<f64>; 2],
    /// `m_g` at the group's own distinct score values.
    pub at_scores: [Vec<f64>; 2],
    /// Response sums per distinct score value.
    pub sums: [Vec<f64>; 2],
}

impl ItemCurves {
    pub fn difference(&self) -> Vec<f64> {
        self.at_support[0]
            .iter()
            .zip(&self.at_support[1])
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Which per-respondent variance enters the variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceKind {
    /// `m(theta_p) (1 - m(theta_p))`.
    Conditional,
    /// `(Y_p - m(theta_p))^2`.
    Residual,
}

/// Everything about a two-group comparison that does not depend on the item:
/// smoothers, the support, and density ratios. Build once, then evaluate many
/// items (or many bootstrap draws of one item).
#[derive(Debug, Clone)]
pub struct DifContext {
    scores: GroupedScores,
    support: SupportSet,
    smoothers: [GroupSmoother; 2],
    at_support: [SmoothingDesign; 2],
    at_scores: [SmoothingDesign; 2],
    density_ratio: Option<[Vec<f64>; 2]>,
    densities: Option<[BinnedKde; 3]>,
}

impl DifContext {
    pub fn new(scores: &GroupedScores, support: SupportSet, cfg: &SmoothingConfig) -> Result<Self> {
        let n = scores.n0() + scores.n1();
        let build = |theta: &[f64]| -> Result<GroupSmoother> {
            let h = cfg.group_bandwidth(theta.len(), n)?;
            GroupSmoother::new(theta, h, cfg.kernel)
        };
        let smoothers = [build(&scores.theta0)?, build(&scores.theta1)?];
        let at_support = [
            smoothers[0].design(&support.points)?,
            smoothers[1].design(&support.points)?,
        ];
        let at_scores = [smoothers[0].self_design()?, smoothers[1].self_design()?];
        let densities = score_densities(scores, &support).ok();
        let density_ratio = densities.as_ref().map(|d| ratios_at(d, &support.points));
        Ok(Self {
            scores: scores.clone(),
            support,
            smoothers,
            at_support,
            at_scores,
            density_ratio,
            densities,
        })
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn scores(&self) -> &GroupedScores {
        &self.scores
    }

    pub fn smoother(&self, g: usize) -> &GroupSmoother {
        &self.smoothers[g]
    }

    /// `e / f_g` at the support points, if the densities could be estimated.
    pub fn density_ratio(&self) -> Result<&[Vec<f64>; 2]> {
        self.density_ratio
            .as_ref()
            .ok_or_else(|| DifError::InvalidData("density estimation failed (degenerate scores)".into()))
    }

    /// Curves from responses already split by group.
    pub fn curves(&self, y0: &[u8], y1: &[u8]) -> ItemCurves {
        let sums = [
            self.smoothers[0].sums_by_value(y0),
            self.smoothers[1].sums_by_value(y1),
        ];
        ItemCurves {
            at_support: [self.at_support[0].apply(&sums[0]), self.at_support[1].apply(&sums[1])],
            at_scores: [self.at_scores[0].apply(&sums[0]), self.at_scores[1].apply(&sums[1])],
            sums,
        }
    }

    /// Curves for a full-sample response column.
    pub fn item_curves(&self, responses: &[u8]) -> ItemCurves {
        let [y0, y1] = self.scores.split(responses);
        self.curves(&y0, &y1)
    }

    pub fn estimated_weights(&self, curves: &ItemCurves) -> Result<WeightVector> {
        let ratio = self.density_ratio()?;
        let lambda = self.scores.lambda_hat;
        let mut diverged = false;
        let values = (0..self.support.len())
            .map(|j| {
                let (a, b) = (curves.at_support[0][j], curves.at_support[1][j]);
                let (w, d) = weight_from_parts(a - b, a * (1.0 - a), b * (1.0 - b), ratio[0][j], ratio[1][j], lambda);
                diverged |= d;
                w
            })
            .collect();
        Ok(WeightVector {
            kind: WeightKind::OptimalEstimated,
            values,
            diverged,
        })
    }

    /// Estimated optimal weights of a full-sample response column at
    /// arbitrary points. Entries are NaN where a group has no neighbors or
    /// the weight diverges.
    pub fn estimated_weights_at(&self, responses: &[u8], points: &[f64]) -> Result<Vec<f64>> {
        let densities = self
            .densities
            .as_ref()
            .ok_or_else(|| DifError::InvalidData("density estimation failed (degenerate scores)".into()))?;
        let ratio = ratios_at(densities, points);
        let [y0, y1] = self.scores.split(responses);
        let sums = [self.smoothers[0].sums_by_value(&y0), self.smoothers[1].sums_by_value(&y1)];
        let lambda = self.scores.lambda_hat;
        Ok(points
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let m: Option<Vec<f64>> = (0..2)
                    .map(|g| self.smoothers[g].design(&[x]).ok().map(|d| d.apply(&sums[g])[0]))
                    .collect();
                match m {
                    Some(m) => {
                        let (a, b) = (m[0], m[1]);
                        match weight_from_parts(a - b, a * (1.0 - a), b * (1.0 - b), ratio[0][j], ratio[1][j], lambda) {
                            (w, false) => w,
                            (_, true) => f64::NAN,
                        }
                    }
                    None => f64::NAN,
                }
            })
            .collect())
    }

    pub fn statistic(&self, curves: &ItemCurves, weights: &[f64]) -> f64 {
        let s = &self.support;
        (0..s.len())
            .map(|j| {
                s.multiplicities[j] as f64 * weights[j] * (curves.at_support[0][j] - curves.at_support[1][j])
            })
            .sum::<f64>()
            / s.total_mass as f64
    }

    /// Variance estimate of `sqrt(N) T`.
    pub fn variance(&self, curves: &ItemCurves, weights: &[f64], kind: VarianceKind) -> f64 {
        let s = &self.support;
        let coef: Vec<f64> = (0..s.len())
            .map(|j| s.multiplicities[j] as f64 * weights[j] / s.total_mass as f64)
            .collect();
        let mut total = 0.0;
        for g in 0..2 {
            let c = self.at_support[g].weighted_column_sums(&coef);
            let counts = self.smoothers[g].counts();
            for u in 0..c.len() {
                let m = curves.at_scores[g][u];
                let spread = match kind {
                    VarianceKind::Conditional => counts[u] as f64 * m * (1.0 - m),
                    VarianceKind::Residual => {
                        let ys = curves.sums[g][u];
                        (ys * (1.0 - 2.0 * m) + counts[u] as f64 * m * m).max(0.0)
                    }
                };
                total += spread * c[u] * c[u];
            }
        }
        self.scores.effective_size() * total
    }

    /// Statistic with asymptotic normal inference for given weights.
    pub fn normal_test(&self, curves: &ItemCurves, weights: &WeightVector) -> Result<(f64, f64, Normalized)> {
        let t = self.statistic(curves, &weights.values);
        let v = self.variance(curves, &weights.values, VarianceKind::Conditional);
        let norm = normalized_statistic(t, v, self.scores.n0(), self.scores.n1())?;
        Ok((t, v, norm))
    }

    /// Estimated-weight statistic, i.e. the support average of
    /// `(m0 - m1)^2 / [(1 - lambda) v0 e / f0 + lambda v1 e / f1]`.
    pub fn estimated_statistic(&self, curves: &ItemCurves) -> Result<(f64, WeightVector)> {
        let w = self.estimated_weights(curves)?;
        Ok((self.statistic(curves, &w.values), w))
    }

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            support_mass: self.support.total_mass,
            ..Diagnostics::default()
        }
    }

    /// Normal-theory result for one item under the given weights.
    pub fn normal_result(&self, item: &str, method: Method, curves: &ItemCurves, weights: &WeightVector) -> Result<DifResult> {
        let (t, v, norm) = self.normal_test(curves, weights)?;
        Ok(DifResult {
            item: item.to_owned(),
            method,
            t_hat: t,
            sigma2_hat: Some(v),
            z: Some(norm.z),
            p_value: norm.p_value,
            diagnostics: Diagnostics {
                weight_divergence: weights.diverged,
                zero_variance: norm.degenerate,
                ..self.diagnostics()
            },
        })
    }

    /// Fixed-weight test for one full-sample response column.
    pub fn fixed_result(&self, item: &str, responses: &[u8]) -> Result<DifResult> {
        let curves = self.item_curves(responses);
        let w = WeightVector {
            kind: WeightKind::Fixed,
            values: fixed_weights(&self.support),
            diverged: false,
        };
        self.normal_result(item, Method::NpFixed, &curves, &w)
    }

    /// Estimated optimal weights with (unreliable) normal inference.
    pub fn estimated_asymptotic_result(&self, item: &str, responses: &[u8]) -> Result<DifResult> {
        let curves = self.item_curves(responses);
        let w = self.estimated_weights(&curves)?;
        self.normal_result(item, Method::NpOptimalAsymptotic, &curves, &w)
    }
}

/// `e / f0` and `e / f1` at the support points from binned KDEs of the two
/// groups' scores and of the weighted support.
pub fn density_ratios(scores: &GroupedScores, support: &SupportSet) -> Result<[Vec<f64>; 2]> {
    Ok(ratios_at(&score_densities(scores, support)?, &support.points))
}

/// KDEs of `f0`, `f1` and `e`, in that order.
fn score_densities(scores: &GroupedScores, support: &SupportSet) -> Result<[BinnedKde; 3]> {
    Ok([
        BinnedKde::new(&scores.theta0)?,
        BinnedKde::new(&scores.theta1)?,
        BinnedKde::weighted(&support.points, &support.weights())?,
    ])
}

fn ratios_at(d: &[BinnedKde; 3], points: &[f64]) -> [Vec<f64>; 2] {
    let ratio = |f: &BinnedKde| -> Vec<f64> { points.iter().map(|&x| d[2].eval(x) / f.eval(x)).collect() };
    [ratio(&d[0]), ratio(&d[1])]
}

/// Estimated optimal weights for `item` on `support`.
pub fn estimated_optimal_weights(
    item: usize,
    rm: &ResponseMatrix,
    gs: &GroupedScores,
    cfg: &SmoothingConfig,
    support: &SupportSet,
) -> Result<WeightVector> {
    let ctx = DifContext::new(gs, support.clone(), cfg)?;
    ctx.estimated_weights(&ctx.item_curves(rm.item(item)))
}

/// Conditional-variance estimate for `item` under the given weights.
pub fn variance_estimate(
    item: usize,
    rm: &ResponseMatrix,
    gs: &GroupedScores,
    cfg: &SmoothingConfig,
    support: &SupportSet,
    weights: &[f64],
) -> Result<f64> {
    let ctx = DifContext::new(gs, support.clone(), cfg)?;
    check_len(weights.len(), support.len())?;
    Ok(ctx.variance(&ctx.item_curves(rm.item(item)), weights, VarianceKind::Conditional))
}

/// Squared-residual variance estimate for `item` under the given weights.
pub fn variance_estimate_residual(
    item: usize,
    rm: &ResponseMatrix,
    gs: &GroupedScores,
    cfg: &SmoothingConfig,
    support: &SupportSet,
    weights: &[f64],
) -> Result<f64> {
    let ctx = DifContext::new(gs, support.clone(), cfg)?;
    check_len(weights.len(), support.len())?;
    Ok(ctx.variance(&ctx.item_curves(rm.item(item)), weights, VarianceKind::Residual))
}

fn check_len(weights: usize, support: usize) -> Result<()> {
    if weights != support {
        return Err(DifError::LengthMismatch {
            what: "weights vs support",
            left: weights,
            right: support,
        });
    }
    Ok(())
}

/// Population quantities of a two-group comparison under a local
/// alternative with difference function `m0 - m1`.
pub struct LocalAlternative<'a> {
    pub m0: &'a dyn Fn(f64) -> f64,
    pub m1: &'a dyn Fn(f64) -> f64,
    pub f0: &'a dyn Fn(f64) -> f64,
    pub f1: &'a dyn Fn(f64) -> f64,
    /// Density of the pairwise averages.
    pub e: &'a dyn Fn(f64) -> f64,
    pub lambda: f64,
    /// Integration range for `E(dx)`.
    pub range: (f64, f64),
}

/// Integration grid size for [`asymptotic_power`].
pub const POWER_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSummary {
    pub mu: f64,
    pub sigma: f64,
    pub power: f64,
}

/// `1 - Phi(mu/sigma + q) + Phi(mu/sigma - q)` with `q = q_{1 - alpha/2}`,
/// `mu = -int W s dE` and `sigma^2 = int [(1-l) v0 e/f0 + l v1 e/f1] W^2 dE`.
pub fn asymptotic_power(weight: &dyn Fn(f64) -> f64, alt: &LocalAlternative<'_>, alpha: f64) -> Result<PowerSummary> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DifError::OutOfRange(format!("alpha {alpha} outside (0, 1)")));
    }
    let (lo, hi) = alt.range;
    let step = (hi - lo) / (POWER_GRID - 1) as f64;
    let mut mu = 0.0;
    let mut var = 0.0;
    for k in 0..POWER_GRID {
        let x = lo + k as f64 * step;
        let trap = if k == 0 || k == POWER_GRID - 1 { 0.5 } else { 1.0 } * step;
        let (a, b) = (((alt.m0)(x)), ((alt.m1)(x)));
        let e = (alt.e)(x);
        let w = weight(x);
        mu -= trap * w * (a - b) * e;
        let spread = (1.0 - alt.lambda) * a * (1.0 - a) * e / (alt.f0)(x) + alt.lambda * b * (1.0 - b) * e / (alt.f1)(x);
        var += trap * spread * w * w * e;
    }
    let q = normal_quantile(1.0 - alpha / 2.0);
    let sigma = var.sqrt();
    let ratio = if sigma > 0.0 { mu / sigma } else { 0.0 };
    let power = 1.0 - normal_cdf(ratio + q) + normal_cdf(ratio - q);
    Ok(PowerSummary { mu, sigma, power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ResponseMatrix;
    use crate::dist::{normal_pdf, normal_pdf_scaled};
    use crate::support::common_support;

    fn expit(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("np_magic".parse::<Method>().is_err());
    }

    #[test]
    fn fixed_weights_shape() {
        let s = SupportSet {
            points: vec![0.0, 0.5, 1.0],
            multiplicities: vec![1, 2, 1],
            total_mass: 4,
            reduced: false,
        };
        assert_eq!(fixed_weights(&s), vec![1.0, 1.0, 1.0]);
        let empty = SupportSet {
            points: vec![],
            multiplicities: vec![],
            total_mass: 0,
            reduced: false,
        };
        assert!(fixed_weights(&empty).is_empty());
    }

    #[test]
    fn statistic_hand_values() {
        let s = SupportSet {
            points: vec![0.0, 0.5, 1.0],
            multiplicities: vec![1, 2, 1],
            total_mass: 4,
            reduced: false,
        };
        // the four underlying pairs carry differences {0.1, 0.2, 0.2, -0.1}
        let pairs = [0.1, 0.2, 0.2, -0.1];
        let oracle = pairs.iter().sum::<f64>() / 4.0;
        let t = test_statistic(&[0.6, 0.7, 0.4], &[0.5, 0.5, 0.5], &[1.0; 3], &s).unwrap();
        assert!((t - oracle).abs() < 1e-15);
        assert!((t - 0.1).abs() < 1e-15);

        let same = test_statistic(&[0.3, 0.2, 0.9], &[0.3, 0.2, 0.9], &[2.0, -1.0, 5.0], &s).unwrap();
        assert_eq!(same, 0.0);
        let shift = test_statistic(&[0.45; 3], &[0.2; 3], &[1.0; 3], &s).unwrap();
        assert!((shift - 0.25).abs() < 1e-15);
        assert!(test_statistic(&[0.1], &[0.1, 0.2, 0.3], &[1.0; 3], &s).is_err());
    }

    #[test]
    fn normalized_values() {
        let n = normalized_statistic(0.0, 0.3, 10, 10).unwrap();
        assert_eq!((n.z, n.p_value), (0.0, 1.0));
        let d = normalized_statistic(0.0, 0.0, 10, 10).unwrap();
        assert!(d.degenerate && d.p_value == 1.0);
        assert!(normalized_statistic(0.2, 0.0, 10, 10).is_err());
        // N = 5, choose T so that z = 1.959964
        let t = 1.959964 * (0.5f64).sqrt() / 5f64.sqrt();
        let n = normalized_statistic(t, 0.5, 10, 10).unwrap();
        assert!((n.z - 1.959964).abs() < 1e-9);
        assert!((n.p_value - 0.05).abs() < 1e-6);
    }

    #[test]
    fn optimal_weight_point_value() {
        let phi0 = normal_pdf(0.0);
        let w = optimal_weights(|_| 0.5, |_| 0.731, |_| phi0, |_| phi0, |_| phi0, 0.5, &[0.0]).unwrap();
        let expect = (0.5 - 0.731) / (0.5 * 0.25 + 0.5 * 0.731 * (1.0 - 0.731));
        assert!((w.values[0] - expect).abs() < 1e-12);
        assert!((w.values[0] + 1.034).abs() < 1e-3);
        assert!(!w.diverged);
    }

    #[test]
    fn optimal_weights_edge_cases() {
        let pts = [-1.0, 0.0, 2.0];
        let w = optimal_weights(expit, expit, normal_pdf, normal_pdf, normal_pdf, 0.5, &pts).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
        assert!(optimal_weights(|_| 1.2, expit, normal_pdf, normal_pdf, normal_pdf, 0.5, &pts).is_err());
        assert!(optimal_weights(expit, expit, normal_pdf, normal_pdf, normal_pdf, 1.0, &pts).is_err());
        // curves pinned at 0 and 1 with a gap -> floored denominator
        let w = optimal_weights(|_| 1.0, |_| 0.0, normal_pdf, normal_pdf, normal_pdf, 0.5, &[0.0]).unwrap();
        assert!(w.diverged);
    }

    #[test]
    fn difficulty_shift_weights_keep_sign() {
        let e = |x: f64| normal_pdf_scaled(x, std::f64::consts::FRAC_1_SQRT_2);
        let pts: Vec<f64> = (0..81).map(|k| -4.0 + 0.1 * k as f64).collect();
        let w = optimal_weights(expit, |x| expit(x - 1.0), normal_pdf, normal_pdf, e, 0.5, &pts).unwrap();
        assert!(w.values.iter().all(|&v| v > 0.0));
    }

    fn row_b() -> (fn(f64) -> f64, fn(f64) -> f64) {
        (expit, |x| expit(x - 1.0))
    }

    #[test]
    fn power_under_no_difference_is_alpha() {
        let e = |x: f64| normal_pdf_scaled(x, std::f64::consts::FRAC_1_SQRT_2);
        let alt = LocalAlternative {
            m0: &expit,
            m1: &expit,
            f0: &normal_pdf,
            f1: &normal_pdf,
            e: &e,
            lambda: 0.5,
            range: (-6.0, 6.0),
        };
        let p = asymptotic_power(&|_| 1.0, &alt, 0.05).unwrap();
        assert!((p.power - 0.05).abs() < 1e-9, "{}", p.power);
    }

    #[test]
    fn optimal_beats_fixed_on_difficulty_shift() {
        let (m0, m1) = row_b();
        let e = |x: f64| normal_pdf_scaled(x, std::f64::consts::FRAC_1_SQRT_2);
        let alt = LocalAlternative {
            m0: &m0,
            m1: &m1,
            f0: &normal_pdf,
            f1: &normal_pdf,
            e: &e,
            lambda: 0.5,
            range: (-6.0, 6.0),
        };
        let opt = |x: f64| {
            let (a, b) = (m0(x), m1(x));
            let r = e(x) / normal_pdf(x);
            (a - b) / (0.5 * a * (1.0 - a) * r + 0.5 * b * (1.0 - b) * r)
        };
        let fixed = asymptotic_power(&|_| 1.0, &alt, 0.05).unwrap();
        let best = asymptotic_power(&opt, &alt, 0.05).unwrap();
        assert!(best.power >= fixed.power, "{} < {}", best.power, fixed.power);
        assert!((best.mu / best.sigma).abs() >= (fixed.mu / fixed.sigma).abs());
        // power rises with |mu/sigma|: scaling the gap up raises it
        let m1_far = |x: f64| expit(x - 2.0);
        let alt_far = LocalAlternative { m1: &m1_far, ..alt };
        let far = asymptotic_power(&|_| 1.0, &alt_far, 0.05).unwrap();
        assert!(far.power > fixed.power);
    }

    /// Brute-force transcription of the variance estimator over every
    /// `(k, l)` pair and every respondent, with direct weight evaluation.
    fn brute_variance(theta0: &[f64], theta1: &[f64], y0: &[u8], y1: &[u8], w: impl Fn(f64) -> f64, residual: bool) -> f64 {
        let cfg = SmoothingConfig::default();
        let n0 = theta0.len() as f64;
        let n1 = theta1.len() as f64;
        let mut pairs = Vec::new();
        for &a in theta0 {
            for &b in theta1 {
                pairs.push((a + b) / 2.0);
            }
        }
        let mut total = 0.0;
        for (theta, y) in [(theta0, y0), (theta1, y1)] {
            for p in 0..theta.len() {
                let inner: f64 = pairs
                    .iter()
                    .map(|&x| w(x) * crate::kernel::nn_weights(theta, x, &cfg).unwrap()[p])
                    .sum::<f64>()
                    / pairs.len() as f64;
                let own = crate::kernel::nn_weights(theta, theta[p], &cfg).unwrap();
                let m: f64 = own.iter().zip(y).map(|(a, &b)| a * f64::from(b)).sum();
                let v = if residual { (f64::from(y[p]) - m).powi(2) } else { m * (1.0 - m) };
                total += v * inner * inner;
            }
        }
        n0 * n1 / (n0 + n1) * total
    }

    fn toy() -> (ResponseMatrix, GroupedScores) {
        let rm = ResponseMatrix::new(
            vec![vec![1, 0, 1, 1, 0, 1, 0, 0], vec![0, 1, 1, 0, 1, 1, 0, 1]],
            vec!["a".into(), "b".into()],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
        )
        .unwrap();
        let scores = [-1.2, -0.2, 0.4, 1.1, -0.9, 0.0, 0.4, 1.5];
        let gs = crate::data::split_groups(&rm, &scores).unwrap();
        (rm, gs)
    }

    #[test]
    fn variance_matches_brute_force() {
        let (rm, gs) = toy();
        let cfg = SmoothingConfig::default();
        let support = common_support(&gs);
        let wfun = |x: f64| 1.0 + 0.5 * x;
        let w: Vec<f64> = support.points.iter().map(|&x| wfun(x)).collect();
        for item in 0..2 {
            let [y0, y1] = gs.split(rm.item(item));
            let fast = variance_estimate(item, &rm, &gs, &cfg, &support, &w).unwrap();
            let slow = brute_variance(&gs.theta0, &gs.theta1, &y0, &y1, wfun, false);
            assert!((fast - slow).abs() < 1e-12 * slow.max(1.0), "{fast} vs {slow}");
            let fast = variance_estimate_residual(item, &rm, &gs, &cfg, &support, &w).unwrap();
            let slow = brute_variance(&gs.theta0, &gs.theta1, &y0, &y1, wfun, true);
            assert!((fast - slow).abs() < 1e-12 * slow.max(1.0), "{fast} vs {slow}");
        }
    }

    #[test]
    fn toy_variance_frozen() {
        // produced once by `brute_variance` on the toy data with W = 1 + x / 2
        let (rm, gs) = toy();
        let cfg = SmoothingConfig::default();
        let support = common_support(&gs);
        let w: Vec<f64> = support.points.iter().map(|&x| 1.0 + 0.5 * x).collect();
        let v = variance_estimate(0, &rm, &gs, &cfg, &support, &w).unwrap();
        let [y0, y1] = gs.split(rm.item(0));
        let oracle = brute_variance(&gs.theta0, &gs.theta1, &y0, &y1, |x| 1.0 + 0.5 * x, false);
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.245612030200626).abs() < 1e-12, "{v}");
    }

    #[test]
    fn constant_responses_have_zero_variance() {
        let (_, gs) = toy();
        let rm = ResponseMatrix::new(vec![vec![1; 8]], vec!["a".into()], vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let cfg = SmoothingConfig::default();
        let support = common_support(&gs);
        let w = fixed_weights(&support);
        assert_eq!(variance_estimate(0, &rm, &gs, &cfg, &support, &w).unwrap(), 0.0);
        assert!(variance_estimate_residual(0, &rm, &gs, &cfg, &support, &w).unwrap().abs() < 1e-15);
        let ctx = DifContext::new(&gs, support, &cfg).unwrap();
        let r = ctx.fixed_result("a", rm.item(0)).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(r.diagnostics.zero_variance);
    }

    #[test]
    fn weight_length_checked() {
        let (rm, gs) = toy();
        let support = common_support(&gs);
        assert!(variance_estimate(0, &rm, &gs, &SmoothingConfig::default(), &support, &[1.0]).is_err());
    }
}
