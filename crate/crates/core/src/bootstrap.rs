//! Wild bootstrap for the estimated-optimal-weight statistic.
//!
//! Under the null both groups share one response curve. It is estimated on
//! the pooled sample and each replicate redraws every response as
//! `Bernoulli(y_hat_p)`, keeping group labels and matching scores fixed. The
//! whole pipeline (curves, then weights, then statistic) is re-run per
//! replicate. The p-value is the share of replicates whose statistic
//! exceeds the observed one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{GroupedScores, ResponseMatrix};
use crate::error::{DifError, Result};
use crate::kernel::{bandwidth, GroupSmoother, SmoothingConfig};
use crate::rng::substream;
use crate::statistic::{normalized_statistic, Diagnostics, DifContext, DifResult, ItemCurves, Method, VarianceKind, WeightVector};
use crate::support::SupportSet;

/// Quantity compared between the original sample and the replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    /// The plug-in statistic `T`.
    #[default]
    Raw,
    /// `sqrt(N) T / sigma` with the conditional variance estimate.
    Studentized,
}

impl std::str::FromStr for BootstrapStatistic {
    type Err = DifError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(BootstrapStatistic::Raw),
            "studentized" => Ok(BootstrapStatistic::Studentized),
            other => Err(DifError::Config(format!("unknown bootstrap statistic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub statistic: BootstrapStatistic,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 500,
            seed: 0,
            statistic: BootstrapStatistic::Raw,
        }
    }
}

/// Fitted values of the common curve at every respondent, in matrix row order.
/// Uses the pooled ECDF and the pooled-size bandwidth.
pub fn pooled_irc(item: usize, rm: &ResponseMatrix, scores: &[f64], cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    PooledFit::new(scores, cfg)?.fitted(rm.item(item))
}

/// Pooled smoother reusable across items.
#[derive(Debug, Clone)]
pub struct PooledFit {
    smoother: GroupSmoother,
    design: crate::kernel::SmoothingDesign,
}

impl PooledFit {
    pub fn new(scores: &[f64], cfg: &SmoothingConfig) -> Result<Self> {
        let h = bandwidth(scores.len(), cfg.zeta)?;
        let smoother = GroupSmoother::new(scores, h, cfg.kernel)?;
        let design = smoother.self_design()?;
        Ok(Self { smoother, design })
    }

    pub fn fitted(&self, responses: &[u8]) -> Result<Vec<f64>> {
        if responses.len() != self.smoother.n() {
            return Err(DifError::LengthMismatch {
                what: "responses vs pooled scores",
                left: responses.len(),
                right: self.smoother.n(),
            });
        }
        let by_value = self.design.apply(&self.smoother.sums_by_value(responses));
        Ok(self.smoother.slots().iter().map(|&s| by_value[s]).collect())
    }
}

/// Bootstrap p-value with everything needed to report it.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    pub t_hat: f64,
    /// Conditional variance estimate and normalized value of `T` on the
    /// original sample; reported only, the p-value never uses the normal law.
    pub sigma2_hat: f64,
    pub z: Option<f64>,
    pub p_value: f64,
    pub exceed: usize,
    pub replicates: usize,
    pub weight_divergence: bool,
    pub degenerate_null_fit: bool,
}

/// Runs the bootstrap for one response column against a prepared context.
/// Replicate `b` draws from the substream `(seed, stream, b)`.
pub fn bootstrap_item(
    ctx: &DifContext,
    pooled: &PooledFit,
    responses: &[u8],
    bcfg: &BootstrapConfig,
    stream: u64,
) -> Result<BootstrapOutcome> {
    if bcfg.replicates == 0 {
        return Err(DifError::Config("bootstrap needs at least one replicate".into()));
    }
    let curves = ctx.item_curves(responses);
    let (t_hat, weights) = ctx.estimated_statistic(&curves)?;
    let sigma2_hat = ctx.variance(&curves, &weights.values, VarianceKind::Conditional);
    let z = normalized_statistic(t_hat, sigma2_hat, ctx.scores().n0(), ctx.scores().n1())
        .ok()
        .map(|n| n.z);
    let observed = compared(ctx, &curves, &weights, bcfg.statistic);
    let fitted = pooled.fitted(responses)?;
    if fitted.iter().all(|&y| y == 0.0) || fitted.iter().all(|&y| y == 1.0) {
        return Ok(BootstrapOutcome {
            t_hat,
            sigma2_hat,
            z,
            p_value: 1.0,
            exceed: 0,
            replicates: bcfg.replicates,
            weight_divergence: weights.diverged,
            degenerate_null_fit: true,
        });
    }
    let members = &ctx.scores().members;
    let exceed = (0..bcfg.replicates)
        .into_par_iter()
        .map(|b| -> Result<bool> {
            let mut rng = substream(bcfg.seed, &[stream, b as u64]);
            let mut draw = |p: usize| u8::from(rng.random::<f64>() < fitted[p]);
            let y0: Vec<u8> = members[0].iter().map(|&p| draw(p)).collect();
            let y1: Vec<u8> = members[1].iter().map(|&p| draw(p)).collect();
            let curves_b = ctx.curves(&y0, &y1);
            let w_b = ctx.estimated_weights(&curves_b)?;
            Ok(observed < compared(ctx, &curves_b, &w_b, bcfg.statistic))
        })
        .try_fold(|| 0usize, |acc, hit| hit.map(|h| acc + usize::from(h)))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(BootstrapOutcome {
        t_hat,
        sigma2_hat,
        z,
        p_value: exceed as f64 / bcfg.replicates as f64,
        exceed,
        replicates: bcfg.replicates,
        weight_divergence: weights.diverged,
        degenerate_null_fit: false,
    })
}

fn compared(ctx: &DifContext, curves: &ItemCurves, w: &WeightVector, kind: BootstrapStatistic) -> f64 {
    let t = ctx.statistic(curves, &w.values);
    match kind {
        BootstrapStatistic::Raw => t,
        BootstrapStatistic::Studentized => {
            let v = ctx.variance(curves, &w.values, VarianceKind::Conditional);
            if v > 0.0 {
                ctx.scores().effective_size().sqrt() * t / v.sqrt()
            } else {
                0.0
            }
        }
    }
}

/// Wild-bootstrap test of `item`.
pub fn wild_bootstrap_pvalue(
    item: usize,
    rm: &ResponseMatrix,
    gs: &GroupedScores,
    cfg: &SmoothingConfig,
    support: &SupportSet,
    bcfg: &BootstrapConfig,
) -> Result<DifResult> {
    let ctx = DifContext::new(gs, support.clone(), cfg)?;
    let scores = pooled_scores(gs, rm.n_respondents());
    let pooled = PooledFit::new(&scores, cfg)?;
    let out = bootstrap_item(&ctx, &pooled, rm.item(item), bcfg, item as u64)?;
    Ok(outcome_result(&rm.item_names()[item], support, out))
}

/// Scores back in matrix row order.
pub fn pooled_scores(gs: &GroupedScores, n: usize) -> Vec<f64> {
    let mut scores = vec![0.0; n];
    for (g, theta) in [&gs.theta0, &gs.theta1].into_iter().enumerate() {
        for (&p, &t) in gs.members[g].iter().zip(theta) {
            scores[p] = t;
        }
    }
    scores
}

pub fn outcome_result(item: &str, support: &SupportSet, out: BootstrapOutcome) -> DifResult {
    DifResult {
        item: item.to_owned(),
        method: Method::NpOptimalBoot,
        t_hat: out.t_hat,
        sigma2_hat: Some(out.sigma2_hat),
        z: out.z,
        p_value: out.p_value,
        diagnostics: Diagnostics {
            weight_divergence: out.weight_divergence,
            support_mass: support.total_mass,
            bootstrap_replicates: out.replicates,
            degenerate_null_fit: out.degenerate_null_fit,
            ..Diagnostics::default()
        },
    }
}
