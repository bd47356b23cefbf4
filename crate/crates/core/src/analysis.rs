//! Item-by-item DIF analysis of an observed response matrix.

use serde::Serialize;

use crate::bootstrap::{bootstrap_item, outcome_result, pooled_scores, BootstrapConfig, BootstrapStatistic, PooledFit};
use crate::data::{split_groups, standardized_total_score, ResponseMatrix};
use crate::error::{DifError, Result};
use crate::kernel::{bandwidth, GroupSmoother, KernelKind, SmoothingConfig};
use crate::logistic::logistic_result;
use crate::rng::{derive_seed, substream};
use crate::statistic::{DifContext, DifResult, Method};
use crate::support::SupportPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub zetas: Vec<f64>,
    pub kernel: KernelKind,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub support: SupportPolicy,
    pub bootstrap: usize,
    pub bootstrap_statistic: BootstrapStatistic,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            zetas: vec![7.0 / 24.0],
            kernel: KernelKind::Epanechnikov,
            methods: vec![Method::NpFixed, Method::NpOptimalBoot, Method::Logistic],
            alpha: 0.05,
            support: SupportPolicy::default(),
            bootstrap: 500,
            bootstrap_statistic: BootstrapStatistic::Raw,
            seed: 1,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(DifError::Config("no methods selected".into()));
        }
        if self.methods.contains(&Method::NpOptimalTrue) {
            return Err(DifError::Config(
                "np_optimal_true needs the true response curves and is only available in simulations".into(),
            ));
        }
        if self.zetas.is_empty() {
            return Err(DifError::Config("no zeta values given".into()));
        }
        if let Some(z) = self.zetas.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
            return Err(DifError::Config(format!("zeta {z} must be positive")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DifError::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.methods.contains(&Method::NpOptimalBoot) && self.bootstrap == 0 {
            return Err(DifError::Config("bootstrap needs at least one replicate".into()));
        }
        Ok(())
    }
}

/// One item under one method and bandwidth exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemReport {
    /// Absent for the logistic test.
    pub zeta: Option<f64>,
    pub reject: bool,
    #[serde(flatten)]
    pub result: DifResult,
}

/// Item results, or the error that prevented one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemOutcome {
    pub item: String,
    pub method: Method,
    pub zeta: Option<f64>,
    pub report: Option<ItemReport>,
    pub error: Option<String>,
}

/// Runs every selected method on every item. Per-item failures are recorded
/// rather than aborting the run.
pub fn analyze(rm: &ResponseMatrix, cfg: &AnalysisConfig) -> Result<Vec<ItemOutcome>> {
    cfg.validate()?;
    let scores = standardized_total_score(rm)?;
    let gs = split_groups(rm, &scores)?;
    let support = cfg.support.build(&gs, &mut substream(cfg.seed, &[0]))?;
    let names = rm.item_names();
    let mut out = Vec::new();
    let push = |out: &mut Vec<ItemOutcome>, i: usize, method: Method, zeta: Option<f64>, r: Result<DifResult>| {
        let (report, error) = match r {
            Ok(result) => (
                Some(ItemReport {
                    zeta,
                    reject: result.rejects(cfg.alpha),
                    result,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        };
        out.push(ItemOutcome {
            item: names[i].clone(),
            method,
            zeta,
            report,
            error,
        });
    };

    for (zi, &zeta) in cfg.zetas.iter().enumerate() {
        if !cfg.methods.iter().any(|m| m.is_nonparametric()) {
            break;
        }
        let smoothing = SmoothingConfig::new(cfg.kernel, zeta);
        let ctx = DifContext::new(&gs, support.clone(), &smoothing)?;
        let pooled = if cfg.methods.contains(&Method::NpOptimalBoot) {
            Some(PooledFit::new(&pooled_scores(&gs, rm.n_respondents()), &smoothing)?)
        } else {
            None
        };
        for &method in cfg.methods.iter().filter(|m| m.is_nonparametric()) {
            for i in 0..rm.n_items() {
                let y = rm.item(i);
                let r = match method {
                    Method::NpFixed => ctx.fixed_result(&names[i], y),
                    Method::NpOptimalAsymptotic => ctx.estimated_asymptotic_result(&names[i], y),
                    Method::NpOptimalBoot => {
                        let bcfg = BootstrapConfig {
                            replicates: cfg.bootstrap,
                            seed: derive_seed(cfg.seed, &[1, zi as u64]),
                            statistic: cfg.bootstrap_statistic,
                        };
                        let pooled = pooled.as_ref().expect("built for bootstrap");
                        bootstrap_item(&ctx, pooled, y, &bcfg, i as u64).map(|o| outcome_result(&names[i], ctx.support(), o))
                    }
                    Method::NpOptimalTrue | Method::Logistic => unreachable!("filtered above"),
                };
                push(&mut out, i, method, Some(zeta), r);
            }
        }
    }
    if cfg.methods.contains(&Method::Logistic) {
        for i in 0..rm.n_items() {
            push(&mut out, i, Method::Logistic, None, logistic_result(i, rm, &scores));
        }
    }
    Ok(out)
}

pub const CURVE_GRID: usize = 101;
pub const CURVE_BINS: usize = 10;

/// Plot data for one item: smoothed curves of both groups on an even grid
/// and empirical proportions within score deciles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveData {
    pub item: String,
    pub zeta: f64,
    pub grid: Vec<f64>,
    /// `None` where a group has no neighbors within the bandwidth.
    pub reference: Vec<Option<f64>>,
    pub focal: Vec<Option<f64>>,
    pub bins: [Vec<BinProportion>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinProportion {
    pub center: f64,
    pub proportion: f64,
    pub count: usize,
}

fn decile_bins(theta: &[f64], y: &[u8]) -> Vec<BinProportion> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
    let n = order.len();
    (0..CURVE_BINS)
        .filter_map(|b| {
            let idx = &order[b * n / CURVE_BINS..(b + 1) * n / CURVE_BINS];
            if idx.is_empty() {
                return None;
            }
            let k = idx.len() as f64;
            Some(BinProportion {
                center: idx.iter().map(|&p| theta[p]).sum::<f64>() / k,
                proportion: idx.iter().map(|&p| f64::from(y[p])).sum::<f64>() / k,
                count: idx.len(),
            })
        })
        .collect()
}

pub fn curve_data(rm: &ResponseMatrix, zeta: f64, kernel: KernelKind) -> Result<Vec<CurveData>> {
    let scores = standardized_total_score(rm)?;
    let gs = split_groups(rm, &scores)?;
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid: Vec<f64> = (0..CURVE_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (CURVE_GRID - 1) as f64)
        .collect();
    let smoothers = [
        GroupSmoother::new(&gs.theta0, bandwidth(gs.n0(), zeta)?, kernel)?,
        GroupSmoother::new(&gs.theta1, bandwidth(gs.n1(), zeta)?, kernel)?,
    ];
    (0..rm.n_items())
        .map(|i| {
            let [y0, y1] = gs.split(rm.item(i));
            let sums = [smoothers[0].sums_by_value(&y0), smoothers[1].sums_by_value(&y1)];
            let at = |g: usize| -> Vec<Option<f64>> {
                grid.iter()
                    .map(|&x| smoothers[g].design(&[x]).ok().map(|d| d.apply(&sums[g])[0]))
                    .collect()
            };
            Ok(CurveData {
                item: rm.item_names()[i].clone(),
                zeta,
                grid: grid.clone(),
                reference: at(0),
                focal: at(1),
                bins: [decile_bins(&gs.theta0, &y0), decile_bins(&gs.theta1, &y1)],
            })
        })
        .collect()
}
