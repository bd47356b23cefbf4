//! Monte Carlo experiment runner.
//!
//! A grid of (scenario, sample size, zeta, method) cells is evaluated by
//! simulating `replications` data sets per (scenario, sample size). Data sets
//! are shared across zetas and methods of the same replicate, so comparisons
//! between methods use common random numbers. Every random draw comes from a
//! substream keyed by the replicate coordinates, which makes the output
//! independent of the number of worker threads.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_item, pooled_scores, BootstrapConfig, BootstrapStatistic, PooledFit};
use crate::data::{split_groups, standardized_total_score};
use crate::dist::{normal_pdf, normal_pdf_scaled};
use crate::error::{DifError, Result};
use crate::kernel::{KernelKind, SmoothingConfig};
use crate::logistic::lrt_dif;
use crate::rng::{derive_seed, substream};
use crate::simulation::{generate_responses, irc_true, ItemParams, Scenario, SimulatedData};
use crate::statistic::{optimal_weights, DifContext, Method, WeightKind, WeightVector};
use crate::support::SupportPolicy;

/// Evaluation points for the weight-estimation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseGrid {
    /// The replicate's support points, weighted by multiplicity.
    #[default]
    Support,
    /// The fixed curve grid, equally weighted.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub scenarios: Vec<Scenario>,
    pub sample_sizes: Vec<usize>,
    pub zetas: Vec<f64>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub kernel: KernelKind,
    pub bootstrap: usize,
    pub bootstrap_statistic: BootstrapStatistic,
    pub support: SupportPolicy,
    pub rmse_grid: RmseGrid,
    /// Points of the fixed grid on which mean weight curves are reported.
    pub curve_points: Vec<f64>,
}

pub const DEFAULT_SAMPLE_SIZES: [usize; 5] = [50, 100, 200, 300, 400];
pub const DEFAULT_ZETAS: [f64; 3] = [0.260, 7.0 / 24.0, 0.320];
/// Methods reported by default; the asymptotic estimated-weight test is
/// available on request only.
pub const DEFAULT_METHODS: [Method; 4] = [Method::NpFixed, Method::NpOptimalTrue, Method::NpOptimalBoot, Method::Logistic];

/// 61 points on `[-3, 3]`.
pub fn default_curve_points() -> Vec<f64> {
    (0..61).map(|k| -3.0 + 0.1 * k as f64).collect()
}

impl ExperimentGrid {
    pub fn new(scenarios: Vec<Scenario>) -> Self {
        Self {
            scenarios,
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            zetas: DEFAULT_ZETAS.to_vec(),
            methods: DEFAULT_METHODS.to_vec(),
            replications: 100,
            alpha: 0.05,
            seed: 1,
            kernel: KernelKind::Epanechnikov,
            bootstrap: 500,
            bootstrap_statistic: BootstrapStatistic::Raw,
            support: SupportPolicy::default(),
            rmse_grid: RmseGrid::Support,
            curve_points: default_curve_points(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(DifError::Config("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DifError::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.scenarios.is_empty() || self.sample_sizes.is_empty() || self.zetas.is_empty() || self.methods.is_empty() {
            return Err(DifError::Config("grid has an empty axis".into()));
        }
        if self.methods.contains(&Method::NpOptimalBoot) && self.bootstrap == 0 {
            return Err(DifError::Config("bootstrap needs at least one replicate".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.scenarios.len() * self.sample_sizes.len() * self.zetas.len() * self.methods.len()
    }
}

/// Aggregated result of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub scenario: String,
    pub n: usize,
    pub zeta: f64,
    pub method: Method,
    /// Rejection share for the DIF item; absent without a DIF item.
    pub power: Option<f64>,
    pub power_se: Option<f64>,
    /// Rejection share over non-DIF items.
    pub rejection_rate: f64,
    pub rejection_se: f64,
    pub rmse_weights: Option<f64>,
    /// Replicates with at least one diverged or failed item test.
    pub diverged: usize,
    /// Item tests that errored (no neighbors in bandwidth, zero variance, ...).
    pub failed_tests: usize,
    pub replicate_count: usize,
    pub seed: u64,
}

/// Mean estimated weight curve of the DIF item with pointwise Monte Carlo
/// bands, alongside the true weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCurve {
    pub scenario: String,
    pub n: usize,
    pub zeta: f64,
    pub points: Vec<f64>,
    pub mean: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub truth: Vec<f64>,
    pub replicates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub replications: usize,
    pub alpha: f64,
    pub bootstrap: usize,
    pub conditions: Vec<ConditionMetrics>,
    pub weight_curves: Vec<WeightCurve>,
    /// Non-DIF parameter draws whose asymptotes were clamped.
    pub clamped_draws: usize,
}

/// Root mean square of `est - truth`, weighted by `mass`.
pub fn rmse_weights(est: &[f64], truth: &[f64], mass: &[f64]) -> f64 {
    let total: f64 = mass.iter().sum();
    let sq: f64 = est
        .iter()
        .zip(truth)
        .zip(mass)
        .map(|((a, b), m)| m * (a - b).powi(2))
        .sum();
    (sq / total).sqrt()
}

/// Mean of per-replicate RMSE values.
pub fn mean_rmse(per_replicate: &[f64]) -> Option<f64> {
    (!per_replicate.is_empty()).then(|| per_replicate.iter().sum::<f64>() / per_replicate.len() as f64)
}

#[derive(Debug, Clone, Default)]
struct CellTally {
    dif_tested: bool,
    dif_reject: bool,
    nondif_tested: usize,
    nondif_rejects: usize,
    excluded: bool,
    failed: usize,
    rmse: Option<f64>,
    curve: Option<Vec<f64>>,
}

fn name_tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// True optimal weights of the studied item at `points`.
fn true_weights(reference: &ItemParams, focal: &ItemParams, lambda: f64, points: &[f64]) -> Result<WeightVector> {
    optimal_weights(
        |x| irc_true(reference, x),
        |x| irc_true(focal, x),
        normal_pdf,
        normal_pdf,
        |x| normal_pdf_scaled(x, FRAC_1_SQRT_2),
        lambda,
        points,
    )
}

struct ReplicateInput<'a> {
    grid: &'a ExperimentGrid,
    scenario: &'a Scenario,
    n: usize,
    rep: usize,
}

impl ReplicateInput<'_> {
    fn root(&self) -> u64 {
        derive_seed(self.grid.seed, &[name_tag(&self.scenario.name), self.n as u64, self.rep as u64])
    }
}

/// Tallies for every (zeta, method) of one replicate, `[zeta][method]`.
fn run_replicate(input: &ReplicateInput<'_>) -> (Vec<Vec<CellTally>>, usize) {
    let grid = input.grid;
    let failed_all = || {
        let t = CellTally {
            excluded: true,
            ..CellTally::default()
        };
        vec![vec![t; grid.methods.len()]; grid.zetas.len()]
    };
    let scenario = input.scenario.clone().with_size(input.n);
    let root = input.root();
    let data = match generate_responses(&scenario, &mut substream(root, &[0])) {
        Ok(d) => d,
        Err(_) => return (failed_all(), 0),
    };
    match evaluate_replicate(grid, &data, root) {
        Ok(t) => (t, data.clamped),
        Err(_) => (failed_all(), data.clamped),
    }
}

fn evaluate_replicate(grid: &ExperimentGrid, data: &SimulatedData, root: u64) -> Result<Vec<Vec<CellTally>>> {
    let rm = &data.responses;
    let scores = standardized_total_score(rm)?;
    let gs = split_groups(rm, &scores)?;
    let support = grid.support.build(&gs, &mut substream(root, &[1]))?;
    let n_items = rm.n_items();
    let is_dif = |i: usize| data.dif_item == Some(i);

    let logistic: Option<Vec<Option<bool>>> = grid.methods.contains(&Method::Logistic).then(|| {
        (0..n_items)
            .map(|i| lrt_dif(&scores, rm.group(), rm.item(i)).ok().map(|r| r.p_value < grid.alpha))
            .collect()
    });

    let mut out = Vec::with_capacity(grid.zetas.len());
    for (zi, &zeta) in grid.zetas.iter().enumerate() {
        let cfg = SmoothingConfig::new(grid.kernel, zeta);
        let nonparametric = grid.methods.iter().any(|m| m.is_nonparametric());
        let ctx = if nonparametric { Some(DifContext::new(&gs, support.clone(), &cfg)) } else { None };
        let pooled = if grid.methods.contains(&Method::NpOptimalBoot) {
            Some(PooledFit::new(&pooled_scores(&gs, rm.n_respondents()), &cfg))
        } else {
            None
        };
        let truth = match data.dif_item {
            Some(i) => Some(true_weights(&data.params[i].0, &data.params[i].1, gs.lambda_hat, &support.points)?),
            None => None,
        };
        let truth_on_grid = match data.dif_item {
            Some(i) => Some(true_weights(&data.params[i].0, &data.params[i].1, gs.lambda_hat, &grid.curve_points)?),
            None => None,
        };

        let mut row = Vec::with_capacity(grid.methods.len());
        for &method in &grid.methods {
            let mut tally = CellTally::default();
            let record = |tally: &mut CellTally, item: usize, outcome: Option<bool>| match outcome {
                Some(reject) if is_dif(item) => {
                    tally.dif_tested = true;
                    tally.dif_reject = reject;
                }
                Some(reject) => {
                    tally.nondif_tested += 1;
                    tally.nondif_rejects += usize::from(reject);
                }
                None => tally.excluded = true,
            };
            if method == Method::Logistic {
                for (i, r) in logistic.as_ref().expect("computed above").iter().enumerate() {
                    if r.is_none() {
                        tally.failed += 1;
                    }
                    record(&mut tally, i, *r);
                }
                row.push(tally);
                continue;
            }
            let ctx = match ctx.as_ref().expect("nonparametric context") {
                Ok(c) => c,
                Err(_) => {
                    tally.excluded = true;
                    tally.failed = n_items;
                    row.push(tally);
                    continue;
                }
            };
            for i in 0..n_items {
                let y = rm.item(i);
                let outcome: Result<Option<bool>> = (|| match method {
                    Method::NpFixed => Ok(Some(ctx.fixed_result("", y)?.rejects(grid.alpha))),
                    Method::NpOptimalTrue => {
                        let curves = ctx.item_curves(y);
                        let w = match (&truth, is_dif(i)) {
                            (Some(t), true) => t.clone(),
                            _ => WeightVector {
                                kind: WeightKind::OptimalTrue,
                                values: vec![0.0; support.len()],
                                diverged: false,
                            },
                        };
                        let r = ctx.normal_result("", method, &curves, &w)?;
                        Ok((!w.diverged).then_some(r.rejects(grid.alpha)))
                    }
                    Method::NpOptimalAsymptotic | Method::NpOptimalBoot => {
                        let curves = ctx.item_curves(y);
                        let w = ctx.estimated_weights(&curves)?;
                        if is_dif(i) && !w.diverged {
                            if let Some(t) = &truth {
                                tally.rmse = Some(match grid.rmse_grid {
                                    RmseGrid::Support => rmse_weights(&w.values, &t.values, &support.weights()),
                                    RmseGrid::Fixed => {
                                        let est = ctx.estimated_weights_at(y, &grid.curve_points)?;
                                        let tg = truth_on_grid.as_ref().expect("dif item");
                                        // points without a finite estimate carry no mass
                                        let mass: Vec<f64> = est.iter().map(|v| if v.is_finite() { 1.0 } else { 0.0 }).collect();
                                        let est: Vec<f64> = est.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
                                        rmse_weights(&est, &tg.values, &mass)
                                    }
                                });
                                tally.curve = ctx.estimated_weights_at(y, &grid.curve_points).ok();
                            }
                        }
                        if w.diverged {
                            return Ok(None);
                        }
                        if method == Method::NpOptimalAsymptotic {
                            let r = ctx.normal_result("", method, &curves, &w)?;
                            Ok(Some(r.rejects(grid.alpha)))
                        } else {
                            let pooled = pooled.as_ref().expect("pooled fit").as_ref().map_err(|e| DifError::InvalidData(e.to_string()))?;
                            let bcfg = BootstrapConfig {
                                replicates: grid.bootstrap,
                                seed: derive_seed(root, &[2, zi as u64]),
                                statistic: grid.bootstrap_statistic,
                            };
                            let out = bootstrap_item(ctx, pooled, y, &bcfg, i as u64)?;
                            Ok(Some(out.p_value < grid.alpha))
                        }
                    }
                    Method::Logistic => unreachable!(),
                })();
                let outcome = outcome.unwrap_or_else(|_| {
                    tally.failed += 1;
                    None
                });
                record(&mut tally, i, outcome);
            }
            row.push(tally);
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
struct CurveAccumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: Vec<usize>,
}

impl CurveAccumulator {
    fn push(&mut self, curve: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; curve.len()];
            self.sum_sq = vec![0.0; curve.len()];
            self.count = vec![0; curve.len()];
        }
        for (k, &v) in curve.iter().enumerate() {
            if v.is_finite() {
                self.sum[k] += v;
                self.sum_sq[k] += v * v;
                self.count[k] += 1;
            }
        }
    }
}

fn rate_se(hits: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Runs the whole grid on a pool of `jobs` threads.
pub fn run_grid(grid: &ExperimentGrid, jobs: usize) -> Result<Report> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| DifError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_grid_inner(grid))
}

fn run_grid_inner(grid: &ExperimentGrid) -> Result<Report> {
    let mut conditions = Vec::with_capacity(grid.cell_count());
    let mut weight_curves = Vec::new();
    let mut clamped_draws = 0;
    let wants_curves = grid.methods.iter().any(|m| matches!(m, Method::NpOptimalBoot | Method::NpOptimalAsymptotic));

    for scenario in &grid.scenarios {
        for &n in &grid.sample_sizes {
            let replicates: Vec<(Vec<Vec<CellTally>>, usize)> = (0..grid.replications)
                .into_par_iter()
                .map(|rep| run_replicate(&ReplicateInput { grid, scenario, n, rep }))
                .collect();
            clamped_draws += replicates.iter().map(|r| r.1).sum::<usize>();

            for (zi, &zeta) in grid.zetas.iter().enumerate() {
                let mut curve_acc = CurveAccumulator::default();
                let mut curve_taken = false;
                for (mi, &method) in grid.methods.iter().enumerate() {
                    let (mut dif_hits, mut dif_total, mut nd_hits, mut nd_total) = (0, 0, 0, 0);
                    let (mut diverged, mut failed) = (0, 0);
                    let mut rmses = Vec::new();
                    for (cells, _) in &replicates {
                        let t = &cells[zi][mi];
                        if t.dif_tested {
                            dif_total += 1;
                            dif_hits += usize::from(t.dif_reject);
                        }
                        nd_total += t.nondif_tested;
                        nd_hits += t.nondif_rejects;
                        diverged += usize::from(t.excluded);
                        failed += t.failed;
                        if let Some(r) = t.rmse {
                            rmses.push(r);
                        }
                        if !curve_taken {
                            if let Some(c) = &t.curve {
                                curve_acc.push(c);
                            }
                        }
                    }
                    if !curve_acc.sum.is_empty() {
                        curve_taken = true;
                    }
                    let (power, power_se) = if scenario.has_dif() {
                        let (p, se) = rate_se(dif_hits, dif_total);
                        (Some(p), Some(se))
                    } else {
                        (None, None)
                    };
                    let (rejection_rate, rejection_se) = rate_se(nd_hits, nd_total);
                    conditions.push(ConditionMetrics {
                        scenario: scenario.name.clone(),
                        n,
                        zeta,
                        method,
                        power,
                        power_se,
                        rejection_rate,
                        rejection_se,
                        rmse_weights: mean_rmse(&rmses),
                        diverged,
                        failed_tests: failed,
                        replicate_count: grid.replications,
                        seed: grid.seed,
                    });
                }
                if wants_curves && scenario.has_dif() {
                    let lambda = 0.5;
                    let truth = true_weights(&scenario.reference_params, &scenario.focal_params, lambda, &grid.curve_points)?;
                    weight_curves.push(finish_curve(scenario, n, zeta, &grid.curve_points, &curve_acc, truth.values));
                }
            }
        }
    }
    Ok(Report {
        seed: grid.seed,
        replications: grid.replications,
        alpha: grid.alpha,
        bootstrap: grid.bootstrap,
        conditions,
        weight_curves,
        clamped_draws,
    })
}

fn finish_curve(scenario: &Scenario, n: usize, zeta: f64, points: &[f64], acc: &CurveAccumulator, truth: Vec<f64>) -> WeightCurve {
    let k = points.len();
    let mut mean = vec![None; k];
    let mut lower = vec![None; k];
    let mut upper = vec![None; k];
    let mut replicates = vec![0; k];
    for j in 0..acc.count.len().min(k) {
        let c = acc.count[j];
        replicates[j] = c;
        if c == 0 {
            continue;
        }
        let m = acc.sum[j] / c as f64;
        mean[j] = Some(m);
        if c > 1 {
            let var = ((acc.sum_sq[j] - c as f64 * m * m) / (c - 1) as f64).max(0.0);
            let half = 1.96 * (var / c as f64).sqrt();
            lower[j] = Some(m - half);
            upper[j] = Some(m + half);
        }
    }
    WeightCurve {
        scenario: scenario.name.clone(),
        n,
        zeta,
        points: points.to_vec(),
        mean,
        lower,
        upper,
        truth,
        replicates,
    }
}

/// One cell of the grid, run on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub scenario: Scenario,
    pub n: usize,
    pub zeta: f64,
    pub method: Method,
    pub replications: usize,
    pub alpha: f64,
    pub bootstrap: usize,
}

pub fn run_condition(cell: &GridCell, seed: u64, jobs: usize) -> Result<ConditionMetrics> {
    let mut grid = ExperimentGrid::new(vec![cell.scenario.clone()]);
    grid.sample_sizes = vec![cell.n];
    grid.zetas = vec![cell.zeta];
    grid.methods = vec![cell.method];
    grid.replications = cell.replications;
    grid.alpha = cell.alpha;
    grid.bootstrap = cell.bootstrap;
    grid.seed = seed;
    let report = run_grid(&grid, jobs)?;
    Ok(report.conditions.into_iter().next().expect("one cell"))
}
