//! Nearest-neighbor kernel smoothing of item response curves.
//!
//! Respondents are weighted by a kernel evaluated on the scale of the group's
//! empirical distribution function, so the smoother only sees ranks of the
//! matching criterion:
//!
//! ```text
//! W_p(x) = K((F(theta_p) - F(x)) / h) / sum_k K((F(theta_k) - F(x)) / h)
//! m(x)   = sum_p Y_p W_p(x)
//! ```

use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::error::{DifError, Result};

/// Compactly supported smoothing kernels on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Epanechnikov,
    /// Not twice differentiable at the boundary; kept for comparison runs.
    Uniform,
}

impl KernelKind {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelKind::Uniform => 0.5,
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = DifError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "uniform" => Ok(KernelKind::Uniform),
            other => Err(DifError::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// `K(u)`; zero outside `[-1, 1]`.
pub fn kernel_eval(kind: KernelKind, u: f64) -> f64 {
    kind.eval(u)
}

/// Which sample size enters `h = n^(-zeta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Each group uses its own size `n_g`.
    #[default]
    GroupSize,
    /// Both groups use the pooled size `n0 + n1`.
    PooledSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub kernel: KernelKind,
    pub zeta: f64,
    #[serde(default)]
    pub bandwidth_rule: BandwidthRule,
}

impl SmoothingConfig {
    pub fn new(kernel: KernelKind, zeta: f64) -> Self {
        Self {
            kernel,
            zeta,
            bandwidth_rule: BandwidthRule::GroupSize,
        }
    }

    /// `zeta` inside the open interval `(1/4, 1/3)`.
    pub fn is_regular(&self) -> bool {
        self.zeta > 0.25 && self.zeta < 1.0 / 3.0
    }

    /// Bandwidth for a group of `n_group` respondents out of `n_total`.
    pub fn group_bandwidth(&self, n_group: usize, n_total: usize) -> Result<f64> {
        match self.bandwidth_rule {
            BandwidthRule::GroupSize => bandwidth(n_group, self.zeta),
            BandwidthRule::PooledSize => bandwidth(n_total, self.zeta),
        }
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self::new(KernelKind::Epanechnikov, 7.0 / 24.0)
    }
}

/// `h = n^(-zeta)`.
pub fn bandwidth(n: usize, zeta: f64) -> Result<f64> {
    if n == 0 {
        return Err(DifError::EmptySample);
    }
    if !(zeta > 0.25 && zeta < 1.0 / 3.0) {
        log::warn!("zeta = {zeta} lies outside (1/4, 1/3); bandwidth conditions do not hold");
    }
    Ok((n as f64).powf(-zeta))
}

/// Empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(DifError::EmptySample);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Proportion of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn ecdf_build(values: &[f64]) -> Result<Ecdf> {
    Ecdf::new(values)
}

pub fn ecdf_eval(f: &Ecdf, x: f64) -> f64 {
    f.eval(x)
}

/// Nearest-neighbor weights of every respondent in the group at `x`, with
/// bandwidth `n_g^(-zeta)` from the group's own size.
pub fn nn_weights(group_scores: &[f64], x: f64, cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    let ecdf = Ecdf::new(group_scores)?;
    let h = bandwidth(group_scores.len(), cfg.zeta)?;
    let fx = ecdf.eval(x);
    let raw: Vec<f64> = group_scores
        .iter()
        .map(|&t| cfg.kernel.eval((ecdf.eval(t) - fx) / h))
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(DifError::NoNeighbors { x });
    }
    Ok(raw.into_iter().map(|k| k / total).collect())
}

/// Estimated response curve of one item in one group.
#[derive(Debug, Clone, PartialEq)]
pub struct IrcEstimate {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub group: Option<Group>,
    pub item: Option<usize>,
}

impl IrcEstimate {
    pub fn tagged(mut self, group: Group, item: usize) -> Self {
        self.group = Some(group);
        self.item = Some(item);
        self
    }
}

/// Nearest-neighbor estimate of the response curve at `eval_points`.
pub fn irc_estimate(
    item_responses: &[u8],
    group_scores: &[f64],
    eval_points: &[f64],
    cfg: &SmoothingConfig,
) -> Result<IrcEstimate> {
    if item_responses.len() != group_scores.len() {
        return Err(DifError::LengthMismatch {
            what: "responses vs scores",
            left: item_responses.len(),
            right: group_scores.len(),
        });
    }
    let h = bandwidth(group_scores.len(), cfg.zeta)?;
    let smoother = GroupSmoother::new(group_scores, h, cfg.kernel)?;
    let design = smoother.design(eval_points)?;
    let values = design.apply(&smoother.sums_by_value(item_responses));
    Ok(IrcEstimate {
        points: eval_points.to_vec(),
        values,
        group: None,
        item: None,
    })
}

/// `m (1 - m)`, the Bernoulli variance at response probability `m`.
pub fn conditional_variance(m_hat: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m_hat) {
        return Err(DifError::OutOfRange(format!(
            "response probability {m_hat} outside [0, 1]"
        )));
    }
    Ok(m_hat * (1.0 - m_hat))
}

/// Smoother for one group with respondents collapsed onto their distinct
/// score values. Tied respondents share a nearest-neighbor weight, so every
/// curve evaluation costs `O(#distinct scores)` instead of `O(n_g)`.
#[derive(Debug, Clone)]
pub struct GroupSmoother {
    kernel: KernelKind,
    bandwidth: f64,
    ecdf: Ecdf,
    values: Vec<f64>,
    counts: Vec<usize>,
    ranks: Vec<f64>,
    slot: Vec<usize>,
}

impl GroupSmoother {
    pub fn new(scores: &[f64], bandwidth: f64, kernel: KernelKind) -> Result<Self> {
        let ecdf = Ecdf::new(scores)?;
        let values: Vec<f64> = {
            let mut v = ecdf.sorted.clone();
            v.dedup();
            v
        };
        let slot: Vec<usize> = scores
            .iter()
            .map(|s| values.partition_point(|v| v < s))
            .collect();
        let mut counts = vec![0usize; values.len()];
        for &s in &slot {
            counts[s] += 1;
        }
        let ranks = values.iter().map(|&v| ecdf.eval(v)).collect();
        Ok(Self {
            kernel,
            bandwidth,
            ecdf,
            values,
            counts,
            ranks,
            slot,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n(&self) -> usize {
        self.slot.len()
    }

    /// Distinct score values, ascending.
    pub fn distinct_values(&self) -> &[f64] {
        &self.values
    }

    /// Respondents per distinct value.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Index into [`distinct_values`](Self::distinct_values) for each respondent.
    pub fn slots(&self) -> &[usize] {
        &self.slot
    }

    /// Per-respondent weight at `x` for each distinct score value.
    /// `sum_u counts[u] * w[u] == 1`.
    pub fn unit_weights(&self, x: f64) -> Result<Vec<f64>> {
        let fx = self.ecdf.eval(x);
        let raw: Vec<f64> = self
            .ranks
            .iter()
            .map(|&r| self.kernel.eval((r - fx) / self.bandwidth))
            .collect();
        let total: f64 = raw.iter().zip(&self.counts).map(|(k, &c)| k * c as f64).sum();
        if total <= 0.0 {
            return Err(DifError::NoNeighbors { x });
        }
        Ok(raw.into_iter().map(|k| k / total).collect())
    }

    pub fn design(&self, points: &[f64]) -> Result<SmoothingDesign> {
        let cols = self.values.len();
        let mut weights = Vec::with_capacity(points.len() * cols);
        let mut mass = Vec::with_capacity(points.len());
        for &x in points {
            let w = self.unit_weights(x)?;
            mass.push(w.iter().zip(&self.counts).map(|(w, &c)| w * c as f64).sum());
            weights.extend(w);
        }
        Ok(SmoothingDesign {
            rows: points.len(),
            cols,
            weights,
            mass,
        })
    }

    /// Design evaluated at the group's own distinct score values.
    pub fn self_design(&self) -> Result<SmoothingDesign> {
        self.design(&self.values)
    }

    /// Sum of responses per distinct value.
    pub fn sums_by_value(&self, responses: &[u8]) -> Vec<f64> {
        let mut sums = vec![0.0; self.values.len()];
        for (&s, &y) in self.slot.iter().zip(responses) {
            sums[s] += f64::from(y);
        }
        sums
    }
}

/// Row-major matrix of per-respondent weights: one row per evaluation point,
/// one column per distinct score value.
#[derive(Debug, Clone)]
pub struct SmoothingDesign {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    // realized row sums of count * weight, one up to rounding
    mass: Vec<f64>,
}

impl SmoothingDesign {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    /// Curve values from response sums per distinct value, clamped to `[0, 1]`
    /// against rounding.
    pub fn apply(&self, sums: &[f64]) -> Vec<f64> {
        debug_assert_eq!(sums.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let v: f64 = self.row(r).iter().zip(sums).map(|(w, s)| w * s).sum();
                (v / self.mass[r]).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// `sum_r coef[r] * row_r`, one entry per distinct value.
    pub fn weighted_column_sums(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &c) in coef.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += c * w;
            }
        }
        out
    }
}
