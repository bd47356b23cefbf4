//! Response generation from a logistic model with higher-order terms.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::dist::normal_pdf;
use crate::error::{DifError, Result};

/// Item parameters of
/// `P(theta) = c + (d - c) expit(a (theta - b - e theta^2 - f theta^3 - g theta^5))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default)]
    pub e: f64,
    #[serde(default)]
    pub f: f64,
    #[serde(default)]
    pub g: f64,
}

impl ItemParams {
    pub const fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64, g: f64) -> Self {
        Self { a, b, c, d, e, f, g }
    }

    /// 4PL parameters, no higher-order terms.
    pub const fn four_pl(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a, b, c, d, 0.0, 0.0, 0.0)
    }

    pub fn prob(&self, theta: f64) -> f64 {
        irc_true(self, theta)
    }
}

/// True response probability at `theta`.
pub fn irc_true(p: &ItemParams, theta: f64) -> f64 {
    let t2 = theta * theta;
    let shape = theta - p.b - p.e * t2 - p.f * t2 * theta - p.g * t2 * t2 * theta;
    let z = p.a * shape;
    let logistic = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (1.0 + ez)
    };
    p.c + (p.d - p.c) * logistic
}

/// Source of DIF in the studied item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifSource {
    A,
    B,
    C,
    D,
    Mix1,
    Mix2,
    None,
}

impl DifSource {
    pub const TABLE: [DifSource; 6] = [
        DifSource::A,
        DifSource::B,
        DifSource::C,
        DifSource::D,
        DifSource::Mix1,
        DifSource::Mix2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DifSource::A => "a",
            DifSource::B => "b",
            DifSource::C => "c",
            DifSource::D => "d",
            DifSource::Mix1 => "mix1",
            DifSource::Mix2 => "mix2",
            DifSource::None => "none",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl std::fmt::Display for DifSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DifSource {
    type Err = DifError;

    fn from_str(s: &str) -> Result<Self> {
        DifSource::TABLE
            .into_iter()
            .chain([DifSource::None])
            .find(|d| d.as_str() == s)
            .ok_or_else(|| DifError::UnknownScenario(s.to_owned()))
    }
}

/// Simulated test: one studied item with group-specific parameters, the
/// remaining items non-DIF 4PL draws shared by both groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dif_source: DifSource,
    pub reference_params: ItemParams,
    pub focal_params: ItemParams,
    pub n_items: usize,
    pub n: usize,
    pub dif_item: usize,
}

impl Scenario {
    pub fn with_size(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn has_dif(&self) -> bool {
        self.dif_source != DifSource::None
    }
}

pub const DEFAULT_ITEMS: usize = 20;

/// Reference and focal parameters of the studied item for each DIF source.
pub fn table_params(source: DifSource) -> (ItemParams, ItemParams) {
    use DifSource::*;
    let base = ItemParams::four_pl(1.0, 0.0, 0.0, 1.0);
    match source {
        A => (ItemParams::four_pl(0.42, 0.0, 0.0, 1.0), ItemParams::four_pl(2.00, 0.0, 0.0, 1.0)),
        B => (base, ItemParams::four_pl(1.0, 1.0, 0.0, 1.0)),
        C => (base, ItemParams::four_pl(1.0, 0.0, 0.39, 1.0)),
        D => (ItemParams::four_pl(1.0, 0.0, 0.0, 0.61), base),
        Mix1 => (
            ItemParams::new(1.90, 0.28, 0.07, 1.00, 1.00, -0.70, 0.00),
            ItemParams::new(0.35, -1.75, 0.03, 0.98, 1.60, -0.90, 0.00),
        ),
        Mix2 => (
            ItemParams::new(4.20, 0.00, 0.10, 0.85, 0.00, -0.50, -0.50),
            ItemParams::new(0.18, -1.50, 0.00, 1.00, 1.00, -1.20, -0.50),
        ),
        None => (base, base),
    }
}

/// Scenario for a DIF source with the default test length and `n = 0`
/// (set the size with [`Scenario::with_size`]).
pub fn dif_scenario(source: &str) -> Result<Scenario> {
    let src: DifSource = source.parse()?;
    let (reference_params, focal_params) = table_params(src);
    Ok(Scenario {
        name: src.as_str().to_owned(),
        dif_source: src,
        reference_params,
        focal_params,
        n_items: DEFAULT_ITEMS,
        n: 0,
        dif_item: 0,
    })
}

/// Non-DIF 4PL draw plus whether `c`/`d` needed clamping.
pub fn draw_non_dif_params_tracked<R: Rng + ?Sized>(rng: &mut R) -> (ItemParams, bool) {
    let sample = |rng: &mut R, mean: f64, sd: f64| Normal::new(mean, sd).expect("valid sd").sample(rng);
    let a = sample(rng, 1.1, 0.3);
    let b = sample(rng, 0.0, 1.1);
    let c_raw = sample(rng, 0.2, 0.05);
    let d_raw = sample(rng, 0.8, 0.05);
    let (c, d) = clamp_asymptotes(c_raw, d_raw);
    (ItemParams::four_pl(a, b, c, d), (c, d) != (c_raw, d_raw))
}

/// Puts `c` and `d` into `[0, 1]` with `c <= d`.
pub fn clamp_asymptotes(c: f64, d: f64) -> (f64, f64) {
    let c = c.clamp(0.0, 1.0);
    let d = d.clamp(0.0, 1.0);
    if c > d {
        (d, c)
    } else {
        (c, d)
    }
}

pub fn draw_non_dif_params<R: Rng + ?Sized>(rng: &mut R) -> ItemParams {
    draw_non_dif_params_tracked(rng).0
}

/// One generated data set with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub responses: ResponseMatrix,
    pub theta: Vec<f64>,
    /// `(reference, focal)` parameters per item.
    pub params: Vec<(ItemParams, ItemParams)>,
    pub dif_item: Option<usize>,
    pub clamped: usize,
}

/// Abilities `N(0, 1)`; the first `n / 2` respondents are the reference group.
pub fn generate_responses<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<SimulatedData> {
    let n = scenario.n;
    if n < 4 || n % 2 != 0 {
        return Err(DifError::Config(format!("sample size {n} must be even and at least 4")));
    }
    if scenario.dif_item >= scenario.n_items {
        return Err(DifError::Config("studied item index beyond test length".into()));
    }
    let n0 = n / 2;
    let mut clamped = 0;
    let params: Vec<(ItemParams, ItemParams)> = (0..scenario.n_items)
        .map(|i| {
            if i == scenario.dif_item && scenario.has_dif() {
                (scenario.reference_params, scenario.focal_params)
            } else {
                let (p, c) = draw_non_dif_params_tracked(rng);
                clamped += usize::from(c);
                (p, p)
            }
        })
        .collect();
    let theta: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let group: Vec<u8> = (0..n).map(|p| u8::from(p >= n0)).collect();
    let columns: Vec<Vec<u8>> = params
        .iter()
        .map(|(pr, pf)| {
            theta
                .iter()
                .zip(&group)
                .map(|(&t, &g)| {
                    let prob = if g == 0 { pr.prob(t) } else { pf.prob(t) };
                    u8::from(rng.random::<f64>() < prob)
                })
                .collect()
        })
        .collect();
    let names = (1..=scenario.n_items).map(|i| format!("item{i:02}")).collect();
    Ok(SimulatedData {
        responses: ResponseMatrix::new(columns, names, group)?,
        theta,
        params,
        dif_item: scenario.has_dif().then_some(scenario.dif_item),
        clamped,
    })
}

/// Number of trapezoid nodes on `[-6, 6]`.
pub const WUA_NODES: usize = 1201;

/// `int |m_ref - m_foc| density` over `[-6, 6]`.
pub fn weighted_unsigned_area(p_ref: &ItemParams, p_foc: &ItemParams, density: impl Fn(f64) -> f64) -> f64 {
    let step = 12.0 / (WUA_NODES - 1) as f64;
    (0..WUA_NODES)
        .map(|k| {
            let t = -6.0 + k as f64 * step;
            let w = if k == 0 || k == WUA_NODES - 1 { 0.5 } else { 1.0 };
            w * (irc_true(p_ref, t) - irc_true(p_foc, t)).abs() * density(t)
        })
        .sum::<f64>()
        * step
}

/// wUA under the standard normal trait density.
pub fn standard_wua(p_ref: &ItemParams, p_foc: &ItemParams) -> f64 {
    weighted_unsigned_area(p_ref, p_foc, normal_pdf)
}
