//! Logistic-regression DIF test: nested logit models compared by a
//! likelihood-ratio statistic, fitted with Newton / IRLS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::dist::chi_square_sf;
use crate::error::{DifError, Result};
use crate::statistic::{Diagnostics, DifResult, Method};

const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
/// Coefficients beyond this on the logit scale indicate separation.
const SEPARATION_BOUND: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub separated: bool,
}

/// `log(1 + exp(x))` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(&e, &yy)| yy * e - log1p_exp(e)).sum()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maximum-likelihood logistic fit of `y` on the columns of `design`.
pub fn fit_logistic(design: &DMatrix<f64>, y: &[u8]) -> Result<LogisticFit> {
    fit_logistic_from(design, y, &[])
}

/// As [`fit_logistic`], starting Newton from `start` padded with zeros.
/// Every accepted step raises the likelihood, so a nested model's optimum
/// used as start keeps the larger model's likelihood at least as high.
pub fn fit_logistic_from(design: &DMatrix<f64>, y: &[u8], start: &[f64]) -> Result<LogisticFit> {
    let (n, k) = design.shape();
    if y.len() != n {
        return Err(DifError::LengthMismatch {
            what: "design rows vs responses",
            left: n,
            right: y.len(),
        });
    }
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
    let mut beta = DVector::from_fn(k, |j, _| start.get(j).copied().unwrap_or(0.0));
    let mut ll = log_likelihood(design, &yv, &beta);
    let mut iterations = 0;
    let mut converged = false;
    let mut separated = false;

    while iterations < MAX_ITER {
        let eta = design * &beta;
        let p = eta.map(expit);
        let grad = design.transpose() * (&yv - &p);
        if grad.amax() < GRADIENT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let w = p.map(|pi| (pi * (1.0 - pi)).max(1e-300));
        let mut info = DMatrix::zeros(k, k);
        for (row, &wi) in design.row_iter().zip(w.iter()) {
            info += wi * row.transpose() * row;
        }
        let step = info
            .cholesky()
            .ok_or_else(|| DifError::InvalidData("logistic design is rank deficient".into()))?
            .solve(&grad);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + scale * &step;
            let cand_ll = log_likelihood(design, &yv, &candidate);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if beta.amax() > SEPARATION_BOUND {
            separated = true;
            break;
        }
        if !accepted {
            break;
        }
    }
    if !converged && !separated {
        let p = (design * &beta).map(expit);
        converged = (design.transpose() * (&yv - &p)).amax() < GRADIENT_TOL;
    }
    Ok(LogisticFit {
        coefficients: beta.iter().copied().collect(),
        log_likelihood: ll,
        converged,
        iterations,
        separated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub converged: bool,
    pub null_fit: LogisticFit,
    pub full_fit: LogisticFit,
}

/// Likelihood-ratio test of `logit P = b0 + b1 t + b2 g + b3 t g` against
/// `logit P = b0 + b1 t` (uniform and non-uniform DIF jointly, 2 df).
pub fn lrt_dif(scores: &[f64], group: &[u8], responses: &[u8]) -> Result<LrtResult> {
    let n = scores.len();
    if group.len() != n || responses.len() != n {
        return Err(DifError::LengthMismatch {
            what: "scores vs group vs responses",
            left: n,
            right: group.len().min(responses.len()),
        });
    }
    let null = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { scores[r] });
    let full = DMatrix::from_fn(n, 4, |r, c| {
        let g = f64::from(group[r]);
        match c {
            0 => 1.0,
            1 => scores[r],
            2 => g,
            _ => scores[r] * g,
        }
    });
    let null_fit = fit_logistic(&null, responses)?;
    let full_fit = fit_logistic_from(&full, responses, &null_fit.coefficients)?;
    let chi2 = (2.0 * (full_fit.log_likelihood - null_fit.log_likelihood)).max(0.0);
    Ok(LrtResult {
        chi2,
        df: 2,
        p_value: chi_square_sf(chi2, 2.0),
        converged: null_fit.converged && full_fit.converged,
        null_fit,
        full_fit,
    })
}

/// Logistic test of one item of a response matrix.
pub fn logistic_result(item: usize, rm: &ResponseMatrix, scores: &[f64]) -> Result<DifResult> {
    let lrt = lrt_dif(scores, rm.group(), rm.item(item))?;
    Ok(DifResult {
        item: rm.item_names()[item].clone(),
        method: Method::Logistic,
        t_hat: lrt.chi2,
        sigma2_hat: None,
        z: None,
        p_value: lrt.p_value,
        diagnostics: Diagnostics {
            converged: Some(lrt.converged),
            ..Diagnostics::default()
        },
    })
}
