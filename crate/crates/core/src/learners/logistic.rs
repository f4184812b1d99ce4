use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::cd::{CdProblem, CdState};
use super::linear::thresholds;
use super::standardize::Standardized;
use super::{sigmoid, FitDiagnostics, LogisticModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LogisticOptions {
    /// Relative change of the penalized objective that ends the IRLS loop.
    pub tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub inner_max_sweeps: usize,
    pub unpenalized: Vec<usize>,
    /// Refit an unpenalized logit on the selected support.
    pub refit: bool,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            tol: 1e-6,
            max_outer: 100,
            inner_tol: 1e-7,
            inner_max_sweeps: 10_000,
            unpenalized: Vec::new(),
            refit: true,
        }
    }
}

/// The plug-in level for a logit is computed with the Bernoulli bound 0.5 as
/// noise scale.
pub const BERNOULLI_NOISE_SCALE: f64 = 0.5;

/// Refit coefficients above this magnitude are treated as separation.
const SEPARATION_BOUND: f64 = 30.0;
const MIN_WEIGHT: f64 = 1e-5;

/// Negative log-likelihood contribution `log(1 + e^η) − yη`, overflow safe.
#[inline]
fn nll(eta: f64, y: f64) -> f64 {
    let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
    softplus - y * eta
}

fn mean_nll(design: &Standardized, y: &[f64], state: &CdState) -> f64 {
    let eta = design.linear_predictor(state.intercept, &state.beta);
    eta.iter().zip(y).map(|(&e, &y)| nll(e, y)).sum::<f64>() / y.len() as f64
}

fn penalized_objective(design: &Standardized, y: &[f64], kappa: &[f64], state: &CdState) -> f64 {
    mean_nll(design, y, state) + state.beta.iter().zip(kappa).map(|(b, k)| k * b.abs()).sum::<f64>()
}

fn blend(from: &CdState, to: &CdState, t: f64) -> CdState {
    CdState {
        intercept: from.intercept + t * (to.intercept - from.intercept),
        beta: from.beta.iter().zip(&to.beta).map(|(a, b)| a + t * (b - a)).collect(),
    }
}

pub(crate) struct IrlsOutcome {
    pub state: CdState,
    pub diagnostics: FitDiagnostics,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective_trace: Vec<f64>,
}

/// Penalized logit by IRLS: each outer step solves a weighted lasso on the
/// working response by coordinate descent, with step halving so that the
/// penalized objective never increases.
pub(crate) fn irls_lasso(design: &Standardized, y: &[f64], lambda: f64, opts: &LogisticOptions) -> IrlsOutcome {
    let n = design.n;
    let kappa = thresholds(design, lambda, &opts.unpenalized);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut state = CdState { intercept: (ybar / (1.0 - ybar)).ln(), beta: vec![0.0; design.p] };
    let mut objective = penalized_objective(design, y, &kappa, &state);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    let mut weights = vec![0.0; n];
    let mut working = vec![0.0; n];
    while iterations < opts.max_outer {
        iterations += 1;
        let eta = design.linear_predictor(state.intercept, &state.beta);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let w = (p * (1.0 - p)).max(MIN_WEIGHT);
            weights[i] = w;
            working[i] = eta[i] + (y[i] - p) / w;
        }
        let problem = CdProblem { design, target: &working, weights: Some(&weights), thresholds: &kappa };
        let mut proposal = state.clone();
        problem.solve(&mut proposal, opts.inner_tol, opts.inner_max_sweeps);

        let mut candidate = proposal;
        let mut cand_obj = penalized_objective(design, y, &kappa, &candidate);
        let mut halvings = 0;
        while cand_obj > objective && halvings < 30 {
            candidate = blend(&state, &candidate, 0.5);
            cand_obj = penalized_objective(design, y, &kappa, &candidate);
            halvings += 1;
        }
        if cand_obj > objective {
            converged = true;
            break;
        }
        let change = (objective - cand_obj).abs();
        state = candidate;
        objective = cand_obj;
        trace.push(objective);
        if change < opts.tol * (objective.abs() + 0.1) {
            converged = true;
            break;
        }
    }
    IrlsOutcome {
        state,
        diagnostics: FitDiagnostics { iterations, converged, ..Default::default() },
        objective_trace: trace,
    }
}

/// Unpenalized Newton-Raphson logit on `support` (standardized scale).
/// `None` on a singular Hessian, divergence or non-convergence.
fn newton_refit(design: &Standardized, y: &[f64], support: &[usize], start: &CdState) -> Option<CdState> {
    let n = design.n;
    let k = support.len() + 1;
    let mut state = start.clone();
    let mut dev = mean_nll(design, y, &state);
    for _ in 0..100 {
        let eta = design.linear_predictor(state.intercept, &state.beta);
        let mut hess = DMatrix::<f64>::zeros(k, k);
        let mut grad = DVector::<f64>::zeros(k);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let w = p * (1.0 - p);
            let r = y[i] - p;
            let mut row = Vec::with_capacity(k);
            row.push(1.0);
            row.extend(support.iter().map(|&j| design.col(j)[i]));
            for a in 0..k {
                grad[a] += row[a] * r;
                for b in a..k {
                    hess[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let step = hess.cholesky()?.solve(&grad);
        let mut t = 1.0;
        let mut next;
        let mut next_dev;
        loop {
            next = state.clone();
            next.intercept += t * step[0];
            for (a, &j) in support.iter().enumerate() {
                next.beta[j] += t * step[a + 1];
            }
            next_dev = mean_nll(design, y, &next);
            if next_dev <= dev || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        if !next_dev.is_finite() {
            return None;
        }
        let change = dev - next_dev;
        state = next;
        dev = next_dev;
        if change.abs() < 1e-12 * (dev.abs() + 0.1) {
            return Some(state);
        }
    }
    None
}

fn to_model(design: &Standardized, state: &CdState, lambda: f64, diagnostics: FitDiagnostics) -> LogisticModel {
    let (intercept, coefficients) = design.unstandardize(state.intercept, &state.beta);
    let selected_support = (0..design.p).filter(|&j| coefficients[j] != 0.0).collect();
    LogisticModel { intercept, coefficients, selected_support, lambda, diagnostics }
}

/// L1-penalized logit minimizing `−(1/n) ℓ(β) + (λ/n) Σ |βⱼ|` on standardized
/// columns, followed (by default) by an unpenalized refit on the selected
/// support. A refit with a coefficient above 30 in magnitude is discarded in
/// favour of the penalized fit and flagged as separation.
pub fn fit_logistic_lasso(x: ArrayView2<'_, f64>, y: &[f64], lambda: f64) -> Result<LogisticModel> {
    fit_logistic_lasso_with(x, y, lambda, &LogisticOptions::default())
}

pub fn fit_logistic_lasso_with(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    lambda: f64,
    opts: &LogisticOptions,
) -> Result<LogisticModel> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { what: "design rows", expected: y.len(), got: x.nrows() });
    }
    if let Some(row) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryColumn { column: "response", row, value: y[row] });
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::OneClassOnly);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let design = Standardized::new(x);
    let fit = irls_lasso(&design, y, lambda, opts);
    let mut diagnostics = fit.diagnostics;
    if !opts.refit {
        return Ok(to_model(&design, &fit.state, lambda, diagnostics));
    }
    let support: Vec<usize> = (0..design.p).filter(|&j| fit.state.beta[j] != 0.0).collect();
    let refit = newton_refit(&design, y, &support, &fit.state)
        .map(|state| to_model(&design, &state, lambda, diagnostics))
        .filter(|m| {
            m.intercept.abs() <= SEPARATION_BOUND
                && m.coefficients.iter().all(|c| c.abs() <= SEPARATION_BOUND)
        });
    match refit {
        Some(model) => Ok(model),
        None => {
            diagnostics.separation = true;
            Ok(to_model(&design, &fit.state, lambda, diagnostics))
        }
    }
}
