use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::cd::{CdProblem, CdState};
use super::standardize::Standardized;
use super::{plugin_lambda, FitDiagnostics, LinearModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LassoOptions {
    /// Stop when a full sweep changes no standardized coefficient by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Columns excluded from the penalty.
    pub unpenalized: Vec<usize>,
    /// Multiplier applied to the plug-in level before it reaches the solver.
    pub penalty_scale: f64,
    /// Residual-variance updates of the plug-in noise scale.
    pub sigma_updates: usize,
}

/// The plug-in level is stated for the `Σr² + λ‖β‖₁` normalization; the
/// solver minimizes `(1/2n)Σr² + (λ/n)‖β‖₁`, so the level is halved.
pub const LINEAR_PENALTY_SCALE: f64 = 0.5;

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-7,
            max_sweeps: 10_000,
            unpenalized: Vec::new(),
            penalty_scale: LINEAR_PENALTY_SCALE,
            sigma_updates: 2,
        }
    }
}

fn check_inputs(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { what: "design rows", expected: y.len(), got: x.nrows() });
    }
    if y.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 observations, got {}", y.len())));
    }
    Ok(())
}

pub(crate) fn thresholds(design: &Standardized, lambda: f64, unpenalized: &[usize]) -> Vec<f64> {
    let base = lambda / design.n as f64;
    (0..design.p)
        .map(|j| if unpenalized.contains(&j) { 0.0 } else { base })
        .collect()
}

fn lasso_standardized(
    design: &Standardized,
    y: &[f64],
    lambda: f64,
    opts: &LassoOptions,
) -> (CdState, FitDiagnostics) {
    let kappa = thresholds(design, lambda, &opts.unpenalized);
    let problem = CdProblem { design, target: y, weights: None, thresholds: &kappa };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut state = CdState { intercept: mean, beta: vec![0.0; design.p] };
    let out = problem.solve(&mut state, opts.tol, opts.max_sweeps);
    let diag = FitDiagnostics { iterations: out.sweeps, converged: out.converged, ..Default::default() };
    (state, diag)
}

fn to_model(design: &Standardized, state: &CdState, lambda: f64, diagnostics: FitDiagnostics) -> LinearModel {
    let (intercept, coefficients) = design.unstandardize(state.intercept, &state.beta);
    let selected_support = (0..design.p).filter(|&j| coefficients[j] != 0.0).collect();
    LinearModel { intercept, coefficients, selected_support, lambda, diagnostics }
}

/// Lasso minimizing `(1/2n) Σ (yᵢ − β₀ − xᵢᵀβ)² + (λ/n) Σ |βⱼ|` on standardized
/// columns, reported on the original scale. Non-convergence is flagged in
/// the diagnostics, not returned as an error.
pub fn fit_lasso_linear(x: ArrayView2<'_, f64>, y: &[f64], lambda: f64) -> Result<LinearModel> {
    fit_lasso_linear_with(x, y, lambda, &LassoOptions::default())
}

pub fn fit_lasso_linear_with(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LinearModel> {
    check_inputs(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let design = Standardized::new(x);
    let (state, diag) = lasso_standardized(&design, y, lambda, opts);
    Ok(to_model(&design, &state, lambda, diag))
}

/// Least squares restricted to `support` on the standardized design.
/// Returns `None` when the support columns are (numerically) collinear.
pub(crate) fn ols_on_support(design: &Standardized, y: &[f64], support: &[usize]) -> Option<CdState> {
    let n = design.n as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut beta = vec![0.0; design.p];
    if support.is_empty() {
        return Some(CdState { intercept: mean, beta });
    }
    let s = support.len();
    let mut gram = DMatrix::<f64>::zeros(s, s);
    let mut rhs = DVector::<f64>::zeros(s);
    for (a, &ja) in support.iter().enumerate() {
        let za = design.col(ja);
        rhs[a] = za.iter().zip(y).map(|(z, y)| z * y).sum::<f64>() / n;
        for (b, &jb) in support.iter().enumerate().skip(a) {
            let v = za.iter().zip(design.col(jb)).map(|(u, w)| u * w).sum::<f64>() / n;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let chol = gram.cholesky()?;
    // Unit-variance columns: a squared pivot is the share of a column's
    // variance not explained by the preceding support columns.
    let l = chol.l_dirty();
    if (0..s).any(|i| l[(i, i)] * l[(i, i)] < 1e-10) {
        return None;
    }
    let coef = chol.solve(&rhs);
    if coef.iter().any(|c| !c.is_finite()) {
        return None;
    }
    for (a, &j) in support.iter().enumerate() {
        beta[j] = coef[a];
    }
    Some(CdState { intercept: mean, beta })
}

/// Unpenalized least squares on every column.
pub fn fit_ols(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<LinearModel> {
    check_inputs(x, y)?;
    let design = Standardized::new(x);
    let support: Vec<usize> = (0..design.p).filter(|&j| !design.constant[j]).collect();
    let state = ols_on_support(&design, y, &support).ok_or_else(|| {
        Error::InvalidParameter("design matrix is rank deficient".into())
    })?;
    let diag = FitDiagnostics { converged: true, ..Default::default() };
    Ok(to_model(&design, &state, 0.0, diag))
}

fn residual_scale(design: &Standardized, y: &[f64], state: &CdState) -> f64 {
    let eta = design.linear_predictor(state.intercept, &state.beta);
    let rss: f64 = y.iter().zip(eta).map(|(y, e)| (y - e).powi(2)).sum();
    let s = state.beta.iter().filter(|b| **b != 0.0).count();
    let dof = (design.n as f64 - s as f64 - 1.0).max(1.0);
    (rss / dof).sqrt()
}

/// Post-lasso: lasso at the plug-in penalty, with the noise scale re-estimated
/// from post-lasso residuals, then least squares on the selected columns.
pub fn fit_post_lasso_linear(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<LinearModel> {
    fit_post_lasso_linear_with(x, y, &LassoOptions::default())
}

pub fn fit_post_lasso_linear_with(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    opts: &LassoOptions,
) -> Result<LinearModel> {
    check_inputs(x, y)?;
    let design = Standardized::new(x);
    let n = design.n;
    let p = design.p.max(1);
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    if sd == 0.0 || design.p == 0 {
        return Ok(LinearModel::intercept_only(mean, design.p, 0.0));
    }

    let mut sigma = sd;
    let mut round = 0;
    loop {
        let lambda = plugin_lambda(n, p, sigma)? * opts.penalty_scale;
        let (penalized, mut diag) = lasso_standardized(&design, y, lambda, opts);
        let support: Vec<usize> = (0..design.p).filter(|&j| penalized.beta[j] != 0.0).collect();
        let (state, singular) = match ols_on_support(&design, y, &support) {
            Some(refit) => (refit, false),
            None => (penalized, true),
        };
        if round == opts.sigma_updates {
            diag.singular_refit = singular;
            return Ok(to_model(&design, &state, lambda, diag));
        }
        let next = residual_scale(&design, y, &state);
        // An exact fit leaves no noise to calibrate against.
        if !(next > 1e-10 * sd) {
            diag.singular_refit = singular;
            return Ok(to_model(&design, &state, lambda, diag));
        }
        sigma = next;
        round += 1;
    }
}
