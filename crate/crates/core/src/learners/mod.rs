//! Penalized regression used for every nuisance function: coordinate-descent
//! lasso, post-lasso least squares and post-lasso logit, with a plug-in
//! penalty level.

mod cd;
mod linear;
mod logistic;
mod standardize;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::PROB_CLIP;

pub use linear::{
    fit_lasso_linear, fit_lasso_linear_with, fit_ols, fit_post_lasso_linear,
    fit_post_lasso_linear_with, LassoOptions, LINEAR_PENALTY_SCALE,
};
pub use logistic::{
    fit_logistic_lasso, fit_logistic_lasso_with, LogisticOptions, BERNOULLI_NOISE_SCALE,
};

/// Slack constant of the plug-in penalty.
pub const PLUGIN_C: f64 = 1.1;

/// Plug-in penalty `2 c σ √n Φ⁻¹(1 − γ/(2p))` with `c = 1.1` and `γ = 0.1 / ln n`.
pub fn plugin_lambda(n: usize, p: usize, noise_scale: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("plug-in penalty needs n >= 2, got {n}")));
    }
    if p < 1 {
        return Err(Error::InvalidParameter("plug-in penalty needs p >= 1".into()));
    }
    if !(noise_scale > 0.0 && noise_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise scale must be positive and finite, got {noise_scale}"
        )));
    }
    let gamma = 0.1 / (n as f64).ln();
    let z = standard_normal().inverse_cdf(1.0 - gamma / (2.0 * p as f64));
    Ok(2.0 * PLUGIN_C * noise_scale * (n as f64).sqrt() * z)
}

pub(crate) fn standard_normal() -> Normal {
    Normal::standard()
}

/// Convergence and refit flags attached to a fitted model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Coordinate-descent or IRLS iterations used.
    pub iterations: usize,
    pub converged: bool,
    /// Post-lasso refit was rank deficient; penalized coefficients kept.
    pub singular_refit: bool,
    /// Post-lasso logit refit diverged; penalized coefficients kept.
    pub separation: bool,
}

/// Linear predictor `β₀ + xᵀβ` on the original covariate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub selected_support: Vec<usize>,
    pub lambda: f64,
    pub diagnostics: FitDiagnostics,
}

/// Logit model; [`LogisticModel::predict_proba`] clips into `[1e-12, 1 - 1e-12]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub selected_support: Vec<usize>,
    pub lambda: f64,
    pub diagnostics: FitDiagnostics,
}

#[inline]
fn dot_support(coefficients: &[f64], support: &[usize], x: &[f64]) -> f64 {
    support.iter().map(|&j| coefficients[j] * x[j]).sum()
}

impl LinearModel {
    pub(crate) fn intercept_only(intercept: f64, p: usize, lambda: f64) -> Self {
        LinearModel {
            intercept,
            coefficients: vec![0.0; p],
            selected_support: Vec::new(),
            lambda,
            diagnostics: FitDiagnostics { converged: true, ..Default::default() },
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.linear_index(x))
    }

    /// `β₀ + xᵀβ` without the dimension check.
    #[inline]
    pub(crate) fn linear_index(&self, x: &[f64]) -> f64 {
        self.intercept + dot_support(&self.coefficients, &self.selected_support, x)
    }

    /// Contribution of columns `offset..` applied to `x_tail`, i.e. the part of
    /// the index coming from a trailing block of the design.
    #[inline]
    pub(crate) fn tail_index(&self, offset: usize, x_tail: &[f64]) -> f64 {
        self.selected_support
            .iter()
            .filter(|&&j| j >= offset)
            .map(|&j| self.coefficients[j] * x_tail[j - offset])
            .sum()
    }
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(clip_prob(sigmoid(self.linear_index(x))))
    }

    #[inline]
    pub(crate) fn linear_index(&self, x: &[f64]) -> f64 {
        self.intercept + dot_support(&self.coefficients, &self.selected_support, x)
    }

    #[inline]
    pub(crate) fn tail_index(&self, offset: usize, x_tail: &[f64]) -> f64 {
        self.selected_support
            .iter()
            .filter(|&&j| j >= offset)
            .map(|&j| self.coefficients[j] * x_tail[j - offset])
            .sum()
    }
}
