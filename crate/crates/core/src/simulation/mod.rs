//! Simulation design with a known truth:
//!
//! ```text
//! X ~ N(0, Σ),  Σᵢⱼ = 0.5^|i−j|  (or I),   βᵢ = scale / i²
//! D = 1{Xᵀβ + W > 0}
//! M = 1{0.5·D + Xᵀβ + V > 0}
//! Y = 0.5·D + b_M·M + b_DM·D·M + Xᵀβ + U
//! ```
//!
//! with `U, V, W` independent standard normals, `b_M = 1` and `b_DM = 0.5`.

mod dgp;
mod montecarlo;
mod oracle;
mod properties;
mod truth;

use serde::{Deserialize, Serialize};

use crate::crossfit::CrossFitConfig;
use crate::error::{Error, Result};

pub use dgp::{generate_dgp, generate_units, SimulatedUnits};
pub use montecarlo::{
    run_monte_carlo, run_monte_carlo_with, EffectCell, MetricsTable, MonteCarloResult,
    ReplicationOutcome,
};
pub use oracle::{oracle_row, Corruption, OracleLearner, OracleModel};
pub use properties::{
    bayes_identity_check, decomposition_check, moment_check, orthogonality_check,
    robustness_check, run_verify_suites, Direction, OracleSample, OrthogonalityScore, Relation,
    SuiteReport, SuiteRow, VerifyOptions, VerifyReport,
};
pub use truth::{closed_form_truth, true_effects_oracle, TrueEffects};

/// Coefficient of D in the outcome and mediator equations.
pub const TREATMENT_COEF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    /// `Σᵢⱼ = 0.5^|i−j|`.
    Toeplitz,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDesign {
    pub n: usize,
    pub p: usize,
    /// `βᵢ = coef_scale / i²`.
    pub coef_scale: f64,
    pub sigma: SigmaKind,
    /// Coefficient of M in the outcome equation.
    pub mediator_coef: f64,
    /// Coefficient of D·M in the outcome equation.
    pub interaction: f64,
    pub replications: usize,
    pub folds: usize,
    pub trim: f64,
    pub base_seed: u64,
}

impl Default for SimulationDesign {
    fn default() -> Self {
        SimulationDesign {
            n: 1000,
            p: 200,
            coef_scale: 0.3,
            sigma: SigmaKind::Toeplitz,
            mediator_coef: 1.0,
            interaction: 0.5,
            replications: 250,
            folds: 3,
            trim: 0.05,
            base_seed: 1,
        }
    }
}

impl SimulationDesign {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.coef_scale > 0.0 && self.coef_scale.is_finite()) {
            return bad(format!("coefficient scale must be positive, got {}", self.coef_scale));
        }
        if self.p < 1 {
            return bad("need at least one covariate".into());
        }
        if self.replications < 1 {
            return bad("need at least one replication".into());
        }
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        if self.n < 2 * self.folds {
            return bad(format!("n = {} is too small for {} folds", self.n, self.folds));
        }
        if !(self.trim > 0.0 && self.trim < 0.5) {
            return bad(format!("trimming threshold must lie in (0, 0.5), got {}", self.trim));
        }
        if !(self.mediator_coef.is_finite() && self.interaction.is_finite()) {
            return bad("outcome coefficients must be finite".into());
        }
        Ok(())
    }

    pub fn beta(&self) -> Vec<f64> {
        (1..=self.p).map(|i| self.coef_scale / (i * i) as f64).collect()
    }

    /// `Var(Xᵀβ) = βᵀΣβ`.
    pub fn index_variance(&self) -> f64 {
        let beta = self.beta();
        match self.sigma {
            SigmaKind::Identity => beta.iter().map(|b| b * b).sum(),
            SigmaKind::Toeplitz => {
                let mut v = 0.0;
                for i in 0..self.p {
                    for j in 0..self.p {
                        v += beta[i] * beta[j] * 0.5f64.powi((i as i32 - j as i32).abs());
                    }
                }
                v
            }
        }
    }

    /// Cross-fitting settings for replication `r`.
    pub fn crossfit_config(&self, r: usize) -> CrossFitConfig {
        CrossFitConfig { folds: self.folds, seed: self.replication_seed(r), trim: self.trim }
    }

    pub fn replication_seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_variance_matches_reference_values() {
        // βᵀΣβ for p = 200, evaluated independently with numpy.
        let d = SimulationDesign { coef_scale: 0.3, ..Default::default() };
        assert!((d.index_variance() - 0.13224904344101882).abs() < 1e-12, "{}", d.index_variance());
        let d = SimulationDesign { coef_scale: 0.5, ..Default::default() };
        assert!((d.index_variance() - 0.36735845400283024).abs() < 1e-12, "{}", d.index_variance());
    }

    #[test]
    fn validation_rejects_bad_designs() {
        let ok = SimulationDesign::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SimulationDesign { coef_scale: 0.0, ..ok.clone() },
            SimulationDesign { p: 0, ..ok.clone() },
            SimulationDesign { replications: 0, ..ok.clone() },
            SimulationDesign { trim: 0.6, ..ok.clone() },
            SimulationDesign { n: 5, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
