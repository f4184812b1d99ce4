//! Double machine learning for causal mediation analysis.
//!
//! Natural direct and indirect effects, the total effect and the controlled
//! direct effect of a binary treatment are estimated from cross-fitted
//! efficient scores. Nuisance functions are learned with post-lasso linear and
//! logistic regressions using a plug-in penalty. The [`simulation`] module
//! carries the data generating process used to study the estimators, a
//! structural Monte Carlo for the true effects, and numerical checks of the
//! moment condition, Neyman orthogonality and multiple robustness of the
//! scores.

pub mod crossfit;
pub mod data;
pub mod effects;
pub mod error;
pub mod json;
pub mod learners;
pub mod nuisance;
pub mod scores;
pub mod simulation;

pub use crossfit::{
    cross_fit, cross_fit_on, estimate_counterfactual, run_algorithm1, run_algorithm1_with, run_algorithm2,
    run_algorithm2_with, run_ate_arm, run_ate_arm_with, run_controlled, run_controlled_with,
    CounterfactualEstimate, CrossFitConfig, CrossFitted, FoldPredictions, NuisanceLearner,
    NuisancePlan, PostLassoLearner,
};
pub use data::{make_folds, validate_dataset, Arm, Dataset, FoldAssignment, RawDataset};
pub use effects::{
    assemble_controlled, assemble_effects, effect_se, estimate_effects, p_value,
    ControlledEffect, EffectEstimate, EffectKind, EffectReport, Estimation, EstimatorKind,
};
pub use error::{Error, Result};
pub use learners::{
    fit_lasso_linear, fit_logistic_lasso, fit_post_lasso_linear, plugin_lambda, LinearModel,
    LogisticModel,
};
pub use nuisance::{NuisanceRow, NuisanceSet, NuisanceSettings};
pub use scores::{Observation, ScoreTarget, ScoreVector};

/// Lower/upper clip applied to every predicted probability.
pub const PROB_CLIP: f64 = 1e-12;
