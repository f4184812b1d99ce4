//! K-fold cross-fitting: nuisances are trained on each fold's complement,
//! evaluated on the fold, and scores are averaged over retained rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Arm, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::nuisance::{
    fit_conditional_mean_d, fit_mediator_density, fit_nested_mean, fit_outcome_mean,
    fit_treatment_propensity, materialize, NuisanceRow, NuisanceSet, NuisanceSettings, Predictors,
};
use crate::scores::{Observation, ScoreTarget, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossFitConfig {
    pub folds: usize,
    pub seed: u64,
    /// Trimming threshold in `(0, 0.5)`.
    pub trim: f64,
}

impl Default for CrossFitConfig {
    fn default() -> Self {
        CrossFitConfig { folds: 3, seed: 0, trim: 0.05 }
    }
}

/// Which nuisance bundles a learner must produce for each fold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NuisancePlan {
    /// `p₁(X)`, `f(M|D,X)`, `μ(D,M,X)` and `ν`, all trained on the full complement.
    pub efficient: bool,
    /// `p₁(X)`, `p₁(M,X)`, `μ(D,M,X)` on one half of the complement and `ω` on the other.
    pub nested: bool,
    /// `p₁(X)` and the arm means `μ(d,X)`, written into every produced bundle.
    pub ate: bool,
}

impl NuisancePlan {
    pub fn for_target(target: ScoreTarget) -> Self {
        match target {
            ScoreTarget::Psi | ScoreTarget::PsiDm { .. } => NuisancePlan { efficient: true, ..Default::default() },
            ScoreTarget::PsiStar => NuisancePlan { nested: true, ..Default::default() },
            ScoreTarget::Alpha => NuisancePlan { ate: true, ..Default::default() },
        }
    }
}

/// Nuisance rows produced for the evaluation rows of one fold, in the order
/// the rows were passed.
#[derive(Debug, Clone, Default)]
pub struct FoldPredictions {
    pub efficient: Option<Vec<NuisanceRow>>,
    pub nested: Option<Vec<NuisanceRow>>,
}

/// Trains nuisance functions on `train` and evaluates them on `eval`.
///
/// `seed` is a per-fold seed for any randomness inside the learner (the half
/// split of the nested pipeline).
pub trait NuisanceLearner: Sync {
    fn fit_predict(
        &self,
        data: &Dataset,
        train: &[usize],
        eval: &[usize],
        plan: NuisancePlan,
        seed: u64,
    ) -> Result<FoldPredictions>;
}

/// Post-lasso linear and logistic learners with plug-in penalties.
#[derive(Debug, Clone, Default)]
pub struct PostLassoLearner {
    pub settings: NuisanceSettings,
}

/// Splits `rows` into two halves after a seeded shuffle; the first half gets
/// the extra row when the count is odd.
pub fn half_split(rows: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = shuffled.len().div_ceil(2);
    let b = shuffled.split_off(cut);
    (shuffled, b)
}

impl NuisanceLearner for PostLassoLearner {
    fn fit_predict(
        &self,
        data: &Dataset,
        train: &[usize],
        eval: &[usize],
        plan: NuisancePlan,
        seed: u64,
    ) -> Result<FoldPredictions> {
        let s = &self.settings;
        let propensity_x = Some(fit_treatment_propensity(data, train, false, s)?);
        let arm_means = if plan.ate {
            Some([
                fit_conditional_mean_d(data, train, Arm::Control, s)?,
                fit_conditional_mean_d(data, train, Arm::Treated, s)?,
            ])
        } else {
            None
        };
        let mut out = FoldPredictions::default();
        if plan.efficient || (plan.ate && !plan.nested) {
            let (mediator, outcome) = if plan.efficient {
                (Some(fit_mediator_density(data, train, s)?), Some(fit_outcome_mean(data, train, s)?))
            } else {
                (None, None)
            };
            let predictors = Predictors {
                propensity_x: propensity_x.clone(),
                mediator,
                outcome,
                arm_means: arm_means.clone(),
                ..Default::default()
            };
            out.efficient = Some(materialize(data, eval, &predictors)?);
        }
        if plan.nested {
            let (half_a, half_b) = half_split(train, seed);
            let outcome = fit_outcome_mean(data, &half_a, s)?;
            let nested = [
                fit_nested_mean(data, &half_a, &half_b, Arm::Control, &outcome, s)?,
                fit_nested_mean(data, &half_a, &half_b, Arm::Treated, &outcome, s)?,
            ];
            let predictors = Predictors {
                propensity_x,
                propensity_mx: Some(fit_treatment_propensity(data, train, true, s)?),
                outcome: Some(outcome),
                arm_means,
                nested: Some(nested),
                ..Default::default()
            };
            out.nested = Some(materialize(data, eval, &predictors)?);
        }
        Ok(out)
    }
}

/// Cross-fitted nuisance rows in dataset order.
#[derive(Debug, Clone)]
pub struct CrossFitted {
    pub folds: FoldAssignment,
    pub efficient: Option<NuisanceSet>,
    pub nested: Option<NuisanceSet>,
}

/// splitmix64 finalizer over `seed` and the fold index.
fn fold_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_config(cfg: &CrossFitConfig) -> Result<()> {
    if cfg.folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {}", cfg.folds)));
    }
    if !(cfg.trim > 0.0 && cfg.trim < 0.5) {
        return Err(Error::InvalidParameter(format!("trimming threshold must lie in (0, 0.5), got {}", cfg.trim)));
    }
    Ok(())
}

/// Runs the learner on every fold (in parallel) and scatters the predictions
/// back into dataset order. The first failing fold, in fold order, aborts.
pub fn cross_fit(
    data: &Dataset,
    cfg: &CrossFitConfig,
    plan: NuisancePlan,
    learner: &dyn NuisanceLearner,
) -> Result<CrossFitted> {
    check_config(cfg)?;
    let folds = make_folds(data.n(), cfg.folds, cfg.seed)?;
    cross_fit_on(data, &folds, plan, learner)
}

/// As [`cross_fit`] with a given fold assignment.
pub fn cross_fit_on(
    data: &Dataset,
    folds: &FoldAssignment,
    plan: NuisancePlan,
    learner: &dyn NuisanceLearner,
) -> Result<CrossFitted> {
    if folds.n() != data.n() {
        return Err(Error::InconsistentFolds);
    }
    let results: Vec<(Vec<usize>, Result<FoldPredictions>)> = (0..folds.k())
        .into_par_iter()
        .map(|k| {
            let eval = folds.fold(k);
            let train = folds.complement(k);
            let preds = learner.fit_predict(data, &train, &eval, plan, fold_seed(folds.seed(), k));
            (eval, preds)
        })
        .collect();

    let mut efficient = plan_slot(plan.efficient || (plan.ate && !plan.nested), data.n());
    let mut nested = plan_slot(plan.nested, data.n());
    for (k, (eval, preds)) in results.into_iter().enumerate() {
        let preds = preds.map_err(|e| Error::FoldFailure { fold: k, source: Box::new(e) })?;
        scatter(&mut efficient, preds.efficient, &eval, k)?;
        scatter(&mut nested, preds.nested, &eval, k)?;
    }
    Ok(CrossFitted {
        folds: folds.clone(),
        efficient: efficient.map(|rows| NuisanceSet { rows }),
        nested: nested.map(|rows| NuisanceSet { rows }),
    })
}

fn plan_slot(wanted: bool, n: usize) -> Option<Vec<NuisanceRow>> {
    wanted.then(|| vec![NuisanceRow::default(); n])
}

fn scatter(
    slot: &mut Option<Vec<NuisanceRow>>,
    preds: Option<Vec<NuisanceRow>>,
    eval: &[usize],
    fold: usize,
) -> Result<()> {
    let Some(rows) = slot else { return Ok(()) };
    let missing = || Error::FoldFailure {
        fold,
        source: Box::new(Error::InvalidParameter("learner did not produce a requested nuisance bundle".into())),
    };
    let preds = preds.ok_or_else(missing)?;
    if preds.len() != eval.len() {
        return Err(Error::FoldFailure {
            fold,
            source: Box::new(Error::LengthMismatch { what: "fold predictions", expected: eval.len(), got: preds.len() }),
        });
    }
    for (&i, row) in eval.iter().zip(preds) {
        rows[i] = row;
    }
    Ok(())
}

pub fn observations(data: &Dataset) -> Vec<Observation> {
    (0..data.n())
        .map(|i| Observation { y: data.outcome()[i], d: data.treatment()[i], m: data.mediator()[i] })
        .collect()
}

/// A counterfactual mean estimated from cross-fitted scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualEstimate {
    pub target: ScoreTarget,
    pub d: Arm,
    /// Mean of the retained score values.
    pub point: f64,
    pub scores: ScoreVector,
    pub retained_n: usize,
    pub trimmed_n: usize,
    pub folds: FoldAssignment,
}

impl CounterfactualEstimate {
    pub fn label(&self) -> String {
        self.target.label(self.d)
    }
}

/// Evaluates `target` for arm `d` on cross-fitted nuisances.
pub fn estimate_counterfactual(
    data: &Dataset,
    fitted: &CrossFitted,
    target: ScoreTarget,
    d: Arm,
    trim: f64,
) -> Result<CounterfactualEstimate> {
    let set = match target {
        ScoreTarget::PsiStar => fitted.nested.as_ref(),
        _ => fitted.efficient.as_ref().or(fitted.nested.as_ref()),
    }
    .ok_or_else(|| Error::InvalidParameter(format!("nuisances for {} were not fitted", target.label(d))))?;
    if set.len() != data.n() {
        return Err(Error::InconsistentFolds);
    }
    let scores = ScoreVector::evaluate(target, d, &observations(data), &set.rows, trim)?;
    let point = scores.mean()?;
    Ok(CounterfactualEstimate {
        target,
        d,
        point,
        retained_n: scores.retained_n(),
        trimmed_n: scores.trimmed_n(),
        scores,
        folds: fitted.folds.clone(),
    })
}

fn run_single(
    data: &Dataset,
    cfg: &CrossFitConfig,
    target: ScoreTarget,
    d: Arm,
    learner: &dyn NuisanceLearner,
) -> Result<CounterfactualEstimate> {
    let fitted = cross_fit(data, cfg, NuisancePlan::for_target(target), learner)?;
    estimate_counterfactual(data, &fitted, target, d, cfg.trim)
}

/// `E[Y(d, M(1−d))]` from the efficient score with the default learners.
pub fn run_algorithm1(data: &Dataset, cfg: &CrossFitConfig, d: Arm) -> Result<CounterfactualEstimate> {
    run_algorithm1_with(data, cfg, d, &PostLassoLearner::default())
}

pub fn run_algorithm1_with(
    data: &Dataset,
    cfg: &CrossFitConfig,
    d: Arm,
    learner: &dyn NuisanceLearner,
) -> Result<CounterfactualEstimate> {
    run_single(data, cfg, ScoreTarget::Psi, d, learner)
}

/// `E[Y(d, M(1−d))]` from the Bayes-rule score, with the outcome mean and the
/// nested mean trained on disjoint halves of each complement.
pub fn run_algorithm2(data: &Dataset, cfg: &CrossFitConfig, d: Arm) -> Result<CounterfactualEstimate> {
    run_algorithm2_with(data, cfg, d, &PostLassoLearner::default())
}

pub fn run_algorithm2_with(
    data: &Dataset,
    cfg: &CrossFitConfig,
    d: Arm,
    learner: &dyn NuisanceLearner,
) -> Result<CounterfactualEstimate> {
    run_single(data, cfg, ScoreTarget::PsiStar, d, learner)
}

/// `E[Y(d)]` from the doubly robust score.
pub fn run_ate_arm(data: &Dataset, cfg: &CrossFitConfig, d: Arm) -> Result<CounterfactualEstimate> {
    run_ate_arm_with(data, cfg, d, &PostLassoLearner::default())
}

pub fn run_ate_arm_with(
    data: &Dataset,
    cfg: &CrossFitConfig,
    d: Arm,
    learner: &dyn NuisanceLearner,
) -> Result<CounterfactualEstimate> {
    run_single(data, cfg, ScoreTarget::Alpha, d, learner)
}

/// `E[Y(d, m)]`; the cell `D=d, M=m` must be observed.
pub fn run_controlled(data: &Dataset, cfg: &CrossFitConfig, d: Arm, m: u8) -> Result<CounterfactualEstimate> {
    run_controlled_with(data, cfg, d, m, &PostLassoLearner::default())
}

pub fn run_controlled_with(
    data: &Dataset,
    cfg: &CrossFitConfig,
    d: Arm,
    m: u8,
    learner: &dyn NuisanceLearner,
) -> Result<CounterfactualEstimate> {
    check_cell(data, d, m)?;
    run_single(data, cfg, ScoreTarget::PsiDm { m }, d, learner)
}

pub(crate) fn check_cell(data: &Dataset, d: Arm, m: u8) -> Result<()> {
    if m > 1 {
        return Err(Error::InvalidParameter(format!("mediator value must be 0 or 1, got {m}")));
    }
    let present = (0..data.n()).any(|i| data.treatment()[i] == d.value() && data.mediator()[i] == m);
    if present {
        Ok(())
    } else {
        Err(Error::EmptyCell { d: d.value(), m })
    }
}
