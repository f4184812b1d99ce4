//! Nuisance functions: fitted on training folds, evaluated on held-out rows.
//!
//! | model | specification |
//! |---|---|
//! | `Pr(D=1 \| X)` and `Pr(D=1 \| M, X)` | post-lasso logit of D on X, or on [M, X] |
//! | `Pr(M=1 \| D, X)` | post-lasso logit of M on [D, X] |
//! | `μ(d, m, X)` | post-lasso regression of Y on [D, M, D·M, X] |
//! | `μ(d, X)` | post-lasso regression of Y on X within arm d |
//! | `ω(1−d, X)` | post-lasso regression of `μ̂(d, M, X)` on X within arm 1−d |
//!
//! The treatment and mediator regressors are left unpenalized.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset};
use crate::error::{Error, Result};
use crate::learners::{
    clip_prob, fit_logistic_lasso_with, fit_post_lasso_linear_with, plugin_lambda, sigmoid,
    LassoOptions, LinearModel, LogisticModel, LogisticOptions, BERNOULLI_NOISE_SCALE,
};

/// Nuisance values for one observation.
///
/// Arrays indexed by `d` hold the quantity needed by the score for arm `d`:
/// `nu[d]` is `ν(1−d, X) = Σ_m μ(d,m,X)·f(m|1−d,X)` and `omega[d]` is
/// `ω(1−d, X) = E[μ(d,M,X) | D=1−d, X]`. Fields a pipeline does not produce
/// are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuisanceRow {
    /// `Pr(D=1 | X)`.
    pub p1_x: f64,
    /// `Pr(D=1 | M, X)` at the observed mediator.
    pub p1_mx: f64,
    /// `Pr(M=1 | D=d, X)`.
    pub m1_given_d: [f64; 2],
    /// `μ(d, m, X)` indexed `[d][m]`.
    pub mu: [[f64; 2]; 2],
    /// `μ(d, X) = E[Y | D=d, X]`.
    pub mu_dx: [f64; 2],
    pub nu: [f64; 2],
    pub omega: [f64; 2],
}

impl Default for NuisanceRow {
    fn default() -> Self {
        NuisanceRow {
            p1_x: f64::NAN,
            p1_mx: f64::NAN,
            m1_given_d: [f64::NAN; 2],
            mu: [[f64::NAN; 2]; 2],
            mu_dx: [f64::NAN; 2],
            nu: [f64::NAN; 2],
            omega: [f64::NAN; 2],
        }
    }
}

impl NuisanceRow {
    /// `p_d(X)`.
    #[inline]
    pub fn p_x(&self, d: Arm) -> f64 {
        match d {
            Arm::Treated => self.p1_x,
            Arm::Control => 1.0 - self.p1_x,
        }
    }

    /// `p_d(M, X)` at the observed mediator.
    #[inline]
    pub fn p_mx(&self, d: Arm) -> f64 {
        match d {
            Arm::Treated => self.p1_mx,
            Arm::Control => 1.0 - self.p1_mx,
        }
    }

    /// `f(m | d, X)`.
    #[inline]
    pub fn f(&self, m: u8, d: Arm) -> f64 {
        let p1 = self.m1_given_d[d.index()];
        if m == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    #[inline]
    pub fn mu(&self, d: Arm, m: u8) -> f64 {
        self.mu[d.index()][m as usize]
    }

    /// Recomputes `ν` from `μ` and `f` for both arms.
    pub fn fill_nu(&mut self) {
        for d in Arm::BOTH {
            self.nu[d.index()] =
                self.mu(d, 1) * self.f(1, d.other()) + self.mu(d, 0) * self.f(0, d.other());
        }
    }
}

/// Nuisance rows for every observation of a dataset, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSet {
    pub rows: Vec<NuisanceRow>,
}

impl NuisanceSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Penalty and solver settings for every nuisance fit.
#[derive(Debug, Clone)]
pub struct NuisanceSettings {
    pub lasso: LassoOptions,
    pub logistic: LogisticOptions,
    /// Multiplier applied to the plug-in level (with the Bernoulli noise
    /// bound) for logit fits.
    pub logistic_penalty_scale: f64,
}

/// The logit plug-in level `(c/2)√n Φ⁻¹(1 − γ/(2p))` on the `Σℓ` scale, expressed
/// against `plugin_lambda(n, p, 0.5) = c√n Φ⁻¹(…)` for the solver's
/// `−(1/n)ℓ + (λ/n)‖β‖₁` objective.
pub const LOGISTIC_PENALTY_SCALE: f64 = 0.25;

impl Default for NuisanceSettings {
    fn default() -> Self {
        NuisanceSettings {
            lasso: LassoOptions::default(),
            logistic: LogisticOptions::default(),
            logistic_penalty_scale: LOGISTIC_PENALTY_SCALE,
        }
    }
}

impl NuisanceSettings {
    fn logit(&self, x: &Array2<f64>, y: &[f64], unpenalized: Vec<usize>) -> Result<LogisticModel> {
        let lambda = plugin_lambda(y.len(), x.ncols().max(1), BERNOULLI_NOISE_SCALE)?
            * self.logistic_penalty_scale;
        let opts = LogisticOptions { unpenalized, ..self.logistic.clone() };
        fit_logistic_lasso_with(x.view(), y, lambda, &opts)
    }

    fn linear(&self, x: &Array2<f64>, y: &[f64], unpenalized: Vec<usize>) -> Result<LinearModel> {
        let opts = LassoOptions { unpenalized, ..self.lasso.clone() };
        fit_post_lasso_linear_with(x.view(), y, &opts)
    }
}

/// Predictor of `Pr(D=1 | X)` or `Pr(D=1 | M, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub model: LogisticModel,
    pub include_mediator: bool,
}

impl PropensityModel {
    pub fn prob_treated(&self, x: &[f64], m: u8) -> f64 {
        let lead = usize::from(self.include_mediator);
        let mut eta = self.model.intercept + self.model.tail_index(lead, x);
        if self.include_mediator && self.model.coefficients[0] != 0.0 {
            eta += self.model.coefficients[0] * f64::from(m);
        }
        clip_prob(sigmoid(eta))
    }

    /// `p_d(·)`; the control-arm value is the complement of the treated one.
    pub fn prob(&self, d: Arm, x: &[f64], m: u8) -> f64 {
        let p1 = self.prob_treated(x, m);
        match d {
            Arm::Treated => p1,
            Arm::Control => 1.0 - p1,
        }
    }
}

/// Predictor of `Pr(M=1 | D=d, X)` from a single logit with D as regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct MediatorModel {
    pub model: LogisticModel,
}

impl MediatorModel {
    pub fn prob_m1(&self, d: Arm, x: &[f64]) -> f64 {
        let eta = self.model.intercept
            + self.model.coefficients[0] * f64::from(d.value())
            + self.model.tail_index(1, x);
        clip_prob(sigmoid(eta))
    }

    /// `f(m | d, x)`.
    pub fn density(&self, m: u8, d: Arm, x: &[f64]) -> f64 {
        let p1 = self.prob_m1(d, x);
        if m == 1 {
            p1
        } else {
            1.0 - p1
        }
    }
}

/// Predictor of `μ(d, m, X)` from one regression on [D, M, D·M, X].
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub model: LinearModel,
}

impl OutcomeModel {
    /// `μ(d, m, x)` for all four cells, indexed `[d][m]`.
    pub fn cell_means(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let c = &self.model.coefficients;
        let base = self.model.intercept + self.model.tail_index(3, x);
        [[base, base + c[1]], [base + c[0], base + c[0] + c[1] + c[2]]]
    }

    pub fn mean(&self, d: Arm, m: u8, x: &[f64]) -> f64 {
        self.cell_means(x)[d.index()][m as usize]
    }
}

/// Predictor of `μ(d, X) = E[Y | D=d, X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMeanModel {
    pub d: Arm,
    pub model: LinearModel,
}

/// Predictor of `ω(1−d, X) = E[μ(d, M, X) | D=1−d, X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedMeanModel {
    pub d: Arm,
    pub model: LinearModel,
}

fn rows_in_arm(data: &Dataset, rows: &[usize], arm: Arm) -> Vec<usize> {
    rows.iter().copied().filter(|&i| data.treatment()[i] == arm.value()).collect()
}

pub fn fit_treatment_propensity(
    data: &Dataset,
    train: &[usize],
    include_mediator: bool,
    settings: &NuisanceSettings,
) -> Result<PropensityModel> {
    for arm in Arm::BOTH {
        if data.count_arm(train, arm) == 0 {
            return Err(Error::EmptyArm { arm: arm.value(), context: " in training sample".into() });
        }
    }
    let y: Vec<f64> = train.iter().map(|&i| f64::from(data.treatment()[i])).collect();
    let model = if include_mediator {
        let x = data.design(train, |i| vec![f64::from(data.mediator()[i])], 1);
        settings.logit(&x, &y, vec![0])?
    } else {
        let x = data.design(train, |_| Vec::new(), 0);
        settings.logit(&x, &y, Vec::new())?
    };
    Ok(PropensityModel { model, include_mediator })
}

pub fn fit_mediator_density(
    data: &Dataset,
    train: &[usize],
    settings: &NuisanceSettings,
) -> Result<MediatorModel> {
    let y: Vec<f64> = train.iter().map(|&i| f64::from(data.mediator()[i])).collect();
    let x = data.design(train, |i| vec![f64::from(data.treatment()[i])], 1);
    Ok(MediatorModel { model: settings.logit(&x, &y, vec![0])? })
}

pub fn fit_outcome_mean(
    data: &Dataset,
    train: &[usize],
    settings: &NuisanceSettings,
) -> Result<OutcomeModel> {
    if train.is_empty() {
        return Err(Error::InvalidParameter("outcome model needs training rows".into()));
    }
    let y: Vec<f64> = train.iter().map(|&i| data.outcome()[i]).collect();
    let x = data.design(
        train,
        |i| {
            let d = f64::from(data.treatment()[i]);
            let m = f64::from(data.mediator()[i]);
            vec![d, m, d * m]
        },
        3,
    );
    Ok(OutcomeModel { model: settings.linear(&x, &y, vec![0, 1, 2])? })
}

pub fn fit_conditional_mean_d(
    data: &Dataset,
    train: &[usize],
    d: Arm,
    settings: &NuisanceSettings,
) -> Result<ArmMeanModel> {
    let rows = rows_in_arm(data, train, d);
    if rows.is_empty() {
        return Err(Error::EmptyArm { arm: d.value(), context: " in training sample".into() });
    }
    let y: Vec<f64> = rows.iter().map(|&i| data.outcome()[i]).collect();
    let model = if rows.len() < 2 {
        LinearModel::intercept_only(y[0], data.p(), 0.0)
    } else {
        settings.linear(&data.design(&rows, |_| Vec::new(), 0), &y, Vec::new())?
    };
    Ok(ArmMeanModel { d, model })
}

/// Regresses `μ̂(d, Mᵢ, Xᵢ)` (from a model trained on `train_mu`) on `Xᵢ` over
/// the rows of `train_nest` with `D = 1−d`.
pub fn fit_nested_mean(
    data: &Dataset,
    train_mu: &[usize],
    train_nest: &[usize],
    d: Arm,
    mu: &OutcomeModel,
    settings: &NuisanceSettings,
) -> Result<NestedMeanModel> {
    let mut seen = vec![false; data.n()];
    for &i in train_mu {
        seen[i] = true;
    }
    if train_nest.iter().any(|&i| seen[i]) {
        return Err(Error::DisjointnessViolated);
    }
    let rows = rows_in_arm(data, train_nest, d.other());
    if rows.is_empty() {
        return Err(Error::EmptyArm {
            arm: d.other().value(),
            context: " in nested-mean subsample".into(),
        });
    }
    let pseudo: Vec<f64> = rows
        .iter()
        .map(|&i| mu.mean(d, data.mediator()[i], data.x_row(i)))
        .collect();
    let model = if rows.len() < 2 {
        LinearModel::intercept_only(pseudo[0], data.p(), 0.0)
    } else {
        settings.linear(&data.design(&rows, |_| Vec::new(), 0), &pseudo, Vec::new())?
    };
    Ok(NestedMeanModel { d, model })
}

/// Fitted predictors for one fold. Absent predictors leave their fields NaN.
#[derive(Debug, Clone, Default)]
pub struct Predictors {
    pub propensity_x: Option<PropensityModel>,
    pub propensity_mx: Option<PropensityModel>,
    pub mediator: Option<MediatorModel>,
    pub outcome: Option<OutcomeModel>,
    pub arm_means: Option<[ArmMeanModel; 2]>,
    pub nested: Option<[NestedMeanModel; 2]>,
}

fn check_dim(model_dim: usize, lead: usize, p: usize) -> Result<()> {
    if model_dim != lead + p {
        return Err(Error::DimensionMismatch { expected: model_dim, got: lead + p });
    }
    Ok(())
}

/// Evaluates every available predictor at each row of `eval`.
pub fn materialize(data: &Dataset, eval: &[usize], predictors: &Predictors) -> Result<Vec<NuisanceRow>> {
    let p = data.p();
    if let Some(m) = &predictors.propensity_x {
        check_dim(m.model.dim(), usize::from(m.include_mediator), p)?;
    }
    if let Some(m) = &predictors.propensity_mx {
        check_dim(m.model.dim(), usize::from(m.include_mediator), p)?;
    }
    if let Some(m) = &predictors.mediator {
        check_dim(m.model.dim(), 1, p)?;
    }
    if let Some(m) = &predictors.outcome {
        check_dim(m.model.dim(), 3, p)?;
    }
    for arm in predictors.arm_means.iter().flatten() {
        check_dim(arm.model.dim(), 0, p)?;
    }
    for nest in predictors.nested.iter().flatten() {
        check_dim(nest.model.dim(), 0, p)?;
    }

    Ok(eval
        .iter()
        .map(|&i| {
            let x = data.x_row(i);
            let m_obs = data.mediator()[i];
            let mut row = NuisanceRow::default();
            if let Some(m) = &predictors.propensity_x {
                row.p1_x = m.prob_treated(x, m_obs);
            }
            if let Some(m) = &predictors.propensity_mx {
                row.p1_mx = m.prob_treated(x, m_obs);
            }
            if let Some(m) = &predictors.mediator {
                for d in Arm::BOTH {
                    row.m1_given_d[d.index()] = m.prob_m1(d, x);
                }
            }
            if let Some(m) = &predictors.outcome {
                row.mu = m.cell_means(x);
            }
            if let Some(arms) = &predictors.arm_means {
                for a in arms {
                    row.mu_dx[a.d.index()] = a.model.linear_index(x);
                }
            }
            if let Some(nests) = &predictors.nested {
                for n in nests {
                    row.omega[n.d.index()] = n.model.linear_index(x);
                }
            }
            if predictors.mediator.is_some() && predictors.outcome.is_some() {
                row.fill_nu();
            }
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::FitDiagnostics;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn logit(intercept: f64, coefficients: Vec<f64>) -> LogisticModel {
        let selected_support = (0..coefficients.len()).filter(|&j| coefficients[j] != 0.0).collect();
        LogisticModel { intercept, coefficients, selected_support, lambda: 0.0, diagnostics: FitDiagnostics::default() }
    }

    fn linear(intercept: f64, coefficients: Vec<f64>) -> LinearModel {
        let selected_support = (0..coefficients.len()).filter(|&j| coefficients[j] != 0.0).collect();
        LinearModel { intercept, coefficients, selected_support, lambda: 0.0, diagnostics: FitDiagnostics::default() }
    }

    fn toy() -> Dataset {
        Dataset::new(
            vec![1.0, 2.0, 0.5],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            array![[0.0], [1.0], [-2.0]],
        )
        .unwrap()
    }

    #[test]
    fn three_row_hand_evaluation() {
        let data = toy();
        let predictors = Predictors {
            propensity_x: Some(PropensityModel { model: logit(0.0, vec![1.0]), include_mediator: false }),
            propensity_mx: Some(PropensityModel { model: logit(0.5, vec![-1.0, 0.0]), include_mediator: true }),
            mediator: Some(MediatorModel { model: logit(-0.5, vec![1.0, 0.5]) }),
            outcome: Some(OutcomeModel { model: linear(1.0, vec![0.5, 0.25, 0.125, 2.0]) }),
            arm_means: Some([
                ArmMeanModel { d: Arm::Control, model: linear(0.1, vec![1.0]) },
                ArmMeanModel { d: Arm::Treated, model: linear(0.9, vec![-1.0]) },
            ]),
            nested: Some([
                NestedMeanModel { d: Arm::Control, model: linear(3.0, vec![0.0]) },
                NestedMeanModel { d: Arm::Treated, model: linear(-1.0, vec![2.0]) },
            ]),
        };
        let rows = materialize(&data, &[0, 1, 2], &predictors).unwrap();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());

        // row 1: x = 1, M = 1
        let r = &rows[1];
        assert_abs_diff_eq!(r.p1_x, s(1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.p1_mx, s(0.5 - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.m1_given_d[0], s(-0.5 + 0.5), epsilon = 1e-15);
        assert_abs_diff_eq!(r.m1_given_d[1], s(-0.5 + 1.0 + 0.5), epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu[0][0], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu[0][1], 3.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu[1][0], 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu[1][1], 3.875, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu_dx[0], 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu_dx[1], -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(r.omega[0], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.omega[1], 1.0, epsilon = 1e-15);
        let f1_0 = s(0.0);
        let f1_1 = s(1.0);
        assert_abs_diff_eq!(r.nu[1], 3.875 * f1_0 + 3.5 * (1.0 - f1_0), epsilon = 1e-14);
        assert_abs_diff_eq!(r.nu[0], 3.25 * f1_1 + 3.0 * (1.0 - f1_1), epsilon = 1e-14);

        // row 2: x = -2, M = 1, mediator enters Pr(D=1|M,X) with coefficient -1
        let r = &rows[2];
        assert_abs_diff_eq!(r.p1_x, s(-2.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.p1_mx, s(-0.5), epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu[1][1], 1.0 - 4.0 + 0.875, epsilon = 1e-15);
        assert_abs_diff_eq!(r.omega[1], -5.0, epsilon = 1e-15);
        // row 0: M = 0
        assert_abs_diff_eq!(rows[0].p1_mx, s(0.5), epsilon = 1e-15);
    }

    #[test]
    fn missing_predictors_leave_nan() {
        let data = toy();
        let predictors = Predictors {
            propensity_x: Some(PropensityModel { model: logit(0.0, vec![0.0]), include_mediator: false }),
            ..Default::default()
        };
        let rows = materialize(&data, &[0], &predictors).unwrap();
        assert_eq!(rows[0].p1_x, 0.5);
        assert!(rows[0].mu[0][0].is_nan() && rows[0].nu[1].is_nan());
    }

    #[test]
    fn dimension_mismatch_detected() {
        let data = toy();
        let predictors = Predictors {
            outcome: Some(OutcomeModel { model: linear(0.0, vec![0.0; 2]) }),
            ..Default::default()
        };
        assert!(matches!(materialize(&data, &[0], &predictors), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn nested_mean_requires_disjoint_samples() {
        let data = toy();
        let mu = OutcomeModel { model: linear(0.0, vec![0.0; 4]) };
        let err = fit_nested_mean(&data, &[0, 1], &[1, 2], Arm::Treated, &mu, &NuisanceSettings::default());
        assert_eq!(err.unwrap_err(), Error::DisjointnessViolated);
    }

    #[test]
    fn nested_mean_of_constant_is_constant() {
        let data = toy();
        let mu = OutcomeModel { model: linear(4.0, vec![0.0; 4]) };
        let nest = fit_nested_mean(&data, &[0], &[1, 2], Arm::Treated, &mu, &NuisanceSettings::default()).unwrap();
        assert_eq!(nest.model.linear_index(&[7.0]), 4.0);
    }

    #[test]
    fn mediator_model_needs_both_classes() {
        let data = Dataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0; 4],
            array![[0.0], [1.0], [2.0], [3.0]],
        )
        .unwrap();
        let err = fit_mediator_density(&data, &[0, 1, 2, 3], &NuisanceSettings::default());
        assert_eq!(err.unwrap_err(), Error::OneClassOnly);
    }

    #[test]
    fn arm_mean_of_constant_outcome() {
        let data = Dataset::new(
            vec![5.0, 1.0, 5.0, 2.0, 5.0],
            vec![1.0, 0.0, 1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0, 0.0],
            array![[0.3], [1.0], [2.0], [3.0], [-1.0]],
        )
        .unwrap();
        let m = fit_conditional_mean_d(&data, &[0, 1, 2, 3, 4], Arm::Treated, &NuisanceSettings::default()).unwrap();
        assert_eq!(m.model.linear_index(&[10.0]), 5.0);
        let err = fit_conditional_mean_d(&data, &[0, 2], Arm::Control, &NuisanceSettings::default());
        assert!(matches!(err, Err(Error::EmptyArm { arm: 0, .. })));
    }

    proptest! {
        #[test]
        fn mediator_probabilities_sum_to_one(eta in -50f64..50.0, x in -5f64..5.0) {
            let m = MediatorModel { model: logit(eta, vec![0.7, 1.3]) };
            for d in Arm::BOTH {
                prop_assert_eq!(m.density(1, d, &[x]) + m.density(0, d, &[x]), 1.0);
            }
            let pm = PropensityModel { model: logit(eta, vec![0.4]), include_mediator: false };
            prop_assert_eq!(pm.prob(Arm::Treated, &[x], 0) + pm.prob(Arm::Control, &[x], 0), 1.0);
        }
    }
}
