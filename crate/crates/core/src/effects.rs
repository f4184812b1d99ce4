//! Effects as differences of counterfactual means, with standard errors from
//! per-observation score differences.
//!
//! | effect | contrast |
//! |---|---|
//! | total `Δ` | `Λ₁ − Λ₀` |
//! | direct `θ(1)` | `Λ₁ − Ψ₀` |
//! | direct `θ(0)` | `Ψ₁ − Λ₀` |
//! | indirect `δ(1)` | `Λ₁ − Ψ₁` |
//! | indirect `δ(0)` | `Ψ₀ − Λ₀` |
//! | controlled direct `γ(m)` | `Ψ₁ₘ − Ψ₀ₘ` |
//!
//! `Λ_d = E[Y(d)]` and `Ψ_d = E[Y(d, M(1−d))]`. All five natural effects are
//! computed on the rows retained by all four scores, so `θ(1) + δ(0) = Δ`
//! and `θ(0) + δ(1) = Δ` hold exactly.

use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::crossfit::{
    check_cell, cross_fit, estimate_counterfactual, CounterfactualEstimate, CrossFitConfig,
    NuisanceLearner, NuisancePlan,
};
use crate::data::{Arm, Dataset};
use crate::error::{Error, Result};
use crate::learners::standard_normal;
use crate::scores::{ScoreTarget, ScoreVector};

/// Which representation of `E[Y(d, M(1−d))]` feeds the natural effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Efficient score with the mediator density.
    Theorem1,
    /// Bayes-rule score with the nested conditional mean.
    Theorem2,
}

impl EstimatorKind {
    pub const BOTH: [EstimatorKind; 2] = [EstimatorKind::Theorem1, EstimatorKind::Theorem2];

    pub fn target(self) -> ScoreTarget {
        match self {
            EstimatorKind::Theorem1 => ScoreTarget::Psi,
            EstimatorKind::Theorem2 => ScoreTarget::PsiStar,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Theorem1 => "theorem1",
            EstimatorKind::Theorem2 => "theorem2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Total,
    DirectTreated,
    DirectControl,
    IndirectTreated,
    IndirectControl,
}

impl EffectKind {
    pub const ALL: [EffectKind; 5] = [
        EffectKind::Total,
        EffectKind::DirectTreated,
        EffectKind::DirectControl,
        EffectKind::IndirectTreated,
        EffectKind::IndirectControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EffectKind::Total => "total",
            EffectKind::DirectTreated => "direct_treated",
            EffectKind::DirectControl => "direct_control",
            EffectKind::IndirectTreated => "indirect_treated",
            EffectKind::IndirectControl => "indirect_control",
        }
    }

    /// Conventional symbol for tables.
    pub fn symbol(self) -> &'static str {
        match self {
            EffectKind::Total => "Δ",
            EffectKind::DirectTreated => "θ(1)",
            EffectKind::DirectControl => "θ(0)",
            EffectKind::IndirectTreated => "δ(1)",
            EffectKind::IndirectControl => "δ(0)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub estimate: f64,
    pub se: f64,
    /// Two-sided normal p-value; absent when the standard error is zero.
    pub p_value: Option<f64>,
}

impl EffectEstimate {
    fn new(estimate: f64, se: f64) -> Self {
        EffectEstimate { estimate, se, p_value: p_value(estimate, se).ok() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub estimator: EstimatorKind,
    pub total: EffectEstimate,
    pub direct_treated: EffectEstimate,
    pub direct_control: EffectEstimate,
    pub indirect_treated: EffectEstimate,
    pub indirect_control: EffectEstimate,
    /// `E[Y(0, M(0))]` on the common retained set.
    pub mean_y00: EffectEstimate,
    pub retained_n: usize,
    pub trimmed_n: usize,
}

impl EffectReport {
    pub fn get(&self, kind: EffectKind) -> &EffectEstimate {
        match kind {
            EffectKind::Total => &self.total,
            EffectKind::DirectTreated => &self.direct_treated,
            EffectKind::DirectControl => &self.direct_control,
            EffectKind::IndirectTreated => &self.indirect_treated,
            EffectKind::IndirectControl => &self.indirect_control,
        }
    }
}

/// `γ(m) = E[Y(1, m)] − E[Y(0, m)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledEffect {
    pub m: u8,
    pub effect: EffectEstimate,
    pub retained_n: usize,
    pub trimmed_n: usize,
}

/// Two-sided normal p-value `2(1 − Φ(|effect|/se))`.
pub fn p_value(effect: f64, se: f64) -> Result<f64> {
    if !(se > 0.0) {
        return Err(Error::ZeroSe);
    }
    let z = (effect / se).abs();
    // 2(1 − Φ(z)) = 2Φ(−z), which keeps precision in the tail.
    Ok((2.0 * standard_normal().cdf(-z)).clamp(0.0, 1.0))
}

fn check_compatible(a: &ScoreVector, b: &ScoreVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { what: "score vector", expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// Mean and standard error of `a − b` over `keep`.
fn difference_stats(a: &[f64], b: Option<&[f64]>, keep: &[bool]) -> Result<(f64, f64)> {
    let diff = |i: usize| a[i] - b.map_or(0.0, |b| b[i]);
    let rows: Vec<usize> = (0..a.len()).filter(|&i| keep[i]).collect();
    if rows.is_empty() {
        return Err(Error::EmptyRetainedSet);
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| diff(i)).sum::<f64>() / n;
    let var = rows.iter().map(|&i| (diff(i) - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, (var / n).sqrt()))
}

/// Standard error of the mean of `a − b` (or of `a` alone) over the rows
/// retained by both vectors: `sqrt(mean[(aᵢ − bᵢ − (ā − b̄))²] / n_retained)`.
pub fn effect_se(a: &ScoreVector, b: Option<&ScoreVector>) -> Result<f64> {
    if let Some(b) = b {
        check_compatible(a, b)?;
    }
    let keep: Vec<bool> = (0..a.len())
        .map(|i| !a.trimmed[i] && b.is_none_or(|b| !b.trimmed[i]))
        .collect();
    Ok(difference_stats(&a.values, b.map(|b| b.values.as_slice()), &keep)?.1)
}

fn same_folds(estimates: &[&CounterfactualEstimate]) -> Result<()> {
    let first = estimates[0];
    for e in &estimates[1..] {
        if e.folds != first.folds || e.scores.len() != first.scores.len() {
            return Err(Error::InconsistentFolds);
        }
    }
    Ok(())
}

/// Natural effects from `Λ₁, Λ₀` (targets `Alpha`) and `Ψ₁, Ψ₀` (both `Psi`
/// or both `PsiStar`), evaluated on the rows retained by all four scores.
pub fn assemble_effects(
    lambda1: &CounterfactualEstimate,
    lambda0: &CounterfactualEstimate,
    psi1: &CounterfactualEstimate,
    psi0: &CounterfactualEstimate,
) -> Result<EffectReport> {
    let roles_ok = lambda1.target == ScoreTarget::Alpha
        && lambda0.target == ScoreTarget::Alpha
        && lambda1.d == Arm::Treated
        && lambda0.d == Arm::Control
        && psi1.d == Arm::Treated
        && psi0.d == Arm::Control
        && psi1.target == psi0.target;
    let estimator = match psi1.target {
        ScoreTarget::Psi if roles_ok => EstimatorKind::Theorem1,
        ScoreTarget::PsiStar if roles_ok => EstimatorKind::Theorem2,
        _ => {
            return Err(Error::InvalidParameter(
                "expected Λ₁, Λ₀ and a matching pair Ψ₁, Ψ₀".into(),
            ))
        }
    };
    same_folds(&[lambda1, lambda0, psi1, psi0])?;
    let n = lambda1.scores.len();
    let keep: Vec<bool> = (0..n)
        .map(|i| [lambda1, lambda0, psi1, psi0].iter().all(|e| !e.scores.trimmed[i]))
        .collect();
    let (l1, l0, p1, p0) = (
        lambda1.scores.values.as_slice(),
        lambda0.scores.values.as_slice(),
        psi1.scores.values.as_slice(),
        psi0.scores.values.as_slice(),
    );
    let effect = |a: &[f64], b: Option<&[f64]>| -> Result<EffectEstimate> {
        let (mean, se) = difference_stats(a, b, &keep)?;
        Ok(EffectEstimate::new(mean, se))
    };
    let retained_n = keep.iter().filter(|k| **k).count();
    let total = effect(l1, Some(l0))?;
    let direct_treated = effect(l1, Some(p0))?;
    let direct_control = effect(p1, Some(l0))?;
    let indirect_treated = effect(l1, Some(p1))?;
    let indirect_control = effect(p0, Some(l0))?;
    let mean_y00 = effect(l0, None)?;
    Ok(EffectReport {
        estimator,
        total,
        direct_treated,
        direct_control,
        indirect_treated,
        indirect_control,
        mean_y00,
        retained_n,
        trimmed_n: n - retained_n,
    })
}

/// `γ(m)` from `Ψ₁ₘ` and `Ψ₀ₘ` on the rows retained by both.
pub fn assemble_controlled(
    psi1m: &CounterfactualEstimate,
    psi0m: &CounterfactualEstimate,
) -> Result<ControlledEffect> {
    let m = match (psi1m.target, psi0m.target) {
        (ScoreTarget::PsiDm { m }, ScoreTarget::PsiDm { m: m0 })
            if m == m0 && psi1m.d == Arm::Treated && psi0m.d == Arm::Control =>
        {
            m
        }
        _ => return Err(Error::InvalidParameter("expected Ψ₁ₘ and Ψ₀ₘ for one m".into())),
    };
    same_folds(&[psi1m, psi0m])?;
    let n = psi1m.scores.len();
    let keep: Vec<bool> = (0..n).map(|i| !psi1m.scores.trimmed[i] && !psi0m.scores.trimmed[i]).collect();
    let (mean, se) = difference_stats(&psi1m.scores.values, Some(&psi0m.scores.values), &keep)?;
    let retained_n = keep.iter().filter(|k| **k).count();
    Ok(ControlledEffect { m, effect: EffectEstimate::new(mean, se), retained_n, trimmed_n: n - retained_n })
}

/// Everything estimated from one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub reports: Vec<EffectReport>,
    pub controlled: Vec<ControlledEffect>,
    /// Every counterfactual mean that entered a report.
    pub counterfactuals: Vec<CounterfactualEstimate>,
}

/// Cross-fits the nuisances needed by `estimators` and the controlled effects
/// for each mediator value in `controlled_m`, once, and assembles all reports.
pub fn estimate_effects(
    data: &Dataset,
    cfg: &CrossFitConfig,
    estimators: &[EstimatorKind],
    controlled_m: &[u8],
    learner: &dyn NuisanceLearner,
) -> Result<Estimation> {
    for &m in controlled_m {
        for d in Arm::BOTH {
            check_cell(data, d, m)?;
        }
    }
    let plan = NuisancePlan {
        efficient: estimators.contains(&EstimatorKind::Theorem1) || !controlled_m.is_empty(),
        nested: estimators.contains(&EstimatorKind::Theorem2),
        ate: !estimators.is_empty(),
    };
    let fitted = cross_fit(data, cfg, plan, learner)?;
    let cf = |target, d| estimate_counterfactual(data, &fitted, target, d, cfg.trim);

    let mut counterfactuals = Vec::new();
    let mut reports = Vec::new();
    if !estimators.is_empty() {
        let lambda1 = cf(ScoreTarget::Alpha, Arm::Treated)?;
        let lambda0 = cf(ScoreTarget::Alpha, Arm::Control)?;
        for &kind in estimators {
            let psi1 = cf(kind.target(), Arm::Treated)?;
            let psi0 = cf(kind.target(), Arm::Control)?;
            reports.push(assemble_effects(&lambda1, &lambda0, &psi1, &psi0)?);
            counterfactuals.extend([psi1, psi0]);
        }
        counterfactuals.splice(0..0, [lambda1, lambda0]);
    }
    let mut controlled = Vec::new();
    for &m in controlled_m {
        let psi1m = cf(ScoreTarget::PsiDm { m }, Arm::Treated)?;
        let psi0m = cf(ScoreTarget::PsiDm { m }, Arm::Control)?;
        controlled.push(assemble_controlled(&psi1m, &psi0m)?);
        counterfactuals.extend([psi1m, psi0m]);
    }
    Ok(Estimation { reports, controlled, counterfactuals })
}
