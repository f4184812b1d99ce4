//! Per-observation score functions and the trimming rule.
//!
//! | target | score |
//! |---|---|
//! | `Psi` | `I{D=d}·f(M|1−d,X)/(p_d(X)f(M|d,X))·(Y−μ(d,M,X)) + I{D=1−d}/(1−p_d(X))·(μ(d,M,X)−ν) + ν` |
//! | `PsiStar` | `I{D=d}·(1−p_d(M,X))/(p_d(M,X)(1−p_d(X)))·(Y−μ(d,M,X)) + I{D=1−d}/(1−p_d(X))·(μ(d,M,X)−ω) + ω` |
//! | `Alpha` | `I{D=d}·(Y−μ(d,X))/p_d(X) + μ(d,X)` |
//! | `PsiDm` | `I{D=d}I{M=m}·(Y−μ(d,m,X))/(f(m|d,X)p_d(X)) + μ(d,m,X)` |

use serde::{Deserialize, Serialize};

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceRow;

/// The observed triple `(Y, D, M)` of one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub y: f64,
    pub d: u8,
    pub m: u8,
}

/// Which counterfactual mean a score targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTarget {
    /// `E[Y(d, M(1−d))]` through the efficient score.
    Psi,
    /// `E[Y(d, M(1−d))]` through the Bayes-rule representation.
    PsiStar,
    /// `E[Y(d, M(d))] = E[Y(d)]`.
    Alpha,
    /// `E[Y(d, m)]`.
    PsiDm { m: u8 },
}

impl ScoreTarget {
    pub fn label(&self, d: Arm) -> String {
        let d = d.value();
        match self {
            ScoreTarget::Psi => format!("psi_{d}"),
            ScoreTarget::PsiStar => format!("psi_star_{d}"),
            ScoreTarget::Alpha => format!("lambda_{d}"),
            ScoreTarget::PsiDm { m } => format!("psi_{d}{m}"),
        }
    }
}

pub fn score_psi(obs: &Observation, nu: &NuisanceRow, d: Arm) -> f64 {
    let mu = nu.mu(d, obs.m);
    let nu_v = nu.nu[d.index()];
    let p = nu.p_x(d);
    if obs.d == d.value() {
        nu.f(obs.m, d.other()) / (p * nu.f(obs.m, d)) * (obs.y - mu) + nu_v
    } else {
        (mu - nu_v) / (1.0 - p) + nu_v
    }
}

pub fn score_psi_star(obs: &Observation, nu: &NuisanceRow, d: Arm) -> f64 {
    let mu = nu.mu(d, obs.m);
    let omega = nu.omega[d.index()];
    let p = nu.p_x(d);
    if obs.d == d.value() {
        let pm = nu.p_mx(d);
        (1.0 - pm) / (pm * (1.0 - p)) * (obs.y - mu) + omega
    } else {
        (mu - omega) / (1.0 - p) + omega
    }
}

pub fn score_alpha(obs: &Observation, nu: &NuisanceRow, d: Arm) -> f64 {
    let mu = nu.mu_dx[d.index()];
    if obs.d == d.value() {
        (obs.y - mu) / nu.p_x(d) + mu
    } else {
        mu
    }
}

pub fn score_psi_dm(obs: &Observation, nu: &NuisanceRow, d: Arm, m: u8) -> f64 {
    let mu = nu.mu(d, m);
    if obs.d == d.value() && obs.m == m {
        (obs.y - mu) / (nu.f(m, d) * nu.p_x(d)) + mu
    } else {
        mu
    }
}

/// Evaluates the score for `target` and arm `d`.
pub fn score(target: ScoreTarget, obs: &Observation, nu: &NuisanceRow, d: Arm) -> f64 {
    match target {
        ScoreTarget::Psi => score_psi(obs, nu, d),
        ScoreTarget::PsiStar => score_psi_star(obs, nu, d),
        ScoreTarget::Alpha => score_alpha(obs, nu, d),
        ScoreTarget::PsiDm { m } => score_psi_dm(obs, nu, d, m),
    }
}

/// Smallest denominator quantity of the score; the observed mediator `m_obs`
/// enters the `Psi` and `PsiStar` rules.
pub fn trim_statistic(nu: &NuisanceRow, target: ScoreTarget, d: Arm, m_obs: u8) -> f64 {
    let p = nu.p_x(d);
    match target {
        ScoreTarget::Psi => (p * nu.f(m_obs, d)).min(1.0 - p),
        ScoreTarget::PsiStar => (nu.p_mx(d) * (1.0 - p)).min(1.0 - p),
        ScoreTarget::Alpha => p,
        ScoreTarget::PsiDm { m } => nu.f(m, d) * p,
    }
}

/// True when a denominator quantity of the score falls below `threshold`.
/// NaN statistics (missing nuisances) are trimmed.
pub fn trim_flag(nu: &NuisanceRow, target: ScoreTarget, d: Arm, m_obs: u8, threshold: f64) -> bool {
    !(trim_statistic(nu, target, d, m_obs) >= threshold)
}

/// Score values for every observation together with trimming flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub target: ScoreTarget,
    pub d: Arm,
    /// One value per observation in dataset order; entries of trimmed rows are
    /// kept for inspection but never enter a mean.
    pub values: Vec<f64>,
    pub trimmed: Vec<bool>,
    pub threshold: f64,
}

impl ScoreVector {
    /// Evaluates `target` on every row and applies the trimming rule.
    pub fn evaluate(
        target: ScoreTarget,
        d: Arm,
        observations: &[Observation],
        nuisances: &[NuisanceRow],
        threshold: f64,
    ) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 0.5) {
            return Err(Error::InvalidParameter(format!("trimming threshold must lie in (0, 0.5), got {threshold}")));
        }
        if observations.len() != nuisances.len() {
            return Err(Error::LengthMismatch {
                what: "nuisance rows",
                expected: observations.len(),
                got: nuisances.len(),
            });
        }
        let mut values = Vec::with_capacity(observations.len());
        let mut trimmed = Vec::with_capacity(observations.len());
        for (row, (obs, nu)) in observations.iter().zip(nuisances).enumerate() {
            let t = trim_flag(nu, target, d, obs.m, threshold);
            let v = score(target, obs, nu, d);
            if !t && !v.is_finite() {
                return Err(Error::NumericalOverflow { row });
            }
            values.push(v);
            trimmed.push(t);
        }
        Ok(ScoreVector { target, d, values, trimmed, threshold })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn retained_n(&self) -> usize {
        self.trimmed.iter().filter(|t| !**t).count()
    }

    pub fn trimmed_n(&self) -> usize {
        self.len() - self.retained_n()
    }

    pub fn retained_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.trimmed).filter(|(_, t)| !**t).map(|(v, _)| *v)
    }

    /// Mean over retained observations.
    pub fn mean(&self) -> Result<f64> {
        let n = self.retained_n();
        if n == 0 {
            return Err(Error::EmptyRetainedSet);
        }
        Ok(self.retained_values().sum::<f64>() / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(p1: f64, f1: [f64; 2], mu: [[f64; 2]; 2]) -> NuisanceRow {
        let mut r = NuisanceRow { p1_x: p1, m1_given_d: f1, mu, ..Default::default() };
        r.fill_nu();
        r
    }

    #[test]
    fn psi_hand_value() {
        // d=1, D=1, Y=2, μ=1, p₁=0.5, f(M|·)=0.5, ν=1
        let nu = row(0.5, [0.5, 0.5], [[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(nu.nu[1], 1.0);
        let obs = Observation { y: 2.0, d: 1, m: 1 };
        assert_eq!(score_psi(&obs, &nu, Arm::Treated), 3.0);
    }

    #[test]
    fn psi_star_hand_value() {
        let nu = NuisanceRow { p1_x: 0.5, p1_mx: 0.5, mu: [[1.0; 2]; 2], omega: [1.0, 1.0], ..Default::default() };
        let obs = Observation { y: 2.0, d: 1, m: 0 };
        assert_eq!(score_psi_star(&obs, &nu, Arm::Treated), 3.0);
        // D = 1−d with μ = ω: the bracket vanishes
        let obs = Observation { y: 9.0, d: 0, m: 0 };
        assert_eq!(score_psi_star(&obs, &nu, Arm::Treated), 1.0);
    }

    #[test]
    fn alpha_hand_value() {
        let nu = NuisanceRow { p1_x: 0.5, mu_dx: [1.0, 1.0], ..Default::default() };
        assert_eq!(score_alpha(&Observation { y: 2.0, d: 0, m: 1 }, &nu, Arm::Control), 3.0);
        assert_eq!(score_alpha(&Observation { y: 2.0, d: 1, m: 1 }, &nu, Arm::Control), 1.0);
    }

    #[test]
    fn psi_dm_hand_value() {
        let nu = row(0.5, [0.5, 0.5], [[1.0, 1.0], [1.0, 1.0]]);
        let obs = Observation { y: 2.0, d: 1, m: 0 };
        assert_eq!(score_psi_dm(&obs, &nu, Arm::Treated, 0), 5.0);
        assert_eq!(score_psi_dm(&obs, &nu, Arm::Treated, 1), 1.0);
    }

    #[test]
    fn psi_collapses_to_nu_when_outcome_is_fitted() {
        let nu = row(0.3, [0.2, 0.7], [[0.4, 0.4], [1.5, 1.5]]);
        for (d, m) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let obs = Observation { y: nu.mu[1][m as usize], d, m };
            assert!((score_psi(&obs, &nu, Arm::Treated) - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn trimming_rules() {
        let nu = row(0.5, [0.5, 0.5], [[0.0; 2]; 2]);
        for target in [ScoreTarget::Psi, ScoreTarget::Alpha, ScoreTarget::PsiDm { m: 1 }] {
            assert!(!trim_flag(&nu, target, Arm::Treated, 1, 0.05));
        }
        let low = row(0.04, [0.5, 0.5], [[0.0; 2]; 2]);
        let low = NuisanceRow { p1_mx: 0.04, ..low };
        for target in [ScoreTarget::Psi, ScoreTarget::PsiStar, ScoreTarget::Alpha, ScoreTarget::PsiDm { m: 0 }] {
            assert!(trim_flag(&low, target, Arm::Treated, 0, 0.05), "{target:?}");
        }
        // 1 − p_d(X) small trims the mediation scores only
        let high = NuisanceRow { p1_mx: 0.5, ..row(0.97, [0.5, 0.5], [[0.0; 2]; 2]) };
        assert!(trim_flag(&high, ScoreTarget::Psi, Arm::Treated, 0, 0.05));
        assert!(trim_flag(&high, ScoreTarget::PsiStar, Arm::Treated, 0, 0.05));
        assert!(!trim_flag(&high, ScoreTarget::Alpha, Arm::Treated, 0, 0.05));
        // missing nuisances are never retained
        assert!(trim_flag(&NuisanceRow::default(), ScoreTarget::Alpha, Arm::Treated, 0, 0.05));
    }

    #[test]
    fn evaluate_rejects_bad_threshold_and_lengths() {
        let nu = row(0.5, [0.5, 0.5], [[0.0; 2]; 2]);
        let obs = [Observation { y: 0.0, d: 1, m: 1 }];
        assert!(ScoreVector::evaluate(ScoreTarget::Psi, Arm::Treated, &obs, &[nu], 0.5).is_err());
        assert!(ScoreVector::evaluate(ScoreTarget::Psi, Arm::Treated, &obs, &[], 0.05).is_err());
    }

    #[test]
    fn mean_of_all_trimmed_is_an_error() {
        let sv = ScoreVector {
            target: ScoreTarget::Alpha,
            d: Arm::Treated,
            values: vec![1.0],
            trimmed: vec![true],
            threshold: 0.05,
        };
        assert_eq!(sv.mean(), Err(Error::EmptyRetainedSet));
    }

    proptest! {
        #[test]
        fn trim_flags_ignore_outcomes(
            p in 0.001f64..0.999, f0 in 0.001f64..0.999, f1 in 0.001f64..0.999, pm in 0.001f64..0.999,
            ys in proptest::collection::vec(-1e3f64..1e3, 8), ms in proptest::collection::vec(0u8..2, 8),
        ) {
            let nu = NuisanceRow { p1_mx: pm, mu_dx: [0.5, 0.6], omega: [0.7, 0.8], ..row(p, [f0, f1], [[0.1, 0.2], [0.3, 0.4]]) };
            let nus = vec![nu; 8];
            let obs: Vec<Observation> = ys.iter().zip(&ms).map(|(&y, &m)| Observation { y, d: m, m }).collect();
            let mut shuffled = obs.clone();
            shuffled.rotate_left(3);
            for (o, s) in shuffled.iter_mut().zip(&obs) {
                o.m = s.m;
                o.d = s.d;
            }
            for target in [ScoreTarget::Psi, ScoreTarget::PsiStar, ScoreTarget::Alpha, ScoreTarget::PsiDm { m: 1 }] {
                for d in Arm::BOTH {
                    let a = ScoreVector::evaluate(target, d, &obs, &nus, 0.05).unwrap();
                    let b = ScoreVector::evaluate(target, d, &shuffled, &nus, 0.05).unwrap();
                    prop_assert_eq!(a.trimmed, b.trimmed);
                }
            }
        }
    }
}
