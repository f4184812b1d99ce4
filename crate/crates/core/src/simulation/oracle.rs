//! Exact nuisance functions of the simulation design, optionally corrupted.

use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use super::{SimulationDesign, TREATMENT_COEF};
use crate::crossfit::{FoldPredictions, NuisanceLearner, NuisancePlan};
use crate::data::Dataset;
use crate::error::Result;
use crate::learners::{clip_prob, standard_normal};
use crate::nuisance::NuisanceRow;

/// Parameters that determine the true nuisance functions.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    pub beta: Vec<f64>,
    pub mediator_coef: f64,
    pub interaction: f64,
}

impl OracleModel {
    pub fn from_design(design: &SimulationDesign) -> Self {
        OracleModel { beta: design.beta(), mediator_coef: design.mediator_coef, interaction: design.interaction }
    }

    pub fn index(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta).map(|(x, b)| x * b).sum()
    }
}

/// True nuisances at index `s = xᵀβ` and observed mediator `m_obs`:
/// `p₁(x) = Φ(s)`, `f(1|d,x) = Φ(0.5d + s)`,
/// `μ(d,m,x) = 0.5d + b_M·m + b_DM·dm + s`, and the implied `μ(d,x)`, `ν`, `ω`
/// and `p₁(m,x)` (Bayes' rule).
pub fn oracle_row(model: &OracleModel, s: f64, m_obs: u8) -> NuisanceRow {
    let phi = |v: f64| clip_prob(standard_normal().cdf(v));
    let (b_m, b_dm) = (model.mediator_coef, model.interaction);
    let p1 = phi(s);
    let f1 = [phi(s), phi(TREATMENT_COEF + s)];
    let mu = |d: f64, m: f64| TREATMENT_COEF * d + b_m * m + b_dm * d * m + s;
    let mut row = NuisanceRow {
        p1_x: p1,
        m1_given_d: f1,
        mu: [[mu(0.0, 0.0), mu(0.0, 1.0)], [mu(1.0, 0.0), mu(1.0, 1.0)]],
        mu_dx: [mu(0.0, 0.0) + b_m * f1[0], mu(1.0, 0.0) + (b_m + b_dm) * f1[1]],
        omega: [mu(0.0, 0.0) + b_m * f1[1], mu(1.0, 0.0) + (b_m + b_dm) * f1[0]],
        ..Default::default()
    };
    row.fill_nu();
    let fm = |d: usize| if m_obs == 1 { f1[d] } else { 1.0 - f1[d] };
    let joint1 = p1 * fm(1);
    row.p1_mx = clip_prob(joint1 / (joint1 + (1.0 - p1) * fm(0)));
    row
}

/// A fixed wrong replacement for one nuisance function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// `μ(d,m,x) + c`; `ν` follows from the shifted `μ`.
    MuShift(f64),
    /// `f(m|d,x)` replaced by `f(m|1−d,x)`; `ν` follows.
    MediatorSwap,
    /// `p₁(x) ≡ c`.
    PropensityConstant(f64),
    /// `p₁(m,x) ≡ c`.
    PropensityMxConstant(f64),
    /// `ω + c`.
    OmegaShift(f64),
    /// `μ(d,x) + c`.
    ArmMeanShift(f64),
}

impl Corruption {
    pub fn apply(&self, row: &mut NuisanceRow) {
        match *self {
            Corruption::MuShift(c) => {
                row.mu.iter_mut().flatten().for_each(|v| *v += c);
                row.fill_nu();
            }
            Corruption::MediatorSwap => {
                row.m1_given_d.swap(0, 1);
                row.fill_nu();
            }
            Corruption::PropensityConstant(c) => row.p1_x = c,
            Corruption::PropensityMxConstant(c) => row.p1_mx = c,
            Corruption::OmegaShift(c) => row.omega.iter_mut().for_each(|v| *v += c),
            Corruption::ArmMeanShift(c) => row.mu_dx.iter_mut().for_each(|v| *v += c),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Corruption::MuShift(c) => format!("mu+{c}"),
            Corruption::MediatorSwap => "f swapped".into(),
            Corruption::PropensityConstant(c) => format!("p(x)={c}"),
            Corruption::PropensityMxConstant(c) => format!("p(m,x)={c}"),
            Corruption::OmegaShift(c) => format!("omega+{c}"),
            Corruption::ArmMeanShift(c) => format!("mu(d,x)+{c}"),
        }
    }
}

/// Returns the true nuisances (after `corruptions`) regardless of the
/// training rows; used to isolate score behaviour from learner error.
#[derive(Debug, Clone)]
pub struct OracleLearner {
    pub model: OracleModel,
    pub corruptions: Vec<Corruption>,
}

impl OracleLearner {
    pub fn new(design: &SimulationDesign) -> Self {
        OracleLearner { model: OracleModel::from_design(design), corruptions: Vec::new() }
    }

    pub fn row(&self, data: &Dataset, i: usize) -> NuisanceRow {
        let mut row = oracle_row(&self.model, self.model.index(data.x_row(i)), data.mediator()[i]);
        for c in &self.corruptions {
            c.apply(&mut row);
        }
        row
    }
}

impl NuisanceLearner for OracleLearner {
    fn fit_predict(&self, data: &Dataset, _: &[usize], eval: &[usize], plan: NuisancePlan, _: u64) -> Result<FoldPredictions> {
        let rows: Vec<NuisanceRow> = eval.iter().map(|&i| self.row(data, i)).collect();
        Ok(FoldPredictions {
            efficient: (plan.efficient || plan.ate).then(|| rows.clone()),
            nested: plan.nested.then_some(rows),
        })
    }
}
