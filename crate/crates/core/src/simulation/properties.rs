//! Numerical checks of the scores under the exact nuisances of the simulation
//! design: the moment condition, Neyman orthogonality (finite differences),
//! multiple robustness, the Bayes-rule identity between the two mediation
//! scores, and the decomposition identities of estimated effects.

use serde::{Deserialize, Serialize};

use super::dgp::{generate_dgp, generate_units, SimulatedUnits};
use super::oracle::{oracle_row, Corruption, OracleModel};
use super::truth::{closed_form_truth, TrueEffects};
use super::SimulationDesign;
use crate::crossfit::PostLassoLearner;
use crate::data::Arm;
use crate::effects::{estimate_effects, EstimatorKind};
use crate::error::Result;
use crate::nuisance::NuisanceRow;
use crate::scores::{score, Observation, ScoreTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One measured statistic against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub statistic: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl SuiteRow {
    fn new(name: String, statistic: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => statistic <= threshold,
            Relation::AtLeast => statistic >= threshold,
        };
        SuiteRow { name, statistic, relation, threshold, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub rows: Vec<SuiteRow>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: &str, rows: Vec<SuiteRow>) -> Self {
        let passed = rows.iter().all(|r| r.passed);
        SuiteReport { suite: suite.into(), rows, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub design: SimulationDesign,
    /// Oracle sample size for the moment, orthogonality, robustness and
    /// Bayes-identity suites.
    pub n_mc: usize,
    pub seed: u64,
    /// Finite-difference step.
    pub step: f64,
    /// Substitute the plug-in mean `ν` for the efficient score in the
    /// orthogonality suite (the suite must then fail).
    pub inject_non_orthogonal: bool,
    /// Sample size of the estimation run behind the decomposition suite.
    pub decomposition_n: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            design: SimulationDesign::default(),
            n_mc: 100_000,
            seed: 20_240_901,
            step: 1e-3,
            inject_non_orthogonal: false,
            decomposition_n: 1000,
        }
    }
}

/// Units of the design together with their exact nuisance rows.
pub struct OracleSample {
    pub units: SimulatedUnits,
    pub observations: Vec<Observation>,
    pub rows: Vec<NuisanceRow>,
}

impl OracleSample {
    pub fn draw(design: &SimulationDesign, n: usize, seed: u64) -> Self {
        let units = generate_units(design, n, seed);
        let model = OracleModel::from_design(design);
        let observations = (0..n).map(|i| Observation { y: units.y[i], d: units.d[i], m: units.m[i] }).collect();
        let rows = (0..n).map(|i| oracle_row(&model, units.index[i], units.m[i])).collect();
        OracleSample { units, observations, rows }
    }
}

fn all_targets() -> Vec<(ScoreTarget, Arm)> {
    let targets = [ScoreTarget::Psi, ScoreTarget::PsiStar, ScoreTarget::Alpha, ScoreTarget::PsiDm { m: 0 }, ScoreTarget::PsiDm { m: 1 }];
    targets.into_iter().flat_map(|t| Arm::BOTH.map(|d| (t, d))).collect()
}

fn truth_of(truth: &TrueEffects, target: ScoreTarget, d: Arm) -> f64 {
    match target {
        ScoreTarget::Psi | ScoreTarget::PsiStar => truth.cross_world(d.value()),
        ScoreTarget::Alpha => truth.arm_mean(d.value()),
        ScoreTarget::PsiDm { m } => truth.psi_dm[d.index()][m as usize],
    }
}

/// Mean and standard deviation of `values`.
fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standardized deviation `|mean ψ − Ψ₀| / (sd/√n)` under the given rows.
fn standardized_bias(sample: &OracleSample, rows: &[NuisanceRow], target: ScoreTarget, d: Arm, truth: f64) -> (f64, f64) {
    let (mean, sd) = mean_sd(sample.observations.iter().zip(rows).map(|(o, r)| score(target, o, r, d)));
    let se = sd / (sample.observations.len() as f64).sqrt();
    ((mean - truth).abs() / se, mean - truth)
}

/// `|mean ψ(W, η₀) − Ψ₀| ≤ 3·sd/√n` for every score and arm.
pub fn moment_check(sample: &OracleSample, truth: &TrueEffects) -> SuiteReport {
    let rows = all_targets()
        .into_iter()
        .map(|(target, d)| {
            let (z, _) = standardized_bias(sample, &sample.rows, target, d, truth_of(truth, target, d));
            SuiteRow::new(format!("{} |bias|/se", target.label(d)), z, Relation::AtMost, 3.0)
        })
        .collect();
    SuiteReport::new("moment condition", rows)
}

/// Perturbation direction `h` in `η₀ + r·h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Zero,
    /// `μ(d,m,x) + 0.5`, with `ν` following `μ`.
    MuConstant,
    /// `μ(d,m,x) + 0.5·tanh(x₁)`.
    MuTilt,
    /// `p₁(x) + 0.1`.
    PropensityConstant,
    /// `p₁(x) + 0.1·tanh(x₁)`.
    PropensityTilt,
    /// `f(1|d,x) + 0.1`, with `ν` following `f`.
    MediatorConstant,
    /// `p₁(m,x) + 0.1`.
    PropensityMxConstant,
    /// `ω + 0.5`.
    OmegaConstant,
    /// `μ(d,x) + 0.5`.
    ArmMeanConstant,
}

impl Direction {
    fn perturb(self, row: &NuisanceRow, x1: f64, r: f64) -> NuisanceRow {
        let mut out = *row;
        match self {
            Direction::Zero => {}
            Direction::MuConstant | Direction::MuTilt => {
                let h = if self == Direction::MuTilt { 0.5 * x1.tanh() } else { 0.5 };
                out.mu.iter_mut().flatten().for_each(|v| *v += r * h);
                out.fill_nu();
            }
            Direction::PropensityConstant => out.p1_x += 0.1 * r,
            Direction::PropensityTilt => out.p1_x += 0.1 * x1.tanh() * r,
            Direction::MediatorConstant => {
                out.m1_given_d.iter_mut().for_each(|v| *v += 0.1 * r);
                out.fill_nu();
            }
            Direction::PropensityMxConstant => out.p1_mx += 0.1 * r,
            Direction::OmegaConstant => out.omega.iter_mut().for_each(|v| *v += 0.5 * r),
            Direction::ArmMeanConstant => out.mu_dx.iter_mut().for_each(|v| *v += 0.5 * r),
        }
        out
    }

    /// Directions along which the score of `target` varies.
    pub fn relevant(target: ScoreTarget) -> &'static [Direction] {
        use Direction::*;
        match target {
            ScoreTarget::Psi | ScoreTarget::PsiDm { .. } => {
                &[MuConstant, MuTilt, PropensityConstant, PropensityTilt, MediatorConstant]
            }
            ScoreTarget::PsiStar => {
                &[MuConstant, MuTilt, PropensityConstant, PropensityTilt, PropensityMxConstant, OmegaConstant]
            }
            ScoreTarget::Alpha => &[PropensityConstant, PropensityTilt, ArmMeanConstant],
        }
    }
}

/// Score whose Gateaux derivative is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrthogonalityScore {
    Target(ScoreTarget),
    /// The plug-in `ν(1−d, X)`: identifies the same mean but is not orthogonal.
    PlugIn,
}

impl OrthogonalityScore {
    fn eval(self, obs: &Observation, row: &NuisanceRow, d: Arm) -> f64 {
        match self {
            OrthogonalityScore::Target(t) => score(t, obs, row, d),
            OrthogonalityScore::PlugIn => row.nu[d.index()],
        }
    }

    fn label(self, d: Arm) -> String {
        match self {
            OrthogonalityScore::Target(t) => t.label(d),
            OrthogonalityScore::PlugIn => format!("plug_in_{}", d.value()),
        }
    }
}

/// Central difference `[ḡ(+step) − ḡ(−step)] / (2·step)` of the mean score
/// along `direction`.
pub fn orthogonality_check(sample: &OracleSample, score_kind: OrthogonalityScore, d: Arm, direction: Direction, step: f64) -> f64 {
    let g = |r: f64| {
        sample
            .observations
            .iter()
            .zip(&sample.rows)
            .zip(&sample.units.x1)
            .map(|((o, row), &x1)| score_kind.eval(o, &direction.perturb(row, x1, r), d))
            .sum::<f64>()
            / sample.observations.len() as f64
    };
    (g(step) - g(-step)) / (2.0 * step)
}

/// Orthogonality rows: `|g′(0)| ≤ 0.02` for each score and relevant direction,
/// plus a power row requiring the plug-in score's derivative to be at least 0.25.
fn orthogonality_suite(sample: &OracleSample, step: f64, inject: bool) -> SuiteReport {
    let mut rows = Vec::new();
    for (target, d) in all_targets() {
        let kind = match target {
            ScoreTarget::Psi if inject => OrthogonalityScore::PlugIn,
            t => OrthogonalityScore::Target(t),
        };
        for &dir in Direction::relevant(target) {
            let g = orthogonality_check(sample, kind, d, dir, step);
            rows.push(SuiteRow::new(format!("{} d/dr along {dir:?}", kind.label(d)), g.abs(), Relation::AtMost, 0.02));
        }
    }
    for d in Arm::BOTH {
        let g = orthogonality_check(sample, OrthogonalityScore::PlugIn, d, Direction::MuConstant, step);
        rows.push(SuiteRow::new(format!("plug_in_{} d/dr along MuConstant (power)", d.value()), g.abs(), Relation::AtLeast, 0.25));
    }
    SuiteReport::new("neyman orthogonality", rows)
}

/// Single corruptions each score tolerates, and a double corruption it does not.
fn corruption_grid(target: ScoreTarget) -> (Vec<Corruption>, [Corruption; 2]) {
    use Corruption::*;
    let mu = MuShift(0.5);
    let p = PropensityConstant(0.3);
    match target {
        ScoreTarget::Psi | ScoreTarget::PsiDm { .. } => (vec![mu, MediatorSwap, p], [mu, p]),
        ScoreTarget::PsiStar => (vec![mu, OmegaShift(0.5), p, PropensityMxConstant(0.3)], [mu, PropensityMxConstant(0.3)]),
        ScoreTarget::Alpha => (vec![ArmMeanShift(0.5), p], [ArmMeanShift(0.5), p]),
    }
}

/// Single misspecification keeps `|bias|/se ≤ 3`; the double one must push
/// it above 3 (power check).
pub fn robustness_check(sample: &OracleSample, truth: &TrueEffects) -> SuiteReport {
    let corrupt = |cs: &[Corruption]| -> Vec<NuisanceRow> {
        sample
            .rows
            .iter()
            .map(|r| {
                let mut r = *r;
                cs.iter().for_each(|c| c.apply(&mut r));
                r
            })
            .collect()
    };
    let mut rows = Vec::new();
    for (target, d) in all_targets() {
        let t = truth_of(truth, target, d);
        let (singles, double) = corruption_grid(target);
        for c in singles {
            let (z, _) = standardized_bias(sample, &corrupt(&[c]), target, d, t);
            rows.push(SuiteRow::new(format!("{} with {}", target.label(d), c.label()), z, Relation::AtMost, 3.0));
        }
        let (z, _) = standardized_bias(sample, &corrupt(&double), target, d, t);
        rows.push(SuiteRow::new(
            format!("{} with {} and {} (power)", target.label(d), double[0].label(), double[1].label()),
            z,
            Relation::AtLeast,
            3.0,
        ));
    }
    SuiteReport::new("multiple robustness", rows)
}

/// Per-observation agreement of the two mediation-score weights and of the
/// scores themselves under exact nuisances.
pub fn bayes_identity_check(sample: &OracleSample) -> SuiteReport {
    let mut weight_gap: f64 = 0.0;
    let mut score_gap: f64 = 0.0;
    for (o, row) in sample.observations.iter().zip(&sample.rows) {
        for d in Arm::BOTH {
            let w1 = row.f(o.m, d.other()) / (row.p_x(d) * row.f(o.m, d));
            let w2 = (1.0 - row.p_mx(d)) / (row.p_mx(d) * (1.0 - row.p_x(d)));
            weight_gap = weight_gap.max((w1 - w2).abs());
            let s1 = score(ScoreTarget::Psi, o, row, d);
            let s2 = score(ScoreTarget::PsiStar, o, row, d);
            score_gap = score_gap.max((s1 - s2).abs());
        }
    }
    SuiteReport::new(
        "bayes identity",
        vec![
            SuiteRow::new("max |weight difference|".into(), weight_gap, Relation::AtMost, 1e-10),
            SuiteRow::new("max |score difference|".into(), score_gap, Relation::AtMost, 1e-10),
        ],
    )
}

/// Runs both estimators on one simulated sample and measures
/// `|θ(1) + δ(0) − Δ|` and `|θ(0) + δ(1) − Δ|`.
pub fn decomposition_check(design: &SimulationDesign, seed: u64) -> Result<SuiteReport> {
    let data = generate_dgp(design, seed);
    let est = estimate_effects(&data, &design.crossfit_config(0), &EstimatorKind::BOTH, &[], &PostLassoLearner::default())?;
    let mut rows = Vec::new();
    for r in &est.reports {
        let total = r.total.estimate;
        let gap1 = (r.direct_treated.estimate + r.indirect_control.estimate - total).abs();
        let gap0 = (r.direct_control.estimate + r.indirect_treated.estimate - total).abs();
        let name = r.estimator.name();
        rows.push(SuiteRow::new(format!("{name} |θ(1)+δ(0)−Δ|"), gap1, Relation::AtMost, 1e-12));
        rows.push(SuiteRow::new(format!("{name} |θ(0)+δ(1)−Δ|"), gap0, Relation::AtMost, 1e-12));
    }
    Ok(SuiteReport::new("decomposition identities", rows))
}

/// All suites. The decomposition suite uses a reduced design (p = 50).
pub fn run_verify_suites(opts: &VerifyOptions) -> Result<VerifyReport> {
    opts.design.validate()?;
    let sample = OracleSample::draw(&opts.design, opts.n_mc, opts.seed);
    let truth = closed_form_truth(&opts.design);
    let small = SimulationDesign { n: opts.decomposition_n, p: opts.design.p.min(50), ..opts.design.clone() };
    let suites = vec![
        moment_check(&sample, &truth),
        orthogonality_suite(&sample, opts.step, opts.inject_non_orthogonal),
        robustness_check(&sample, &truth),
        bayes_identity_check(&sample),
        decomposition_check(&small, opts.seed)?,
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { suites, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> OracleSample {
        OracleSample::draw(&SimulationDesign { p: 10, ..Default::default() }, 20_000, 5)
    }

    #[test]
    fn zero_direction_has_zero_derivative() {
        let s = sample();
        for (target, d) in all_targets() {
            assert_eq!(orthogonality_check(&s, OrthogonalityScore::Target(target), d, Direction::Zero, 1e-3), 0.0);
        }
    }

    #[test]
    fn plug_in_derivative_is_half() {
        let s = sample();
        let g = orthogonality_check(&s, OrthogonalityScore::PlugIn, Arm::Treated, Direction::MuConstant, 1e-3);
        assert!((g - 0.5).abs() < 1e-9, "{g}");
    }

    #[test]
    fn suite_rows_compare_in_the_stated_direction() {
        assert!(SuiteRow::new("a".into(), 1.0, Relation::AtMost, 2.0).passed);
        assert!(!SuiteRow::new("a".into(), 1.0, Relation::AtLeast, 2.0).passed);
        assert!(!SuiteRow::new("a".into(), f64::NAN, Relation::AtMost, 2.0).passed);
    }

    #[test]
    fn bayes_identity_on_small_sample() {
        assert!(bayes_identity_check(&sample()).passed);
    }
}
