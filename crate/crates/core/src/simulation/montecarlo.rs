use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::generate_dgp;
use super::truth::{closed_form_truth, TrueEffects};
use super::SimulationDesign;
use crate::crossfit::{NuisanceLearner, PostLassoLearner};
use crate::effects::{estimate_effects, EffectKind, EffectReport, EstimatorKind};
use crate::error::Result;

/// Reports of one successful replication, one per estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    pub reports: Vec<EffectReport>,
}

/// Accuracy of one effect estimate across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCell {
    pub estimator: EstimatorKind,
    pub effect: EffectKind,
    pub truth: f64,
    /// Signed mean of `estimate − truth`.
    pub bias: f64,
    pub abias: f64,
    /// Standard deviation of the estimates (divisor R).
    pub sd: f64,
    pub rmse: f64,
    /// Mean of the estimated standard errors.
    pub mean_se: f64,
    /// Standard deviation of the estimated standard errors.
    pub sd_se: f64,
    /// Root mean squared deviation of the estimated standard errors from `sd`.
    pub rmse_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimmingCell {
    pub estimator: EstimatorKind,
    /// Average number of observations dropped per replication.
    pub mean_trimmed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub design: SimulationDesign,
    pub truth: TrueEffects,
    pub successful: usize,
    pub failures: usize,
    /// Fewer than 1% of replications failed.
    pub valid: bool,
    pub cells: Vec<EffectCell>,
    pub trimming: Vec<TrimmingCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub table: MetricsTable,
    pub replications: Vec<ReplicationOutcome>,
    /// `(replication, message)` for each failed replication.
    pub failures: Vec<(usize, String)>,
}

/// Mean and standard deviation with divisor `len`, so that
/// `rmse² = bias² + sd²` holds exactly up to rounding.
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn effect_cell(estimator: EstimatorKind, effect: EffectKind, truth: f64, reports: &[&EffectReport]) -> EffectCell {
    let estimates: Vec<f64> = reports.iter().map(|r| r.get(effect).estimate).collect();
    let ses: Vec<f64> = reports.iter().map(|r| r.get(effect).se).collect();
    let (mean, sd) = moments(&estimates);
    let bias = mean - truth;
    let (mean_se, sd_se) = moments(&ses);
    EffectCell {
        estimator,
        effect,
        truth,
        bias,
        abias: bias.abs(),
        sd,
        rmse: (bias * bias + sd * sd).sqrt(),
        mean_se,
        sd_se,
        rmse_se: ((mean_se - sd).powi(2) + sd_se * sd_se).sqrt(),
    }
}

impl MetricsTable {
    fn build(design: &SimulationDesign, estimators: &[EstimatorKind], outcomes: &[ReplicationOutcome], failures: usize) -> Self {
        let truth = closed_form_truth(design);
        let mut cells = Vec::new();
        let mut trimming = Vec::new();
        for &kind in estimators {
            let reports: Vec<&EffectReport> = outcomes
                .iter()
                .filter_map(|o| o.reports.iter().find(|r| r.estimator == kind))
                .collect();
            if reports.is_empty() {
                continue;
            }
            for effect in EffectKind::ALL {
                cells.push(effect_cell(kind, effect, truth.get(effect), &reports));
            }
            let mean_trimmed = reports.iter().map(|r| r.trimmed_n as f64).sum::<f64>() / reports.len() as f64;
            trimming.push(TrimmingCell { estimator: kind, mean_trimmed });
        }
        let total = outcomes.len() + failures;
        MetricsTable {
            design: design.clone(),
            truth,
            successful: outcomes.len(),
            failures,
            valid: !outcomes.is_empty() && (failures as f64) < 0.01 * total as f64,
            cells,
            trimming,
        }
    }

    pub fn cell(&self, estimator: EstimatorKind, effect: EffectKind) -> Option<&EffectCell> {
        self.cells.iter().find(|c| c.estimator == estimator && c.effect == effect)
    }

    pub fn mean_trimmed(&self, estimator: EstimatorKind) -> Option<f64> {
        self.trimming.iter().find(|t| t.estimator == estimator).map(|t| t.mean_trimmed)
    }

    /// Aligned text table: one block per estimator with true value, abias,
    /// sd, rmse and standard-error metrics per effect, then trimmed counts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.design;
        let _ = writeln!(
            out,
            "n = {}, p = {}, scale = {}, replications = {} ({} failed), folds = {}, trim = {}",
            d.n, d.p, d.coef_scale, self.successful + self.failures, self.failures, d.folds, d.trim
        );
        let _ = write!(out, "{:<10} {:<8}", "estimator", "metric");
        for e in EffectKind::ALL {
            let _ = write!(out, " {:>9}", e.symbol());
        }
        out.push('\n');
        type Metric = fn(&EffectCell) -> f64;
        let metrics: [(&str, Metric); 8] = [
            ("true", |c| c.truth),
            ("abias", |c| c.abias),
            ("sd", |c| c.sd),
            ("rmse", |c| c.rmse),
            ("se mean", |c| c.mean_se),
            ("se sd", |c| c.sd_se),
            ("se rmse", |c| c.rmse_se),
            ("bias", |c| c.bias),
        ];
        for t in &self.trimming {
            for (i, (name, f)) in metrics.iter().enumerate() {
                let label = if i == 0 { t.estimator.name() } else { "" };
                let _ = write!(out, "{label:<10} {name:<8}");
                for e in EffectKind::ALL {
                    let v = self.cell(t.estimator, e).map_or(f64::NAN, f);
                    let _ = write!(out, " {v:>9.4}");
                }
                out.push('\n');
            }
            let _ = writeln!(out, "{:<10} {:<8} {:>9.2}", "", "trimmed", t.mean_trimmed);
        }
        out
    }
}

/// Replication study with the default post-lasso learners.
pub fn run_monte_carlo(design: &SimulationDesign) -> Result<MonteCarloResult> {
    run_monte_carlo_with(design, &EstimatorKind::BOTH, &PostLassoLearner::default())
}

/// Replication `r` uses seed `base_seed + r` for both the data and the folds.
/// Failed replications are counted and excluded from the metrics.
pub fn run_monte_carlo_with(
    design: &SimulationDesign,
    estimators: &[EstimatorKind],
    learner: &dyn NuisanceLearner,
) -> Result<MonteCarloResult> {
    design.validate()?;
    let results: Vec<(usize, Result<Vec<EffectReport>>)> = (0..design.replications)
        .into_par_iter()
        .map(|r| {
            let data = generate_dgp(design, design.replication_seed(r));
            let est = estimate_effects(&data, &design.crossfit_config(r), estimators, &[], learner);
            (r, est.map(|e| e.reports))
        })
        .collect();
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(reports) => replications.push(ReplicationOutcome { replication: r, seed: design.replication_seed(r), reports }),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let table = MetricsTable::build(design, estimators, &replications, failures.len());
    Ok(MonteCarloResult { table, replications, failures })
}
