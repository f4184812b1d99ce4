mod args;
mod error;
mod input;
mod report;

use std::io::Write;
use std::time::Instant;

use clap::Parser;
use medml::json::to_canonical_string;
use medml::simulation::{run_monte_carlo_with, run_verify_suites, SigmaKind, SimulationDesign, VerifyOptions};
use medml::{estimate_effects, CrossFitConfig, EstimatorKind, PostLassoLearner};
use serde_json::{json, Value};

use args::{Cli, Command, Common, EstimateArgs, EstimationArgs, Format, ScoreChoice, SigmaChoice, SimulateArgs, VerifyArgs};
use error::CliError;
use input::{load_csv, Roles};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
    };
    if let Err(e) = result {
        if !matches!(e, CliError::VerificationFailed) {
            eprintln!("error: {e}");
        }
        std::process::exit(e.exit_code());
    }
}

fn estimators(score: ScoreChoice) -> Vec<EstimatorKind> {
    match score {
        ScoreChoice::Theorem1 => vec![EstimatorKind::Theorem1],
        ScoreChoice::Theorem2 => vec![EstimatorKind::Theorem2],
        ScoreChoice::Both => EstimatorKind::BOTH.to_vec(),
    }
}

fn score_name(score: ScoreChoice) -> &'static str {
    match score {
        ScoreChoice::Theorem1 => "theorem1",
        ScoreChoice::Theorem2 => "theorem2",
        ScoreChoice::Both => "both",
    }
}

fn check_estimation(a: &EstimationArgs) -> Result<(), CliError> {
    if a.folds < 2 {
        return Err(CliError::Usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    if !(a.trim > 0.0 && a.trim < 0.5) {
        return Err(CliError::Usage(format!("--trim must lie in (0, 0.5), got {}", a.trim)));
    }
    Ok(())
}

fn timings(common: &Common, start: Instant) -> Value {
    if common.timings {
        json!({ "seconds": start.elapsed().as_secs_f64() })
    } else {
        Value::Null
    }
}

fn emit(common: &Common, default: Format, doc: &Value, table: &str) -> Result<(), CliError> {
    let text = match common.format.unwrap_or(default) {
        Format::Json => to_canonical_string(doc).map_err(|e| CliError::Usage(e.to_string()))?,
        Format::Table => table.to_string(),
    };
    match &common.output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn estimate(a: EstimateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    check_estimation(&a.estimation)?;
    let roles = [&a.outcome, &a.treatment, &a.mediator];
    if roles[0] == roles[1] || roles[0] == roles[2] || roles[1] == roles[2] {
        return Err(CliError::Usage("outcome, treatment and mediator must be distinct columns".into()));
    }
    if let Some(c) = a.covariates.iter().flatten().find(|c| roles.contains(c)) {
        return Err(CliError::Usage(format!("column `{c}` cannot be both a covariate and a role column")));
    }
    let loaded = load_csv(
        &a.input,
        &Roles { outcome: &a.outcome, treatment: &a.treatment, mediator: &a.mediator, covariates: a.covariates.as_deref() },
    )?;
    let mut controlled_m = a.controlled_m.clone();
    controlled_m.sort_unstable();
    controlled_m.dedup();
    let cfg = CrossFitConfig { folds: a.estimation.folds, seed: a.seed, trim: a.estimation.trim };
    let est = estimate_effects(&loaded.data, &cfg, &estimators(a.estimation.score), &controlled_m, &PostLassoLearner::default())?;

    let (effects, counterfactuals, trimming) = report::estimation_sections(&est);
    let doc = json!({
        "config": {
            "command": "estimate",
            "input": a.input.display().to_string(),
            "outcome": a.outcome,
            "treatment": a.treatment,
            "mediator": a.mediator,
            "covariates": loaded.covariates,
            "folds": cfg.folds,
            "trim": cfg.trim,
            "score": score_name(a.estimation.score),
            "controlled_m": controlled_m,
            "seed": cfg.seed,
            "rows": {
                "read": loaded.rows_read,
                "used": loaded.data.n(),
                "rejected": loaded.rows_rejected,
                "rejected_by_column": loaded.rejected_by_column,
            },
        },
        "effects": effects,
        "counterfactuals": counterfactuals,
        "trimming": trimming,
        "timings": timings(&a.common, start),
    });
    let mut table = format!(
        "n = {}, p = {}, folds = {}, trim = {}, seed = {}\n",
        loaded.data.n(),
        loaded.data.p(),
        cfg.folds,
        cfg.trim,
        cfg.seed
    );
    if loaded.rows_rejected > 0 {
        table.push_str(&format!("{} rows with missing fields rejected\n", loaded.rows_rejected));
    }
    table.push_str(&report::estimation_table(&est));
    emit(&a.common, Format::Json, &doc, &table)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    check_estimation(&a.estimation)?;
    let design = SimulationDesign {
        n: a.n,
        p: a.p,
        coef_scale: a.scale,
        sigma: match a.sigma {
            SigmaChoice::Toeplitz => SigmaKind::Toeplitz,
            SigmaChoice::Identity => SigmaKind::Identity,
        },
        replications: a.reps,
        folds: a.estimation.folds,
        trim: a.estimation.trim,
        base_seed: a.seed,
        ..Default::default()
    };
    design.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_monte_carlo_with(&design, &estimators(a.estimation.score), &PostLassoLearner::default())?;
    let failures: Vec<Value> = result
        .failures
        .iter()
        .map(|(r, msg)| json!({ "replication": r, "message": msg }))
        .collect();
    let doc = json!({
        "config": { "command": "simulate", "score": score_name(a.estimation.score), "design": design },
        "metrics": result.table,
        "failures": failures,
        "timings": timings(&a.common, start),
    });
    let mut table = result.table.to_text();
    for (r, msg) in &result.failures {
        table.push_str(&format!("replication {r} failed: {msg}\n"));
    }
    emit(&a.common, Format::Table, &doc, &table)
}

fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let start = Instant::now();
    if a.n_mc < 100 {
        return Err(CliError::Usage(format!("--n-mc must be at least 100, got {}", a.n_mc)));
    }
    let opts = VerifyOptions { n_mc: a.n_mc, seed: a.seed, inject_non_orthogonal: a.inject_non_orthogonal, ..Default::default() };
    let report = run_verify_suites(&opts)?;
    let doc = json!({
        "config": { "command": "verify", "n_mc": opts.n_mc, "seed": opts.seed, "step": opts.step },
        "suites": report.suites,
        "passed": report.passed,
        "timings": timings(&a.common, start),
    });
    emit(&a.common, Format::Table, &doc, &report::verify_table(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed)
    }
}
