use std::fmt::Write as _;

use medml::simulation::{Relation, VerifyReport};
use medml::{CounterfactualEstimate, EffectEstimate, EffectKind, EffectReport, Estimation};
use serde_json::{json, Map, Value};

pub fn effect_value(e: &EffectEstimate) -> Value {
    json!({ "estimate": e.estimate, "se": e.se, "p": e.p_value })
}

fn report_value(r: &EffectReport) -> Value {
    let mut m = Map::new();
    for kind in EffectKind::ALL {
        m.insert(kind.name().into(), effect_value(r.get(kind)));
    }
    m.insert("mean_y00".into(), effect_value(&r.mean_y00));
    Value::Object(m)
}

fn counterfactual_value(c: &CounterfactualEstimate) -> Value {
    let se = medml::effect_se(&c.scores, None).ok();
    json!({
        "name": c.label(),
        "estimate": c.point,
        "se": se,
        "retained": c.retained_n,
        "trimmed": c.trimmed_n,
    })
}

/// `effects`, `counterfactuals` and `trimming` sections of an estimation report.
pub fn estimation_sections(est: &Estimation) -> (Value, Value, Value) {
    let mut effects = Map::new();
    let mut trimming = Map::new();
    for r in &est.reports {
        effects.insert(r.estimator.name().into(), report_value(r));
        trimming.insert(r.estimator.name().into(), json!({ "retained": r.retained_n, "trimmed": r.trimmed_n }));
    }
    if !est.controlled.is_empty() {
        let mut effs = Map::new();
        let mut trims = Map::new();
        for c in &est.controlled {
            let key = format!("m{}", c.m);
            effs.insert(key.clone(), effect_value(&c.effect));
            trims.insert(key, json!({ "retained": c.retained_n, "trimmed": c.trimmed_n }));
        }
        effects.insert("controlled".into(), Value::Object(effs));
        trimming.insert("controlled".into(), Value::Object(trims));
    }
    let counterfactuals = est.counterfactuals.iter().map(counterfactual_value).collect();
    (Value::Object(effects), Value::Array(counterfactuals), Value::Object(trimming))
}

fn fmt_p(p: Option<f64>) -> String {
    p.map_or_else(|| "-".into(), |p| format!("{p:.4}"))
}

pub fn estimation_table(est: &Estimation) -> String {
    let mut out = String::new();
    for r in &est.reports {
        let _ = writeln!(out, "{}", r.estimator.name());
        let _ = writeln!(out, "  {:<12} {:>10} {:>10} {:>8}", "effect", "estimate", "se", "p");
        let rows = EffectKind::ALL
            .iter()
            .map(|k| (k.symbol().to_string(), *r.get(*k)))
            .chain(std::iter::once(("E[Y(0,M(0))]".to_string(), r.mean_y00)));
        for (name, e) in rows {
            let _ = writeln!(out, "  {:<12} {:>10.4} {:>10.4} {:>8}", name, e.estimate, e.se, fmt_p(e.p_value));
        }
        let _ = writeln!(out, "  retained {}, trimmed {}", r.retained_n, r.trimmed_n);
    }
    for c in &est.controlled {
        let e = c.effect;
        let _ = writeln!(
            out,
            "controlled direct effect, m = {}: {:.4} (se {:.4}, p {}), retained {}, trimmed {}",
            c.m, e.estimate, e.se, fmt_p(e.p_value), c.retained_n, c.trimmed_n
        );
    }
    out
}

pub fn verify_table(report: &VerifyReport) -> String {
    let mut out = String::new();
    for suite in &report.suites {
        let _ = writeln!(out, "{} [{}]", suite.suite, if suite.passed { "pass" } else { "FAIL" });
        for row in &suite.rows {
            let rel = match row.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            let _ = writeln!(
                out,
                "  {:<4} {:<44} {:>12.4e} {rel} {:.2e}",
                if row.passed { "ok" } else { "FAIL" },
                row.name,
                row.statistic,
                row.threshold
            );
        }
    }
    let _ = writeln!(out, "overall: {}", if report.passed { "pass" } else { "FAIL" });
    out
}
