//! Plain-text layouts for training summaries and explanation reports.

use std::fmt::Write;

use acbr::explain::ExplanationReport;
use acbr::weighting::relevance_table;
use acbr::TrainedModel;

pub fn training_summary(model: &TrainedModel) -> String {
    let t = &model.training;
    let mut out = String::new();
    let _ = writeln!(out, "variant {}  K = {}  metric {}  {} folds", model.variant(), model.k, t.metric.as_str(), t.folds);
    let _ = writeln!(out, "EWCBR baseline {:.4}", t.ewcbr_score);
    if !t.candidates.is_empty() {
        let _ = writeln!(out, "{:<10} {:>10} {:>10} {:>8}", "scoring", "cv", "unit exp", "evals");
        for c in &t.candidates {
            let chosen = if Some(c.method) == model.scoring { " *" } else { "" };
            let _ = writeln!(
                out,
                "{:<10} {:>10.4} {:>10.4} {:>8}{chosen}",
                c.method.as_str(),
                c.cv_score,
                c.epcbr_score,
                c.evaluations
            );
        }
    }
    let _ = writeln!(out, "cross-validated {} {:.4}", t.metric.as_str(), model.cv_score);
    for (metric, score) in &model.cv_scores {
        let _ = writeln!(out, "  {metric:<9} {score:.4}");
    }
    if let Some(p) = &model.probability {
        let _ = writeln!(
            out,
            "probability weights: log-likelihood {:.4} (uniform {:.4}) over {} cases",
            p.log_likelihood, p.uniform_log_likelihood, p.cases
        );
        if let Some(w) = &p.warning {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    let names: Vec<(&str, &str)> =
        (0..model.n_features()).map(|j| (model.schema.name(j), model.schema.description(j))).collect();
    out.push_str("feature relevance:\n");
    out.push_str(&relevance_table(&names, &model.similarity.weights));
    out
}

fn cell(v: Option<f64>) -> String {
    match v {
        None => "-".to_string(),
        Some(x) if x.abs() >= 100.0 => format!("{x:.2}"),
        Some(x) => format!("{x:.4}"),
    }
}

pub fn explanation(model: &TrainedModel, r: &ExplanationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "case {}: {} with probability {:.4} (K = {})",
        r.query_id, r.label, r.probability, r.k
    );

    let t = &r.neighbors;
    let width = t.descriptions.iter().map(String::len).max().unwrap_or(8).max("Profit margin (%)".len());
    let _ = write!(out, "\n{:<width$} {:>14}", "", t.query_id);
    for row in &t.rows {
        let _ = write!(out, " {:>14}", row.id);
    }
    out.push('\n');
    for (j, desc) in t.descriptions.iter().enumerate() {
        let _ = write!(out, "{desc:<width$} {:>14}", cell(t.query[j]));
        for row in &t.rows {
            let _ = write!(out, " {:>14}", cell(row.values[j]));
        }
        out.push('\n');
    }
    if t.query_profit_margin.is_some() || t.rows.iter().any(|r| r.profit_margin.is_some()) {
        let _ = write!(out, "{:<width$} {:>14}", "Profit margin (%)", cell(t.query_profit_margin));
        for row in &t.rows {
            let _ = write!(out, " {:>14}", cell(row.profit_margin));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<width$} {:>14}", "Label", "?");
    for row in &t.rows {
        let _ = write!(out, " {:>14}", row.label.as_u8());
    }
    out.push('\n');
    let _ = write!(out, "{:<width$} {:>14}", "Similarity", "");
    for row in &t.rows {
        let _ = write!(out, " {:>14.4}", row.similarity);
    }
    out.push('\n');

    out.push_str("\nfeature relevance:\n");
    let names: Vec<(&str, &str)> =
        (0..model.n_features()).map(|j| (model.schema.name(j), model.schema.description(j))).collect();
    out.push_str(&relevance_table(&names, &model.similarity.weights));

    if let Some(s) = &r.shapley {
        let mut order: Vec<usize> = (0..s.values.len()).collect();
        order.sort_by(|&a, &b| s.values[b].abs().total_cmp(&s.values[a].abs()).then(a.cmp(&b)));
        let _ = writeln!(out, "\nShapley values (baseline {:.4}, prediction {:.4}):", s.baseline, s.full);
        for j in order {
            let _ = write!(out, "  {:<width$} {:+.6}", model.schema.description(j), s.values[j]);
            if s.std_errors[j] > 0.0 {
                let _ = write!(out, "  (se {:.6})", s.std_errors[j]);
            }
            out.push('\n');
        }
        let status = if s.residual.abs() < 1e-9 { "passed" } else { "approximate" };
        let _ = writeln!(out, "efficiency check: residual {:.3e} ({status})", s.residual);
        let _ = writeln!(out, "note: {}", r.note);
    }

    if let Some(w) = &r.whatif {
        let _ = writeln!(out, "\nwhat-if trajectory from {} toward {}:", w.base_id, w.target_id);
        for (i, step) in w.steps.iter().enumerate() {
            let name = step.name.as_deref().unwrap_or("(base)");
            let _ = writeln!(out, "  {i:>3}  {name:<width$} {:>14}  {:.4}", cell(step.value), step.probability);
        }
    }
    out
}
