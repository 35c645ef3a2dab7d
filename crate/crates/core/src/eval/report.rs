use std::fmt::Write;

use serde::Serialize;

use super::{anova_oneway, AnovaResult, EvalError, EvalReport};

/// Machine-readable evaluation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub reports: Vec<EvalReport>,
    /// Present when at least two classifiers were compared.
    pub anova: Option<AnovaResult>,
}

impl EvalSummary {
    /// Runs the ANOVA across the reports' fold accuracies when possible.
    pub fn new(reports: Vec<EvalReport>) -> Result<Self, EvalError> {
        let anova = if reports.len() >= 2 {
            let groups: Vec<Vec<f64>> = reports.iter().map(|r| r.fold_accuracies.clone()).collect();
            Some(anova_oneway(&groups)?)
        } else {
            None
        };
        Ok(Self { reports, anova })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn to_text(&self) -> String {
        compare_report(&self.reports, self.anova.as_ref())
    }
}

fn format_p(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

/// Fixed-width comparison table, rows sorted by descending mean accuracy
/// (stable), with an ANOVA footer line.
pub fn compare_report(reports: &[EvalReport], anova: Option<&AnovaResult>) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    let width = rows
        .iter()
        .map(|r| r.classifier.chars().count())
        .max()
        .unwrap_or(0)
        .max(10);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>12}  {:>8}  {:>5}",
        "Classifier", "Mean Acc (%)", "Std", "Folds"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 33));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.2}  {:>8.2}  {:>5}",
            r.classifier,
            100.0 * r.mean,
            100.0 * r.std,
            r.fold_accuracies.len()
        );
    }
    match anova {
        Some(a) => {
            let f = if a.f.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.2}", a.f)
            };
            let _ = writeln!(out, "F({},{})={f}, p={}", a.dfb, a.dfw, format_p(a.p));
        }
        None => {
            let _ = writeln!(out, "F: n/a (fewer than two classifiers)");
        }
    }
    out
}
