//! Confusion-matrix metrics. Insolvent is the positive class.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Same counts with the roles of the classes exchanged.
    pub fn swapped(&self) -> Confusion {
        Confusion { tp: self.tn, tn: self.tp, fp: self.fn_, fn_: self.fp }
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, o: Confusion) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

pub fn confusion(predictions: &[Label], truth: &[Label]) -> Result<Confusion> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: predictions.len() });
    }
    if truth.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut c = Confusion::default();
    for (p, t) in predictions.iter().zip(truth) {
        match (p, t) {
            (Label::Insolvent, Label::Insolvent) => c.tp += 1,
            (Label::Solvent, Label::Solvent) => c.tn += 1,
            (Label::Insolvent, Label::Solvent) => c.fp += 1,
            (Label::Solvent, Label::Insolvent) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub f_measure: f64,
    pub beta: f64,
    pub g_mean: f64,
    /// `(1 + TPR - FPR) / 2`, i.e. balanced accuracy, not the ROC area.
    pub auc_formula: f64,
    pub mcc: f64,
    /// Metrics whose denominator was zero; they are reported as 0.
    pub degenerate: Vec<String>,
}

pub fn compute_metrics(c: &Confusion, beta: f64) -> MetricReport {
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else {
            degenerate.push(name.to_string());
            0.0
        }
    };
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let accuracy = ratio("accuracy", tp + tn, tp + tn + fp + fn_);
    let fpr = ratio("fpr", fp, tn + fp);
    let fnr = ratio("fnr", fn_, fn_ + tp);
    let tpr = ratio("tpr", tp, tp + fn_);
    let tnr = ratio("tnr", tn, fp + tn);
    let b2 = beta * beta;
    let f_measure = ratio("f_measure", (1.0 + b2) * tp, (1.0 + b2) * tp + b2 * fn_ + fp);
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio("mcc", tp * tn - fp * fn_, mcc_den);
    MetricReport {
        accuracy,
        fpr,
        fnr,
        tpr,
        tnr,
        f_measure,
        beta,
        g_mean: (tnr * tpr).sqrt(),
        auc_formula: (1.0 + tpr - fpr) / 2.0,
        mcc,
        degenerate,
    }
}

/// Area under the ROC curve of `scores` (higher = more likely insolvent),
/// via the Mann-Whitney statistic with ties counted one half.
pub fn roc_auc(scores: &[f64], truth: &[Label]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(truth).filter(|(_, t)| t.is_insolvent()).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(truth).filter(|(_, t)| !t.is_insolvent()).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Metrics available as training objectives and table columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Auc,
    Fmeasure,
    Gmeans,
    Mcc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Accuracy, Metric::Auc, Metric::Fmeasure, Metric::Gmeans, Metric::Mcc];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Fmeasure => "fmeasure",
            Metric::Gmeans => "gmeans",
            Metric::Mcc => "mcc",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Auc => "AUC",
            Metric::Fmeasure => "F-measure",
            Metric::Gmeans => "G-means",
            Metric::Mcc => "MCC",
        }
    }

    pub fn value(self, r: &MetricReport) -> f64 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::Auc => r.auc_formula,
            Metric::Fmeasure => r.f_measure,
            Metric::Gmeans => r.g_mean,
            Metric::Mcc => r.mcc,
        }
    }

    /// Maps the metric onto `[0, 1]`, higher is better. MCC is shifted from
    /// `[-1, 1]`.
    pub fn normalized(self, value: f64) -> f64 {
        match self {
            Metric::Mcc => (value + 1.0) / 2.0,
            _ => value,
        }
    }

    /// Whether an evaluation set must contain both classes.
    pub fn needs_both_classes(self) -> bool {
        self != Metric::Accuracy
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s || (s == "gmean" && *m == Metric::Gmeans) || (s == "f1" && *m == Metric::Fmeasure))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric `{s}`")))
    }
}

/// Rows of named metric reports, rendered as a row-per-model table with the
/// best value in each column flagged by `*`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<(String, MetricReport)>,
}

impl MetricTable {
    fn best(&self, m: Metric) -> Option<f64> {
        self.rows.iter().map(|(_, r)| m.value(r)).fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}", "Model");
        for m in Metric::ALL {
            let _ = write!(out, "  {:>10}", m.title());
        }
        out.push('\n');
        for (name, r) in &self.rows {
            let _ = write!(out, "{name:<width$}");
            for m in Metric::ALL {
                let v = m.value(r);
                let flag = if self.best(m) == Some(v) { "*" } else { " " };
                let _ = write!(out, "  {:>9.4}{flag}", v);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for m in Metric::ALL {
            let _ = write!(out, ",{},{}_best", m.as_str(), m.as_str());
        }
        out.push('\n');
        for (name, r) in &self.rows {
            out.push_str(name);
            for m in Metric::ALL {
                let v = m.value(r);
                let _ = write!(out, ",{v},{}", u8::from(self.best(m) == Some(v)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use Label::{Insolvent as I, Solvent as S};

    #[test]
    fn confusion_examples() {
        let c = confusion(&[I, I, S], &[I, I, S]).unwrap();
        assert_eq!(c, Confusion { tp: 2, tn: 1, fp: 0, fn_: 0 });
        let c = confusion(&[S, S, I], &[I, I, S]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&[I], &[I, S]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn confusion_matches_tally() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pred: Vec<Label> = (0..1000).map(|_| if rng.random::<bool>() { I } else { S }).collect();
        let truth: Vec<Label> = (0..1000).map(|_| if rng.random::<bool>() { I } else { S }).collect();
        let c = confusion(&pred, &truth).unwrap();
        let count = |p: Label, t: Label| pred.iter().zip(&truth).filter(|(a, b)| **a == p && **b == t).count() as u64;
        assert_eq!(c, Confusion { tp: count(I, I), tn: count(S, S), fp: count(I, S), fn_: count(S, I) });
    }

    #[test]
    fn hand_fixture() {
        let r = compute_metrics(&Confusion { tp: 50, tn: 40, fp: 10, fn_: 0 }, 1.0);
        assert_abs_diff_eq!(r.accuracy, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tpr, 1.0);
        assert_abs_diff_eq!(r.tnr, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(r.auc_formula, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(r.g_mean, 0.8944, epsilon = 1e-4);
        assert_abs_diff_eq!(r.f_measure, 0.9091, epsilon = 1e-4);
        assert_abs_diff_eq!(r.mcc, 0.8165, epsilon = 1e-4);
        assert!(r.degenerate.is_empty());
    }

    #[test]
    fn perfect_classifier() {
        let r = compute_metrics(&Confusion { tp: 7, tn: 9, fp: 0, fn_: 0 }, 1.0);
        for v in [r.accuracy, r.tpr, r.tnr, r.f_measure, r.g_mean, r.auc_formula, r.mcc] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn auc_formula_arithmetic() {
        // TPR 0.8, TNR 0.7
        let r = compute_metrics(&Confusion { tp: 8, fn_: 2, tn: 7, fp: 3 }, 1.0);
        assert_abs_diff_eq!(r.auc_formula, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_denominators_flag_instead_of_failing() {
        let r = compute_metrics(&Confusion { tp: 0, tn: 5, fp: 0, fn_: 0 }, 1.0);
        assert_eq!(r.tpr, 0.0);
        assert!(r.degenerate.contains(&"tpr".to_string()));
        assert!(r.degenerate.contains(&"mcc".to_string()));
    }

    #[test]
    fn roc_auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &[I, I, S]), Some(1.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[I, S]), Some(0.5));
        assert_eq!(roc_auc(&[0.5], &[I]), None);
    }

    #[test]
    fn metric_parsing_and_table() {
        assert_eq!("G-means".parse::<Metric>().unwrap(), Metric::Gmeans);
        assert_eq!("MCC".parse::<Metric>().unwrap(), Metric::Mcc);
        assert!("brier".parse::<Metric>().is_err());
        let good = compute_metrics(&Confusion { tp: 5, tn: 5, fp: 0, fn_: 0 }, 1.0);
        let bad = compute_metrics(&Confusion { tp: 3, tn: 4, fp: 1, fn_: 2 }, 1.0);
        let t = MetricTable { rows: vec![("A".into(), good), ("B".into(), bad)] };
        let text = t.to_text();
        assert!(text.lines().nth(1).unwrap().contains("1.0000*"));
        assert_eq!(t.to_csv().lines().count(), 3);
    }

    proptest! {
        #[test]
        fn metric_identities(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
            prop_assume!(tp + fn_ > 0 && tn + fp > 0);
            let c = Confusion { tp, tn, fp, fn_ };
            let r = compute_metrics(&c, 1.0);
            prop_assert!((r.tpr + r.fnr - 1.0).abs() < 1e-12);
            prop_assert!((r.tnr + r.fpr - 1.0).abs() < 1e-12);
            prop_assert!((r.auc_formula - (r.tpr + r.tnr) / 2.0).abs() < 1e-12);
            prop_assert!(r.g_mean <= r.auc_formula + 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r.mcc));
            let s = compute_metrics(&c.swapped(), 1.0);
            prop_assert!((s.mcc - r.mcc).abs() < 1e-12);
        }
    }
}
