//! Exact-span precision, recall and F1.
//!
//! A predicted span counts as a true positive only when a gold span has the
//! same start, end and label. Counts are pooled over documents (micro
//! averaging); a zero denominator makes the ratio 0.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, EntitySpan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.precision(), self.recall())
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean `2PR / (P + R)`, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-label counts for one document's gold and predicted spans.
pub fn match_spans(gold: &[EntitySpan], pred: &[EntitySpan]) -> BTreeMap<String, Counts> {
    let mut out: BTreeMap<String, Counts> = BTreeMap::new();
    let mut unmatched: BTreeSet<&EntitySpan> = gold.iter().collect();
    for p in pred {
        let c = out.entry(p.label.clone()).or_default();
        if unmatched.remove(p) {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for g in unmatched {
        out.entry(g.label.clone()).or_default().fn_ += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Counts,
    pub per_label: BTreeMap<String, Counts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    /// Micro-averaged scores over all labels.
    pub fn micro(&self) -> Scores {
        scores(&self.overall)
    }

    /// Unweighted mean of per-label scores; F1 is the mean of label F1s.
    pub fn macro_scores(&self) -> Scores {
        let n = self.per_label.len();
        if n == 0 {
            return Scores {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            };
        }
        let (p, r, f) = self.per_label.values().fold((0.0, 0.0, 0.0), |(p, r, f), c| {
            (p + c.precision(), r + c.recall(), f + c.f1())
        });
        let n = n as f64;
        Scores {
            precision: p / n,
            recall: r / n,
            f1: f / n,
        }
    }

    pub fn label(&self, label: &str) -> Scores {
        scores(&self.per_label.get(label).copied().unwrap_or_default())
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1()
    }
}

fn scores(c: &Counts) -> Scores {
    Scores {
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
    }
}

/// Compare two datasets document by document (matched by id).
pub fn compute_report(gold: &Dataset, pred: &Dataset) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, &[EntitySpan]> = pred
        .documents
        .iter()
        .map(|d| (d.id.as_str(), d.spans.as_slice()))
        .collect();
    if by_id.len() != gold.len() || pred.len() != gold.len() {
        return Err(Error::IdMismatch(alloc::format!(
            "gold has {} documents, prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut report = EvalReport::default();
    for label in gold.label_set.iter() {
        report.per_label.insert(label.clone(), Counts::default());
    }
    for doc in &gold.documents {
        let p = by_id
            .get(doc.id.as_str())
            .ok_or_else(|| Error::IdMismatch(doc.id.clone()))?;
        for (label, c) in match_spans(&doc.spans, p) {
            report.per_label.entry(label).or_default().add(c);
            report.overall.add(c);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: usize, b: usize, l: &str) -> EntitySpan {
        EntitySpan::new(a, b, l)
    }

    fn pool(m: &BTreeMap<String, Counts>) -> Counts {
        let mut c = Counts::default();
        m.values().for_each(|x| c.add(*x));
        c
    }

    #[test]
    fn boundary_error_is_one_fp_and_one_fn() {
        let gold = [s(0, 5, "CHEMICAL"), s(10, 14, "DISEASE")];
        let pred = [s(0, 5, "CHEMICAL"), s(10, 13, "DISEASE")];
        let c = pool(&match_spans(&gold, &pred));
        assert_eq!(c, Counts { tp: 1, fp: 1, fn_: 1 });
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.5, 0.5, 0.5));
    }

    #[test]
    fn identity_is_perfect() {
        let gold = [s(0, 5, "CHEMICAL"), s(10, 14, "DISEASE")];
        let c = pool(&match_spans(&gold, &gold));
        assert_eq!((c.precision(), c.recall(), c.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let c = pool(&match_spans(&[s(0, 5, "CHEMICAL")], &[]));
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.0, 0.0, 0.0));
        assert_eq!(Counts::default().f1(), 0.0);
    }

    #[test]
    fn wrong_label_does_not_match() {
        let c = pool(&match_spans(&[s(0, 5, "CHEMICAL")], &[s(0, 5, "DISEASE")]));
        assert_eq!(c, Counts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn duplicate_prediction_matches_once() {
        let c = pool(&match_spans(&[s(0, 5, "CHEMICAL")], &[s(0, 5, "CHEMICAL"), s(0, 5, "CHEMICAL")]));
        assert_eq!(c, Counts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn macro_average() {
        let mut r = EvalReport::default();
        r.per_label.insert("A".into(), Counts { tp: 1, fp: 0, fn_: 0 });
        r.per_label.insert("B".into(), Counts { tp: 0, fp: 1, fn_: 1 });
        assert_eq!(r.macro_scores().f1, 0.5);
    }
}
