//! Evaluation metrics: entity-span F1, the class imbalance ratio, and
//! Student-t confidence intervals over trials.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{TagKind, TagSet};
use crate::{Error, Result};

/// An entity span `[start, end)` of a given entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity_type: usize,
}

/// Extracts entity spans with conlleval chunk rules: a chunk starts at
/// `B-E`, or at `I-E` when the previous token is not inside an `E` chunk;
/// it ends at `O`, at any `B-`, or at a change of type.
pub fn spans(tags: &[usize], tagset: &TagSet) -> Vec<Span> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for (t, &tag) in tags.iter().enumerate() {
        let kind = tagset.kind(tag);
        let starts = match (kind, open) {
            (TagKind::Outside, _) => false,
            (TagKind::Begin(_), _) => true,
            (TagKind::Inside(e), Some((_, open_e))) => e != open_e,
            (TagKind::Inside(_), None) => true,
        };
        if kind == TagKind::Outside || starts {
            if let Some((start, e)) = open.take() {
                out.push(Span { start, end: t, entity_type: e });
            }
        }
        if starts {
            let e = match kind {
                TagKind::Begin(e) | TagKind::Inside(e) => e,
                TagKind::Outside => unreachable!(),
            };
            open = Some((t, e));
        }
    }
    if let Some((start, e)) = open {
        out.push(Span { start, end: tags.len(), entity_type: e });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted_spans: usize,
    pub gold_spans: usize,
}

impl F1Report {
    /// Neither side contained an entity; `f1` is 0 by convention.
    pub fn no_spans(&self) -> bool {
        self.predicted_spans == 0 && self.gold_spans == 0
    }
}

/// Micro-averaged span F1. A predicted span is a true positive only if a
/// gold span has the same type and the same boundaries.
pub fn span_f1<P, G>(predictions: &[P], gold: &[G], tagset: &TagSet) -> Result<F1Report>
where
    P: AsRef<[usize]>,
    G: AsRef<[usize]>,
{
    if predictions.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "{} predicted sentences vs {} gold sentences",
            predictions.len(),
            gold.len()
        )));
    }
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        let (p, g) = (p.as_ref(), g.as_ref());
        if p.len() != g.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {i}: {} predicted tags vs {} gold tags",
                p.len(),
                g.len()
            )));
        }
        let pred_spans = spans(p, tagset);
        let gold_spans = spans(g, tagset);
        tp += pred_spans.iter().filter(|s| gold_spans.contains(s)).count();
        n_pred += pred_spans.len();
        n_gold += gold_spans.len();
    }
    let precision = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let recall = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(F1Report { precision, recall, f1, true_positives: tp, predicted_spans: n_pred, gold_spans: n_gold })
}

/// Imbalance ratio `(1/C) Σ_c N_c / N_min`. Every class needs at least one
/// sample.
pub fn imbalance_ratio(counts: &[usize]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InvalidInput("imbalance ratio of zero classes".into()));
    }
    if let Some(index) = counts.iter().position(|&n| n == 0) {
        return Err(Error::GammaUndefined { index });
    }
    Ok(ratio(counts.iter().copied()))
}

/// Imbalance ratio value with a flag for absent classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma {
    pub gamma: f64,
    /// Some included class had zero samples, so `N_min` was clamped to 1.
    pub absent_classes: bool,
}

/// Imbalance ratio over the classes selected by `include`, with `N_min`
/// clamped to at least 1 so early pools that miss a rare class still get a
/// value. Returns `gamma = 1` with no classes selected.
pub fn imbalance_ratio_clamped(counts: &[usize], include: &[bool]) -> Gamma {
    assert_eq!(counts.len(), include.len(), "class mask length");
    let selected: Vec<usize> = counts.iter().zip(include).filter(|(_, &inc)| inc).map(|(&n, _)| n).collect();
    if selected.is_empty() {
        return Gamma { gamma: 1.0, absent_classes: false };
    }
    let absent_classes = selected.contains(&0);
    Gamma { gamma: ratio(selected.into_iter()), absent_classes }
}

fn ratio(counts: impl Iterator<Item = usize> + Clone) -> f64 {
    let n_min = counts.clone().min().unwrap_or(1).max(1) as f64;
    let (sum, c) = counts.fold((0.0, 0usize), |(s, c), n| (s + n as f64 / n_min, c + 1));
    sum / c as f64
}

/// Mean with a two-sided 95% Student-t confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

/// `mean ± t_{0.975, n-1} · s / √n`. A single value gets half-width 0.
/// Returns `None` for an empty slice.
pub fn mean_ci95(values: &[f64]) -> Option<MeanCi> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some(MeanCi { mean, half_width: 0.0, n });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = student_t_975(n - 1);
    Some(MeanCi { mean, half_width: t * var.sqrt() / (n as f64).sqrt(), n })
}

/// 0.975 quantile of Student's t with `df` degrees of freedom.
pub fn student_t_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1").inverse_cdf(0.975)
}
