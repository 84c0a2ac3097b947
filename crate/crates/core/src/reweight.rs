//! Smoothed inverse-frequency class weights and reweighted query selection.
//!
//! Class `k` gets weight `w_k = 1 / (m_k + β·m)`, where `m_k` is the number
//! of labeled tokens tagged `k` and `m` the labeled token total. `β = 0`
//! gives plain inverse frequencies; large `β` flattens the weights towards
//! uniform. A sentence's score is then `Σ_t w_{ŷ^t} q(x^t)`, with `ŷ^t` the
//! model's pseudo-label for token `t` and `q` any token-level acquisition
//! score.
//!
//! Weights are recomputed from the current labeled pool before every query.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::acquisition::{
    aggregate, aggregate_mnlp, mnlp_token_scores, score_bald, score_lc, score_mnlp, score_random, score_se, top_b,
    AcquisitionKind,
};
use crate::alloop::derive_seed;
use crate::corpus::{ClassCounts, LabeledCorpus, Sentence};
use crate::tagger::{ProbMatrix, TaggerModel};
use crate::{Error, Result, Scalar};

/// Default smoothing strength.
pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights<T> {
    weights: Vec<T>,
    beta: f64,
    counts: Option<ClassCounts>,
}

impl<T: Scalar> ClassWeights<T> {
    /// `w_k = 1 / (m_k + β·m)` from token counts.
    pub fn from_counts(counts: &ClassCounts, beta: f64) -> Result<Self> {
        Self::from_counts_named(counts, beta, |k| format!("#{k}"))
    }

    fn from_counts_named(counts: &ClassCounts, beta: f64, name: impl Fn(usize) -> String) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be a finite non-negative number, got {beta}")));
        }
        if counts.total == 0 {
            return Err(Error::InvalidInput("class weights need a non-empty labeled pool".into()));
        }
        if beta == 0.0 {
            if let Some(k) = counts.per_class.iter().position(|&n| n == 0) {
                return Err(Error::AbsentClass { class: name(k) });
            }
        }
        let smoothing = T::of(beta) * T::of(counts.total as f64);
        let weights = counts.per_class.iter().map(|&n| T::one() / (T::of(n as f64) + smoothing)).collect();
        Ok(Self { weights, beta, counts: Some(counts.clone()) })
    }

    /// Wraps an arbitrary positive weight vector.
    pub fn from_raw(weights: Vec<T>, beta: f64, counts: Option<ClassCounts>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(Error::InvalidInput("class weights must be finite and positive".into()));
        }
        Ok(Self { weights, beta, counts })
    }

    /// Equal weights of 1.
    pub fn uniform(classes: usize) -> Self {
        Self { weights: vec![T::one(); classes], beta: f64::INFINITY, counts: None }
    }

    pub fn weight(&self, class: usize) -> T {
        self.weights[class]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The `m_k` and `m` the weights were computed from.
    pub fn counts(&self) -> Option<&ClassCounts> {
        self.counts.as_ref()
    }

    /// `max_k w_k / min_k w_k`.
    pub fn spread(&self) -> T {
        let max = self.weights.iter().copied().fold(T::neg_infinity(), T::max);
        let min = self.weights.iter().copied().fold(T::infinity(), T::min);
        max / min
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self { weights: self.weights.iter().map(|&w| w * factor).collect(), beta: self.beta, counts: self.counts.clone() }
    }
}

/// Weights from the token counts of the labeled pool.
pub fn compute_weights<T: Scalar>(labeled: &LabeledCorpus, beta: f64) -> Result<ClassWeights<T>> {
    let ts = labeled.tagset();
    ClassWeights::from_counts_named(&labeled.class_counts(), beta, |k| ts.name(k).to_string())
}

/// Where per-token class distributions come from during scoring.
pub trait ProbSource<T>: Sync {
    fn probs(&self, sentence: &Sentence) -> Result<ProbMatrix<T>>;

    /// MC-dropout samples for BALD.
    fn mc_probs(&self, sentence: &Sentence, samples: usize, seed: u64) -> Result<Vec<ProbMatrix<T>>>;
}

impl<T: Scalar> ProbSource<T> for TaggerModel<T> {
    fn probs(&self, sentence: &Sentence) -> Result<ProbMatrix<T>> {
        Ok(self.predict_proba(sentence))
    }

    fn mc_probs(&self, sentence: &Sentence, samples: usize, seed: u64) -> Result<Vec<ProbMatrix<T>>> {
        self.predict_proba_mc(sentence, samples, seed)
    }
}

/// Externally computed distributions, keyed by sentence id.
#[derive(Debug, Clone, Default)]
pub struct ImportedProbs<T> {
    expected: HashMap<usize, ProbMatrix<T>>,
    samples: HashMap<usize, Vec<ProbMatrix<T>>>,
}

impl<T: Scalar> ImportedProbs<T> {
    /// Pairs `matrices` with `sentences` in order.
    pub fn new(sentences: &[Sentence], matrices: Vec<ProbMatrix<T>>) -> Result<Self> {
        check_alignment(sentences, &matrices)?;
        let expected = sentences.iter().map(|s| s.id).zip(matrices).collect();
        Ok(Self { expected, samples: HashMap::new() })
    }

    /// Adds MC samples: `samples[j]` holds sample `j` for every sentence, in
    /// the order of `sentences`.
    pub fn with_mc_samples(mut self, sentences: &[Sentence], samples: Vec<Vec<ProbMatrix<T>>>) -> Result<Self> {
        for set in &samples {
            check_alignment(sentences, set)?;
        }
        for set in samples {
            for (s, m) in sentences.iter().zip(set) {
                self.samples.entry(s.id).or_default().push(m);
            }
        }
        Ok(self)
    }
}

fn check_alignment<T: Scalar>(sentences: &[Sentence], matrices: &[ProbMatrix<T>]) -> Result<()> {
    if sentences.len() != matrices.len() {
        return Err(Error::InvalidInput(format!(
            "{} probability matrices for {} sentences",
            matrices.len(),
            sentences.len()
        )));
    }
    for (s, m) in sentences.iter().zip(matrices) {
        if s.len() != m.rows() {
            return Err(Error::InvalidInput(format!(
                "sentence {} has {} tokens but {} probability rows",
                s.id,
                s.len(),
                m.rows()
            )));
        }
    }
    Ok(())
}

impl<T: Scalar> ProbSource<T> for ImportedProbs<T> {
    fn probs(&self, sentence: &Sentence) -> Result<ProbMatrix<T>> {
        self.expected
            .get(&sentence.id)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no imported probabilities for sentence {}", sentence.id)))
    }

    fn mc_probs(&self, sentence: &Sentence, _samples: usize, _seed: u64) -> Result<Vec<ProbMatrix<T>>> {
        self.samples
            .get(&sentence.id)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no imported MC samples for sentence {}", sentence.id)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOptions {
    /// MC-dropout samples per sentence for BALD.
    pub mc_samples: usize,
    /// Seeds random scores and the dropout masks of BALD.
    pub seed: u64,
    /// Keep MNLP's `1/T` factor when weights are applied.
    pub mnlp_normalize: bool,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self { mc_samples: 10, seed: 0, mnlp_normalize: true }
    }
}

/// Selected pool positions, best first, with their sentence scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Query<T> {
    pub positions: Vec<usize>,
    pub scores: Vec<T>,
}

/// Sentence-level score of every pool sentence; weighted when `weights` is
/// given.
pub fn sentence_scores<T: Scalar, S: ProbSource<T> + ?Sized>(
    pool: &[Sentence],
    source: &S,
    kind: AcquisitionKind,
    weights: Option<&ClassWeights<T>>,
    options: &QueryOptions,
) -> Result<Vec<T>> {
    if kind == AcquisitionKind::Random {
        if weights.is_some() {
            return Err(Error::Config("random querying cannot be reweighted".into()));
        }
        return Ok(score_random(pool, options.seed).into_iter().map(T::of).collect());
    }
    pool.par_iter()
        .map(|sentence| -> Result<T> {
            match kind {
                AcquisitionKind::Lc => aggregate(&score_lc(&source.probs(sentence)?), weights),
                AcquisitionKind::Se => aggregate(&score_se(&source.probs(sentence)?), weights),
                AcquisitionKind::Mnlp => {
                    let probs = source.probs(sentence)?;
                    match weights {
                        None => Ok(score_mnlp(&probs).score),
                        Some(w) => aggregate_mnlp(&mnlp_token_scores(&probs), w, options.mnlp_normalize),
                    }
                }
                AcquisitionKind::Bald => {
                    let seed = derive_seed(options.seed, &[sentence.id as u64]);
                    let samples = source.mc_probs(sentence, options.mc_samples, seed)?;
                    aggregate(&score_bald(&samples)?, weights)
                }
                AcquisitionKind::Random => unreachable!(),
            }
        })
        .collect()
}

/// Scores the pool and returns the top `b` sentences. Unweighted when
/// `weights` is `None`.
pub fn query<T: Scalar, S: ProbSource<T> + ?Sized>(
    pool: &[Sentence],
    source: &S,
    kind: AcquisitionKind,
    weights: Option<&ClassWeights<T>>,
    b: usize,
    options: &QueryOptions,
) -> Result<Query<T>> {
    if b > pool.len() {
        return Err(Error::InvalidInput(format!("query size {b} exceeds pool of {} sentences", pool.len())));
    }
    let scores = sentence_scores(pool, source, kind, weights, options)?;
    let positions = top_b(&scores, b);
    let scores = positions.iter().map(|&p| scores[p]).collect();
    Ok(Query { positions, scores })
}

/// Reweighted selection: pseudo-label every token, weight its base score by
/// `w_{ŷ^t}`, sum per sentence and take the top `b`.
pub fn reweighted_query<T: Scalar, S: ProbSource<T> + ?Sized>(
    pool: &[Sentence],
    source: &S,
    kind: AcquisitionKind,
    weights: &ClassWeights<T>,
    b: usize,
    options: &QueryOptions,
) -> Result<Query<T>> {
    if kind == AcquisitionKind::Random {
        return Err(Error::Config("random querying cannot be reweighted".into()));
    }
    query(pool, source, kind, Some(weights), b, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabeledSentence, TagSet};

    fn counts(per_class: &[usize]) -> ClassCounts {
        ClassCounts { per_class: per_class.to_vec(), total: per_class.iter().sum() }
    }

    #[test]
    fn formula_example() {
        let w = ClassWeights::<f64>::from_counts(&counts(&[80, 15, 5]), 0.1).unwrap();
        let expected = [1.0 / 90.0, 1.0 / 25.0, 1.0 / 15.0];
        for (a, b) in w.weights().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((w.weight(0) - 0.011111).abs() < 1e-5 && (w.weight(2) - 0.066667).abs() < 1e-5);
    }

    #[test]
    fn unsmoothed_is_inverse_frequency() {
        let w = ClassWeights::<f64>::from_counts(&counts(&[10, 10, 10]), 0.0).unwrap();
        assert_eq!(w.weights(), [0.1, 0.1, 0.1]);
        let err = ClassWeights::<f64>::from_counts(&counts(&[10, 0, 10]), 0.0).unwrap_err();
        assert!(matches!(err, Error::AbsentClass { .. }));
    }

    #[test]
    fn absent_class_gets_max_weight_when_smoothed() {
        let w = ClassWeights::<f64>::from_counts(&counts(&[90, 10, 0]), 0.1).unwrap();
        assert_eq!(w.weight(2), 1.0 / 10.0);
        assert!(w.weight(2) > w.weight(1) && w.weight(1) > w.weight(0));
    }

    #[test]
    fn large_beta_is_uniform() {
        let w = ClassWeights::<f64>::from_counts(&counts(&[1000, 3, 1]), 1e9).unwrap();
        assert!((w.spread() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        assert!(matches!(ClassWeights::<f64>::from_counts(&counts(&[0, 0]), 0.1), Err(Error::InvalidInput(_))));
        assert!(matches!(ClassWeights::<f64>::from_counts(&counts(&[1, 1]), -0.1), Err(Error::Config(_))));
        assert!(matches!(ClassWeights::<f64>::from_counts(&counts(&[1, 1]), f64::NAN), Err(Error::Config(_))));
    }

    #[test]
    fn compute_weights_names_absent_class() {
        let ts = TagSet::from_entity_types(&["PER"]).unwrap();
        let item = LabeledSentence::new(Sentence::new(0, ["a", "b"]).unwrap(), vec![0, 1]).unwrap();
        let corpus = LabeledCorpus::new(ts, vec![item]).unwrap();
        match compute_weights::<f64>(&corpus, 0.0) {
            Err(Error::AbsentClass { class }) => assert_eq!(class, "I-PER"),
            other => panic!("{other:?}"),
        }
        let w = compute_weights::<f64>(&corpus, 0.1).unwrap();
        assert_eq!(w.counts().unwrap().total, 2);
    }

    #[test]
    fn imported_alignment_checked() {
        let s = vec![Sentence::new(4, ["a", "b"]).unwrap()];
        let bad = ProbMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(ImportedProbs::new(&s, vec![bad]).is_err());
        let ok = ProbMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let src = ImportedProbs::new(&s, vec![ok.clone()]).unwrap();
        assert_eq!(src.probs(&s[0]).unwrap(), ok);
        assert!(src.mc_probs(&s[0], 2, 0).is_err());
    }
}
