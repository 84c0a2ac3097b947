//! Token-level acquisition scores and their sentence aggregates.
//!
//! Every scorer is oriented so that a larger value means a more informative
//! sentence; selection always takes the top of the ranking. Logarithms are
//! natural and floored at [`LOG_FLOOR`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::reweight::ClassWeights;
use crate::tagger::{argmax, ProbMatrix};
use crate::{Error, Result, Scalar};

/// Smallest probability fed to a logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcquisitionKind {
    Random,
    /// Least confidence.
    Lc,
    /// Sequence entropy.
    Se,
    /// Maximum normalized log-probability.
    Mnlp,
    /// Bayesian active learning by disagreement (MC dropout).
    Bald,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 5] =
        [AcquisitionKind::Random, AcquisitionKind::Lc, AcquisitionKind::Se, AcquisitionKind::Mnlp, AcquisitionKind::Bald];

    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Random => "random",
            AcquisitionKind::Lc => "lc",
            AcquisitionKind::Se => "se",
            AcquisitionKind::Mnlp => "mnlp",
            AcquisitionKind::Bald => "bald",
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown acquisition function {s:?} (expected random|lc|se|mnlp|bald)")))
    }
}

/// Per-token scores `q(x^t)` and pseudo-labels `ŷ^t` of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenScores<T> {
    pub scores: Vec<T>,
    pub pseudo_labels: Vec<usize>,
    /// Number of classes the pseudo-labels index into.
    pub classes: usize,
}

impl<T: Scalar> TokenScores<T> {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn ln_floor<T: Scalar>(p: T) -> T {
    p.max(T::of(LOG_FLOOR)).ln()
}

fn entropy<T: Scalar>(row: &[T]) -> T {
    row.iter().filter(|&&p| p > T::zero()).map(|&p| -p * ln_floor(p)).sum()
}

fn per_token<T: Scalar>(probs: &ProbMatrix<T>, f: impl Fn(&[T], usize) -> T) -> TokenScores<T> {
    let pseudo_labels = probs.pseudo_labels();
    let scores = probs.iter_rows().zip(&pseudo_labels).map(|(row, &y)| f(row, y)).collect();
    TokenScores { scores, pseudo_labels, classes: probs.classes() }
}

/// Least confidence: `1 - max_c p(y_c | x^t)`.
pub fn score_lc<T: Scalar>(probs: &ProbMatrix<T>) -> TokenScores<T> {
    per_token(probs, |row, y| T::one() - row[y])
}

/// Shannon entropy `-Σ_c p log p` of each token's distribution.
pub fn score_se<T: Scalar>(probs: &ProbMatrix<T>) -> TokenScores<T> {
    per_token(probs, |row, _| entropy(row))
}

/// Negative log-probability of the predicted class, `-log p(ŷ^t | x^t)`.
/// The per-token term of MNLP; its mean over the sentence is the MNLP score.
pub fn mnlp_token_scores<T: Scalar>(probs: &ProbMatrix<T>) -> TokenScores<T> {
    per_token(probs, |row, y| -ln_floor(row[y]))
}

/// MNLP of a sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mnlp<T> {
    /// `-(1/T) Σ_t log p(ŷ^t)`: larger is more uncertain.
    pub score: T,
    /// `(1/T) Σ_t log p(ŷ^t)` as usually written.
    pub raw: T,
}

pub fn score_mnlp<T: Scalar>(probs: &ProbMatrix<T>) -> Mnlp<T> {
    let tokens = mnlp_token_scores(probs);
    let score = exact_sum(tokens.scores.iter().copied()) / T::of(tokens.len() as f64);
    Mnlp { score, raw: -score }
}

/// BALD mutual information per token: entropy of the mean MC distribution
/// minus the mean entropy of the samples. Pseudo-labels are the argmax of
/// the mean distribution.
pub fn score_bald<T: Scalar>(samples: &[ProbMatrix<T>]) -> Result<TokenScores<T>> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!("BALD needs at least 2 MC samples, got {}", samples.len())));
    }
    let mean = ProbMatrix::mean(samples)?;
    let m = T::of(samples.len() as f64);
    let mut scores = Vec::with_capacity(mean.rows());
    let mut pseudo_labels = Vec::with_capacity(mean.rows());
    for t in 0..mean.rows() {
        let mean_row = mean.row(t);
        let expected: T = samples.iter().map(|s| entropy(s.row(t))).sum::<T>() / m;
        scores.push(entropy(mean_row) - expected);
        pseudo_labels.push(argmax(mean_row));
    }
    Ok(TokenScores { scores, pseudo_labels, classes: mean.classes() })
}

/// Sentence score from token scores: `Σ_t q(x^t)`, or `Σ_t w_{ŷ^t} q(x^t)`
/// when weights are given.
pub fn aggregate<T: Scalar>(tokens: &TokenScores<T>, weights: Option<&ClassWeights<T>>) -> Result<T> {
    match weights {
        None => Ok(tokens.scores.iter().copied().sum()),
        Some(w) => {
            if w.len() != tokens.classes {
                return Err(Error::InvalidInput(format!(
                    "{} class weights for {} classes",
                    w.len(),
                    tokens.classes
                )));
            }
            if tokens.pseudo_labels.len() != tokens.scores.len() {
                return Err(Error::InvalidInput("pseudo-labels missing for weighted aggregation".into()));
            }
            Ok(tokens.scores.iter().zip(&tokens.pseudo_labels).map(|(&q, &y)| w.weight(y) * q).sum())
        }
    }
}

/// Weighted MNLP: `(1/T) Σ_t w_{ŷ^t} (-log p(ŷ^t))`, or the plain weighted
/// sum when `normalize` is false.
pub fn aggregate_mnlp<T: Scalar>(tokens: &TokenScores<T>, weights: &ClassWeights<T>, normalize: bool) -> Result<T> {
    let sum = aggregate(tokens, Some(weights))?;
    if !normalize {
        return Ok(sum);
    }
    let terms = tokens.scores.iter().zip(&tokens.pseudo_labels).map(|(&q, &y)| weights.weight(y) * q);
    Ok(exact_sum(terms) / T::of(tokens.len() as f64))
}

/// Correctly rounded sum, so that a mean is unchanged when every term is
/// repeated a power-of-two number of times.
/// Shewchuk's non-overlapping partials with a half-even final rounding.
fn exact_sum<T: Scalar>(terms: impl Iterator<Item = T>) -> T {
    let mut partials: Vec<f64> = Vec::new();
    for term in terms {
        let mut x = term.as_f64();
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut hi) = partials.pop() else { return T::zero() };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    T::of(hi)
}

/// I.i.d. uniform scores in `[0, 1)`, one per sentence.
pub fn score_random(pool: &[Sentence], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.iter().map(|_| rng.gen::<f64>()).collect()
}

/// Positions of the `b` highest scores, best first. Equal scores keep pool
/// order (earliest position wins).
pub fn top_b<T: Scalar>(scores: &[T], b: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    order.truncate(b);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> ProbMatrix<f64> {
        ProbMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn lc_values() {
        assert_eq!(score_lc(&m(&[&[1.0, 0.0, 0.0]])).scores, [0.0]);
        assert_eq!(score_lc(&m(&[&[0.25; 4]])).scores, [0.75]);
        let s = score_lc(&m(&[&[0.9, 0.1], &[0.6, 0.4]]));
        assert!((s.scores[0] - 0.1).abs() < 1e-15 && (s.scores[1] - 0.4).abs() < 1e-15);
        assert!((aggregate(&s, None).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.pseudo_labels, [0, 0]);
    }

    #[test]
    fn se_values() {
        assert_eq!(score_se(&m(&[&[1.0, 0.0, 0.0]])).scores, [0.0]);
        let u = score_se(&m(&[&[1.0 / 9.0; 9]])).scores[0];
        assert!((u - 9f64.ln()).abs() < 1e-9);
        assert!((u - 2.1972245773).abs() < 1e-9);
        let h = score_se(&m(&[&[0.5, 0.5]])).scores[0];
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn mnlp_values() {
        assert_eq!(score_mnlp(&m(&[&[1.0, 0.0], &[0.0, 1.0]])).score, 0.0);
        let s = score_mnlp(&m(&[&[0.5, 0.25, 0.25], &[0.25, 0.25, 0.5]]));
        let expected = -(0.5f64.ln() + 0.5f64.ln()) / 2.0;
        assert!((s.score - expected).abs() < 1e-12);
        let s = score_mnlp(&m(&[&[0.5, 0.2, 0.2, 0.1], &[0.25, 0.25, 0.25, 0.25]]));
        assert!((s.score - 1.0397207708).abs() < 1e-9);
        assert_eq!(s.raw, -s.score);
    }

    #[test]
    fn bald_values() {
        let a = m(&[&[0.7, 0.2, 0.1], &[0.3, 0.3, 0.4]]);
        let s = score_bald(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(s.scores.iter().all(|v| v.abs() <= 1e-9));
        let s = score_bald(&[m(&[&[1.0, 0.0]]), m(&[&[0.0, 1.0]])]).unwrap();
        assert!((s.scores[0] - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(s.pseudo_labels, [0]);
        assert!(score_bald(std::slice::from_ref(&a)).is_err());
        assert!(score_bald(&[a, m(&[&[1.0, 0.0, 0.0]])]).is_err());
    }

    #[test]
    fn weighted_aggregate() {
        let tokens: TokenScores<f64> = TokenScores { scores: vec![0.1, 0.4], pseudo_labels: vec![0, 1], classes: 3 };
        let w = ClassWeights::from_raw(vec![0.2, 2.0, 1.0], 0.1, None).unwrap();
        assert!((aggregate(&tokens, Some(&w)).unwrap() - 0.82).abs() < 1e-12);
        assert!((aggregate_mnlp(&tokens, &w, true).unwrap() - 0.41).abs() < 1e-12);
        let ones = ClassWeights::from_raw(vec![1.0; 3], 0.1, None).unwrap();
        assert!((aggregate(&tokens, Some(&ones)).unwrap() - 0.5).abs() < 1e-15);
        let short = ClassWeights::from_raw(vec![1.0; 2], 0.1, None).unwrap();
        assert!(aggregate(&tokens, Some(&short)).is_err());
    }

    #[test]
    fn random_scores_and_top_b() {
        let pool: Vec<Sentence> = (0..6).map(|i| Sentence::new(i, ["x"]).unwrap()).collect();
        assert_eq!(score_random(&pool, 3), score_random(&pool, 3));
        assert_ne!(score_random(&pool, 3), score_random(&pool, 4));
        assert_eq!(top_b(&[0.1, 0.5, 0.5, 0.9], 3), [3, 1, 2]);
        assert_eq!(top_b(&[0.1, 0.2], 5), [1, 0]);
    }

    #[test]
    fn kind_names() {
        for k in AcquisitionKind::ALL {
            assert_eq!(k.name().parse::<AcquisitionKind>().unwrap(), k);
        }
        assert!("margin".parse::<AcquisitionKind>().is_err());
    }

    #[test]
    fn exact_sum_rounds_once() {
        assert_eq!(exact_sum([1e16, 1.0, -1e16].into_iter()), 1.0);
        assert_eq!(exact_sum(std::iter::repeat_n(0.1, 10)), 1.0);
        assert_eq!(exact_sum(std::iter::repeat_n(0.0f64, 3)), 0.0);
        assert_eq!(exact_sum(std::iter::empty::<f64>()), 0.0);
    }
}
