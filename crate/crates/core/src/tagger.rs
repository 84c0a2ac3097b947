//! Hashed-feature softmax token classifier.
//!
//! Each token is described by a sparse vector of hashed indicator features
//! (see [`feature_names`]). The network is either a linear softmax over
//! those features, or a single tanh hidden layer followed by a softmax.
//! Training minimises mean token cross-entropy plus an L2 penalty with
//! mini-batch SGD; every call to [`train`] starts from a fresh
//! initialisation.
//!
//! Dropout is inverted dropout on the input features (linear mode) or on
//! the hidden activations (hidden-layer mode), so the deterministic
//! [`TaggerModel::predict_proba`] needs no rescaling and
//! [`TaggerModel::predict_proba_mc`] draws MC-dropout samples.

use std::fmt::Write as _;
use std::hash::Hasher;
use std::io::BufRead;
use std::sync::atomic::{AtomicBool, Ordering};

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LabeledCorpus, Sentence, TagSet};
use crate::{Error, Result, Scalar};

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";
/// Scale below which the lazily decayed input weights are folded back.
const RESCALE_BELOW: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerConfig {
    /// Number of feature-hash buckets.
    pub hash_dimension: usize,
    /// 0 for a linear softmax, otherwise the width of one tanh hidden layer.
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Tokens per SGD step; 0 means full-batch gradient descent.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            hash_dimension: 1 << 18,
            hidden_units: 0,
            dropout_rate: 0.1,
            learning_rate: 0.1,
            weight_decay: 5e-5,
            epochs: 30,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hash_dimension < 2 {
            return bad(format!("hash dimension must be at least 2, got {}", self.hash_dimension));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate must be in [0, 1), got {}", self.dropout_rate));
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.learning_rate * self.weight_decay < 1.0) {
            return bad(format!(
                "weight decay must be non-negative with learning_rate * weight_decay < 1, got {}",
                self.weight_decay
            ));
        }
        Ok(())
    }
}

/// Sparse real-valued feature vector. Indices are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Features<T> {
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> Features<T> {
    /// Builds a vector from bucket hits, summing repeated buckets.
    pub fn from_buckets(mut buckets: Vec<usize>) -> Self {
        buckets.sort_unstable();
        let mut indices: Vec<usize> = Vec::with_capacity(buckets.len());
        let mut values: Vec<T> = Vec::with_capacity(buckets.len());
        for b in buckets {
            if indices.last() == Some(&b) {
                *values.last_mut().unwrap() += T::one();
            } else {
                indices.push(b);
                values.push(T::one());
            }
        }
        Self { indices, values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Feature template for the token at `position`: bias, the token and its
/// lowercase form, prefixes and suffixes of length 1-3, word shape, and the
/// neighbouring tokens at offsets -2..=2 (with sentence-boundary sentinels).
pub fn feature_names(sentence: &Sentence, position: usize) -> Vec<String> {
    let tokens = sentence.tokens();
    let tok = tokens[position].as_str();
    let chars: Vec<char> = tok.chars().collect();
    let mut out = Vec::with_capacity(16);
    out.push("bias".to_string());
    out.push(format!("token={tok}"));
    out.push(format!("lower={}", tok.to_lowercase()));
    for n in 1..=3 {
        if chars.len() >= n {
            let prefix: String = chars[..n].iter().collect();
            let suffix: String = chars[chars.len() - n..].iter().collect();
            out.push(format!("prefix{n}={prefix}"));
            out.push(format!("suffix{n}={suffix}"));
        }
    }
    out.push(format!("shape={}", word_shape(tok)));
    let neighbour = |offset: isize| -> &str {
        let j = position as isize + offset;
        if j < 0 {
            BOS
        } else if j as usize >= tokens.len() {
            EOS
        } else {
            tokens[j as usize].as_str()
        }
    };
    out.push(format!("prev={}", neighbour(-1)));
    out.push(format!("next={}", neighbour(1)));
    out.push(format!("prev2={}", neighbour(-2)));
    out.push(format!("next2={}", neighbour(2)));
    out
}

/// Character classes: `A` upper, `a` lower, `0` digit, anything else kept.
pub fn word_shape(token: &str) -> String {
    token
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'A'
            } else if c.is_lowercase() {
                'a'
            } else if c.is_numeric() {
                '0'
            } else {
                c
            }
        })
        .collect()
}

fn bucket(name: &str, dimension: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(name.as_bytes());
    (h.finish() % dimension as u64) as usize
}

/// Hashed feature vector of the token at `position`.
pub fn featurize<T: Scalar>(sentence: &Sentence, position: usize, dimension: usize) -> Features<T> {
    let buckets = feature_names(sentence, position).iter().map(|n| bucket(n, dimension)).collect();
    Features::from_buckets(buckets)
}

/// Row-stochastic `T × C` matrix of per-token class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix<T> {
    rows: usize,
    classes: usize,
    data: Vec<T>,
}

impl<T: Scalar> ProbMatrix<T> {
    /// Wraps row-major data. Only the shape is checked here; see
    /// [`ProbMatrix::check_stochastic`].
    pub fn new(rows: usize, classes: usize, data: Vec<T>) -> Result<Self> {
        if classes == 0 || data.len() != rows * classes {
            return Err(Error::InvalidInput(format!(
                "probability matrix {rows}x{classes} needs {} entries, got {}",
                rows * classes,
                data.len()
            )));
        }
        Ok(Self { rows, classes, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidInput("ragged probability rows".into()));
        }
        Self::new(rows.len(), classes, rows.concat())
    }

    /// Number of tokens.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.classes)
    }

    /// Argmax of row `t`; ties go to the lowest class index.
    pub fn argmax(&self, t: usize) -> usize {
        argmax(self.row(t))
    }

    /// Pseudo-labels: the argmax of every row.
    pub fn pseudo_labels(&self) -> Vec<usize> {
        (0..self.rows).map(|t| self.argmax(t)).collect()
    }

    /// Errors unless every entry is finite and non-negative and every row
    /// sums to 1 within `tolerance`.
    pub fn check_stochastic(&self, tolerance: f64) -> Result<()> {
        for (t, row) in self.iter_rows().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < T::zero()) {
                return Err(Error::InvalidInput(format!("row {t} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().map(|p| p.as_f64()).sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::InvalidInput(format!("row {t} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Entry-wise mean of equally shaped matrices.
    pub fn mean(samples: &[Self]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidInput("mean of zero matrices".into()))?;
        let mut data = vec![T::zero(); first.data.len()];
        for s in samples {
            if (s.rows, s.classes) != (first.rows, first.classes) {
                return Err(Error::InvalidInput(format!(
                    "shape mismatch: {}x{} vs {}x{}",
                    s.rows, s.classes, first.rows, first.classes
                )));
            }
            for (acc, &v) in data.iter_mut().zip(&s.data) {
                *acc += v;
            }
        }
        let n = T::of(samples.len() as f64);
        data.iter_mut().for_each(|v| *v /= n);
        Ok(Self { rows: first.rows, classes: first.classes, data })
    }
}

pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (c, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = c;
        }
    }
    best
}

fn softmax_in_place<T: Scalar>(logits: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    logits.iter_mut().for_each(|l| *l /= sum);
}

/// Network parameters. Input weights are stored as `scale * input`, with a
/// row of width `width()` per hash bucket, so L2 decay is a single multiply.
#[derive(Debug, Clone, PartialEq)]
struct Network<T> {
    dimension: usize,
    classes: usize,
    hidden: usize,
    input: Vec<T>,
    scale: T,
    input_sq_norm: T,
    hidden_bias: Vec<T>,
    output: Vec<T>,
    output_bias: Vec<T>,
}

/// Forward-pass cache of one token.
struct Activations<T> {
    /// Effective inputs after dropout.
    inputs: Vec<(usize, T)>,
    /// Hidden activations after dropout, and the dropout multipliers.
    hidden: Vec<T>,
    hidden_mask: Vec<T>,
    tanh: Vec<T>,
    probs: Vec<T>,
}

/// Data-gradient contribution of one token.
struct TokenGrad<T> {
    inputs: Vec<(usize, T)>,
    /// Gradient w.r.t. the pre-activation fed by the input weights.
    delta_in: Vec<T>,
    hidden: Vec<T>,
    dlogits: Vec<T>,
}

impl<T: Scalar> Network<T> {
    fn zeros(dimension: usize, classes: usize, hidden: usize) -> Self {
        let width = if hidden == 0 { classes } else { hidden };
        Self {
            dimension,
            classes,
            hidden,
            input: vec![T::zero(); dimension * width],
            scale: T::one(),
            input_sq_norm: T::zero(),
            hidden_bias: vec![T::zero(); hidden],
            output: vec![T::zero(); hidden * classes],
            output_bias: vec![T::zero(); if hidden == 0 { 0 } else { classes }],
        }
    }

    fn width(&self) -> usize {
        if self.hidden == 0 {
            self.classes
        } else {
            self.hidden
        }
    }

    /// Forward pass. `rng` enables dropout at `rate`.
    fn forward(&self, x: &Features<T>, dropout: Option<(f64, &mut ChaCha8Rng)>) -> Activations<T> {
        let width = self.width();
        let (rate, mut rng) = match dropout {
            Some((rate, rng)) if rate > 0.0 => (rate, Some(rng)),
            _ => (0.0, None),
        };
        let keep = T::of(1.0 / (1.0 - rate));

        let mut inputs: Vec<(usize, T)> = Vec::with_capacity(x.len());
        for (&i, &v) in x.indices.iter().zip(&x.values) {
            match rng.as_mut().filter(|_| self.hidden == 0) {
                Some(r) => {
                    if r.gen::<f64>() >= rate {
                        inputs.push((i, v * keep));
                    }
                }
                None => inputs.push((i, v)),
            }
        }

        let mut pre = vec![T::zero(); width];
        for &(i, v) in &inputs {
            let row = &self.input[i * width..(i + 1) * width];
            for (p, &w) in pre.iter_mut().zip(row) {
                *p += v * w;
            }
        }
        pre.iter_mut().for_each(|p| *p *= self.scale);

        if self.hidden == 0 {
            softmax_in_place(&mut pre);
            return Activations { inputs, hidden: Vec::new(), hidden_mask: Vec::new(), tanh: Vec::new(), probs: pre };
        }

        let tanh: Vec<T> = pre.iter().zip(&self.hidden_bias).map(|(&p, &b)| (p + b).tanh()).collect();
        let hidden_mask: Vec<T> = match rng.as_mut() {
            Some(r) => (0..width).map(|_| if r.gen::<f64>() >= rate { keep } else { T::zero() }).collect(),
            None => vec![T::one(); width],
        };
        let hidden: Vec<T> = tanh.iter().zip(&hidden_mask).map(|(&h, &m)| h * m).collect();
        let mut logits = self.output_bias.clone();
        for (j, &h) in hidden.iter().enumerate() {
            let row = &self.output[j * self.classes..(j + 1) * self.classes];
            for (l, &w) in logits.iter_mut().zip(row) {
                *l += h * w;
            }
        }
        softmax_in_place(&mut logits);
        Activations { inputs, hidden, hidden_mask, tanh, probs: logits }
    }

    fn backward(&self, act: Activations<T>, label: usize) -> TokenGrad<T> {
        let mut dlogits = act.probs;
        dlogits[label] -= T::one();
        if self.hidden == 0 {
            return TokenGrad { inputs: act.inputs, delta_in: dlogits.clone(), hidden: Vec::new(), dlogits };
        }
        let delta_in = (0..self.hidden)
            .map(|j| {
                let row = &self.output[j * self.classes..(j + 1) * self.classes];
                let dh: T = row.iter().zip(&dlogits).map(|(&w, &d)| w * d).sum();
                dh * act.hidden_mask[j] * (T::one() - act.tanh[j] * act.tanh[j])
            })
            .collect();
        TokenGrad { inputs: act.inputs, delta_in, hidden: act.hidden, dlogits }
    }

    /// One SGD step on the mean of `grads`, with L2 decay.
    fn apply(&mut self, grads: &[TokenGrad<T>], learning_rate: f64, weight_decay: f64) {
        let width = self.width();
        let lr = T::of(learning_rate);
        let decay = T::one() - T::of(learning_rate * weight_decay);
        let step = lr / T::of(grads.len() as f64);

        self.scale *= decay;
        let inv_scale = step / self.scale;
        for g in grads {
            for &(i, v) in &g.inputs {
                let row = &mut self.input[i * width..(i + 1) * width];
                for (w, &d) in row.iter_mut().zip(&g.delta_in) {
                    let old = *w;
                    *w -= inv_scale * v * d;
                    self.input_sq_norm += *w * *w - old * old;
                }
            }
        }
        if self.hidden > 0 {
            self.output.iter_mut().for_each(|w| *w *= decay);
            for g in grads {
                for (b, &d) in self.hidden_bias.iter_mut().zip(&g.delta_in) {
                    *b -= step * d;
                }
                for (b, &d) in self.output_bias.iter_mut().zip(&g.dlogits) {
                    *b -= step * d;
                }
                for (j, &h) in g.hidden.iter().enumerate() {
                    let row = &mut self.output[j * self.classes..(j + 1) * self.classes];
                    for (w, &d) in row.iter_mut().zip(&g.dlogits) {
                        *w -= step * h * d;
                    }
                }
            }
        }
        if self.scale < T::of(RESCALE_BELOW) {
            self.fold_scale();
        }
    }

    fn fold_scale(&mut self) {
        let s = self.scale;
        self.input.iter_mut().for_each(|w| *w *= s);
        self.input_sq_norm = self.input.iter().map(|&w| w * w).sum();
        self.scale = T::one();
    }

    /// `‖W_in‖² + ‖W_out‖²` (biases are not penalised).
    fn weight_sq_norm(&self) -> T {
        self.scale * self.scale * self.input_sq_norm + self.output.iter().map(|&w| w * w).sum()
    }

    fn parameters(&self) -> Vec<T> {
        let mut out: Vec<T> = self.input.iter().map(|&w| w * self.scale).collect();
        out.extend_from_slice(&self.hidden_bias);
        out.extend_from_slice(&self.output);
        out.extend_from_slice(&self.output_bias);
        out
    }

    fn parameter_count(&self) -> usize {
        self.input.len() + self.hidden_bias.len() + self.output.len() + self.output_bias.len()
    }

    fn set_parameters(&mut self, params: &[T]) {
        let mut rest = params;
        for block in [&mut self.input, &mut self.hidden_bias, &mut self.output, &mut self.output_bias] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        self.scale = T::one();
        self.input_sq_norm = self.input.iter().map(|&w| w * w).sum();
    }

    /// Dense gradient in [`Network::parameters`] order.
    fn dense_gradient(&self, grads: &[TokenGrad<T>], weight_decay: f64) -> Vec<T> {
        let width = self.width();
        let n = T::of(grads.len() as f64);
        let wd = T::of(weight_decay);
        let mut input: Vec<T> = self.input.iter().map(|&w| wd * w * self.scale).collect();
        let mut hidden_bias = vec![T::zero(); self.hidden_bias.len()];
        let mut output: Vec<T> = self.output.iter().map(|&w| wd * w).collect();
        let mut output_bias = vec![T::zero(); self.output_bias.len()];
        for g in grads {
            for &(i, v) in &g.inputs {
                for (k, &d) in g.delta_in.iter().enumerate() {
                    input[i * width + k] += v * d / n;
                }
            }
            if self.hidden > 0 {
                for (b, &d) in hidden_bias.iter_mut().zip(&g.delta_in) {
                    *b += d / n;
                }
                for (b, &d) in output_bias.iter_mut().zip(&g.dlogits) {
                    *b += d / n;
                }
                for (j, &h) in g.hidden.iter().enumerate() {
                    for (c, &d) in g.dlogits.iter().enumerate() {
                        output[j * self.classes + c] += h * d / n;
                    }
                }
            }
        }
        input.extend(hidden_bias);
        input.extend(output);
        input.extend(output_bias);
        input
    }
}

/// A trained tagger. Immutable after training; prediction takes `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel<T> {
    config: TaggerConfig,
    tagset: TagSet,
    net: Network<T>,
    history: Vec<f64>,
}

static WARNED_NO_DROPOUT: AtomicBool = AtomicBool::new(false);

impl<T: Scalar> TaggerModel<T> {
    /// Untrained model: linear weights at zero (uniform predictions), hidden
    /// layer output weights drawn from the config seed.
    pub fn new(config: TaggerConfig, tagset: TagSet) -> Result<Self> {
        config.validate()?;
        let mut net = Network::zeros(config.hash_dimension, tagset.len(), config.hidden_units);
        if config.hidden_units > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
            let bound = (6.0 / (config.hidden_units + tagset.len()) as f64).sqrt();
            net.output.iter_mut().for_each(|w| *w = T::of(rng.gen_range(-bound..bound)));
        }
        Ok(Self { config, tagset, net, history: Vec::new() })
    }

    pub fn config(&self) -> &TaggerConfig {
        &self.config
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    /// Objective value after each training epoch.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn features(&self, sentence: &Sentence, position: usize) -> Features<T> {
        featurize(sentence, position, self.config.hash_dimension)
    }

    /// Deterministic class distributions (dropout off).
    pub fn predict_proba(&self, sentence: &Sentence) -> ProbMatrix<T> {
        let mut data = Vec::with_capacity(sentence.len() * self.tagset.len());
        for t in 0..sentence.len() {
            data.extend(self.net.forward(&self.features(sentence, t), None).probs);
        }
        ProbMatrix { rows: sentence.len(), classes: self.tagset.len(), data }
    }

    /// Most probable tag per token.
    pub fn predict_tags(&self, sentence: &Sentence) -> Vec<usize> {
        self.predict_proba(sentence).pseudo_labels()
    }

    /// `samples` stochastic forward passes with independent dropout masks.
    /// With a dropout rate of 0 every sample equals [`Self::predict_proba`].
    pub fn predict_proba_mc(&self, sentence: &Sentence, samples: usize, seed: u64) -> Result<Vec<ProbMatrix<T>>> {
        if samples < 2 {
            return Err(Error::InvalidInput(format!("MC dropout needs at least 2 samples, got {samples}")));
        }
        if self.config.dropout_rate == 0.0 && !WARNED_NO_DROPOUT.swap(true, Ordering::Relaxed) {
            log::warn!("MC dropout requested with dropout rate 0: all samples are identical");
        }
        let features: Vec<Features<T>> = (0..sentence.len()).map(|t| self.features(sentence, t)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rate = self.config.dropout_rate;
        let out = (0..samples)
            .map(|_| {
                let mut data = Vec::with_capacity(sentence.len() * self.tagset.len());
                for x in &features {
                    data.extend(self.net.forward(x, Some((rate, &mut rng))).probs);
                }
                ProbMatrix { rows: sentence.len(), classes: self.tagset.len(), data }
            })
            .collect();
        Ok(out)
    }

    /// Mean cross-entropy over `examples` plus `weight_decay / 2 · ‖W‖²`,
    /// with dropout off.
    pub fn objective(&self, examples: &[(Features<T>, usize)]) -> T {
        let n = T::of(examples.len().max(1) as f64);
        let ce: T = examples
            .iter()
            .map(|(x, y)| {
                let p = self.net.forward(x, None).probs[*y];
                -p.max(T::min_positive_value()).ln()
            })
            .sum();
        ce / n + T::of(self.config.weight_decay / 2.0) * self.net.weight_sq_norm()
    }

    /// Analytic gradient of [`Self::objective`], flattened in
    /// [`Self::parameters`] order. Dense; intended for small models.
    pub fn gradient(&self, examples: &[(Features<T>, usize)]) -> Vec<T> {
        let grads: Vec<TokenGrad<T>> =
            examples.iter().map(|(x, y)| self.net.backward(self.net.forward(x, None), *y)).collect();
        self.net.dense_gradient(&grads, self.config.weight_decay)
    }

    /// All parameters: input weights (bucket-major), hidden bias, output
    /// weights, output bias. The last three are empty in linear mode.
    pub fn parameters(&self) -> Vec<T> {
        self.net.parameters()
    }

    pub fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    pub fn set_parameters(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.net.parameter_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.net.parameter_count(),
                params.len()
            )));
        }
        self.net.set_parameters(params);
        Ok(())
    }

    /// Runs `config.epochs` epochs of SGD on `examples` from the current
    /// parameters.
    pub fn fit_examples(&mut self, examples: &[(Features<T>, usize)]) -> Result<()> {
        if examples.is_empty() {
            return Err(Error::NoSentences);
        }
        let cfg = self.config.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let batch = if cfg.batch_size == 0 { examples.len() } else { cfg.batch_size };
        for _ in 0..cfg.epochs {
            if batch < examples.len() {
                order.shuffle(&mut rng);
            }
            for chunk in order.chunks(batch) {
                let grads: Vec<TokenGrad<T>> = chunk
                    .iter()
                    .map(|&i| {
                        let (x, y) = &examples[i];
                        let act = self.net.forward(x, Some((cfg.dropout_rate, &mut rng)));
                        self.net.backward(act, *y)
                    })
                    .collect();
                self.net.apply(&grads, cfg.learning_rate, cfg.weight_decay);
            }
            self.history.push(self.objective(examples).as_f64());
        }
        Ok(())
    }
}

/// Trains a fresh model on every token of `labeled`.
pub fn train<T: Scalar>(labeled: &LabeledCorpus, config: &TaggerConfig) -> Result<TaggerModel<T>> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(Error::NoSentences);
    }
    let mut model = TaggerModel::new(config.clone(), labeled.tagset().clone())?;
    let examples: Vec<(Features<T>, usize)> = labeled
        .items()
        .iter()
        .flat_map(|item| {
            let s = &item.sentence;
            item.tags().iter().enumerate().map(move |(t, &y)| (featurize(s, t, config.hash_dimension), y))
        })
        .collect();
    model.fit_examples(&examples)?;
    Ok(model)
}

/// Writes probability matrices in the interchange format: a
/// `#classes: c1,...,cC` header, one line of `C` space-separated decimals
/// per token, and a blank line between sentences.
pub fn export_probs<T: Scalar>(matrices: &[ProbMatrix<T>], tagset: &TagSet) -> Result<String> {
    let mut out = format!("#classes: {}\n", tagset.classes().join(","));
    for (n, m) in matrices.iter().enumerate() {
        if m.classes != tagset.len() {
            return Err(Error::InvalidInput(format!(
                "matrix {n} has {} classes, tag set has {}",
                m.classes,
                tagset.len()
            )));
        }
        if n > 0 {
            out.push('\n');
        }
        for row in m.iter_rows() {
            let mut first = true;
            for p in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{:.9}", p.as_f64()).expect("write to String");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Tolerance on row sums accepted by [`import_probs`].
pub const IMPORT_ROW_TOLERANCE: f64 = 1e-4;

/// Reads the interchange format written by [`export_probs`].
pub fn import_probs<T: Scalar, R: BufRead>(reader: R, tagset: &TagSet) -> Result<Vec<ProbMatrix<T>>> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((n, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break (n + 1, line);
                }
            }
            None => return Err(Error::ProbFormat { line: 0, message: "missing #classes header".into() }),
        }
    };
    let classes = header
        .1
        .trim()
        .strip_prefix("#classes:")
        .ok_or_else(|| Error::ProbFormat { line: header.0, message: "expected #classes header".into() })?;
    let classes: Vec<&str> = classes.trim().split(',').map(str::trim).collect();
    if classes != tagset.classes() {
        return Err(Error::ProbFormat {
            line: header.0,
            message: format!("class mismatch: file has {}, tag set is {}", classes.join(","), tagset.classes().join(",")),
        });
    }

    let c = tagset.len();
    let mut out = Vec::new();
    let mut current: Vec<T> = Vec::new();
    let flush = |current: &mut Vec<T>, out: &mut Vec<ProbMatrix<T>>| {
        if !current.is_empty() {
            let data = std::mem::take(current);
            out.push(ProbMatrix { rows: data.len() / c, classes: c, data });
        }
    };
    for (n, line) in lines {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            flush(&mut current, &mut out);
            continue;
        }
        let bad = |message: String| Error::ProbFormat { line: line_no, message };
        let row: Vec<T> = line
            .split_whitespace()
            .map(|v| T::parse_decimal(v).ok_or_else(|| bad(format!("not a number: {v:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != c {
            return Err(bad(format!("expected {c} values, found {}", row.len())));
        }
        if row.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(bad("negative or non-finite probability".into()));
        }
        let sum: f64 = row.iter().map(|p| p.as_f64()).sum();
        if (sum - 1.0).abs() > IMPORT_ROW_TOLERANCE {
            return Err(bad(format!("row sums to {sum}, not 1")));
        }
        current.extend(row);
    }
    flush(&mut current, &mut out);
    Ok(out)
}
