//! Pool-based active-learning driver.
//!
//! A trial splits the training corpus into an initial labeled pool and an
//! unlabeled pool, trains a fresh tagger, and then for each iteration:
//! computes class weights (when reweighting), scores the unlabeled pool,
//! moves the top `B` sentences into the labeled pool with their gold tags,
//! retrains from scratch and evaluates span F1 on the test set. Iteration 0
//! is the model trained on the initial pool.
//!
//! An experiment runs several trials with seeds `seed + i` and summarises
//! the curves with Student-t 95% confidence intervals.

use std::time::Instant;

use rayon::prelude::*;

use crate::acquisition::AcquisitionKind;
use crate::corpus::{split_pools, LabeledCorpus, UnlabeledPool};
use crate::metrics::{imbalance_ratio_clamped, mean_ci95, span_f1, MeanCi};
use crate::reweight::{compute_weights, query, QueryOptions, DEFAULT_BETA};
use crate::tagger::{train, TaggerConfig, TaggerModel};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub acquisition: AcquisitionKind,
    pub reweight: bool,
    pub beta: f64,
    pub init_size: usize,
    pub iterations: usize,
    pub query_size: usize,
    pub trials: usize,
    pub tagger: TaggerConfig,
    /// MC-dropout samples per sentence (BALD only).
    pub mc_samples: usize,
    /// Master seed; trial `i` uses `seed + i`.
    pub seed: u64,
    /// Concurrent trials; 0 lets the thread pool decide.
    pub jobs: usize,
    /// Keep MNLP's length normalisation when reweighting.
    pub mnlp_normalize: bool,
    /// Redraw the initial pool until it contains every class of the
    /// training set, up to `max_resamples` extra draws per trial.
    pub require_all_classes: bool,
    pub max_resamples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionKind::Lc,
            reweight: false,
            beta: DEFAULT_BETA,
            init_size: 30,
            iterations: 10,
            query_size: 15,
            trials: 5,
            tagger: TaggerConfig::default(),
            mc_samples: 10,
            seed: 0,
            jobs: 0,
            mnlp_normalize: true,
            require_all_classes: false,
            max_resamples: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if self.query_size < 1 {
            return bad("query size must be at least 1");
        }
        if self.trials < 1 {
            return bad("trials must be at least 1");
        }
        if self.reweight && self.acquisition == AcquisitionKind::Random {
            return bad("reweighting cannot be combined with random querying");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be a finite non-negative number, got {}", self.beta)));
        }
        if self.acquisition == AcquisitionKind::Bald && self.mc_samples < 2 {
            return bad("BALD needs at least 2 MC samples");
        }
        self.tagger.validate()
    }

    /// Warnings about valid but degenerate settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.acquisition == AcquisitionKind::Bald && self.tagger.dropout_rate == 0.0 {
            out.push("BALD with dropout rate 0: all MC samples are identical and every score is 0".into());
        }
        if self.trials == 1 {
            out.push("a single trial gives confidence intervals of width 0".into());
        }
        out
    }
}

/// Measurements after one iteration of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub labeled_sentences: usize,
    pub labeled_tokens: usize,
    /// Labeled token count per class.
    pub class_counts: Vec<usize>,
    /// Sentences added in this iteration.
    pub queried: usize,
    /// Span F1 on the test set, in `[0, 1]`.
    pub f1: f64,
    /// Imbalance ratio of the labeled pool.
    pub gamma: f64,
    /// Some class of the training set was absent from the labeled pool, so
    /// `gamma` used a clamped minimum.
    pub gamma_flag: bool,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub trial: usize,
    pub seed: u64,
    /// Seed of the initial pool split (differs from `seed` after resampling).
    pub split_seed: u64,
    pub iterations: Vec<IterationRecord>,
    /// The pool ran out before all iterations could query `B` sentences.
    pub truncated: bool,
}

impl RunRecord {
    pub fn final_f1(&self) -> f64 {
        self.iterations.last().map_or(0.0, |r| r.f1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub labeled_sentences: f64,
    pub labeled_tokens: f64,
    pub f1: MeanCi,
    pub gamma: MeanCi,
    /// Number of trials whose `gamma` was flagged at this iteration.
    pub gamma_flagged: usize,
}

/// Per-iteration means and 95% confidence half-widths across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub points: Vec<CurvePoint>,
}

impl CurveSummary {
    /// Summarises the iterations every run reached.
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let len = runs.iter().map(|r| r.iterations.len()).min().unwrap_or(0);
        let points = (0..len)
            .map(|i| {
                let at: Vec<&IterationRecord> = runs.iter().map(|r| &r.iterations[i]).collect();
                let mean = |f: fn(&IterationRecord) -> f64| at.iter().map(|r| f(r)).sum::<f64>() / at.len() as f64;
                let collect = |f: fn(&IterationRecord) -> f64| at.iter().map(|r| f(r)).collect::<Vec<_>>();
                CurvePoint {
                    iteration: at[0].iteration,
                    labeled_sentences: mean(|r| r.labeled_sentences as f64),
                    labeled_tokens: mean(|r| r.labeled_tokens as f64),
                    f1: mean_ci95(&collect(|r| r.f1)).expect("at least one run"),
                    gamma: mean_ci95(&collect(|r| r.gamma)).expect("at least one run"),
                    gamma_flagged: at.iter().filter(|r| r.gamma_flag).count(),
                }
            })
            .collect();
        Self { points }
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: CurveSummary,
    pub runs: Vec<RunRecord>,
    pub warnings: Vec<String>,
}

/// Deterministic seed derivation (splitmix64 over `base` and `parts`).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |h, &p| mix(h ^ mix(p)))
}

/// Span F1 of `model` on `test`.
pub fn evaluate<T: Scalar>(model: &TaggerModel<T>, test: &LabeledCorpus) -> Result<f64> {
    let predictions: Vec<Vec<usize>> = test.items().par_iter().map(|s| model.predict_tags(&s.sentence)).collect();
    let gold: Vec<&[usize]> = test.items().iter().map(|s| s.tags()).collect();
    Ok(span_f1(&predictions, &gold, test.tagset())?.f1)
}

fn tagger_for(config: &ExperimentConfig, seed: u64, iteration: usize) -> TaggerConfig {
    TaggerConfig { seed: derive_seed(seed, &[0, iteration as u64]), ..config.tagger.clone() }
}

/// Runs one trial from a given initial split.
pub fn run_trial<T: Scalar>(
    config: &ExperimentConfig,
    mut labeled: LabeledCorpus,
    mut pool: UnlabeledPool,
    test: &LabeledCorpus,
    seed: u64,
) -> Result<RunRecord> {
    config.validate()?;
    if labeled.tagset() != test.tagset() || labeled.tagset() != pool.tagset() {
        return Err(Error::InvalidInput("labeled pool, unlabeled pool and test set use different tag sets".into()));
    }
    if !pool.has_oracle() {
        return Err(Error::InvalidInput("simulated active learning needs gold tags for the pool".into()));
    }
    let present: Vec<bool> = {
        let mut all = labeled.class_counts();
        let hidden = pool.oracle_class_counts().expect("checked above");
        all.per_class.iter_mut().zip(&hidden.per_class).for_each(|(a, h)| *a += h);
        all.per_class.iter().map(|&n| n > 0).collect()
    };
    let record = |iteration: usize, queried: usize, labeled: &LabeledCorpus, f1: f64, started: Instant| {
        let counts = labeled.class_counts();
        let gamma = imbalance_ratio_clamped(&counts.per_class, &present);
        IterationRecord {
            iteration,
            labeled_sentences: labeled.len(),
            labeled_tokens: counts.total,
            class_counts: counts.per_class,
            queried,
            f1,
            gamma: gamma.gamma,
            gamma_flag: gamma.absent_classes,
            elapsed_secs: started.elapsed().as_secs_f64(),
        }
    };

    let started = Instant::now();
    let mut model: TaggerModel<T> = train(&labeled, &tagger_for(config, seed, 0))?;
    let mut iterations = vec![record(0, 0, &labeled, evaluate(&model, test)?, started)];
    let mut truncated = false;

    for it in 1..=config.iterations {
        if pool.is_empty() {
            truncated = true;
            log::warn!("trial seed {seed}: unlabeled pool exhausted before iteration {it}");
            break;
        }
        let started = Instant::now();
        let b = config.query_size.min(pool.len());
        if b < config.query_size {
            truncated = true;
            log::warn!("trial seed {seed}: only {b} sentences left for iteration {it}");
        }
        let weights = if config.reweight { Some(compute_weights::<T>(&labeled, config.beta)?) } else { None };
        let options = QueryOptions {
            mc_samples: config.mc_samples,
            seed: derive_seed(seed, &[1, it as u64]),
            mnlp_normalize: config.mnlp_normalize,
        };
        let selected = query(pool.sentences(), &model, config.acquisition, weights.as_ref(), b, &options)?;
        for item in pool.take_labeled(&selected.positions)? {
            labeled.push(item)?;
        }
        model = train(&labeled, &tagger_for(config, seed, it))?;
        let f1 = evaluate(&model, test)?;
        iterations.push(record(it, b, &labeled, f1, started));
    }

    Ok(RunRecord { trial: 0, seed, split_seed: seed, iterations, truncated })
}

/// Initial split for a trial, redrawn until it covers every class when the
/// config asks for it.
fn initial_split(config: &ExperimentConfig, train: &LabeledCorpus, seed: u64) -> Result<(u64, LabeledCorpus, UnlabeledPool)> {
    let present: Vec<bool> = train.class_counts().per_class.iter().map(|&n| n > 0).collect();
    let attempts = if config.require_all_classes { config.max_resamples + 1 } else { 1 };
    for attempt in 0..attempts {
        let split_seed = if attempt == 0 { seed } else { derive_seed(seed, &[2, attempt as u64]) };
        let (labeled, pool) = split_pools(train, config.init_size, split_seed)?;
        let counts = labeled.class_counts();
        let complete = counts.per_class.iter().zip(&present).all(|(&n, &p)| n > 0 || !p);
        if !config.require_all_classes || complete {
            return Ok((split_seed, labeled, pool));
        }
    }
    let counts = split_pools(train, config.init_size, seed)?.0.class_counts();
    let missing = counts
        .per_class
        .iter()
        .zip(&present)
        .position(|(&n, &p)| n == 0 && p)
        .map_or_else(String::new, |k| train.tagset().name(k).to_string());
    log::warn!(
        "trial seed {seed}: no initial pool of {} sentences covered every class after {attempts} draws",
        config.init_size
    );
    Err(Error::AbsentClass { class: missing })
}

/// Runs `config.trials` trials on `train`, evaluating on `test`.
pub fn run_experiment<T: Scalar>(config: &ExperimentConfig, train: &LabeledCorpus, test: &LabeledCorpus) -> Result<ExperimentResult> {
    config.validate()?;
    if train.tagset() != test.tagset() {
        return Err(Error::InvalidInput(format!(
            "train and test tag sets differ: {} vs {}",
            train.tagset().classes().join(","),
            test.tagset().classes().join(",")
        )));
    }
    let needed = config.init_size + config.iterations * config.query_size;
    let mut warnings = config.warnings();
    if needed > train.len() {
        warnings.push(format!(
            "training set has {} sentences, fewer than the {needed} the protocol consumes; runs will be truncated",
            train.len()
        ));
    }

    let run = |trial: usize| -> Result<RunRecord> {
        let seed = config.seed.wrapping_add(trial as u64);
        let (split_seed, labeled, pool) = initial_split(config, train, seed)?;
        let mut record = run_trial::<T>(config, labeled, pool, test, seed)?;
        record.trial = trial;
        record.split_seed = split_seed;
        Ok(record)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| (0..config.trials).into_par_iter().map(run).collect::<Result<_>>())?;

    if runs.iter().any(|r| r.truncated) {
        warnings.push("some trials exhausted the unlabeled pool".into());
    }
    Ok(ExperimentResult { summary: CurveSummary::from_runs(&runs), runs, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        let bad = [
            ExperimentConfig { reweight: true, acquisition: AcquisitionKind::Random, ..ok.clone() },
            ExperimentConfig { iterations: 0, ..ok.clone() },
            ExperimentConfig { query_size: 0, ..ok.clone() },
            ExperimentConfig { trials: 0, ..ok.clone() },
            ExperimentConfig { beta: -1.0, ..ok.clone() },
            ExperimentConfig { acquisition: AcquisitionKind::Bald, mc_samples: 1, ..ok.clone() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(5, &[1, 2]), derive_seed(5, &[1, 2]));
        assert_ne!(derive_seed(5, &[1, 2]), derive_seed(5, &[2, 1]));
        assert_ne!(derive_seed(5, &[0]), derive_seed(6, &[0]));
    }

    #[test]
    fn summary_of_two_runs() {
        let rec = |f1: f64| IterationRecord {
            iteration: 0,
            labeled_sentences: 30,
            labeled_tokens: 400,
            class_counts: vec![],
            queried: 0,
            f1,
            gamma: 2.0,
            gamma_flag: false,
            elapsed_secs: 0.0,
        };
        let run = |f1: f64| RunRecord { trial: 0, seed: 0, split_seed: 0, iterations: vec![rec(f1)], truncated: false };
        let s = CurveSummary::from_runs(&[run(0.610), run(0.614)]);
        let p = &s.points[0];
        assert!((p.f1.mean - 0.612).abs() < 1e-12);
        assert!((p.f1.half_width - 0.025412).abs() < 1e-5);
        assert_eq!(p.gamma.half_width, 0.0);
    }
}
