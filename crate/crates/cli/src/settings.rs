//! Command-line flags, the flat config file, and their merge.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rwal::corpus::{BioPolicy, ParseOptions};
use rwal::{AcquisitionKind, ExperimentConfig, TaggerConfig};

use crate::Failure;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RWAL_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "rwal-out";

#[derive(Debug, Parser)]
#[command(name = "rwal", version, about = "Active learning for BIO sequence tagging with reweighted acquisition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an active-learning experiment and write curve.csv and runs.csv.
    Run(ExperimentArgs),
    /// Run reweighted experiments over a grid of beta values (grid.csv).
    Grid {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Comma-separated beta values.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
    /// Compare smoothed and unsmoothed weights over the first iterations (ablation.csv).
    Ablation {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Iterations to compare.
        #[arg(long, default_value_t = 3)]
        ablation_iterations: usize,
    },
    /// Print dataset statistics and write stats.csv.
    Stats(ExperimentArgs),
    /// Check configuration and data without writing anything.
    Validate(ExperimentArgs),
    /// Generate a synthetic imbalanced BIO corpus (test tooling).
    Synth(SynthArgs),
}

/// Flags shared by the experiment subcommands. Every flag has a config-file
/// key of the same name; flags win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentArgs {
    /// Training corpus (CoNLL columns).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test corpus (CoNLL columns).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Zero-based tag column; defaults to the last column.
    #[arg(long)]
    pub tag_column: Option<usize>,
    /// Base acquisition function: random, lc, se, mnlp or bald.
    #[arg(long)]
    pub acquisition: Option<String>,
    /// Weight token scores by smoothed inverse class frequencies.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reweight: Option<bool>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub init_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub query_size: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent trials (0 = number of CPUs).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory (default: $RWAL_OUT_DIR or ./rwal-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub force: Option<bool>,
    /// Flat key = value config file; keys are the flag names.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Reject invalid BIO sequences instead of repairing them.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict_bio: Option<bool>,
    /// Drop MNLP's 1/T factor when reweighting.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mnlp_unnormalized: Option<bool>,
    #[arg(long)]
    pub hash_dimension: Option<usize>,
    #[arg(long)]
    pub hidden_units: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Tokens per SGD step (0 = full batch).
    #[arg(long)]
    pub batch_size: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl ExperimentArgs {
    /// Fills unset flags from the config file named by `--config`.
    pub fn with_config_file(mut self) -> Result<Self, Failure> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: ExperimentArgs =
            toml::from_str(&text).map_err(|e| Failure::Config(format!("config {}: {e}", path.display())))?;
        overlay!(self, file; train, test, tag_column, acquisition, reweight, beta, init_size, iterations,
            query_size, trials, mc_samples, seed, jobs, out, force, strict_bio, mnlp_unnormalized,
            hash_dimension, hidden_units, dropout, learning_rate, weight_decay, epochs, batch_size);
        Ok(self)
    }

    pub fn force(&self) -> bool {
        self.force.unwrap_or(false)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            tag_column: self.tag_column,
            tagset: None,
            bio: if self.strict_bio.unwrap_or(false) { BioPolicy::Strict } else { BioPolicy::Repair },
        }
    }

    pub fn train_path(&self) -> Result<&Path, Failure> {
        self.train.as_deref().ok_or_else(|| Failure::Config("--train is required".into()))
    }

    pub fn test_path(&self) -> Result<&Path, Failure> {
        self.test.as_deref().ok_or_else(|| Failure::Config("--test is required".into()))
    }

    /// Experiment settings with library defaults for everything unset.
    pub fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let defaults = ExperimentConfig::default();
        let td = TaggerConfig::default();
        let acquisition = match &self.acquisition {
            Some(name) => name.parse::<AcquisitionKind>().map_err(|e| Failure::Config(e.to_string()))?,
            None => defaults.acquisition,
        };
        let seed = self.seed.unwrap_or(defaults.seed);
        let config = ExperimentConfig {
            acquisition,
            reweight: self.reweight.unwrap_or(defaults.reweight),
            beta: self.beta.unwrap_or(defaults.beta),
            init_size: self.init_size.unwrap_or(defaults.init_size),
            iterations: self.iterations.unwrap_or(defaults.iterations),
            query_size: self.query_size.unwrap_or(defaults.query_size),
            trials: self.trials.unwrap_or(defaults.trials),
            tagger: TaggerConfig {
                hash_dimension: self.hash_dimension.unwrap_or(td.hash_dimension),
                hidden_units: self.hidden_units.unwrap_or(td.hidden_units),
                dropout_rate: self.dropout.unwrap_or(td.dropout_rate),
                learning_rate: self.learning_rate.unwrap_or(td.learning_rate),
                weight_decay: self.weight_decay.unwrap_or(td.weight_decay),
                epochs: self.epochs.unwrap_or(td.epochs),
                batch_size: self.batch_size.unwrap_or(td.batch_size),
                seed,
            },
            mc_samples: self.mc_samples.unwrap_or(defaults.mc_samples),
            seed,
            jobs: self.jobs.unwrap_or(defaults.jobs),
            mnlp_normalize: !self.mnlp_unnormalized.unwrap_or(false),
            require_all_classes: defaults.require_all_classes,
            max_resamples: defaults.max_resamples,
        };
        config.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(config)
    }

    /// The resolved settings, in config-file syntax.
    pub fn effective(&self, config: &ExperimentConfig) -> String {
        let resolved = ExperimentArgs {
            train: self.train.clone(),
            test: self.test.clone(),
            tag_column: self.tag_column,
            acquisition: Some(config.acquisition.to_string()),
            reweight: Some(config.reweight),
            beta: Some(config.beta),
            init_size: Some(config.init_size),
            iterations: Some(config.iterations),
            query_size: Some(config.query_size),
            trials: Some(config.trials),
            mc_samples: Some(config.mc_samples),
            seed: Some(config.seed),
            jobs: Some(config.jobs),
            out: Some(self.out_dir()),
            force: None,
            config: None,
            strict_bio: Some(self.strict_bio.unwrap_or(false)),
            mnlp_unnormalized: Some(!config.mnlp_normalize),
            hash_dimension: Some(config.tagger.hash_dimension),
            hidden_units: Some(config.tagger.hidden_units),
            dropout: Some(config.tagger.dropout_rate),
            learning_rate: Some(config.tagger.learning_rate),
            weight_decay: Some(config.tagger.weight_decay),
            epochs: Some(config.tagger.epochs),
            batch_size: Some(config.tagger.batch_size),
        };
        toml::to_string(&resolved).expect("flat settings serialize")
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output CoNLL file.
    #[arg(long)]
    pub out_file: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub sentences: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Target fraction of O tokens.
    #[arg(long, default_value_t = 0.85)]
    pub outside_fraction: f64,
    #[arg(long)]
    pub force: bool,
}
