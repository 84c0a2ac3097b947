//! Experiment runner behind the `rwal` binary.
//!
//! Each subcommand loads and validates everything it needs before touching
//! the output directory, then writes its files atomically (temporary file
//! plus rename). CSV output is a deterministic function of the settings,
//! the data and the master seed.

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rwal::alloop::{run_experiment, CurveSummary, ExperimentResult};
use rwal::corpus::{parse_conll, LabeledCorpus, ParseOptions};
use rwal::synth::{generate, SynthConfig};
use rwal::{AcquisitionKind, ExperimentConfig};

pub mod report;
pub mod settings;

pub use settings::{Cli, Command, ExperimentArgs, SynthArgs};

/// Default beta grid.
pub const DEFAULT_BETAS: [f64; 5] = [0.01, 0.1, 0.2, 0.5, 1.0];

/// A failed command: configuration problems exit 1, data problems exit 2.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    fn from_core(e: rwal::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

/// Dispatches a parsed command line.
pub fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => cmd_run(args.with_config_file()?).map(|_| ()),
        Command::Grid { args, betas } => cmd_grid(args.with_config_file()?, betas).map(|_| ()),
        Command::Ablation { args, ablation_iterations } => {
            cmd_ablation(args.with_config_file()?, ablation_iterations).map(|_| ())
        }
        Command::Stats(args) => cmd_stats(args.with_config_file()?).map(|_| ()),
        Command::Validate(args) => cmd_validate(args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

/// Reads a CoNLL file; `tagset` in `options` fixes the class inventory.
pub fn load_corpus(path: &Path, options: &ParseOptions) -> Result<LabeledCorpus, Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let parsed =
        parse_conll(BufReader::new(file), options).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if !parsed.repairs.is_empty() {
        log::warn!("{}: repaired {} invalid BIO tag(s)", path.display(), parsed.repairs.len());
    }
    Ok(parsed.corpus)
}

/// Loads the training corpus, then the test corpus against its tag set.
pub fn load_train_test(args: &ExperimentArgs) -> Result<(LabeledCorpus, LabeledCorpus), Failure> {
    let (train_path, test_path) = (args.train_path()?, args.test_path()?);
    let options = args.parse_options();
    let train = load_corpus(train_path, &options)?;
    let test_options = ParseOptions { tagset: Some(train.tagset().clone()), ..options };
    let test = load_corpus(test_path, &test_options)?;
    Ok((train, test))
}

/// Files written together into one output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<(&'static str, String)>,
}

impl Outputs {
    /// Fails before any work is done if an output exists and `force` is off.
    fn prepare(dir: PathBuf, names: &[&'static str], force: bool) -> Result<Self, Failure> {
        if !force {
            if let Some(existing) = names.iter().map(|n| dir.join(n)).find(|p| p.exists()) {
                return Err(Failure::Config(format!("{} exists; pass --force to overwrite", existing.display())));
            }
        }
        Ok(Self { dir, files: Vec::new() })
    }

    fn add(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    fn commit(self) -> Result<PathBuf, Failure> {
        let io = |e: std::io::Error| Failure::Data(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(io)?;
        let mut staged = Vec::new();
        for (name, contents) in &self.files {
            let tmp = self.dir.join(format!(".{name}.tmp"));
            if let Err(e) = fs::write(&tmp, contents) {
                for t in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(io(e));
            }
            staged.push(tmp);
        }
        for ((name, _), tmp) in self.files.iter().zip(&staged) {
            fs::rename(tmp, self.dir.join(name)).map_err(io)?;
        }
        Ok(self.dir)
    }
}

fn experiment(config: &ExperimentConfig, train: &LabeledCorpus, test: &LabeledCorpus) -> Result<ExperimentResult, Failure> {
    let result = run_experiment::<f64>(config, train, test).map_err(Failure::from_core)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    for run in &result.runs {
        let secs: f64 = run.iterations.iter().map(|r| r.elapsed_secs).sum();
        log::info!("trial {} (seed {}): {secs:.2}s", run.trial, run.seed);
    }
    Ok(result)
}

/// `run`: one experiment; writes curve.csv, runs.csv, effective_config.
pub fn cmd_run(args: ExperimentArgs) -> Result<ExperimentResult, Failure> {
    let config = args.experiment()?;
    let outputs = Outputs::prepare(args.out_dir(), &["curve.csv", "runs.csv", "effective_config"], args.force())?;
    let (train, test) = load_train_test(&args)?;
    let result = experiment(&config, &train, &test)?;

    let mut outputs = outputs;
    outputs.add("curve.csv", report::curve_csv(&result.summary));
    outputs.add("runs.csv", report::runs_csv(&result.runs, train.tagset()));
    outputs.add("effective_config", args.effective(&config));
    outputs.commit()?;
    if let Some(last) = result.summary.last() {
        println!("final F1: {:.6} ± {:.6} ({} trials)", last.f1.mean, last.f1.half_width, last.f1.n);
    }
    Ok(result)
}

/// One grid row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub beta: f64,
    pub summary: CurveSummary,
}

/// `grid`: a reweighted experiment per beta; writes grid.csv.
pub fn cmd_grid(mut args: ExperimentArgs, betas: Option<Vec<f64>>) -> Result<Vec<GridRow>, Failure> {
    let betas = betas.unwrap_or_else(|| DEFAULT_BETAS.to_vec());
    if betas.is_empty() {
        return Err(Failure::Config("beta grid is empty".into()));
    }
    args.reweight = Some(true);
    let base = args.experiment()?;
    for &beta in &betas {
        ExperimentConfig { beta, ..base.clone() }.validate().map_err(Failure::from_core)?;
    }
    let outputs = Outputs::prepare(args.out_dir(), &["grid.csv", "effective_config"], args.force())?;
    let (train, test) = load_train_test(&args)?;

    let mut rows = Vec::with_capacity(betas.len());
    for &beta in &betas {
        let config = ExperimentConfig { beta, ..base.clone() };
        let result = experiment(&config, &train, &test)?;
        rows.push(GridRow { beta, summary: result.summary });
    }
    let mut outputs = outputs;
    let table = report::grid_csv(&rows);
    print!("{table}");
    outputs.add("grid.csv", table);
    outputs.add("effective_config", args.effective(&base));
    outputs.commit()?;
    Ok(rows)
}

/// One ablation variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub beta: f64,
    pub summary: CurveSummary,
}

/// `ablation`: smoothed (configured beta, default 0.1) against unsmoothed
/// (beta = 0) weights over the first iterations. Initial pools are redrawn
/// until they contain every class, since unsmoothed weights need all
/// counts positive; both variants share the same pools.
pub fn cmd_ablation(mut args: ExperimentArgs, iterations: usize) -> Result<Vec<AblationRow>, Failure> {
    args.reweight = Some(true);
    args.iterations = Some(iterations);
    let mut base = args.experiment()?;
    if base.acquisition == AcquisitionKind::Random {
        return Err(Failure::Config("the ablation needs a non-random base acquisition function".into()));
    }
    base.require_all_classes = true;
    let outputs = Outputs::prepare(args.out_dir(), &["ablation.csv", "effective_config"], args.force())?;
    let (train, test) = load_train_test(&args)?;

    let mut rows = Vec::with_capacity(2);
    for (variant, beta) in [("smoothed", base.beta), ("unsmoothed", 0.0)] {
        let config = ExperimentConfig { beta, ..base.clone() };
        let result = run_experiment::<f64>(&config, &train, &test).map_err(|e| match e {
            rwal::Error::AbsentClass { class } => Failure::Data(format!(
                "{variant} variant: no initial pool of {} sentences contained class {class:?} after {} redraws",
                config.init_size, config.max_resamples
            )),
            other => Failure::from_core(other),
        })?;
        rows.push(AblationRow { variant, beta, summary: result.summary });
    }
    let table = report::ablation_csv(&rows);
    print!("{table}");
    let mut outputs = outputs;
    outputs.add("ablation.csv", table);
    outputs.add("effective_config", args.effective(&base));
    outputs.commit()?;
    Ok(rows)
}

/// `stats`: dataset statistics of the training corpus; writes stats.csv.
pub fn cmd_stats(args: ExperimentArgs) -> Result<rwal::corpus::CorpusStats, Failure> {
    let outputs = Outputs::prepare(args.out_dir(), &["stats.csv"], args.force())?;
    let corpus = load_corpus(args.train_path()?, &args.parse_options())?;
    let stats = corpus.stats().map_err(Failure::from_core)?;
    let table = report::stats_csv(&stats, corpus.tagset());
    print!("{table}");
    let mut outputs = outputs;
    outputs.add("stats.csv", table);
    outputs.commit()?;
    Ok(stats)
}

/// `validate`: reports every problem found in the settings and data.
/// Writes nothing.
pub fn cmd_validate(args: ExperimentArgs) -> Result<(), Failure> {
    let mut problems = Vec::new();
    let args = match args.with_config_file() {
        Ok(a) => a,
        Err(e) => return Err(Failure::Config(e.to_string())),
    };
    if let Err(e) = args.experiment() {
        problems.push(e.to_string());
    }
    let options = args.parse_options();
    let mut train_tagset = None;
    match args.train_path() {
        Ok(p) => match load_corpus(p, &options) {
            Ok(c) => train_tagset = Some(c.tagset().clone()),
            Err(e) => problems.push(e.to_string()),
        },
        Err(e) => problems.push(e.to_string()),
    }
    if let Some(p) = args.test.as_deref() {
        let test_options = ParseOptions { tagset: train_tagset, ..options };
        if let Err(e) = load_corpus(p, &test_options) {
            problems.push(e.to_string());
        }
    }
    if problems.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(Failure::Config(problems.join("\n")))
    }
}

/// `synth`: writes a synthetic corpus in CoNLL format.
pub fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    if args.out_file.exists() && !args.force {
        return Err(Failure::Config(format!("{} exists; pass --force to overwrite", args.out_file.display())));
    }
    let config = SynthConfig {
        sentences: args.sentences,
        seed: args.seed,
        outside_fraction: args.outside_fraction,
        ..SynthConfig::default()
    };
    let corpus = generate(&config).map_err(Failure::from_core)?;
    let mut text = Vec::new();
    corpus.write_conll(&mut text).map_err(|e| Failure::Data(e.to_string()))?;
    let dir = args.out_file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = args.out_file.file_name().ok_or_else(|| Failure::Config("--out-file needs a file name".into()))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let io = |e: std::io::Error| Failure::Data(format!("{}: {e}", args.out_file.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, &args.out_file).map_err(io)?;
    Ok(())
}
