//! Command-line pipelines: vocabulary, counting, synthetic walks, fitting,
//! evaluation and the two end-to-end demos.
//!
//! Every run writes its fully resolved options to `config.txt` in the output
//! directory. That file can be passed back with `--config` to repeat the run.

mod commands;
mod config;
pub mod demos;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{expand_config, parse_config, render_config};
pub use demos::{
    run_mnist_demo, run_varadhan_demo, MnistDemoConfig, MnistDemoReport, StepDiagnostic,
    VaradhanDemoConfig, VaradhanDemoReport,
};

#[derive(Debug, Parser)]
#[command(name = "markov-embed", version, about = "Metric-recovery embeddings from co-occurrence counts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GlobalArgs {
    /// Root seed; every stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Threads for co-occurrence counting.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// `key = value` file of option defaults; command-line flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a frequency-sorted vocabulary from a corpus.
    Vocab(VocabArgs),
    /// Count windowed co-occurrences of in-vocabulary tokens.
    Count(CountArgs),
    /// Sample a synthetic corpus from a latent or graph walk.
    Walk(WalkArgs),
    /// Fit word and context vectors to a count file.
    Embed(EmbedArgs),
    /// Score vectors on analogy, SAT, sequence and classification items.
    Eval(EvalArgs),
    /// Regress log co-occurrences of point tokens on squared distances.
    Diagnose(DiagnoseArgs),
    /// Random walks on a kNN graph of MNIST digits, embedded and scored by label purity.
    DemoMnist(MnistArgs),
    /// Step sweep of the distance diagnostic on a kNN graph over the unit square.
    DemoVaradhan(VaradhanArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Vocab(_) => "vocab",
            Command::Count(_) => "count",
            Command::Walk(_) => "walk",
            Command::Embed(_) => "embed",
            Command::Eval(_) => "eval",
            Command::Diagnose(_) => "diagnose",
            Command::DemoMnist(_) => "demo-mnist",
            Command::DemoVaradhan(_) => "demo-varadhan",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TokenizerArgs {
    #[arg(long)]
    pub lowercase: bool,
    #[arg(long)]
    pub strip_punctuation: bool,
    #[arg(long)]
    pub strip_numbers: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct VocabArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Keep at most this many of the most frequent words.
    #[arg(long, default_value_t = 100_000)]
    pub max: usize,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    Harmonic,
    Uniform,
    Raw,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CountArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = WeightingArg::Harmonic)]
    pub weighting: WeightingArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkKind {
    /// Chain with Gaussian-kernel transitions between the points.
    Gaussian,
    /// Latent topic drifting over a mixture density, emitting nearby points.
    Topic,
    /// Simple random walks on a kNN or ε-ball graph over the points.
    Graph,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct WalkArgs {
    #[arg(long, value_enum, default_value_t = WalkKind::Gaussian)]
    pub kind: WalkKind,
    /// Point file; uniform samples from the unit cube when absent.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// Tokens to sample for the gaussian and topic walks.
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub sentence_length: usize,
    /// Redraw the gaussian walk state from the stationary law at each sentence.
    #[arg(long)]
    pub restart: bool,
    #[arg(long, default_value_t = 0.2)]
    pub sigma_bar: f64,
    /// Topic density as `weight@m1,m2,..@std;...`; one standard Gaussian at the origin by default.
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub knn: usize,
    /// Use an ε-ball graph instead of kNN.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub walks: usize,
    #[arg(long, default_value_t = 200)]
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    /// Negative-binomial metric regression.
    Nb,
    Glove,
    Softmax,
    /// Symmetric factorization of the shifted, truncated PMI matrix.
    Svd,
    /// Classical MDS of the log counts.
    Mds,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EmbedArgs {
    #[arg(long)]
    pub counts: PathBuf,
    /// Vocabulary naming the count rows; row ids are used as words when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LossArg::Nb)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = crate::optimizer::DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Fixed initial step; line-searched when absent.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub line_search_start: f64,
    #[arg(long, default_value_t = 10.0)]
    pub skip_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zero_ratio: f64,
    #[arg(long, default_value_t = 100.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 0.75)]
    pub exponent: f64,
    /// PMI shift before truncation at zero.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    /// Constant added to every count before PMI.
    #[arg(long)]
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Cosine,
    L2,
    DiffCosine,
}

impl From<MetricArg> for crate::evaluate::Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Self::Cosine,
            MetricArg::L2 => Self::L2,
            MetricArg::DiffCosine => Self::DiffCosine,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Vectors in word2vec text format.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Question files: `.sat`, `.tsv`, or Google analogy format otherwise.
    #[arg(long, required = true, num_args = 1..)]
    pub questions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    /// Open-vocabulary answers come from the first this many vectors.
    #[arg(long, default_value_t = 30_000)]
    pub answer_limit: usize,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Keep query words among open-vocabulary candidates.
    #[arg(long)]
    pub no_exclude: bool,
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub points: PathBuf,
    /// Vocabulary whose words are point indices; row ids are point indices when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub t_hat: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MnistArgs {
    /// IDX image file, optionally gzipped.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub knn: usize,
    #[arg(long, default_value_t = 10)]
    pub walks: usize,
    #[arg(long, default_value_t = 200)]
    pub length: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = crate::optimizer::DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, default_value_t = crate::evaluate::DEFAULT_PURITY_K)]
    pub purity_k: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct VaradhanArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub knn: usize,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "2,4,8,16")]
    pub steps: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub walks: usize,
    #[arg(long, default_value_t = 200)]
    pub length: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
}

/// Files written by a run. Dropping the guard before [`Artifacts::commit`]
/// deletes them again, along with the output directory if the run created it.
pub(crate) struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    keep: bool,
}

impl Artifacts {
    pub(crate) fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            keep: false,
        })
    }

    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub(crate) fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub(crate) fn commit(mut self) {
        self.keep = true;
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if self.keep {
            return;
        }
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

fn subcommand_names() -> Vec<String> {
    use clap::CommandFactory;
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 2 for usage errors, 1 for failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv, &subcommand_names()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
