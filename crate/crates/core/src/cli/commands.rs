//! `ecoc` subcommands: `gen-code`, `synth-data`, `train`, `analyze`.
//!
//! Exit codes: 0 on success, 2 for usage or configuration problems, 3 when
//! training diverges.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::{CodeSpec, DataSource, ExperimentConfig};
use crate::analysis::{ablation_csv, attribute_correlation, bit_ablation, confusion, predictions};
use crate::codes::{self, binarize, Binarization, CodeKind, CodeMatrix};
use crate::data::{self, AttributeTable, Dataset, SynthConfig};
use crate::error::{EcocError, Result};
use crate::io::write_atomic;
use crate::nn::{self, metrics_csv, EpochMetrics, NetParams};
use crate::spectral::{similarity_from_class_means, spectral_code, SimilarityGraph};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ecoc", version, about = "Error-correcting output code embeddings for neural network training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Onehot,
    Gaussian,
    Dense,
    Spectral,
}

impl From<Strategy> for CodeKind {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Onehot => CodeKind::OneHot,
            Strategy::Gaussian => CodeKind::Gaussian,
            Strategy::Dense => CodeKind::DenseRandom,
            Strategy::Spectral => CodeKind::Spectral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BinarizeArg {
    Raw,
    Zero,
    Median,
}

impl From<BinarizeArg> for Binarization {
    fn from(b: BinarizeArg) -> Self {
        match b {
            BinarizeArg::Raw => Binarization::Raw,
            BinarizeArg::Zero => Binarization::Zero,
            BinarizeArg::Median => Binarization::Median,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Confusion,
    Ablate,
    Correlate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RowNorm {
    Auto,
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a code matrix and write it as CSV.
    GenCode {
        #[arg(long, value_enum)]
        strategy: Strategy,
        #[arg(long)]
        classes: usize,
        /// Code length; defaults to floor(10 log2 n) (n for one-hot).
        #[arg(long)]
        bits: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BinarizeArg::Raw)]
        binarize: BinarizeArg,
        #[arg(long, default_value_t = codes::DEFAULT_DENSE_CANDIDATES)]
        candidates: usize,
        /// Class similarity CSV (spectral codes).
        #[arg(long)]
        similarity: Option<PathBuf>,
        /// Dataset CSV whose class means define the similarity (spectral codes).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic hierarchical dataset.
    SynthData {
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        #[arg(long, default_value_t = 40)]
        samples_per_class: usize,
        #[arg(long, default_value_t = 4.0)]
        class_sep: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-class attribute table here.
        #[arg(long)]
        attributes: Option<PathBuf>,
    },
    /// Run data -> code -> training from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a trained model.
    Analyze {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// Comma-separated prefix lengths for `ablate`; defaults to 1..=k.
        #[arg(long, value_delimiter = ',')]
        bits: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = RowNorm::Auto)]
        normalize_rows: RowNorm,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failed command: its exit code and message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<EcocError> for CliError {
    fn from(e: EcocError) -> Self {
        let code = if matches!(e, EcocError::TrainingDiverged(_)) { EXIT_DIVERGED } else { EXIT_USAGE };
        Self { code, message: e.to_string() }
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::GenCode { strategy, classes, bits, seed, binarize, candidates, similarity, dataset, out } => {
            cmd_gen_code(strategy.into(), classes, bits, seed, binarize.into(), candidates, similarity, dataset, &out)
        }
        Command::SynthData { depth, branching, samples_per_class, class_sep, noise, dim, seed, out, attributes } => {
            let cfg = SynthConfig { depth, branching, samples_per_class, class_sep, noise_sigma: noise, dim, seed };
            cmd_synth_data(&cfg, &out, attributes.as_deref())
        }
        Command::Train { config, out } => cmd_train(&config, out).map(|_| ()),
        Command::Analyze { mode, code, model, data, attributes, bits, normalize_rows, out } => {
            cmd_analyze(mode, &code, model.as_deref(), data.as_deref(), attributes.as_deref(), bits, normalize_rows, &out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen_code(
    kind: CodeKind,
    classes: usize,
    bits: Option<usize>,
    seed: u64,
    binarization: Binarization,
    candidates: usize,
    similarity: Option<PathBuf>,
    dataset: Option<PathBuf>,
    out: &Path,
) -> std::result::Result<(), CliError> {
    if classes < 2 {
        return Err(CliError::usage("--classes must be at least 2"));
    }
    let spec = CodeSpec { binarization, seed, candidates, ..CodeSpec::new(kind, bits) };
    let k = spec.resolve_bits(classes).map_err(|e| CliError::usage(format!("--bits: {e}")))?;
    if kind == CodeKind::OneHot && binarization != Binarization::Raw {
        return Err(CliError::usage("--binarize: one-hot codes are already binary"));
    }
    if kind == CodeKind::DenseRandom && candidates == 0 {
        return Err(CliError::usage("--candidates must be positive"));
    }
    let graph = if kind == CodeKind::Spectral {
        Some(match (similarity, dataset) {
            (Some(path), None) => {
                let g = SimilarityGraph::<f64>::from_csv_str(&fs::read_to_string(&path)?)?;
                if g.n() != classes {
                    return Err(CliError::usage(format!("--similarity has {} classes, --classes is {classes}", g.n())));
                }
                g
            }
            (None, Some(path)) => {
                let d: Dataset<f64> = data::load_csv(&path, Some(classes))?;
                similarity_from_class_means(d.features(), d.labels(), classes)?
            }
            _ => return Err(CliError::usage("--strategy spectral needs exactly one of --similarity or --dataset")),
        })
    } else {
        None
    };
    let code = build_code(&spec, classes, k, graph.as_ref())?;
    write_atomic(out, code.to_csv_string().as_bytes())?;
    let m = codes::code_metrics(&code);
    println!("wrote {} ({} classes x {} bits, {} / {})", out.display(), code.n(), code.k(), code.kind(), code.binarization());
    match m.min_row_hamming {
        Some(h) => println!("min_row_hamming = {h}"),
        None => println!("min_row_hamming = n/a (real-valued code)"),
    }
    println!("max_abs_row_corr = {:.6}", m.max_abs_row_corr);
    println!("max_abs_col_corr = {:.6}", m.max_abs_col_corr);
    let (lo, hi) = m.column_balance.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    println!("column_balance in [{lo:.6}, {hi:.6}]");
    Ok(())
}

/// Builds the code described by `spec` with `k` bits. Spectral codes need
/// the class-similarity graph.
pub fn build_code(spec: &CodeSpec, n: usize, k: usize, graph: Option<&SimilarityGraph<f64>>) -> Result<CodeMatrix<f64>> {
    let raw = match spec.strategy {
        CodeKind::OneHot => codes::one_hot(n)?,
        CodeKind::Gaussian => codes::gaussian_code(n, k, spec.seed)?,
        CodeKind::DenseRandom => codes::dense_random_code(n, k, spec.candidates, spec.seed)?,
        CodeKind::Spectral => {
            let g = graph.ok_or_else(|| EcocError::Config("spectral codes need a similarity graph".into()))?;
            spectral_code(g, k)?
        }
    };
    let code = match spec.binarization {
        Binarization::Raw => raw,
        b => binarize(&raw, b)?,
    };
    match spec.normalize_rows {
        Some(on) => code.with_normalize_rows(on),
        None => Ok(code),
    }
}

fn cmd_synth_data(cfg: &SynthConfig, out: &Path, attributes: Option<&Path>) -> std::result::Result<(), CliError> {
    let d: Dataset<f64> = data::synth_hierarchical(cfg)?;
    d.save_csv(out)?;
    if let (Some(path), Some(table)) = (attributes, d.attributes()) {
        table.save(path)?;
    }
    println!("wrote {} ({} samples, {} classes, {} features)", out.display(), d.len(), d.n_classes(), d.feature_dim());
    Ok(())
}

/// Everything produced by one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub train: Dataset<f64>,
    pub eval: Dataset<f64>,
    pub code: CodeMatrix<f64>,
    pub params: NetParams<f64>,
    pub metrics: Vec<EpochMetrics>,
}

impl ExperimentRun {
    pub fn final_eval_accuracy(&self) -> f64 {
        self.metrics.last().and_then(|m| m.eval).map_or(f64::NAN, |e| e.accuracy)
    }
}

/// Loads or generates the dataset named by `source`.
pub fn load_data(source: &DataSource) -> Result<Dataset<f64>> {
    match source {
        DataSource::Synthetic(s) => data::synth_hierarchical(s),
        DataSource::Csv { path, attributes, n_classes } => {
            let d: Dataset<f64> = data::load_csv(path, *n_classes)?;
            match attributes {
                Some(a) => d.with_attributes(AttributeTable::load(a)?),
                None => Ok(d),
            }
        }
    }
}

/// data -> split -> code -> network -> SGD. Spectral codes take their class
/// similarity from the training split's class-mean features.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let all = load_data(&cfg.data)?;
    let n = all.n_classes();
    let k = cfg.code.resolve_bits(n)?;
    let (train, eval) = data::split(&all, cfg.train_fraction, cfg.split_seed)?;
    let graph = match cfg.code.strategy {
        CodeKind::Spectral => Some(similarity_from_class_means(train.features(), train.labels(), n)?),
        _ => None,
    };
    let code = build_code(&cfg.code, n, k, graph.as_ref())?;
    let mut sizes = vec![all.feature_dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(k);
    let params = NetParams::init(&sizes, cfg.net_seed)?;
    let outcome = nn::train(params, &train, Some(&eval), &code, &cfg.train)?;
    Ok(ExperimentRun { train, eval, code, params: outcome.params, metrics: outcome.metrics })
}

/// Runs the experiment and writes `metrics.csv`, `model.bin`, `config.echo`,
/// `code.csv`, `eval.csv` and, when available, `attributes.csv`.
pub fn cmd_train(config: &Path, out: Option<PathBuf>) -> std::result::Result<ExperimentRun, CliError> {
    let text = fs::read_to_string(config).map_err(|e| CliError::usage(format!("{}: {e}", config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    let run = run_experiment(&cfg)?;
    let dir = &cfg.output_dir;
    write_atomic(dir.join("config.echo"), cfg.echo().as_bytes())?;
    write_atomic(dir.join("metrics.csv"), metrics_csv(&run.metrics).as_bytes())?;
    write_atomic(dir.join("model.bin"), &run.params.to_bytes())?;
    write_atomic(dir.join("code.csv"), run.code.to_csv_string().as_bytes())?;
    run.eval.save_csv(dir.join("eval.csv"))?;
    if let Some(a) = run.eval.attributes() {
        a.save(dir.join("attributes.csv"))?;
    }
    if let Some(last) = run.metrics.last() {
        println!(
            "epoch {}: train loss {:.4} acc {:.4}{}",
            last.epoch,
            last.train.loss,
            last.train.accuracy,
            last.eval.map(|e| format!(", eval acc {:.4}", e.accuracy)).unwrap_or_default()
        );
    }
    println!("wrote {}", dir.display());
    Ok(run)
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    mode: Mode,
    code_path: &Path,
    model: Option<&Path>,
    data_path: Option<&Path>,
    attributes: Option<&Path>,
    bits: Option<Vec<usize>>,
    normalize_rows: RowNorm,
    out: &Path,
) -> std::result::Result<(), CliError> {
    let mut code = CodeMatrix::<f64>::from_csv_str(&fs::read_to_string(code_path)?)?;
    code = match normalize_rows {
        RowNorm::Auto => code,
        RowNorm::On => code.with_normalize_rows(true)?,
        RowNorm::Off => code.with_normalize_rows(false)?,
    };
    let report = match mode {
        Mode::Correlate => {
            let path = attributes.ok_or_else(|| CliError::usage("--mode correlate needs --attributes (the dataset has no attribute table)"))?;
            let table = AttributeTable::load(path)?;
            let rep = attribute_correlation(&code, &table)?;
            for a in &rep.skipped_attributes {
                eprintln!("note: attribute `{}` is constant across classes; skipped", table.names[*a]);
            }
            for b in &rep.skipped_bits {
                eprintln!("note: bit {b} is constant across classes; skipped");
            }
            rep.to_csv_string()
        }
        Mode::Confusion | Mode::Ablate => {
            let model = model.ok_or_else(|| CliError::usage("--model is required for this mode"))?;
            let data_path = data_path.ok_or_else(|| CliError::usage("--data is required for this mode"))?;
            let params = NetParams::<f64>::from_bytes(&fs::read(model)?)?;
            let d: Dataset<f64> = data::load_csv(data_path, Some(code.n()))?;
            if params.input_dim() != d.feature_dim() || params.output_dim() != code.k() {
                return Err(CliError::usage(format!(
                    "model maps {} -> {} but data has {} features and the code has {} bits",
                    params.input_dim(),
                    params.output_dim(),
                    d.feature_dim(),
                    code.k()
                )));
            }
            if mode == Mode::Confusion {
                let preds = predictions(&params, &d, &code)?;
                confusion(&preds, d.labels(), code.n())?.to_csv_string()
            } else {
                let js = bits.unwrap_or_else(|| (1..=code.k()).collect());
                ablation_csv(&bit_ablation(&params, &d, &code, &js)?)
            }
        }
    };
    write_atomic(out, report.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
