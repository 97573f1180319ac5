//! `sidda` command line: train, eval, ablate and synth.
//!
//! Every command resolves its configuration (defaults, then `--config`, then
//! flags), validates its inputs, writes the resolved config to the output
//! directory and only then starts work. Failures map to distinct exit codes.

mod config;

pub use config::{parse_list, parse_switch, EvalSet, RunConfig};

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::data::{
    generate_synthetic, parse_cascades, split_dataset, write_cascades, Cascade, DatasetSplit,
    ParseOptions,
};
use crate::error::Error;
use crate::eval::{evaluate, EvalReport};
use crate::model::{load_checkpoint, save_checkpoint, ModelParams};
use crate::training::{train, write_log_csv, StopReason, TrainConfig};

pub const CONFIG_FILE: &str = "config.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const REPORT_TABLE_FILE: &str = "eval_report.txt";
pub const REPORT_CSV_FILE: &str = "eval_report.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const CASCADES_FILE: &str = "cascades.txt";
pub const LABELS_FILE: &str = "labels.tsv";

#[derive(Debug, Parser)]
#[command(name = "sidda", version, about = "Disentangled next-node prediction for information cascades")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a cascade file, train a model and save the best checkpoint.
    Train(ModelArgs),
    /// Score a checkpoint with hits@N and map@N.
    Eval {
        #[command(flatten)]
        args: ModelArgs,
        /// Checkpoint to evaluate [default: <out>/checkpoint.bin].
        #[arg(long)]
        checkpoint: Option<String>,
        /// Cascades to score: train, valid, test or all.
        #[arg(long)]
        eval_set: Option<String>,
    },
    /// Train and evaluate one model per (K, D) pair.
    Ablate {
        #[command(flatten)]
        args: ModelArgs,
        /// Comma-separated factor counts.
        #[arg(long)]
        k_list: Option<String>,
        /// Comma-separated embedding sizes.
        #[arg(long)]
        d_list: Option<String>,
    },
    /// Write a synthetic community cascade file and its label sidecar.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub split_seed: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub patience: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    /// on or off.
    #[arg(long)]
    pub gumbel: Option<String>,
    #[arg(long)]
    pub dropout: Option<String>,
    #[arg(long)]
    pub max_len: Option<String>,
    /// Comma-separated cutoffs [default: 10,50,100].
    #[arg(long)]
    pub n_list: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub communities: Option<String>,
    #[arg(long)]
    pub nodes_per_community: Option<String>,
    #[arg(long)]
    pub cross_prob: Option<String>,
    #[arg(long)]
    pub cascades: Option<String>,
    #[arg(long)]
    pub min_length: Option<String>,
    #[arg(long)]
    pub max_length: Option<String>,
    /// on or off.
    #[arg(long)]
    pub revisits: Option<String>,
}

impl ModelArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        [
            ("data", &self.data),
            ("out", &self.out),
            ("seed", &self.seed),
            ("split_seed", &self.split_seed),
            ("k", &self.k),
            ("d", &self.d),
            ("lr", &self.lr),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("tau", &self.tau),
            ("gumbel", &self.gumbel),
            ("dropout", &self.dropout),
            ("max_len", &self.max_len),
            ("n_list", &self.n_list),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }
}

impl SynthArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        [
            ("out", &self.out),
            ("seed", &self.seed),
            ("communities", &self.communities),
            ("nodes_per_community", &self.nodes_per_community),
            ("cross_prob", &self.cross_prob),
            ("cascades", &self.cascades),
            ("min_length", &self.min_length),
            ("max_length", &self.max_length),
            ("revisits", &self.revisits),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }
}

/// Why a command failed; each kind has its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flag or config value.
    Usage(String),
    /// Input file missing or unreadable.
    Input(String),
    /// Output directory or file not writable.
    Output(String),
    /// Input readable but not usable as cascades.
    Data(String),
    /// Checkpoint unreadable or incompatible with the data.
    Checkpoint(String),
    /// Training stopped on a non-finite value.
    Training(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Input(_) => 3,
            Self::Output(_) => 4,
            Self::Data(_) => 5,
            Self::Checkpoint(_) => 6,
            Self::Training(_) => 7,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "{m}"),
            Self::Input(m) => write!(f, "input: {m}"),
            Self::Output(m) => write!(f, "output: {m}"),
            Self::Data(m) => write!(f, "data: {m}"),
            Self::Checkpoint(m) => write!(f, "checkpoint: {m}"),
            Self::Training(m) => write!(f, "training: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

type CliResult<T> = std::result::Result<T, Failure>;

fn output_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Output(format!("{}: {e}", path.display()))
}

fn resolve(config: &Option<PathBuf>, overrides: &[(&str, &String)]) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        cfg.apply_file(&text).map_err(Failure::Usage)?;
    }
    for (key, value) in overrides {
        cfg.set(key, value).map_err(Failure::Usage)?;
    }
    Ok(cfg)
}

fn validate_model_config(cfg: &RunConfig) -> CliResult<()> {
    cfg.train.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if cfg.n_list.contains(&0) {
        return Err(Failure::Usage("n_list entries must be >= 1".into()));
    }
    Ok(())
}

struct LoadedData {
    cascades: Vec<Cascade>,
    num_nodes: usize,
}

fn load_data(cfg: &RunConfig) -> CliResult<LoadedData> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::Usage("--data is required".into()))?;
    let bytes = fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let parsed = parse_cascades(bytes.as_slice(), ParseOptions::default())
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if parsed.dropped > 0 {
        log::warn!("dropped {} cascades shorter than 2 nodes", parsed.dropped);
    }
    Ok(LoadedData {
        num_nodes: parsed.vocab.len(),
        cascades: parsed.cascades,
    })
}

fn split(cfg: &RunConfig, cascades: Vec<Cascade>) -> CliResult<DatasetSplit> {
    split_dataset(cascades, cfg.split_seed).map_err(|e| Failure::Data(e.to_string()))
}

/// Creates the output directory and writes the resolved config into it.
fn prepare_out(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out).map_err(output_err(&cfg.out))?;
    let path = cfg.out.join(CONFIG_FILE);
    fs::write(&path, cfg.to_file_string()).map_err(output_err(&path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> crate::Result<()>) -> CliResult<()> {
    let file = fs::File::create(path).map_err(output_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| Failure::Output(format!("{}: {e}", path.display())))?;
    w.flush().map_err(output_err(path))
}

fn write_report(out: &Path, report: &EvalReport) -> CliResult<()> {
    let table = report.to_table();
    print!("{table}");
    let path = out.join(REPORT_TABLE_FILE);
    fs::write(&path, &table).map_err(output_err(&path))?;
    write_file(&out.join(REPORT_CSV_FILE), |w| report.write_csv(w))
}

fn training_failure(reason: &StopReason) -> Option<Failure> {
    match reason {
        StopReason::Diverged { epoch } => Some(Failure::Training(format!(
            "validation loss became NaN at epoch {epoch}; best earlier checkpoint saved"
        ))),
        StopReason::NonFiniteGradient { epoch, parameter } => Some(Failure::Training(format!(
            "non-finite gradient in `{parameter}` at epoch {epoch}; best earlier checkpoint saved"
        ))),
        StopReason::MaxEpochs | StopReason::EarlyStopped => None,
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&resolve(&args.config, &args.overrides())?),
        Command::Eval {
            args,
            checkpoint,
            eval_set,
        } => {
            let mut overrides = args.overrides();
            if let Some(c) = &checkpoint {
                overrides.push(("checkpoint", c));
            }
            if let Some(s) = &eval_set {
                overrides.push(("eval_set", s));
            }
            cmd_eval(&resolve(&args.config, &overrides)?)
        }
        Command::Ablate { args, k_list, d_list } => {
            let mut overrides = args.overrides();
            if let Some(k) = &k_list {
                overrides.push(("k_list", k));
            }
            if let Some(d) = &d_list {
                overrides.push(("d_list", d));
            }
            cmd_ablate(&resolve(&args.config, &overrides)?)
        }
        Command::Synth(args) => cmd_synth(&resolve(&args.config, &args.overrides())?),
    }
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    validate_model_config(cfg)?;
    let data = load_data(cfg)?;
    let split = split(cfg, data.cascades)?;
    prepare_out(cfg)?;

    let outcome = train(&cfg.train, &split, data.num_nodes).map_err(|e| Failure::Training(e.to_string()))?;
    let ckpt = cfg.out.join(CHECKPOINT_FILE);
    save_checkpoint(&outcome.best, &ckpt).map_err(|e| Failure::Output(format!("{}: {e}", ckpt.display())))?;
    write_file(&cfg.out.join(TRAIN_LOG_FILE), |w| write_log_csv(&outcome.log, w))?;

    match outcome.best_valid_loss {
        Some(loss) => println!(
            "best validation loss {loss:.6} at epoch {} ({:?}); checkpoint {}",
            outcome.best_epoch,
            outcome.stop_reason,
            ckpt.display()
        ),
        None => println!("no epochs run; initial parameters saved to {}", ckpt.display()),
    }
    match training_failure(&outcome.stop_reason) {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

pub fn cmd_eval(cfg: &RunConfig) -> CliResult<()> {
    validate_model_config(cfg)?;
    let ckpt_path = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    if !ckpt_path.is_file() {
        return Err(Failure::Input(format!("{}: checkpoint not found", ckpt_path.display())));
    }
    let data = load_data(cfg)?;
    let params = load_checkpoint(&ckpt_path).map_err(|e| match e {
        Error::Io(io) => Failure::Input(format!("{}: {io}", ckpt_path.display())),
        other => Failure::Checkpoint(format!("{}: {other}", ckpt_path.display())),
    })?;
    check_compatible(&params, data.num_nodes)?;
    let cascades = match cfg.eval_set {
        EvalSet::All => data.cascades,
        set => {
            let s = split(cfg, data.cascades)?;
            match set {
                EvalSet::Train => s.train,
                EvalSet::Valid => s.valid,
                _ => s.test,
            }
        }
    };
    prepare_out(cfg)?;
    let report = evaluate(&params, &cascades, &cfg.n_list).map_err(|e| Failure::Data(e.to_string()))?;
    write_report(&cfg.out, &report)
}

fn check_compatible(params: &ModelParams, num_nodes: usize) -> CliResult<()> {
    if params.num_nodes() != num_nodes {
        return Err(Failure::Checkpoint(format!(
            "vocabulary size mismatch: checkpoint expects N = {} nodes, data has N = {}",
            params.num_nodes(),
            num_nodes
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub factors: usize,
    pub dim: usize,
    pub best_epoch: usize,
    pub valid_loss: Option<f64>,
    pub report: EvalReport,
}

/// Trains one model per (K, D) cell on a shared split and evaluates each on
/// the test cascades. Cells run in parallel; rows come back in grid order.
pub fn run_ablation(
    base: &TrainConfig,
    split: &DatasetSplit,
    num_nodes: usize,
    k_list: &[usize],
    d_list: &[usize],
    cutoffs: &[usize],
) -> crate::Result<Vec<AblationRow>> {
    let cells: Vec<(usize, usize)> = k_list
        .iter()
        .flat_map(|&k| d_list.iter().map(move |&d| (k, d)))
        .collect();
    cells
        .par_iter()
        .map(|&(factors, dim)| {
            let cfg = TrainConfig {
                factors,
                dim,
                ..base.clone()
            };
            let outcome = train(&cfg, split, num_nodes)?;
            if let Some(Failure::Training(msg)) = training_failure(&outcome.stop_reason) {
                log::warn!("K={factors} D={dim}: {msg}");
            }
            let report = evaluate(&outcome.best, &split.test, cutoffs)?;
            Ok(AblationRow {
                factors,
                dim,
                best_epoch: outcome.best_epoch,
                valid_loss: outcome.best_valid_loss,
                report,
            })
        })
        .collect()
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], cutoffs: &[usize], mut w: W) -> crate::Result<()> {
    let mut header = String::from("K,D");
    for n in cutoffs {
        header.push_str(&format!(",hits@{n}"));
    }
    for n in cutoffs {
        header.push_str(&format!(",map@{n}"));
    }
    writeln!(w, "{header},points,best_epoch,valid_loss")?;
    for r in rows {
        write!(w, "{},{}", r.factors, r.dim)?;
        for n in cutoffs {
            write!(w, ",{}", r.report.hits[n])?;
        }
        for n in cutoffs {
            write!(w, ",{}", r.report.map[n])?;
        }
        let loss = r.valid_loss.map(|l| l.to_string()).unwrap_or_default();
        writeln!(w, ",{},{},{loss}", r.report.prediction_points, r.best_epoch)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig) -> CliResult<()> {
    validate_model_config(cfg)?;
    if cfg.k_list.contains(&0) || cfg.d_list.iter().any(|&d| d < 2) {
        return Err(Failure::Usage("k_list entries must be >= 1 and d_list entries >= 2".into()));
    }
    let data = load_data(cfg)?;
    let split = split(cfg, data.cascades)?;
    prepare_out(cfg)?;
    let mut cutoffs = cfg.n_list.clone();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    let rows = run_ablation(&cfg.train, &split, data.num_nodes, &cfg.k_list, &cfg.d_list, &cutoffs)
        .map_err(|e| Failure::Training(e.to_string()))?;
    let path = cfg.out.join(ABLATION_FILE);
    write_file(&path, |w| write_ablation_csv(&rows, &cutoffs, w))?;
    let mut stdout = std::io::stdout().lock();
    write_ablation_csv(&rows, &cutoffs, &mut stdout).map_err(|e| Failure::Output(e.to_string()))?;
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    cfg.synth.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    prepare_out(cfg)?;
    let spec = crate::data::SyntheticSpec {
        seed: cfg.train.seed,
        ..cfg.synth.clone()
    };
    let data = generate_synthetic(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let vocab = data.vocabulary();
    write_file(&cfg.out.join(CASCADES_FILE), |w| write_cascades(&data.cascades, &vocab, w))?;
    write_file(&cfg.out.join(LABELS_FILE), |w| data.write_labels(w))?;
    let distinct: BTreeSet<usize> = data.cascades.iter().flat_map(|c| c.nodes.iter().copied()).collect();
    println!("cascades: {}", data.cascades.len());
    println!("nodes: {}", distinct.len());
    println!("average length: {:.4}", data.average_length());
    Ok(())
}
