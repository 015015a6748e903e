//! Command-line front end: `fit`, `synth`, `validate`, `report`, `replay`.
//!
//! Exit codes are stable: 0 success, 1 a validation or invariant check
//! failed, 2 bad usage or unreadable input.

mod fit;
mod replay;
mod report;
mod synth;
mod validate;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tamperkit::dataset::DatasetError;
use tamperkit::model::{load_parameter_table, ModelError, ParameterTable, PopulationModel};
use tamperkit::pipeline::PipelineError;

pub use fit::cmd_fit;
pub use replay::cmd_replay;
pub use report::cmd_report;
pub use synth::cmd_synth;
pub use validate::{cmd_validate, Finding};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    CheckFailed = 1,
    Usage = 2,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Input or I/O problem; always exit 2.
#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

macro_rules! cli_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError(e.to_string())
            }
        }
    )*};
}
cli_error_from!(DatasetError, ModelError, PipelineError, std::io::Error);

pub type CmdResult = Result<Exit, CliError>;

#[derive(Parser, Debug)]
#[command(name = "tamperkit", version, about = "Tampered text-image synthesis with pixel-exact masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a population model from edit logs.
    Fit(FitArgs),
    /// Synthesize a dataset of tampered images, masks and records.
    Synth(SynthArgs),
    /// Check mask containment, locality and replay over a dataset.
    Validate(ValidateArgs),
    /// Operation frequency report for a dataset or edit logs.
    Report(ReportArgs),
    /// Re-execute one sample record and compare with the stored output.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Edit log file, or directory of `*.tsv` / `*.log` files.
    #[arg(long)]
    pub logs: PathBuf,
    /// Where to write the fitted model (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = tamperkit::model::DEFAULT_INDIVIDUAL_THRESHOLD)]
    pub individual_threshold: f64,
    #[arg(long, default_value_t = tamperkit::model::DEFAULT_POPULATION_THRESHOLD)]
    pub population_threshold: f64,
    /// Model to report the coefficient distance against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory of original images (`png`, `jpg`, `jpeg`).
    #[arg(long)]
    pub sources: PathBuf,
    /// Directory of `{stem}.json` annotation sidecars; defaults to `--sources`.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Population model (JSON); defaults to the table's type weights.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Parameter table (TOML); defaults to the built-in table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub count: usize,
    /// Worker threads; never changes the output.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Stop at the first failing sample instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub overwrite: bool,
    /// Store per-item wall-clock timings in the records (output is then no
    /// longer reproducible byte for byte).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub dataset: PathBuf,
    /// Findings file written when a check fails; defaults to
    /// `{dataset}/findings.json`.
    #[arg(long)]
    pub findings: Option<PathBuf>,
    /// Skip re-executing every record.
    #[arg(long)]
    pub no_replay: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Dataset directory (omit with `--logs`).
    pub dataset: Option<PathBuf>,
    /// Report on edit logs instead of a dataset.
    #[arg(long, conflicts_with = "dataset")]
    pub logs: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Directory of predicted masks `{sample_id}.png` to score.
    #[arg(long)]
    pub pred_masks: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Chi-square significance level.
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    /// Exit 1 when any group fails its chi-square test.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub dataset: PathBuf,
    pub sample_id: String,
    /// Write the replayed image here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command;
/// diagnostics go to stderr, results to `out`.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                Exit::Usage.code()
            } else {
                Exit::Success.code()
            }
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
        Command::Report(a) => cmd_report(&a, out),
        Command::Replay(a) => cmd_replay(&a, out),
    };
    match result {
        Ok(exit) => exit.code(),
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Usage.code()
        }
    }
}

pub(crate) fn load_table(path: Option<&Path>) -> Result<ParameterTable, CliError> {
    match path {
        None => Ok(ParameterTable::default_table()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
            load_parameter_table(&text).map_err(|e| CliError(format!("{}: {e}", p.display())))
        }
    }
}

pub(crate) fn load_model(path: &Path) -> Result<PopulationModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    PopulationModel::from_json(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

/// Writes `text`, ignoring a closed stdout.
pub(crate) fn emit(out: &mut dyn Write, text: impl std::fmt::Display) {
    let _ = writeln!(out, "{text}");
}
