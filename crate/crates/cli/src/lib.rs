//! The `srr` command-line tool.
//!
//! Every run writes `run.json` into its output directory. It records the fully
//! resolved arguments, the global seed and the stage seeds derived from it,
//! and `srr rerun` replays it. Failures print one line on stderr,
//! `error category=<category>: <message>`, and exit nonzero (2 for usage errors).

pub mod args;
pub mod commands;
pub mod compare;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use srr_autodiff::AdError;
use srr_net::NetError;

pub use args::Cli;
pub use compare::{check_equivalent_afs, compare_strategies, CompareConfig, CompareOutcome, StrategyAf, AF_TOLERANCE};

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] srr_core::Error),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("equivalent acceleration factors differ by more than 5%: {0}")]
    AfMismatch(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

fn core_category(e: &srr_core::Error) -> &'static str {
    use srr_core::Error as E;
    match e {
        E::Io { .. } | E::Header { .. } | E::UnsupportedPrecision(_) | E::LengthMismatch { .. } | E::Json { .. } => {
            "io"
        }
        E::Diverged { .. } | E::NonFinite(_) => "numeric",
        E::Manifest(_) | E::MissingRecord(_) => "data",
        _ => "invalid-input",
    }
}

impl CliError {
    /// Stable machine-readable failure class.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::AfMismatch(_) => "af-mismatch",
            CliError::Io { .. } => "io",
            CliError::Core(e) => core_category(e),
            CliError::Net(e) => match e {
                NetError::NonFiniteBlock { .. } | NetError::NonFiniteLoss { .. } => "numeric",
                NetError::Io { .. } => "io",
                NetError::Config(_) => "config",
                NetError::Core(c) => core_category(c),
                NetError::Autodiff(a) => match a {
                    AdError::Checkpoint { .. } | AdError::Io { .. } => "io",
                    AdError::NonFinite(_) => "numeric",
                    AdError::Core(c) => core_category(c),
                    _ => "internal",
                },
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Seed for a named stage, derived from the global seed alone.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    // FNV-1a over the stage name selects an independent ChaCha stream.
    let stream = stage.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(global);
    rng.set_stream(stream);
    rng.random()
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    stage_seeds: &'a [(String, u64)],
    config: &'a Cli,
}

/// Write `run.json` for `cli` into `dir`.
pub(crate) fn write_run(dir: &Path, cli: &Cli, stage_seeds: &[(String, u64)]) -> CliResult<()> {
    create_dir(dir)?;
    let rec = RunRecord { tool: "srr", version: env!("CARGO_PKG_VERSION"), seed: cli.seed, stage_seeds, config: cli };
    write_json(&dir.join(RUN_FILE), &rec)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

/// Execute an already parsed command line.
pub fn execute(cli: Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    commands::dispatch(cli)
}

/// Parse `argv` (program name first), run, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprintln!("error category=usage: a subcommand is required; see --help");
                return 2;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error category=usage: {}", first.trim_start_matches("error: ").trim());
            return 2;
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error category={}: {msg}", e.category());
            e.exit_code()
        }
    }
}
