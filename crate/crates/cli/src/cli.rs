use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eps_core::dataset::ScenarioKind;
use eps_core::eval::ModelKind;

/// Envelope power spectrum fingerprinting experiments.
///
/// Settings come from a TOML config (`--config`, or `epsid.toml` in the
/// directory named by EPSID_CONFIG_DIR); flags override the file.
#[derive(Debug, Parser)]
#[command(name = "epsid", version)]
pub struct Cli {
    /// TOML run configuration; unknown keys are rejected.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory; every file a command writes goes under it.
    #[arg(long, short = 'o', global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel stages.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// More log output (repeat for debug).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a labelled IQ dataset for one scenario.
    Simulate(SimulateArgs),
    /// Convert an IQ dataset to EPS tensors and write spectrum plot tables.
    Eps(EpsArgs),
    /// Envelope traces and hump counts for small carrier offsets.
    Figure3(Figure3Args),
    /// Train a CNN and save its checkpoint.
    Train(TrainArgs),
    /// Cross-validate or transfer-test a model; writes a report table.
    Evaluate(EvaluateArgs),
    /// Enroll every device of a dataset into a registry.
    Enroll(EnrollArgs),
    /// Verify claimed identities, or screen for rogue devices.
    Verify(VerifyArgs),
    /// Continuous authentication over a stream of frames.
    Auth(AuthArgs),
    /// Run the acceptance suite; exit 1 if any criterion fails.
    Accept(AcceptArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Eps(_) => "eps",
            Command::Figure3(_) => "figure3",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Enroll(_) => "enroll",
            Command::Verify(_) => "verify",
            Command::Auth(_) => "auth",
            Command::Accept(_) => "accept",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// fixed-location, random-location or cross-day.
    #[arg(long)]
    pub scenario: Option<ScenarioKind>,
    /// Number of devices in the population.
    #[arg(long)]
    pub devices: Option<usize>,
    /// Frames per device per domain.
    #[arg(long)]
    pub frames: Option<usize>,
    /// SNR in dB at unit amplitude scale.
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EpsArgs {
    /// IQ dataset to convert.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct Figure3Args {
    /// Trace duration in milliseconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration_ms: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// eps-cnn or iq-cnn.
    #[arg(long, default_value = "eps-cnn")]
    pub model: ModelKind,
    /// Train only on this domain (e.g. day0-locA-wireless).
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// eps-cnn, iq-cnn or nearest-centroid.
    #[arg(long, default_value = "nearest-centroid")]
    pub model: ModelKind,
    /// Test on this dataset after training on `--input`.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Restrict training data to one domain of `--input`.
    #[arg(long)]
    pub train_domain: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Exit 1 if any report's mean accuracy is below this fraction.
    #[arg(long)]
    pub min_accuracy: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    /// IQ or EPS dataset with frames of the devices to enroll.
    #[arg(long)]
    pub input: PathBuf,
    /// Existing registry to extend; a new one is created otherwise.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Use at most this many frames per device (in file order).
    #[arg(long)]
    pub frames: Option<usize>,
    /// Enrollment timestamp stored in the templates (Unix seconds).
    #[arg(long, default_value_t = 0)]
    pub enrolled_at: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Identity every frame claims; defaults to each frame's own label.
    #[arg(long)]
    pub claim: Option<u16>,
    /// Fixed acceptance threshold instead of each template's calibrated one.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Screen frames as legitimate or rogue instead of verifying a claim.
    #[arg(long)]
    pub screen: bool,
}

#[derive(Debug, Args)]
pub struct AuthArgs {
    #[arg(long)]
    pub registry: PathBuf,
    /// Frames in stream order; the first opens the session.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub claim: u16,
    /// Sliding-window length in frames.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AcceptArgs {
    /// `full` (default) or `quick` (smaller populations, one transfer model).
    #[arg(long)]
    pub profile: Option<String>,
    /// Comma-separated criterion ids to run, e.g. A1,A5.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Skip CNN training; A8 and A9 report SKIP.
    #[arg(long)]
    pub no_cnn: bool,
}
