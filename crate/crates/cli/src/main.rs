mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hux_core::CaptionPolicy;

const AFTER_HELP: &str = "\
Settings precedence for caption policy and latency:
  command-line flags > scenario header > config file [defaults] > built-in defaults

Exit codes:
  0  success
  1  I/O failure writing outputs
  2  usage, config or scenario validation error (diagnostic names the line)
  3  backend failure
  4  corrupt memory store

Environment:
  HUX_BACKEND_TOKEN  bearer token for the remote backend";

#[derive(Debug, Parser)]
#[command(name = "hux", version, about = "Multimodal context pipeline simulator", after_help = AFTER_HELP)]
struct Cli {
    /// Config file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write <name>.report.json and <name>.transcript.txt.
    Run(RunArgs),
    /// Print ground-truth events and the counts timeline of a scenario.
    Oracle(OracleArgs),
    /// Add to or query the contextual memory store.
    #[command(subcommand)]
    Memory(MemoryCommand),
    /// Print a saved run report as a transcript.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Caption scheduling policy (overrides the scenario header).
    #[arg(long)]
    policy: Option<CaptionPolicy>,
    /// Simulated captioner latency in ms (overrides the scenario header).
    #[arg(long, value_name = "MS")]
    latency_ms: Option<u64>,
    /// Output directory (overrides [paths] reports).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    scenario: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum MemoryCommand {
    /// Create a record; prints its record id.
    Add(MemoryAddArgs),
    /// Rank stored records against a query; prints `score<TAB>record_id<TAB>keywords`.
    Query(MemoryQueryArgs),
}

#[derive(Debug, Args)]
struct StoreArg {
    /// Store file (overrides [paths] store).
    #[arg(long, value_name = "PATH")]
    store: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MemoryAddArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Caption of the object of interest.
    #[arg(long)]
    ooi_caption: String,
    /// Caption of the whole scene.
    #[arg(long)]
    scene_caption: String,
    #[arg(long)]
    object_type: String,
    #[arg(long)]
    name: Option<String>,
    /// What the user said about the object.
    #[arg(long)]
    context: String,
    #[arg(long, value_name = "PATH")]
    scene_image: String,
    #[arg(long, value_name = "PATH")]
    ooi_image: String,
    #[arg(long, default_value = "")]
    location: String,
    #[arg(long, default_value = "")]
    time: String,
    #[arg(long, default_value = "")]
    device: String,
}

#[derive(Debug, Args)]
struct MemoryQueryArgs {
    #[command(flatten)]
    store: StoreArg,
    query: String,
    /// Maximum number of hits to print.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    report: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hux: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
