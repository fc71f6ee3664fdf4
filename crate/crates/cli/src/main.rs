mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "objnav", version, about = "Object-goal navigation in procedurally generated indoor scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scene files for a range of seeds.
    GenScenes(GenScenesArgs),
    /// Run one episode and print its result as JSON.
    Run(RunArgs),
    /// Run every (scene, goal) pair of a directory and print the aggregate.
    Batch(BatchArgs),
    /// Draw a replay trace as a PPM (or PGM occupancy) image.
    Render(RenderArgs),
    /// Serve a scripted advisor over HTTP until interrupted.
    MockAdvisor(MockAdvisorArgs),
}

#[derive(Args)]
pub struct GenScenesArgs {
    /// First seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    pub count: u64,
    #[arg(long, default_value_t = 2)]
    pub rooms: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Comma-separated object categories.
    #[arg(long, default_value = "bed,chair,plant", value_delimiter = ',')]
    pub objects: Vec<String>,
    /// JSON scene parameters; replaces the size and object flags.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CommonArgs {
    /// `heuristic`, an advisor base URL, or `script:<file>`.
    #[arg(long)]
    pub advisor: Option<String>,
    /// JSON config file; HYPERNAV_* variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Args)]
pub struct RunArgs {
    /// Scene JSON file.
    #[arg(long)]
    pub scene: PathBuf,
    /// Goal category; defaults to the scene's first category.
    #[arg(long)]
    pub goal: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Append the JSON-lines record (with per-step trace) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a replay trace for `render`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct BatchArgs {
    /// Directory of scene JSON files.
    #[arg(long)]
    pub scene: PathBuf,
    /// JSON array of {"scene", "goal", "seed"}; defaults to each scene's first
    /// category.
    #[arg(long)]
    pub goals: Option<PathBuf>,
    /// Seed used when no goals file is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// JSON-lines results file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RenderArgs {
    /// Replay trace written by `run --trace`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Output image; a `.pgm` extension writes the bare occupancy grid.
    #[arg(long)]
    pub out: PathBuf,
    /// Leave out the block grid and labels.
    #[arg(long)]
    pub no_blocks: bool,
}

#[derive(Args)]
pub struct MockAdvisorArgs {
    /// Answer script: JSON, or one answer per line.
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenScenes(a) => commands::gen_scenes(a),
        Command::Run(a) => commands::run(a),
        Command::Batch(a) => commands::batch(a),
        Command::Render(a) => commands::render(a),
        Command::MockAdvisor(a) => commands::mock_advisor(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
