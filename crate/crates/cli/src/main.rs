mod commands;
mod report;
mod session;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::RunReport;

#[derive(Debug, Parser)]
#[command(name = "layoutforge", version, about = "Text-to-layout generation, evaluation and corpus tools")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Gateway config (TOML). Falls back to ./layoutforge.config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the decode seed of every model role.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper bound on concurrently processed items.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Replay)]
    pub mode: ModeArg,
    /// Cassette file; required in replay and record mode.
    #[arg(long, global = true)]
    pub cassette: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Include per-stage wall-clock times in the report.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Replay,
    Record,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse scene files and check their invariants.
    Validate { files: Vec<PathBuf> },
    /// Rasterize a scene file top-down to PNG.
    Render {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: u32,
    },
    /// Out-of-bound and collision rates of a scene.
    Metrics {
        scene: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        tol: f64,
    },
    /// Evaluator verdicts and the seven validity ratios of a layout.
    Score {
        scene: PathBuf,
        #[arg(long)]
        description: String,
        /// Reasoning record (JSON) that produced the layout.
        #[arg(long)]
        cot: Option<PathBuf>,
    },
    /// Entropy weights and rewards of every batch in a directory.
    Reward { batch_dir: PathBuf },
    /// Preference pairs from every batch in a directory.
    Pairs {
        batch_dir: PathBuf,
        #[arg(long, default_value_t = 0.20)]
        threshold: f64,
        /// Keep at most this many pairs per prompt, widest margins first.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotated fine-tuning records from ground-truth scene files.
    SftBuild {
        gt_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scene descriptions at three granularities.
    Describe {
        #[arg(long, default_value_t = 1)]
        scene_types: usize,
        /// Coarse:medium:fine counts per scene type.
        #[arg(long, default_value = "2:2:1")]
        quotas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draws and scores several layouts for one prompt.
    Sample {
        /// Scene description.
        prompt: String,
        /// Room size as LENGTHxWIDTHxHEIGHT in pixels, e.g. 256x200x160.
        #[arg(long)]
        room: String,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Prefix of every output file name.
        #[arg(long, default_value = "prompt")]
        id: String,
        /// Directory for output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Full text-to-scene run.
    Generate {
        /// Scene description.
        prompt: String,
        /// Room size as LENGTHxWIDTHxHEIGHT in pixels, e.g. 256x200x160.
        #[arg(long)]
        room: String,
        /// Maximum evaluate-and-update rounds.
        #[arg(long, default_value_t = 3)]
        max_iters: usize,
        /// JSON list of asset records, one per object.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Prefix of every output file name.
        #[arg(long, default_value = "scene")]
        id: String,
        /// Directory for output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Alignment loop on an existing lifted scene.
    Align {
        scene: PathBuf,
        /// Maximum evaluate-and-update rounds.
        #[arg(long, default_value_t = 3)]
        max_iters: usize,
        #[arg(long)]
        description: String,
        #[arg(long)]
        cot: Option<PathBuf>,
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Prefix of every output file name.
        #[arg(long, default_value = "aligned")]
        id: String,
        /// Directory for output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Render { .. } => "render",
            Command::Metrics { .. } => "metrics",
            Command::Score { .. } => "score",
            Command::Reward { .. } => "reward",
            Command::Pairs { .. } => "pairs",
            Command::SftBuild { .. } => "sft-build",
            Command::Describe { .. } => "describe",
            Command::Sample { .. } => "sample",
            Command::Generate { .. } => "generate",
            Command::Align { .. } => "align",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let mut report = RunReport::new(cli.command.name(), cli.global.timings);
    let mut report_file = None;
    if let Err(commands::Abort::Usage(msg)) = commands::run(&cli, &mut report, &mut report_file) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let text = if cli.global.json { report.to_json() } else { report.to_text() };
    print!("{text}");
    if let Some(path) = report_file {
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    ExitCode::from(report.exit_code as u8)
}
