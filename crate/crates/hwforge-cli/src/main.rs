//! hwforge command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 partial
//! failure (some records failed). Diagnostics go to stderr; machine
//! output (reports, manifests) goes to stdout.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

use commands::CmdError;

#[derive(Parser)]
#[command(
    name = "hwforge",
    version,
    about = "Synthesize offline handwriting images from pen trajectories and score recognizer output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-subset stroke/background beta color models from
    /// reference grayscale images (one subdirectory per subset).
    FitColors(FitColorsArgs),
    /// Render a single ink record to one image.
    Render(RenderArgs),
    /// Batch-generate an image tree plus manifest from an ink corpus.
    Generate(GenerateArgs),
    /// Score hypothesis transcripts against references (CER/WER).
    Score(ScoreArgs),
    /// Character-class frequency statistics over a manifest.
    Stats(StatsArgs),
    /// Cohen's kappa agreement between two label files.
    Kappa(KappaArgs),
}

#[derive(clap::Args)]
struct FitColorsArgs {
    /// Directory of reference images, one subdirectory per subset.
    #[arg(long, value_name = "DIR")]
    images: PathBuf,
    /// Output color-model file (JSON).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Maximum color samples kept per class per subset.
    #[arg(long, value_name = "N", default_value_t = 1_000_000)]
    cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum WidthModeArg {
    Constant,
    Variable,
}

#[derive(clap::Args)]
struct PipelineFlags {
    /// Master seed for deterministic generation.
    #[arg(long, value_name = "N", env = "HWFORGE_SEED")]
    seed: Option<u64>,
    /// Stroke-width mode.
    #[arg(long, value_name = "MODE")]
    width_mode: Option<WidthModeArg>,
    /// Minimum per-image stroke thickness m.
    #[arg(long, value_name = "N")]
    m_min: Option<u32>,
    /// Maximum per-image stroke thickness m.
    #[arg(long, value_name = "N")]
    m_max: Option<u32>,
    /// Pad every image to WxH pixels (e.g. 400x120).
    #[arg(long, value_name = "WxH", value_parser = parse_pad)]
    pad: Option<(u32, u32)>,
    /// Use one flat color per class instead of per-pixel draws.
    #[arg(long)]
    flat_color: bool,
    /// Pipeline config file (JSON mirroring the TransferConfig fields);
    /// command-line flags override file values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RenderArgs {
    /// Ink corpus file (native line-delimited format).
    #[arg(long, value_name = "FILE")]
    ink: PathBuf,
    /// Color-model file produced by fit-colors.
    #[arg(long, value_name = "FILE")]
    colors: PathBuf,
    /// Output image path (.pgm, or .png for PNG output).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Record id to render (default: the first record).
    #[arg(long, value_name = "ID")]
    id: Option<String>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Ink corpus file (native line-delimited format).
    #[arg(long, value_name = "FILE")]
    ink: PathBuf,
    /// Color-model file produced by fit-colors.
    #[arg(long, value_name = "FILE")]
    colors: PathBuf,
    /// Output directory for images/ and manifest.jsonl.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Worker count (0 = all cores). Output is identical for any value.
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Split tag recorded in every manifest row.
    #[arg(long, value_name = "NAME")]
    split: Option<String>,
    /// Write PNG images instead of PGM.
    #[arg(long)]
    png: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(clap::Args)]
struct ScoreArgs {
    /// Reference transcripts, one per line (requires --hyps).
    #[arg(long, value_name = "FILE", requires = "hyps", conflicts_with = "pairs")]
    refs: Option<PathBuf>,
    /// Hypothesis transcripts, one per line, aligned with --refs.
    #[arg(long, value_name = "FILE", requires = "refs", conflicts_with = "pairs")]
    hyps: Option<PathBuf>,
    /// Paired file: one JSON object per line with id, reference,
    /// hypothesis fields.
    #[arg(long, value_name = "FILE")]
    pairs: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Numeric,
    Alphabetic,
    All,
}

#[derive(clap::Args)]
struct StatsArgs {
    /// Manifest file written by generate.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Character class to report.
    #[arg(long, value_name = "CLASS", value_enum, default_value_t = ClassArg::Numeric)]
    class: ClassArg,
}

#[derive(clap::Args)]
struct KappaArgs {
    /// First rater's labels, one per line.
    #[arg(long, value_name = "FILE")]
    a: PathBuf,
    /// Second rater's labels, one per line, aligned with --a.
    #[arg(long, value_name = "FILE")]
    b: PathBuf,
}

fn parse_pad(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("pad dimensions must be positive".into());
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::FitColors(args) => commands::fit_colors(args),
        Command::Render(args) => commands::render(args),
        Command::Generate(args) => commands::generate(args),
        Command::Score(args) => commands::score(args),
        Command::Stats(args) => commands::stats(args),
        Command::Kappa(args) => commands::kappa(args),
    };

    match result {
        Ok(code) => code,
        Err(CmdError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
