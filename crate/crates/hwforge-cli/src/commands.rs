//! Command implementations: thin file-I/O wrappers over the library
//! operations, with the documented exit-code taxonomy.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Deserialize;

use hwforge::color::{build_color_model, extract_color_samples, pool_color_samples};
use hwforge::imageio;
use hwforge::ink;
use hwforge::metrics::{self, CharClass, EvalPair};
use hwforge::pipeline::{self, GenerateOptions, ImageFormat, TransferConfig};
use hwforge::raster::WidthMode;
use hwforge::{ColorModel, ColorModelFile, InkSample};

use crate::{
    ClassArg, FitColorsArgs, GenerateArgs, KappaArgs, PipelineFlags, RenderArgs, ScoreArgs,
    StatsArgs, WidthModeArg,
};

pub enum CmdError {
    Usage(String),
    Data(String),
}

fn data<E: std::fmt::Display>(err: E) -> CmdError {
    CmdError::Data(err.to_string())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CmdError> {
    fs::read(path).map_err(|e| CmdError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CmdError> {
    fs::read_to_string(path).map_err(|e| CmdError::Data(format!("{}: {e}", path.display())))
}

fn load_color_model(path: &Path) -> Result<(Vec<String>, ColorModel), CmdError> {
    let file: ColorModelFile = serde_json::from_slice(&read_file(path)?)
        .map_err(|e| CmdError::Data(format!("{}: {e}", path.display())))?;
    file.into_model().map_err(data)
}

fn load_ink(path: &Path) -> Result<Vec<InkSample>, CmdError> {
    ink::parse_ink_corpus(&read_file(path)?)
        .map_err(|e| CmdError::Data(format!("{}: {e}", path.display())))
}

/// Resolve the effective TransferConfig: config file (if given), then
/// command-line overrides on top.
fn resolve_config(flags: &PipelineFlags) -> Result<TransferConfig, CmdError> {
    let mut config = match &flags.config {
        None => TransferConfig::default(),
        Some(path) => serde_json::from_slice(&read_file(path)?)
            .map_err(|e| CmdError::Data(format!("{}: {e}", path.display())))?,
    };
    if let Some(seed) = flags.seed {
        config.master_seed = seed;
    }
    if let Some(mode) = flags.width_mode {
        config.width_model.mode = match mode {
            WidthModeArg::Constant => WidthMode::Constant,
            WidthModeArg::Variable => WidthMode::Variable,
        };
    }
    if let Some(m_min) = flags.m_min {
        config.width_model.m_min = m_min;
    }
    if let Some(m_max) = flags.m_max {
        config.width_model.m_max = m_max;
    }
    if let Some(pad) = flags.pad {
        config.pad_to = Some(pad);
    }
    if flags.flat_color {
        config.flat_color = true;
    }
    config.validate().map_err(data)?;
    Ok(config)
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm") | Some("png")
    )
}

pub fn fit_colors(args: FitColorsArgs) -> Result<ExitCode, CmdError> {
    let mut subset_dirs: Vec<PathBuf> = fs::read_dir(&args.images)
        .map_err(|e| CmdError::Data(format!("{}: {e}", args.images.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subset_dirs.sort();
    if subset_dirs.is_empty() {
        return Err(CmdError::Data(format!(
            "{}: no subset subdirectories found",
            args.images.display()
        )));
    }

    let mut subset_names = Vec::new();
    let mut sample_sets = Vec::new();
    let mut failed_subsets = 0usize;
    for dir in &subset_dirs {
        let subset = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
            Ok(rd) => rd
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image_file(p))
                .collect(),
            Err(e) => {
                eprintln!("warning: subset {subset}: {e}");
                failed_subsets += 1;
                continue;
            }
        };
        files.sort();

        let mut per_image = Vec::new();
        for file in &files {
            match imageio::read_gray_auto(file)
                .map_err(|e| e.to_string())
                .and_then(|img| {
                    extract_color_samples(&img, &subset, args.cap).map_err(|e| e.to_string())
                }) {
                Ok(set) => per_image.push(set),
                Err(e) => eprintln!("warning: skipping {}: {e}", file.display()),
            }
        }
        if per_image.is_empty() {
            eprintln!("warning: subset {subset}: no usable images");
            failed_subsets += 1;
            continue;
        }
        let pooled = pool_color_samples(&per_image, &subset, args.cap);
        match build_color_model(std::slice::from_ref(&pooled)) {
            Ok(_) => {
                subset_names.push(subset);
                sample_sets.push(pooled);
            }
            Err(e) => {
                eprintln!("warning: subset {subset}: {e}");
                failed_subsets += 1;
            }
        }
    }

    if sample_sets.is_empty() {
        return Err(CmdError::Data("all subsets failed to fit".into()));
    }
    let model = build_color_model(&sample_sets).map_err(data)?;
    let file = ColorModelFile::from_model(subset_names, &model);
    let mut json = serde_json::to_string_pretty(&file).map_err(data)?;
    json.push('\n');
    fs::write(&args.out, json).map_err(|e| CmdError::Data(format!("{}: {e}", args.out.display())))?;
    eprintln!(
        "fitted {} subset(s) -> {}",
        file.subsets.len(),
        args.out.display()
    );
    Ok(if failed_subsets > 0 {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

pub fn render(args: RenderArgs) -> Result<ExitCode, CmdError> {
    let config = resolve_config(&args.pipeline)?;
    let samples = load_ink(&args.ink)?;
    let sample = match &args.id {
        None => samples.first().ok_or_else(|| {
            CmdError::Data(format!("{}: no records", args.ink.display()))
        })?,
        Some(id) => samples
            .iter()
            .find(|s| s.id() == id)
            .ok_or_else(|| CmdError::Data(format!("record {id:?} not found")))?,
    };
    let (_, model) = load_color_model(&args.colors)?;

    let seed = pipeline::record_seed(config.master_seed, sample.id());
    let (image, mut record) = pipeline::transfer(sample, &model, &config, seed).map_err(data)?;

    let is_png = args
        .out
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        imageio::write_png(&args.out, &image).map_err(data)?;
    } else {
        imageio::write_pgm(&args.out, &image).map_err(data)?;
    }
    record.image_path = args.out.display().to_string();
    println!("{}", serde_json::to_string(&record).map_err(data)?);
    Ok(ExitCode::SUCCESS)
}

pub fn generate(args: GenerateArgs) -> Result<ExitCode, CmdError> {
    let config = resolve_config(&args.pipeline)?;
    let samples = load_ink(&args.ink)?;
    let (_, model) = load_color_model(&args.colors)?;
    let options = GenerateOptions {
        jobs: args.jobs,
        split: args.split.clone(),
        format: if args.png {
            ImageFormat::Png
        } else {
            ImageFormat::Pgm
        },
    };
    let report = pipeline::generate_dataset(&samples, &model, &config, &args.out_dir, &options)
        .map_err(data)?;

    for failure in &report.failures {
        eprintln!("failed {}: {}", failure.id, failure.error);
    }
    eprintln!(
        "generated {} image(s), {} failure(s) -> {}",
        report.records.len(),
        report.failures.len(),
        report.manifest_path.display()
    );
    println!(
        "{}",
        serde_json::json!({
            "generated": report.records.len(),
            "failed": report.failures.len(),
            "manifest": report.manifest_path.display().to_string(),
        })
    );
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

#[derive(Deserialize)]
struct WirePair {
    id: String,
    reference: String,
    hypothesis: String,
}

pub fn score(args: ScoreArgs) -> Result<ExitCode, CmdError> {
    let pairs: Vec<EvalPair> = match (&args.refs, &args.hyps, &args.pairs) {
        (Some(refs_path), Some(hyps_path), None) => {
            let refs = read_text(refs_path)?;
            let hyps = read_text(hyps_path)?;
            let refs: Vec<&str> = refs.lines().collect();
            let hyps: Vec<&str> = hyps.lines().collect();
            if refs.len() != hyps.len() {
                return Err(CmdError::Data(format!(
                    "line counts differ: {} reference(s) vs {} hypothesis(es)",
                    refs.len(),
                    hyps.len()
                )));
            }
            refs.iter()
                .zip(hyps.iter())
                .enumerate()
                .map(|(i, (r, h))| EvalPair::new((i + 1).to_string(), r, h))
                .collect()
        }
        (None, None, Some(pairs_path)) => {
            let text = read_text(pairs_path)?;
            let mut pairs = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let wire: WirePair = serde_json::from_str(line).map_err(|e| {
                    CmdError::Data(format!("{} line {}: {e}", pairs_path.display(), i + 1))
                })?;
                pairs.push(EvalPair::new(wire.id, &wire.reference, &wire.hypothesis));
            }
            pairs
        }
        _ => {
            return Err(CmdError::Usage(
                "provide either --refs with --hyps, or --pairs".into(),
            ))
        }
    };

    let report = metrics::corpus_score(&pairs).map_err(data)?;
    println!("{}", serde_json::to_string(&report).map_err(data)?);
    Ok(ExitCode::SUCCESS)
}

pub fn stats(args: StatsArgs) -> Result<ExitCode, CmdError> {
    let manifest = pipeline::parse_manifest(&read_file(&args.manifest)?).map_err(data)?;
    let class = match args.class {
        ClassArg::Numeric => CharClass::Numeric,
        ClassArg::Alphabetic => CharClass::Alphabetic,
        ClassArg::All => CharClass::All,
    };
    let freq = metrics::char_frequency(&manifest, class).map_err(data)?;
    println!("{}", serde_json::to_string(&freq).map_err(data)?);
    Ok(ExitCode::SUCCESS)
}

pub fn kappa(args: KappaArgs) -> Result<ExitCode, CmdError> {
    let a_text = read_text(&args.a)?;
    let b_text = read_text(&args.b)?;
    let a: Vec<&str> = a_text.lines().collect();
    let b: Vec<&str> = b_text.lines().collect();
    let kappa = metrics::cohen_kappa(&a, &b).map_err(data)?;
    println!(
        "{}",
        serde_json::json!({ "kappa": kappa, "items": a.len() })
    );
    Ok(ExitCode::SUCCESS)
}
