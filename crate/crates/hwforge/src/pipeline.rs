//! The full transfer pipeline: normalize ink geometry, rasterize a
//! binary stroke image, recolor it from fitted beta distributions, pad,
//! and batch-generate dataset trees with provenance manifests.
//!
//! Determinism contract: every output byte is a function of the master
//! seed, the ink inputs, the color model, and the config. Each record's
//! random stream is seeded by `hash(master_seed, id)`, so results do
//! not depend on processing order or worker count.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{self, sample_beta, BetaSampler, ColorError, ColorModel};
use crate::imageio::{self, ImageIoError};
use crate::ink::{bounding_box, normalize_geometry, InkError, InkSample, Level};
use crate::raster::{render_binary, GrayImage, RasterError, WidthMode, WidthModel};

/// Hard ceiling on canvas side length, to bound memory on bad inputs.
const MAX_CANVAS_SIDE: u64 = 16_384;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ink(#[from] InkError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    ImageIo(#[from] ImageIoError),
    #[error("pre-color contract violated: pixel ({x},{y}) has value {value}, expected 0 or 255")]
    PreColorContract { value: u8, x: u32, y: u32 },
    #[error("image {width}x{height} does not fit pad target {target_width}x{target_height}")]
    PadTooSmall {
        width: u32,
        height: u32,
        target_width: u32,
        target_height: u32,
    },
    #[error("canvas {width}x{height} exceeds the {MAX_CANVAS_SIDE} px side limit")]
    CanvasTooLarge { width: u64, height: u64 },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("samples {a:?} and {b:?} map to the same image filename {filename:?}")]
    FilenameCollision {
        a: String,
        b: String,
        filename: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    BadManifest { line: usize, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Pipeline configuration. `pad_to` is (width, height); images larger
/// than the target are per-record errors, never cropped. `flat_color`
/// switches from per-pixel color draws to one flat draw per class.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TransferConfig {
    #[serde(default)]
    pub width_model: WidthModel,
    #[serde(default)]
    pub normalization: crate::ink::NormalizationConfig,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub pad_to: Option<(u32, u32)>,
    #[serde(default)]
    pub flat_color: bool,
}

impl TransferConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.width_model.validate()?;
        self.normalization.validate()?;
        Ok(())
    }
}

/// Provenance row binding one output image to its transcript, seed and
/// sampled parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub image_path: String,
    pub transcript: String,
    pub level: Level,
    pub seed: u64,
    pub m_value: f64,
    pub dist_index: usize,
    pub width_mode: WidthMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

/// Per-record seed: FNV-1a 64 over the master seed bytes followed by
/// the sample id, so regeneration and reordering are stable.
pub fn record_seed(master_seed: u64, id: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + id.len());
    bytes.extend_from_slice(&master_seed.to_le_bytes());
    bytes.extend_from_slice(id.as_bytes());
    color::fnv1a64(&bytes)
}

fn check_pre_color(image: &GrayImage) -> Result<(), PipelineError> {
    for y in 0..image.height() {
        for x in 0..image.width() {
            let v = image.get(x, y);
            if v != 0 && v != 255 {
                return Err(PipelineError::PreColorContract { value: v, x, y });
            }
        }
    }
    Ok(())
}

fn to_byte(unit: f64) -> u8 {
    (unit * 255.0).round() as u8
}

/// Recolor a binary raster: one pair index is drawn uniformly and then
/// every ink pixel (0) takes an independent draw from the stroke
/// distribution and every paper pixel (255) from the background
/// distribution, each scaled to a byte. Returns the image and the
/// index that governed both classes.
pub fn render_color_indexed<R: Rng>(
    image: &GrayImage,
    model: &ColorModel,
    rng: &mut R,
) -> Result<(GrayImage, usize), PipelineError> {
    check_pre_color(image)?;
    let index = color::choose_distribution_index(model, rng);
    let stroke = BetaSampler::new(model.stroke(index));
    let bg = BetaSampler::new(model.background(index));
    let pixels = image
        .pixels()
        .iter()
        .map(|&p| {
            if p == 0 {
                to_byte(stroke.sample(rng))
            } else {
                to_byte(bg.sample(rng))
            }
        })
        .collect();
    let out = GrayImage::from_raw(image.width(), image.height(), pixels)
        .expect("dimensions unchanged");
    Ok((out, index))
}

/// Per-pixel recoloring; see [`render_color_indexed`].
pub fn render_color<R: Rng>(
    image: &GrayImage,
    model: &ColorModel,
    rng: &mut R,
) -> Result<GrayImage, PipelineError> {
    render_color_indexed(image, model, rng).map(|(img, _)| img)
}

/// Flat recoloring: draw one stroke variate per pair, one background
/// variate per pair, pick one shared index, and map every ink pixel to
/// the single stroke byte and every paper pixel to the single
/// background byte. Returns (image, index, stroke byte, background byte).
pub fn render_color_flat_indexed<R: Rng>(
    image: &GrayImage,
    model: &ColorModel,
    rng: &mut R,
) -> Result<(GrayImage, usize, u8, u8), PipelineError> {
    check_pre_color(image)?;
    let stroke_draws: Vec<f64> = (0..model.len())
        .map(|i| sample_beta(model.stroke(i), rng))
        .collect();
    let bg_draws: Vec<f64> = (0..model.len())
        .map(|i| sample_beta(model.background(i), rng))
        .collect();
    let index = color::choose_distribution_index(model, rng);
    let stroke_byte = to_byte(stroke_draws[index]);
    let bg_byte = to_byte(bg_draws[index]);
    let pixels = image
        .pixels()
        .iter()
        .map(|&p| if p == 0 { stroke_byte } else { bg_byte })
        .collect();
    let out = GrayImage::from_raw(image.width(), image.height(), pixels)
        .expect("dimensions unchanged");
    Ok((out, index, stroke_byte, bg_byte))
}

/// Grow a raster to `target_width` x `target_height` with the original
/// at the top-left and `fill` elsewhere. No resampling.
pub fn pad_image(
    image: &GrayImage,
    target_width: u32,
    target_height: u32,
    fill: u8,
) -> Result<GrayImage, PipelineError> {
    pad_image_with(image, target_width, target_height, || fill)
}

fn pad_image_with<F: FnMut() -> u8>(
    image: &GrayImage,
    target_width: u32,
    target_height: u32,
    mut fill: F,
) -> Result<GrayImage, PipelineError> {
    if target_width < image.width() || target_height < image.height() {
        return Err(PipelineError::PadTooSmall {
            width: image.width(),
            height: image.height(),
            target_width,
            target_height,
        });
    }
    if target_width == image.width() && target_height == image.height() {
        return Ok(image.clone());
    }
    let mut pixels = Vec::with_capacity(target_width as usize * target_height as usize);
    for y in 0..target_height {
        for x in 0..target_width {
            if x < image.width() && y < image.height() {
                pixels.push(image.get(x, y));
            } else {
                pixels.push(fill());
            }
        }
    }
    Ok(GrayImage::from_raw(target_width, target_height, pixels)
        .expect("constructed to match dimensions"))
}

/// Run the whole pipeline for one sample: normalize geometry, draw the
/// per-image thickness m ~ U(m_min, m_max), rasterize, recolor, and
/// optionally pad. Padded pixels are filled from the background
/// distribution selected for the image so the padding blends in.
/// Identical `(sample, model, config, record_seed)` give byte-identical
/// images.
pub fn transfer(
    sample: &InkSample,
    model: &ColorModel,
    config: &TransferConfig,
    record_seed: u64,
) -> Result<(GrayImage, ManifestRecord), PipelineError> {
    config.validate()?;
    let normalized = normalize_geometry(sample, &config.normalization);
    let bb = bounding_box(normalized.strokes())?;
    let margin = config.normalization.margin as u64;
    let canvas_w = bb.max_x.round() as u64 + margin + 1;
    let canvas_h = bb.max_y.round() as u64 + margin + 1;
    if canvas_w > MAX_CANVAS_SIDE || canvas_h > MAX_CANVAS_SIDE {
        return Err(PipelineError::CanvasTooLarge {
            width: canvas_w,
            height: canvas_h,
        });
    }

    let wm = &config.width_model;
    let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
    let m = rng.random_range(wm.m_min..=wm.m_max) as f64;

    let binary = render_binary(normalized.strokes(), canvas_w as u32, canvas_h as u32, m, wm)?;

    let (colored, dist_index, flat_bg) = if config.flat_color {
        let (img, idx, _, bg_byte) = render_color_flat_indexed(&binary, model, &mut rng)?;
        (img, idx, Some(bg_byte))
    } else {
        let (img, idx) = render_color_indexed(&binary, model, &mut rng)?;
        (img, idx, None)
    };

    let final_image = match config.pad_to {
        None => colored,
        Some((tw, th)) => match flat_bg {
            Some(byte) => pad_image(&colored, tw, th, byte)?,
            None => {
                let bg = BetaSampler::new(model.background(dist_index));
                pad_image_with(&colored, tw, th, || to_byte(bg.sample(&mut rng)))?
            }
        },
    };

    let record = ManifestRecord {
        id: sample.id().to_string(),
        image_path: String::new(),
        transcript: sample.transcript().to_string(),
        level: sample.level(),
        seed: record_seed,
        m_value: m,
        dist_index,
        width_mode: wm.mode,
        split: None,
    };
    Ok((final_image, record))
}

/// Output format for generated images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

/// Batch-generation knobs beyond [`TransferConfig`].
#[derive(Debug, Clone)]
pub struct GenerateOptions {
    /// Worker count; 0 means the rayon default.
    pub jobs: usize,
    /// Optional split tag copied into every manifest row.
    pub split: Option<String>,
    pub format: ImageFormat,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            jobs: 0,
            split: None,
            format: ImageFormat::Pgm,
        }
    }
}

/// One record that failed to render or write.
#[derive(Debug, Clone)]
pub struct RecordFailure {
    pub id: String,
    pub error: String,
}

/// Outcome of a batch generation run.
#[derive(Debug)]
pub struct GenerateReport {
    /// Successful records, sorted by id (the manifest file order).
    pub records: Vec<ManifestRecord>,
    /// Failed records; the caller decides how loudly to fail.
    pub failures: Vec<RecordFailure>,
    pub manifest_path: PathBuf,
}

fn sanitize_filename(id: &str) -> String {
    let cleaned: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "_".to_string()
    } else {
        cleaned
    }
}

/// Render every sample into `out_dir/images/` and write
/// `out_dir/manifest.jsonl` (rows sorted by id). Duplicate ids and
/// image-filename collisions are hard errors before any rendering;
/// per-record failures afterwards are collected and reported, not
/// silently dropped.
pub fn generate_dataset(
    samples: &[InkSample],
    model: &ColorModel,
    config: &TransferConfig,
    out_dir: &Path,
    options: &GenerateOptions,
) -> Result<GenerateReport, PipelineError> {
    config.validate()?;
    let mut filenames: HashMap<String, &str> = HashMap::new();
    for sample in samples {
        let filename = format!(
            "{}.{}",
            sanitize_filename(sample.id()),
            options.format.extension()
        );
        if let Some(prev) = filenames.insert(filename.clone(), sample.id()) {
            if prev == sample.id() {
                return Err(PipelineError::DuplicateId(sample.id().to_string()));
            }
            return Err(PipelineError::FilenameCollision {
                a: prev.to_string(),
                b: sample.id().to_string(),
                filename,
            });
        }
    }

    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| io_err(&images_dir, e))?;

    let render_one = |sample: &InkSample| -> Result<ManifestRecord, RecordFailure> {
        let fail = |e: PipelineError| RecordFailure {
            id: sample.id().to_string(),
            error: e.to_string(),
        };
        let seed = record_seed(config.master_seed, sample.id());
        let (image, mut record) = transfer(sample, model, config, seed).map_err(fail)?;
        let filename = format!(
            "{}.{}",
            sanitize_filename(sample.id()),
            options.format.extension()
        );
        let path = images_dir.join(&filename);
        match options.format {
            ImageFormat::Pgm => imageio::write_pgm(&path, &image),
            ImageFormat::Png => imageio::write_png(&path, &image),
        }
        .map_err(|e| fail(e.into()))?;
        record.image_path = format!("images/{filename}");
        record.split = options.split.clone();
        Ok(record)
    };

    let results: Vec<Result<ManifestRecord, RecordFailure>> = if options.jobs == 1 {
        samples.iter().map(render_one).collect()
    } else if options.jobs == 0 {
        samples.par_iter().map(render_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .expect("thread pool construction");
        pool.install(|| samples.par_iter().map(render_one).collect())
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let manifest_path = out_dir.join("manifest.jsonl");
    let mut out = String::new();
    for rec in &records {
        out.push_str(&serde_json::to_string(rec).expect("manifest row serialization"));
        out.push('\n');
    }
    fs::write(&manifest_path, out).map_err(|e| io_err(&manifest_path, e))?;

    Ok(GenerateReport {
        records,
        failures,
        manifest_path,
    })
}

/// Parse a manifest file (one JSON record per line, blank lines
/// ignored).
pub fn parse_manifest(bytes: &[u8]) -> Result<Vec<ManifestRecord>, PipelineError> {
    let text = std::str::from_utf8(bytes).map_err(|e| PipelineError::BadManifest {
        line: 0,
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(line).map_err(|e| PipelineError::BadManifest {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::BetaParams;
    use crate::ink::{Point, Stroke};

    fn model_single(stroke: (f64, f64), bg: (f64, f64)) -> ColorModel {
        ColorModel::new(
            vec![BetaParams::new(stroke.0, stroke.1).unwrap()],
            vec![BetaParams::new(bg.0, bg.1).unwrap()],
        )
        .unwrap()
    }

    fn dot_sample(id: &str) -> InkSample {
        InkSample::new(
            id,
            vec![Stroke::new(vec![Point { x: 3.0, y: 4.0 }]).unwrap()],
            "x",
            Level::Word,
        )
        .unwrap()
    }

    #[test]
    fn render_color_fixed_seed_reproduces() {
        let img = GrayImage::from_raw(2, 1, vec![0, 255]).unwrap();
        let model = model_single((2.0, 5.0), (5.0, 2.0));
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            render_color(&img, &model, &mut rng).unwrap().into_raw()
        };
        let a = draw();
        assert_eq!(a, draw());
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn render_color_rejects_nonbinary_input() {
        let img = GrayImage::from_raw(2, 1, vec![0, 128]).unwrap();
        let model = model_single((2.0, 2.0), (2.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        match render_color(&img, &model, &mut rng).unwrap_err() {
            PipelineError::PreColorContract { value, x, y } => {
                assert_eq!((value, x, y), (128, 1, 0));
            }
            other => panic!("expected contract error, got {other}"),
        }
    }

    #[test]
    fn render_color_separates_classes() {
        // Dark stroke pixels vs light background pixels: Beta(20,2)
        // has mean ~0.91, Beta(2,20) mean ~0.09.
        let img = GrayImage::from_raw(4, 1, vec![0, 255, 0, 255]).unwrap();
        let model = model_single((2.0, 20.0), (20.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = render_color(&img, &model, &mut rng).unwrap();
        let p = out.pixels();
        assert!(p[0] < 100 && p[2] < 100, "stroke pixels stayed dark: {p:?}");
        assert!(p[1] > 150 && p[3] > 150, "background pixels light: {p:?}");
    }

    #[test]
    fn all_background_image_draws_only_background() {
        // Stroke distribution pinned near 1, background near 0: if any
        // stroke draw leaked into an all-paper image it would show up
        // as a bright pixel.
        let img = GrayImage::new(16, 16, 255).unwrap();
        let model = model_single((400.0, 2.0), (2.0, 400.0));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let out = render_color(&img, &model, &mut rng).unwrap();
        assert!(out.pixels().iter().all(|&p| p < 30), "background-only image got a stroke-like value");
    }

    #[test]
    fn flat_color_uses_single_bytes() {
        let img = GrayImage::from_raw(3, 2, vec![0, 255, 0, 255, 0, 255]).unwrap();
        let model = model_single((2.0, 5.0), (5.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (out, idx, s, b) = render_color_flat_indexed(&img, &model, &mut rng).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(out.pixels(), &[s, b, s, b, s, b]);
    }

    #[test]
    fn pad_identity_and_fill() {
        let img = GrayImage::from_raw(2, 2, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(pad_image(&img, 2, 2, 255).unwrap(), img);

        let one = GrayImage::from_raw(1, 1, vec![0]).unwrap();
        let padded = pad_image(&one, 3, 1, 255).unwrap();
        assert_eq!(padded.pixels(), &[0, 255, 255]);

        assert!(matches!(
            pad_image(&img, 1, 5, 0),
            Err(PipelineError::PadTooSmall { .. })
        ));
    }

    #[test]
    fn pad_then_crop_recovers_original() {
        let img = GrayImage::from_raw(3, 2, vec![9, 8, 7, 6, 5, 4]).unwrap();
        let padded = pad_image(&img, 5, 4, 200).unwrap();
        for y in 0..2u32 {
            for x in 0..3u32 {
                assert_eq!(padded.get(x, y), img.get(x, y));
            }
        }
        for (x, y) in [(3, 0), (4, 1), (0, 2), (4, 3)] {
            assert_eq!(padded.get(x, y), 200);
        }
    }

    #[test]
    fn transfer_is_deterministic_and_seed_sensitive() {
        let sample = dot_sample("d1");
        let model = model_single((2.0, 5.0), (8.0, 2.0));
        let config = TransferConfig::default();

        let (img_a, rec_a) = transfer(&sample, &model, &config, 99).unwrap();
        let (img_b, rec_b) = transfer(&sample, &model, &config, 99).unwrap();
        assert_eq!(img_a, img_b);
        assert_eq!(rec_a, rec_b);

        let (img_c, rec_c) = transfer(&sample, &model, &config, 100).unwrap();
        assert_ne!(img_a.pixels(), img_c.pixels());
        assert_eq!(rec_c.seed, 100);
    }

    #[test]
    fn transfer_degenerate_m_range_pins_m() {
        let sample = dot_sample("d1");
        let model = model_single((2.0, 5.0), (8.0, 2.0));
        let config = TransferConfig {
            width_model: WidthModel {
                m_min: 3,
                m_max: 3,
                ..WidthModel::default()
            },
            ..TransferConfig::default()
        };
        for seed in 0..20 {
            let (_, rec) = transfer(&sample, &model, &config, seed).unwrap();
            assert_eq!(rec.m_value, 3.0);
        }
    }

    #[test]
    fn transfer_pad_too_small_is_per_record_error() {
        let sample = dot_sample("d1");
        let model = model_single((2.0, 5.0), (8.0, 2.0));
        let config = TransferConfig {
            pad_to: Some((4, 4)),
            ..TransferConfig::default()
        };
        assert!(matches!(
            transfer(&sample, &model, &config, 1),
            Err(PipelineError::PadTooSmall { .. })
        ));
    }

    #[test]
    fn transfer_pads_with_background_like_values() {
        let sample = dot_sample("d1");
        // Background tightly concentrated near 0.9.
        let model = model_single((2.0, 50.0), (500.0, 55.0));
        let config = TransferConfig {
            pad_to: Some((64, 64)),
            ..TransferConfig::default()
        };
        let (img, _) = transfer(&sample, &model, &config, 5).unwrap();
        assert_eq!((img.width(), img.height()), (64, 64));
        // Sample some pixels from the padded region.
        let mean_pad: f64 = (32..64)
            .map(|x| img.get(x, 60) as f64)
            .sum::<f64>()
            / 32.0;
        assert!((mean_pad - 0.9 * 255.0).abs() < 25.0, "{mean_pad}");
    }

    // Computed once from the FNV-1a definition; see the test below.
    const FROZEN_SEED_42_W1: u64 = {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let bytes = [42u8, 0, 0, 0, 0, 0, 0, 0, b'w', b'1'];
        let mut i = 0;
        while i < bytes.len() {
            h ^= bytes[i] as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
            i += 1;
        }
        h
    };

    #[test]
    fn record_seed_is_stable_and_id_sensitive() {
        assert_eq!(record_seed(1, "a"), record_seed(1, "a"));
        assert_ne!(record_seed(1, "a"), record_seed(1, "b"));
        assert_ne!(record_seed(1, "a"), record_seed(2, "a"));
        // Frozen value so accidental hash-derivation changes are caught.
        assert_eq!(record_seed(42, "w1"), FROZEN_SEED_42_W1);
    }

    #[test]
    fn manifest_round_trips() {
        let rec = ManifestRecord {
            id: "a".into(),
            image_path: "images/a.pgm".into(),
            transcript: "xin chào".into(),
            level: Level::Word,
            seed: 7,
            m_value: 3.0,
            dist_index: 0,
            width_mode: WidthMode::Constant,
            split: None,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(!line.contains("split"));
        let back = parse_manifest(format!("{line}\n\n{line}\n").as_bytes()).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
    }
}
