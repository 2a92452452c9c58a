//! Color modeling: extract ink/paper intensity samples from reference
//! document images, fit beta distributions to them by the method of
//! moments, and draw pixel values from the fitted pairs.
//!
//! Stroke pixels are separated from background by Otsu's threshold on
//! the grayscale histogram. Intensities are normalized into [0, 1]
//! before fitting; values at exactly 0 or 1 are clamped half a
//! quantization step inward because the beta support is open.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::GrayImage;

/// Inward clamp for normalized samples: half of one 8-bit step.
const SUPPORT_CLAMP: f64 = 1.0 / 510.0;

#[derive(Debug, Error)]
pub enum ColorError {
    /// The histogram has all its mass in one bin; no threshold separates it.
    #[error("image is flat; cannot separate stroke from background")]
    FlatHistogram,
    /// A sample class is too small to fit.
    #[error("{class} class has {count} samples; at least 2 required")]
    TooFewSamples { class: &'static str, count: usize },
    /// All samples identical; the moment equations degenerate.
    #[error("samples have zero variance")]
    DegenerateSamples,
    /// Moments outside the beta-feasible region.
    #[error("infeasible moments: mean {mean}, variance {variance}")]
    InfeasibleMoments { mean: f64, variance: f64 },
    /// Invalid shape parameter.
    #[error("shape parameters must be finite and positive, got ({alpha}, {beta})")]
    BadShape { alpha: f64, beta: f64 },
    /// Model construction over no sample sets.
    #[error("no sample sets supplied")]
    EmptyInput,
    /// Mismatched stroke/background sequence lengths.
    #[error("stroke and background parameter counts differ: {stroke} vs {background}")]
    LengthMismatch { stroke: usize, background: usize },
    /// A per-subset failure, annotated with the subset key.
    #[error("subset {key:?}: {source}")]
    InSubset {
        key: String,
        #[source]
        source: Box<ColorError>,
    },
}

/// Shape-parameter pair (alpha, beta) of one beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<BetaParams, ColorError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(ColorError::BadShape { alpha, beta });
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Distribution mean alpha / (alpha + beta).
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Distribution variance alpha*beta / ((alpha+beta)^2 (alpha+beta+1)).
    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

/// Paired stroke/background beta parameters, one pair per source subset.
/// Both sequences share one index: a single draw selects the pair used
/// for an image.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorModel {
    stroke_dists: Vec<BetaParams>,
    bg_dists: Vec<BetaParams>,
}

impl ColorModel {
    pub fn new(
        stroke_dists: Vec<BetaParams>,
        bg_dists: Vec<BetaParams>,
    ) -> Result<ColorModel, ColorError> {
        if stroke_dists.is_empty() {
            return Err(ColorError::EmptyInput);
        }
        if stroke_dists.len() != bg_dists.len() {
            return Err(ColorError::LengthMismatch {
                stroke: stroke_dists.len(),
                background: bg_dists.len(),
            });
        }
        Ok(ColorModel {
            stroke_dists,
            bg_dists,
        })
    }

    /// Number of (stroke, background) pairs.
    pub fn len(&self) -> usize {
        self.stroke_dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stroke_dists.is_empty()
    }

    pub fn stroke(&self, index: usize) -> &BetaParams {
        &self.stroke_dists[index]
    }

    pub fn background(&self, index: usize) -> &BetaParams {
        &self.bg_dists[index]
    }
}

/// Normalized intensity samples for one subset, split by class.
#[derive(Debug, Clone)]
pub struct ColorSampleSet {
    pub stroke_samples: Vec<f64>,
    pub bg_samples: Vec<f64>,
    pub source_key: String,
}

/// On-disk form of a color model: `subsets`, `stroke` and `background`
/// arrays are index-aligned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColorModelFile {
    pub subsets: Vec<String>,
    pub stroke: Vec<(f64, f64)>,
    pub background: Vec<(f64, f64)>,
}

impl ColorModelFile {
    pub fn from_model(subsets: Vec<String>, model: &ColorModel) -> ColorModelFile {
        ColorModelFile {
            subsets,
            stroke: model
                .stroke_dists
                .iter()
                .map(|p| (p.alpha, p.beta))
                .collect(),
            background: model.bg_dists.iter().map(|p| (p.alpha, p.beta)).collect(),
        }
    }

    pub fn into_model(self) -> Result<(Vec<String>, ColorModel), ColorError> {
        let stroke = self
            .stroke
            .into_iter()
            .map(|(a, b)| BetaParams::new(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        let background = self
            .background
            .into_iter()
            .map(|(a, b)| BetaParams::new(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((self.subsets, ColorModel::new(stroke, background)?))
    }
}

/// Otsu's threshold: the level t maximizing between-class variance of
/// the split {bins <= t} vs {bins > t}; ties break to the smallest t.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8, ColorError> {
    let total: u64 = histogram.iter().sum();
    let occupied = histogram.iter().filter(|&&c| c > 0).count();
    if total < 2 || occupied < 2 {
        return Err(ColorError::FlatHistogram);
    }
    let total_f = total as f64;
    let grand_sum: f64 = histogram
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best_level = 0u8;
    let mut best_variance = f64::NEG_INFINITY;
    let mut count_below = 0.0f64;
    let mut sum_below = 0.0f64;
    for (t, &count) in histogram.iter().enumerate() {
        count_below += count as f64;
        sum_below += t as f64 * count as f64;
        let count_above = total_f - count_below;
        if count_below == 0.0 || count_above == 0.0 {
            continue;
        }
        let mean_below = sum_below / count_below;
        let mean_above = (grand_sum - sum_below) / count_above;
        let diff = mean_below - mean_above;
        let variance = (count_below / total_f) * (count_above / total_f) * diff * diff;
        if variance > best_variance {
            best_variance = variance;
            best_level = t as u8;
        }
    }
    Ok(best_level)
}

/// Classify every pixel of `image` by its Otsu level (<= level is
/// stroke) and collect normalized intensities. Classes larger than
/// `cap` are reduced to `cap` by a uniform subsample seeded from
/// `source_key`, so extraction is deterministic.
pub fn extract_color_samples(
    image: &GrayImage,
    source_key: &str,
    cap: usize,
) -> Result<ColorSampleSet, ColorError> {
    let mut histogram = [0u64; 256];
    for &p in image.pixels() {
        histogram[p as usize] += 1;
    }
    let level = otsu_threshold(&histogram)?;

    let mut stroke_samples = Vec::new();
    let mut bg_samples = Vec::new();
    for &p in image.pixels() {
        let v = p as f64 / 255.0;
        if p <= level {
            stroke_samples.push(v);
        } else {
            bg_samples.push(v);
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(fnv1a64(source_key.as_bytes()));
    let stroke_samples = subsample(stroke_samples, cap, &mut rng);
    let bg_samples = subsample(bg_samples, cap, &mut rng);

    if stroke_samples.len() < 2 {
        return Err(ColorError::TooFewSamples {
            class: "stroke",
            count: stroke_samples.len(),
        });
    }
    if bg_samples.len() < 2 {
        return Err(ColorError::TooFewSamples {
            class: "background",
            count: bg_samples.len(),
        });
    }
    Ok(ColorSampleSet {
        stroke_samples,
        bg_samples,
        source_key: source_key.to_string(),
    })
}

/// Merge per-image sample sets into one per-subset set, re-applying the
/// cap with a subsample seeded from the subset key.
pub fn pool_color_samples(
    sets: &[ColorSampleSet],
    source_key: &str,
    cap: usize,
) -> ColorSampleSet {
    let mut stroke = Vec::new();
    let mut bg = Vec::new();
    for s in sets {
        stroke.extend_from_slice(&s.stroke_samples);
        bg.extend_from_slice(&s.bg_samples);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(fnv1a64(source_key.as_bytes()));
    ColorSampleSet {
        stroke_samples: subsample(stroke, cap, &mut rng),
        bg_samples: subsample(bg, cap, &mut rng),
        source_key: source_key.to_string(),
    }
}

fn subsample<R: Rng>(values: Vec<f64>, cap: usize, rng: &mut R) -> Vec<f64> {
    if values.len() <= cap {
        return values;
    }
    let mut indices: Vec<usize> = rand::seq::index::sample(rng, values.len(), cap).into_vec();
    indices.sort_unstable();
    indices.into_iter().map(|i| values[i]).collect()
}

/// FNV-1a 64-bit; hand-rolled so seed derivation stays stable across
/// toolchain upgrades.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Fit a beta distribution by the method of moments:
/// alpha = m*(m(1-m)/v - 1), beta = (1-m)*(m(1-m)/v - 1) for sample
/// mean m and unbiased sample variance v. Samples at exactly 0 or 1 are
/// clamped inward by half a quantization step first.
pub fn fit_beta_moments(samples: &[f64]) -> Result<BetaParams, ColorError> {
    if samples.len() < 2 {
        return Err(ColorError::TooFewSamples {
            class: "fit",
            count: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let clamped = samples
        .iter()
        .map(|&x| x.clamp(SUPPORT_CLAMP, 1.0 - SUPPORT_CLAMP));
    let mean: f64 = clamped.clone().sum::<f64>() / n;
    let variance: f64 = clamped.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);

    if variance == 0.0 {
        return Err(ColorError::DegenerateSamples);
    }
    let spread = mean * (1.0 - mean);
    if variance >= spread || !(0.0..=1.0).contains(&mean) {
        return Err(ColorError::InfeasibleMoments { mean, variance });
    }
    let common = spread / variance - 1.0;
    BetaParams::new(mean * common, (1.0 - mean) * common)
}

/// Fit one (stroke, background) pair per sample set, preserving order.
pub fn build_color_model(sample_sets: &[ColorSampleSet]) -> Result<ColorModel, ColorError> {
    if sample_sets.is_empty() {
        return Err(ColorError::EmptyInput);
    }
    let mut stroke = Vec::with_capacity(sample_sets.len());
    let mut bg = Vec::with_capacity(sample_sets.len());
    for set in sample_sets {
        let annotate = |e: ColorError| ColorError::InSubset {
            key: set.source_key.clone(),
            source: Box::new(e),
        };
        stroke.push(fit_beta_moments(&set.stroke_samples).map_err(annotate)?);
        bg.push(fit_beta_moments(&set.bg_samples).map_err(annotate)?);
    }
    ColorModel::new(stroke, bg)
}

/// Reusable beta variate source; constructing the underlying
/// distribution precomputes rejection constants, so build one per
/// (params, image) rather than per draw.
#[derive(Debug, Clone)]
pub struct BetaSampler {
    dist: rand_distr::Beta<f64>,
}

impl BetaSampler {
    pub fn new(params: &BetaParams) -> BetaSampler {
        BetaSampler {
            dist: rand_distr::Beta::new(params.alpha, params.beta)
                .expect("BetaParams invariant guarantees valid shapes"),
        }
    }

    /// One variate, strictly inside (0, 1).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.dist
            .sample(rng)
            .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    }
}

/// Draw one variate from Beta(alpha, beta), strictly inside (0, 1).
pub fn sample_beta<R: Rng>(params: &BetaParams, rng: &mut R) -> f64 {
    BetaSampler::new(params).sample(rng)
}

/// Uniform pair index in [0, M). One index governs both the stroke and
/// the background pair for an image.
pub fn choose_distribution_index<R: Rng>(model: &ColorModel, rng: &mut R) -> usize {
    rng.random_range(0..model.len())
}
