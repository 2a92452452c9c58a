//! Stroke rasterization: draw trajectory polylines onto a binary canvas
//! (ink 0, paper 255) with constant or direction-dependent width.
//!
//! The width model is w(theta) = m * d(theta) with
//! d(theta) = 1 / (1 + exp(alpha*theta + beta)), theta in degrees. In
//! image coordinates (y down) a pen moving up has negative theta, so
//! with the default alpha = -0.1 up-strokes come out thinner than
//! down-strokes. Constant mode evaluates d at a fixed angle instead
//! (default 90 degrees, where d is nearly 1).
//!
//! Thickness is realized by capsule stamping: every pixel whose center
//! lies within max(1, round(w))/2 of the segment is inked. Pixel
//! centers sit on the integer lattice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ink::{Point, Stroke};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("canvas dimensions must be positive, got {width}x{height}")]
    BadDimensions { width: u32, height: u32 },
    #[error("width range invalid: need 1 <= m_min <= m_max, got [{m_min}, {m_max}]")]
    BadWidthRange { m_min: u32, m_max: u32 },
    #[error("pixel buffer length {len} does not match {width}x{height}")]
    BadBufferLength { width: u32, height: u32, len: usize },
    #[error("zero-length segment has no direction")]
    ZeroLengthSegment,
    #[error("stroke {stroke} has no points")]
    EmptyStroke { stroke: usize },
    #[error(
        "stroke {stroke}, point {point} at ({x}, {y}) falls outside the {width}x{height} canvas"
    )]
    PointOutsideCanvas {
        stroke: usize,
        point: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
}

/// Stroke-width mode: a fixed evaluation angle, or per-segment angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthMode {
    Constant,
    Variable,
}

impl std::fmt::Display for WidthMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WidthMode::Constant => f.write_str("constant"),
            WidthMode::Variable => f.write_str("variable"),
        }
    }
}

/// Sigmoid stroke-width parameters. Defaults carry the calibrated
/// constants: alpha = -0.1, beta = 1.13, m in [2, 5], constant-mode
/// angle 90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthModel {
    #[serde(default = "default_mode")]
    pub mode: WidthMode,
    #[serde(default = "default_sigmoid_alpha")]
    pub sigmoid_alpha: f64,
    #[serde(default = "default_sigmoid_beta")]
    pub sigmoid_beta: f64,
    #[serde(default = "default_m_min")]
    pub m_min: u32,
    #[serde(default = "default_m_max")]
    pub m_max: u32,
    #[serde(default = "default_theta_const")]
    pub theta_const: f64,
}

fn default_mode() -> WidthMode {
    WidthMode::Constant
}
fn default_sigmoid_alpha() -> f64 {
    -0.1
}
fn default_sigmoid_beta() -> f64 {
    1.13
}
fn default_m_min() -> u32 {
    2
}
fn default_m_max() -> u32 {
    5
}
fn default_theta_const() -> f64 {
    90.0
}

impl Default for WidthModel {
    fn default() -> Self {
        WidthModel {
            mode: default_mode(),
            sigmoid_alpha: default_sigmoid_alpha(),
            sigmoid_beta: default_sigmoid_beta(),
            m_min: default_m_min(),
            m_max: default_m_max(),
            theta_const: default_theta_const(),
        }
    }
}

impl WidthModel {
    pub fn validate(&self) -> Result<(), RasterError> {
        if self.m_min < 1 || self.m_min > self.m_max {
            return Err(RasterError::BadWidthRange {
                m_min: self.m_min,
                m_max: self.m_max,
            });
        }
        Ok(())
    }
}

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, fill: u8) -> Result<GrayImage, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions { width, height });
        }
        Ok(GrayImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<GrayImage, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions { width, height });
        }
        if pixels.len() != width as usize * height as usize {
            return Err(RasterError::BadBufferLength {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }
}

/// Direction angle of the segment p0 -> p1 in degrees, in [-90, 90]:
/// arctan(dy/dx), with a vertical segment mapping to 90 * sign(dy).
pub fn segment_angle(p0: Point, p1: Point) -> Result<f64, RasterError> {
    let dx = p1.x - p0.x;
    let dy = p1.y - p0.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(RasterError::ZeroLengthSegment);
    }
    if dx == 0.0 {
        return Ok(90.0 * dy.signum());
    }
    Ok((dy / dx).atan().to_degrees())
}

/// d(theta) = 1 / (1 + exp(alpha*theta + beta)); strictly inside (0, 1).
pub fn width_factor(theta_deg: f64, model: &WidthModel) -> f64 {
    1.0 / (1.0 + (model.sigmoid_alpha * theta_deg + model.sigmoid_beta).exp())
}

/// w = m * d(theta) in variable mode; constant mode evaluates d at the
/// configured fixed angle regardless of theta.
pub fn stroke_width(theta_deg: f64, m: f64, model: &WidthModel) -> f64 {
    match model.mode {
        WidthMode::Variable => m * width_factor(theta_deg, model),
        WidthMode::Constant => m * width_factor(model.theta_const, model),
    }
}

/// Rasterize strokes onto a fresh white canvas. Output pixels are
/// exactly 0 (ink) or 255 (paper). All points must land inside the
/// canvas after rounding; a single-point stroke stamps a dot of the
/// constant-mode width, and a repeated point inside a stroke reuses the
/// previous segment's width.
pub fn render_binary(
    strokes: &[Stroke],
    canvas_width: u32,
    canvas_height: u32,
    m: f64,
    model: &WidthModel,
) -> Result<GrayImage, RasterError> {
    let mut image = GrayImage::new(canvas_width, canvas_height, 255)?;

    for (si, stroke) in strokes.iter().enumerate() {
        if stroke.is_empty() {
            return Err(RasterError::EmptyStroke { stroke: si });
        }
        for (pi, p) in stroke.points().iter().enumerate() {
            let rx = p.x.round();
            let ry = p.y.round();
            if rx < 0.0 || ry < 0.0 || rx >= canvas_width as f64 || ry >= canvas_height as f64 {
                return Err(RasterError::PointOutsideCanvas {
                    stroke: si,
                    point: pi,
                    x: p.x,
                    y: p.y,
                    width: canvas_width,
                    height: canvas_height,
                });
            }
        }
    }

    for stroke in strokes {
        let pts = stroke.points();
        let dot_width = m * width_factor(model.theta_const, model);
        if pts.len() == 1 {
            draw_segment(&mut image, pts[0], pts[0], dot_width);
            continue;
        }
        let mut prev_width = dot_width;
        for pair in pts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let w = if a == b {
                prev_width
            } else {
                let theta = segment_angle(a, b).expect("distinct points have an angle");
                stroke_width(theta, m, model)
            };
            draw_segment(&mut image, a, b, w);
            prev_width = w;
        }
    }
    Ok(image)
}

/// Ink every pixel whose center lies within max(1, round(w))/2 of the
/// segment p0-p1 (capsule stamping; a zero-length segment stamps a
/// disc). Painting outside the canvas is clipped. Idempotent.
pub fn draw_segment(image: &mut GrayImage, p0: Point, p1: Point, w: f64) {
    let diameter = w.round().max(1.0);
    let radius = diameter / 2.0;
    let r2 = radius * radius;

    let x_lo = (p0.x.min(p1.x) - radius).floor().max(0.0) as i64;
    let x_hi = (p0.x.max(p1.x) + radius).ceil().min(image.width as f64 - 1.0) as i64;
    let y_lo = (p0.y.min(p1.y) - radius).floor().max(0.0) as i64;
    let y_hi = (p0.y.max(p1.y) + radius).ceil().min(image.height as f64 - 1.0) as i64;

    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            if dist2_to_segment(x as f64, y as f64, p0, p1) <= r2 {
                image.set(x as u32, y as u32, 0);
            }
        }
    }
}

/// Squared distance from (px, py) to the segment p0-p1.
fn dist2_to_segment(px: f64, py: f64, p0: Point, p1: Point) -> f64 {
    let dx = p1.x - p0.x;
    let dy = p1.y - p0.y;
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - p0.x) * dx + (py - p0.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let cx = p0.x + t * dx;
    let cy = p0.y + t * dy;
    (px - cx) * (px - cx) + (py - cy) * (py - cy)
}
