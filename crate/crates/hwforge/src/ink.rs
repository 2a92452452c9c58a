//! Ink ingestion: parse pen-trajectory files into typed stroke sequences
//! and normalize their geometry onto a raster canvas.
//!
//! Two input formats are supported: a native line-delimited JSON record
//! format (one sample per line) and a small InkML subset (`<trace>`
//! elements with comma-separated "x y" pairs, transcript in
//! `<annotation type="transcription">`). Coordinates use the image
//! convention: y grows downward.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum InkError {
    /// Malformed input syntax. `offset` is the byte position of the
    /// error within the parsed input.
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    /// Structurally invalid record (missing or empty required parts).
    #[error("structural error: {0}")]
    Structure(String),
    /// A coordinate was NaN or infinite.
    #[error("non-finite coordinate at stroke {stroke}, point {point}")]
    NonFinite { stroke: usize, point: usize },
    /// An InkML coordinate token did not parse as a number.
    #[error("trace {trace}: bad coordinate token {token:?}")]
    BadTraceToken { trace: usize, token: String },
    /// An operation that needs at least one point got none.
    #[error("ink contains no points")]
    NoPoints,
}

/// Granularity of a handwriting sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    Line,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Word => f.write_str("word"),
            Level::Line => f.write_str("line"),
        }
    }
}

/// A pen position in canvas pixels (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    /// Rejects NaN and infinite coordinates.
    pub fn new(x: f64, y: f64) -> Result<Point, InkError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(InkError::NonFinite { stroke: 0, point: 0 });
        }
        Ok(Point { x, y })
    }
}

/// One pen-down trajectory: an ordered, non-empty point sequence.
/// A single-point stroke is legal and renders as a dot (pen taps such
/// as diacritic dots are real data).
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    points: Vec<Point>,
}

impl Stroke {
    pub fn new(points: Vec<Point>) -> Result<Stroke, InkError> {
        if points.is_empty() {
            return Err(InkError::Structure("stroke has no points".into()));
        }
        Ok(Stroke { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One handwriting unit: ordered strokes plus the ground-truth
/// transcript (stored NFC-normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct InkSample {
    id: String,
    strokes: Vec<Stroke>,
    transcript: String,
    level: Level,
}

impl InkSample {
    /// Validates the sample invariants: at least one stroke, all points
    /// finite, transcript non-empty after trimming. The transcript is
    /// NFC-normalized so Vietnamese diacritics compare consistently.
    pub fn new(
        id: impl Into<String>,
        strokes: Vec<Stroke>,
        transcript: &str,
        level: Level,
    ) -> Result<InkSample, InkError> {
        if strokes.is_empty() {
            return Err(InkError::Structure("record has no strokes".into()));
        }
        for (si, stroke) in strokes.iter().enumerate() {
            for (pi, p) in stroke.points().iter().enumerate() {
                if !p.x.is_finite() || !p.y.is_finite() {
                    return Err(InkError::NonFinite { stroke: si, point: pi });
                }
            }
        }
        let transcript: String = transcript.nfc().collect();
        if transcript.trim().is_empty() {
            return Err(InkError::Structure("transcript is empty".into()));
        }
        Ok(InkSample {
            id: id.into(),
            strokes,
            transcript,
            level,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    pub fn transcript(&self) -> &str {
        &self.transcript
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Stroke::len).sum()
    }
}

/// How [`normalize_geometry`] places a sample on the canvas.
///
/// `margin` pixels of blank space are kept on every side. When
/// `target_height` is set the sample is scaled uniformly so its
/// bounding box fills `target_height - 2*margin` pixels vertically;
/// otherwise the source scale is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    #[serde(default = "default_margin")]
    pub margin: u32,
    #[serde(default)]
    pub target_height: Option<u32>,
}

fn default_margin() -> u32 {
    8
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            margin: 8,
            target_height: None,
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<(), InkError> {
        if let Some(th) = self.target_height {
            if th < 2 * self.margin + 1 {
                return Err(InkError::Structure(format!(
                    "target_height {th} must be at least 2*margin + 1 = {}",
                    2 * self.margin + 1
                )));
            }
        }
        Ok(())
    }
}

/// Tight axis-aligned bounds of a stroke set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Wire form of the native line-delimited record format.
#[derive(Serialize, Deserialize)]
struct WireRecord {
    id: String,
    transcript: String,
    level: Level,
    strokes: Vec<Vec<(f64, f64)>>,
}

/// Parse one record of the native ink format (a single JSON object).
pub fn parse_ink_record(bytes: &[u8]) -> Result<InkSample, InkError> {
    let wire: WireRecord =
        serde_json::from_slice(bytes).map_err(|e| syntax_error(bytes, &e))?;
    wire_to_sample(wire)
}

/// Parse a whole native-format file: one record per line, blank lines
/// ignored. Syntax errors carry the absolute byte offset in `bytes`.
pub fn parse_ink_corpus(bytes: &[u8]) -> Result<Vec<InkSample>, InkError> {
    let mut samples = Vec::new();
    let mut line_start = 0usize;
    for line in bytes.split(|&b| b == b'\n') {
        let trimmed = trim_ascii(line);
        if !trimmed.is_empty() {
            let sample = parse_ink_record(trimmed).map_err(|e| match e {
                InkError::Syntax { offset, message } => InkError::Syntax {
                    offset: line_start + offset,
                    message,
                },
                other => other,
            })?;
            samples.push(sample);
        }
        line_start += line.len() + 1;
    }
    Ok(samples)
}

/// Canonical single-line serialization of a sample in the native format.
///
/// `parse_ink_record` ∘ `serialize_ink_record` is the identity, and the
/// output is byte-stable for a given sample.
pub fn serialize_ink_record(sample: &InkSample) -> String {
    let wire = WireRecord {
        id: sample.id.clone(),
        transcript: sample.transcript.clone(),
        level: sample.level,
        strokes: sample
            .strokes
            .iter()
            .map(|s| s.points().iter().map(|p| (p.x, p.y)).collect())
            .collect(),
    };
    serde_json::to_string(&wire).expect("ink record serialization cannot fail")
}

fn trim_ascii(line: &[u8]) -> &[u8] {
    let start = line.iter().position(|b| !b.is_ascii_whitespace());
    match start {
        None => &[],
        Some(s) => {
            let end = line.iter().rposition(|b| !b.is_ascii_whitespace()).unwrap();
            &line[s..=end]
        }
    }
}

fn wire_to_sample(wire: WireRecord) -> Result<InkSample, InkError> {
    if wire.strokes.is_empty() {
        return Err(InkError::Structure("record has no strokes".into()));
    }
    let mut strokes = Vec::with_capacity(wire.strokes.len());
    for (si, pts) in wire.strokes.iter().enumerate() {
        if pts.is_empty() {
            return Err(InkError::Structure(format!("stroke {si} has no points")));
        }
        let mut points = Vec::with_capacity(pts.len());
        for (pi, &(x, y)) in pts.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(InkError::NonFinite { stroke: si, point: pi });
            }
            points.push(Point { x, y });
        }
        strokes.push(Stroke { points });
    }
    InkSample::new(wire.id, strokes, &wire.transcript, wire.level)
}

/// Best-effort byte offset for a serde_json error position.
fn syntax_error(bytes: &[u8], err: &serde_json::Error) -> InkError {
    let line = err.line().max(1);
    let column = err.column().max(1);
    let mut offset = 0usize;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            offset += (column - 1).min(l.len());
            break;
        }
        offset += l.len() + 1;
    }
    InkError::Syntax {
        offset: offset.min(bytes.len()),
        message: err.to_string(),
    }
}

/// Parse an InkML-subset document: every `<trace>` becomes one stroke in
/// document order; the transcript comes from
/// `<annotation type="transcription">`. Optional `id` / `level`
/// annotations are honored (defaults: empty id, word level). Channels
/// beyond the leading "x y" pair of each point are ignored.
pub fn parse_inkml_subset(bytes: &[u8]) -> Result<InkSample, InkError> {
    use quick_xml::events::Event;

    let mut reader = quick_xml::Reader::from_reader(bytes);
    let mut strokes: Vec<Stroke> = Vec::new();
    let mut transcript: Option<String> = None;
    let mut id = String::new();
    let mut level = Level::Word;

    // Text accumulation target of the innermost element we care about.
    enum Target {
        None,
        Trace(String),
        Annotation(String, String), // (type, text)
    }
    let mut target = Target::None;

    loop {
        let ev = reader.read_event().map_err(|e| InkError::Syntax {
            offset: reader.buffer_position() as usize,
            message: e.to_string(),
        })?;
        match ev {
            Event::Start(ref e) => match e.local_name().as_ref() {
                b"trace" => target = Target::Trace(String::new()),
                b"annotation" => {
                    let kind = e
                        .try_get_attribute("type")
                        .map_err(|e| InkError::Syntax {
                            offset: reader.buffer_position() as usize,
                            message: e.to_string(),
                        })?
                        .map(|a| {
                            a.unescape_value()
                                .map(|v| v.into_owned())
                                .unwrap_or_default()
                        })
                        .unwrap_or_default();
                    target = Target::Annotation(kind, String::new());
                }
                _ => {}
            },
            Event::Empty(ref e) => {
                if e.local_name().as_ref() == b"trace" {
                    return Err(InkError::Structure(format!(
                        "trace {} is empty",
                        strokes.len()
                    )));
                }
            }
            Event::Text(ref t) => {
                let text = t.unescape().map_err(|e| InkError::Syntax {
                    offset: reader.buffer_position() as usize,
                    message: e.to_string(),
                })?;
                match &mut target {
                    Target::Trace(buf) | Target::Annotation(_, buf) => buf.push_str(&text),
                    Target::None => {}
                }
            }
            Event::End(ref e) => {
                match (e.local_name().as_ref(), std::mem::replace(&mut target, Target::None)) {
                    (b"trace", Target::Trace(buf)) => {
                        strokes.push(parse_trace_text(&buf, strokes.len())?);
                    }
                    (b"annotation", Target::Annotation(kind, text)) => {
                        match kind.as_str() {
                            "transcription" => transcript = Some(text),
                            "id" => id = text.trim().to_string(),
                            "level" => {
                                level = match text.trim() {
                                    "line" => Level::Line,
                                    _ => Level::Word,
                                }
                            }
                            _ => {}
                        }
                    }
                    (_, t) => target = t,
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if strokes.is_empty() {
        return Err(InkError::Structure(
            "document contains no trace elements".into(),
        ));
    }
    let transcript = transcript.ok_or_else(|| {
        InkError::Structure("missing transcription annotation".into())
    })?;
    InkSample::new(id, strokes, &transcript, level)
}

fn parse_trace_text(text: &str, trace_index: usize) -> Result<Stroke, InkError> {
    let mut points = Vec::new();
    for pair in text.split(',') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let mut nums = pair.split_whitespace();
        let x_tok = nums.next().unwrap_or("");
        let y_tok = nums.next().unwrap_or("");
        let x: f64 = x_tok.parse().map_err(|_| InkError::BadTraceToken {
            trace: trace_index,
            token: x_tok.to_string(),
        })?;
        let y: f64 = y_tok.parse().map_err(|_| InkError::BadTraceToken {
            trace: trace_index,
            token: if y_tok.is_empty() { pair.to_string() } else { y_tok.to_string() },
        })?;
        if !x.is_finite() || !y.is_finite() {
            return Err(InkError::BadTraceToken {
                trace: trace_index,
                token: pair.to_string(),
            });
        }
        points.push(Point { x, y });
    }
    if points.is_empty() {
        return Err(InkError::Structure(format!("trace {trace_index} is empty")));
    }
    Ok(Stroke { points })
}

/// Tight axis-aligned bounding box over all points of all strokes.
pub fn bounding_box(strokes: &[Stroke]) -> Result<BoundingBox, InkError> {
    let mut it = strokes.iter().flat_map(|s| s.points().iter());
    let first = it.next().ok_or(InkError::NoPoints)?;
    let mut bb = BoundingBox {
        min_x: first.x,
        min_y: first.y,
        max_x: first.x,
        max_y: first.y,
    };
    for p in it {
        bb.min_x = bb.min_x.min(p.x);
        bb.min_y = bb.min_y.min(p.y);
        bb.max_x = bb.max_x.max(p.x);
        bb.max_y = bb.max_y.max(p.y);
    }
    Ok(bb)
}

/// Translate (and optionally scale) a sample so its bounding box starts
/// at `(margin, margin)`.
///
/// With `target_height` set, a uniform scale maps the box height onto
/// `target_height - 2*margin` (aspect ratio preserved). A zero-height
/// box scales by the width ratio instead; a point-sized box is
/// translated only.
pub fn normalize_geometry(sample: &InkSample, config: &NormalizationConfig) -> InkSample {
    let bb = bounding_box(&sample.strokes).expect("InkSample invariant: at least one point");
    let margin = config.margin as f64;
    let scale = match config.target_height {
        None => 1.0,
        Some(th) => {
            let target = (th - 2 * config.margin) as f64;
            if bb.height() > 0.0 {
                target / bb.height()
            } else if bb.width() > 0.0 {
                target / bb.width()
            } else {
                1.0
            }
        }
    };
    let strokes = sample
        .strokes
        .iter()
        .map(|s| Stroke {
            points: s
                .points()
                .iter()
                .map(|p| Point {
                    x: (p.x - bb.min_x) * scale + margin,
                    y: (p.y - bb.min_y) * scale + margin,
                })
                .collect(),
        })
        .collect();
    InkSample {
        id: sample.id.clone(),
        strokes,
        transcript: sample.transcript.clone(),
        level: sample.level,
    }
}
