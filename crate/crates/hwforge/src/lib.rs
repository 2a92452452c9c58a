//! hwforge: turn online handwriting trajectories into natural-looking
//! offline handwriting images, and score recognizer output against
//! ground truth.
//!
//! The synthesis pipeline has two stages. [`raster`] draws the pen
//! trajectory onto a binary canvas, optionally varying stroke width with
//! the pen direction (up-strokes thin, down-strokes thick). [`pipeline`]
//! then recolors ink and paper pixels from beta distributions fitted to
//! real scanned documents by [`color`], so the output carries realistic
//! scan noise instead of flat black-on-white.
//!
//! [`ink`] parses the trajectory formats, [`metrics`] provides
//! Damerau-Levenshtein CER/WER, Cohen's kappa, and corpus character
//! statistics, and [`imageio`] reads/writes the grayscale rasters.

pub mod color;
pub mod imageio;
pub mod ink;
pub mod metrics;
pub mod pipeline;
pub mod raster;

pub use color::{BetaParams, ColorModel, ColorModelFile, ColorSampleSet};
pub use ink::{InkSample, Level, NormalizationConfig, Point, Stroke};
pub use metrics::{CharClass, EvalPair, ScoreReport};
pub use pipeline::{GenerateOptions, ManifestRecord, TransferConfig};
pub use raster::{GrayImage, WidthMode, WidthModel};
