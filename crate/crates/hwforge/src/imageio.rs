//! Grayscale raster I/O: binary PGM (P5) as the bit-exact interchange
//! format, plus 8-bit grayscale PNG as a convenience.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::raster::GrayImage;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad image data: {0}")]
    Format(String),
    #[error("unsupported image: {0}")]
    Unsupported(String),
}

fn io_err(path: &Path, source: std::io::Error) -> ImageIoError {
    ImageIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Encode as binary PGM with the exact header `P5\n{w} {h}\n255\n`.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.pixels().len() + 20);
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())
        .expect("writing to a Vec cannot fail");
    out.extend_from_slice(image.pixels());
    out
}

/// Decode binary PGM. Accepts standard whitespace and `#` comments in
/// the header and any maxval up to 255 (pixel bytes are used as-is).
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImageIoError> {
    if !bytes.starts_with(b"P5") {
        return Err(ImageIoError::Format("missing P5 magic".into()));
    }
    let mut pos = 2usize;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        *field = read_header_int(bytes, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(ImageIoError::Unsupported(format!(
            "maxval {maxval}; only 8-bit images are supported"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width
        .checked_mul(height)
        .filter(|&n| n > 0 && n <= (1u64 << 34))
        .ok_or_else(|| ImageIoError::Format(format!("bad dimensions {width}x{height}")))?
        as usize;
    let data = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| ImageIoError::Format("truncated pixel data".into()))?;
    GrayImage::from_raw(width as u32, height as u32, data.to_vec())
        .map_err(|e| ImageIoError::Format(e.to_string()))
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<u64, ImageIoError> {
    // Skip whitespace and comment lines.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(ImageIoError::Format("expected integer in PGM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .expect("digits are ASCII")
        .parse()
        .map_err(|e| ImageIoError::Format(format!("bad PGM header integer: {e}")))
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<(), ImageIoError> {
    fs::write(path, encode_pgm(image)).map_err(|e| io_err(path, e))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage, ImageIoError> {
    decode_pgm(&fs::read(path).map_err(|e| io_err(path, e))?)
}

/// Write as 8-bit grayscale PNG.
pub fn write_png(path: &Path, image: &GrayImage) -> Result<(), ImageIoError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), image.width(), image.height());
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| ImageIoError::Format(e.to_string()))?;
    writer
        .write_image_data(image.pixels())
        .map_err(|e| ImageIoError::Format(e.to_string()))?;
    Ok(())
}

/// Read an 8-bit grayscale PNG. Other color types or depths are
/// rejected rather than converted.
pub fn read_png(path: &Path) -> Result<GrayImage, ImageIoError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| ImageIoError::Format(e.to_string()))?;
    let buf_size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageIoError::Format("PNG dimensions overflow".into()))?;
    let mut buf = vec![0u8; buf_size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| ImageIoError::Format(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(ImageIoError::Unsupported(format!(
            "PNG must be 8-bit grayscale, got {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    GrayImage::from_raw(info.width, info.height, buf)
        .map_err(|e| ImageIoError::Format(e.to_string()))
}

/// Read a grayscale raster, dispatching on content (PNG signature or
/// PGM magic).
pub fn read_gray_auto(path: &Path) -> Result<GrayImage, ImageIoError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        // Re-read through the PNG decoder; files are small enough that
        // the double read is irrelevant next to decode cost.
        read_png(path)
    } else {
        decode_pgm(&bytes)
    }
}
