//! Label maps as 8-bit grayscale PNG, and colorized RGB renderings.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::taxonomy::Taxonomy;
use crate::tensor::LabelMap;

fn png_err(e: impl std::fmt::Display) -> FormatError {
    FormatError::Png(e.to_string())
}

/// Decodes an 8-bit single-channel PNG, validating ids against a taxonomy.
pub fn decode_labelmap(bytes: &[u8], tax: &Taxonomy) -> Result<LabelMap, FormatError> {
    let map = decode_gray8(bytes)?;
    if let Some((id, row, col)) = map.first_invalid(tax) {
        return Err(FormatError::InvalidLabel { id, row, col });
    }
    Ok(map)
}

/// Decodes an 8-bit single-channel PNG without any id validation.
pub fn decode_gray8(bytes: &[u8]) -> Result<LabelMap, FormatError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(FormatError::UnsupportedPng(format!(
            "expected 8-bit grayscale, found {:?} at {} bits",
            info.color_type, info.bit_depth as u8
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| FormatError::UnsupportedPng("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    // rows are tightly packed for 8-bit grayscale
    LabelMap::new(height, width, buf).map_err(|e| FormatError::UnsupportedPng(e.to_string()))
}

pub fn read_labelmap(path: impl AsRef<Path>, tax: &Taxonomy) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_labelmap(&bytes, tax).map_err(|e| Error::Format(e).at_path(path))
}

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_compression(png::Compression::Fast);
        // writing into a Vec cannot fail for a correctly sized buffer
        let mut writer = encoder.write_header().expect("png header");
        writer.write_image_data(data).expect("png data");
        writer.finish().expect("png finish");
    }
    out
}

pub fn encode_labelmap(map: &LabelMap) -> Vec<u8> {
    encode(map.width(), map.height(), png::ColorType::Grayscale, map.ids())
}

pub fn write_labelmap(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_labelmap(map)).map_err(|e| Error::io(path, e))
}

/// RGB pixels for a label map: each class in its taxonomy color, void black.
pub fn colorize(map: &LabelMap, tax: &Taxonomy) -> Vec<u8> {
    let mut palette = [[0u8; 3]; 256];
    for class in tax.classes() {
        if !class.is_void {
            palette[class.id as usize] = class.color;
        }
    }
    map.ids()
        .iter()
        .flat_map(|&id| palette[id as usize])
        .collect()
}

pub fn encode_rgb(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    encode(width, height, png::ColorType::Rgb, rgb)
}

pub fn encode_colorized(map: &LabelMap, tax: &Taxonomy) -> Vec<u8> {
    encode_rgb(map.width(), map.height(), &colorize(map, tax))
}

pub fn write_colorized(map: &LabelMap, tax: &Taxonomy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_colorized(map, tax)).map_err(|e| Error::io(path, e))
}

/// Decodes an 8-bit RGB PNG into `(width, height, pixels)`.
pub fn decode_rgb(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), FormatError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(FormatError::UnsupportedPng("expected 8-bit RGB".into()));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    Ok((w, h, buf))
}
