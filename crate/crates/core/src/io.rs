//! File formats.
//!
//! * Instance masks: single-channel 16-bit PNG, `0` = background. 8-bit
//!   grayscale input is accepted too.
//! * Four-color masks: single-channel 8-bit PNG with values `0..=4`.
//! * Feature grids: little-endian binary, a 24-byte header followed by
//!   `width × height × dim` `f32` values, pixel-major (all `dim` values of
//!   pixel 0, then pixel 1, …):
//!
//!   | offset | type     | value               |
//!   |--------|----------|---------------------|
//!   | 0      | [u8; 4]  | `b"FCFG"`           |
//!   | 4      | u32      | format version (1)  |
//!   | 8      | u32      | width               |
//!   | 12     | u32      | height              |
//!   | 16     | u32      | dim                 |
//!   | 20     | u32      | reserved, 0         |
//!
//! * JSON reports: every real number is written with 17 significant digits
//!   in scientific notation so outputs diff exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::losses::FeatureGrid;
use crate::types::{FourColorMask, InstanceMask};

/// Largest instance id a 16-bit label PNG can hold.
pub const MAX_PNG_INSTANCES: u32 = u16::MAX as u32;

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => malformed(path, other.to_string()),
    })
}

pub fn read_instance_mask(path: &Path) -> Result<InstanceMask> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        other => return Err(malformed(path, format!("expected a single-channel label PNG, got {:?}", other.color()))),
    };
    InstanceMask::new(w, h, data)
}

pub fn write_instance_mask(path: &Path, mask: &InstanceMask) -> Result<()> {
    if let Some(&id) = mask.data().iter().find(|&&v| v > MAX_PNG_INSTANCES) {
        return Err(Error::Capacity(format!(
            "instance id {id} does not fit a 16-bit label PNG (max {MAX_PNG_INSTANCES})"
        )));
    }
    let raw: Vec<u16> = mask.data().iter().map(|&v| v as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("sized buffer");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn read_four_color_mask(path: &Path) -> Result<FourColorMask> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| u8::try_from(v).unwrap_or(u8::MAX))
            .collect(),
        other => return Err(malformed(path, format!("expected a single-channel PNG, got {:?}", other.color()))),
    };
    FourColorMask::new(w, h, data).map_err(|e| malformed(path, e.to_string()))
}

pub fn write_four_color_mask(path: &Path, fc: &FourColorMask) -> Result<()> {
    let buf = GrayImage::from_raw(fc.width() as u32, fc.height() as u32, fc.data().to_vec()).expect("sized buffer");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

const FEATURE_MAGIC: &[u8; 4] = b"FCFG";
const FEATURE_VERSION: u32 = 1;
const FEATURE_HEADER: usize = 24;

pub fn encode_feature_grid(grid: &FeatureGrid<f32>) -> Vec<u8> {
    let (w, h) = grid.dims();
    let mut out = Vec::with_capacity(FEATURE_HEADER + grid.data().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    for v in [FEATURE_VERSION, w as u32, h as u32, grid.dim() as u32, 0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in grid.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_grid(bytes: &[u8]) -> std::result::Result<FeatureGrid<f32>, String> {
    if bytes.len() < FEATURE_HEADER {
        return Err("truncated header".into());
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err("bad magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    if word(0) != FEATURE_VERSION {
        return Err(format!("unsupported version {}", word(0)));
    }
    let (w, h, dim) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(dim))
        .and_then(|v| v.checked_mul(4))
        .ok_or("header dimensions overflow")?;
    let body = &bytes[FEATURE_HEADER..];
    if body.len() != expected {
        return Err(format!("expected {expected} payload bytes, found {}", body.len()));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    FeatureGrid::new(w, h, dim, data).map_err(|e| e.to_string())
}

pub fn read_feature_grid(path: &Path) -> Result<FeatureGrid<f32>> {
    let bytes = fs::read(path)?;
    decode_feature_grid(&bytes).map_err(|reason| malformed(path, reason))
}

pub fn write_feature_grid(path: &Path, grid: &FeatureGrid<f32>) -> Result<()> {
    fs::write(path, encode_feature_grid(grid))?;
    Ok(())
}

/// Pretty JSON formatter that prints floats with 17 significant digits.
pub struct FixedPrecision<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for FixedPrecision<'_> {
    fn default() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

/// `v` with 17 significant digits; non-finite values become `null`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

impl Formatter for FixedPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedPrecision::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}
