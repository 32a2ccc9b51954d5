//! File formats for every data type.
//!
//! * point clouds: ASCII PLY, optional per-vertex `value` property
//! * meshes: binary STL, per-vertex values in a `<file>.values` sidecar
//! * volumes and masks: text header followed by raw little-endian `f32`
//! * transforms and landmarks: plain text
//!
//! Reals in text formats are written in Rust's shortest round-trip form, so
//! every text reader returns the exact value that was written.

mod ply;
mod stl;
mod text;
mod volume_file;

use std::path::Path;

pub use ply::{format_point_cloud, parse_point_cloud, read_point_cloud, write_point_cloud};
pub use stl::{decode_stl, encode_stl, read_mesh, values_path, write_mesh};
pub use text::{
    format_landmarks, format_transform, parse_landmarks, parse_transform, read_landmarks, read_transform,
    write_landmarks, write_transform,
};
pub use volume_file::{decode_volume, encode_volume, read_mask, read_volume, write_mask, write_volume};

use crate::error::{Error, Result};

/// First line of the native formats: `<magic> <version> <descriptor>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub magic: String,
    pub version: u32,
    pub descriptor: String,
}

pub const FORMAT_VERSION: u32 = 1;

impl FileHeader {
    pub fn new(magic: &str, descriptor: &str) -> Self {
        Self {
            magic: magic.to_string(),
            version: FORMAT_VERSION,
            descriptor: descriptor.to_string(),
        }
    }

    pub fn render(&self) -> String {
        format!("{} {} {}", self.magic, self.version, self.descriptor)
    }

    /// Parses line `line_no` and checks magic, version and descriptor.
    pub fn expect(line: Option<&str>, line_no: usize, magic: &str, descriptor: &str) -> Result<Self> {
        let line = line.ok_or_else(|| Error::parse(line_no, "missing file header"))?;
        let mut it = line.split_whitespace();
        let found = it.next().unwrap_or("");
        if found != magic {
            return Err(Error::parse(line_no, format!("expected `{magic}` header, found `{found}`")));
        }
        let version: u32 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(line_no, "missing or malformed format version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::parse(line_no, format!("unsupported format version {version}")));
        }
        let desc: Vec<&str> = it.collect();
        let desc = desc.join(" ");
        if desc != descriptor {
            return Err(Error::parse(line_no, format!("expected payload `{descriptor}`, found `{desc}`")));
        }
        Ok(Self {
            magic: magic.to_string(),
            version,
            descriptor: desc,
        })
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn parse_real(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

pub(crate) fn parse_count(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(line, format!("missing or malformed {what}")))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    String::from_utf8(bytes).map_err(|e| Error::parse(0, format!("file is not UTF-8: {e}")))
}

/// Lines with 1-based numbers, skipping blanks and `#` comments.
pub(crate) fn content_lines(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}
