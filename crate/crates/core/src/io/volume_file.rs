use std::path::Path;

use super::{fmt_real, parse_count, parse_real, FileHeader};
use crate::error::{Error, Result};
use crate::segmentation::Mask;
use crate::volume::{build_spatial_reference, Volume};

const MAGIC: &str = "cardioreg-volume";
const DESCRIPTOR: &str = "float32-le i-fastest";
const END: &str = "end_header";

/// Header lines followed by the raw body:
///
/// ```text
/// cardioreg-volume 1 float32-le i-fastest
/// size 512 512 253
/// voxel 0.4082 0.4082 0.5
/// origin -81.1 -278.1 -234.0
/// end_header
/// ```
pub fn encode_volume(vol: &Volume) -> Vec<u8> {
    let r = &vol.reference;
    let mut head = FileHeader::new(MAGIC, DESCRIPTOR).render();
    head.push('\n');
    head.push_str(&format!("size {} {} {}\n", r.image_size[0], r.image_size[1], r.image_size[2]));
    let triple = |v: [f64; 3]| format!("{} {} {}", fmt_real(v[0]), fmt_real(v[1]), fmt_real(v[2]));
    head.push_str(&format!("voxel {}\n", triple(r.pixel_extent)));
    head.push_str(&format!("origin {}\n", triple(r.origin)));
    head.push_str(END);
    head.push('\n');
    let mut out = head.into_bytes();
    out.reserve(4 * vol.data.len());
    for v in &vol.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    let marker = format!("\n{END}\n");
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| Error::parse(1, format!("no `{END}` line")))?;
    let head = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::parse(1, "header is not UTF-8"))?;
    let body = &bytes[split + marker.len()..];
    let lines: Vec<&str> = head.lines().collect();
    FileHeader::expect(lines.first().copied(), 1, MAGIC, DESCRIPTOR)?;

    let mut size = None;
    let mut voxel = None;
    let mut origin = None;
    for (i, line) in lines.iter().enumerate().skip(1) {
        let n = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("size") => {
                let mut s = [0usize; 3];
                for v in &mut s {
                    *v = parse_count(tok.next(), n, "size")?;
                }
                size = Some(s);
            }
            Some(key @ ("voxel" | "origin")) => {
                let mut v = [0.0; 3];
                for c in &mut v {
                    *c = parse_real(tok.next().ok_or_else(|| Error::parse(n, format!("{key} needs 3 values")))?, n)?;
                }
                if key == "voxel" {
                    voxel = Some(v);
                } else {
                    origin = Some(v);
                }
            }
            Some(other) => return Err(Error::parse(n, format!("unknown header field `{other}`"))),
            None => continue,
        }
        if tok.next().is_some() {
            return Err(Error::parse(n, "trailing tokens"));
        }
    }
    let end_line = lines.len() + 1;
    let (size, voxel, origin) = match (size, voxel, origin) {
        (Some(s), Some(v), Some(o)) => (s, v, o),
        _ => return Err(Error::parse(end_line, "header needs size, voxel and origin")),
    };
    let reference = build_spatial_reference(size, voxel, origin)
        .map_err(|e| Error::parse(end_line, format!("invalid spatial reference: {e}")))?;
    let count = reference.voxel_count();
    if body.len() as u64 != 4 * count as u64 {
        return Err(Error::parse(
            end_line + 1,
            format!("body holds {} bytes, {count} voxels need {}", body.len(), 4 * count),
        ));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Volume::new(data, reference)
}

pub fn write_volume(path: impl AsRef<Path>, vol: &Volume) -> Result<()> {
    std::fs::write(path, encode_volume(vol))?;
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    decode_volume(&std::fs::read(path)?)
}

/// Masks travel as 0/1 volumes.
pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_volume(path, &mask.to_volume())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    Ok(Mask::from_volume(&read_volume(path)?))
}
