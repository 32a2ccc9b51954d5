use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;

use super::{content_lines, fmt_real, parse_count, parse_real, read_text, FileHeader};
use crate::coarse::LandmarkSet;
use crate::error::{Error, Result};
use crate::geometry::{AffineTransform3, Point3, TransformKind};

const TRANSFORM_MAGIC: &str = "cardioreg-transform";
const TRANSFORM_DESC: &str = "homogeneous-4x4 row-major";
const LANDMARK_MAGIC: &str = "cardioreg-landmarks";
const LANDMARK_DESC: &str = "anterior posterior";

/// ```text
/// cardioreg-transform 1 homogeneous-4x4 row-major
/// kind similarity
/// m00 m01 m02 t0
/// m10 m11 m12 t1
/// m20 m21 m22 t2
/// 0.0 0.0 0.0 1.0
/// ```
pub fn format_transform(t: &AffineTransform3) -> String {
    let mut s = FileHeader::new(TRANSFORM_MAGIC, TRANSFORM_DESC).render();
    let _ = writeln!(s, "\nkind {}", t.kind.as_str());
    let h = t.to_homogeneous();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| fmt_real(h[(r, c)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn parse_transform(text: &str) -> Result<AffineTransform3> {
    let mut lines = content_lines(text);
    let (n, head) = lines.next().map_or((1, None), |(n, l)| (n, Some(l)));
    FileHeader::expect(head, n, TRANSFORM_MAGIC, TRANSFORM_DESC)?;
    let (n, line) = lines.next().ok_or_else(|| Error::parse(n + 1, "missing `kind` line"))?;
    let mut tok = line.split_whitespace();
    if tok.next() != Some("kind") {
        return Err(Error::parse(n, "expected `kind <tag>`"));
    }
    let tag = tok.next().unwrap_or("");
    let kind = TransformKind::parse(tag).ok_or_else(|| Error::parse(n, format!("unknown transform kind `{tag}`")))?;
    let mut m = Matrix4::zeros();
    let mut last = n;
    for r in 0..4 {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(last + 1, format!("matrix has {r} rows, expected 4")))?;
        last = n;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 4 {
            return Err(Error::parse(n, format!("matrix row has {} entries, expected 4", vals.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            m[(r, c)] = parse_real(v, n)?;
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::parse(n, "trailing content after the matrix"));
    }
    AffineTransform3::from_homogeneous(&m, kind)
}

pub fn write_transform(path: impl AsRef<Path>, t: &AffineTransform3) -> Result<()> {
    std::fs::write(path, format_transform(t))?;
    Ok(())
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<AffineTransform3> {
    parse_transform(&read_text(path.as_ref())?)
}

/// ```text
/// cardioreg-landmarks 1 anterior posterior
/// anterior 2
/// x y z
/// x y z
/// posterior 1
/// x y z
/// ```
pub fn format_landmarks(set: &LandmarkSet) -> String {
    let mut s = FileHeader::new(LANDMARK_MAGIC, LANDMARK_DESC).render();
    s.push('\n');
    for (label, group) in [("anterior", &set.anterior), ("posterior", &set.posterior)] {
        let _ = writeln!(s, "{label} {}", group.len());
        for p in group {
            let _ = writeln!(s, "{} {} {}", fmt_real(p.x), fmt_real(p.y), fmt_real(p.z));
        }
    }
    s
}

pub fn parse_landmarks(text: &str) -> Result<LandmarkSet> {
    let mut lines = content_lines(text);
    let (n, head) = lines.next().map_or((1, None), |(n, l)| (n, Some(l)));
    FileHeader::expect(head, n, LANDMARK_MAGIC, LANDMARK_DESC)?;
    let mut last = n;
    let mut groups: [Vec<Point3>; 2] = [Vec::new(), Vec::new()];
    for (g, label) in ["anterior", "posterior"].iter().enumerate() {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(last + 1, format!("missing `{label}` group")))?;
        last = n;
        let mut tok = line.split_whitespace();
        if tok.next() != Some(*label) {
            return Err(Error::parse(n, format!("expected `{label} <count>`")));
        }
        let count = parse_count(tok.next(), n, "point count")?;
        for _ in 0..count {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(last + 1, format!("`{label}` group ends early")))?;
            last = n;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::parse(n, format!("expected 3 coordinates, found {}", t.len())));
            }
            groups[g].push(Point3::new(parse_real(t[0], n)?, parse_real(t[1], n)?, parse_real(t[2], n)?));
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::parse(n, "trailing content after the posterior group"));
    }
    let [anterior, posterior] = groups;
    Ok(LandmarkSet::new(anterior, posterior))
}

pub fn write_landmarks(path: impl AsRef<Path>, set: &LandmarkSet) -> Result<()> {
    std::fs::write(path, format_landmarks(set))?;
    Ok(())
}

pub fn read_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    parse_landmarks(&read_text(path.as_ref())?)
}
