use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{content_lines, fmt_real, parse_count, parse_real, read_text, FileHeader};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::segmentation::TriMesh;

const HEADER: &[u8] = b"cardioreg binary STL";
const RECORD: usize = 50;
const VALUES_MAGIC: &str = "cardioreg-values";

/// Sidecar holding per-vertex values next to an STL file.
pub fn values_path(stl: &Path) -> PathBuf {
    let mut s = stl.as_os_str().to_owned();
    s.push(".values");
    PathBuf::from(s)
}

type Key = [u32; 3];

fn key(p: &[f32; 3]) -> Key {
    // +0.0 and −0.0 are one position
    [p[0] + 0.0, p[1] + 0.0, p[2] + 0.0].map(f32::to_bits)
}

fn as_f32(p: &Point3) -> [f32; 3] {
    [p.x as f32, p.y as f32, p.z as f32]
}

/// Encodes the mesh and returns the values in the vertex order a reader
/// will reconstruct, which is first appearance over the triangle records.
pub fn encode_stl(mesh: &TriMesh) -> Result<(Vec<u8>, Option<Vec<f64>>)> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyInput("mesh has no triangles"));
    }
    mesh.validate()?;
    let n = u32::try_from(mesh.triangles.len())
        .map_err(|_| Error::InvalidParameter("too many triangles for STL".into()))?;
    let mut out = Vec::with_capacity(84 + RECORD * mesh.triangles.len());
    let mut header = [0u8; 80];
    header[..HEADER.len()].copy_from_slice(HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&n.to_le_bytes());

    let mut seen: HashSet<Key> = HashSet::new();
    let mut values = mesh.vertex_values.as_ref().map(|_| Vec::new());
    for tri in &mesh.triangles {
        let v = tri.map(|i| as_f32(&mesh.vertices[i]));
        let a = nalgebra::Vector3::new(v[1][0] - v[0][0], v[1][1] - v[0][1], v[1][2] - v[0][2]);
        let b = nalgebra::Vector3::new(v[2][0] - v[0][0], v[2][1] - v[0][1], v[2][2] - v[0][2]);
        let normal = a.cross(&b).try_normalize(0.0).unwrap_or_else(nalgebra::Vector3::zeros);
        for c in normal.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for (corner, p) in tri.iter().zip(&v) {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
            if seen.insert(key(p)) {
                if let (Some(vals), Some(src)) = (values.as_mut(), mesh.vertex_values.as_ref()) {
                    vals.push(src[*corner]);
                }
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok((out, values))
}

/// Rebuilds an indexed mesh, merging corners with identical coordinates.
/// Parse errors report the 1-based triangle record as their line.
pub fn decode_stl(bytes: &[u8]) -> Result<TriMesh> {
    if bytes.len() < 84 {
        return Err(Error::parse(0, format!("{} bytes is shorter than the 84-byte STL preamble", bytes.len())));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    let expected = 84u64 + RECORD as u64 * n as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::parse(
            0,
            format!("{n} triangles need {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(n);
    for t in 0..n {
        let rec = &bytes[84 + t * RECORD..84 + (t + 1) * RECORD];
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().expect("4 bytes"));
        let mut tri = [0usize; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let p = [f(3 + 3 * c), f(4 + 3 * c), f(5 + 3 * c)];
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(t + 1, "non-finite vertex coordinate"));
            }
            *slot = *index.entry(key(&p)).or_insert_with(|| {
                vertices.push(Point3::new(p[0] as f64, p[1] as f64, p[2] as f64));
                vertices.len() - 1
            });
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(Error::parse(t + 1, "triangle repeats a vertex"));
        }
        triangles.push(tri);
    }
    Ok(TriMesh {
        vertices,
        triangles,
        vertex_values: None,
    })
}

/// Writes the STL and, when the mesh carries values, the sidecar.
pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    let (bytes, values) = encode_stl(mesh)?;
    std::fs::write(path, bytes)?;
    let side = values_path(path);
    match values {
        Some(v) => {
            let mut s = FileHeader::new(VALUES_MAGIC, &format!("count {}", v.len())).render();
            s.push('\n');
            for x in v {
                let _ = writeln!(s, "{}", fmt_real(x));
            }
            std::fs::write(side, s)?;
        }
        None if side.exists() => std::fs::remove_file(side)?,
        None => {}
    }
    Ok(())
}

/// Reads the STL and its sidecar if one exists.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let mut mesh = decode_stl(&std::fs::read(path)?)?;
    let side = values_path(path);
    if side.exists() {
        let text = read_text(&side)?;
        let mut lines = content_lines(&text);
        let first = lines.next();
        let (line_no, head) = first.map_or((1, None), |(n, l)| (n, Some(l)));
        let count_desc = head
            .and_then(|h| h.split_whitespace().nth(3))
            .map(str::to_string)
            .unwrap_or_default();
        FileHeader::expect(head, line_no, VALUES_MAGIC, &format!("count {count_desc}"))?;
        let count = parse_count(Some(&count_desc), line_no, "value count")?;
        if count != mesh.vertices.len() {
            return Err(Error::parse(
                line_no,
                format!("{count} values for {} reconstructed vertices", mesh.vertices.len()),
            ));
        }
        let mut values = Vec::with_capacity(count);
        for (n, l) in lines {
            values.push(parse_real(l, n)?);
        }
        if values.len() != count {
            return Err(Error::parse(text.lines().count() + 1, format!("expected {count} values, found {}", values.len())));
        }
        mesh.vertex_values = Some(values);
    }
    Ok(mesh)
}
