use std::fmt::Write as _;
use std::path::Path;

use super::{fmt_real, parse_count, parse_real, read_text};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

pub fn write_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    std::fs::write(path, format_point_cloud(cloud)?)?;
    Ok(())
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_point_cloud(&read_text(path.as_ref())?)
}

pub fn format_point_cloud(cloud: &PointCloud) -> Result<String> {
    cloud.validate()?;
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\ncomment cardioreg point cloud\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.values.is_some() {
        s.push_str("property double value\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", fmt_real(p.x), fmt_real(p.y), fmt_real(p.z));
        if let Some(v) = &cloud.values {
            let _ = write!(s, " {}", fmt_real(v[i]));
        }
        s.push('\n');
    }
    Ok(s)
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16", "int32",
    "uint32", "float32", "float64",
];

/// Reads the `vertex` element of an ASCII PLY; other elements are skipped.
pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    if lines.next().map(|(_, l)| l) != Some("ply") {
        return Err(Error::parse(1, "missing `ply` magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    let mut last = 1;
    for (n, line) in lines.by_ref() {
        last = n;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::parse(n, "only the ascii PLY format is supported"));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| Error::parse(n, "element without a name"))?;
                let count = parse_count(tok.next(), n, "element count")?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(n, "property before any element"))?;
                let ty = tok.next().ok_or_else(|| Error::parse(n, "property without a type"))?;
                if ty == "list" {
                    el.has_list = true;
                    let _ = (tok.next(), tok.next());
                } else if !SCALAR_TYPES.contains(&ty) {
                    return Err(Error::parse(n, format!("unknown property type `{ty}`")));
                }
                let name = tok.next().ok_or_else(|| Error::parse(n, "property without a name"))?;
                el.properties.push(name.to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(Error::parse(n, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !header_done {
        return Err(Error::parse(last + 1, "header ends without `end_header`"));
    }
    if !saw_format {
        return Err(Error::parse(last, "header lacks a `format` line"));
    }
    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse(last, "no vertex element"))?;
    let vertex = &elements[vi];
    if vertex.has_list {
        return Err(Error::parse(last, "list properties on vertices are not supported"));
    }
    let col = |name: &str| vertex.properties.iter().position(|p| p == name);
    let (cx, cy, cz) = match (col("x"), col("y"), col("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(last, "vertex element needs x, y and z properties")),
    };
    let cv = col("value");

    let mut points = Vec::new();
    let mut values = Vec::new();
    for (ei, el) in elements.iter().enumerate() {
        for _ in 0..el.count {
            let (n, line) = lines.next().ok_or_else(|| {
                Error::parse(last + 1, format!("file ends inside element `{}` (expected {} rows)", el.name, el.count))
            })?;
            last = n;
            if ei != vi {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != el.properties.len() {
                return Err(Error::parse(
                    n,
                    format!("expected {} values, found {}", el.properties.len(), toks.len()),
                ));
            }
            points.push(Point3::new(parse_real(toks[cx], n)?, parse_real(toks[cy], n)?, parse_real(toks[cz], n)?));
            if let Some(c) = cv {
                values.push(parse_real(toks[c], n)?);
            }
        }
    }
    Ok(PointCloud {
        points,
        values: cv.map(|_| values),
    })
}
