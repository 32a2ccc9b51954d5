//! Marching cubes on a binary indicator field at level 0.5.
//!
//! The case table is generated rather than transcribed. On each cube face
//! the corners are walked counter-clockwise as seen from outside the cube;
//! every crossing edge where the walk enters the inside starts a segment
//! that ends at the next crossing edge where it leaves. Each crossing edge
//! is shared by two faces that walk it in opposite directions, so the
//! segments chain into closed loops. Ambiguous faces keep their two inside
//! corners apart, and a neighbouring cube resolves the shared face the same
//! way, so the surface is closed with every edge used by exactly two
//! triangles.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::Vector3;

use super::{Mask, TriMesh};
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Cube edge as (lower corner, axis). Corner bit `a` is the offset along axis `a`.
type Edge = (u8, u8);

fn corner_offset(c: u8) -> [i64; 3] {
    [(c & 1) as i64, ((c >> 1) & 1) as i64, ((c >> 2) & 1) as i64]
}

fn edge_between(u: u8, v: u8) -> Edge {
    let axis = (u ^ v).trailing_zeros() as u8;
    (u & v, axis)
}

/// Corners of each face, counter-clockwise about the outward normal.
fn faces() -> Vec<[u8; 4]> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3u8 {
        for side in 0..2u8 {
            let corners: Vec<u8> = (0..8u8).filter(|c| (c >> axis) & 1 == side).collect();
            let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
            // order around the face centre in the (a1, a2) plane
            let mut ring = corners;
            let angle = |c: &u8| {
                let o = corner_offset(*c);
                (o[a2 as usize] as f64 - 0.5).atan2(o[a1 as usize] as f64 - 0.5)
            };
            ring.sort_by(|x, y| angle(x).total_cmp(&angle(y)));
            // (a1, a2, axis) is right handed, so increasing angle is
            // counter-clockwise about +axis
            if side == 0 {
                ring.reverse();
            }
            out.push([ring[0], ring[1], ring[2], ring[3]]);
        }
    }
    out
}

/// Loops of crossing edges for every corner configuration.
fn case_table() -> &'static Vec<Vec<Vec<Edge>>> {
    static TABLE: OnceLock<Vec<Vec<Vec<Edge>>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let faces = faces();
        (0..256u16)
            .map(|config| {
                let inside = |c: u8| (config >> c) & 1 == 1;
                let mut next: HashMap<Edge, Edge> = HashMap::new();
                for f in &faces {
                    let mut enter = None;
                    // start after an outside corner so pairing never wraps mid-run
                    let start = (0..4).find(|&s| !inside(f[s])).unwrap_or(0);
                    for step in 0..4 {
                        let a = f[(start + step) % 4];
                        let b = f[(start + step + 1) % 4];
                        match (inside(a), inside(b)) {
                            (false, true) => enter = Some(edge_between(a, b)),
                            (true, false) => {
                                let from = enter.take().expect("leave follows enter");
                                next.insert(from, edge_between(a, b));
                            }
                            _ => {}
                        }
                    }
                }
                let mut starts: Vec<Edge> = next.keys().copied().collect();
                starts.sort_unstable();
                let mut used = std::collections::HashSet::new();
                let mut loops = Vec::new();
                for s in starts {
                    if used.contains(&s) {
                        continue;
                    }
                    let mut lp = vec![s];
                    used.insert(s);
                    let mut e = next[&s];
                    while e != s {
                        used.insert(e);
                        lp.push(e);
                        e = next[&e];
                    }
                    loops.push(lp);
                }
                loops
            })
            .collect()
    })
}

/// Closed, outward-oriented surface around the set voxels.
///
/// Grid samples are voxel centres; crossings sit midway between a set and
/// an unset centre. Loops of three crossings give one triangle and longer
/// loops are fanned around a new centroid vertex, which keeps every
/// internal edge private to its loop.
pub fn extract_isosurface(mask: &Mask) -> Result<TriMesh> {
    if !mask.data.iter().any(|&b| b) {
        return Err(Error::EmptyInput("mask"));
    }
    let table = case_table();
    let r = &mask.reference;
    let [nx, ny, nz] = r.image_size;
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut edge_vertex: HashMap<([i64; 3], u8), usize> = HashMap::new();

    // cube with lower corner at voxel (i, j, k), from −1 so the padding closes the surface
    for k in -1..nz as i64 {
        for j in -1..ny as i64 {
            for i in -1..nx as i64 {
                let mut config = 0usize;
                for c in 0..8u8 {
                    let o = corner_offset(c);
                    if mask.get_signed((i + o[0]) as isize, (j + o[1]) as isize, (k + o[2]) as isize) {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                for lp in &table[config] {
                    let ids: Vec<usize> = lp
                        .iter()
                        .map(|&(corner, axis)| {
                            let o = corner_offset(corner);
                            let key = ([i + o[0], j + o[1], k + o[2]], axis);
                            *edge_vertex.entry(key).or_insert_with(|| {
                                let mut g = [key.0[0] as f64 + 0.5, key.0[1] as f64 + 0.5, key.0[2] as f64 + 0.5];
                                g[axis as usize] += 0.5;
                                vertices.push(Point3::new(
                                    r.origin[0] + g[0] * r.pixel_extent[0],
                                    r.origin[1] + g[1] * r.pixel_extent[1],
                                    r.origin[2] + g[2] * r.pixel_extent[2],
                                ));
                                vertices.len() - 1
                            })
                        })
                        .collect();
                    match ids.len() {
                        3 => triangles.push([ids[0], ids[1], ids[2]]),
                        n => {
                            let c = ids.iter().fold(Vector3::zeros(), |acc, &v| acc + vertices[v].coords) / n as f64;
                            vertices.push(Point3::from(c));
                            let centre = vertices.len() - 1;
                            for a in 0..n {
                                triangles.push([centre, ids[a], ids[(a + 1) % n]]);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(TriMesh {
        vertices,
        triangles,
        vertex_values: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::build_spatial_reference;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask_from(size: [usize; 3], voxel: [f64; 3], f: impl Fn(usize, usize, usize) -> bool) -> Mask {
        let r = build_spatial_reference(size, voxel, [-3.0, 2.0, 5.0]).unwrap();
        let mut m = Mask::empty(r);
        for k in 0..size[2] {
            for j in 0..size[1] {
                for i in 0..size[0] {
                    m.set(i, j, k, f(i, j, k));
                }
            }
        }
        m
    }

    #[test]
    fn table_loops_cover_each_crossing_edge_once() {
        let table = case_table();
        for (config, loops) in table.iter().enumerate() {
            let mut crossing = 0;
            for u in 0..8u8 {
                for a in 0..3u8 {
                    if (u >> a) & 1 == 0 {
                        let v = u | (1 << a);
                        if ((config >> u) & 1) != ((config >> v) & 1) {
                            crossing += 1;
                        }
                    }
                }
            }
            assert_eq!(loops.iter().map(Vec::len).sum::<usize>(), crossing);
            assert!(loops.iter().all(|l| l.len() >= 3));
        }
    }

    #[test]
    fn single_voxel_gives_octahedron() {
        let m = mask_from([3, 3, 3], [1.0; 3], |i, j, k| (i, j, k) == (1, 1, 1));
        let mesh = extract_isosurface(&m).unwrap();
        assert_eq!(mesh.vertices.len(), 6);
        assert_eq!(mesh.triangles.len(), 8);
        assert!(mesh.is_watertight());
        assert!((mesh.signed_volume() - 1.0 / 6.0).abs() < 1e-12);
        mesh.validate().unwrap();
    }

    #[test]
    fn solid_block_volume_within_five_percent() {
        let m = mask_from([12, 12, 12], [0.7, 1.1, 0.9], |i, j, k| {
            (1..11).contains(&i) && (1..11).contains(&j) && (1..11).contains(&k)
        });
        let mesh = extract_isosurface(&m).unwrap();
        assert!(mesh.is_watertight());
        let block = 1000.0 * 0.7 * 1.1 * 0.9;
        let v = mesh.signed_volume();
        assert!(v > 0.0);
        assert!((v - block).abs() / block < 0.05, "{v} vs {block}");
    }

    #[test]
    fn voxels_touching_the_border_are_closed() {
        let m = mask_from([2, 2, 2], [1.0; 3], |_, _, _| true);
        let mesh = extract_isosurface(&m).unwrap();
        assert!(mesh.is_watertight());
        assert!(mesh.signed_volume() > 0.0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let m = mask_from([2, 2, 2], [1.0; 3], |_, _, _| false);
        assert!(matches!(extract_isosurface(&m), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn random_masks_are_watertight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let p = rng.random_range(0.1..0.9);
            let bits: Vec<bool> = (0..6 * 5 * 4).map(|_| rng.random_bool(p)).collect();
            if !bits.iter().any(|&b| b) {
                continue;
            }
            let m = mask_from([6, 5, 4], [1.0; 3], |i, j, k| bits[i + 6 * (j + 5 * k)]);
            let mesh = extract_isosurface(&m).unwrap();
            mesh.validate().unwrap();
            assert!(mesh.is_watertight());
            assert!(mesh.signed_volume() > 0.0);
        }
    }
}
