//! Seeded region growing and conversion of masks to meshes and clouds.

mod isosurface;

use std::collections::VecDeque;

pub use isosurface::extract_isosurface;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::volume::{SpatialReference, Volume};

/// Binary voxel mask sharing the volume's placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub data: Vec<bool>,
    pub reference: SpatialReference,
}

impl Mask {
    pub fn new(data: Vec<bool>, reference: SpatialReference) -> Result<Self> {
        if data.len() != reference.voxel_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} mask entries for a {:?} grid",
                data.len(),
                reference.image_size
            )));
        }
        Ok(Self { data, reference })
    }

    pub fn empty(reference: SpatialReference) -> Self {
        Self {
            data: vec![false; reference.voxel_count()],
            reference,
        }
    }

    pub fn size(&self) -> [usize; 3] {
        self.reference.image_size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.reference.linear_index(i, j, k)]
    }

    /// Same as `get`, with out-of-range indices reading as unset.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> bool {
        let [nx, ny, nz] = self.size();
        if i < 0 || j < 0 || k < 0 || i as usize >= nx || j as usize >= ny || k as usize >= nz {
            return false;
        }
        self.get(i as usize, j as usize, k as usize)
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.reference.linear_index(i, j, k);
        self.data[idx] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Converts to a 0/1 volume for storage.
    pub fn to_volume(&self) -> Volume {
        Volume {
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            reference: self.reference,
        }
    }

    /// Voxels with a value above 0.5 are set.
    pub fn from_volume(vol: &Volume) -> Self {
        Self {
            data: vol.data.iter().map(|&v| v > 0.5).collect(),
            reference: vol.reference,
        }
    }
}

/// Indexed triangle mesh in world millimetres.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub vertex_values: Option<Vec<f64>>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Checks index range, degenerate triangles and the value payload.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidData(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidData(format!("triangle {t} repeats a vertex")));
            }
        }
        if let Some(v) = &self.vertex_values {
            if v.len() != n {
                return Err(Error::ShapeMismatch(format!("{} values for {n} vertices", v.len())));
            }
        }
        Ok(())
    }

    /// Signed enclosed volume by the divergence theorem; positive when
    /// triangles wind counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0]].coords;
                let b = self.vertices[t[1]].coords;
                let c = self.vertices[t[2]].coords;
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// True when every undirected edge borders exactly two triangles and
    /// each such pair traverses it in opposite directions.
    pub fn is_watertight(&self) -> bool {
        use std::collections::HashMap;
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }
}

/// Neighbourhood used by region growing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Face neighbours in the order +i, −i, +j, −j, +k, −k.
    #[default]
    Six,
    /// Face neighbours as above, then the remaining 20 in (k, j, i) scan order.
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[isize; 3]> {
        let mut v = vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        if self == Connectivity::TwentySix {
            for dk in -1..=1isize {
                for dj in -1..=1isize {
                    for di in -1..=1isize {
                        let nz = (di != 0) as u8 + (dj != 0) as u8 + (dk != 0) as u8;
                        if nz >= 2 {
                            v.push([di, dj, dk]);
                        }
                    }
                }
            }
        }
        v
    }
}

/// Region growing with the running-mean criterion `|v − M| ≤ T` over six
/// face neighbours.
pub fn region_grow(vol: &Volume, seeds: &[[usize; 3]], threshold: f64) -> Result<Mask> {
    region_grow_with(vol, seeds, threshold, Connectivity::Six)
}

/// Region growing with a chosen neighbourhood. Repeated seeds count once.
pub fn region_grow_with(vol: &Volume, seeds: &[[usize; 3]], threshold: f64, conn: Connectivity) -> Result<Mask> {
    if seeds.is_empty() {
        return Err(Error::EmptyInput("seeds"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be non-negative, got {threshold}")));
    }
    let r = &vol.reference;
    let [nx, ny, nz] = r.image_size;
    let mut mask = Mask::empty(*r);
    let mut queue = VecDeque::new();
    let mut n = 0usize;
    let mut sum = 0.0f64;
    for &s in seeds {
        if !r.contains_index(s) {
            return Err(Error::IndexOutOfBounds { index: s, size: r.image_size });
        }
        let idx = r.linear_index(s[0], s[1], s[2]);
        if !mask.data[idx] {
            mask.data[idx] = true;
            queue.push_back(s);
            sum += vol.data[idx] as f64;
            n += 1;
        }
    }
    let mut mean = sum / n as f64;
    let offsets = conn.offsets();
    while let Some([i, j, k]) = queue.pop_front() {
        for d in &offsets {
            let (a, b, c) = (i as isize + d[0], j as isize + d[1], k as isize + d[2]);
            if a < 0 || b < 0 || c < 0 || a as usize >= nx || b as usize >= ny || c as usize >= nz {
                continue;
            }
            let (a, b, c) = (a as usize, b as usize, c as usize);
            let idx = r.linear_index(a, b, c);
            if mask.data[idx] {
                continue;
            }
            let v = vol.data[idx] as f64;
            if (v - mean).abs() <= threshold {
                mask.data[idx] = true;
                queue.push_back([a, b, c]);
                mean = (n as f64 * mean + v) / (n as f64 + 1.0);
                n += 1;
            }
        }
    }
    Ok(mask)
}

/// Centres of set voxels that touch an unset or out-of-range face
/// neighbour, in ascending (k, j, i) order.
pub fn mask_to_point_cloud(mask: &Mask) -> Result<PointCloud> {
    let [nx, ny, nz] = mask.size();
    let mut points = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !mask.get(i, j, k) {
                    continue;
                }
                let (a, b, c) = (i as isize, j as isize, k as isize);
                let interior = mask.get_signed(a + 1, b, c)
                    && mask.get_signed(a - 1, b, c)
                    && mask.get_signed(a, b + 1, c)
                    && mask.get_signed(a, b - 1, c)
                    && mask.get_signed(a, b, c + 1)
                    && mask.get_signed(a, b, c - 1);
                if !interior {
                    points.push(mask.reference.center_unchecked([i, j, k]));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("mask"));
    }
    Ok(PointCloud::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::build_spatial_reference;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(size: [usize; 3]) -> SpatialReference {
        build_spatial_reference(size, [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn uniform_volume_fills_completely() {
        let v = Volume::filled(grid([4, 3, 5]), 7.0);
        let m = region_grow(&v, &[[2, 1, 3]], 0.0).unwrap();
        assert!(m.data.iter().all(|&b| b));
    }

    #[test]
    fn two_blocks_split_along_i() {
        let r = grid([4, 2, 2]);
        let v = Volume::from_fn(r, |p| if p.x < 2.0 { 0.0 } else { 1000.0 });
        let m = region_grow(&v, &[[0, 0, 0]], 400.0).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..4 {
                    assert_eq!(m.get(i, j, k), i < 2);
                }
            }
        }
    }

    #[test]
    fn running_mean_drifts_with_accepted_voxels() {
        // 0, 300, 600, 900 along i: 600 is rejected against M = 0 but
        // accepted once M = 150; 900 then faces M = 300
        let r = grid([4, 1, 1]);
        let v = Volume::new(vec![0.0, 300.0, 600.0, 900.0], r).unwrap();
        let m = region_grow(&v, &[[0, 0, 0]], 450.0).unwrap();
        assert_eq!(m.data, vec![true, true, true, false]);
        let m = region_grow(&v, &[[0, 0, 0]], 600.0).unwrap();
        assert_eq!(m.data, vec![true, true, true, true]);
        let m = region_grow(&v, &[[0, 0, 0]], 300.0).unwrap();
        assert_eq!(m.data, vec![true, true, false, false]);
    }

    #[test]
    fn seed_errors() {
        let v = Volume::filled(grid([2, 2, 2]), 0.0);
        assert!(matches!(region_grow(&v, &[[2, 0, 0]], 1.0), Err(Error::IndexOutOfBounds { .. })));
        assert!(matches!(region_grow(&v, &[], 1.0), Err(Error::EmptyInput(_))));
        assert!(matches!(region_grow(&v, &[[0, 0, 0]], -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn twenty_six_reaches_diagonals() {
        let r = grid([2, 2, 1]);
        let v = Volume::new(vec![0.0, 900.0, 900.0, 0.0], r).unwrap();
        let six = region_grow(&v, &[[0, 0, 0]], 10.0).unwrap();
        let all = region_grow_with(&v, &[[0, 0, 0]], 10.0, Connectivity::TwentySix).unwrap();
        assert_eq!(six.count(), 1);
        assert_eq!(all.data, vec![true, false, false, true]);
    }

    #[test]
    fn grown_region_is_connected_and_holds_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let r = grid([7, 6, 5]);
            let data = (0..r.voxel_count()).map(|_| rng.random_range(0..5) as f32 * 100.0).collect();
            let v = Volume::new(data, r).unwrap();
            let seed = [rng.random_range(0..7), rng.random_range(0..6), rng.random_range(0..5)];
            let m = region_grow(&v, &[seed], 150.0).unwrap();
            assert!(m.get(seed[0], seed[1], seed[2]));
            // flood the mask itself from the seed; it must reach every set voxel
            let flood = region_grow(&m.to_volume(), &[seed], 0.5).unwrap();
            assert_eq!(flood, m);
        }
    }

    #[test]
    fn boundary_cloud_examples() {
        let r = grid([5, 5, 5]);
        let mut m = Mask::empty(r);
        m.set(2, 2, 2, true);
        let c = mask_to_point_cloud(&m).unwrap();
        assert_eq!(c.points, vec![Point3::new(2.5, 2.5, 2.5)]);

        for k in 1..4 {
            for j in 1..4 {
                for i in 1..4 {
                    m.set(i, j, k, true);
                }
            }
        }
        let c = mask_to_point_cloud(&m).unwrap();
        assert_eq!(c.len(), 26);
        assert!(!c.points.contains(&Point3::new(2.5, 2.5, 2.5)));
        assert_eq!(c.points[0], Point3::new(1.5, 1.5, 1.5));
        assert!(matches!(mask_to_point_cloud(&Mask::empty(r)), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn mask_volume_round_trip() {
        let r = grid([3, 2, 2]);
        let m = Mask::new(vec![true, false, true, false, false, true, true, true, false, false, false, true], r).unwrap();
        assert_eq!(Mask::from_volume(&m.to_volume()), m);
        assert!(Mask::new(vec![true], r).is_err());
    }
}
