//! Scalar volumes placed in world coordinates.
//!
//! `origin` is the world position of the lower corner of voxel `(0, 0, 0)`,
//! so the world limits along x are `[L0, L0 + size·voxel]` and voxel centres
//! sit half a voxel inside. Sampling is trilinear between voxel centres and
//! warping pulls every output voxel centre back through the inverse
//! transform.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{AffineTransform3, Point3};

/// Placement of a voxel grid in world millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialReference {
    /// Voxels per axis.
    pub image_size: [usize; 3],
    /// Voxel extent per axis (mm).
    pub pixel_extent: [f64; 3],
    /// `(L0, P0, S0)`: world corner of the first voxel.
    pub origin: [f64; 3],
    /// `[lo, hi]` per axis.
    pub world_limits: [[f64; 2]; 3],
    /// `image_size · pixel_extent` per axis.
    pub image_extent: [f64; 3],
}

impl SpatialReference {
    pub fn new(size: [usize; 3], voxel: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        build_spatial_reference(size, voxel, origin)
    }

    pub fn voxel_count(&self) -> usize {
        self.image_size.iter().product()
    }

    /// Raster offset, i fastest.
    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.image_size[0] * (j + self.image_size[1] * k)
    }

    #[inline]
    pub fn contains_index(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] < self.image_size[a])
    }

    /// World position of the centre of voxel `idx`.
    pub fn voxel_to_world(&self, idx: [usize; 3]) -> Result<Point3> {
        if !self.contains_index(idx) {
            return Err(Error::IndexOutOfBounds {
                index: idx,
                size: self.image_size,
            });
        }
        Ok(self.center_unchecked(idx))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, idx: [usize; 3]) -> Point3 {
        Point3::new(
            self.origin[0] + (idx[0] as f64 + 0.5) * self.pixel_extent[0],
            self.origin[1] + (idx[1] as f64 + 0.5) * self.pixel_extent[1],
            self.origin[2] + (idx[2] as f64 + 0.5) * self.pixel_extent[2],
        )
    }

    /// Continuous voxel coordinate of a world point; integers are centres.
    #[inline]
    pub fn world_to_continuous(&self, p: &Point3) -> [f64; 3] {
        [
            (p.x - self.origin[0]) / self.pixel_extent[0] - 0.5,
            (p.y - self.origin[1]) / self.pixel_extent[1] - 0.5,
            (p.z - self.origin[2]) / self.pixel_extent[2] - 0.5,
        ]
    }
}

/// Builds the reference from size, voxel extent and first-voxel corner.
pub fn build_spatial_reference(size: [usize; 3], voxel: [f64; 3], origin: [f64; 3]) -> Result<SpatialReference> {
    if size.contains(&0) {
        return Err(Error::InvalidParameter(format!("image size must be positive, got {size:?}")));
    }
    if voxel.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("voxel extent must be positive, got {voxel:?}")));
    }
    if origin.iter().any(|o| !o.is_finite()) {
        return Err(Error::InvalidParameter(format!("origin must be finite, got {origin:?}")));
    }
    let image_extent = [
        size[0] as f64 * voxel[0],
        size[1] as f64 * voxel[1],
        size[2] as f64 * voxel[2],
    ];
    let world_limits = [
        [origin[0], origin[0] + image_extent[0]],
        [origin[1], origin[1] + image_extent[1]],
        [origin[2], origin[2] + image_extent[2]],
    ];
    Ok(SpatialReference {
        image_size: size,
        pixel_extent: voxel,
        origin,
        world_limits,
        image_extent,
    })
}

pub fn voxel_to_world(r: &SpatialReference, idx: [usize; 3]) -> Result<Point3> {
    r.voxel_to_world(idx)
}

/// Scalar grid, i fastest, stored as 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub data: Vec<f32>,
    pub reference: SpatialReference,
}

impl Volume {
    pub fn new(data: Vec<f32>, reference: SpatialReference) -> Result<Self> {
        if data.len() != reference.voxel_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {:?} grid",
                data.len(),
                reference.image_size
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("sample {i} is not finite")));
        }
        Ok(Self { data, reference })
    }

    pub fn filled(reference: SpatialReference, value: f32) -> Self {
        Self {
            data: vec![value; reference.voxel_count()],
            reference,
        }
    }

    /// Fills every voxel from a function of its world centre.
    pub fn from_fn(reference: SpatialReference, f: impl Fn(&Point3) -> f32 + Sync) -> Self {
        let [nx, ny, _] = reference.image_size;
        let data = (0..reference.voxel_count())
            .into_par_iter()
            .map(|idx| {
                let i = idx % nx;
                let j = (idx / nx) % ny;
                let k = idx / (nx * ny);
                f(&reference.center_unchecked([i, j, k]))
            })
            .collect();
        Self { data, reference }
    }

    pub fn size(&self) -> [usize; 3] {
        self.reference.image_size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.reference.linear_index(i, j, k)]
    }
}

/// Fractional parts closer than this to an integer are snapped, so that
/// resampling on a coincident grid reproduces samples exactly.
const SNAP: f64 = 1e-9;

fn axis_cell(u: f64, n: usize) -> Option<(usize, f64)> {
    let last = (n - 1) as f64;
    let r = u.round();
    let u = if (u - r).abs() <= SNAP { r } else { u };
    if !(u >= 0.0 && u <= last) {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let i0 = (u.floor() as usize).min(n - 2);
    Some((i0, u - i0 as f64))
}

/// Trilinear interpolation between voxel centres; `None` outside their hull.
pub fn sample_trilinear(vol: &Volume, p: &Point3) -> Option<f64> {
    let r = &vol.reference;
    let u = r.world_to_continuous(p);
    let (i0, fx) = axis_cell(u[0], r.image_size[0])?;
    let (j0, fy) = axis_cell(u[1], r.image_size[1])?;
    let (k0, fz) = axis_cell(u[2], r.image_size[2])?;
    let [nx, ny, nz] = r.image_size;
    let (i1, j1, k1) = ((i0 + 1).min(nx - 1), (j0 + 1).min(ny - 1), (k0 + 1).min(nz - 1));
    let g = |i, j, k| vol.get(i, j, k) as f64;
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
    let c00 = lerp(g(i0, j0, k0), g(i1, j0, k0), fx);
    let c10 = lerp(g(i0, j1, k0), g(i1, j1, k0), fx);
    let c01 = lerp(g(i0, j0, k1), g(i1, j0, k1), fx);
    let c11 = lerp(g(i0, j1, k1), g(i1, j1, k1), fx);
    let c0 = lerp(c00, c10, fy);
    let c1 = lerp(c01, c11, fy);
    Some(lerp(c0, c1, fz))
}

/// Resamples `moving` into `out_ref`. `t` maps moving-world to fixed-world;
/// each output centre `x` takes `sample(moving, t⁻¹(x))`, or `fill` outside.
pub fn warp_volume(moving: &Volume, t: &AffineTransform3, out_ref: &SpatialReference, fill: f32) -> Result<Volume> {
    let inv = t.inverse()?;
    let out = Volume::from_fn(*out_ref, |x| {
        let p = inv.apply_point(x);
        sample_trilinear(moving, &p).map(|v| v as f32).unwrap_or(fill)
    });
    Ok(out)
}
