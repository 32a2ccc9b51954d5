//! Perfusion-to-mesh mapping and evaluation metrics.

use crate::error::{Error, Result};
use crate::geometry::{nearest_neighbors, AffineTransform3, PointCloud};
use crate::segmentation::{Mask, TriMesh};
use crate::volume::{sample_trilinear, Volume};

/// Where the perfusion values come from.
#[derive(Debug, Clone, Copy)]
pub enum MpiSource<'a> {
    /// Registered SPECT points carrying values; nearest point wins.
    Cloud(&'a PointCloud),
    /// SPECT volume and the transform mapping SPECT world to CTA world.
    Volume {
        volume: &'a Volume,
        transform: &'a AffineTransform3,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct FusionInput<'a> {
    pub mesh: &'a TriMesh,
    pub mpi_source: MpiSource<'a>,
}

/// Returns the mesh with one perfusion value per vertex. Geometry and
/// connectivity are copied unchanged.
pub fn map_mpi_to_mesh(input: &FusionInput<'_>) -> Result<TriMesh> {
    let mesh = input.mesh;
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyInput("mesh"));
    }
    let values = match input.mpi_source {
        MpiSource::Cloud(cloud) => {
            let vals = cloud
                .values
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("source cloud carries no values".into()))?;
            cloud.validate()?;
            let verts = PointCloud::from_points(mesh.vertices.clone());
            nearest_neighbors(&verts, cloud)?
                .iter()
                .map(|p| vals[p.dst_index])
                .collect()
        }
        MpiSource::Volume { volume, transform } => {
            let inv = transform.inverse()?;
            mesh.vertices
                .iter()
                .map(|v| sample_trilinear(volume, &inv.apply_point(v)).unwrap_or(0.0))
                .collect()
        }
    };
    Ok(TriMesh {
        vertices: mesh.vertices.clone(),
        triangles: mesh.triangles.clone(),
        vertex_values: Some(values),
    })
}

/// Dice similarity coefficient `2|A∩B| / (|A| + |B|)`; 1 for two empty masks.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    if a.size() != b.size() {
        return Err(Error::ShapeMismatch(format!("mask sizes {:?} and {:?}", a.size(), b.size())));
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Mean distance from each point of the smaller cloud to its nearest point
/// in the larger one. `src` drives the pairing when sizes are equal.
pub fn mean_distance_error(src: &PointCloud, dst: &PointCloud) -> Result<f64> {
    if src.is_empty() {
        return Err(Error::EmptyInput("source cloud"));
    }
    if dst.is_empty() {
        return Err(Error::EmptyInput("target cloud"));
    }
    let (small, large) = if dst.len() < src.len() { (dst, src) } else { (src, dst) };
    let pairs = nearest_neighbors(small, large)?;
    Ok(pairs.iter().map(|p| p.distance).sum::<f64>() / pairs.len() as f64)
}
