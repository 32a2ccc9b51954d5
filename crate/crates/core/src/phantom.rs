//! Synthetic ground truth: truncated-ellipsoid LV shells with groove
//! landmarks, piecewise-constant heart volumes and seeded perturbations.
//!
//! The shell's long axis is z with the apex at `z = −c`; the base is cut at
//! `z = −c + 2c·truncation_fraction`. Every generator owns its RNG, seeded
//! from the parameters, with separate streams for separate purposes.

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coarse::LandmarkSet;
use crate::error::{Error, Result};
use crate::geometry::{AffineTransform3, Point3, PointCloud};
use crate::volume::{SpatialReference, Volume};

#[derive(Debug, Clone, PartialEq)]
pub struct ShellParams {
    /// (a, b, c) in mm; c is the long axis.
    pub semi_axes: [f64; 3],
    /// Fraction of the long axis kept, measured from the apex.
    pub truncation_fraction: f64,
    pub point_count: usize,
    /// Landmarks per groove.
    pub landmarks_per_group: usize,
    pub rng_seed: u64,
}

impl Default for ShellParams {
    fn default() -> Self {
        Self {
            semi_axes: [30.0, 24.0, 50.0],
            truncation_fraction: 0.7,
            point_count: 2000,
            landmarks_per_group: 10,
            rng_seed: 0,
        }
    }
}

impl ShellParams {
    pub fn validate(&self) -> Result<()> {
        if self.semi_axes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("semi-axes must be positive, got {:?}", self.semi_axes)));
        }
        if !(self.truncation_fraction > 0.0 && self.truncation_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation fraction must lie in (0, 1], got {}",
                self.truncation_fraction
            )));
        }
        if self.point_count < 10 {
            return Err(Error::InvalidParameter(format!("need at least 10 points, got {}", self.point_count)));
        }
        if self.landmarks_per_group < 1 {
            return Err(Error::InvalidParameter("need at least one landmark per group".into()));
        }
        Ok(())
    }

    fn z_base(&self) -> f64 {
        let c = self.semi_axes[2];
        -c + 2.0 * c * self.truncation_fraction
    }
}

fn gaussian3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    Vector3::new(g(), g(), g())
}

/// Seeded, area-uniform sample of the truncated ellipsoid plus two opposing
/// meridian grooves (anterior at azimuth 0, posterior at π), each ordered
/// from base toward apex and stopping short of the apex.
pub fn generate_lv_shell(p: &ShellParams) -> Result<(PointCloud, LandmarkSet)> {
    p.validate()?;
    let [a, b, c] = p.semi_axes;
    let z_max = p.z_base();
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    rng.set_stream(1);
    // area element of the sphere-to-ellipsoid map, relative to its maximum
    let g_max = (b * c).max(a * c).max(a * b);
    let mut points = Vec::with_capacity(p.point_count);
    while points.len() < p.point_count {
        let u = gaussian3(&mut rng);
        let n = u.norm();
        if n < 1e-12 {
            continue;
        }
        let u = u / n;
        let g = Vector3::new(b * c * u.x, a * c * u.y, a * b * u.z).norm();
        let accept: f64 = rng.random();
        if accept * g_max > g {
            continue;
        }
        let q = Point3::new(a * u.x, b * u.y, c * u.z);
        if q.z <= z_max {
            points.push(q);
        }
    }

    let m = p.landmarks_per_group;
    let meridian = |sign: f64| -> Vec<Point3> {
        (0..m)
            .map(|k| {
                let z = z_max + (k as f64 / m as f64) * (-c - z_max);
                let r = (1.0 - (z / c) * (z / c)).max(0.0).sqrt();
                Point3::new(sign * a * r, 0.0, z)
            })
            .collect()
    };
    Ok((PointCloud::from_points(points), LandmarkSet::new(meridian(1.0), meridian(-1.0))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    /// Ground-truth transform applied to the cloud and landmarks.
    pub transform: AffineTransform3,
    /// Per-axis Gaussian noise, mm.
    pub noise_sigma: f64,
    /// Share of cloud points replaced by uniform outliers.
    pub outlier_fraction: f64,
    pub rng_seed: u64,
}

impl PerturbSpec {
    pub fn exact(transform: AffineTransform3) -> Self {
        Self {
            transform,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("noise sigma must be non-negative, got {}", self.noise_sigma)));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidParameter(format!(
                "outlier fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        Ok(())
    }
}

/// Transforms, adds noise to points and landmarks, then swaps a share of
/// the cloud for uniform samples in the transformed bounding box grown by
/// 20%. Landmarks are never replaced; values ride along unchanged.
pub fn perturb_cloud(cloud: &PointCloud, landmarks: &LandmarkSet, spec: &PerturbSpec) -> Result<(PointCloud, LandmarkSet)> {
    spec.validate()?;
    let t = &spec.transform;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    noise_rng.set_stream(2);
    let sigma = spec.noise_sigma;
    let mut jitter = |p: Point3| -> Point3 {
        if sigma == 0.0 {
            return p;
        }
        p + gaussian3(&mut noise_rng) * sigma
    };

    let moved: Vec<Point3> = cloud.points.iter().map(|p| t.apply_point(p)).collect();
    let mut points: Vec<Point3> = moved.iter().map(|&p| jitter(p)).collect();
    let out_landmarks = LandmarkSet::new(
        landmarks.anterior.iter().map(|p| jitter(t.apply_point(p))).collect(),
        landmarks.posterior.iter().map(|p| jitter(t.apply_point(p))).collect(),
    );

    let n_out = (spec.outlier_fraction * points.len() as f64).round() as usize;
    if n_out > 0 {
        let mut lo = moved[0].coords;
        let mut hi = moved[0].coords;
        for p in &moved {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        let centre = (lo + hi) * 0.5;
        let half = (hi - lo) * 0.6;
        let mut out_rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        out_rng.set_stream(3);
        let mut chosen = sample(&mut out_rng, points.len(), n_out).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            let mut q = centre;
            for axis in 0..3 {
                if half[axis] > 0.0 {
                    q[axis] += out_rng.random_range(-half[axis]..=half[axis]);
                }
            }
            points[i] = Point3::from(q);
        }
    }
    let values = cloud.values.clone();
    Ok((PointCloud { points, values }, out_landmarks))
}

/// Solid ellipsoid with a constant interior intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellDescriptor {
    pub center: Point3,
    pub semi_axes: [f64; 3],
    pub intensity: f32,
}

impl ShellDescriptor {
    pub fn contains(&self, p: &Point3) -> bool {
        let d = p - self.center;
        let [a, b, c] = self.semi_axes;
        (d.x / a).powi(2) + (d.y / b).powi(2) + (d.z / c).powi(2) <= 1.0
    }

    fn volume(&self) -> f64 {
        self.semi_axes.iter().product()
    }
}

/// Each voxel takes the intensity of the smallest ellipsoid containing its
/// centre (earliest listed on ties), or 0.
pub fn generate_phantom_volume(reference: &SpatialReference, shells: &[ShellDescriptor]) -> Result<Volume> {
    for (i, s) in shells.iter().enumerate() {
        if s.semi_axes.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("shell {i} has non-positive semi-axes")));
        }
        if !s.intensity.is_finite() || !s.center.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter(format!("shell {i} is not finite")));
        }
    }
    let mut order: Vec<usize> = (0..shells.len()).collect();
    order.sort_by(|&x, &y| shells[x].volume().total_cmp(&shells[y].volume()));
    Ok(Volume::from_fn(*reference, |p| {
        order
            .iter()
            .find(|&&i| shells[i].contains(p))
            .map(|&i| shells[i].intensity)
            .unwrap_or(0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::mean_distance_error;
    use crate::geometry::{apply_transform, rotation_about};
    use crate::segmentation::region_grow;
    use crate::volume::build_spatial_reference;

    #[test]
    fn shell_is_deterministic() {
        let p = ShellParams { point_count: 300, rng_seed: 9, ..Default::default() };
        assert_eq!(generate_lv_shell(&p).unwrap(), generate_lv_shell(&p).unwrap());
        let q = ShellParams { rng_seed: 10, ..p.clone() };
        assert_ne!(generate_lv_shell(&p).unwrap().0, generate_lv_shell(&q).unwrap().0);
    }

    #[test]
    fn untruncated_points_lie_on_ellipsoid() {
        let p = ShellParams { truncation_fraction: 1.0, point_count: 1000, ..Default::default() };
        let (cloud, _) = generate_lv_shell(&p).unwrap();
        let [a, b, c] = p.semi_axes;
        for q in &cloud.points {
            let f = (q.x / a).powi(2) + (q.y / b).powi(2) + (q.z / c).powi(2);
            assert!((f - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_cuts_the_base() {
        let p = ShellParams::default();
        let (cloud, lm) = generate_lv_shell(&p).unwrap();
        assert_eq!(cloud.len(), 2000);
        assert!(cloud.points.iter().all(|q| q.z <= p.z_base()));
        assert_eq!(lm.anterior.len(), 10);
        assert_eq!(lm.posterior.len(), 10);
    }

    #[test]
    fn grooves_run_base_to_apex() {
        let (_, lm) = generate_lv_shell(&ShellParams::default()).unwrap();
        for g in [&lm.anterior, &lm.posterior] {
            assert!(g.windows(2).all(|w| w[1].z < w[0].z));
        }
        assert!(lm.anterior.iter().all(|p| p.x > 0.0));
        assert!(lm.posterior.iter().all(|p| p.x < 0.0));
    }

    #[test]
    fn sampling_is_roughly_area_uniform() {
        // a sphere makes equal-width z bands equal in area
        let p = ShellParams {
            semi_axes: [20.0; 3],
            truncation_fraction: 1.0,
            point_count: 20000,
            ..Default::default()
        };
        let (cloud, _) = generate_lv_shell(&p).unwrap();
        let mut bins = [0usize; 4];
        for q in &cloud.points {
            bins[(((q.z + 20.0) / 10.0) as usize).min(3)] += 1;
        }
        for b in bins {
            assert!((b as f64 - 5000.0).abs() < 300.0, "{bins:?}");
        }
    }

    #[test]
    fn invalid_shell_params() {
        for p in [
            ShellParams { semi_axes: [0.0, 1.0, 1.0], ..Default::default() },
            ShellParams { truncation_fraction: 0.0, ..Default::default() },
            ShellParams { point_count: 9, ..Default::default() },
        ] {
            assert!(matches!(generate_lv_shell(&p), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn identity_perturbation_is_a_no_op() {
        let (c, lm) = generate_lv_shell(&ShellParams { point_count: 100, ..Default::default() }).unwrap();
        let (c2, lm2) = perturb_cloud(&c, &lm, &PerturbSpec::exact(AffineTransform3::identity())).unwrap();
        assert_eq!(c, c2);
        assert_eq!(lm, lm2);
    }

    #[test]
    fn exact_rigid_perturbation_has_zero_mde() {
        let (c, lm) = generate_lv_shell(&ShellParams { point_count: 300, ..Default::default() }).unwrap();
        let t = AffineTransform3::similarity(1.0, rotation_about(&Vector3::x(), 0.4), Vector3::new(1.0, 2.0, 3.0));
        let (c2, _) = perturb_cloud(&c, &lm, &PerturbSpec::exact(t)).unwrap();
        assert_eq!(mean_distance_error(&c2, &apply_transform(&c, &t).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn noise_has_requested_spread() {
        let (c, lm) = generate_lv_shell(&ShellParams { point_count: 10000, ..Default::default() }).unwrap();
        let spec = PerturbSpec { noise_sigma: 1.0, rng_seed: 3, ..PerturbSpec::exact(AffineTransform3::identity()) };
        let (c2, _) = perturb_cloud(&c, &lm, &spec).unwrap();
        for axis in 0..3 {
            let d: Vec<f64> = c.points.iter().zip(&c2.points).map(|(a, b)| b[axis] - a[axis]).collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
            assert!((var.sqrt() - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn outliers_replace_cloud_points_only() {
        let (c, lm) = generate_lv_shell(&ShellParams { point_count: 1000, ..Default::default() }).unwrap();
        let spec = PerturbSpec { outlier_fraction: 0.1, rng_seed: 4, ..PerturbSpec::exact(AffineTransform3::identity()) };
        let (c2, lm2) = perturb_cloud(&c, &lm, &spec).unwrap();
        let changed = c.points.iter().zip(&c2.points).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 100);
        assert_eq!(lm, lm2);
        let [a, b, cc] = [30.0 * 1.2, 24.0 * 1.2, 60.0];
        assert!(c2.points.iter().all(|p| p.x.abs() <= a + 1e-9 && p.y.abs() <= b + 1e-9 && p.z.abs() <= cc));
    }

    #[test]
    fn phantom_volume_examples() {
        let r = build_spatial_reference([20, 20, 20], [1.0; 3], [-10.0; 3]).unwrap();
        let empty = generate_phantom_volume(&r, &[]).unwrap();
        assert!(empty.data.iter().all(|&v| v == 0.0));

        let outer = ShellDescriptor { center: Point3::origin(), semi_axes: [8.0, 7.0, 9.0], intensity: 300.0 };
        let inner = ShellDescriptor { center: Point3::new(0.5, 0.0, 0.0), semi_axes: [4.0, 3.5, 5.0], intensity: 1000.0 };

        let single = generate_phantom_volume(&r, &[inner]).unwrap();
        let m = region_grow(&single, &[[10, 10, 10]], 400.0).unwrap();
        let nested = generate_phantom_volume(&r, &[outer, inner]).unwrap();
        let m2 = region_grow(&nested, &[[10, 10, 10]], 400.0).unwrap();
        for k in 0..20 {
            for j in 0..20 {
                for i in 0..20 {
                    let centre = r.voxel_to_world([i, j, k]).unwrap();
                    assert_eq!(m.get(i, j, k), inner.contains(&centre));
                    assert_eq!(m2.get(i, j, k), inner.contains(&centre));
                    let expect = if inner.contains(&centre) {
                        1000.0
                    } else if outer.contains(&centre) {
                        300.0
                    } else {
                        0.0
                    };
                    assert_eq!(nested.get(i, j, k), expect);
                }
            }
        }
        let bad = ShellDescriptor { semi_axes: [0.0, 1.0, 1.0], ..inner };
        assert!(generate_phantom_volume(&r, &[bad]).is_err());
    }
}
