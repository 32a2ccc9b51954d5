use nalgebra::{Matrix3, Matrix4, Vector3};

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Family a transform was estimated in. Ordered from most to least
/// constrained, which `compose` relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformKind {
    Rigid,
    Similarity,
    AnisotropicSimilarity,
    Affine,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Rigid => "rigid",
            TransformKind::Similarity => "similarity",
            TransformKind::AnisotropicSimilarity => "anisotropic-similarity",
            TransformKind::Affine => "affine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rigid" => Some(TransformKind::Rigid),
            "similarity" => Some(TransformKind::Similarity),
            "anisotropic-similarity" => Some(TransformKind::AnisotropicSimilarity),
            "affine" => Some(TransformKind::Affine),
            _ => None,
        }
    }

    fn composed(outer: Self, inner: Self) -> Self {
        use TransformKind::*;
        match (outer, inner) {
            (a, b) if a <= Similarity && b <= Similarity => a.max(b),
            // diag(s)·R · c·Q = c·diag(s)·(R·Q)
            (AnisotropicSimilarity, b) if b <= Similarity => AnisotropicSimilarity,
            _ => Affine,
        }
    }
}

/// `p' = linear · p + translation`, column-vector convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform3 {
    pub linear: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub kind: TransformKind,
}

impl Default for AffineTransform3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform3 {
    pub fn new(linear: Matrix3<f64>, translation: Vector3<f64>, kind: TransformKind) -> Self {
        Self {
            linear,
            translation,
            kind,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros(), TransformKind::Rigid)
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t, TransformKind::Rigid)
    }

    pub fn uniform_scale(s: f64) -> Self {
        Self::new(Matrix3::identity() * s, Vector3::zeros(), TransformKind::Similarity)
    }

    /// `s · R · p + t`.
    pub fn similarity(scale: f64, rotation: Matrix3<f64>, t: Vector3<f64>) -> Self {
        let kind = if scale == 1.0 {
            TransformKind::Rigid
        } else {
            TransformKind::Similarity
        };
        Self::new(rotation * scale, t, kind)
    }

    /// `diag(s) · R · p + t`.
    pub fn anisotropic(scales: Vector3<f64>, rotation: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self::new(
            Matrix3::from_diagonal(&scales) * rotation,
            t,
            TransformKind::AnisotropicSimilarity,
        )
    }

    pub fn affine(linear: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self::new(linear, t, TransformKind::Affine)
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.linear * p.coords + self.translation)
    }

    pub fn determinant(&self) -> f64 {
        self.linear.determinant()
    }

    /// `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(outer: &Self, inner: &Self) -> Self {
        Self::new(
            outer.linear * inner.linear,
            outer.linear * inner.translation + outer.translation,
            TransformKind::composed(outer.kind, inner.kind),
        )
    }

    pub fn then(&self, outer: &Self) -> Self {
        Self::compose(outer, self)
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        let scale = self.linear.abs().max().max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= 1e-14 * scale * scale * scale {
            return Err(Error::SingularTransform { det });
        }
        let inv = match self.kind {
            // Orthogonal up to scale: avoid the general inverse's rounding.
            TransformKind::Rigid => self.linear.transpose(),
            TransformKind::Similarity => {
                let s2 = self.linear.column(0).norm_squared();
                self.linear.transpose() / s2
            }
            _ => self
                .linear
                .try_inverse()
                .ok_or(Error::SingularTransform { det })?,
        };
        let kind = match self.kind {
            TransformKind::AnisotropicSimilarity => TransformKind::Affine,
            k => k,
        };
        Ok(Self::new(inv, -(inv * self.translation), kind))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.linear);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Fails with `InvalidData` unless the last row is exactly `(0, 0, 0, 1)`.
    pub fn from_homogeneous(m: &Matrix4<f64>, kind: TransformKind) -> Result<Self> {
        let last = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if last != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidData(format!(
                "homogeneous last row must be (0, 0, 0, 1), found {last:?}"
            )));
        }
        Ok(Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            kind,
        ))
    }

    /// Largest absolute difference over the 12 free matrix entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = (self.linear - other.linear).abs().max();
        let b = (self.translation - other.translation).abs().max();
        a.max(b)
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.translation.iter()).all(|v| v.is_finite())
    }
}

pub fn apply_transform(cloud: &PointCloud, t: &AffineTransform3) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("apply_transform: cloud has no points"));
    }
    Ok(PointCloud {
        points: cloud.points.iter().map(|p| t.apply_point(p)).collect(),
        values: cloud.values.clone(),
    })
}

pub fn compose(outer: &AffineTransform3, inner: &AffineTransform3) -> AffineTransform3 {
    AffineTransform3::compose(outer, inner)
}

pub fn invert(t: &AffineTransform3) -> Result<AffineTransform3> {
    t.inverse()
}

/// Rotation by `angle` radians about a unit `axis` (Rodrigues).
pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_points(pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let c = cloud(&[[1.0, -2.0, 3.5], [0.0, 0.0, 0.0]]).with_values(vec![4.0, 5.0]).unwrap();
        let out = apply_transform(&c, &AffineTransform3::identity()).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn pure_scaling() {
        let t = AffineTransform3::uniform_scale(2.0);
        let out = apply_transform(&cloud(&[[1.0, 1.0, 1.0]]), &t).unwrap();
        assert_eq!(out.points[0], Point3::new(2.0, 2.0, 2.0));
    }

    #[test]
    fn rotation_then_translation() {
        let rz = rotation_about(&Vector3::z(), FRAC_PI_2);
        let t = AffineTransform3::similarity(1.0, rz, Vector3::new(1.0, 0.0, 0.0));
        let p = t.apply_point(&Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p, Point3::new(1.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let err = apply_transform(&PointCloud::default(), &AffineTransform3::identity());
        assert!(matches!(err, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn compose_examples() {
        let t = AffineTransform3::affine(
            Matrix3::new(1.0, 0.2, 0.0, 0.0, 1.5, 0.1, 0.3, 0.0, 0.8),
            Vector3::new(1.0, 2.0, 3.0),
        );
        assert_eq!(compose(&AffineTransform3::identity(), &t).linear, t.linear);
        let round = compose(&t, &invert(&t).unwrap());
        assert!(round.max_abs_diff(&AffineTransform3::identity()) < 1e-10);

        let s = compose(
            &AffineTransform3::uniform_scale(2.0),
            &AffineTransform3::translation(Vector3::new(1.0, 0.0, 0.0)),
        );
        assert_eq!(s.apply_point(&Point3::origin()), Point3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(
            invert(&AffineTransform3::identity()).unwrap(),
            AffineTransform3::identity()
        );
        let inv = invert(&AffineTransform3::uniform_scale(4.0)).unwrap();
        assert_abs_diff_eq!(inv.linear, Matrix3::identity() * 0.25, epsilon = 1e-15);

        let singular = AffineTransform3::affine(
            Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0),
            Vector3::zeros(),
        );
        assert!(matches!(invert(&singular), Err(Error::SingularTransform { .. })));
    }

    #[test]
    fn homogeneous_round_trip_and_last_row_check() {
        let t = AffineTransform3::similarity(
            1.3,
            rotation_about(&Vector3::new(1.0, 2.0, 3.0), 0.4),
            Vector3::new(-5.0, 2.0, 9.0),
        );
        let h = t.to_homogeneous();
        assert_eq!(AffineTransform3::from_homogeneous(&h, t.kind).unwrap(), t);
        let mut bad = h;
        bad[(3, 1)] = 1e-9;
        assert!(matches!(
            AffineTransform3::from_homogeneous(&bad, t.kind),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn kind_of_composition() {
        use TransformKind::*;
        assert_eq!(TransformKind::composed(Rigid, Similarity), Similarity);
        assert_eq!(TransformKind::composed(AnisotropicSimilarity, Similarity), AnisotropicSimilarity);
        assert_eq!(TransformKind::composed(Similarity, AnisotropicSimilarity), Affine);
    }
}
