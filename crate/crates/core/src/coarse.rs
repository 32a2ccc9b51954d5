//! Landmark-based coarse alignment of the interventricular groove points.
//!
//! Each modality provides two ordered groove polylines (anterior and
//! posterior). Both are stored base-to-apex in the same traversal direction,
//! so after resampling to equal counts the `k`-th point of one set
//! corresponds to the `k`-th point of the other. A least-squares similarity
//! (or rigid) transform is then fitted to the concatenated pairs.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{centroid, AffineTransform3, Point3, TransformKind};

/// Groove annotations in storage order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkSet {
    pub anterior: Vec<Point3>,
    pub posterior: Vec<Point3>,
}

impl LandmarkSet {
    pub fn new(anterior: Vec<Point3>, posterior: Vec<Point3>) -> Self {
        Self { anterior, posterior }
    }

    /// Anterior points followed by posterior points.
    pub fn concatenated(&self) -> Vec<Point3> {
        self.anterior.iter().chain(&self.posterior).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.anterior.len() + self.posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        Self {
            anterior: self.anterior.iter().map(&f).collect(),
            posterior: self.posterior.iter().map(&f).collect(),
        }
    }

    pub fn transformed(&self, t: &AffineTransform3) -> Self {
        self.map_points(|p| t.apply_point(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseParams {
    /// Fit `s·R` (true) or `R` only (false).
    pub with_scaling: bool,
    /// Points kept per group; `None` uses the smaller group size of the two
    /// sets, separately for anterior and posterior.
    pub target_count: Option<usize>,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self {
            with_scaling: true,
            target_count: None,
        }
    }
}

fn downsample_group(points: &[Point3], m: usize) -> Vec<Point3> {
    let n = points.len();
    if m >= n {
        return points.to_vec();
    }
    if m == 1 {
        return vec![points[0]];
    }
    (0..m)
        .map(|k| {
            let idx = ((k * (n - 1)) as f64 / (m - 1) as f64).round() as usize;
            points[idx]
        })
        .collect()
}

/// Keeps `min(m, n)` points per group at evenly spaced indices, in order.
pub fn downsample_landmarks(set: &LandmarkSet, m: usize) -> Result<LandmarkSet> {
    if set.anterior.is_empty() || set.posterior.is_empty() {
        return Err(Error::EmptyInput("landmark group has no points"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("landmark target count must be >= 1".into()));
    }
    Ok(LandmarkSet {
        anterior: downsample_group(&set.anterior, m),
        posterior: downsample_group(&set.posterior, m),
    })
}

/// Least-squares `dst ≈ s·R·src + t` (Umeyama). With `with_scaling = false`
/// the scale is pinned to 1 and the result is a proper rotation.
pub fn estimate_umeyama(src: &[Point3], dst: &[Point3], with_scaling: bool) -> Result<AffineTransform3> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} source vs {} destination points",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 point pairs, got {n}"
        )));
    }
    let mu_src = centroid(src).expect("non-empty").coords;
    let mu_dst = centroid(dst).expect("non-empty").coords;

    let mut sigma = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s.coords - mu_src;
        let dc = d.coords - mu_dst;
        sigma += dc * sc.transpose();
        var_src += sc.norm_squared();
    }
    let inv_n = 1.0 / n as f64;
    sigma *= inv_n;
    var_src *= inv_n;

    let (rotation, trace_ds) = rotation_from_cross_covariance(&sigma)?;
    let scale = if with_scaling {
        if var_src <= 0.0 {
            return Err(Error::DegenerateConfiguration("source points coincide".into()));
        }
        trace_ds / var_src
    } else {
        1.0
    };
    let t = mu_dst - rotation * mu_src * scale;
    let kind = if with_scaling {
        TransformKind::Similarity
    } else {
        TransformKind::Rigid
    };
    Ok(AffineTransform3::new(rotation * scale, t, kind))
}

/// `R = U·S·Vᵀ` for `Σ = U·D·Vᵀ`, with `S` flipping the weakest direction
/// when needed to avoid a reflection. Also returns `trace(D·S)`.
pub(crate) fn rotation_from_cross_covariance(sigma: &Matrix3<f64>) -> Result<(Matrix3<f64>, f64)> {
    let svd = sigma.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateConfiguration("SVD did not converge".into())),
    };
    let d = svd.singular_values;
    if !(d[0] > 0.0) || d[1] <= 1e-12 * d[0] {
        return Err(Error::DegenerateConfiguration(format!(
            "cross-covariance rank < 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            d[0], d[1], d[2]
        )));
    }
    // singular values are sorted descending
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        s[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * v_t;
    Ok((rotation, d.dot(&s)))
}

/// Index-paired Umeyama fit over anterior-then-posterior landmarks.
pub fn coarse_register(moving: &LandmarkSet, fixed: &LandmarkSet, params: &CoarseParams) -> Result<AffineTransform3> {
    for set in [moving, fixed] {
        if set.anterior.is_empty() || set.posterior.is_empty() {
            return Err(Error::EmptyInput("landmark group has no points"));
        }
    }
    let (m_ant, m_post) = match params.target_count {
        Some(0) => return Err(Error::InvalidParameter("landmark target count must be >= 1".into())),
        Some(m) => (m, m),
        None => (
            moving.anterior.len().min(fixed.anterior.len()),
            moving.posterior.len().min(fixed.posterior.len()),
        ),
    };
    let pick = |set: &LandmarkSet| {
        let mut pts = downsample_group(&set.anterior, m_ant);
        pts.extend(downsample_group(&set.posterior, m_post));
        pts
    };
    let src = pick(moving);
    let dst = pick(fixed);
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch(format!(
            "after resampling, moving has {} landmarks and fixed has {}",
            src.len(),
            dst.len()
        )));
    }
    estimate_umeyama(&src, &dst, params.with_scaling)
}
