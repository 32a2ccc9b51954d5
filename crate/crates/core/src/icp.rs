//! Fine registration by iterative closest point.
//!
//! Both variants keep the coarse initialisation fixed and estimate a second
//! transform `F` acting on the initialised moving cloud `b = init(moving)`:
//!
//! * ICP: `F(b) = R·b + t`, minimising `Σ‖q_i − R·b_i − t‖²`.
//! * SICP: `F(b) = diag(s)·R·b + t`, minimising
//!   `Σ‖diag(s)·R·b_i + t − q_i‖²` with per-axis (or tied) scales.
//!
//! `q_i` is the nearest fixed point to `F(b_i)` under the current estimate.
//! The objective recorded per iteration is the sum of squared
//! correspondence distances, which neither the correspondence step nor any
//! of the update sub-steps can increase.

use nalgebra::{Matrix3, Vector3};

use crate::coarse::estimate_umeyama;
use crate::error::{Error, Result};
use crate::fusion::mean_distance_error;
use crate::geometry::{apply_transform, centroid, AffineTransform3, KdTree, Point3, PointCloud, TransformKind};
use crate::registration::{ConvergenceDetail, RegistrationResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop when the objective decreases by less than this fraction.
    pub rel_tolerance: f64,
    /// Stop when the objective (mm²) falls below this floor.
    pub abs_tolerance: f64,
    /// Per-axis scale bounds (SICP only).
    pub scale_bounds: (f64, f64),
    /// Tie the three SICP scales to a single isotropic factor.
    pub isotropic_scale: bool,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-8,
            abs_tolerance: 1e-12,
            scale_bounds: (0.2, 5.0),
            isotropic_scale: false,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.rel_tolerance > 0.0 && self.abs_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        let (lo, hi) = self.scale_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale bounds must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// Rigid `(R, t)` minimising `Σ‖dst_i − (R·src_i + t)‖²`.
pub fn solve_rigid_svd(src: &[Point3], dst: &[Point3]) -> Result<AffineTransform3> {
    estimate_umeyama(src, dst, false)
}

pub fn icp(moving: &PointCloud, fixed: &PointCloud, init: &AffineTransform3, params: &IcpParams) -> Result<RegistrationResult> {
    run(moving, fixed, init, params, ScaleModel::None)
}

/// Anisotropic-scale ICP. Each outer iteration performs one sweep of
/// rigid update, scale update and translation update.
pub fn sicp(moving: &PointCloud, fixed: &PointCloud, init: &AffineTransform3, params: &IcpParams) -> Result<RegistrationResult> {
    let model = if params.isotropic_scale {
        ScaleModel::Isotropic
    } else {
        ScaleModel::PerAxis
    };
    run(moving, fixed, init, params, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScaleModel {
    None,
    PerAxis,
    Isotropic,
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    rotation: Matrix3<f64>,
    scales: Vector3<f64>,
    translation: Vector3<f64>,
}

impl Estimate {
    fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            scales: Vector3::new(1.0, 1.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    fn linear(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.scales) * self.rotation
    }

    fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.linear() * p.coords + self.translation)
    }

    fn objective(&self, src: &[Point3], dst: &[Point3]) -> f64 {
        let a = self.linear();
        src.iter()
            .zip(dst)
            .map(|(b, q)| (a * b.coords + self.translation - q.coords).norm_squared())
            .sum()
    }
}

fn run(
    moving: &PointCloud,
    fixed: &PointCloud,
    init: &AffineTransform3,
    params: &IcpParams,
    model: ScaleModel,
) -> Result<RegistrationResult> {
    params.validate()?;
    if moving.is_empty() || fixed.is_empty() {
        return Err(Error::EmptyInput("registration needs non-empty clouds"));
    }
    if moving.len() < 3 || fixed.len() < 3 {
        return Err(Error::DegenerateConfiguration("registration needs at least 3 points per cloud".into()));
    }
    let base = apply_transform(moving, init)?.points;
    let tree = KdTree::build(&fixed.points);

    let mut est = Estimate::identity();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut clamped = false;
    let mut current: Vec<Point3> = base.clone();
    let mut targets: Vec<Point3> = Vec::with_capacity(base.len());

    for k in 0..params.max_iterations {
        let pairs = crate::geometry::pair_with_tree(&current, &tree);
        targets.clear();
        targets.extend(pairs.iter().map(|p| fixed.points[p.dst_index]));
        let f: f64 = pairs.iter().map(|p| p.distance * p.distance).sum();
        trace.push(f);

        if f < params.abs_tolerance {
            converged = true;
            break;
        }
        if k > 0 {
            let prev = trace[k - 1];
            if prev - f <= params.rel_tolerance * prev {
                converged = true;
                break;
            }
        }
        if k + 1 == params.max_iterations {
            break;
        }

        match model {
            ScaleModel::None => {
                let rigid = solve_rigid_svd(&base, &targets)?;
                est.rotation = rigid.linear;
                est.translation = rigid.translation;
            }
            ScaleModel::PerAxis | ScaleModel::Isotropic => {
                clamped = scaled_sweep(&mut est, &base, &targets, params.scale_bounds, model)?;
            }
        }
        current.clear();
        current.extend(base.iter().map(|b| est.apply(b)));
    }

    let kind = match model {
        ScaleModel::None => TransformKind::Rigid,
        _ => TransformKind::AnisotropicSimilarity,
    };
    let fine = AffineTransform3::new(est.linear(), est.translation, kind);
    let transform = AffineTransform3::compose(&fine, init);
    let registered = PointCloud::from_points(current);
    let mde = mean_distance_error(&registered, fixed)?;

    let (lo, hi) = params.scale_bounds;
    let detail = if model != ScaleModel::None && clamped && lo < hi {
        converged = false;
        Some(ConvergenceDetail::ScaleAtBound)
    } else if !converged {
        Some(ConvergenceDetail::MaxIterations)
    } else {
        None
    };
    Ok(RegistrationResult {
        transform,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        detail,
        mde,
        sigma2: None,
    })
}

/// One rigid → scale → translation sweep on fixed correspondences. Returns
/// whether a scale had to be clamped.
fn scaled_sweep(
    est: &mut Estimate,
    src: &[Point3],
    dst: &[Point3],
    bounds: (f64, f64),
    model: ScaleModel,
) -> Result<bool> {
    // (i) rigid step against scale-compensated targets; kept only if it does
    // not increase the objective
    let before = est.objective(src, dst);
    let compensated: Vec<Point3> = dst
        .iter()
        .map(|q| Point3::from(q.coords.component_div(&est.scales)))
        .collect();
    let rigid = solve_rigid_svd(src, &compensated)?;
    let candidate = Estimate {
        rotation: rigid.linear,
        scales: est.scales,
        translation: rigid.translation.component_mul(&est.scales),
    };
    if candidate.objective(src, dst) <= before * (1.0 + 1e-12) {
        *est = candidate;
    }

    // (ii) closed-form per-axis scales with the translation profiled out,
    // then (iii) the matching translation
    let rotated: Vec<Point3> = src.iter().map(|b| Point3::from(est.rotation * b.coords)).collect();
    let r_mean = centroid(&rotated).expect("non-empty").coords;
    let q_mean = centroid(dst).expect("non-empty").coords;
    let mut num = Vector3::zeros();
    let mut den = Vector3::zeros();
    for (r, q) in rotated.iter().zip(dst) {
        let rc = r.coords - r_mean;
        let qc = q.coords - q_mean;
        num += qc.component_mul(&rc);
        den += rc.component_mul(&rc);
    }
    let (lo, hi) = bounds;
    let mut clamped = false;
    let mut clamp = |v: f64| {
        let c = v.clamp(lo, hi);
        if c != v {
            clamped = true;
        }
        c
    };
    let raw = match model {
        ScaleModel::Isotropic => {
            let s = num.sum() / den.sum();
            Vector3::new(s, s, s)
        }
        _ => num.component_div(&den),
    };
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateConfiguration(
            "correspondences have no spread along an axis".into(),
        ));
    }
    est.scales = raw.map(&mut clamp);
    est.translation = q_mean - r_mean.component_mul(&est.scales);
    Ok(clamped)
}

/// Per-axis scales of an anisotropic-similarity linear part `diag(s)·R`.
pub fn anisotropic_scales(linear: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(linear.row(0).norm(), linear.row(1).norm(), linear.row(2).norm())
}
