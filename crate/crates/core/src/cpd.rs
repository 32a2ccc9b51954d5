//! Coherent Point Drift, rigid (`s·R·y + t`) and affine (`B·y + t`).
//!
//! The moving cloud supplies the `M` Gaussian centroids `y_m` (after the
//! initial transform), the fixed cloud the `N` data points `x_n`. All
//! centroids share one isotropic variance `σ²`, and a uniform component of
//! weight `w` absorbs outliers. Each EM iteration computes posterior
//! statistics for the current parameters (E-step) and then the closed-form
//! maximisers of the expected complete-data log-likelihood (M-step).
//!
//! Both clouds are centred and scaled to unit RMS radius before EM and the
//! estimate is mapped back to millimetres afterwards. The objective trace
//! is the negative log-likelihood in those normalized coordinates.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::coarse::rotation_from_cross_covariance;
use crate::error::{Error, Result};
use crate::fusion::mean_distance_error;
use crate::geometry::{apply_transform, AffineTransform3, Point3, PointCloud, TransformKind};
use crate::registration::{ConvergenceDetail, RegistrationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpdMode {
    Rigid,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpdParams {
    /// Uniform outlier weight, `0 <= w < 1`.
    pub outlier_weight: f64,
    pub max_iterations: usize,
    /// Relative change of the negative log-likelihood that ends the run.
    pub tolerance: f64,
    /// Lower bound on σ² (mm²).
    pub sigma2_floor: f64,
    pub mode: CpdMode,
}

impl Default for CpdParams {
    fn default() -> Self {
        Self {
            outlier_weight: 0.1,
            max_iterations: 150,
            tolerance: 1e-8,
            sigma2_floor: 1e-10,
            mode: CpdMode::Rigid,
        }
    }
}

impl CpdParams {
    pub fn rigid() -> Self {
        Self::default()
    }

    pub fn affine() -> Self {
        Self {
            mode: CpdMode::Affine,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_weight) {
            return Err(Error::InvalidParameter(format!(
                "outlier weight must lie in [0, 1), got {}",
                self.outlier_weight
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(self.sigma2_floor > 0.0) {
            return Err(Error::InvalidParameter("sigma2 floor must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics of the posterior matrix `P` (M×N).
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub sigma2: f64,
    /// `P·1`, one entry per source centroid.
    pub p1: Vec<f64>,
    /// `Pᵀ·1`, one entry per target point.
    pub pt1: Vec<f64>,
    /// `P·X`, one row per source centroid.
    pub px: Vec<Vector3<f64>>,
    /// `N_P = 1ᵀ·P·1`.
    pub np: f64,
    /// Negative log-likelihood of the mixture at the evaluated parameters.
    pub nll: f64,
}

/// E-step on already transformed source centroids.
pub fn cpd_estep(transformed_src: &PointCloud, dst: &PointCloud, sigma2: f64, w: f64) -> Result<GmmState> {
    if transformed_src.is_empty() || dst.is_empty() {
        return Err(Error::EmptyInput("cpd_estep needs non-empty clouds"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(0.0..1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!("outlier weight must lie in [0, 1), got {w}")));
    }
    Ok(estep(&transformed_src.points, &dst.points, sigma2, w))
}

const ESTEP_CHUNK: usize = 64;
const UNDERFLOW: f64 = -746.0;

struct Partial {
    p1: Vec<f64>,
    px: Vec<Vector3<f64>>,
    pt1: Vec<f64>,
    log_sum: f64,
}

fn estep(y: &[Point3], x: &[Point3], sigma2: f64, w: f64) -> GmmState {
    let m = y.len();
    let n = x.len();
    let two_s2 = 2.0 * sigma2;
    // log of the uniform-outlier constant c
    let log_c = if w > 0.0 {
        1.5 * (2.0 * std::f64::consts::PI * sigma2).ln() + (w / (1.0 - w)).ln() + (m as f64 / n as f64).ln()
    } else {
        f64::NEG_INFINITY
    };

    // Target points are processed in fixed-size chunks; each chunk folds its
    // columns of P into partial sums, and the partials are combined in chunk
    // order so the result does not depend on thread scheduling.
    let partials: Vec<Partial> = x
        .par_chunks(ESTEP_CHUNK)
        .map(|chunk| {
            let mut part = Partial {
                p1: vec![0.0; m],
                px: vec![Vector3::zeros(); m],
                pt1: Vec::with_capacity(chunk.len()),
                log_sum: 0.0,
            };
            let mut col = vec![0.0; m];
            for xn in chunk {
                let mut peak = log_c;
                for (c, ym) in col.iter_mut().zip(y) {
                    *c = -(xn - ym).norm_squared() / two_s2;
                    peak = peak.max(*c);
                }
                let mut total = if w > 0.0 { (log_c - peak).exp() } else { 0.0 };
                for c in col.iter_mut() {
                    let d = *c - peak;
                    // exp underflows to exactly zero below this
                    *c = if d < UNDERFLOW { 0.0 } else { d.exp() };
                    total += *c;
                }
                part.log_sum += peak + total.ln();
                let inv = 1.0 / total;
                let mut col_sum = 0.0;
                for (j, c) in col.iter().enumerate() {
                    let p = c * inv;
                    if p != 0.0 {
                        col_sum += p;
                        part.p1[j] += p;
                        part.px[j] += xn.coords * p;
                    }
                }
                part.pt1.push(col_sum);
            }
            part
        })
        .collect();

    let mut p1 = vec![0.0; m];
    let mut px = vec![Vector3::zeros(); m];
    let mut pt1 = Vec::with_capacity(n);
    let mut log_sum = 0.0;
    for part in partials {
        for j in 0..m {
            p1[j] += part.p1[j];
            px[j] += part.px[j];
        }
        pt1.extend(part.pt1);
        log_sum += part.log_sum;
    }
    let np = pt1.iter().sum();
    let log_mix = if w < 1.0 { ((1.0 - w) / m as f64).ln() } else { f64::NEG_INFINITY };
    let nll = -(n as f64) * (log_mix - 1.5 * (2.0 * std::f64::consts::PI * sigma2).ln()) - log_sum;
    GmmState {
        sigma2,
        p1,
        pt1,
        px,
        np,
        nll,
    }
}

pub fn cpd_rigid(moving: &PointCloud, fixed: &PointCloud, init: &AffineTransform3, params: &CpdParams) -> Result<RegistrationResult> {
    run(moving, fixed, init, &CpdParams { mode: CpdMode::Rigid, ..*params })
}

pub fn cpd_affine(moving: &PointCloud, fixed: &PointCloud, init: &AffineTransform3, params: &CpdParams) -> Result<RegistrationResult> {
    run(moving, fixed, init, &CpdParams { mode: CpdMode::Affine, ..*params })
}

/// Mode taken from `params.mode`.
pub fn cpd(moving: &PointCloud, fixed: &PointCloud, init: &AffineTransform3, params: &CpdParams) -> Result<RegistrationResult> {
    run(moving, fixed, init, params)
}

/// `(1 / (3·N·M))·Σ_{m,n} ‖x_n − y_m‖²`, expanded about the data mean.
fn initial_sigma2(y: &[Point3], x: &[Point3]) -> f64 {
    let c = crate::geometry::centroid(x).expect("non-empty").coords;
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in x {
        sx += (p.coords - c).norm_squared();
    }
    for p in y {
        sy += (p.coords - c).norm_squared();
    }
    // the cross term vanishes because Σ(x − c) = 0
    let (m, n) = (y.len() as f64, x.len() as f64);
    (m * sx + n * sy) / (3.0 * m * n)
}

/// Centroid and RMS radius used to bring a cloud to unit scale.
fn normalization(p: &[Point3]) -> Result<(Vector3<f64>, f64)> {
    let mu = crate::geometry::centroid(p).expect("non-empty").coords;
    let rms = (p.iter().map(|q| (q.coords - mu).norm_squared()).sum::<f64>() / p.len() as f64).sqrt();
    if !(rms > 0.0) || !rms.is_finite() {
        return Err(Error::DegenerateConfiguration("cloud has no spatial extent".into()));
    }
    Ok((mu, rms))
}

fn run(moving: &PointCloud, fixed: &PointCloud, init: &AffineTransform3, params: &CpdParams) -> Result<RegistrationResult> {
    params.validate()?;
    if moving.is_empty() || fixed.is_empty() {
        return Err(Error::EmptyInput("registration needs non-empty clouds"));
    }
    if moving.len() < 3 || fixed.len() < 3 {
        return Err(Error::DegenerateConfiguration("registration needs at least 3 points per cloud".into()));
    }
    let y_mm = apply_transform(moving, init)?.points;
    // EM runs on clouds centred and scaled to unit RMS radius, where the
    // uniform outlier density is commensurate with the Gaussian components
    let (mu_y, s_y) = normalization(&y_mm)?;
    let (mu_x, s_x) = normalization(&fixed.points)?;
    let y: Vec<Point3> = y_mm.iter().map(|p| Point3::from((p.coords - mu_y) / s_y)).collect();
    let x: Vec<Point3> = fixed.points.iter().map(|p| Point3::from((p.coords - mu_x) / s_x)).collect();
    let floor = params.sigma2_floor / (s_x * s_x);
    let w = params.outlier_weight;

    let mut linear = Matrix3::identity();
    let mut translation = Vector3::zeros();
    let mut sigma2 = initial_sigma2(&y, &x).max(floor);
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut ty = y.clone();

    for k in 0..params.max_iterations {
        let state = estep(&ty, &x, sigma2, w);
        trace.push(state.nll);
        if k > 0 {
            let prev = trace[k - 1];
            if (prev - state.nll).abs() <= params.tolerance * prev.abs() {
                converged = true;
                break;
            }
        }
        if k + 1 == params.max_iterations {
            break;
        }
        if !(state.np >= 1e-12) {
            return Err(Error::NumericalCollapse(format!(
                "posterior mass {:.3e} left for the point-to-point component",
                state.np
            )));
        }
        let (b, t, s2) = match params.mode {
            CpdMode::Rigid => mstep_rigid(&state, &y, &x)?,
            CpdMode::Affine => mstep_affine(&state, &y, &x)?,
        };
        linear = b;
        translation = t;
        sigma2 = if s2.is_finite() { s2.max(floor) } else { floor };
        ty.clear();
        ty.extend(y.iter().map(|p| Point3::from(linear * p.coords + translation)));
    }

    // x = s_x·(B·(y − μ_y)/s_y + t) + μ_x
    let b_mm = linear * (s_x / s_y);
    let t_mm = translation * s_x + mu_x - b_mm * mu_y;
    let kind = match params.mode {
        CpdMode::Rigid => TransformKind::Similarity,
        CpdMode::Affine => TransformKind::Affine,
    };
    let fine = AffineTransform3::new(b_mm, t_mm, kind);
    let transform = AffineTransform3::compose(&fine, init);
    let registered = PointCloud::from_points(y_mm.iter().map(|p| fine.apply_point(p)).collect());
    let mde = mean_distance_error(&registered, fixed)?;
    Ok(RegistrationResult {
        transform,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        detail: (!converged).then_some(ConvergenceDetail::MaxIterations),
        mde,
        sigma2: Some(sigma2 * s_x * s_x),
    })
}

struct Moments {
    mu_x: Vector3<f64>,
    mu_y: Vector3<f64>,
    /// `X̂ᵀ·Pᵀ·Ŷ`
    a: Matrix3<f64>,
    /// `Ŷᵀ·diag(P·1)·Ŷ`
    yy: Matrix3<f64>,
    /// `trace(X̂ᵀ·diag(Pᵀ·1)·X̂)`
    xx: f64,
}

fn moments(state: &GmmState, y: &[Point3], x: &[Point3]) -> Moments {
    let np = state.np;
    let mu_x = x
        .iter()
        .zip(&state.pt1)
        .fold(Vector3::zeros(), |acc, (p, &w)| acc + p.coords * w)
        / np;
    let mu_y = y
        .iter()
        .zip(&state.p1)
        .fold(Vector3::zeros(), |acc, (p, &w)| acc + p.coords * w)
        / np;
    let mut a = Matrix3::zeros();
    let mut yy = Matrix3::zeros();
    for ((p, px), &w) in y.iter().zip(&state.px).zip(&state.p1) {
        let yc = p.coords - mu_y;
        a += (px - mu_x * w) * yc.transpose();
        yy += yc * yc.transpose() * w;
    }
    let xx = x
        .iter()
        .zip(&state.pt1)
        .map(|(p, &w)| (p.coords - mu_x).norm_squared() * w)
        .sum();
    Moments { mu_x, mu_y, a, yy, xx }
}

fn mstep_rigid(state: &GmmState, y: &[Point3], x: &[Point3]) -> Result<(Matrix3<f64>, Vector3<f64>, f64)> {
    let mom = moments(state, y, x);
    let (r, _) = rotation_from_cross_covariance(&mom.a)?;
    let tr_ar = (mom.a.transpose() * r).trace();
    let tr_yy = mom.yy.trace();
    if !(tr_yy > 0.0) {
        return Err(Error::DegenerateConfiguration("weighted source scatter vanished".into()));
    }
    let s = tr_ar / tr_yy;
    let t = mom.mu_x - r * mom.mu_y * s;
    let sigma2 = (mom.xx - s * tr_ar) / (3.0 * state.np);
    Ok((r * s, t, sigma2))
}

fn mstep_affine(state: &GmmState, y: &[Point3], x: &[Point3]) -> Result<(Matrix3<f64>, Vector3<f64>, f64)> {
    let mom = moments(state, y, x);
    let scale = mom.yy.trace();
    let inv = mom
        .yy
        .try_inverse()
        .filter(|_| mom.yy.determinant().abs() > 1e-12 * scale * scale * scale)
        .ok_or_else(|| Error::DegenerateConfiguration("singular weighted source scatter".into()))?;
    let b = mom.a * inv;
    let t = mom.mu_x - b * mom.mu_y;
    let sigma2 = (mom.xx - (mom.a * b.transpose()).trace()) / (3.0 * state.np);
    Ok((b, t, sigma2))
}
