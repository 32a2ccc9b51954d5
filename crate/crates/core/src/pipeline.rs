//! Coarse-to-fine orchestration shared by the command line and the
//! benchmark harness.

use std::fmt::Write as _;

use crate::coarse::{coarse_register, CoarseParams, LandmarkSet};
use crate::cpd::{cpd_affine, cpd_rigid, CpdParams};
use crate::error::{Error, Result};
use crate::geometry::{AffineTransform3, PointCloud};
use crate::icp::{icp, sicp, IcpParams};
use crate::registration::RegistrationResult;

/// Fine registration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Icp,
    Sicp,
    CpdRigid,
    CpdAffine,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Icp, Method::Sicp, Method::CpdRigid, Method::CpdAffine];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Icp => "icp",
            Method::Sicp => "sicp",
            Method::CpdRigid => "cpd-rigid",
            Method::CpdAffine => "cpd-affine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters for every stage, each defaulting to its module's defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineParams {
    pub coarse: CoarseParams,
    pub icp: IcpParams,
    pub cpd: CpdParams,
}

/// How the fine stage was initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitSource {
    Given,
    Coarse,
    /// Neither an initial transform nor landmarks were supplied.
    Identity,
}

pub fn register_fine(
    method: Method,
    moving: &PointCloud,
    fixed: &PointCloud,
    init: &AffineTransform3,
    params: &PipelineParams,
) -> Result<RegistrationResult> {
    match method {
        Method::Icp => icp(moving, fixed, init, &params.icp),
        Method::Sicp => sicp(moving, fixed, init, &params.icp),
        Method::CpdRigid => cpd_rigid(moving, fixed, init, &params.cpd),
        Method::CpdAffine => cpd_affine(moving, fixed, init, &params.cpd),
    }
}

/// Picks the fine-stage start: an explicit transform wins, otherwise the
/// landmarks are registered, otherwise identity.
pub fn initial_transform(
    init: Option<&AffineTransform3>,
    landmarks: Option<(&LandmarkSet, &LandmarkSet)>,
    coarse: &CoarseParams,
) -> Result<(AffineTransform3, InitSource)> {
    match (init, landmarks) {
        (Some(t), _) => Ok((*t, InitSource::Given)),
        (None, Some((moving, fixed))) => Ok((coarse_register(moving, fixed, coarse)?, InitSource::Coarse)),
        (None, None) => Ok((AffineTransform3::identity(), InitSource::Identity)),
    }
}

/// Coarse stage (when needed) followed by one fine method.
pub fn register(
    method: Method,
    moving: &PointCloud,
    fixed: &PointCloud,
    init: Option<&AffineTransform3>,
    landmarks: Option<(&LandmarkSet, &LandmarkSet)>,
    params: &PipelineParams,
) -> Result<(RegistrationResult, InitSource)> {
    let (start, source) = initial_transform(init, landmarks, &params.coarse)?;
    Ok((register_fine(method, moving, fixed, &start, params)?, source))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    pub mde: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs all four methods from the same start.
pub fn compare(
    moving: &PointCloud,
    fixed: &PointCloud,
    init: &AffineTransform3,
    params: &PipelineParams,
) -> Result<Vec<(CompareRow, RegistrationResult)>> {
    Method::ALL
        .iter()
        .map(|&m| {
            let r = register_fine(m, moving, fixed, init, params)?;
            Ok((
                CompareRow {
                    method: m,
                    mde: r.mde,
                    iterations: r.iterations,
                    converged: r.converged,
                },
                r,
            ))
        })
        .collect()
}

/// `method,mde_mm,iterations,converged` with numbers at 9 significant digits.
pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("method,mde_mm,iterations,converged\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.method, format_sig(r.mde), r.iterations, r.converged);
    }
    s
}

/// Nine significant digits without trailing zeros; zero prints as `0.0`.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        let s = format!("{v:.8e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{e}")
    }
}

/// Rejects the fine-method name with a usage-style error.
pub fn parse_method(s: &str) -> Result<Method> {
    Method::parse(s).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "unknown method `{s}` (expected one of icp, sicp, cpd-rigid, cpd-affine)"
        ))
    })
}
