use crate::geometry::AffineTransform3;

/// Why a fine registration stopped short of reporting convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceDetail {
    /// Iteration cap reached before the stopping rule fired.
    MaxIterations,
    /// A per-axis scale was clamped to its bound in the final update.
    ScaleAtBound,
}

/// Output of every fine registration method.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps original moving coordinates to fixed coordinates, initial
    /// transform included.
    pub transform: AffineTransform3,
    /// Objective value evaluated at the start of each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub detail: Option<ConvergenceDetail>,
    /// Mean nearest-neighbour distance (mm) between the registered moving
    /// cloud and the fixed cloud.
    pub mde: f64,
    /// Final GMM variance for the EM-based methods.
    pub sigma2: Option<f64>,
}

impl RegistrationResult {
    /// Largest increase between consecutive trace entries, relative to the
    /// first entry's magnitude.
    pub fn max_relative_increase(&self) -> f64 {
        let scale = self.objective_trace.first().map(|v| v.abs()).unwrap_or(0.0);
        self.objective_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
            / scale.max(f64::MIN_POSITIVE)
    }

    /// True when every step satisfies `trace[k+1] <= trace[k] + slack·|trace[0]|`.
    pub fn trace_is_monotone(&self, slack: f64) -> bool {
        let scale = self.objective_trace.first().map(|v| v.abs()).unwrap_or(0.0);
        self.objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + slack * scale)
    }
}
