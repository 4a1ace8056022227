//! Numeric tolerances shared by every module.

/// Tolerance record. A single instance, [`POLICY`], is used crate-wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Entrywise bound on `|A - A^H|` for a matrix to count as Hermitian.
    pub hermiticity: f64,
    /// Eigen-decomposition reconstruction residual, per unit dimension.
    pub eigen_residual: f64,
    /// Slack allowed when testing positive semidefiniteness.
    pub psd_slack: f64,
    /// Behavior normalization tolerance per setting.
    pub normalization: f64,
    /// Smallest entry a behavior may carry before it is rejected.
    pub negative_entry: f64,
    /// Negative entries down to this value are clipped in empirical behaviors.
    pub clip_floor: f64,
}

pub const POLICY: NumericPolicy = NumericPolicy {
    hermiticity: 1e-12,
    eigen_residual: 1e-9,
    psd_slack: 1e-9,
    normalization: 1e-9,
    negative_entry: -1e-12,
    clip_floor: -1e-9,
};
