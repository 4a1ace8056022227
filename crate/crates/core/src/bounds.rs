//! Closed-form bounds on the CHSH guessing probability `P*`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TSIRELSON: f64 = 2.0 * SQRT_2;

/// Smallest meaningful guessing probability for four outcome pairs.
pub const P_FLOOR: f64 = 0.25;

fn clip(p: f64) -> f64 {
    p.clamp(P_FLOOR, 1.0)
}

/// A certified `P*(I, 0)` curve: nonincreasing in `I`, defined on `[2, 2√2]`.
pub trait ZeroCurve {
    fn value(&self, bell_value: f64) -> Result<f64>;

    fn name(&self) -> &'static str;
}

/// `1/2 + 1/2·sqrt(2 - I²/4)`, the single-party guessing bound. Valid (if
/// loose) for outcome pairs too.
pub fn closed_form_chsh_zero(bell_value: f64) -> Result<f64> {
    if bell_value > TSIRELSON + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "I = {bell_value} exceeds the quantum maximum 2√2"
        )));
    }
    if bell_value <= 2.0 {
        return Ok(1.0);
    }
    let r = (2.0 - bell_value * bell_value / 4.0).max(0.0).sqrt();
    Ok(clip(0.5 + 0.5 * r))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClosedFormCurve;

impl ZeroCurve for ClosedFormCurve {
    fn value(&self, bell_value: f64) -> Result<f64> {
        closed_form_chsh_zero(bell_value)
    }

    fn name(&self) -> &'static str {
        "closed-form"
    }
}

/// Tabulated upper bounds `(I_k, U_k)` with `U_k ≥ P*(I_k, 0)`.
///
/// Between grid points the curve returns the value at the left neighbour,
/// which dominates the true curve because it is nonincreasing. Points are
/// first replaced by their running minimum from the left, so the table is
/// itself nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCurve {
    points: Vec<(f64, f64)>,
}

impl GridCurve {
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty curve".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut running = f64::INFINITY;
        for p in points.iter_mut() {
            running = running.min(p.1);
            p.1 = running;
        }
        Ok(GridCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

impl ZeroCurve for GridCurve {
    fn value(&self, bell_value: f64) -> Result<f64> {
        if bell_value <= 2.0 {
            return Ok(1.0);
        }
        let (lo, hi) = (self.points[0].0, self.points[self.points.len() - 1].0);
        if bell_value > hi + 1e-12 {
            return Err(Error::InvalidArgument(format!("I = {bell_value} beyond tabulated range [{lo}, {hi}]")));
        }
        // Last point with I_k <= I; below the table the trivial bound applies.
        match self.points.iter().rev().find(|p| p.0 <= bell_value + 1e-12) {
            Some(p) => Ok(clip(p.1)),
            None => Ok(1.0),
        }
    }

    fn name(&self) -> &'static str {
        "grid"
    }
}

/// Shifted bound `P*(I, χ) ≤ P*(I - γχ, 0) + χ`.
pub fn bound_shifted(bell_value: f64, chi: f64, gamma: f64, zero_curve: &dyn ZeroCurve) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::InvalidArgument(format!("chi = {chi} outside [0,1]")));
    }
    let shifted = (bell_value - gamma * chi).max(2.0);
    Ok(clip((zero_curve.value(shifted)? + chi).min(1.0)))
}

/// Signaling bound for CHSH: `min(1, max(2 - I/2, 3/2 - I/4 + 2δ))`, and 1
/// when `I ≤ 2`.
pub fn bound_signaling(bell_value: f64, delta: f64) -> Result<f64> {
    if !(-4.0 - 1e-12..=4.0 + 1e-12).contains(&bell_value) {
        return Err(Error::InvalidArgument(format!("I = {bell_value} outside [-4,4]")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside [0,1]")));
    }
    if bell_value <= 2.0 {
        return Ok(1.0);
    }
    let negative_sign = 2.0 - bell_value / 2.0;
    let positive_sign = 1.5 - bell_value / 4.0 + 2.0 * delta;
    Ok(clip(negative_sign.max(positive_sign).min(1.0)))
}
