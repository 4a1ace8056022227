//! Independent re-verification of a dual certificate.
//!
//! For a maximization problem with sign `s = +1` (and `s = -1` for
//! minimization, which is maximization of `-c·x`), every feasible `x` obeys
//!
//! ```text
//!   s·(c·x + c0) ≤ Σ_j <X_j, F_j0> + s·c0 + w·f + B·‖r‖₁,
//!   r_i = s·c_i + Σ_j <X_j, F_ji> - (Eᵀw)_i,
//! ```
//!
//! whenever every `X_j ⪰ 0` and `|x_i| ≤ B`. The routines here evaluate that
//! right-hand side with plain loops over the problem data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::solver::Reduction;
use super::{ConicProblem, DualCertificate, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::{psd_project, sym_eigs};

/// Gradient `g_i = s·c_i + Σ_j <X_j, F_ji>` and constant `Σ_j <X_j, F_j0>`.
fn gradient(p: &ConicProblem, xs: &[DMatrix<f64>]) -> (Vec<f64>, f64) {
    let s = p.sense.sign();
    let mut g = vec![0.0; p.num_vars];
    for &(i, c) in &p.objective.terms {
        g[i] += s * c;
    }
    let mut constant = 0.0;
    for (blk, x) in p.blocks.iter().zip(xs) {
        for e in &blk.entries {
            let w = if e.row == e.col { x[(e.row, e.col)] } else { x[(e.row, e.col)] + x[(e.col, e.row)] };
            constant += e.expr.constant * w;
            for &(i, c) in &e.expr.terms {
                g[i] += c * w;
            }
        }
    }
    (g, constant)
}

fn to_matrix(dim: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(dim, dim, data)
}

/// Builds the certificate in original variables from the reduced dual blocks.
pub(crate) fn dual_in_original(p: &ConicProblem, red: &Reduction, xs: &[DMatrix<f64>]) -> DualCertificate {
    let (g, _) = gradient(p, xs);
    let mut w = vec![0.0; p.equalities.len()];
    let k = red.pivots.len();
    if k > 0 {
        // Eᵀ restricted to pivot columns and independent rows: square, invertible.
        let mut et = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for (a, &(var, _)) in red.pivots.iter().enumerate() {
            rhs[a] = g[var];
            for (b, &(_, row)) in red.pivots.iter().enumerate() {
                et[(a, b)] = p.equalities[row].terms.iter().filter(|t| t.0 == var).map(|t| t.1).sum::<f64>();
            }
        }
        if let Some(sol) = et.lu().solve(&rhs) {
            for (b, &(_, row)) in red.pivots.iter().enumerate() {
                w[row] = sol[b];
            }
        }
    }
    DualCertificate {
        blocks: xs.iter().map(|x| x.transpose().iter().copied().collect()).collect(),
        equality_multipliers: w,
    }
}

/// Bound implied by a certificate after projecting each block onto the PSD cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedBound {
    /// In the problem's own sense (an upper bound when maximizing).
    pub bound: f64,
    pub residual_l1: f64,
    pub residual_inf: f64,
    pub min_eigenvalues: Vec<f64>,
}

pub(crate) fn implied_bound(p: &ConicProblem, cert: &DualCertificate) -> Result<ImpliedBound> {
    if cert.blocks.len() != p.blocks.len() || cert.equality_multipliers.len() != p.equalities.len() {
        return Err(Error::Certificate("certificate shape does not match the problem".into()));
    }
    let mut xs = Vec::with_capacity(p.blocks.len());
    let mut min_eigenvalues = Vec::with_capacity(p.blocks.len());
    for (blk, data) in p.blocks.iter().zip(&cert.blocks) {
        if data.len() != blk.dim * blk.dim || data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Certificate(format!("block '{}' has malformed dual data", blk.label)));
        }
        let x = to_matrix(blk.dim, data);
        let x = (&x + x.transpose()) * 0.5;
        min_eigenvalues.push(sym_eigs(&x)[0]);
        xs.push(psd_project(&x));
    }
    let (mut g, constant) = gradient(p, &xs);
    let mut wf = 0.0;
    for (row, &w) in p.equalities.iter().zip(&cert.equality_multipliers) {
        wf += w * -row.constant;
        for &(i, c) in &row.terms {
            g[i] -= w * c;
        }
    }
    let residual_l1: f64 = g.iter().map(|v| v.abs()).sum();
    let residual_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s = p.sense.sign();
    let upper = constant + s * p.objective.constant + wf + p.var_bound * residual_l1;
    Ok(ImpliedBound { bound: s * upper, residual_l1, residual_inf, min_eigenvalues })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub implied: ImpliedBound,
    /// `|implied - reported|`.
    pub discrepancy: f64,
}

/// Recomputes the certified bound of `r` from the problem data alone.
///
/// Fails when the report carries no bound, any dual block is materially
/// indefinite, the stationarity residual exceeds `10·tol`, or the recomputed
/// bound disagrees with the reported one.
pub fn validate_certificate(p: &ConicProblem, r: &SolveReport) -> Result<CertificateCheck> {
    let reported = r.certified_bound.ok_or_else(|| Error::Certificate("report carries no certified bound".into()))?;
    let implied = implied_bound(p, &r.dual)?;
    for (blk, (&ev, data)) in p.blocks.iter().zip(implied.min_eigenvalues.iter().zip(&r.dual.blocks)) {
        let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if ev < -1e-9 * scale {
            return Err(Error::Certificate(format!("dual block '{}' has eigenvalue {ev:e}", blk.label)));
        }
    }
    let cscale = 1.0 + p.objective.terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
    if implied.residual_inf > 10.0 * r.tol * cscale {
        return Err(Error::Certificate(format!("stationarity residual {:e} exceeds 10·tol", implied.residual_inf)));
    }
    let discrepancy = (implied.bound - reported).abs();
    if discrepancy > 1e-9 * (1.0 + reported.abs()) {
        return Err(Error::Certificate(format!("recomputed bound {} differs from reported {reported}", implied.bound)));
    }
    Ok(CertificateCheck { implied, discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve, AffineExpr, BlockEntry, ConicBlock, Sense};

    fn problem() -> ConicProblem {
        // max t + u s.t. [[1,t],[t,1]] ⪰ 0, u = 0.5 - 0.5 t·0 (pinned), 0 ≤ 1 - u.
        ConicProblem {
            num_vars: 2,
            var_labels: vec!["t".into(), "u".into()],
            sense: Sense::Maximize,
            objective: AffineExpr { constant: 0.0, terms: vec![(0, 1.0), (1, 1.0)] },
            equalities: vec![AffineExpr { constant: -0.5, terms: vec![(1, 2.0)] }],
            blocks: vec![
                ConicBlock {
                    dim: 2,
                    label: "m".into(),
                    entries: vec![
                        BlockEntry { row: 0, col: 0, expr: AffineExpr::constant(1.0) },
                        BlockEntry { row: 0, col: 1, expr: AffineExpr::var(0) },
                        BlockEntry { row: 1, col: 1, expr: AffineExpr::constant(1.0) },
                    ],
                },
                ConicBlock::scalar("u", AffineExpr { constant: 1.0, terms: vec![(1, -1.0)] }),
            ],
            var_bound: 1.0,
        }
    }

    #[test]
    fn optimal_report_revalidates() {
        let p = problem();
        let r = solve(&p).unwrap();
        let check = validate_certificate(&p, &r).unwrap();
        assert!(check.implied.residual_inf <= 10.0 * r.tol);
        assert!((check.implied.bound - 1.25).abs() < 1e-6);
    }

    #[test]
    fn corrupted_dual_rejected() {
        let p = problem();
        let mut r = solve(&p).unwrap();
        r.dual.blocks[0][1] += 0.3;
        r.dual.blocks[0][2] += 0.3;
        assert!(validate_certificate(&p, &r).is_err());
        let mut r = solve(&p).unwrap();
        r.dual.blocks[0].iter_mut().for_each(|v| *v = -*v);
        assert!(validate_certificate(&p, &r).is_err());
        let mut r = solve(&p).unwrap();
        r.dual.equality_multipliers[0] += 1.0;
        assert!(validate_certificate(&p, &r).is_err());
    }

    #[test]
    fn tampered_bound_rejected() {
        let p = problem();
        let mut r = solve(&p).unwrap();
        r.certified_bound = Some(1.0);
        assert!(validate_certificate(&p, &r).is_err());
    }
}
