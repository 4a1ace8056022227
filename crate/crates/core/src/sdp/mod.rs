//! Dense interior-point solver for linear problems over products of PSD blocks.
//!
//! Problems are posed over a free decision vector `x`:
//!
//! ```text
//!   optimize   c·x + c0
//!   subject to E x = f
//!              F_j(x) = F_j0 + Σ_i x_i F_ji ⪰ 0   for every block j
//! ```
//!
//! The solver returns, besides the primal point, a dual certificate
//! `(X_j ⪰ 0, w)` from which a rigorous bound on the optimum is recomputed
//! in plain arithmetic by [`validate_certificate`]. The bound uses the a
//! priori box `|x_i| ≤ var_bound` to absorb the dual residual.

mod certificate;
mod solver;

use serde::{Deserialize, Serialize};

pub use certificate::{validate_certificate, CertificateCheck};
pub use solver::{solve, solve_with, SolverOptions};

/// `constant + Σ coef * x[var]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { constant: c, terms: Vec::new() }
    }

    pub fn var(i: usize) -> Self {
        AffineExpr { constant: 0.0, terms: vec![(i, 1.0)] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    pub fn scaled(&self, s: f64) -> Self {
        AffineExpr { constant: self.constant * s, terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect() }
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn normalized(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        AffineExpr { constant: self.constant, terms: out }
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        AffineExpr { constant: self.constant + other.constant, terms }.normalized()
    }
}

/// One upper-triangular entry (`row ≤ col`) of a symmetric block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub expr: AffineExpr,
}

/// Symmetric block `F_j(x)`; entries not listed are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicBlock {
    pub dim: usize,
    pub label: String,
    pub entries: Vec<BlockEntry>,
}

impl ConicBlock {
    /// Evaluates the block at `x` as a dense symmetric matrix.
    pub fn eval(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            let v = e.expr.eval(x);
            m[(e.row, e.col)] += v;
            if e.row != e.col {
                m[(e.col, e.row)] += v;
            }
        }
        m
    }

    /// `1×1` block holding `expr ≥ 0`.
    pub fn scalar(label: impl Into<String>, expr: AffineExpr) -> Self {
        ConicBlock { dim: 1, label: label.into(), entries: vec![BlockEntry { row: 0, col: 0, expr }] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub num_vars: usize,
    pub var_labels: Vec<String>,
    pub sense: Sense,
    pub objective: AffineExpr,
    /// Each expression is constrained to equal zero.
    pub equalities: Vec<AffineExpr>,
    pub blocks: Vec<ConicBlock>,
    /// A priori bound `|x_i| ≤ var_bound` valid on the feasible set.
    pub var_bound: f64,
}

impl ConicProblem {
    pub fn total_psd_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.blocks.is_empty() {
            return Err(Error::InvalidArgument("conic problem has no PSD block".into()));
        }
        if self.var_labels.len() != self.num_vars {
            return Err(Error::Dimension("variable labels do not match num_vars".into()));
        }
        if !(self.var_bound > 0.0 && self.var_bound.is_finite()) {
            return Err(Error::InvalidArgument("var_bound must be positive and finite".into()));
        }
        let exprs = self
            .blocks
            .iter()
            .flat_map(|b| b.entries.iter().map(|e| &e.expr))
            .chain(self.equalities.iter())
            .chain(std::iter::once(&self.objective));
        for e in exprs {
            if !e.constant.is_finite() || e.terms.iter().any(|&(i, c)| i >= self.num_vars || !c.is_finite()) {
                return Err(Error::InvalidArgument("affine expression references an unknown variable or is not finite".into()));
            }
        }
        for b in &self.blocks {
            if b.dim == 0 || b.entries.iter().any(|e| e.row > e.col || e.col >= b.dim) {
                return Err(Error::Dimension(format!("block '{}' has inconsistent entries", b.label)));
            }
        }
        Ok(())
    }

    /// Objective value at `x` in the problem's own sense.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        let p: ConicProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
}

/// Dual certificate in the internal maximization convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Dense row-major `X_j`, one per block.
    pub blocks: Vec<Vec<f64>>,
    /// Multipliers for `E x = f`, one per equality row.
    pub equality_multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Rigorous bound implied by this iterate's dual point.
    pub certified: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective at the returned `x`, in the problem's sense.
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Upper bound (maximization) or lower bound (minimization) on the
    /// optimum; only emitted when the solve converged.
    pub certified_bound: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// Tolerance the solve was run with.
    pub tol: f64,
    pub x: Vec<f64>,
    pub dual: DualCertificate,
    pub history: Vec<IterationRecord>,
}

impl SolveReport {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
