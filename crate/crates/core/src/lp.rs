//! Dense two-phase simplex and the signaling-bounded guessing-probability LP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bell::{BellExpression, Behavior, Scenario};
use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `maximize c·x` subject to the rows and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

/// Primal solution with the dual multipliers that certify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row: `≥ 0` for `Le`, `≤ 0` for `Ge`, free for `Eq`.
    pub duals: Vec<f64>,
    /// `b·y`, an upper bound on the maximum when the duals are feasible.
    pub dual_objective: f64,
    /// Worst violation of `Aᵀy ≥ c` and of the dual sign conditions.
    pub dual_infeasibility: f64,
    /// Largest complementary-slackness product.
    pub complementarity: f64,
    pub pivots: usize,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        LpProblem { objective, rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.rows.push(LpRow { coeffs, kind, rhs });
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::InvalidArgument("LP has no variables".into()));
        }
        if let Some(r) = self.rows.iter().find(|r| r.coeffs.len() != n) {
            return Err(Error::Dimension(format!("LP row has {} coefficients, expected {n}", r.coeffs.len())));
        }
        let finite = self.objective.iter().chain(self.rows.iter().flat_map(|r| r.coeffs.iter().chain([&r.rhs])));
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("LP contains non-finite data".into()));
        }
        Ok(())
    }
}

struct Tableau {
    /// rows x (cols + 1); last column is the right-hand side.
    t: Vec<Vec<f64>>,
    cols: usize,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced costs `c_j - c_B B^{-1} A_j` for the given cost vector.
    fn reduced_costs(&self, cost: &[f64], allowed: &[bool]) -> Vec<f64> {
        let mut d: Vec<f64> = cost.to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.t[i][j];
                }
            }
        }
        for (j, dj) in d.iter_mut().enumerate() {
            if !allowed[j] {
                *dj = 0.0;
            }
        }
        d
    }

    /// Maximizes `cost` over the current feasible basis. Dantzig pricing with
    /// a permanent switch to Bland's rule after a run of degenerate pivots.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], max_pivots: usize) -> Result<()> {
        let m = self.t.len();
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > max_pivots {
                return Err(Error::LpCycling(self.pivots));
            }
            let d = self.reduced_costs(cost, allowed);
            let entering = if bland {
                (0..self.cols).find(|&j| d[j] > COST_EPS)
            } else {
                let mut best = None;
                let mut best_val = COST_EPS;
                for (j, &dj) in d.iter().enumerate() {
                    if dj > best_val {
                        best_val = dj;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-13 || (ratio <= lr + 1e-13 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Err(Error::LpUnbounded) };
            if ratio.abs() <= 1e-13 {
                degenerate_run += 1;
                if degenerate_run > 50 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solves the LP; returns the optimum with a dual certificate.
pub fn simplex_solve(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let m = p.rows.len();

    // Flip rows with negative right-hand side so that b >= 0.
    let mut rows: Vec<(Vec<f64>, RowKind, f64, f64)> = Vec::with_capacity(m);
    for r in &p.rows {
        if r.rhs < 0.0 {
            let kind = match r.kind {
                RowKind::Le => RowKind::Ge,
                RowKind::Ge => RowKind::Le,
                RowKind::Eq => RowKind::Eq,
            };
            rows.push((r.coeffs.iter().map(|v| -v).collect(), kind, -r.rhs, -1.0));
        } else {
            rows.push((r.coeffs.clone(), r.kind, r.rhs, 1.0));
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != RowKind::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != RowKind::Le).count();
    let cols = n + n_slack + n_art;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; cols];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, (coeffs, kind, rhs, _)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(coeffs);
        t[i][cols] = *rhs;
        match kind {
            RowKind::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            RowKind::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                is_art[a] = true;
                a += 1;
            }
            RowKind::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                is_art[a] = true;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, cols, basis, pivots: 0 };
    let max_pivots = 50 * (m + cols) + 1000;

    if n_art > 0 {
        let cost1: Vec<f64> = (0..cols).map(|j| if is_art[j] { -1.0 } else { 0.0 }).collect();
        let all = vec![true; cols];
        tab.optimize(&cost1, &all, max_pivots)?;
        let infeas: f64 = tab.basis.iter().enumerate().filter(|(_, &b)| is_art[b]).map(|(i, _)| tab.t[i][cols]).sum();
        if infeas > 1e-9 {
            return Err(Error::LpInfeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if is_art[tab.basis[i]] {
                if let Some(c) = (0..cols).find(|&j| !is_art[j] && tab.t[i][j].abs() > 1e-9) {
                    tab.pivot(i, c);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(&p.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art[j]).collect();
    tab.optimize(&cost2, &allowed, max_pivots)?;

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][cols].max(0.0);
        }
    }
    let objective: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // Duals from the basis columns of the flipped system: B^T y = c_B. Rows
    // whose basic variable is a leftover artificial are redundant.
    let basis_cols: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let b = tab.basis[i];
            (0..m)
                .map(|r| {
                    if b < n {
                        rows[r].0[b]
                    } else {
                        column_of_aux(&rows, n, n_slack, b, r)
                    }
                })
                .collect()
        })
        .collect();
    let bmat = DMatrix::from_fn(m, m, |r, c| basis_cols[c][r]);
    let cb = DVector::from_fn(m, |i, _| cost2[tab.basis[i]]);
    let y_flipped = if m == 0 {
        DVector::zeros(0)
    } else {
        bmat.transpose().lu().solve(&cb).ok_or_else(|| Error::Solver("singular simplex basis".into()))?
    };
    let duals: Vec<f64> = (0..m).map(|i| y_flipped[i] * rows[i].3).collect();

    let cert = lp_certificate(p, &x, &duals);
    Ok(LpSolution {
        x,
        objective,
        duals,
        dual_objective: cert.0,
        dual_infeasibility: cert.1,
        complementarity: cert.2,
        pivots: tab.pivots,
    })
}

fn column_of_aux(rows: &[(Vec<f64>, RowKind, f64, f64)], n: usize, n_slack: usize, col: usize, r: usize) -> f64 {
    let mut s = n;
    let mut a = n + n_slack;
    for (i, row) in rows.iter().enumerate() {
        match row.1 {
            RowKind::Le => {
                if col == s {
                    return if i == r { 1.0 } else { 0.0 };
                }
                s += 1;
            }
            RowKind::Ge => {
                if col == s {
                    return if i == r { -1.0 } else { 0.0 };
                }
                s += 1;
                if col == a {
                    return if i == r { 1.0 } else { 0.0 };
                }
                a += 1;
            }
            RowKind::Eq => {
                if col == a {
                    return if i == r { 1.0 } else { 0.0 };
                }
                a += 1;
            }
        }
    }
    0.0
}

/// Recomputes `(b·y, dual infeasibility, complementarity)` from scratch.
pub fn lp_certificate(p: &LpProblem, x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = p.num_vars();
    let mut dual_obj = 0.0;
    let mut infeas = 0.0f64;
    let mut comp = 0.0f64;
    let mut aty = vec![0.0; n];
    for (row, &yi) in p.rows.iter().zip(y) {
        dual_obj += row.rhs * yi;
        for (j, c) in row.coeffs.iter().enumerate() {
            aty[j] += c * yi;
        }
        let sign_violation = match row.kind {
            RowKind::Le => (-yi).max(0.0),
            RowKind::Ge => yi.max(0.0),
            RowKind::Eq => 0.0,
        };
        infeas = infeas.max(sign_violation);
        let slack: f64 = row.rhs - row.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        comp = comp.max((slack * yi).abs());
    }
    for j in 0..n {
        let rc = aty[j] - p.objective[j];
        infeas = infeas.max((-rc).max(0.0));
        comp = comp.max((rc * x[j]).abs());
    }
    (dual_obj, infeas, comp)
}

/// How the Bell value enters the LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BellConstraint {
    #[default]
    Equal,
    AtLeast,
}

/// Per-target optimum of the signaling-bounded LP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetValue {
    pub a: usize,
    pub b: usize,
    pub x: usize,
    pub y: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct PStarLp {
    /// Max over all 16 targets.
    pub value: f64,
    pub argmax: Behavior,
    pub table: Vec<TargetValue>,
    pub certificates: Vec<LpSolution>,
}

/// Builds the LP `max P(ab|xy)` over behaviors with Bell value `I` and
/// per-party signaling at most `delta`.
pub fn signaling_lp(
    expr: &BellExpression,
    bell_value: f64,
    delta: f64,
    target: (usize, usize, usize, usize),
    mode: BellConstraint,
) -> LpProblem {
    let s = expr.scenario();
    let nv = s.len();
    let (ta, tb, tx, ty) = target;
    let mut obj = vec![0.0; nv];
    obj[s.index(ta, tb, tx, ty)] = 1.0;
    let mut lp = LpProblem::new(obj);
    for x in 0..s.inputs {
        for y in 0..s.inputs {
            let mut row = vec![0.0; nv];
            for a in 0..s.outputs {
                for b in 0..s.outputs {
                    row[s.index(a, b, x, y)] = 1.0;
                }
            }
            lp.push(row, RowKind::Eq, 1.0);
        }
    }
    let kind = match mode {
        BellConstraint::Equal => RowKind::Eq,
        BellConstraint::AtLeast => RowKind::Ge,
    };
    lp.push(expr.coeffs().to_vec(), kind, bell_value);
    push_signaling_rows(&mut lp, s, delta);
    lp
}

fn push_signaling_rows(lp: &mut LpProblem, s: Scenario, delta: f64) {
    let nv = s.len();
    for a in 0..s.outputs {
        for x in 0..s.inputs {
            for y in 0..s.inputs {
                for y2 in (y + 1)..s.inputs {
                    let mut row = vec![0.0; nv];
                    for b in 0..s.outputs {
                        row[s.index(a, b, x, y)] += 1.0;
                        row[s.index(a, b, x, y2)] -= 1.0;
                    }
                    let neg: Vec<f64> = row.iter().map(|v| -v).collect();
                    lp.push(row, RowKind::Le, delta);
                    lp.push(neg, RowKind::Le, delta);
                }
            }
        }
    }
    for b in 0..s.outputs {
        for y in 0..s.inputs {
            for x in 0..s.inputs {
                for x2 in (x + 1)..s.inputs {
                    let mut row = vec![0.0; nv];
                    for a in 0..s.outputs {
                        row[s.index(a, b, x, y)] += 1.0;
                        row[s.index(a, b, x2, y)] -= 1.0;
                    }
                    let neg: Vec<f64> = row.iter().map(|v| -v).collect();
                    lp.push(row, RowKind::Le, delta);
                    lp.push(neg, RowKind::Le, delta);
                }
            }
        }
    }
}

/// `P*(I, δ)`: max over every target `(a,b,x,y)` of the signaling-bounded LP.
pub fn p_star_lp(bell_value: f64, delta: f64, mode: BellConstraint) -> Result<PStarLp> {
    p_star_lp_for(&BellExpression::chsh(), bell_value, delta, mode)
}

pub fn p_star_lp_for(expr: &BellExpression, bell_value: f64, delta: f64, mode: BellConstraint) -> Result<PStarLp> {
    if bell_value.abs() > max_abs_value(expr) + 1e-12 {
        return Err(Error::LpInfeasible);
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must be non-negative")));
    }
    let s = expr.scenario();
    let mut table = Vec::with_capacity(s.len());
    let mut certificates = Vec::with_capacity(s.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (a, b, x, y) in s.tuples() {
        let lp = signaling_lp(expr, bell_value, delta, (a, b, x, y), mode);
        let sol = simplex_solve(&lp)?;
        if best.as_ref().is_none_or(|(v, _)| sol.objective > *v + 1e-12) {
            best = Some((sol.objective, sol.x.clone()));
        }
        table.push(TargetValue { a, b, x, y, value: sol.objective });
        certificates.push(sol);
    }
    let (value, xbest) = best.expect("scenario has targets");
    let argmax = Behavior::from_empirical(s, xbest)?;
    Ok(PStarLp { value, argmax, table, certificates })
}

/// Largest `|Σ c P|` over normalized behaviors: per setting, the largest |c|.
fn max_abs_value(expr: &BellExpression) -> f64 {
    let s = expr.scenario();
    let mut hi = 0.0;
    let mut lo = 0.0;
    for x in 0..s.inputs {
        for y in 0..s.inputs {
            let cs: Vec<f64> = (0..s.outputs)
                .flat_map(|a| (0..s.outputs).map(move |b| (a, b)))
                .map(|(a, b)| expr.coeff(a, b, x, y))
                .collect();
            hi += cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lo += cs.iter().copied().fold(f64::INFINITY, f64::min);
        }
    }
    f64::max(hi, -lo)
}
