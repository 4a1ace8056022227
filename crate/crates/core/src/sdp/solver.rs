//! Infeasible primal-dual path-following method (HKM direction, Mehrotra
//! predictor-corrector) on the equality-free reduced problem
//!
//! ```text
//!   max b·z + b0   s.t.   S_j = C_j - Σ_k z_k A_jk ⪰ 0
//!   min <C,X> + b0 s.t.   <A_k, X> = b_k,  X ⪰ 0
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::certificate::{dual_in_original, implied_bound};
use super::{ConicProblem, IterationRecord, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::sym_eigs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Problems whose PSD blocks sum to more rows than this are refused.
    pub max_psd_dim: usize,
    /// Problems with more free variables than this are refused.
    pub max_vars: usize,
    /// Ignore both size budgets.
    pub allow_large: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-7, max_iter: 200, max_psd_dim: 2000, max_vars: 4000, allow_large: false }
    }
}

pub fn solve(p: &ConicProblem) -> Result<SolveReport> {
    solve_with(p, &SolverOptions::default())
}

/// Expresses every original variable as `x = x0 + T z` after eliminating the
/// equality rows.
pub(crate) struct Reduction {
    pub free: Vec<usize>,
    /// `(pivot variable, equality row)` pairs.
    pub pivots: Vec<(usize, usize)>,
    pub x0: Vec<f64>,
    pub t: Vec<Vec<(usize, f64)>>,
}

impl Reduction {
    pub fn new(p: &ConicProblem) -> Result<Self> {
        let n = p.num_vars;
        let neq = p.equalities.len();
        let mut e = DMatrix::<f64>::zeros(neq, n);
        let mut f = DVector::<f64>::zeros(neq);
        for (r, row) in p.equalities.iter().enumerate() {
            for &(i, c) in &row.terms {
                e[(r, i)] += c;
            }
            f[r] = -row.constant;
        }
        let scale = e.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut rows: Vec<usize> = (0..neq).collect();
        let mut is_pivot = vec![false; n];
        let mut pivot_cols = Vec::new();
        let mut rank = 0;
        while rank < neq {
            let mut best = (0.0, 0, 0);
            for i in rank..neq {
                for j in 0..n {
                    if !is_pivot[j] && e[(i, j)].abs() > best.0 {
                        best = (e[(i, j)].abs(), i, j);
                    }
                }
            }
            if best.0 <= 1e-10 * scale {
                break;
            }
            let (_, pi, pj) = best;
            e.swap_rows(rank, pi);
            f.swap_rows(rank, pi);
            rows.swap(rank, pi);
            let piv = e[(rank, pj)];
            for j in 0..n {
                e[(rank, j)] /= piv;
            }
            f[rank] /= piv;
            for i in 0..neq {
                if i != rank {
                    let factor = e[(i, pj)];
                    if factor != 0.0 {
                        for j in 0..n {
                            e[(i, j)] -= factor * e[(rank, j)];
                        }
                        f[i] -= factor * f[rank];
                    }
                }
            }
            is_pivot[pj] = true;
            pivot_cols.push(pj);
            rank += 1;
        }
        let fscale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if (rank..neq).any(|i| f[i].abs() > 1e-9 * fscale) {
            return Err(Error::Solver("equality constraints are inconsistent".into()));
        }
        let free: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
        let mut reduced_index = vec![usize::MAX; n];
        for (k, &j) in free.iter().enumerate() {
            reduced_index[j] = k;
        }
        let mut x0 = vec![0.0; n];
        let mut t: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &j in &free {
            t[j] = vec![(reduced_index[j], 1.0)];
        }
        let mut pivots = Vec::with_capacity(rank);
        for (r, &pj) in pivot_cols.iter().enumerate() {
            x0[pj] = f[r];
            t[pj] = free
                .iter()
                .filter(|&&j| e[(r, j)] != 0.0)
                .map(|&j| (reduced_index[j], -e[(r, j)]))
                .collect();
            pivots.push((pj, rows[r]));
        }
        Ok(Reduction { free, pivots, x0, t })
    }

    /// Substitutes `x = x0 + T z` into `constant + Σ c_i x_i`.
    fn substitute(&self, constant: f64, terms: &[(usize, f64)]) -> (f64, BTreeMap<usize, f64>) {
        let mut c = constant;
        let mut out = BTreeMap::new();
        for &(i, coef) in terms {
            c += coef * self.x0[i];
            for &(k, h) in &self.t[i] {
                *out.entry(k).or_insert(0.0) += coef * h;
            }
        }
        out.retain(|_, v| *v != 0.0);
        (c, out)
    }

    pub fn expand(&self, z: &[f64]) -> Vec<f64> {
        self.x0.iter().zip(&self.t).map(|(x0, t)| x0 + t.iter().map(|&(k, h)| h * z[k]).sum::<f64>()).collect()
    }
}

/// Full symmetric entry list `(row, col, value)` of one coefficient matrix.
type Entries = Vec<(usize, usize, f64)>;

struct Block {
    c: DMatrix<f64>,
    a: Vec<(usize, Entries)>,
}

struct Reduced {
    m: usize,
    b: Vec<f64>,
    b0: f64,
    blocks: Vec<Block>,
}

fn reduce(p: &ConicProblem, red: &Reduction) -> Reduced {
    let s = p.sense.sign();
    let (c0, obj) = red.substitute(p.objective.constant, &p.objective.terms);
    let m = red.free.len();
    let mut b = vec![0.0; m];
    for (k, v) in obj {
        b[k] = s * v;
    }
    let blocks = p
        .blocks
        .iter()
        .map(|blk| {
            let mut c = DMatrix::zeros(blk.dim, blk.dim);
            let mut a: BTreeMap<usize, Entries> = BTreeMap::new();
            for e in &blk.entries {
                let (k0, terms) = red.substitute(e.expr.constant, &e.expr.terms);
                c[(e.row, e.col)] += k0;
                if e.row != e.col {
                    c[(e.col, e.row)] += k0;
                }
                for (k, v) in terms {
                    let list = a.entry(k).or_default();
                    list.push((e.row, e.col, -v));
                    if e.row != e.col {
                        list.push((e.col, e.row, -v));
                    }
                }
            }
            Block { c, a: a.into_iter().collect() }
        })
        .collect();
    Reduced { m, b, b0: s * c0, blocks }
}

fn apply(entries: &Entries, k: &DMatrix<f64>) -> f64 {
    entries.iter().map(|&(r, c, v)| v * k[(r, c)]).sum()
}

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite when `dX ⪰ 0`).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() == 1 {
        return Ok(if dx[(0, 0)] < 0.0 { -x[(0, 0)] / dx[(0, 0)] } else { f64::INFINITY });
    }
    let chol = x.clone().cholesky().ok_or_else(|| Error::Solver("step-size failure: iterate lost definiteness".into()))?;
    let l = chol.l();
    let y = l.solve_lower_triangular(dx).ok_or_else(|| Error::Solver("step-size failure".into()))?;
    let w = l.solve_lower_triangular(&y.transpose()).ok_or_else(|| Error::Solver("step-size failure".into()))?;
    let lmin = sym_eigs(&w)[0];
    Ok(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn spd_inverse(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = s.clone().cholesky().ok_or_else(|| Error::Solver("step-size failure: slack lost definiteness".into()))?;
    Ok(sym(&chol.inverse()))
}

struct Schur {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Schur {
    fn build(red: &Reduced, x: &[DMatrix<f64>], sinv: &[DMatrix<f64>]) -> Result<Self> {
        let mut m = DMatrix::<f64>::zeros(red.m, red.m);
        for (j, blk) in red.blocks.iter().enumerate() {
            let (xj, sj) = (&x[j], &sinv[j]);
            for (ia, (k, ek)) in blk.a.iter().enumerate() {
                for (l, el) in &blk.a[ia..] {
                    let mut acc = 0.0;
                    for &(p, q, a) in ek {
                        for &(r, s, c) in el {
                            acc += a * c * xj[(q, r)] * sj[(s, p)];
                        }
                    }
                    if k == l {
                        m[(*k, *k)] += acc;
                    } else {
                        m[(*k, *l)] += acc;
                        m[(*l, *k)] += acc;
                    }
                }
            }
        }
        let m = sym(&m);
        let diag_max = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut shift = 0.0;
        for _ in 0..8 {
            let mut shifted = m.clone();
            for i in 0..red.m {
                shifted[(i, i)] += shift;
            }
            if let Some(chol) = shifted.cholesky() {
                return Ok(Schur { chol });
            }
            shift = if shift == 0.0 { 1e-14 * diag_max } else { shift * 100.0 };
        }
        Err(Error::Solver("step-size failure: Schur complement is not positive definite".into()))
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
}

struct State<'a> {
    red: &'a Reduced,
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    z: DVector<f64>,
}

impl State<'_> {
    fn a_star(&self, z: &DVector<f64>, j: usize) -> DMatrix<f64> {
        let blk = &self.red.blocks[j];
        let n = blk.c.nrows();
        let mut out = DMatrix::zeros(n, n);
        for (k, e) in &blk.a {
            let zk = z[*k];
            if zk != 0.0 {
                for &(r, c, v) in e {
                    out[(r, c)] += zk * v;
                }
            }
        }
        out
    }

    fn a_op(&self, mats: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.red.m);
        for (j, blk) in self.red.blocks.iter().enumerate() {
            for (k, e) in &blk.a {
                out[*k] += apply(e, &mats[j]);
            }
        }
        out
    }

    fn direction(
        &self,
        schur: &Schur,
        sinv: &[DMatrix<f64>],
        rd: &[DMatrix<f64>],
        target: Option<&[DMatrix<f64>]>,
    ) -> Direction {
        let nb = self.red.blocks.len();
        let t_sinv: Vec<Option<DMatrix<f64>>> = (0..nb).map(|j| target.map(|t| &t[j] * &sinv[j])).collect();
        let k: Vec<DMatrix<f64>> = (0..nb).map(|j| &self.x[j] * &rd[j] * &sinv[j]).collect();
        let mut rhs = DVector::from_vec(self.red.b.clone());
        rhs += self.a_op(&k);
        if target.is_some() {
            let ts: Vec<DMatrix<f64>> = t_sinv.iter().map(|m| m.clone().unwrap()).collect();
            rhs -= self.a_op(&ts);
        }
        let dz = schur.solve(&rhs);
        let mut dx = Vec::with_capacity(nb);
        let mut ds = Vec::with_capacity(nb);
        for j in 0..nb {
            let dsj = &rd[j] - self.a_star(&dz, j);
            let mut d = -&self.x[j] - &self.x[j] * &dsj * &sinv[j];
            if let Some(ts) = &t_sinv[j] {
                d += ts;
            }
            dx.push(sym(&d));
            ds.push(dsj);
        }
        Direction { dx, dz, ds }
    }

    fn steps(&self, d: &Direction) -> Result<(f64, f64)> {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for j in 0..self.x.len() {
            ap = ap.min(max_step(&self.x[j], &d.dx[j])?);
            ad = ad.min(max_step(&self.s[j], &d.ds[j])?);
        }
        Ok((ap, ad))
    }
}

pub fn solve_with(p: &ConicProblem, opts: &SolverOptions) -> Result<SolveReport> {
    p.validate()?;
    let start = Instant::now();
    let psd_dim = p.total_psd_dim();
    if !opts.allow_large && psd_dim > opts.max_psd_dim {
        return Err(Error::SizeBudget(format!("total PSD dimension {psd_dim} exceeds {}", opts.max_psd_dim)));
    }
    let red_map = Reduction::new(p)?;
    if !opts.allow_large && red_map.free.len() > opts.max_vars {
        return Err(Error::SizeBudget(format!("{} free variables exceed {}", red_map.free.len(), opts.max_vars)));
    }
    let red = reduce(p, &red_map);
    let tol = opts.tol;
    let nb = red.blocks.len();
    let n_total: usize = red.blocks.iter().map(|b| b.c.nrows()).sum();
    let bnorm = red.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = red.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt();

    let mut x = Vec::with_capacity(nb);
    let mut s = Vec::with_capacity(nb);
    for blk in &red.blocks {
        let n = blk.c.nrows() as f64;
        let mut xi = 10.0f64.max(n.sqrt());
        let mut eta = xi.max(blk.c.norm());
        for (k, e) in &blk.a {
            let an: f64 = e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
            xi = xi.max(n * (1.0 + red.b[*k].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(DMatrix::identity(blk.c.nrows(), blk.c.nrows()) * xi);
        s.push(DMatrix::identity(blk.c.nrows(), blk.c.nrows()) * eta);
    }
    let mut st = State { red: &red, x, s, z: DVector::zeros(red.m) };

    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut stalled = 0;
    let (mut rel_p, mut rel_d, mut rel_gap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut dobj = 0.0;
    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ax = st.a_op(&st.x);
        let rp: DVector<f64> = DVector::from_vec(red.b.clone()) - &ax;
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|j| &red.blocks[j].c - st.a_star(&st.z, j) - &st.s[j]).collect();
        let pobj = red.b.iter().zip(st.z.iter()).map(|(b, z)| b * z).sum::<f64>() + red.b0;
        let cx: f64 = (0..nb).map(|j| inner(&red.blocks[j].c, &st.x[j])).sum();
        dobj = cx + red.b0;
        let xs: f64 = (0..nb).map(|j| inner(&st.x[j], &st.s[j])).sum();
        let mu = xs / n_total as f64;
        rel_p = rp.norm() / (1.0 + bnorm);
        rel_d = rd.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt() / (1.0 + cnorm);
        rel_gap = (dobj - pobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let certified = dobj + p.var_bound * rp.iter().map(|v| v.abs()).sum::<f64>();
        history.push(IterationRecord {
            primal_objective: p.sense.sign() * pobj,
            dual_objective: p.sense.sign() * dobj,
            certified: p.sense.sign() * certified,
            primal_residual: rel_d,
            dual_residual: rel_p,
            mu,
        });
        if rel_p <= tol && rel_d <= tol && rel_gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        let trx: f64 = st.x.iter().map(|m| m.trace()).sum();
        if trx > 1e8 * (1.0 + bnorm) && cx / trx < -tol && ax.norm() / trx <= 1e-6 {
            status = SolveStatus::PrimalInfeasible;
            break;
        }
        let zn = st.z.norm();
        if zn > 1e8 * (1.0 + cnorm) && (pobj - red.b0) / zn > tol {
            status = SolveStatus::DualInfeasible;
            break;
        }
        if iter == opts.max_iter || stalled >= 5 {
            break;
        }

        let sinv: Vec<DMatrix<f64>> = st.s.iter().map(spd_inverse).collect::<Result<_>>()?;
        let schur = Schur::build(&red, &st.x, &sinv)?;

        let pred = st.direction(&schur, &sinv, &rd, None);
        let (ap, ad) = st.steps(&pred)?;
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff: f64 = (0..nb)
            .map(|j| inner(&(&st.x[j] + &pred.dx[j] * ap), &(&st.s[j] + &pred.ds[j] * ad)))
            .sum::<f64>()
            / n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let target: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| {
                let n = st.x[j].nrows();
                DMatrix::identity(n, n) * (sigma * mu) - &pred.dx[j] * &pred.ds[j]
            })
            .collect();
        let corr = st.direction(&schur, &sinv, &rd, Some(&target));
        let (sp, sd) = st.steps(&corr)?;
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let (ap, ad) = ((gamma * sp).min(1.0), (gamma * sd).min(1.0));
        stalled = if ap.max(ad) < 1e-8 { stalled + 1 } else { 0 };
        for j in 0..nb {
            st.x[j] = sym(&(&st.x[j] + &corr.dx[j] * ap));
            st.s[j] = sym(&(&st.s[j] + &corr.ds[j] * ad));
        }
        st.z += &corr.dz * ad;
    }

    let z: Vec<f64> = st.z.iter().copied().collect();
    let xfull = red_map.expand(&z);
    let dual = dual_in_original(p, &red_map, &st.x);
    let certified_bound = if status == SolveStatus::Optimal { Some(implied_bound(p, &dual)?.bound) } else { None };
    let sgn = p.sense.sign();
    Ok(SolveReport {
        status,
        primal_objective: p.objective.eval(&xfull),
        dual_objective: sgn * dobj,
        gap: rel_gap,
        primal_residual: rel_d,
        dual_residual: rel_p,
        certified_bound,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        tol,
        x: xfull,
        dual,
        history,
    })
}
