//! Moment relaxations of the cross-talk programs.
//!
//! Three programs are built here, all over moments `<w>` of words in the
//! measurement operators:
//!
//! * [`randomness_program`]: the largest `P(ab|xy)` compatible with a Bell
//!   value and a cross-talk budget;
//! * [`min_chi_program`]: the smallest cross-talk compatible with an observed
//!   behavior;
//! * [`max_bell_given_chi`]: the largest Bell value reachable with a given
//!   cross-talk budget.
//!
//! With positive cross-talk the collective elements are independent letters
//! tied to the local projectors through localizing blocks for
//! `Z ⪰ 0` and `χ·1 ± (Z - XY) ⪰ 0`. At `χ = 0` the collective elements are
//! replaced by `X Y`, which yields the standard hierarchy over local
//! projectors and keeps the feasible set full-dimensional.
//!
//! Every program also bounds each moment by one in absolute value (diagonal
//! blocks `1 - <u†u> ≥ 0` and `[[1, m], [m, 1]] ⪰ 0` for moments outside the
//! moment matrix), which is what the dual certificate relies on.

pub mod words;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use words::{canonicalize, collective, product, proj_a, proj_b, Monomial, OperatorVariable, Polynomial};

use crate::bell::{signaling_delta, BellExpression, Behavior, Scenario};
use crate::bounds::{GridCurve, P_FLOOR, TSIRELSON};
use crate::error::{Error, Result};
use crate::lp::{BellConstraint, TargetValue};
use crate::sdp::{self, AffineExpr, BlockEntry, ConicBlock, ConicProblem, Sense, SolveReport, SolveStatus, SolverOptions};

/// Named rungs of the relaxation hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    /// Identity and single letters.
    #[serde(rename = "l1")]
    L1,
    /// Adds `X_x Y_y`.
    #[serde(rename = "l1+xy")]
    L1XY,
    /// Adds `Z_{ab|xy} X_x` and `Z_{ab|xy} Y_y`; localizing blocks grow to
    /// the words `{1, X_x, Y_y}` of their own setting.
    #[serde(rename = "l1+xy+zw")]
    L1XYZW,
    /// Adds `X_0 X_1`, `X_1 X_0`, `Y_0 Y_1`, `Y_1 Y_0`.
    #[serde(rename = "l2r")]
    L2Restricted,
    /// All words of length two.
    #[serde(rename = "l2")]
    L2,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::L1, Level::L1XY, Level::L1XYZW, Level::L2Restricted, Level::L2];

    pub fn name(self) -> &'static str {
        match self {
            Level::L1 => "l1",
            Level::L1XY => "l1+xy",
            Level::L1XYZW => "l1+xy+zw",
            Level::L2Restricted => "l2r",
            Level::L2 => "l2",
        }
    }

    fn deep_localizing(self) -> bool {
        self >= Level::L1XYZW
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Level::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown level '{s}' (expected l1, l1+xy, l1+xy+zw, l2r, l2)")))
    }
}

/// Level descriptor plus optional extra basis words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialSet {
    pub level: Level,
    pub extra: Vec<Monomial>,
}

impl From<Level> for MonomialSet {
    fn from(level: Level) -> Self {
        MonomialSet { level, extra: Vec::new() }
    }
}

fn xa(x: usize) -> OperatorVariable {
    OperatorVariable::ProjectorA { x: x as u8 }
}

fn yb(y: usize) -> OperatorVariable {
    OperatorVariable::ProjectorB { y: y as u8 }
}

fn zc(a: usize, b: usize, x: usize, y: usize) -> OperatorVariable {
    OperatorVariable::Collective { a: a as u8, b: b as u8, x: x as u8, y: y as u8 }
}

fn collective_letters() -> Vec<OperatorVariable> {
    let mut out = Vec::with_capacity(12);
    for x in 0..2 {
        for y in 0..2 {
            for (a, b) in [(0, 0), (0, 1), (1, 0)] {
                out.push(zc(a, b, x, y));
            }
        }
    }
    out
}

impl MonomialSet {
    pub fn new(level: Level) -> Self {
        level.into()
    }

    /// Basis words, canonical and without repetition, identity first. With
    /// `collective = false` only local letters are used.
    pub fn basis(&self, collective: bool) -> Vec<Monomial> {
        let local = [xa(0), xa(1), yb(0), yb(1)];
        let mut letters: Vec<OperatorVariable> = local.to_vec();
        if collective {
            letters.extend(collective_letters());
        }
        let mut words: Vec<Vec<OperatorVariable>> = vec![vec![]];
        words.extend(letters.iter().map(|&l| vec![l]));
        if self.level >= Level::L1XY {
            for x in 0..2 {
                for y in 0..2 {
                    words.push(vec![xa(x), yb(y)]);
                }
            }
        }
        if self.level >= Level::L1XYZW && collective {
            for z in collective_letters() {
                if let OperatorVariable::Collective { x, y, .. } = z {
                    words.push(vec![z, xa(x as usize)]);
                    words.push(vec![z, yb(y as usize)]);
                }
            }
        }
        if self.level >= Level::L2Restricted {
            words.extend([vec![xa(0), xa(1)], vec![xa(1), xa(0)], vec![yb(0), yb(1)], vec![yb(1), yb(0)]]);
        }
        if self.level >= Level::L2 {
            for &l1 in &letters {
                for &l2 in &letters {
                    words.push(vec![l1, l2]);
                }
            }
        }
        words.extend(self.extra.iter().map(|m| m.0.clone()));
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for w in words {
            let c = canonicalize(&w);
            if (collective || c.0.iter().all(|l| !matches!(l, OperatorVariable::Collective { .. }))) && seen.insert(c.clone()) {
                out.push(c);
            }
        }
        out
    }

    /// Words used for the localizing blocks attached to setting `(x, y)`.
    pub fn localizing_words(&self, x: usize, y: usize) -> Vec<Monomial> {
        if self.level.deep_localizing() {
            vec![Monomial::identity(), Monomial::letter(xa(x)), Monomial::letter(yb(y))]
        } else {
            vec![Monomial::identity()]
        }
    }
}

/// `P(ab|xy)` as an operator: the collective element, or `X Y` when there is
/// no cross-talk.
fn event(a: usize, b: usize, x: usize, y: usize, with_collective: bool) -> Polynomial {
    if with_collective {
        collective(a, b, x, y)
    } else {
        product(a, b, x, y)
    }
}

fn tuples() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    Scenario::CHSH.tuples()
}

/// Self-describing summary of one PSD block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub label: String,
    pub dim: usize,
    /// The polynomial the block localizes, when it is a localizing block.
    pub polynomial: Option<String>,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProgramSpec {
    Randomness { bell_value: f64, chi: f64, target: [usize; 4], mode: BellConstraint },
    MinChi { behavior: Vec<f64>, eps_pin: f64 },
    MaxBell { chi: f64 },
    PinViolation { behavior: Vec<f64>, chi: f64, eps_pin: f64 },
}

/// A built relaxation: the conic problem plus the bookkeeping needed to read
/// it. Variables are moments labelled by their canonical word, plus `chi`
/// when cross-talk is a decision variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationProblem {
    pub program: ProgramSpec,
    pub level: Level,
    pub basis: Vec<String>,
    pub blocks: Vec<BlockInfo>,
    pub chi_variable: Option<usize>,
    pub conic: ConicProblem,
}

impl RelaxationProblem {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: RelaxationProblem = serde_json::from_str(text)?;
        p.conic.validate()?;
        Ok(p)
    }

    pub fn num_moments(&self) -> usize {
        self.conic.num_vars - usize::from(self.chi_variable.is_some())
    }
}

enum ChiSpec {
    Fixed(f64),
    Variable(usize),
}

#[derive(Default)]
struct Builder {
    index: BTreeMap<Monomial, usize>,
    labels: Vec<String>,
    blocks: Vec<ConicBlock>,
    infos: Vec<BlockInfo>,
    equalities: Vec<AffineExpr>,
}

impl Builder {
    fn new_var(&mut self, label: &str) -> usize {
        self.labels.push(label.to_string());
        self.labels.len() - 1
    }

    /// `<p>` as an affine expression in the moment variables.
    fn moment(&mut self, p: &Polynomial) -> AffineExpr {
        let mut e = AffineExpr::default();
        for (m, c) in &p.0 {
            if m.is_identity() {
                e.constant += c;
                continue;
            }
            let key = m.moment_key();
            let id = match self.index.get(&key) {
                Some(&id) => id,
                None => {
                    let id = self.new_var(&key.to_string());
                    self.index.insert(key, id);
                    id
                }
            };
            e.terms.push((id, *c));
        }
        e.normalized()
    }

    /// Block with entries `<u_i† q u_j>`, plus `extra` times the plain
    /// moment matrix of `words` when given.
    fn localizing(&mut self, label: String, words: &[Monomial], q: &Polynomial, poly_label: Option<String>) {
        let n = words.len();
        let mut entries = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            let left = words[i].adjoint();
            for j in i..n {
                let expr = self.moment(&q.left_mul(&left).right_mul(&words[j]));
                if !expr.terms.is_empty() || expr.constant != 0.0 {
                    entries.push(BlockEntry { row: i, col: j, expr });
                }
            }
        }
        self.infos.push(BlockInfo {
            label: label.clone(),
            dim: n,
            polynomial: poly_label,
            words: words.iter().map(|w| w.to_string()).collect(),
        });
        self.blocks.push(ConicBlock { dim: n, label, entries });
    }

    fn scalar(&mut self, label: String, expr: AffineExpr) {
        self.infos.push(BlockInfo { label: label.clone(), dim: 1, polynomial: None, words: vec![] });
        self.blocks.push(ConicBlock::scalar(label, expr));
    }

    /// Moment matrix on `basis`, then the diagonal bounds `<u†u> ≤ 1`.
    fn moment_matrix(&mut self, basis: &[Monomial]) -> usize {
        self.localizing("moment".into(), basis, &Polynomial::one(), None);
        let in_matrix = self.labels.len();
        for u in basis.iter().filter(|u| !u.is_identity()) {
            let e = self.moment(&Polynomial::monomial(u.adjoint().concat(u), 1.0));
            self.scalar(format!("norm {u}"), AffineExpr::constant(1.0).add(&e.scaled(-1.0)));
        }
        in_matrix
    }

    /// `|m| ≤ 1` for every moment created after the moment matrix.
    fn box_outside(&mut self, first_outside: usize) {
        let ids: Vec<usize> = (first_outside..self.labels.len()).filter(|id| self.index.values().any(|v| v == id)).collect();
        for id in ids {
            let label = format!("box {}", self.labels[id]);
            self.infos.push(BlockInfo { label: label.clone(), dim: 2, polynomial: None, words: vec![] });
            self.blocks.push(ConicBlock {
                dim: 2,
                label,
                entries: vec![
                    BlockEntry { row: 0, col: 0, expr: AffineExpr::constant(1.0) },
                    BlockEntry { row: 0, col: 1, expr: AffineExpr::var(id) },
                    BlockEntry { row: 1, col: 1, expr: AffineExpr::constant(1.0) },
                ],
            });
        }
    }

    /// Moment matrix and cross-talk localizing blocks over collective letters.
    fn collective_core(&mut self, set: &MonomialSet, chi: ChiSpec) -> usize {
        let basis = set.basis(true);
        let in_matrix = self.moment_matrix(&basis);
        for (a, b, x, y) in tuples() {
            let z = collective(a, b, x, y);
            let diff = z.sub(&product(a, b, x, y));
            let words = set.localizing_words(x, y);
            self.localizing(format!("pos Z{a}{b}|{x}{y}"), &words, &z, Some(z.to_string()));
            match chi {
                ChiSpec::Fixed(c) => {
                    for (sign, tag) in [(1.0, "+"), (-1.0, "-")] {
                        let q = Polynomial::one().scale(c).add(&diff.scale(sign));
                        self.localizing(format!("ct{tag} {a}{b}|{x}{y}"), &words, &q, Some(q.to_string()));
                    }
                }
                ChiSpec::Variable(id) => {
                    let d = self.moment(&diff);
                    for (sign, tag) in [(1.0, "+"), (-1.0, "-")] {
                        let expr = AffineExpr::var(id).add(&d.scaled(sign));
                        self.scalar(format!("ct{tag} {a}{b}|{x}{y}"), expr);
                    }
                }
            }
        }
        in_matrix
    }

    fn finish(
        mut self,
        in_matrix: usize,
        program: ProgramSpec,
        set: &MonomialSet,
        basis: Vec<Monomial>,
        sense: Sense,
        objective: AffineExpr,
        chi_variable: Option<usize>,
    ) -> RelaxationProblem {
        self.box_outside(in_matrix);
        let conic = ConicProblem {
            num_vars: self.labels.len(),
            var_labels: self.labels,
            sense,
            objective,
            equalities: self.equalities,
            blocks: self.blocks,
            var_bound: 1.0,
        };
        RelaxationProblem {
            program,
            level: set.level,
            basis: basis.iter().map(|w| w.to_string()).collect(),
            blocks: self.infos,
            chi_variable,
            conic,
        }
    }
}

fn check_chsh(expr: &BellExpression) -> Result<()> {
    if expr.scenario() != Scenario::CHSH {
        return Err(Error::InvalidArgument("relaxations are built for two inputs and two outputs per party".into()));
    }
    Ok(())
}

fn check_chi(chi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::InvalidArgument(format!("chi = {chi} outside [0,1]")));
    }
    Ok(())
}

fn bell_polynomial(expr: &BellExpression, with_collective: bool) -> Polynomial {
    let mut p = Polynomial::zero();
    for (a, b, x, y) in tuples() {
        let c = expr.coeff(a, b, x, y);
        if c != 0.0 {
            p = p.add(&event(a, b, x, y, with_collective).scale(c));
        }
    }
    p
}

/// Core shared by the Bell-value programs: either the collective relaxation
/// at fixed `chi > 0` or the local hierarchy at `chi = 0`.
fn fixed_chi_core(b: &mut Builder, set: &MonomialSet, chi: f64) -> (usize, Vec<Monomial>, bool) {
    if chi > 0.0 {
        let in_matrix = b.collective_core(set, ChiSpec::Fixed(chi));
        (in_matrix, set.basis(true), true)
    } else {
        let basis = set.basis(false);
        let in_matrix = b.moment_matrix(&basis);
        (in_matrix, basis, false)
    }
}

/// Relaxation of `max P(ab|xy)` subject to Bell value `I` and cross-talk `χ`.
pub fn randomness_program(
    expr: &BellExpression,
    bell_value: f64,
    chi: f64,
    target: (usize, usize, usize, usize),
    set: &MonomialSet,
    mode: BellConstraint,
) -> Result<RelaxationProblem> {
    check_chsh(expr)?;
    check_chi(chi)?;
    if !(-4.0..=4.0).contains(&bell_value) {
        return Err(Error::InvalidArgument(format!("I = {bell_value} outside [-4,4]")));
    }
    let (a, b, x, y) = target;
    if a > 1 || b > 1 || x > 1 || y > 1 {
        return Err(Error::InvalidArgument("target indices must be bits".into()));
    }
    let mut bld = Builder::default();
    let (in_matrix, basis, with_collective) = fixed_chi_core(&mut bld, set, chi);
    let bell = bld.moment(&bell_polynomial(expr, with_collective));
    let shifted = bell.add(&AffineExpr::constant(-bell_value));
    match mode {
        BellConstraint::Equal => bld.equalities.push(shifted),
        BellConstraint::AtLeast => bld.scalar("bell ≥ I".into(), shifted),
    }
    let objective = bld.moment(&event(a, b, x, y, with_collective));
    let program = ProgramSpec::Randomness { bell_value, chi, target: [a, b, x, y], mode };
    Ok(bld.finish(in_matrix, program, set, basis, Sense::Maximize, objective, None))
}

/// Relaxation of the largest Bell value compatible with cross-talk `χ`.
pub fn max_bell_given_chi(expr: &BellExpression, chi: f64, set: &MonomialSet) -> Result<RelaxationProblem> {
    check_chsh(expr)?;
    check_chi(chi)?;
    let mut bld = Builder::default();
    let (in_matrix, basis, with_collective) = fixed_chi_core(&mut bld, set, chi);
    let objective = bld.moment(&bell_polynomial(expr, with_collective));
    Ok(bld.finish(in_matrix, ProgramSpec::MaxBell { chi }, set, basis, Sense::Maximize, objective, None))
}

/// Default band for pinned probabilities.
pub const DEFAULT_EPS_PIN: f64 = 1e-6;

/// Relaxation of `min χ` over models reproducing `p` to within `eps_pin`.
///
/// `χ` is a decision variable, so the cross-talk blocks are kept scalar
/// (`χ ± <Z - XY> ≥ 0`), which keeps the program linear in `χ`; the
/// positivity blocks `Z ⪰ 0` follow the level's localizing words.
pub fn min_chi_program(p: &Behavior, set: &MonomialSet, eps_pin: f64) -> Result<RelaxationProblem> {
    if p.scenario() != Scenario::CHSH {
        return Err(Error::InvalidArgument("relaxations are built for two inputs and two outputs per party".into()));
    }
    if !(eps_pin >= 0.0 && eps_pin < 0.5) {
        return Err(Error::InvalidArgument(format!("eps_pin = {eps_pin} outside [0, 0.5)")));
    }
    let mut bld = Builder::default();
    let chi = bld.new_var("chi");
    let in_matrix = bld.collective_core(set, ChiSpec::Variable(chi));
    for (a, b, x, y) in tuples() {
        let m = bld.moment(&collective(a, b, x, y));
        let obs = p.joint(a, b, x, y);
        for (sign, tag) in [(1.0, "+"), (-1.0, "-")] {
            let e = AffineExpr::constant(eps_pin).add(&m.add(&AffineExpr::constant(-obs)).scaled(sign));
            bld.scalar(format!("pin{tag} {a}{b}|{x}{y}"), e);
        }
    }
    bld.scalar("chi ≥ 0".into(), AffineExpr::var(chi));
    bld.scalar("chi ≤ 1".into(), AffineExpr { constant: 1.0, terms: vec![(chi, -1.0)] });
    let program = ProgramSpec::MinChi { behavior: p.as_slice().to_vec(), eps_pin };
    let basis = set.basis(true);
    Ok(bld.finish(in_matrix, program, set, basis, Sense::Minimize, AffineExpr::var(chi), Some(chi)))
}

/// At fixed `χ`, the smallest widening `s` of the pin band for which `p` is
/// reproducible: minimizes `s` subject to `|<Z> - P| ≤ eps_pin + s`. The
/// cross-talk blocks use the level's full localizing words.
pub fn pin_violation_program(p: &Behavior, chi: f64, set: &MonomialSet, eps_pin: f64) -> Result<RelaxationProblem> {
    if p.scenario() != Scenario::CHSH {
        return Err(Error::InvalidArgument("relaxations are built for two inputs and two outputs per party".into()));
    }
    check_chi(chi)?;
    if chi == 0.0 {
        return Err(Error::InvalidArgument("pin violation needs chi > 0".into()));
    }
    let mut bld = Builder::default();
    let slack = bld.new_var("slack");
    let in_matrix = bld.collective_core(set, ChiSpec::Fixed(chi));
    for (a, b, x, y) in tuples() {
        let m = bld.moment(&collective(a, b, x, y));
        let obs = p.joint(a, b, x, y);
        for (sign, tag) in [(1.0, "+"), (-1.0, "-")] {
            let e = AffineExpr { constant: eps_pin, terms: vec![(slack, 1.0)] }
                .add(&m.add(&AffineExpr::constant(-obs)).scaled(sign));
            bld.scalar(format!("pin{tag} {a}{b}|{x}{y}"), e);
        }
    }
    bld.scalar("slack ≥ -1".into(), AffineExpr { constant: 1.0, terms: vec![(slack, 1.0)] });
    bld.scalar("slack ≤ 1".into(), AffineExpr { constant: 1.0, terms: vec![(slack, -1.0)] });
    let program = ProgramSpec::PinViolation { behavior: p.as_slice().to_vec(), chi, eps_pin };
    let basis = set.basis(true);
    Ok(bld.finish(in_matrix, program, set, basis, Sense::Minimize, AffineExpr::var(slack), None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiBracket {
    /// Every `χ` below this is certified incompatible with the behavior.
    pub lower: f64,
    /// The relaxation is feasible at this `χ` (not certified).
    pub upper: f64,
    pub solves: usize,
}

/// Minimal cross-talk with full-depth localizing blocks, found by bisection
/// on `χ` with [`pin_violation_program`]. The starting bracket `[lo, hi]`
/// must have `lo` a known lower bound (e.g. from [`min_chi_program`]).
pub fn min_chi_bisection(
    p: &Behavior,
    set: &MonomialSet,
    eps_pin: f64,
    (lo, hi): (f64, f64),
    rel_tol: f64,
    opts: &SolverOptions,
) -> Result<ChiBracket> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("bad bisection bracket [{lo}, {hi}]")));
    }
    let (mut lower, mut upper) = (lo, hi);
    let mut solves = 0;
    while upper - lower > rel_tol * upper && solves < 60 {
        let mid = 0.5 * (lower + upper);
        let sol = solve_relaxation(&pin_violation_program(p, mid, set, eps_pin)?, opts)?;
        solves += 1;
        if sol.bound > 0.0 {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    Ok(ChiBracket { lower, upper, solves })
}

/// `δ / 2N`: the cross-talk every model of `p` needs at least.
pub fn chi_lower_bound_simple(p: &Behavior) -> f64 {
    signaling_delta(p).value() / (2.0 * p.scenario().outputs as f64)
}

#[derive(Debug, Clone)]
pub struct RelaxationSolution {
    /// Certified side: upper bound when maximizing, lower bound when minimizing.
    pub bound: f64,
    pub primal: f64,
    pub report: SolveReport,
}

pub fn solve_relaxation(p: &RelaxationProblem, opts: &SolverOptions) -> Result<RelaxationSolution> {
    let report = sdp::solve_with(&p.conic, opts)?;
    match (report.status, report.certified_bound) {
        (SolveStatus::Optimal, Some(bound)) => Ok(RelaxationSolution { bound, primal: report.primal_objective, report }),
        (status, _) => Err(Error::Solver(format!(
            "relaxation not solved to optimality ({status:?}, gap {:.2e}, residuals {:.2e}/{:.2e})",
            report.gap, report.primal_residual, report.dual_residual
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct PStarSdp {
    /// Max over outcome pairs of the certified bounds, clipped to `[1/4, 1]`.
    pub value: f64,
    pub table: Vec<TargetValue>,
    pub solutions: Vec<RelaxationSolution>,
}

/// Certified bound on `max_ab P(ab|xy)` at Bell value `I` and cross-talk `χ`.
#[allow(clippy::too_many_arguments)]
pub fn p_star_sdp(
    expr: &BellExpression,
    bell_value: f64,
    chi: f64,
    setting: (usize, usize),
    set: &MonomialSet,
    mode: BellConstraint,
    opts: &SolverOptions,
) -> Result<PStarSdp> {
    let (x, y) = setting;
    let mut table = Vec::with_capacity(4);
    let mut solutions = Vec::with_capacity(4);
    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let prob = randomness_program(expr, bell_value, chi, (a, b, x, y), set, mode)?;
        let sol = solve_relaxation(&prob, opts)?;
        table.push(TargetValue { a, b, x, y, value: sol.bound });
        solutions.push(sol);
    }
    let value = table.iter().map(|t| t.value).fold(f64::NEG_INFINITY, f64::max).clamp(P_FLOOR, 1.0);
    Ok(PStarSdp { value, table, solutions })
}

/// Certified `P*(I, 0)` tabulated at `steps + 1` points of `[2, 2√2]`.
///
/// The equality-constrained program has no interior at `2√2`, so the last
/// point is solved just below it and its value reused at `2√2` (valid
/// because the curve is nonincreasing).
pub fn zero_curve_grid(expr: &BellExpression, set: &MonomialSet, steps: usize, opts: &SolverOptions) -> Result<GridCurve> {
    if steps < 1 {
        return Err(Error::InvalidArgument("zero curve needs at least one step".into()));
    }
    let mut points = vec![(2.0, 1.0)];
    let mut last = 1.0;
    for k in 1..=steps {
        let i = if k == steps { TSIRELSON - 1e-7 } else { 2.0 + (TSIRELSON - 2.0) * k as f64 / steps as f64 };
        last = p_star_sdp(expr, i, 0.0, (0, 0), set, BellConstraint::Equal, opts)?.value;
        points.push((i, last));
    }
    points.push((TSIRELSON, last));
    GridCurve::from_points(points)
}
