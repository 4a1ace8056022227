//! Two-qubit device models with cross-talk: trapped ions whose setting
//! rotations leak onto the neighbour, and Josephson phase qubits whose
//! read-out tunnelling drags the partner along.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{BellExpression, Behavior, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{herm_eigh, herm_eigs, kron, max_abs_eig, CMatrix, C64};

/// Point `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>` on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    /// Equatorial direction used by the CHSH settings: `θ = π/2`, `φ = ±π/4`.
    pub fn chsh_setting(setting: usize) -> Self {
        BlochAngles { theta: FRAC_PI_2, phi: sign(setting) * FRAC_PI_4 }
    }

    /// Outcome-`a` state: the point itself for `a = 0`, its antipode for `a = 1`.
    pub fn ket(&self, a: usize) -> DVector<C64> {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        let e = C64::from_polar(1.0, self.phi);
        if a == 0 {
            DVector::from_vec(vec![C64::new(c, 0.0), e * s])
        } else {
            DVector::from_vec(vec![C64::new(s, 0.0), -e * c])
        }
    }

    pub fn projector(&self, a: usize) -> CMatrix {
        CMatrix::outer(&self.ket(a))
    }
}

fn sign(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// State plus local and collective POVMs on two qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub rho: CMatrix,
    /// `local_a[x][a]`.
    pub local_a: [[CMatrix; 2]; 2],
    /// `local_b[y][b]`.
    pub local_b: [[CMatrix; 2]; 2],
    /// Indexed like [`Scenario::index`] for the CHSH scenario.
    pub collective: Vec<CMatrix>,
}

impl DeviceModel {
    /// Collective POVMs equal to the local products.
    pub fn product(rho: CMatrix, local_a: [[CMatrix; 2]; 2], local_b: [[CMatrix; 2]; 2]) -> Self {
        let s = Scenario::CHSH;
        let collective = s.tuples().map(|(a, b, x, y)| kron(&local_a[x][a], &local_b[y][b])).collect();
        DeviceModel { rho, local_a, local_b, collective }
    }

    pub fn collective(&self, a: usize, b: usize, x: usize, y: usize) -> &CMatrix {
        &self.collective[Scenario::CHSH.index(a, b, x, y)]
    }

    /// Checks state normalization, positivity and POVM completeness.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-10;
        if (self.rho.trace().re - 1.0).abs() > tol || herm_eigs(&self.rho)?[0] < -tol {
            return Err(Error::InvalidArgument("model state is not a density matrix".into()));
        }
        for x in 0..2 {
            for y in 0..2 {
                let mut sum = CMatrix::zeros(4);
                for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let p = self.collective(a, b, x, y);
                    if herm_eigs(p)?[0] < -tol {
                        return Err(Error::InvalidArgument(format!("collective element {a}{b}|{x}{y} is not positive")));
                    }
                    sum = sum.add(p);
                }
                if max_abs_eig(&sum.sub(&CMatrix::identity(4)))? > tol {
                    return Err(Error::InvalidArgument(format!("collective POVM for setting {x}{y} is incomplete")));
                }
            }
        }
        for locals in [&self.local_a, &self.local_b] {
            for povm in locals.iter() {
                if max_abs_eig(&povm[0].add(&povm[1]).sub(&CMatrix::identity(2)))? > tol {
                    return Err(Error::InvalidArgument("local POVM is incomplete".into()));
                }
            }
        }
        Ok(())
    }
}

/// `P(ab|xy) = Tr(ρ Π_ab|xy)`.
pub fn born_behavior(m: &DeviceModel) -> Result<Behavior> {
    let s = Scenario::CHSH;
    let p = s.tuples().map(|(a, b, x, y)| m.collective(a, b, x, y).expectation(&m.rho)).collect();
    Behavior::from_empirical(s, p)
}

fn local_projectors(angles: &[BlochAngles; 2]) -> [[CMatrix; 2]; 2] {
    [
        [angles[0].projector(0), angles[0].projector(1)],
        [angles[1].projector(0), angles[1].projector(1)],
    ]
}

/// Principal eigenvector of the CHSH Bell operator `Σ c_abxy Π_a|x ⊗ Π_b|y`,
/// with its phase fixed so the largest component is real and positive.
pub fn chsh_state(local_a: &[[CMatrix; 2]; 2], local_b: &[[CMatrix; 2]; 2]) -> Result<CMatrix> {
    let chsh = BellExpression::chsh();
    let mut op = CMatrix::zeros(4);
    for (a, b, x, y) in Scenario::CHSH.tuples() {
        op = op.add(&kron(&local_a[x][a], &local_b[y][b]).scale(chsh.coeff(a, b, x, y)));
    }
    let (_, vecs) = herm_eigh(&op)?;
    let v = vecs.column(3).into_owned();
    let mut k = 0;
    for i in 1..4 {
        if v[i].norm() > v[k].norm() + 1e-12 {
            k = i;
        }
    }
    let phase = v[k].conj() / v[k].norm();
    Ok(CMatrix::outer(&(v * phase)))
}

/// Maximally entangled state measured with the CHSH-optimal projectors and no
/// cross-talk; reaches `I = 2√2`.
pub fn ideal_model() -> Result<DeviceModel> {
    let locals = ideal_locals();
    let rho = chsh_state(&locals, &locals)?;
    Ok(DeviceModel::product(rho, locals.clone(), locals))
}

/// `|00>` read out in the computational basis for every setting: both
/// parties always answer 0 and `I = 2`.
pub fn deterministic_model() -> DeviceModel {
    let z = BlochAngles { theta: 0.0, phi: 0.0 };
    let locals = local_projectors(&[z, z]);
    let ket = z.ket(0).kronecker(&z.ket(0));
    DeviceModel::product(CMatrix::outer(&ket), locals.clone(), locals)
}

/// Leakage `ε` of a setting rotation onto the neighbouring ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonParams {
    pub epsilon: f64,
}

impl IonParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside [0,1)")));
        }
        Ok(IonParams { epsilon })
    }
}

/// Setting angles `φ_x(ε) = [(-1)^x + (-1)^y ε] π/4` and the mirror image for B.
fn ion_angles(eps: f64, x: usize, y: usize) -> (BlochAngles, BlochAngles) {
    let pa = (sign(x) + sign(y) * eps) * FRAC_PI_4;
    let pb = (sign(y) + sign(x) * eps) * FRAC_PI_4;
    (BlochAngles { theta: FRAC_PI_2, phi: pa }, BlochAngles { theta: FRAC_PI_2, phi: pb })
}

fn ideal_locals() -> [[CMatrix; 2]; 2] {
    local_projectors(&[BlochAngles::chsh_setting(0), BlochAngles::chsh_setting(1)])
}

/// `|ξ_abxy(ε)>`, the state the collective element projects onto.
fn ion_ket(eps: f64, a: usize, b: usize, x: usize, y: usize) -> DVector<C64> {
    let (ka, kb) = ion_angles(eps, x, y);
    ka.ket(a).kronecker(&kb.ket(b))
}

pub fn ion_model(params: IonParams) -> Result<DeviceModel> {
    let locals = ideal_locals();
    let rho = chsh_state(&locals, &locals)?;
    let collective = Scenario::CHSH
        .tuples()
        .map(|(a, b, x, y)| CMatrix::outer(&ion_ket(params.epsilon, a, b, x, y)))
        .collect();
    Ok(DeviceModel { rho, local_a: locals.clone(), local_b: locals, collective })
}

/// Largest `|λ|` over the 16 differences `|ξ_abxy(ε)><ξ| - |ψ_abxy><ψ|`.
pub fn ion_chi_bound(params: IonParams) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, b, x, y) in Scenario::CHSH.tuples() {
        let xi = CMatrix::outer(&ion_ket(params.epsilon, a, b, x, y));
        let psi = CMatrix::outer(&ion_ket(0.0, a, b, x, y));
        worst = worst.max(max_abs_eig(&xi.sub(&psi))?);
    }
    Ok(worst)
}

/// Tunnelling probabilities: `p_a` is the chance that A's outcome 1 drags B
/// from 0 to 1, `p_b` the converse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JosephsonParams {
    pub p_a: f64,
    pub p_b: f64,
}

impl JosephsonParams {
    pub fn new(p_a: f64, p_b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_a) || !(0.0..=1.0).contains(&p_b) {
            return Err(Error::InvalidArgument(format!("tunnelling probabilities ({p_a}, {p_b}) outside [0,1]")));
        }
        Ok(JosephsonParams { p_a, p_b })
    }
}

/// Measurement directions `[x = 0, x = 1]` for each party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingAngles {
    pub a: [BlochAngles; 2],
    pub b: [BlochAngles; 2],
}

impl Default for SettingAngles {
    fn default() -> Self {
        let s = [BlochAngles::chsh_setting(0), BlochAngles::chsh_setting(1)];
        SettingAngles { a: s, b: s }
    }
}

fn josephson_collective(p: JosephsonParams, la: &[CMatrix; 2], lb: &[CMatrix; 2], a: usize, b: usize) -> CMatrix {
    let k = |i: usize, j: usize| kron(&la[i], &lb[j]);
    match (a, b) {
        (0, 0) => k(0, 0),
        (0, 1) => k(0, 1).scale(1.0 - p.p_b),
        (1, 0) => k(1, 0).scale(1.0 - p.p_a),
        _ => k(1, 1).add(&k(0, 1).scale(p.p_b)).add(&k(1, 0).scale(p.p_a)),
    }
}

/// Josephson read-out model; the state is the CHSH-optimal state of the
/// ideal projectors.
pub fn josephson_model(params: JosephsonParams, angles: &SettingAngles) -> Result<DeviceModel> {
    let la = local_projectors(&angles.a);
    let lb = local_projectors(&angles.b);
    let rho = chsh_state(&la, &lb)?;
    let collective = Scenario::CHSH
        .tuples()
        .map(|(a, b, x, y)| josephson_collective(params, &la[x], &lb[y], a, b))
        .collect();
    Ok(DeviceModel { rho, local_a: la, local_b: lb, collective })
}

/// Mixing weights of the product POVMs `M_0 = (1-q)Π_0 + qΠ_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductAnsatz {
    pub q_a: f64,
    pub q_b: f64,
}

impl ProductAnsatz {
    fn element(q: f64, povm: &[CMatrix; 2], a: usize) -> CMatrix {
        let (keep, flip) = if a == 0 { (0, 1) } else { (1, 0) };
        povm[keep].scale(1.0 - q).add(&povm[flip].scale(q))
    }
}

/// Largest `|λ|` over the 16 differences `Π_ab|xy - M_a|x ⊗ M_b|y`.
pub fn josephson_chi_objective(params: JosephsonParams, angles: &SettingAngles, q: ProductAnsatz) -> Result<f64> {
    let la = local_projectors(&angles.a);
    let lb = local_projectors(&angles.b);
    let mut worst = 0.0f64;
    for (a, b, x, y) in Scenario::CHSH.tuples() {
        let pi = josephson_collective(params, &la[x], &lb[y], a, b);
        let m = kron(&ProductAnsatz::element(q.q_a, &la[x], a), &ProductAnsatz::element(q.q_b, &lb[y], b));
        worst = worst.max(max_abs_eig(&pi.sub(&m))?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JosephsonChi {
    pub chi: f64,
    pub q_a: f64,
    pub q_b: f64,
}

const GRID: usize = 101;

/// Minimizes [`josephson_chi_objective`] over `(q_A, q_B)`: a `101×101`
/// grid, then Nelder–Mead from the best cell. Any `(q_A, q_B)` gives a valid
/// upper bound on the cross-talk, so the result is one as well.
pub fn josephson_chi_bound(params: JosephsonParams) -> Result<JosephsonChi> {
    let angles = SettingAngles::default();
    let f = |q: [f64; 2]| -> f64 {
        let q = ProductAnsatz { q_a: q[0].clamp(0.0, 1.0), q_b: q[1].clamp(0.0, 1.0) };
        josephson_chi_objective(params, &angles, q).unwrap_or(f64::INFINITY)
    };
    let span = (2.0 * params.p_a.max(params.p_b)).clamp(0.01, 1.0);
    let step = span / (GRID - 1) as f64;
    let (best_val, bi, bj) = (0..GRID * GRID)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / GRID, k % GRID);
            (f([i as f64 * step, j as f64 * step]), i, j)
        })
        .reduce(|| (f64::INFINITY, usize::MAX, usize::MAX), |u, v| if (v.0, v.1, v.2) < (u.0, u.1, u.2) { v } else { u });
    if !best_val.is_finite() {
        return Err(Error::NotConverged { best: best_val });
    }
    let start = [bi as f64 * step, bj as f64 * step];
    let (q, val, converged) = nelder_mead(&f, start, step, 1e-12, 2000);
    let (q, val) = if val <= best_val { (q, val) } else { (start, best_val) };
    if !converged {
        return Err(Error::NotConverged { best: val });
    }
    Ok(JosephsonChi { chi: val, q_a: q[0].clamp(0.0, 1.0), q_b: q[1].clamp(0.0, 1.0) })
}

/// Nelder–Mead on two variables. Returns the best vertex, its value, and
/// whether the simplex collapsed below `xtol` within `max_iter` steps.
fn nelder_mead(f: &dyn Fn([f64; 2]) -> f64, start: [f64; 2], scale: f64, xtol: f64, max_iter: usize) -> ([f64; 2], f64, bool) {
    let mut simplex = [start, [start[0] + scale, start[1]], [start[0], start[1] + scale]];
    let mut vals = simplex.map(f);
    let lin = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(simplex[i].partial_cmp(&simplex[j]).unwrap()));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        let size = (1..3)
            .map(|k| (simplex[k][0] - simplex[0][0]).abs().max((simplex[k][1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if size < xtol {
            return (simplex[0], vals[0], true);
        }
        let centroid = lin(simplex[0], simplex[1], 0.5);
        let reflected = lin(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = lin(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                vals[2] = fe;
            } else {
                simplex[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = reflected;
            vals[2] = fr;
        } else {
            let contracted = if fr < vals[2] { lin(centroid, reflected, 0.5) } else { lin(centroid, simplex[2], 0.5) };
            let fc = f(contracted);
            if fc < vals[2].min(fr) {
                simplex[2] = contracted;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = lin(simplex[0], simplex[k], 0.5);
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    (simplex[0], vals[0], false)
}
