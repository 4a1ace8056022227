use std::f64::consts::PI;

use proptest::prelude::*;
use xtalk::bell::{evaluate, signaling_delta, BellExpression};
use xtalk::bounds::TSIRELSON;
use xtalk::models::{
    born_behavior, deterministic_model, ideal_model, ion_chi_bound, ion_model, josephson_chi_bound, josephson_chi_objective,
    josephson_model, BlochAngles, DeviceModel, IonParams, JosephsonParams, ProductAnsatz, SettingAngles,
};

#[test]
fn ideal_model_reaches_tsirelson() {
    let m = ideal_model().unwrap();
    m.validate().unwrap();
    let p = born_behavior(&m).unwrap();
    assert!((evaluate(&BellExpression::chsh(), &p).unwrap() - TSIRELSON).abs() < 1e-12);
    assert!(signaling_delta(&p).value() < 1e-12);
}

#[test]
fn deterministic_model_is_local() {
    let m = deterministic_model();
    m.validate().unwrap();
    let p = born_behavior(&m).unwrap();
    assert!((evaluate(&BellExpression::chsh(), &p).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn ion_bound_matches_closed_form() {
    for eps in [0.0, 0.01, 0.03, 0.1] {
        let want = (1.0 - (eps * PI / 8.0).cos().powi(4)).sqrt();
        let got = ion_chi_bound(IonParams::new(eps).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-10, "eps {eps}: {got} vs {want}");
    }
    ion_model(IonParams::new(0.03).unwrap()).unwrap().validate().unwrap();
    assert!(IonParams::new(1.0).is_err());
}

/// In the product eigenbasis every operator of the Josephson problem is
/// diagonal, so the cross-talk is a minimax over scalar entries.
fn diagonal_objective(pa: f64, pb: f64, qa: f64, qb: f64) -> f64 {
    (0..16).map(|k| diagonal_signed(pa, pb, qa, qb, k).abs()).fold(0.0, f64::max)
}

/// For fixed `q_A` every entry is affine in `q_B`, so the inner minimum of
/// the max of `|α + β q_B|` sits at an endpoint or at a crossing of two of
/// the lines; `q_A` is then searched on successively finer grids.
fn diagonal_minimum(pa: f64, pb: f64) -> f64 {
    let inner = |qa: f64| -> f64 {
        let lines: Vec<(f64, f64)> = (0..16)
            .flat_map(|k| {
                let f0 = diagonal_signed(pa, pb, qa, 0.0, k);
                let f1 = diagonal_signed(pa, pb, qa, 1.0, k);
                [(f0, f1 - f0), (-f0, f0 - f1)]
            })
            .collect();
        let mut cands = vec![0.0, 1.0];
        for i in 0..lines.len() {
            for j in (i + 1)..lines.len() {
                let db = lines[i].1 - lines[j].1;
                if db.abs() > 1e-15 {
                    let q = (lines[j].0 - lines[i].0) / db;
                    if (0.0..=1.0).contains(&q) {
                        cands.push(q);
                    }
                }
            }
        }
        cands.iter().map(|&qb| diagonal_objective(pa, pb, qa, qb)).fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..8 {
        let n = 400;
        for i in 0..=n {
            let qa = lo + (hi - lo) * i as f64 / n as f64;
            let v = inner(qa);
            if v < best.0 {
                best = (v, qa);
            }
        }
        let w = (hi - lo) / n as f64 * 4.0;
        lo = (best.1 - w).max(0.0);
        hi = (best.1 + w).min(1.0);
    }
    best.0
}

/// Signed entry `k` of the diagonal difference.
fn diagonal_signed(pa: f64, pb: f64, qa: f64, qb: f64, k: usize) -> f64 {
    let (a, b, i, j) = (k >> 3, (k >> 2) & 1, (k >> 1) & 1, k & 1);
    let m = |q: f64, a: usize, i: usize| if a == i { 1.0 - q } else { q };
    let z = match (a, b, i, j) {
        (0, 0, 0, 0) | (1, 1, 1, 1) => 1.0,
        (0, 1, 0, 1) => 1.0 - pb,
        (1, 0, 1, 0) => 1.0 - pa,
        (1, 1, 0, 1) => pb,
        (1, 1, 1, 0) => pa,
        _ => 0.0,
    };
    z - m(qa, a, i) * m(qb, b, j)
}

#[test]
fn josephson_bound_matches_diagonal_oracle() {
    for (pa, pb) in [(0.0059, 0.0031), (0.002, 0.002), (0.01, 0.0), (0.03, 0.005)] {
        let params = JosephsonParams::new(pa, pb).unwrap();
        let r = josephson_chi_bound(params).unwrap();
        let want = diagonal_minimum(pa, pb);
        assert!((r.chi - want).abs() < 1e-6, "({pa},{pb}): {} vs {want}", r.chi);
        let direct = josephson_chi_objective(params, &SettingAngles::default(), ProductAnsatz { q_a: r.q_a, q_b: r.q_b }).unwrap();
        assert!((direct - diagonal_objective(pa, pb, r.q_a, r.q_b)).abs() < 1e-12);
    }
}

#[test]
fn josephson_reference_parameters() {
    let r = josephson_chi_bound(JosephsonParams::new(0.0059, 0.0031).unwrap()).unwrap();
    assert!((r.chi - 0.0030).abs() < 1e-6);
    assert!((r.q_a - 0.0001).abs() < 1e-5 && (r.q_b - 0.0029).abs() < 1e-5);
}

#[test]
fn josephson_signaling_consistent_with_cross_talk() {
    let params = JosephsonParams::new(0.0059, 0.0031).unwrap();
    let m = josephson_model(params, &SettingAngles::default()).unwrap();
    m.validate().unwrap();
    let p = born_behavior(&m).unwrap();
    let chi = josephson_chi_bound(params).unwrap().chi;
    assert!(signaling_delta(&p).value() <= 4.0 * chi + 1e-12);
    let i = evaluate(&BellExpression::chsh(), &p).unwrap();
    assert!(i < TSIRELSON && i > 2.8);
}

#[test]
fn model_json_round_trip() {
    let m = ion_model(IonParams::new(0.02).unwrap()).unwrap();
    let text = serde_json::to_string(&m).unwrap();
    let back: DeviceModel = serde_json::from_str(&text).unwrap();
    let (a, b) = (born_behavior(&back).unwrap(), born_behavior(&m).unwrap());
    assert!(a.as_slice().iter().zip(b.as_slice()).all(|(u, v)| (u - v).abs() < 1e-14));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The objective compares projective measurements in a common basis, so
    /// it cannot depend on which directions the settings point along.
    #[test]
    fn josephson_objective_is_basis_independent(
        angles in prop::collection::vec((0.0f64..PI, -PI..PI), 4),
        qa in 0.0f64..0.01,
        qb in 0.0f64..0.01,
    ) {
        let params = JosephsonParams::new(0.0059, 0.0031).unwrap();
        let q = ProductAnsatz { q_a: qa, q_b: qb };
        let b = |k: usize| BlochAngles { theta: angles[k].0, phi: angles[k].1 };
        let random = SettingAngles { a: [b(0), b(1)], b: [b(2), b(3)] };
        let reference = josephson_chi_objective(params, &SettingAngles::default(), q).unwrap();
        prop_assert!((josephson_chi_objective(params, &random, q).unwrap() - reference).abs() < 1e-9);
    }

    #[test]
    fn ion_bound_increasing_in_leakage(e in 0.0f64..0.5, de in 0.0f64..0.1) {
        let a = ion_chi_bound(IonParams::new(e).unwrap()).unwrap();
        let b = ion_chi_bound(IonParams::new(e + de).unwrap()).unwrap();
        prop_assert!(b >= a - 1e-12);
    }
}
