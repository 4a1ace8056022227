use proptest::prelude::*;
use xtalk::bell::{evaluate, signaling_delta, BellExpression};
use xtalk::bounds::bound_signaling;
use xtalk::lp::{lp_certificate, p_star_lp, simplex_solve, BellConstraint, LpProblem, RowKind};
use xtalk::Error;

/// Maximum of `c·x` over `{x ≥ 0, rows}` in two variables by enumerating
/// every intersection of two boundary lines.
fn vertex_oracle(p: &LpProblem) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = p.rows.iter().map(|r| ([r.coeffs[0], r.coeffs[1]], r.rhs)).collect();
    lines.push(([1.0, 0.0], 0.0));
    lines.push(([0.0, 1.0], 0.0));
    let feasible = |x: [f64; 2]| {
        x[0] >= -1e-9
            && x[1] >= -1e-9
            && p.rows.iter().all(|r| {
                let v = r.coeffs[0] * x[0] + r.coeffs[1] * x[1];
                match r.kind {
                    RowKind::Le => v <= r.rhs + 1e-9,
                    RowKind::Ge => v >= r.rhs - 1e-9,
                    RowKind::Eq => (v - r.rhs).abs() <= 1e-9,
                }
            })
    };
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let ((a, e), (b, f)) = (lines[i], lines[j]);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(e * b[1] - a[1] * f) / det, (a[0] * f - e * b[0]) / det];
            if feasible(x) {
                let v = p.objective[0] * x[0] + p.objective[1] * x[1];
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}

fn kind(k: u8) -> RowKind {
    match k {
        0 => RowKind::Le,
        1 => RowKind::Ge,
        _ => RowKind::Eq,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(
        obj in prop::collection::vec(-2.0f64..2.0, 2),
        rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 2), 0u8..3, -1.0f64..3.0), 1..5),
    ) {
        let mut p = LpProblem::new(obj);
        for (c, k, b) in rows {
            p.push(c, kind(k), b);
        }
        // A box keeps the problem bounded.
        p.push(vec![1.0, 0.0], RowKind::Le, 5.0);
        p.push(vec![0.0, 1.0], RowKind::Le, 5.0);
        match (simplex_solve(&p), vertex_oracle(&p)) {
            (Ok(sol), Some(best)) => {
                prop_assert!((sol.objective - best).abs() < 1e-7, "simplex {} vs vertices {}", sol.objective, best);
                let (dual, infeas, comp) = lp_certificate(&p, &sol.x, &sol.duals);
                prop_assert!((dual - sol.objective).abs() < 1e-7);
                prop_assert!(infeas < 1e-8 && comp < 1e-8);
            }
            (Err(Error::LpInfeasible), None) => {}
            (got, want) => prop_assert!(false, "simplex {:?} vs oracle {:?}", got.map(|s| s.objective), want),
        }
    }

    #[test]
    fn signaling_lp_matches_closed_form(i in 2.0f64..4.0, delta in 0.0f64..0.05) {
        let lp = p_star_lp(i, delta, BellConstraint::Equal).unwrap();
        prop_assert!((lp.value - bound_signaling(i, delta).unwrap()).abs() < 1e-7);
        let chsh = BellExpression::chsh();
        prop_assert!((evaluate(&chsh, &lp.argmax).unwrap() - i).abs() < 1e-7);
        prop_assert!(signaling_delta(&lp.argmax).value() <= delta + 1e-7);
    }
}

#[test]
fn pr_point_and_trivial_region() {
    assert!((p_star_lp(4.0, 0.0, BellConstraint::Equal).unwrap().value - 0.5).abs() < 1e-9);
    assert!((p_star_lp(2.0, 0.0, BellConstraint::Equal).unwrap().value - 1.0).abs() < 1e-9);
    assert!(matches!(p_star_lp(4.5, 0.0, BellConstraint::Equal), Err(Error::LpInfeasible)));
}

#[test]
fn unbounded_detected() {
    let mut p = LpProblem::new(vec![1.0, 1.0]);
    p.push(vec![1.0, -1.0], RowKind::Le, 1.0);
    assert!(matches!(simplex_solve(&p), Err(Error::LpUnbounded)));
}
