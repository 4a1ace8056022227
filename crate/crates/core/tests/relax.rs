use xtalk::bell::{BellExpression, Behavior, Scenario};
use xtalk::bounds::{closed_form_chsh_zero, TSIRELSON};
use xtalk::lp::BellConstraint;
use xtalk::models::{born_behavior, ideal_model, josephson_model, JosephsonParams, SettingAngles};
use xtalk::relax::{
    chi_lower_bound_simple, max_bell_given_chi, min_chi_bisection, min_chi_program, p_star_sdp, randomness_program,
    solve_relaxation, Level, MonomialSet, RelaxationProblem, DEFAULT_EPS_PIN,
};
use xtalk::sdp::{validate_certificate, SolverOptions};

fn p00(i: f64, chi: f64, level: Level) -> f64 {
    p_star_sdp(&BellExpression::chsh(), i, chi, (0, 0), &level.into(), BellConstraint::Equal, &SolverOptions::default())
        .unwrap()
        .value
}

#[test]
fn tsirelson_point_within_closed_form() {
    let v = p00(TSIRELSON - 1e-7, 0.0, Level::L1XY);
    assert!(v <= closed_form_chsh_zero(TSIRELSON).unwrap() + 1e-6, "{v}");
}

#[test]
fn max_bell_endpoints() {
    let chsh = BellExpression::chsh();
    let opts = SolverOptions::default();
    let set: MonomialSet = Level::L1.into();
    let v0 = solve_relaxation(&max_bell_given_chi(&chsh, 0.0, &set).unwrap(), &opts).unwrap().bound;
    let v1 = solve_relaxation(&max_bell_given_chi(&chsh, 1.0, &set).unwrap(), &opts).unwrap().bound;
    assert!((v0 - TSIRELSON).abs() < 1e-4, "{v0}");
    assert!((v1 - 4.0).abs() < 1e-4, "{v1}");
}

#[test]
fn bounds_monotone_in_bell_value_and_cross_talk() {
    let grid = [2.2, 2.4, 2.6];
    for chi in [0.0, 0.005, 0.01] {
        let vals: Vec<f64> = grid.iter().map(|&i| p00(i, chi, Level::L1XY)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-6), "chi {chi}: {vals:?}");
    }
    for i in grid {
        let vals: Vec<f64> = [0.0, 0.005, 0.01].iter().map(|&c| p00(i, c, Level::L1XY)).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-6), "I {i}: {vals:?}");
    }
}

#[test]
fn higher_levels_are_tighter() {
    let vals: Vec<f64> = [Level::L1, Level::L1XY, Level::L1XYZW].iter().map(|&l| p00(2.3, 0.01, l)).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-6), "{vals:?}");
}

#[test]
fn relaxation_json_round_trip() {
    let chsh = BellExpression::chsh();
    let p = randomness_program(&chsh, 2.4, 0.01, (0, 0, 0, 0), &Level::L1XY.into(), BellConstraint::Equal).unwrap();
    let back = RelaxationProblem::from_json(&p.to_json().unwrap()).unwrap();
    let opts = SolverOptions::default();
    let (a, b) = (solve_relaxation(&p, &opts).unwrap(), solve_relaxation(&back, &opts).unwrap());
    assert!((a.bound - b.bound).abs() < 1e-9);
    validate_certificate(&back.conic, &b.report).unwrap();
}

#[test]
fn minimal_cross_talk_separations() {
    let opts = SolverOptions::default();
    let set: MonomialSet = Level::L1XY.into();
    let pr = solve_relaxation(&min_chi_program(&Behavior::pr_box(), &set, DEFAULT_EPS_PIN).unwrap(), &opts).unwrap();
    assert!(pr.bound > 0.01, "{}", pr.bound);
    let singlet = born_behavior(&ideal_model().unwrap()).unwrap();
    let s = solve_relaxation(&min_chi_program(&singlet, &set, DEFAULT_EPS_PIN).unwrap(), &opts).unwrap();
    assert!(s.bound <= 1e-5, "{}", s.bound);
    let uniform = Behavior::uniform(Scenario::CHSH);
    let u = solve_relaxation(&min_chi_program(&uniform, &set, DEFAULT_EPS_PIN).unwrap(), &opts).unwrap();
    assert!(u.bound <= 1e-5);
}

#[test]
fn bisection_refines_the_linear_bound() {
    let params = JosephsonParams::new(0.0059, 0.0031).unwrap();
    let p = born_behavior(&josephson_model(params, &SettingAngles::default()).unwrap()).unwrap();
    let set: MonomialSet = Level::L1XYZW.into();
    let opts = SolverOptions::default();
    let linear = solve_relaxation(&min_chi_program(&p, &set, DEFAULT_EPS_PIN).unwrap(), &opts).unwrap().bound;
    assert!(linear >= chi_lower_bound_simple(&p) - 1e-7);
    let br = min_chi_bisection(&p, &set, DEFAULT_EPS_PIN, (linear.max(0.0), 0.0031), 0.05, &opts).unwrap();
    assert!(br.lower >= linear && br.lower <= 0.0030 + 3e-4, "{br:?}");
    assert!(br.upper >= br.lower);
}
