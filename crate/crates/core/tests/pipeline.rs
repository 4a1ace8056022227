use proptest::prelude::*;
use xtalk::bell::{Behavior, Scenario};
use xtalk::models::{deterministic_model, ideal_model};
use xtalk::pipeline::{
    certify, certify_summary, estimate, extractor_seed_bits, monobit_p_value, raw_bits, run, simulate, toeplitz_extract,
    write_records_csv, CertifyOptions, ExperimentConfig, Method,
};
use xtalk::relax::Level;

/// Explicit Toeplitz matrix times vector over GF(2).
fn naive_toeplitz(bits: &[u8], seed: &[u8], m: usize) -> Vec<u8> {
    let k = bits.len();
    (0..m)
        .map(|i| {
            let mut acc = 0u8;
            for (j, &b) in bits.iter().enumerate() {
                acc ^= seed[i + k - 1 - j] & b;
            }
            acc
        })
        .collect()
}

fn bitvec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, len)
}

#[test]
fn golden_extraction() {
    let bits: Vec<u8> = (0..150).map(|i| ((i * 7 + 3) % 5 < 2) as u8).collect();
    let seed = extractor_seed_bits(11, 100 + bits.len() - 1);
    let out = toeplitz_extract(&bits, &seed, 100, 100).unwrap();
    assert_eq!(out, naive_toeplitz(&bits, &seed, 100));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extraction_matches_matrix_oracle(bits in bitvec(1..300), m in 1usize..200, s in any::<u64>()) {
        let seed = extractor_seed_bits(s, m + bits.len() - 1);
        prop_assert_eq!(toeplitz_extract(&bits, &seed, m, m).unwrap(), naive_toeplitz(&bits, &seed, m));
    }

    #[test]
    fn extraction_is_linear(u in bitvec(200..201), v in bitvec(200..201), m in 1usize..150, s in any::<u64>()) {
        let seed = extractor_seed_bits(s, m + 199);
        let w: Vec<u8> = u.iter().zip(&v).map(|(a, b)| a ^ b).collect();
        let eu = toeplitz_extract(&u, &seed, m, m).unwrap();
        let ev = toeplitz_extract(&v, &seed, m, m).unwrap();
        let sum: Vec<u8> = eu.iter().zip(&ev).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(toeplitz_extract(&w, &seed, m, m).unwrap(), sum);
    }

    #[test]
    fn rate_nonincreasing_in_cross_talk(i in 2.1f64..2.8, chi in 0.0f64..0.01, dc in 0.0f64..0.01) {
        let cfg = ExperimentConfig::new(10_000, 0, 1e-3);
        for method in [Method::Analytic, Method::Lp] {
            let opts = CertifyOptions { method, ..Default::default() };
            let (a, _) = certify_summary(i, 0.0, 0.0, chi, &cfg, &opts, None).unwrap();
            let (b, _) = certify_summary(i, 0.0, 0.0, chi + dc, &cfg, &opts, None).unwrap();
            prop_assert!(b.rate() <= a.rate() + 1e-12);
        }
    }
}

#[test]
fn sdp_rate_nonincreasing_in_cross_talk() {
    let cfg = ExperimentConfig::new(10_000, 0, 1e-3);
    let opts = CertifyOptions { method: Method::Sdp, level: Level::L1XY, ..Default::default() };
    let rates: Vec<f64> =
        [0.0, 0.002, 0.005].iter().map(|&chi| certify_summary(2.5, 0.0, 0.0, chi, &cfg, &opts, None).unwrap().0.rate()).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{rates:?}");
}

#[test]
fn simulation_is_reproducible() {
    let m = ideal_model().unwrap();
    let cfg = ExperimentConfig::new(5000, 99, 1e-6);
    assert_eq!(simulate(&m, &cfg).unwrap(), simulate(&m, &cfg).unwrap());
    let other = ExperimentConfig { seed: 100, ..cfg.clone() };
    assert_ne!(simulate(&m, &cfg).unwrap(), simulate(&m, &other).unwrap());
}

#[test]
fn end_to_end_is_a_function_of_the_seed() {
    let m = ideal_model().unwrap();
    let cfg = ExperimentConfig::new(20_000, 5, 1e-6);
    let opts = CertifyOptions { method: Method::Analytic, ..Default::default() };
    let a = run(&m, 0.0, &cfg, &opts).unwrap();
    let b = run(&m, 0.0, &cfg, &opts).unwrap();
    assert_eq!(a.certificate.to_json().unwrap(), b.certificate.to_json().unwrap());
    assert_eq!(a.bits, b.bits);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_records_csv(&a.records, &mut ca).unwrap();
    write_records_csv(&b.records, &mut cb).unwrap();
    assert_eq!(ca, cb);
    assert!(a.certificate.output_len > 0);
    assert_eq!(a.bits.len(), a.certificate.output_len);
}

#[test]
fn ideal_signaling_within_confidence_radius() {
    let recs = simulate(&ideal_model().unwrap(), &ExperimentConfig::new(100_000, 8, 1e-6)).unwrap();
    let est = estimate(&recs, 1e-6).unwrap();
    assert!(est.delta <= est.radius);
}

#[test]
fn local_device_yields_no_bits() {
    let cfg = ExperimentConfig::new(2000, 1, 1e-6);
    let recs = simulate(&deterministic_model(), &cfg).unwrap();
    for method in [Method::Analytic, Method::Lp, Method::Sdp] {
        let (cert, bits) = certify(&recs, 0.0, &cfg, &CertifyOptions { method, ..Default::default() }).unwrap();
        assert_eq!(cert.output_len, 0);
        assert!(bits.is_empty());
        assert_eq!(cert.p_star, 1.0);
    }
}

#[test]
fn budget_respected() {
    let m = ideal_model().unwrap();
    let cfg = ExperimentConfig::new(20_000, 3, 1e-4);
    let r = run(&m, 0.0, &cfg, &CertifyOptions::default()).unwrap();
    let c = &r.certificate;
    assert!(c.output_len as f64 <= (c.min_entropy - 2.0 * (1.0 / c.eps_sec).log2()).floor());
    assert!((0.25..=1.0).contains(&c.p_star));
    let seed = extractor_seed_bits(cfg.seed, c.output_len + 2 * cfg.n - 1);
    assert!(toeplitz_extract(&raw_bits(&r.records), &seed, c.output_len + 1, c.output_len).is_err());
}

#[test]
fn more_rounds_raise_the_adjusted_value() {
    // Sign test: under "no effect" increases and decreases are equally likely.
    let m = ideal_model().unwrap();
    let mut ups = 0;
    for seed in 0..50 {
        let adj = |n: usize| {
            let cfg = ExperimentConfig::new(n, seed, 1e-3);
            let est = estimate(&simulate(&m, &cfg).unwrap(), cfg.eps_sec).unwrap();
            (est.bell_value - est.radius).max(2.0)
        };
        if adj(40_000) > adj(10_000) {
            ups += 1;
        }
    }
    // P(Bin(50, 1/2) ≥ 32) < 0.05.
    assert!(ups >= 32, "{ups}/50");
}

#[test]
fn monobit_detects_bias() {
    assert!(monobit_p_value(&vec![1u8; 1000]) < 1e-10);
    let alternating: Vec<u8> = (0..1000).map(|i| (i % 2) as u8).collect();
    assert!((monobit_p_value(&alternating) - 1.0).abs() < 1e-12);
}

#[test]
fn clipped_frequencies_renormalize() {
    let mut p = Behavior::uniform(Scenario::CHSH).as_slice().to_vec();
    p[0] = -5e-10;
    p[1] += 5e-10;
    let b = Behavior::from_empirical(Scenario::CHSH, p).unwrap();
    assert!(b.as_slice().iter().all(|v| *v >= 0.0));
}
