//! Simulate a CHSH experiment, estimate its statistics, bound the guessing
//! probability and hash the raw outcomes into near-uniform bits.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bell::{delta_from_chi, evaluate, signaling_delta, BellExpression, Behavior, Scenario};
use crate::bounds::{bound_shifted, ClosedFormCurve, P_FLOOR, TSIRELSON};
use crate::error::{Error, Result};
use crate::lp::{p_star_lp, BellConstraint};
use crate::models::{born_behavior, DeviceModel};
use crate::relax::{p_star_sdp, Level, MonomialSet};
use crate::sdp::SolverOptions;

/// Stream of the seeded generator reserved for the extractor seed; the
/// simulation uses stream 0.
const EXTRACTOR_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    /// `P(x, y)` indexed `2x + y`.
    #[serde(default = "uniform_inputs")]
    pub inputs: [f64; 4],
    pub seed: u64,
    pub eps_sec: f64,
}

fn uniform_inputs() -> [f64; 4] {
    [0.25; 4]
}

impl ExperimentConfig {
    pub fn new(n: usize, seed: u64, eps_sec: f64) -> Self {
        ExperimentConfig { n, inputs: uniform_inputs(), seed, eps_sec }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(self.eps_sec > 0.0 && self.eps_sec < 1.0) {
            return Err(Error::InvalidArgument(format!("eps_sec = {} outside (0,1)", self.eps_sec)));
        }
        if self.inputs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (self.inputs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("input distribution must be non-negative and sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub x: u8,
    pub y: u8,
    pub a: u8,
    pub b: u8,
}

/// I.i.d. rounds drawn from the model's Born statistics with one sequential
/// ChaCha20 stream seeded by `cfg.seed`.
pub fn simulate(m: &DeviceModel, cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let p = born_behavior(m)?;
    simulate_behavior(&p, cfg)
}

pub fn simulate_behavior(p: &Behavior, cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    if p.scenario() != Scenario::CHSH {
        return Err(Error::InvalidArgument("simulation needs a two-input two-output behavior".into()));
    }
    let bad = |e: rand::distr::weighted::Error| Error::InvalidArgument(format!("sampling weights: {e}"));
    let settings = WeightedIndex::new(cfg.inputs).map_err(bad)?;
    let mut outcomes = Vec::with_capacity(4);
    for x in 0..2 {
        for y in 0..2 {
            let w = [p.joint(0, 0, x, y), p.joint(0, 1, x, y), p.joint(1, 0, x, y), p.joint(1, 1, x, y)];
            outcomes.push(WeightedIndex::new(w).map_err(bad)?);
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let s = settings.sample(&mut rng);
        let o = outcomes[s].sample(&mut rng);
        out.push(TrialRecord { x: (s / 2) as u8, y: (s % 2) as u8, a: (o / 2) as u8, b: (o % 2) as u8 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub behavior: Behavior,
    pub bell_value: f64,
    pub delta: f64,
    /// Rounds per setting, indexed `2x + y`.
    pub counts: [usize; 4],
    /// Hoeffding radius on the Bell value at confidence `1 - eps`.
    pub radius: f64,
    /// Binomial standard deviation of the Bell value estimate.
    pub sigma: f64,
}

/// Hoeffding radius `γ·sqrt(ln(2·16/ε) / (2 n_min))`: a union bound over the
/// 16 cells, each estimated from at least `n_min` rounds.
pub fn hoeffding_radius(gamma: f64, n_min: usize, eps: f64) -> f64 {
    gamma * ((2.0 * 16.0 / eps).ln() / (2.0 * n_min as f64)).sqrt()
}

pub fn estimate(records: &[TrialRecord], eps: f64) -> Result<Estimate> {
    let s = Scenario::CHSH;
    let mut cells = vec![0usize; s.len()];
    let mut counts = [0usize; 4];
    for r in records {
        if r.x > 1 || r.y > 1 || r.a > 1 || r.b > 1 {
            return Err(Error::InvalidArgument(format!("record {r:?} carries a non-binary entry")));
        }
        let (a, b, x, y) = (r.a as usize, r.b as usize, r.x as usize, r.y as usize);
        cells[s.index(a, b, x, y)] += 1;
        counts[2 * x + y] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingData(format!("setting ({},{}) never occurs", k / 2, k % 2)));
    }
    let freq = s.tuples().map(|(a, b, x, y)| cells[s.index(a, b, x, y)] as f64 / counts[2 * x + y] as f64).collect();
    let behavior = Behavior::from_empirical(s, freq)?;
    let chsh = BellExpression::chsh();
    let bell_value = evaluate(&chsh, &behavior)?;
    let delta = signaling_delta(&behavior).value();
    let n_min = *counts.iter().min().unwrap_or(&1);
    let mut var = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let e: f64 = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| if a == b { 1.0 } else { -1.0 } * behavior.joint(a, b, x, y))
                .sum();
            var += (1.0 - e * e).max(0.0) / counts[2 * x + y] as f64;
        }
    }
    Ok(Estimate {
        behavior,
        bell_value,
        delta,
        counts,
        radius: hoeffding_radius(chsh.gamma(), n_min, eps),
        sigma: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Shifted closed-form curve.
    Analytic,
    /// Signaling-bounded LP with `δ = max(δ̂, 2Nχ)`.
    Lp,
    /// Cross-talk relaxation, certified dual side.
    Sdp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Lp => "lp",
            Method::Sdp => "sdp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(Method::Analytic),
            "lp" => Ok(Method::Lp),
            "sdp" => Ok(Method::Sdp),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}' (expected analytic, lp, sdp)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub method: Method,
    pub level: Level,
    pub solver: SolverOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { method: Method::Sdp, level: Level::L1XY, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessingBound {
    pub p_star: f64,
    /// Bell value handed to the bound (the adjusted value, capped).
    pub bell_used: f64,
    /// Signaling budget, for the LP method.
    pub delta_used: Option<f64>,
}

/// Guessing-probability bound valid for every setting, from a Bell value
/// known to be at least `bell_adjusted`.
pub fn guessing_bound(bell_adjusted: f64, delta_hat: f64, chi: f64, opts: &CertifyOptions) -> Result<GuessingBound> {
    let s = Scenario::CHSH;
    let chsh = BellExpression::chsh();
    let delta_chi = delta_from_chi(s, chi)?;
    if bell_adjusted <= 2.0 {
        let delta_used = (opts.method == Method::Lp).then(|| delta_hat.max(delta_chi).min(1.0));
        return Ok(GuessingBound { p_star: 1.0, bell_used: bell_adjusted, delta_used });
    }
    // A smaller Bell value only weakens a lower-bound constraint, so capping is sound.
    let cap = |limit: f64| bell_adjusted.min(limit);
    match opts.method {
        Method::Analytic => {
            let bell_used = cap(TSIRELSON + chsh.gamma() * chi);
            let p_star = bound_shifted(bell_used, chi, chsh.gamma(), &ClosedFormCurve)?;
            Ok(GuessingBound { p_star, bell_used, delta_used: None })
        }
        Method::Lp => {
            let bell_used = cap(4.0);
            let delta = delta_hat.max(delta_chi).min(1.0);
            let p_star = p_star_lp(bell_used, delta, BellConstraint::AtLeast)?.value.clamp(P_FLOOR, 1.0);
            Ok(GuessingBound { p_star, bell_used, delta_used: Some(delta) })
        }
        Method::Sdp => {
            let bell_used = cap(TSIRELSON - 1e-7);
            let set = MonomialSet::new(opts.level);
            let mut p_star = P_FLOOR;
            for setting in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let v = p_star_sdp(&chsh, bell_used, chi, setting, &set, BellConstraint::AtLeast, &opts.solver)?;
                p_star = p_star.max(v.value);
            }
            Ok(GuessingBound { p_star, bell_used, delta_used: None })
        }
    }
}

/// `floor(-n·log₂P*) - ceil(2·log₂(1/ε))`, at least zero.
pub fn extractable_length(n: usize, p_star: f64, eps_sec: f64) -> usize {
    let h = min_entropy(n, p_star);
    let slack = (2.0 * (1.0 / eps_sec).log2()).ceil();
    (h.floor() - slack).max(0.0) as usize
}

pub fn min_entropy(n: usize, p_star: f64) -> f64 {
    -(n as f64) * p_star.log2()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorSeed {
    pub kind: String,
    pub rng: String,
    pub seed: u64,
    pub stream: u64,
    pub input_bits: usize,
    pub seed_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub seed: u64,
    pub eps_sec: f64,
    pub bell_value: f64,
    pub bell_radius: f64,
    pub bell_adjusted: f64,
    pub delta_hat: f64,
    pub chi: f64,
    pub method: Method,
    pub level: Option<Level>,
    pub bound: GuessingBound,
    pub p_star: f64,
    pub min_entropy: f64,
    pub extractor: ExtractorSeed,
    pub output_len: usize,
    /// Output bits packed most-significant first, hex encoded.
    pub output_hex: String,
}

impl Certificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn rate(&self) -> f64 {
        -self.p_star.log2()
    }
}

/// Two raw bits per round, `a` then `b`.
pub fn raw_bits(records: &[TrialRecord]) -> Vec<u8> {
    records.iter().flat_map(|r| [r.a, r.b]).collect()
}

/// `m + k - 1` seed bits from the extractor stream of `seed`.
pub fn extractor_seed_bits(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(EXTRACTOR_STREAM);
    (0..len).map(|_| rng.random::<bool>() as u8).collect()
}

/// Bound-to-bits step on a summary: the certificate for `n` rounds with the
/// given Bell estimate, confidence radius and signaling estimate. Output bits
/// are filled only when `raw` is supplied.
#[allow(clippy::too_many_arguments)]
pub fn certify_summary(
    bell_value: f64,
    radius: f64,
    delta_hat: f64,
    chi: f64,
    cfg: &ExperimentConfig,
    opts: &CertifyOptions,
    raw: Option<&[u8]>,
) -> Result<(Certificate, Vec<u8>)> {
    cfg.validate()?;
    let bell_adjusted = (bell_value - radius).max(2.0);
    let bound = guessing_bound(bell_adjusted, delta_hat, chi, opts)?;
    let p_star = bound.p_star.clamp(P_FLOOR, 1.0);
    let k = 2 * cfg.n;
    let m = extractable_length(cfg.n, p_star, cfg.eps_sec);
    let seed_bits = if m == 0 { 0 } else { m + k - 1 };
    let output = match raw {
        Some(bits) if m > 0 => toeplitz_extract(bits, &extractor_seed_bits(cfg.seed, seed_bits), m, m)?,
        _ => Vec::new(),
    };
    let cert = Certificate {
        n: cfg.n,
        seed: cfg.seed,
        eps_sec: cfg.eps_sec,
        bell_value,
        bell_radius: radius,
        bell_adjusted,
        delta_hat,
        chi,
        method: opts.method,
        level: (opts.method == Method::Sdp).then_some(opts.level),
        bound,
        p_star,
        min_entropy: min_entropy(cfg.n, p_star),
        extractor: ExtractorSeed {
            kind: "toeplitz-gf2".into(),
            rng: "chacha20".into(),
            seed: cfg.seed,
            stream: EXTRACTOR_STREAM,
            input_bits: k,
            seed_bits,
        },
        output_len: if raw.is_some() { m } else { 0 },
        output_hex: to_hex(&pack_bytes(&output)),
    };
    Ok((cert, output))
}

/// Estimates the records and certifies them; returns the certificate and the
/// extracted bits.
pub fn certify(records: &[TrialRecord], chi: f64, cfg: &ExperimentConfig, opts: &CertifyOptions) -> Result<(Certificate, Vec<u8>)> {
    if records.len() != cfg.n {
        return Err(Error::Dimension(format!("{} records for n = {}", records.len(), cfg.n)));
    }
    let est = estimate(records, cfg.eps_sec)?;
    certify_summary(est.bell_value, est.radius, est.delta, chi, cfg, opts, Some(&raw_bits(records)))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub estimate: Estimate,
    pub certificate: Certificate,
    pub bits: Vec<u8>,
}

/// Simulate, estimate, bound and extract in one call.
pub fn run(m: &DeviceModel, chi: f64, cfg: &ExperimentConfig, opts: &CertifyOptions) -> Result<RunOutput> {
    let records = simulate(m, cfg)?;
    let estimate = estimate(&records, cfg.eps_sec)?;
    let (certificate, bits) = certify(&records, chi, cfg, opts)?;
    Ok(RunOutput { records, estimate, certificate, bits })
}

fn pack_words(bits: &[u8], extra_words: usize) -> Vec<u64> {
    let mut w = vec![0u64; bits.len().div_ceil(64) + extra_words];
    for (t, &b) in bits.iter().enumerate() {
        if b & 1 == 1 {
            w[t / 64] |= 1 << (t % 64);
        }
    }
    w
}

/// `out = T·bits` over GF(2) with `T[i][j] = seed[i - j + k - 1]`, `k` the
/// input length. Needs `m ≤ budget` and `m + k - 1` seed bits.
pub fn toeplitz_extract(bits: &[u8], seed: &[u8], m: usize, budget: usize) -> Result<Vec<u8>> {
    if m > budget {
        return Err(Error::InvalidArgument(format!("output length {m} exceeds the certified budget {budget}")));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let k = bits.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no input bits".into()));
    }
    if seed.len() < m + k - 1 {
        return Err(Error::InvalidArgument(format!("seed has {} bits, needs {}", seed.len(), m + k - 1)));
    }
    // Row i pairs seed[i + t] with bits[k - 1 - t].
    let reversed: Vec<u8> = bits.iter().rev().copied().collect();
    let inp = pack_words(&reversed, 0);
    let sw = pack_words(&seed[..m + k - 1], 2);
    let out = (0..m)
        .map(|i| {
            let (w, s) = (i / 64, i % 64);
            let mut acc = 0u64;
            for (q, v) in inp.iter().enumerate() {
                let lo = sw[w + q] >> s;
                let hi = if s == 0 { 0 } else { sw[w + q + 1] << (64 - s) };
                acc ^= (lo | hi) & v;
            }
            (acc.count_ones() & 1) as u8
        })
        .collect();
    Ok(out)
}

/// Two-sided frequency (monobit) test p-value `erfc(|S| / sqrt(2m))`.
pub fn monobit_p_value(bits: &[u8]) -> f64 {
    if bits.is_empty() {
        return 1.0;
    }
    let s: i64 = bits.iter().map(|&b| if b & 1 == 1 { 1 } else { -1 }).sum();
    statrs::function::erf::erfc(s.unsigned_abs() as f64 / (2.0 * bits.len() as f64).sqrt())
}

/// Bits packed eight per byte, most significant first, zero padded.
pub fn pack_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct RecordRow {
    round: usize,
    x: u8,
    y: u8,
    a: u8,
    b: u8,
}

pub fn write_records_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for (round, r) in records.iter().enumerate() {
        wr.serialize(RecordRow { round, x: r.x, y: r.y, a: r.a, b: r.b })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rd.deserialize::<RecordRow>().enumerate() {
        let row = row?;
        if row.round != i {
            return Err(Error::Parse(format!("record {i} is labelled round {}", row.round)));
        }
        out.push(TrialRecord { x: row.x, y: row.y, a: row.a, b: row.b });
    }
    Ok(out)
}

/// Writes `<stem>.bin` (packed bits) and `<stem>.hex` (hex dump, 32 bytes per line).
pub fn write_bits(bits: &[u8], dir: &Path, stem: &str) -> Result<()> {
    let bytes = pack_bytes(bits);
    std::fs::write(dir.join(format!("{stem}.bin")), &bytes)?;
    let mut hex = String::new();
    for line in bytes.chunks(32) {
        hex.push_str(&to_hex(line));
        hex.push('\n');
    }
    std::fs::write(dir.join(format!("{stem}.hex")), hex)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{deterministic_model, ideal_model};

    #[test]
    fn single_round() {
        let recs = simulate(&ideal_model().unwrap(), &ExperimentConfig::new(1, 7, 1e-6)).unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn deterministic_box_statistics() {
        let recs = simulate(&deterministic_model(), &ExperimentConfig::new(400, 3, 1e-3)).unwrap();
        let est = estimate(&recs, 1e-3).unwrap();
        assert!((est.bell_value - 2.0).abs() < 1e-12);
        assert_eq!(est.delta, 0.0);
    }

    #[test]
    fn missing_setting_rejected() {
        let recs = vec![TrialRecord { x: 0, y: 0, a: 0, b: 1 }; 10];
        assert!(matches!(estimate(&recs, 1e-3), Err(Error::MissingData(_))));
    }

    #[test]
    fn identity_seed_reproduces_input() {
        let bits = vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1];
        let k = bits.len();
        let mut seed = vec![0u8; 2 * k - 1];
        seed[k - 1] = 1;
        assert_eq!(toeplitz_extract(&bits, &seed, k, k).unwrap(), bits);
        assert!(toeplitz_extract(&bits, &seed, 0, 0).unwrap().is_empty());
        assert!(toeplitz_extract(&bits, &seed[1..], k, k).is_err());
        assert!(toeplitz_extract(&bits, &seed, k, k - 1).is_err());
    }

    #[test]
    fn no_violation_gives_no_bits() {
        let cfg = ExperimentConfig::new(1000, 1, 1e-3);
        let (cert, bits) = certify_summary(1.9, 0.0, 0.0, 0.0, &cfg, &CertifyOptions::default(), Some(&[0; 2000])).unwrap();
        assert_eq!(cert.p_star, 1.0);
        assert_eq!(cert.output_len, 0);
        assert!(bits.is_empty());
    }

    #[test]
    fn extractable_length_accounting() {
        assert_eq!(extractable_length(1000, 0.5, 0.5), 998);
        assert_eq!(extractable_length(10, 1.0, 1e-3), 0);
    }

    #[test]
    fn records_csv_round_trip() {
        let recs = simulate(&ideal_model().unwrap(), &ExperimentConfig::new(50, 9, 1e-3)).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("round,x,y,a,b"));
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), recs);
    }
}
