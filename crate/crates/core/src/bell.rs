//! Bipartite Bell scenarios, behaviors and Bell expressions.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::POLICY;

/// Number of inputs per party and outputs per input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub inputs: usize,
    pub outputs: usize,
}

impl Scenario {
    pub const CHSH: Scenario = Scenario { inputs: 2, outputs: 2 };

    pub fn new(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs < 2 || outputs < 2 {
            return Err(Error::InvalidArgument(format!(
                "a Bell scenario needs at least 2 inputs and 2 outputs, got {inputs} and {outputs}"
            )));
        }
        Ok(Scenario { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs * self.outputs * self.inputs * self.inputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * self.outputs + b) * self.inputs + x) * self.inputs + y
    }

    /// Iterates all `(a, b, x, y)` tuples in storage order.
    pub fn tuples(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        let (n, m) = (self.outputs, self.inputs);
        (0..n).flat_map(move |a| {
            (0..n).flat_map(move |b| (0..m).flat_map(move |x| (0..m).map(move |y| (a, b, x, y))))
        })
    }
}

/// Conditional probabilities `P(ab|xy)`. Marginals are derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    p: Vec<f64>,
}

impl Behavior {
    /// Validates normalization and non-negativity.
    pub fn new(scenario: Scenario, p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.len() {
            return Err(Error::Dimension(format!(
                "behavior has {} entries, scenario needs {}",
                p.len(),
                scenario.len()
            )));
        }
        let b = Behavior { scenario, p };
        b.validate()?;
        Ok(b)
    }

    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = vec![0.0; scenario.len()];
        for (a, b, x, y) in scenario.tuples() {
            p[scenario.index(a, b, x, y)] = f(a, b, x, y);
        }
        Behavior::new(scenario, p)
    }

    /// Builds a behavior from estimated frequencies. Entries down to
    /// `POLICY.clip_floor` are clipped to zero and each setting is renormalized.
    pub fn from_empirical(scenario: Scenario, mut p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.len() {
            return Err(Error::Dimension("empirical behavior has wrong length".into()));
        }
        for v in p.iter_mut() {
            if *v < POLICY.clip_floor {
                return Err(Error::InvalidArgument(format!("empirical probability {v} is too negative")));
            }
            *v = v.max(0.0);
        }
        for x in 0..scenario.inputs {
            for y in 0..scenario.inputs {
                let idx: Vec<usize> = (0..scenario.outputs)
                    .flat_map(|a| (0..scenario.outputs).map(move |b| (a, b)))
                    .map(|(a, b)| scenario.index(a, b, x, y))
                    .collect();
                let total: f64 = idx.iter().map(|&i| p[i]).sum();
                if total <= 0.0 {
                    return Err(Error::MissingData(format!("no probability mass for setting ({x},{y})")));
                }
                for i in idx {
                    p[i] /= total;
                }
            }
        }
        Behavior::new(scenario, p)
    }

    fn validate(&self) -> Result<()> {
        let s = self.scenario;
        if let Some(v) = self.p.iter().find(|v| !v.is_finite() || **v < POLICY.negative_entry) {
            return Err(Error::InvalidArgument(format!("invalid probability {v}")));
        }
        for x in 0..s.inputs {
            for y in 0..s.inputs {
                let total: f64 = (0..s.outputs)
                    .flat_map(|a| (0..s.outputs).map(move |b| (a, b)))
                    .map(|(a, b)| self.p[s.index(a, b, x, y)])
                    .sum();
                if (total - 1.0).abs() > POLICY.normalization {
                    return Err(Error::InvalidArgument(format!(
                        "setting ({x},{y}) sums to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn joint(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.scenario.index(a, b, x, y)]
    }

    /// `P(a|xy) = Σ_b P(ab|xy)`.
    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.outputs).map(|b| self.joint(a, b, x, y)).sum()
    }

    /// `P(b|xy) = Σ_a P(ab|xy)`.
    pub fn marginal_b(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.outputs).map(|a| self.joint(a, b, x, y)).sum()
    }

    /// `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &Behavior, w: f64) -> Result<Behavior> {
        if self.scenario != other.scenario {
            return Err(Error::Dimension("mixing behaviors of different scenarios".into()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("mixture weight {w} outside [0,1]")));
        }
        let p = self.p.iter().zip(&other.p).map(|(u, v)| w * u + (1.0 - w) * v).collect();
        Behavior::new(self.scenario, p)
    }

    /// Largest guessing probability `max_{ab} P(ab|xy)` over all targets.
    pub fn max_entry(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }

    // --- reference boxes ---

    /// Popescu–Rohrlich box: `P(ab|xy) = 1/2` iff `a ⊕ b = x·y`.
    pub fn pr_box() -> Behavior {
        Behavior::from_fn(Scenario::CHSH, |a, b, x, y| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
            .expect("PR box is normalized")
    }

    /// All outcomes equally likely.
    pub fn uniform(scenario: Scenario) -> Behavior {
        let n = scenario.outputs as f64;
        Behavior::from_fn(scenario, |_, _, _, _| 1.0 / (n * n)).expect("uniform box is normalized")
    }

    /// Deterministic box where each output may depend on both inputs
    /// (signaling whenever `fa` depends on `y` or `fb` on `x`).
    pub fn deterministic(
        scenario: Scenario,
        fa: impl Fn(usize, usize) -> usize,
        fb: impl Fn(usize, usize) -> usize,
    ) -> Result<Behavior> {
        Behavior::from_fn(scenario, |a, b, x, y| if fa(x, y) == a && fb(x, y) == b { 1.0 } else { 0.0 })
    }

    /// Local deterministic box `a = fa(x)`, `b = fb(y)`.
    pub fn local_deterministic(
        scenario: Scenario,
        fa: impl Fn(usize) -> usize,
        fb: impl Fn(usize) -> usize,
    ) -> Result<Behavior> {
        Behavior::deterministic(scenario, |x, _| fa(x), |_, y| fb(y))
    }

    // --- serialization ---

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BehaviorJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Behavior> {
        let raw: BehaviorJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["a", "b", "x", "y", "p"])?;
        for (a, b, x, y) in self.scenario.tuples() {
            let p = self.joint(a, b, x, y);
            wr.write_record([a.to_string(), b.to_string(), x.to_string(), y.to_string(), format!("{p:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `a,b,x,y,p` rows. Sizes are inferred from the largest labels.
    pub fn read_csv<R: Read>(r: R) -> Result<Behavior> {
        #[derive(Deserialize)]
        struct Row {
            a: usize,
            b: usize,
            x: usize,
            y: usize,
            p: f64,
        }
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(r).deserialize() {
            let row: Row = rec?;
            rows.push(row);
        }
        let outputs = rows.iter().map(|r| r.a.max(r.b)).max().unwrap_or(0) + 1;
        let inputs = rows.iter().map(|r| r.x.max(r.y)).max().unwrap_or(0) + 1;
        let s = Scenario::new(inputs, outputs)?;
        let mut p = vec![f64::NAN; s.len()];
        for r in rows {
            p[s.index(r.a, r.b, r.x, r.y)] = r.p;
        }
        if p.iter().any(|v| v.is_nan()) {
            return Err(Error::MissingData("behavior CSV does not cover every (a,b,x,y)".into()));
        }
        Behavior::new(s, p)
    }

    /// Loads a behavior from `.json` or `.csv` by extension.
    pub fn load(path: &Path) -> Result<Behavior> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Behavior::read_csv(text.as_bytes()),
            _ => Behavior::from_json(&text),
        }
    }
}

/// JSON form: `{"p": p[a][b][x][y]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorJson {
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<&Behavior> for BehaviorJson {
    fn from(b: &Behavior) -> Self {
        let s = b.scenario;
        let p = (0..s.outputs)
            .map(|a| {
                (0..s.outputs)
                    .map(|bb| (0..s.inputs).map(|x| (0..s.inputs).map(|y| b.joint(a, bb, x, y)).collect()).collect())
                    .collect()
            })
            .collect();
        BehaviorJson { p }
    }
}

impl TryFrom<BehaviorJson> for Behavior {
    type Error = Error;

    fn try_from(raw: BehaviorJson) -> Result<Behavior> {
        let outputs = raw.p.len();
        let inputs = raw.p.first().and_then(|r| r.first()).map(|r| r.len()).unwrap_or(0);
        let s = Scenario::new(inputs, outputs)?;
        let mut p = vec![0.0; s.len()];
        for (a, rb) in raw.p.iter().enumerate() {
            if rb.len() != outputs {
                return Err(Error::Parse("ragged behavior array (b)".into()));
            }
            for (b, rx) in rb.iter().enumerate() {
                if rx.len() != inputs {
                    return Err(Error::Parse("ragged behavior array (x)".into()));
                }
                for (x, ry) in rx.iter().enumerate() {
                    if ry.len() != inputs {
                        return Err(Error::Parse("ragged behavior array (y)".into()));
                    }
                    for (y, v) in ry.iter().enumerate() {
                        p[s.index(a, b, x, y)] = *v;
                    }
                }
            }
        }
        Behavior::new(s, p)
    }
}

/// Linear functional `Σ c_abxy P(ab|xy)` with coefficient mass `gamma = Σ|c|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellExpression {
    scenario: Scenario,
    coeffs: Vec<f64>,
    gamma: f64,
}

impl BellExpression {
    pub fn new(scenario: Scenario, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != scenario.len() {
            return Err(Error::Dimension("Bell coefficients do not match scenario".into()));
        }
        let gamma = coeffs.iter().map(|c| c.abs()).sum();
        Ok(BellExpression { scenario, coeffs, gamma })
    }

    /// CHSH: `c_abxy = (-1)^(a ⊕ b ⊕ xy)`; local bound 2, Tsirelson 2√2.
    pub fn chsh() -> Self {
        let s = Scenario::CHSH;
        let mut c = vec![0.0; s.len()];
        for (a, b, x, y) in s.tuples() {
            c[s.index(a, b, x, y)] = if (a ^ b ^ (x & y)) == 0 { 1.0 } else { -1.0 };
        }
        BellExpression::new(s, c).expect("CHSH coefficients are well formed")
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn coeff(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coeffs[self.scenario.index(a, b, x, y)]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Evaluates the Bell expression on a behavior.
pub fn evaluate(expr: &BellExpression, p: &Behavior) -> Result<f64> {
    if expr.scenario != p.scenario {
        return Err(Error::Dimension("Bell expression and behavior scenarios differ".into()));
    }
    Ok(expr.coeffs.iter().zip(&p.p).map(|(c, v)| c * v).sum())
}

/// Largest marginal change one party's input induces on the other's output.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SignalingDelta(pub f64);

impl SignalingDelta {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn signaling_delta(p: &Behavior) -> SignalingDelta {
    let s = p.scenario;
    let mut delta = 0.0f64;
    for x in 0..s.inputs {
        for y in 0..s.inputs {
            for y2 in (y + 1)..s.inputs {
                for a in 0..s.outputs {
                    delta = delta.max((p.marginal_a(a, x, y) - p.marginal_a(a, x, y2)).abs());
                }
            }
        }
    }
    for y in 0..s.inputs {
        for x in 0..s.inputs {
            for x2 in (x + 1)..s.inputs {
                for b in 0..s.outputs {
                    delta = delta.max((p.marginal_b(b, x, y) - p.marginal_b(b, x2, y)).abs());
                }
            }
        }
    }
    SignalingDelta(delta.min(1.0))
}

/// Signaling budget implied by cross-talk `chi`: `2 N chi`.
pub fn delta_from_chi(s: Scenario, chi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::InvalidArgument(format!("chi = {chi} outside [0,1]")));
    }
    Ok(2.0 * s.outputs as f64 * chi)
}
