use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use xtalk::bell::{delta_from_chi, evaluate, BellExpression, Behavior, Scenario};
use xtalk::bounds::{bound_shifted, bound_signaling, ClosedFormCurve, GridCurve, ZeroCurve, TSIRELSON};
use xtalk::lp::{p_star_lp, BellConstraint};
use xtalk::models::{
    born_behavior, deterministic_model, ideal_model, ion_chi_bound, ion_model, josephson_chi_bound, josephson_model,
    DeviceModel, IonParams, JosephsonParams, SettingAngles,
};
use xtalk::pipeline::{self, CertifyOptions, ExperimentConfig, Method};
use xtalk::relax::{
    chi_lower_bound_simple, max_bell_given_chi, min_chi_bisection, min_chi_program, p_star_sdp, randomness_program,
    solve_relaxation, zero_curve_grid, Level, MonomialSet, DEFAULT_EPS_PIN,
};
use xtalk::sdp::{validate_certificate, SolverOptions};

use crate::config::{echo, resolve, sig10};
use crate::{save, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_level(s: &str) -> Result<Level, CliError> {
    Ok(s.parse::<Level>()?)
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    Ok(s.parse::<Method>()?)
}

fn check_unit(name: &str, v: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(usage(format!("{name} = {v} outside [0,1]")));
    }
    Ok(())
}

/// Zero-cross-talk curve plugged into the shifted bound.
fn zero_curve(kind: &str, level: Level, steps: usize, opts: &SolverOptions) -> Result<Box<dyn ZeroCurve + Send + Sync>, CliError> {
    match kind {
        "closed-form" => Ok(Box::new(ClosedFormCurve)),
        "grid" => {
            let g: GridCurve = zero_curve_grid(&BellExpression::chsh(), &level.into(), steps, opts)?;
            Ok(Box::new(g))
        }
        _ => Err(usage(format!("unknown zero curve '{kind}' (expected closed-form, grid)"))),
    }
}

/// At `χ = 0` the equality-constrained program has no interior at `2√2`;
/// just below it gives a value that bounds the curve at `2√2` as well.
fn sdp_bell(i: f64, chi: f64) -> f64 {
    if chi == 0.0 {
        i.min(TSIRELSON - 1e-7)
    } else {
        i
    }
}

/// Certified `P*_00` with every dual certificate revalidated.
fn sdp_p00(i: f64, chi: f64, level: Level, opts: &SolverOptions) -> Result<f64, CliError> {
    let chsh = BellExpression::chsh();
    let set = MonomialSet::new(level);
    let i = sdp_bell(i, chi);
    let r = p_star_sdp(&chsh, i, chi, (0, 0), &set, BellConstraint::Equal, opts)?;
    for (t, sol) in r.table.iter().zip(&r.solutions) {
        let prob = randomness_program(&chsh, i, chi, (t.a, t.b, 0, 0), &set, BellConstraint::Equal)?;
        validate_certificate(&prob.conic, &sol.report)?;
    }
    Ok(r.value)
}

fn emit(lines: &[String]) {
    for l in lines {
        println!("{l}");
    }
}

fn csv_row(cells: &[String]) -> String {
    cells.join(",")
}

// ---------------------------------------------------------------- bound

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Bell (CHSH) value.
    #[arg(long = "I", allow_hyphen_values = true)]
    #[serde(rename = "I")]
    bell: Option<f64>,
    /// Cross-talk budget.
    #[arg(long)]
    chi: Option<f64>,
    /// Signaling budget for the LP method (default 2N·chi).
    #[arg(long)]
    delta: Option<f64>,
    /// analytic, lp or sdp.
    #[arg(long)]
    method: Option<String>,
    /// Relaxation level for sdp: l1, l1+xy, l1+xy+zw, l2r, l2.
    #[arg(long)]
    level: Option<String>,
    /// Zero-cross-talk curve for the analytic method: closed-form or grid.
    #[arg(long)]
    zero_curve: Option<String>,
    /// Grid points for the grid zero curve.
    #[arg(long)]
    zero_steps: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn bound(args: BoundArgs) -> Result<(), CliError> {
    let mut a = resolve("bound", args.config.as_deref(), &args)?;
    let bell = a.bell.ok_or_else(|| usage("--I is required"))?;
    let chi = *a.chi.get_or_insert(0.0);
    check_unit("chi", chi)?;
    let method = parse_method(a.method.get_or_insert_with(|| "sdp".into()))?;
    let level = parse_level(a.level.get_or_insert_with(|| "l2r".into()))?;
    let zc = a.zero_curve.get_or_insert_with(|| "closed-form".into()).clone();
    let zsteps = *a.zero_steps.get_or_insert(20);
    let format = *a.format.get_or_insert(Format::Csv);
    if method == Method::Lp {
        a.delta.get_or_insert(delta_from_chi(Scenario::CHSH, chi)?);
    }
    let delta = a.delta;
    if let Some(d) = delta {
        check_unit("delta", d)?;
    }
    if !(-4.0..=4.0).contains(&bell) {
        return Err(usage(format!("I = {bell} outside [-4,4]")));
    }
    let opts = SolverOptions::default();
    println!("{}", echo("bound", &a));

    let (p_star, certified) = match method {
        Method::Analytic => {
            let curve = zero_curve(&zc, level, zsteps, &opts)?;
            (bound_shifted(bell, chi, BellExpression::chsh().gamma(), curve.as_ref())?, format!("{}-curve", curve.name()))
        }
        Method::Lp => (p_star_lp(bell, delta.unwrap_or(0.0), BellConstraint::Equal)?.value, "lp-dual".into()),
        Method::Sdp => {
            if bell > TSIRELSON + 16.0 * chi + 1e-9 {
                return Err(usage(format!("I = {bell} is out of reach with chi = {chi}")));
            }
            if bell <= 2.0 {
                (1.0, "trivial".into())
            } else {
                (sdp_p00(bell, chi, level, &opts)?, "sdp-dual-revalidated".into())
            }
        }
    };
    let level_name = if method == Method::Sdp || zc == "grid" { level.name() } else { "-" };
    let text = match format {
        Format::Csv => {
            let head = "method,level,I,chi,delta,p_star,certified".to_string();
            let row = csv_row(&[
                method.name().into(),
                level_name.into(),
                sig10(bell),
                sig10(chi),
                delta.map(sig10).unwrap_or_default(),
                sig10(p_star),
                certified,
            ]);
            vec![head, row]
        }
        Format::Json => vec![json!({
            "method": method.name(), "level": level_name, "I": bell, "chi": chi, "delta": delta,
            "p_star": p_star, "certified": certified,
        })
        .to_string()],
    };
    emit(&text);
    save(a.out_dir.as_ref(), "bound.out", &(text.join("\n") + "\n"))
}

// ---------------------------------------------------------------- curve

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long = "I-min")]
    #[serde(rename = "I_min")]
    bell_min: Option<f64>,
    #[arg(long = "I-max")]
    #[serde(rename = "I_max")]
    bell_max: Option<f64>,
    /// Number of rows (at least 2).
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated subset of zero, sdp, shifted, signaling.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    level: Option<String>,
    /// Zero curve inside the shifted bound: closed-form or grid.
    #[arg(long)]
    zero_curve: Option<String>,
    #[arg(long)]
    zero_steps: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

const CURVE_METHODS: [&str; 4] = ["zero", "sdp", "shifted", "signaling"];

pub fn curve(args: CurveArgs) -> Result<(), CliError> {
    let mut a = resolve("curve", args.config.as_deref(), &args)?;
    let chi = *a.chi.get_or_insert(0.01);
    check_unit("chi", chi)?;
    let lo = *a.bell_min.get_or_insert(2.0);
    let hi = *a.bell_max.get_or_insert(TSIRELSON);
    let steps = *a.steps.get_or_insert(20);
    let methods: Vec<String> = a
        .methods
        .get_or_insert_with(|| CURVE_METHODS.join(","))
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let level = parse_level(a.level.get_or_insert_with(|| "l1+xy".into()))?;
    let zc = a.zero_curve.get_or_insert_with(|| "closed-form".into()).clone();
    let zsteps = *a.zero_steps.get_or_insert(20);
    let format = *a.format.get_or_insert(Format::Csv);
    if steps < 2 {
        return Err(usage("--steps must be at least 2"));
    }
    if let Some(m) = methods.iter().find(|m| !CURVE_METHODS.contains(&m.as_str())) {
        return Err(usage(format!("unknown curve method '{m}'")));
    }
    if !(2.0 <= lo && lo < hi && hi <= TSIRELSON + 1e-12) {
        return Err(usage(format!("need 2 ≤ I-min < I-max ≤ 2√2, got [{lo}, {hi}]")));
    }
    let opts = SolverOptions::default();
    println!("{}", echo("curve", &a));

    let shifted_curve = if methods.iter().any(|m| m == "shifted") { Some(zero_curve(&zc, level, zsteps, &opts)?) } else { None };
    let gamma = BellExpression::chsh().gamma();
    let delta = delta_from_chi(Scenario::CHSH, chi)?;
    let grid: Vec<f64> = (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect();
    let rows: Vec<(f64, Vec<Result<f64, String>>)> = grid
        .par_iter()
        .map(|&i| {
            let vals = methods
                .iter()
                .map(|m| {
                    let r: Result<f64, CliError> = match m.as_str() {
                        "zero" => sdp_p00(i, 0.0, level, &opts),
                        "sdp" => sdp_p00(i, chi, level, &opts),
                        "shifted" => bound_shifted(i, chi, gamma, shifted_curve.as_deref().expect("built above")).map_err(CliError::from),
                        _ => bound_signaling(i, delta.min(1.0)).map_err(CliError::from),
                    };
                    r.map_err(|e| format!("{e:?}"))
                })
                .collect();
            (i, vals)
        })
        .collect();

    let col = |name: &str| methods.iter().position(|m| m == name);
    let mut failed = false;
    let mut lines = Vec::new();
    let mut json_rows = Vec::new();
    if format == Format::Csv {
        lines.push(format!("I,{},ordered,status", methods.join(",")));
    }
    for (i, vals) in &rows {
        let ok = vals.iter().all(|v| v.is_ok());
        failed |= !ok;
        let get = |name: &str| col(name).and_then(|c| vals[c].as_ref().ok().copied());
        // Sandwich zero ≤ sdp ≤ shifted, on whichever columns are present.
        let chain: Vec<f64> = ["zero", "sdp", "shifted"].iter().filter_map(|n| get(n)).collect();
        let ordered = chain.windows(2).all(|w| w[0] <= w[1] + 1e-6);
        let status = if ok { "ok".to_string() } else { "failed".to_string() };
        match format {
            Format::Csv => {
                let mut cells = vec![sig10(*i)];
                cells.extend(vals.iter().map(|v| v.as_ref().map(|x| sig10(*x)).unwrap_or_else(|_| "nan".into())));
                cells.push(ordered.to_string());
                cells.push(status);
                lines.push(csv_row(&cells));
            }
            Format::Json => {
                let mut obj = serde_json::Map::new();
                obj.insert("I".into(), json!(i));
                for (m, v) in methods.iter().zip(vals) {
                    obj.insert(m.clone(), v.as_ref().map(|x| json!(x)).unwrap_or(Value::Null));
                }
                obj.insert("ordered".into(), json!(ordered));
                obj.insert("status".into(), json!(status));
                if let Some(e) = vals.iter().find_map(|v| v.as_ref().err()) {
                    obj.insert("error".into(), json!(e));
                }
                json_rows.push(Value::Object(obj));
            }
        }
    }
    if format == Format::Json {
        lines.push(Value::Array(json_rows).to_string());
    }
    emit(&lines);
    save(a.out_dir.as_ref(), if format == Format::Csv { "curve.csv" } else { "curve.json" }, &(lines.join("\n") + "\n"))?;
    if failed {
        return Err(CliError::Numeric("one or more curve points failed".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- chi

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Behavior file (.json with p[a][b][x][y], or .csv with a,b,x,y,p).
    #[arg(long)]
    behavior: Option<PathBuf>,
    /// ion or josephson.
    #[arg(long)]
    model: Option<String>,
    /// Ion setting leakage.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Josephson tunnelling probability of A.
    #[arg(long = "pA")]
    #[serde(rename = "pA")]
    p_a: Option<f64>,
    /// Josephson tunnelling probability of B.
    #[arg(long = "pB")]
    #[serde(rename = "pB")]
    p_b: Option<f64>,
    #[arg(long)]
    level: Option<String>,
    /// Pin band for the minimal-cross-talk program.
    #[arg(long)]
    eps_pin: Option<f64>,
    /// Also bisect on chi with full-depth localizing blocks.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    refine: Option<bool>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

struct Quantity {
    name: &'static str,
    value: f64,
    kind: &'static str,
}

pub fn chi(args: ChiArgs) -> Result<(), CliError> {
    let mut a = resolve("chi", args.config.as_deref(), &args)?;
    if a.behavior.is_some() == a.model.is_some() {
        return Err(usage("give exactly one of --behavior or --model"));
    }
    let level = parse_level(a.level.get_or_insert_with(|| "l2r".into()))?;
    let eps_pin = *a.eps_pin.get_or_insert(DEFAULT_EPS_PIN);
    let refine = *a.refine.get_or_insert(false);
    let format = *a.format.get_or_insert(Format::Csv);
    let model: Option<(DeviceModel, Vec<Quantity>)> = match a.model.as_deref() {
        None => None,
        Some("ion") => {
            let p = IonParams::new(*a.epsilon.get_or_insert(0.03))?;
            let q = vec![Quantity { name: "model_upper", value: ion_chi_bound(p)?, kind: "upper" }];
            Some((ion_model(p)?, q))
        }
        Some("josephson") => {
            let p = JosephsonParams::new(*a.p_a.get_or_insert(0.0059), *a.p_b.get_or_insert(0.0031))?;
            Some((josephson_model(p, &SettingAngles::default())?, Vec::new()))
        }
        Some(other) => return Err(usage(format!("unknown model '{other}' (expected ion, josephson)"))),
    };
    let behavior = match (&a.behavior, &model) {
        (Some(path), _) => Behavior::load(path)?,
        (None, Some((m, _))) => born_behavior(m)?,
        _ => unreachable!(),
    };
    if behavior.scenario() != Scenario::CHSH {
        return Err(usage("behavior must have two inputs and two outputs per party"));
    }
    println!("{}", echo("chi", &a));

    let mut out: Vec<Quantity> = Vec::new();
    if let Some((_, q)) = model {
        out.extend(q);
        if a.model.as_deref() == Some("josephson") {
            let p = JosephsonParams::new(a.p_a.unwrap_or(0.0059), a.p_b.unwrap_or(0.0031))?;
            let j = josephson_chi_bound(p)?;
            out.push(Quantity { name: "model_upper", value: j.chi, kind: "upper" });
            out.push(Quantity { name: "q_a", value: j.q_a, kind: "argmin" });
            out.push(Quantity { name: "q_b", value: j.q_b, kind: "argmin" });
        }
    }
    let opts = SolverOptions::default();
    let set = MonomialSet::new(level);
    let simple = chi_lower_bound_simple(&behavior);
    out.push(Quantity { name: "bell_value", value: evaluate(&BellExpression::chsh(), &behavior)?, kind: "observed" });
    out.push(Quantity { name: "delta_over_2n", value: simple, kind: "lower" });
    let prob = min_chi_program(&behavior, &set, eps_pin)?;
    let sol = solve_relaxation(&prob, &opts)?;
    validate_certificate(&prob.conic, &sol.report)?;
    let sdp_lower = sol.bound.max(0.0);
    out.push(Quantity { name: "min_chi_sdp", value: sdp_lower, kind: "lower" });
    if refine {
        let start = sdp_lower.max(simple);
        // Any feasible model bounds the minimum from above; 1 always is.
        let hi = out.iter().find(|q| q.name == "model_upper").map(|q| q.value).unwrap_or(1.0).max(start * 2.0 + 1e-6).min(1.0);
        if start < hi {
            let br = min_chi_bisection(&behavior, &set, eps_pin, (start, hi), 0.01, &opts)?;
            out.push(Quantity { name: "min_chi_refined", value: br.lower, kind: "lower" });
        }
    }

    let lines: Vec<String> = match format {
        Format::Csv => std::iter::once("quantity,value,kind".to_string())
            .chain(out.iter().map(|q| csv_row(&[q.name.into(), sig10(q.value), q.kind.into()])))
            .collect(),
        Format::Json => vec![Value::Array(
            out.iter().map(|q| json!({"quantity": q.name, "value": q.value, "kind": q.kind})).collect(),
        )
        .to_string()],
    };
    emit(&lines);
    save(a.out_dir.as_ref(), "chi.out", &(lines.join("\n") + "\n"))
}

// ---------------------------------------------------------------- certify

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// ideal, josephson, ion or deterministic.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "pA")]
    #[serde(rename = "pA")]
    p_a: Option<f64>,
    #[arg(long = "pB")]
    #[serde(rename = "pB")]
    p_b: Option<f64>,
    /// Number of rounds.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trusted cross-talk budget.
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    eps_sec: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Directory for records.csv, certificate.json, bits.bin and bits.hex.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn certify(args: CertifyArgs) -> Result<(), CliError> {
    let mut a = resolve("certify", args.config.as_deref(), &args)?;
    let model = match a.model.get_or_insert_with(|| "ideal".into()).as_str() {
        "ideal" => ideal_model()?,
        "deterministic" => deterministic_model(),
        "ion" => ion_model(IonParams::new(*a.epsilon.get_or_insert(0.03))?)?,
        "josephson" => josephson_model(
            JosephsonParams::new(*a.p_a.get_or_insert(0.0059), *a.p_b.get_or_insert(0.0031))?,
            &SettingAngles::default(),
        )?,
        other => return Err(usage(format!("unknown model '{other}' (expected ideal, josephson, ion, deterministic)"))),
    };
    let cfg = ExperimentConfig::new(*a.n.get_or_insert(100_000), *a.seed.get_or_insert(0), *a.eps_sec.get_or_insert(1e-6));
    cfg.validate()?;
    let chi = *a.chi.get_or_insert(0.0);
    check_unit("chi", chi)?;
    let opts = CertifyOptions {
        method: parse_method(a.method.get_or_insert_with(|| "sdp".into()))?,
        level: parse_level(a.level.get_or_insert_with(|| "l1+xy".into()))?,
        solver: SolverOptions::default(),
    };
    let dir = a.out_dir.get_or_insert_with(|| PathBuf::from(".")).clone();
    let format = *a.format.get_or_insert(Format::Csv);
    println!("{}", echo("certify", &a));

    let out = pipeline::run(&model, chi, &cfg, &opts)?;
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let io = |e: std::io::Error| usage(format!("{}: {e}", dir.display()));
    let f = std::fs::File::create(dir.join("records.csv")).map_err(io)?;
    pipeline::write_records_csv(&out.records, std::io::BufWriter::new(f))?;
    std::fs::write(dir.join("certificate.json"), out.certificate.to_json()? + "\n").map_err(io)?;
    pipeline::write_bits(&out.bits, &dir, "bits")?;

    let c = &out.certificate;
    match format {
        Format::Csv => println!(
            "I_hat={} I_adj={} P*={} bits={}",
            sig10(c.bell_value),
            sig10(c.bell_adjusted),
            sig10(c.p_star),
            c.output_len
        ),
        Format::Json => println!(
            "{}",
            json!({"I_hat": c.bell_value, "I_adj": c.bell_adjusted, "p_star": c.p_star, "bits": c.output_len})
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------- regions

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Comma-separated cross-talk budgets.
    #[arg(long)]
    chi_list: Option<String>,
    /// Mixture weights sampled on [0, 1].
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn regions(args: RegionsArgs) -> Result<(), CliError> {
    let mut a = resolve("regions", args.config.as_deref(), &args)?;
    let chis: Vec<f64> = a
        .chi_list
        .get_or_insert_with(|| "0,0.001,0.003,0.01,0.03,0.1,1".into())
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| usage(format!("chi list entry '{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    for &c in &chis {
        check_unit("chi", c)?;
    }
    let steps = *a.steps.get_or_insert(11);
    if steps < 2 {
        return Err(usage("--steps must be at least 2"));
    }
    let level = parse_level(a.level.get_or_insert_with(|| "l1+xy".into()))?;
    let format = *a.format.get_or_insert(Format::Csv);
    println!("{}", echo("regions", &a));

    let opts = SolverOptions::default();
    let set = MonomialSet::new(level);
    let chsh = BellExpression::chsh();
    let max_bell: Vec<Result<f64, String>> = chis
        .par_iter()
        .map(|&c| {
            max_bell_given_chi(&chsh, c, &set).and_then(|p| solve_relaxation(&p, &opts)).map(|s| s.bound).map_err(|e| e.to_string())
        })
        .collect();
    let weights: Vec<f64> = (0..steps).map(|k| k as f64 / (steps - 1) as f64).collect();
    let mixture: Vec<(f64, Result<(f64, f64), String>)> = weights
        .par_iter()
        .map(|&v| {
            let r = (|| {
                let p = Behavior::pr_box().mix(&Behavior::uniform(Scenario::CHSH), v)?;
                let i = evaluate(&chsh, &p)?;
                let sol = solve_relaxation(&min_chi_program(&p, &set, DEFAULT_EPS_PIN)?, &opts)?;
                Ok::<_, xtalk::Error>((i, sol.bound.max(0.0)))
            })();
            (v, r.map_err(|e| e.to_string()))
        })
        .collect();

    let mut failed = false;
    let mut lines = Vec::new();
    let mut json_rows = Vec::new();
    if format == Format::Csv {
        lines.push("kind,param,bell_value,min_chi,status".to_string());
    }
    let mut push = |kind: &str, param: f64, bell: Option<f64>, chi: Option<f64>, err: Option<&String>| {
        failed |= err.is_some();
        let status = if err.is_some() { "failed" } else { "ok" };
        match format {
            Format::Csv => lines.push(csv_row(&[
                kind.into(),
                sig10(param),
                bell.map(sig10).unwrap_or_else(|| "nan".into()),
                chi.map(sig10).unwrap_or_else(|| "nan".into()),
                status.into(),
            ])),
            Format::Json => json_rows.push(json!({
                "kind": kind, "param": param, "bell_value": bell, "min_chi": chi, "status": status, "error": err,
            })),
        }
    };
    for (&c, r) in chis.iter().zip(&max_bell) {
        push("max-bell", c, r.as_ref().ok().copied(), Some(c), r.as_ref().err());
    }
    for (v, r) in &mixture {
        match r {
            Ok((i, m)) => push("mixture", *v, Some(*i), Some(*m), None),
            Err(e) => push("mixture", *v, None, None, Some(e)),
        }
    }
    if format == Format::Json {
        lines.push(Value::Array(json_rows).to_string());
    }
    emit(&lines);
    save(a.out_dir.as_ref(), if format == Format::Csv { "regions.csv" } else { "regions.json" }, &(lines.join("\n") + "\n"))?;
    if failed {
        return Err(CliError::Numeric("one or more region points failed".into()));
    }
    Ok(())
}
