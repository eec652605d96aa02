//! Command-line front end: argument parsing, experiment manifests and
//! CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use halfline::classifier::{classify, q_prediction, Verdict};
use halfline::lattice::{extract_embedded, fit_embedded_tail, LatticeVariant};
use halfline::lyapunov::{
    drift_asymptotic, drift_log, drift_power, drift_sqrtlog, feasible_weights, solve_crit_lambda, LyapunovWeights,
    Mode,
};
use halfline::model::presets::{preset, PresetFamily};
use halfline::model::{validate, ComplexModel, RawModel};
use halfline::sampler::{
    excursion_samples, fit_tail, recurrence_probe, run_excursions, stream_rng, Estimator, ProbeParams, WalkState,
};
use halfline::specfun::{i_integral, j_integral, IKind, IntegralFamilyParams, JKind, Method};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "halfline", version, about = "Heavy-tailed walks on complexes of half-lines")]
struct Cli {
    /// Master seed; required by simulate, moments, probe and lattice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Manifest path; defaults to `<out>.manifest.json`, or stderr without --out.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Check a model file and report every violation.
    Validate(ModelArgs),
    /// Cotangent criterion, verdict and moment prediction.
    Classify(ModelArgs),
    /// Closed form against quadrature for one i/j integral.
    Integrals(IntegralsArgs),
    /// Lyapunov drift on a grid of heights.
    DriftScan(DriftScanArgs),
    /// Simulate excursions and record return times.
    Simulate(SimulateArgs),
    /// Tail index of the return time.
    Moments(MomentsArgs),
    /// Empirical recurrence diagnostics.
    Probe(ProbeArgs),
    /// Embedded chain of a lattice walk.
    Lattice(LatticeArgs),
    /// Emit a two-branch preset model file.
    Presets(PresetsArgs),
    /// Re-run the experiment recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Classify(_) => "classify",
            Command::Integrals(_) => "integrals",
            Command::DriftScan(_) => "drift-scan",
            Command::Simulate(_) => "simulate",
            Command::Moments(_) => "moments",
            Command::Probe(_) => "probe",
            Command::Lattice(_) => "lattice",
            Command::Presets(_) => "presets",
            Command::Replay(_) => "replay",
        }
    }

    fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Command::Simulate(_) | Command::Moments(_) | Command::Probe(_) | Command::Lattice(_)
        )
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Integrals(_) | Command::DriftScan(_) | Command::Simulate(_) | Command::Lattice(_) => Format::Csv,
            _ => Format::Json,
        }
    }

    fn supports_csv(&self) -> bool {
        self.default_format() == Format::Csv
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ModelArgs {
    model: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct IntegralsArgs {
    /// i0, i20, i21, i1, i1_tilde, j0, j1, j2 or j1_tilde.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    alpha: f64,
    /// closed, quad or both.
    #[arg(long, default_value = "both")]
    method: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct DriftScanArgs {
    model: PathBuf,
    /// power, log or sqrtlog.
    #[arg(long, default_value = "power")]
    mode: String,
    #[arg(long)]
    nu: Option<f64>,
    /// lo:hi:log or lo:hi:log:N.
    #[arg(long, default_value = "1e2:1e6:log")]
    x_grid: String,
    /// `auto` or a JSON file holding one weight per branch.
    #[arg(long, default_value = "auto")]
    weights: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct StartArgs {
    #[arg(long, default_value_t = 100.0)]
    start_x: f64,
    /// Branch id; the first branch when absent.
    #[arg(long)]
    start_branch: Option<String>,
    /// Return level.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long)]
    excursions: usize,
    #[arg(long, default_value_t = 1e7)]
    horizon: f64,
    #[command(flatten)]
    start: StartArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct MomentsArgs {
    model: PathBuf,
    #[arg(long)]
    excursions: usize,
    #[arg(long, default_value_t = 1e7)]
    horizon: f64,
    #[command(flatten)]
    start: StartArgs,
    /// hill or loglog.
    #[arg(long, default_value = "hill")]
    estimator: String,
    /// Order statistic count for Hill.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ProbeArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    walks: usize,
    /// Comma-separated horizons.
    #[arg(long, default_value = "1e3,1e4,1e5")]
    horizons: String,
    #[command(flatten)]
    start: StartArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct LatticeArgs {
    /// example41, example42a or example42b.
    #[arg(long)]
    variant: String,
    #[arg(long)]
    returns: usize,
    #[arg(long, default_value_t = 0)]
    start_x: i64,
    /// Lattice steps allowed per excursion before censoring.
    #[arg(long, default_value_t = 100_000_000)]
    cap: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct PresetsArgs {
    /// sym, osc1, osc2 or osc3.
    #[arg(long)]
    family: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ReplayArgs {
    manifest: PathBuf,
}

/// Inputs read from files, embedded in the manifest for replay.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<RawModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    seed: Option<u64>,
    format: Format,
    out: Option<PathBuf>,
    config: Command,
    inputs: Inputs,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<halfline::Error> for CliError {
    fn from(e: halfline::Error) -> Self {
        match e {
            halfline::Error::NumericFailure { .. } | halfline::Error::InsufficientData { .. } => {
                CliError::Numeric(e.to_string())
            }
            halfline::Error::Validation(v) => CliError::Invalid(format!("invalid model:\n  {}", v.join("\n  "))),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Float in the 17-significant-digit CSV form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path, inputs: &mut Inputs) -> CliResult<ComplexModel> {
    let raw = match &inputs.model {
        Some(raw) => raw.clone(),
        None => serde_json::from_str::<RawModel>(&read_file(path)?)
            .map_err(|e| invalid(format!("malformed model file {}: {e}", path.display())))?,
    };
    let model = validate(&raw)?;
    inputs.model = Some(raw);
    Ok(model)
}

fn start_state(model: &ComplexModel, s: &StartArgs) -> CliResult<WalkState> {
    let branch = match &s.start_branch {
        Some(id) => model
            .index_of(id)
            .ok_or_else(|| invalid(format!("unknown start branch '{id}'")))?,
        None => 0,
    };
    Ok(WalkState::new(s.start_x, branch))
}

fn horizon_u64(h: f64) -> CliResult<u64> {
    if !(h >= 1.0) || h > 1e18 {
        return Err(invalid(format!("horizon must lie in [1, 1e18], got {h}")));
    }
    Ok(h.round() as u64)
}

/// Parse `lo:hi:log` (five points per decade) or `lo:hi:log:N`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 || parts[2] != "log" {
        return Err(format!("grid must look like lo:hi:log[:N], got '{spec}'"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number '{s}' in grid"));
    let (lo, hi) = (num(parts[0])?, num(parts[1])?);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("grid needs 0 < lo < hi, got {lo}:{hi}"));
    }
    let n = match parts.get(3) {
        Some(s) => s.parse::<usize>().map_err(|_| format!("bad point count '{s}'"))?,
        None => (5.0 * (hi / lo).log10()).round() as usize + 1,
    };
    if n < 2 {
        return Err("grid needs at least two points".into());
    }
    let (l0, l1) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|k| match k {
            0 => lo,
            k if k == n - 1 => hi,
            k => 10f64.powf(l0 + (l1 - l0) * k as f64 / (n - 1) as f64),
        })
        .collect())
}

fn parse_horizons(spec: &str) -> CliResult<Vec<u64>> {
    spec.split(',')
        .map(|s| {
            let h = s.trim().parse::<f64>().map_err(|_| invalid(format!("bad horizon '{s}'")))?;
            horizon_u64(h)
        })
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn execute(cmd: &Command, seed: Option<u64>, format: Format, inputs: &mut Inputs) -> CliResult<String> {
    let json_out = format == Format::Json;
    match cmd {
        Command::Validate(a) => {
            let model = load_model(&a.model, inputs)?;
            Ok(to_json(&json!({
                "valid": true,
                "branches": model.len(),
                "max_chi_alpha": model.max_chi_alpha(),
            })))
        }
        Command::Classify(a) => {
            let model = load_model(&a.model, inputs)?;
            let c = classify(&model)?;
            let q = q_prediction(&model)?;
            Ok(to_json(&json!({
                "criterion": c.criterion_value,
                "max_chi_alpha": c.max_chi_alpha,
                "verdict": c.verdict,
                "q_prediction": q,
            })))
        }
        Command::Integrals(a) => integrals(a, json_out),
        Command::DriftScan(a) => drift_scan(a, json_out, inputs),
        Command::Simulate(a) => {
            let model = load_model(&a.model, inputs)?;
            let start = start_state(&model, &a.start)?;
            let recs = run_excursions(&model, start, a.start.a, horizon_u64(a.horizon)?, a.excursions, seed.unwrap())?;
            if json_out {
                return Ok(to_json(&recs));
            }
            let mut s = String::from("idx,tau,censored,max_x,end_branch\n");
            for (i, r) in recs.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{i},{},{},{},{}",
                    r.tau,
                    r.censored,
                    fmt_f64(r.max_x),
                    model.branch(r.end.branch).id
                );
            }
            Ok(s)
        }
        Command::Moments(a) => {
            let model = load_model(&a.model, inputs)?;
            let start = start_state(&model, &a.start)?;
            let estimator = match a.estimator.as_str() {
                "hill" => Estimator::Hill,
                "loglog" => Estimator::LoglogCcdf,
                other => return Err(invalid(format!("unknown estimator '{other}'"))),
            };
            let horizon = horizon_u64(a.horizon)?;
            let seed = seed.unwrap();
            let recs = run_excursions(&model, start, a.start.a, horizon, a.excursions, seed)?;
            let fit = fit_tail(&excursion_samples(&recs), horizon as f64, estimator, a.k, seed)?;
            Ok(to_json(&fit))
        }
        Command::Probe(a) => {
            let model = load_model(&a.model, inputs)?;
            let mut params = ProbeParams::new(a.walks, seed.unwrap());
            params.horizons = parse_horizons(&a.horizons)?;
            params.start = start_state(&model, &a.start)?;
            params.a = a.start.a;
            Ok(to_json(&recurrence_probe(&model, &params)?))
        }
        Command::Lattice(a) => {
            let variant =
                LatticeVariant::parse(&a.variant).ok_or_else(|| invalid(format!("unknown variant '{}'", a.variant)))?;
            let mut rng = stream_rng(seed.unwrap(), 0);
            let sample = extract_embedded(variant, (a.start_x, 0), a.returns, a.cap, &mut rng)?;
            if json_out {
                let fit = fit_embedded_tail(&sample, a.cap).ok();
                return Ok(to_json(&json!({
                    "variant": variant,
                    "returns": sample.steps.len(),
                    "censored": sample.n_censored(),
                    "tail_fit": fit,
                })));
            }
            let mut s = String::from("idx,from,jump,side,steps,censored\n");
            for (i, st) in sample.steps.iter().enumerate() {
                let jump = st.jump.map(|j| j.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{i},{},{jump},{},{},{}", st.from, st.side, st.steps, st.jump.is_none());
            }
            Ok(s)
        }
        Command::Presets(a) => {
            let family =
                PresetFamily::parse(&a.family).ok_or_else(|| invalid(format!("unknown family '{}'", a.family)))?;
            let beta = match (family, a.beta) {
                (PresetFamily::Sym, b) => b.unwrap_or(a.alpha),
                (_, Some(b)) => b,
                (_, None) => return Err(invalid(format!("--beta is required for {}", family.name()))),
            };
            let model = preset(family, a.alpha, beta)?;
            let mut s = model.to_json();
            if !s.ends_with('\n') {
                s.push('\n');
            }
            Ok(s)
        }
        Command::Replay(_) => Err(invalid("a manifest cannot replay another replay")),
    }
}

fn integrals(a: &IntegralsArgs, json_out: bool) -> CliResult<String> {
    let (closed, quad) = match a.method.as_str() {
        "both" => (true, true),
        "closed" => (true, false),
        "quad" => (false, true),
        other => return Err(invalid(format!("unknown method '{other}'"))),
    };
    let ikind = IKind::ALL.iter().copied().find(|k| k.name() == a.kind);
    let jkind = JKind::ALL.iter().copied().find(|k| k.name() == a.kind);
    let eval = |m: Method| -> CliResult<f64> {
        match (ikind, jkind) {
            (Some(k), _) => {
                let nu = a.nu.ok_or_else(|| invalid(format!("--nu is required for {}", a.kind)))?;
                Ok(i_integral(k, IntegralFamilyParams::new(nu, a.alpha), m)?)
            }
            (None, Some(k)) => Ok(j_integral(k, a.alpha, m)?),
            (None, None) => Err(invalid(format!("unknown integral kind '{}'", a.kind))),
        }
    };
    let c = if closed { Some(eval(Method::ClosedForm)?) } else { None };
    let q = if quad { Some(eval(Method::Quadrature)?) } else { None };
    let diff = match (c, q) {
        (Some(c), Some(q)) => Some((c - q).abs()),
        _ => None,
    };
    if json_out {
        return Ok(to_json(&json!({
            "kind": a.kind, "nu": a.nu, "alpha": a.alpha,
            "closed": c, "quad": q, "abs_diff": diff,
        })));
    }
    let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    Ok(format!(
        "kind,nu,alpha,closed,quad,abs_diff\n{},{},{},{},{},{}\n",
        a.kind,
        f(a.nu),
        fmt_f64(a.alpha),
        f(c),
        f(q),
        f(diff)
    ))
}

fn auto_weights(model: &ComplexModel, mode: Mode, nu: f64) -> CliResult<LyapunovWeights> {
    let w = match mode {
        Mode::Power => feasible_weights(model, nu)?,
        Mode::Log | Mode::SqrtLog => {
            let critical = matches!(
                classify(model)?.verdict,
                Verdict::CriticalRecurrent | Verdict::CriticalUndecided
            );
            if critical {
                let mut w = solve_crit_lambda(model)?;
                w.mode = mode;
                Some(w)
            } else {
                None
            }
        }
    };
    match w {
        Some(w) => Ok(w),
        None => {
            eprintln!("note: no constructed weights apply; using unit weights");
            Ok(LyapunovWeights::unit(model, mode, nu)?)
        }
    }
}

fn drift_scan(a: &DriftScanArgs, json_out: bool, inputs: &mut Inputs) -> CliResult<String> {
    let model = load_model(&a.model, inputs)?;
    let mode = match a.mode.as_str() {
        "power" => Mode::Power,
        "log" => Mode::Log,
        "sqrtlog" => Mode::SqrtLog,
        other => return Err(invalid(format!("unknown mode '{other}'"))),
    };
    let nu = match (mode, a.nu) {
        (Mode::Power, None) => return Err(invalid("--nu is required in power mode")),
        (_, nu) => nu.unwrap_or(0.0),
    };
    let grid = parse_grid(&a.x_grid).map_err(CliError::Invalid)?;
    let w = if a.weights == "auto" && inputs.weights.is_none() {
        auto_weights(&model, mode, nu)?
    } else {
        let lambda = match &inputs.weights {
            Some(l) => l.clone(),
            None => serde_json::from_str::<Vec<f64>>(&read_file(Path::new(&a.weights))?)
                .map_err(|e| invalid(format!("malformed weights file {}: {e}", a.weights)))?,
        };
        inputs.weights = Some(lambda.clone());
        LyapunovWeights::manual(&model, mode, nu, lambda)?
    };
    let coef: Vec<Option<f64>> = (0..model.len())
        .map(|i| drift_asymptotic(&model, &w, i).ok())
        .collect();
    let jobs: Vec<(f64, usize)> = grid.iter().flat_map(|&x| (0..model.len()).map(move |i| (x, i))).collect();
    let rows: Vec<(f64, usize, f64, f64, Option<f64>)> = jobs
        .par_iter()
        .map(|&(x, i)| {
            let r = match mode {
                Mode::Power => drift_power(&model, &w, x, i),
                Mode::Log => drift_log(&model, &w, x, i),
                Mode::SqrtLog => drift_sqrtlog(&model, &w, x, i),
            }?;
            let asym = coef[i].map(|c| c * x.powf(w.nu - model.branch(i).alpha()));
            Ok((x, i, r.value, r.abs_error_estimate, asym))
        })
        .collect::<halfline::Result<_>>()?;
    if json_out {
        let v: Vec<_> = rows
            .iter()
            .map(|&(x, i, d, e, asym)| {
                json!({"x": x, "branch": model.branch(i).id, "drift": d, "err_est": e, "asymptotic": asym})
            })
            .collect();
        return Ok(to_json(&json!({"weights": w, "rows": v})));
    }
    let mut s = String::from("x,branch,drift,err_est,asymptotic\n");
    for (x, i, d, e, asym) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(x),
            model.branch(i).id,
            fmt_f64(d),
            fmt_f64(e),
            asym.map(fmt_f64).unwrap_or_default()
        );
    }
    Ok(s)
}

fn manifest_path(explicit: &Option<PathBuf>, out: &Option<PathBuf>) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

struct RunSpec {
    command: Command,
    seed: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    manifest: Option<PathBuf>,
    inputs: Inputs,
}

fn run_spec(spec: RunSpec) -> CliResult<()> {
    let RunSpec {
        command,
        seed,
        format,
        out,
        manifest,
        mut inputs,
    } = spec;
    if command.is_stochastic() && seed.is_none() {
        return Err(invalid(format!("--seed is required for {}", command.name())));
    }
    let format = format.unwrap_or_else(|| command.default_format());
    if format == Format::Csv && !command.supports_csv() {
        return Err(invalid(format!("{} only writes JSON", command.name())));
    }
    let body = execute(&command, seed, format, &mut inputs)?;
    match &out {
        Some(path) => {
            std::fs::write(path, &body).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{body}"),
    }
    let m = Manifest {
        tool: "halfline".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        format,
        out: out.clone(),
        config: command,
        inputs,
    };
    match manifest_path(&manifest, &out) {
        Some(path) => std::fs::write(&path, to_json(&m))
            .map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?,
        None => eprintln!("manifest: {}", serde_json::to_string(&m).expect("serializable")),
    }
    Ok(())
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_INVALID;
        }
        // Ignored when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let spec = match cli.command {
        Command::Replay(r) => {
            let m: Manifest = match read_file(&r.manifest)
                .and_then(|t| serde_json::from_str(&t).map_err(|e| invalid(format!("malformed manifest: {e}"))))
            {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return e.code();
                }
            };
            if m.version != env!("CARGO_PKG_VERSION") {
                eprintln!("note: manifest written by version {}", m.version);
            }
            RunSpec {
                command: m.config,
                seed: m.seed,
                format: Some(m.format),
                out: cli.out.or(m.out),
                manifest: cli.manifest,
                inputs: m.inputs,
            }
        }
        command => RunSpec {
            command,
            seed: cli.seed,
            format: cli.format,
            out: cli.out,
            manifest: cli.manifest,
            inputs: Inputs::default(),
        },
    };
    match run_spec(spec) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
