//! The `breather` command line front end.
//!
//! ```text
//! breather analyze|solve|scan <config> [--set key=value]... [--jobs n]
//! ```
//!
//! The config is a TOML file with the sections `[medium]`, `[functional]`,
//! `[solve]`, `[scan]`, `[gates]` and `[output]`. Medium parameters are TOML
//! numbers or exact expressions such as `"pi/2"` or `"3/4√2"`. Every emitted
//! JSON document has a schema under `schema/`.
//!
//! Exit codes: 0 success, 1 invalid configuration or I/O failure,
//! 2 inadmissible medium, 3 spectral gap or symmetry failure, 4 sign
//! condition failure, 5 iteration limit reached, 6 a verification gate failed.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floquet::{self, FloquetError};
use crate::functional::{self, ElResidual, FunctionalError, FunctionalSpec, SignCondition};
use crate::media::{DirichletMedium, MediaError, Medium, PeriodicStepMedium, StepMedium};
use crate::param::{Param, ParamSpec};
use crate::reconstruct::{self, DecayFit, ReconstructError, RegularityReport, WeakResidualReport};
use crate::seqspace::OddSequence;
use crate::solver::{self, BreatherResult, SolveConfig, SolverError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_ADMISSIBLE: i32 = 2;
pub const EXIT_SPECTRAL: i32 = 3;
pub const EXIT_SIGN: i32 = 4;
pub const EXIT_MAX_ITERS: i32 = 5;
pub const EXIT_GATE: i32 = 6;

/// `h^ν` exponents reported by the regularity diagnostic.
const REGULARITY_NUS: [f64; 4] = [0.1, 0.2, 0.25, 0.5];

#[derive(Debug, Parser)]
#[command(name = "breather", version, about = "Variational breather solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check admissibility, spectral gaps, decay bounds and the sign condition.
    Analyze(RunArgs),
    /// Minimize, reconstruct the field and verify it.
    Solve(RunArgs),
    /// Solve in the nested symmetry classes r = r0^j, j = 1..=j_max.
    Scan(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Override a config entry, e.g. `--set solve.n=81`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads for scan stages.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Media(e) => media_code(e),
            CliError::Floquet(e) => floquet_code(e),
            CliError::Functional(e) => functional_code(e),
            CliError::Solver(e) => solver_code(e),
            CliError::Reconstruct(_) => EXIT_GATE,
        }
    }
}

fn media_code(e: &MediaError) -> i32 {
    match e {
        MediaError::NotAdmissible { .. } => EXIT_NOT_ADMISSIBLE,
        MediaError::InvalidParameter(_) => EXIT_CONFIG,
        MediaError::BadSymmetry { .. } => EXIT_SPECTRAL,
    }
}

fn floquet_code(e: &FloquetError) -> i32 {
    match e {
        FloquetError::BadIndex { .. } | FloquetError::NoSpectralGap { .. } => EXIT_SPECTRAL,
        FloquetError::DecayViolation { .. } => EXIT_GATE,
        FloquetError::NotApplicable => EXIT_CONFIG,
    }
}

fn functional_code(e: &FunctionalError) -> i32 {
    match e {
        FunctionalError::SignConditionFailed { .. } => EXIT_SIGN,
        FunctionalError::Media(m) => media_code(m),
        FunctionalError::Floquet(f) => floquet_code(f),
        FunctionalError::SupportViolation { .. }
        | FunctionalError::TruncationMismatch { .. }
        | FunctionalError::ZeroCoupling
        | FunctionalError::BadTruncation(_) => EXIT_CONFIG,
    }
}

fn solver_code(e: &SolverError) -> i32 {
    match e {
        SolverError::WrongSign { .. } => EXIT_SIGN,
        SolverError::MaxItersExceeded(_) => EXIT_MAX_ITERS,
        SolverError::BadSeed { .. } | SolverError::BadSchedule => EXIT_CONFIG,
        SolverError::Functional(f) => functional_code(f),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumKind {
    Step,
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub kind: MediumKind,
    pub a: Option<ParamSpec>,
    pub b: Option<ParamSpec>,
    pub c: Option<ParamSpec>,
    pub theta: Option<ParamSpec>,
    pub l: Option<ParamSpec>,
    pub omega: ParamSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub n: u64,
    pub n_schedule: Vec<u64>,
    pub r: u64,
    pub k0: Option<u64>,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub rng_seed: u64,
}

impl Default for SolveSection {
    fn default() -> Self {
        let d = SolveConfig::default();
        SolveSection {
            n: d.n,
            n_schedule: d.n_schedule,
            r: d.r,
            k0: d.k0,
            grad_tol: d.grad_tol,
            max_iters: d.max_iters,
            rng_seed: d.rng_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub j_max: u32,
    /// Defaults to three times the base symmetry index.
    pub r0: Option<u64>,
}

/// Thresholds of the post-solve verification gates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    /// EL sup residual bound as a multiple of `grad_tol`.
    pub el_factor: f64,
    pub off_lattice_tol: f64,
    /// Antiperiodicity bound relative to the field's sup norm.
    pub antiperiod_tol: f64,
    /// Weak residual bound relative to the per-test scale.
    pub weak_tol: f64,
    pub parseval_tol: f64,
    /// Required fraction of the theoretical decay rate.
    pub decay_fraction: f64,
}

impl Default for GateSection {
    fn default() -> Self {
        GateSection {
            el_factor: 10.0,
            off_lattice_tol: 1e-12,
            antiperiod_tol: 1e-10,
            weak_tol: 1e-6,
            parseval_tol: 1e-6,
            decay_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write `field.csv`.
    pub field: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("breather-out"), field: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumSection,
    pub functional: FunctionalSection,
    #[serde(default)]
    pub solve: SolveSection,
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub gates: GateSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parse TOML text and apply `key.path=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc: toml::Value = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let config: RunConfig = doc.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text, overrides)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let g = &self.gates;
        let positives = [
            ("solve.grad_tol", self.solve.grad_tol),
            ("gates.el_factor", g.el_factor),
            ("gates.off_lattice_tol", g.off_lattice_tol),
            ("gates.antiperiod_tol", g.antiperiod_tol),
            ("gates.weak_tol", g.weak_tol),
            ("gates.parseval_tol", g.parseval_tol),
            ("gates.decay_fraction", g.decay_fraction),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.functional.gamma == 0.0 || !self.functional.gamma.is_finite() {
            return bad("functional.gamma must be a nonzero number".into());
        }
        if self.solve.n.is_multiple_of(2) {
            return bad(format!("solve.n must be odd, got {}", self.solve.n));
        }
        if self.solve.max_iters == 0 {
            return bad("solve.max_iters must be at least 1".into());
        }
        if let Some(scan) = &self.scan {
            if scan.j_max == 0 {
                return bad("scan.j_max must be at least 1".into());
            }
            if scan.r0.is_some_and(|r0| r0 < 3 || r0 % 2 == 0) {
                return bad("scan.r0 must be an odd integer ≥ 3".into());
            }
        }
        let m = &self.medium;
        type Presence<'a> = &'a [(&'a str, bool)];
        let (needed, unused): (Presence, Presence) = match m.kind {
            MediumKind::Step => (
                &[("a", m.a.is_some()), ("b", m.b.is_some()), ("c", m.c.is_some())],
                &[("theta", m.theta.is_some()), ("l", m.l.is_some())],
            ),
            MediumKind::Periodic => (
                &[("a", m.a.is_some()), ("b", m.b.is_some()), ("theta", m.theta.is_some())],
                &[("c", m.c.is_some()), ("l", m.l.is_some())],
            ),
            MediumKind::Dirichlet => (
                &[("l", m.l.is_some())],
                &[("a", m.a.is_some()), ("b", m.b.is_some()), ("c", m.c.is_some()), ("theta", m.theta.is_some())],
            ),
        };
        if let Some((name, _)) = needed.iter().find(|(_, present)| !present) {
            return bad(format!("medium.{name} is required for kind {:?}", m.kind));
        }
        if let Some((name, _)) = unused.iter().find(|(_, present)| *present) {
            return bad(format!("medium.{name} does not apply to kind {:?}", m.kind));
        }
        Ok(())
    }

    pub fn build_medium(&self) -> Result<Medium, CliError> {
        let m = &self.medium;
        let get = |name: &str, p: &Option<ParamSpec>| -> Result<Param, CliError> {
            p.as_ref()
                .ok_or_else(|| CliError::Config(format!("medium.{name} missing")))?
                .resolve()
                .map_err(|e| CliError::Config(format!("medium.{name}: {e}")))
        };
        let omega = m.omega.resolve().map_err(|e| CliError::Config(format!("medium.omega: {e}")))?;
        Ok(match m.kind {
            MediumKind::Step => {
                Medium::Step(StepMedium::new(&get("a", &m.a)?, &get("b", &m.b)?, &get("c", &m.c)?, &omega)?)
            }
            MediumKind::Periodic => Medium::Periodic(PeriodicStepMedium::new(
                &get("a", &m.a)?,
                &get("b", &m.b)?,
                &get("theta", &m.theta)?,
                &omega,
            )?),
            MediumKind::Dirichlet => Medium::Dirichlet(DirichletMedium::new(&get("l", &m.l)?, &omega)?),
        })
    }

    /// Largest truncation of the run.
    pub fn n_max(&self) -> u64 {
        self.solve.n_schedule.iter().copied().max().unwrap_or(self.solve.n)
    }

    pub fn solve_config(&self) -> SolveConfig {
        let s = &self.solve;
        SolveConfig {
            n: self.n_max(),
            r: s.r,
            k0: s.k0,
            grad_tol: s.grad_tol,
            max_iters: s.max_iters,
            n_schedule: s.n_schedule.clone(),
            rng_seed: s.rng_seed,
        }
    }
}

fn apply_override(doc: &mut toml::Value, item: &str) -> Result<(), CliError> {
    let (key, raw) =
        item.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    // TOML literal if it parses as one, plain string otherwise
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut node = doc;
    for part in &path[..path.len() - 1] {
        let table =
            node.as_table_mut().ok_or_else(|| CliError::Config(format!("`{key}` does not name a table entry")))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| CliError::Config(format!("`{key}` does not name a table entry")))?
        .insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicRow {
    pub k: u64,
    pub slope0: f64,
    pub slope_sign: i8,
    pub decay_rate: Option<f64>,
    /// Periodic media: `tr A_k` in closed form and from the matrix product.
    pub trace_closed_form: Option<f64>,
    pub trace_product: Option<f64>,
    pub det: Option<f64>,
    pub multiplier_small: Option<f64>,
    pub multiplier_large: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub medium: Medium,
    pub admissibility: Vec<(String, String)>,
    pub r_base: u64,
    pub n: u64,
    pub gamma: f64,
    pub harmonics: Vec<HarmonicRow>,
    pub decay_bound: Option<floquet::DecayBound>,
    pub sign_condition: Option<SignCondition>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Gate {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Gate { name: name.into(), value, threshold, passed: value <= threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Gate { name: name.into(), value, threshold, passed: value >= threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub n: u64,
    pub j_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxItersExceeded,
    GateFailure,
}

/// Contents of `result.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: RunStatus,
    pub medium: Medium,
    pub gamma: f64,
    pub omega: f64,
    pub period: f64,
    pub solve: SolveConfig,
    pub breather: BreatherResult,
    pub el_residual: ElResidual,
    pub stages: Vec<StageSummary>,
    pub antiperiodicity: Option<f64>,
    pub field_sup: Option<f64>,
    pub decay_fit: Option<DecayFit>,
    pub weak_residual: Option<WeakResidualReport>,
    pub regularity: RegularityReport,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub j: u32,
    pub r: u64,
    pub status: String,
    pub j_value: Option<f64>,
    pub k0: Option<u64>,
    pub support: Vec<u64>,
    /// Support in `r·ℤ_odd` outside the next class `r·r0·ℤ_odd`.
    pub extra_support: Vec<u64>,
    pub antiperiod: f64,
    pub error: Option<String>,
}

/// Contents of `scan.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub medium: Medium,
    pub gamma: f64,
    pub r0: u64,
    pub j_max: u32,
    pub rows: Vec<ScanRow>,
    /// Number of distinct `J` values among the converged classes.
    pub distinct_values: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    command: &'static str,
    started_unix_seconds: u64,
    elapsed_seconds: f64,
}

// ---------------------------------------------------------------- commands

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (name, run_args) = match &cli.command {
        Command::Analyze(a) => ("analyze", a),
        Command::Solve(a) => ("solve", a),
        Command::Scan(a) => ("scan", a),
    };
    let started = Instant::now();
    let config = match RunConfig::load(&run_args.config, &run_args.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Analyze(_) => cmd_analyze(&config).map(|(_, code)| code),
        Command::Solve(_) => cmd_solve(&config).map(|(_, code)| code),
        Command::Scan(a) => cmd_scan(&config, a.jobs).map(|(_, code)| code),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let timing = Timing {
        command: name,
        started_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
            .saturating_sub(started.elapsed().as_secs()),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    if config.output.dir.is_dir() {
        if let Err(e) = write_json(&config.output.dir.join("timing.json"), &timing) {
            warn!("{e}");
        }
    }
    code
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn admissibility_rows(medium: &Medium) -> Vec<(String, String)> {
    match medium {
        Medium::Step(s) => vec![("sqrt(b)*omega*c*2/pi".into(), s.ratio.to_string())],
        Medium::Periodic(p) => {
            vec![("l".into(), p.admissibility.l.to_string()), ("2m".into(), p.admissibility.two_m.to_string())]
        }
        Medium::Dirichlet(d) => vec![("omega*l/pi".into(), format!("{}/{}", d.p, d.q4))],
    }
}

/// Admissibility, spectral gaps, uniform decay and the sign condition.
/// Writes `analysis.json` and returns the report with its exit code.
pub fn cmd_analyze(config: &RunConfig) -> Result<(AnalysisReport, i32), CliError> {
    let medium = config.build_medium()?;
    let n = config.n_max();
    let base = medium.base_symmetry();
    let gamma = config.functional.gamma;
    let mut checks = vec![Check { name: "admissibility".into(), passed: true, detail: format!("r_base = {base}") }];
    let mut harmonics = Vec::new();
    for k in (0..).map(|h| base * (2 * h + 1)).take_while(|&k| k <= n) {
        let profile = floquet::mode(&medium, k)?;
        let mut row = HarmonicRow {
            k,
            slope0: profile.slope0,
            slope_sign: if profile.slope0 > 0.0 { 1 } else { -1 },
            decay_rate: profile.decay_rate,
            trace_closed_form: None,
            trace_product: None,
            det: None,
            multiplier_small: None,
            multiplier_large: None,
        };
        if let Medium::Periodic(p) = &medium {
            let mono = floquet::monodromy(p, k);
            let (small, large) = floquet::floquet_multipliers(&mono)?;
            row.trace_closed_form = Some(floquet::trace_closed_form(p, k));
            row.trace_product = Some(mono.trace());
            row.det = Some(mono.det());
            row.multiplier_small = Some(small);
            row.multiplier_large = Some(large);
        }
        harmonics.push(row);
    }
    checks.push(Check {
        name: "spectral_gap".into(),
        passed: true,
        detail: match medium {
            Medium::Periodic(_) => format!("|tr A_k| > 2 for {} harmonics", harmonics.len()),
            _ => "closed-form decaying solutions".into(),
        },
    });
    let decay_bound = match floquet::c2_constants(&medium) {
        None => None,
        Some(_) => {
            let profiles = floquet::profile_table(&medium, base, n)?;
            Some(floquet::verify_c2(&medium, &profiles)?)
        }
    };
    if let Some(b) = &decay_bound {
        checks.push(Check {
            name: "uniform_decay".into(),
            passed: true,
            detail: format!("sup |Φ_k|e^(ρx) = {} ≤ M = {} with ρ = {}", b.observed_sup, b.m, b.rho),
        });
    }
    let spec = functional::eta_table(&medium, gamma, n, config.solve.r)?;
    checks.push(Check {
        name: "sign_condition".into(),
        passed: true,
        detail: format!("{:?}, seed harmonic k0 = {:?}", spec.sign_condition, spec.seed_harmonic()),
    });
    let report = AnalysisReport {
        admissibility: admissibility_rows(&medium),
        r_base: base,
        n,
        gamma,
        harmonics,
        decay_bound,
        sign_condition: Some(spec.sign_condition),
        passed: checks.iter().all(|c| c.passed),
        checks,
        medium,
    };
    print_analysis(&report);
    create_dir(&config.output.dir)?;
    write_json(&config.output.dir.join("analysis.json"), &report)?;
    Ok((report, EXIT_OK))
}

fn print_analysis(report: &AnalysisReport) {
    println!("medium: {}", report.medium.kind());
    for (name, value) in &report.admissibility {
        println!("  {name} = {value}");
    }
    println!("  r_base = {}", report.r_base);
    println!("{:>6} {:>14} {:>14} {:>14}", "k", "slope", "trace", "rho_small");
    for h in &report.harmonics {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!("{:>6} {:>14.6} {:>14} {:>14}", h.k, h.slope0, opt(h.trace_closed_form), opt(h.multiplier_small));
    }
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
}

/// Minimize (with continuation when a schedule is given), then reconstruct and verify.
/// Returns the report and exit code; artifacts are written even on failure.
pub fn cmd_solve(config: &RunConfig) -> Result<(SolveReport, i32), CliError> {
    let medium = config.build_medium()?;
    let solve = config.solve_config();
    let spec = functional::eta_table(&medium, config.functional.gamma, solve.n, solve.r)?;
    let (stages, limit_hit) = run_minimizer(&spec, &solve)?;
    let dir = &config.output.dir;
    create_dir(dir)?;
    let report = finish_solve(config, &medium, &spec, &solve, stages, limit_hit, dir)?;
    let code = match report.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxItersExceeded => EXIT_MAX_ITERS,
        RunStatus::GateFailure => EXIT_GATE,
    };
    Ok((report, code))
}

/// Returns the stages (last is the final iterate) and whether the iteration limit was hit.
fn run_minimizer(spec: &FunctionalSpec, solve: &SolveConfig) -> Result<(Vec<BreatherResult>, bool), CliError> {
    if solve.n_schedule.is_empty() {
        return match solver::minimize(spec, solve) {
            Ok(r) => Ok((vec![r], false)),
            Err(SolverError::MaxItersExceeded(best)) => Ok((vec![*best], true)),
            Err(e) => Err(e.into()),
        };
    }
    // stage by stage, so a stalled stage still yields its best iterate
    let mut stages: Vec<BreatherResult> = Vec::new();
    let schedule = &solve.n_schedule;
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.iter().any(|&n| n % 2 == 0) {
        return Err(SolverError::BadSchedule.into());
    }
    for &n in schedule {
        let stage_spec = if n == spec.n { spec.clone() } else { spec.truncate(n)? };
        let outcome = match stages.last() {
            None => solver::minimize(&stage_spec, solve),
            Some(prev) => solver::minimize_from(&stage_spec, solve, prev.k0, prev.t_star, &prev.alpha.resized(n)),
        };
        match outcome {
            Ok(r) => stages.push(r),
            Err(SolverError::MaxItersExceeded(best)) => {
                stages.push(*best);
                return Ok((stages, true));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((stages, false))
}

fn finish_solve(
    config: &RunConfig,
    medium: &Medium,
    spec: &FunctionalSpec,
    solve: &SolveConfig,
    stages: Vec<BreatherResult>,
    limit_hit: bool,
    dir: &Path,
) -> Result<SolveReport, CliError> {
    let result = stages.last().expect("at least one stage").clone();
    let final_spec = if result.n == spec.n { spec.clone() } else { spec.truncate(result.n)? };
    write_convergence(&dir.join("convergence.csv"), &stages)?;
    let el = functional::el_residual(&final_spec, &result.alpha);
    let gates_cfg = &config.gates;
    let mut gates = vec![
        Gate::at_most("j_negative", result.j_value, 0.0),
        Gate::at_most("grad_norm", result.grad_norm, solve.grad_tol),
        Gate::at_most("el_sup", el.sup, gates_cfg.el_factor * solve.grad_tol),
        Gate::at_most("el_off_lattice", el.off_sup, gates_cfg.off_lattice_tol),
    ];

    let profiles = floquet::profile_table(medium, medium.base_symmetry(), result.n)?;
    let (x, t) = reconstruct::default_grid(medium, result.r);
    let field = reconstruct::assemble(&result.alpha, &profiles, medium.omega(), &x, &t)?;
    let sup = field.sup_norm();
    let anti = reconstruct::check_antiperiodicity(&field, result.r)?;
    gates.push(Gate::at_most("antiperiodicity", anti, gates_cfg.antiperiod_tol * sup));
    if config.output.field {
        let path = dir.join("field.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        field.write_csv(BufWriter::new(file)).map_err(io_err(&path))?;
    }
    let decay_fit = match (medium.decay_rate(), floquet::c2_constants(medium)) {
        (Some(rho), Some((m, _))) => {
            let fit = reconstruct::fit_decay(&field, rho, m)?;
            gates.push(Gate::at_least("decay_rate", fit.rho_fit, gates_cfg.decay_fraction * rho));
            Some(fit)
        }
        _ => None,
    };
    let bank = reconstruct::test_bank(medium, result.n);
    let weak = reconstruct::weak_residual(medium, &result.alpha, &profiles, &final_spec, &bank)?;
    gates.push(Gate::at_most("weak_direct", weak.max_direct, gates_cfg.weak_tol));
    gates.push(Gate::at_most("weak_reduced", weak.max_reduced, gates_cfg.weak_tol));
    gates.push(Gate::at_most("weak_disagreement", weak.max_disagreement, gates_cfg.weak_tol));
    gates.push(Gate::at_most("parseval", weak.max_parseval, gates_cfg.parseval_tol));
    let regularity = reconstruct::regularity_diagnostic(&result.alpha, &REGULARITY_NUS);

    for g in gates.iter().filter(|g| !g.passed) {
        warn!("gate {} failed: {:e} vs {:e}", g.name, g.value, g.threshold);
    }
    let status = if limit_hit {
        RunStatus::MaxItersExceeded
    } else if gates.iter().all(|g| g.passed) {
        RunStatus::Converged
    } else {
        RunStatus::GateFailure
    };
    info!("status {:?}: J = {:.15e}", status, result.j_value);
    let report = SolveReport {
        status,
        medium: medium.clone(),
        gamma: final_spec.gamma,
        omega: final_spec.omega,
        period: final_spec.period,
        solve: solve.clone(),
        stages: stages
            .iter()
            .map(|s| StageSummary { n: s.n, j_value: s.j_value, grad_norm: s.grad_norm, iterations: s.iterations })
            .collect(),
        breather: result,
        el_residual: el,
        antiperiodicity: Some(anti),
        field_sup: Some(sup),
        decay_fit,
        weak_residual: Some(weak),
        regularity,
        gates,
    };
    write_json(&dir.join("result.json"), &report)?;
    Ok(report)
}

fn write_convergence(path: &Path, stages: &[BreatherResult]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut body = || -> io::Result<()> {
        writeln!(out, "kind,stage,n,iter,j,grad_norm")?;
        for (i, s) in stages.iter().enumerate() {
            for rec in &s.history {
                writeln!(out, "iter,{i},{},{},{:e},{:e}", s.n, rec.iter, rec.j, rec.grad_norm)?;
            }
        }
        for (i, s) in stages.iter().enumerate() {
            writeln!(out, "stage,{i},{},{},{:e},{:e}", s.n, s.iterations, s.j_value, s.grad_norm)?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

fn lattice_label(r: u64) -> String {
    format!("{r}·Z_odd")
}

/// Solve in every class `r = r0^j`; one subdirectory per `j` plus a summary.
pub fn cmd_scan(config: &RunConfig, jobs: usize) -> Result<(ScanReport, i32), CliError> {
    let scan =
        config.scan.clone().ok_or_else(|| CliError::Config("scan requires a [scan] section with j_max".into()))?;
    let medium = config.build_medium()?;
    let r0 = scan.r0.unwrap_or(3 * medium.base_symmetry());
    medium.symmetry(r0)?;
    let gamma = config.functional.gamma;
    let solve = SolveConfig { n_schedule: Vec::new(), ..config.solve_config() };
    let entries = solver::multiplicity_scan(&medium, gamma, scan.j_max, r0, &solve, jobs);
    let dir = &config.output.dir;
    create_dir(dir)?;

    let mut rows = Vec::new();
    let mut first_error = None;
    let mut successes = 0;
    for entry in entries {
        let sub = dir.join(format!("j{}", entry.j));
        let antiperiod = medium.period() / (2 * entry.r) as f64;
        let mut row = ScanRow {
            j: entry.j,
            r: entry.r,
            status: String::new(),
            j_value: None,
            k0: None,
            support: Vec::new(),
            extra_support: Vec::new(),
            antiperiod,
            error: None,
        };
        let stage = match entry.outcome {
            Ok(res) => Ok((res, false)),
            Err(SolverError::MaxItersExceeded(best)) => Ok((*best, true)),
            Err(e) => Err(CliError::from(e)),
        };
        let outcome = stage.and_then(|(res, limit_hit)| {
            create_dir(&sub)?;
            let spec = functional::eta_table(&medium, gamma, solve.n, entry.r)?;
            let cfg =
                RunConfig { output: OutputSection { dir: sub.clone(), ..config.output.clone() }, ..config.clone() };
            let solve_j = SolveConfig { r: entry.r, ..solve.clone() };
            finish_solve(&cfg, &medium, &spec, &solve_j, vec![res], limit_hit, &sub)
        });
        match outcome {
            Ok(report) => {
                let alpha: &OddSequence = &report.breather.alpha;
                row.status = match report.status {
                    RunStatus::Converged => "converged",
                    RunStatus::MaxItersExceeded => "max_iters_exceeded",
                    RunStatus::GateFailure => "gate_failure",
                }
                .into();
                row.j_value = Some(report.breather.j_value);
                row.k0 = Some(report.breather.k0);
                row.support = alpha.support();
                let next = entry.r * r0;
                row.extra_support =
                    row.support.iter().copied().filter(|k| !(k % next == 0 && (k / next) % 2 == 1)).collect();
                if report.status == RunStatus::Converged {
                    successes += 1;
                } else if first_error.is_none() {
                    first_error =
                        Some(if report.status == RunStatus::MaxItersExceeded { EXIT_MAX_ITERS } else { EXIT_GATE });
                }
            }
            Err(e) => {
                row.status = "failed".into();
                row.error = Some(e.to_string());
                if first_error.is_none() {
                    first_error = Some(e.exit_code());
                }
            }
        }
        rows.push(row);
    }
    let mut values: Vec<f64> = rows.iter().filter(|r| r.status == "converged").filter_map(|r| r.j_value).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(b.abs()));
    let report = ScanReport { medium, gamma, r0, j_max: scan.j_max, rows, distinct_values: values.len() };
    write_scan_summary(&dir.join("scan_summary.csv"), &report)?;
    write_json(&dir.join("scan.json"), &report)?;
    let code = if successes > 0 { EXIT_OK } else { first_error.unwrap_or(EXIT_GATE) };
    Ok((report, code))
}

fn write_scan_summary(path: &Path, report: &ScanReport) -> Result<(), CliError> {
    let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    let mut text = String::from("j,r,status,J,k0,support_lattice,antiperiod,support,extra_support\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{:e},{},{}\n",
            r.j,
            r.r,
            r.status,
            r.j_value.map_or(String::new(), |v| format!("{v:e}")),
            r.k0.map_or(String::new(), |k| k.to_string()),
            lattice_label(r.r),
            r.antiperiod,
            join(&r.support),
            join(&r.extra_support),
        ));
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Initialise logging from `BREATHER_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::default().filter_or("BREATHER_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
