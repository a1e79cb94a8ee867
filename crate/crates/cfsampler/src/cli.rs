//! Command implementations behind the `cfsampler` binary.
//!
//! Everything here is a plain function from a parsed config to bytes on a
//! writer, so the binary stays a thin argument parser and the commands stay
//! testable (including byte-for-byte reproducibility of seeded runs).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::bench::{
    gof_chi_square, paper_grid_binomial, paper_grid_poisson, paper_grid_poisson_tweedie,
    table_binomial, table_poisson, table_poisson_tweedie, BenchError, ComplexityTable,
};
use crate::cf::DistributionSpec;
use crate::envelope::{build_envelope, select_m_mean, select_m_star, Envelope, EnvelopeError};
use crate::quad::{PfError, PfEvaluator};
use crate::sampler::{sample_n, SampleError, SeededRng};

/// Seed used when none is given, so un-seeded runs still reproduce.
pub const DEFAULT_SEED: u64 = 0x5EED_CF5A;

/// Bounds accepted for `--tol`.
pub const TOL_RANGE: (f64, f64) = (1e-14, 1e-6);

/// Command failure carrying its process exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Invalid distribution, grid or flag value (exit 2).
    Invalid(String),
    /// A validation check failed (exit 1).
    CheckFailed(String),
    /// The sampler hit its iteration limit (exit 3).
    IterationLimit(String),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Invalid(_) => 2,
            CmdError::CheckFailed(_) => 1,
            CmdError::IterationLimit(_) => 3,
            CmdError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Invalid(msg) => write!(f, "{msg}"),
            CmdError::CheckFailed(msg) => write!(f, "{msg}"),
            CmdError::IterationLimit(msg) => write!(f, "{msg}"),
            CmdError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e.to_string())
    }
}

impl From<crate::cf::SpecError> for CmdError {
    fn from(e: crate::cf::SpecError) -> Self {
        CmdError::Invalid(e.to_string())
    }
}

impl From<EnvelopeError> for CmdError {
    fn from(e: EnvelopeError) -> Self {
        CmdError::Invalid(e.to_string())
    }
}

impl From<PfError> for CmdError {
    fn from(e: PfError) -> Self {
        CmdError::Invalid(e.to_string())
    }
}

impl From<BenchError> for CmdError {
    fn from(e: BenchError) -> Self {
        CmdError::Invalid(e.to_string())
    }
}

impl From<SampleError> for CmdError {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::IterationLimit { .. } => CmdError::IterationLimit(e.to_string()),
            SampleError::Pf(pf) => CmdError::Invalid(pf.to_string()),
        }
    }
}

/// Anchor selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MRule {
    Star,
    Mean,
    Explicit(i64),
}

impl FromStr for MRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "star" => Ok(MRule::Star),
            "mean" => Ok(MRule::Mean),
            other => other
                .parse::<i64>()
                .map(MRule::Explicit)
                .map_err(|_| format!("--m-rule takes star, mean or an integer, got '{other}'")),
        }
    }
}

/// Output encoding; both carry the same values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("--format takes csv or json, got '{other}'")),
        }
    }
}

/// Seed argument: a fixed 64-bit value or opt-in entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSpec {
    Fixed(u64),
    Random,
}

impl SeedSpec {
    fn resolve(self) -> u64 {
        match self {
            SeedSpec::Fixed(seed) => seed,
            SeedSpec::Random => rand::RngCore::next_u64(&mut rand::rngs::OsRng),
        }
    }
}

impl FromStr for SeedSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "random" {
            return Ok(SeedSpec::Random);
        }
        s.parse::<u64>()
            .map(SeedSpec::Fixed)
            .map_err(|_| format!("--seed takes a u64 or 'random', got '{s}'"))
    }
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedSpec::Fixed(seed) => write!(f, "{seed}"),
            SeedSpec::Random => write!(f, "random"),
        }
    }
}

/// Parses a `--dist` argument: a JSON literal or `@path` to a JSON file.
pub fn parse_dist_arg(arg: &str) -> Result<DistributionSpec, CmdError> {
    let text = if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map_err(|e| CmdError::Invalid(format!("cannot read '{path}': {e}")))?
    } else {
        arg.to_string()
    };
    Ok(DistributionSpec::from_json(&text)?)
}

fn check_tol(tol: f64) -> Result<(), CmdError> {
    if !(tol >= TOL_RANGE.0 && tol <= TOL_RANGE.1) {
        return Err(CmdError::Invalid(format!(
            "--tol must lie in [{:e}, {:e}], got {tol}",
            TOL_RANGE.0, TOL_RANGE.1
        )));
    }
    Ok(())
}

fn anchor_for(spec: &DistributionSpec, rule: MRule) -> Result<i64, CmdError> {
    match rule {
        MRule::Star => Ok(select_m_star(spec)?),
        MRule::Mean => Ok(select_m_mean(spec)?),
        MRule::Explicit(m) => Ok(m),
    }
}

/// Configuration of the `sample` command.
#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub dist: DistributionSpec,
    pub n: usize,
    pub seed: SeedSpec,
    pub m_rule: MRule,
    pub format: OutputFormat,
    pub tol: f64,
}

fn envelope_json(env: &Envelope) -> serde_json::Value {
    serde_json::json!({
        "m": env.m(),
        "c": env.c(),
        "k": env.k(),
        "sigma": env.sigma(),
        "alpha": env.alpha(),
        "expected_iterations": env.expected_iterations(),
        "degenerate": env.is_degenerate(),
    })
}

/// Draws `n` variates and prints them plus a trailing stats record.
pub fn cmd_sample(config: &SampleConfig, out: &mut dyn Write) -> Result<(), CmdError> {
    check_tol(config.tol)?;
    if config.n < 1 {
        return Err(CmdError::Invalid("-n must be at least 1".into()));
    }
    let seed = config.seed.resolve();
    let m = anchor_for(&config.dist, config.m_rule)?;
    let env = build_envelope(&config.dist, m)?;
    let pf = PfEvaluator::new(config.dist.clone(), config.tol);
    let mut rng = SeededRng::from_seed(seed);
    let report = sample_n(&env, &pf, &mut rng, config.n)?;

    match config.format {
        OutputFormat::Csv => {
            for x in &report.samples {
                writeln!(out, "{x}")?;
            }
            writeln!(
                out,
                "# seed={} iterations={} guard_rejections={} acceptance_rate={} m={} c={} k={} sigma={} alpha={} expected_iterations={}",
                seed,
                report.iterations,
                report.guard_rejections,
                report.acceptance_rate(),
                env.m(),
                env.c(),
                env.k(),
                env.sigma(),
                env.alpha(),
                env.expected_iterations(),
            )?;
        }
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "samples": report.samples,
                "stats": {
                    "seed": seed,
                    "iterations": report.iterations,
                    "guard_rejections": report.guard_rejections,
                    "acceptance_rate": report.acceptance_rate(),
                    "envelope": envelope_json(&env),
                },
            });
            writeln!(out, "{doc}")?;
        }
    }
    Ok(())
}

/// Table family selected by `--family`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFamily {
    Poisson,
    Binomial,
    PoissonTweedie,
}

impl FromStr for TableFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poisson" => Ok(TableFamily::Poisson),
            "binomial" => Ok(TableFamily::Binomial),
            "poisson-tweedie" => Ok(TableFamily::PoissonTweedie),
            other => Err(format!(
                "--family takes poisson, binomial or poisson-tweedie, got '{other}'"
            )),
        }
    }
}

/// Grid argument: the published grid or `@path` to a JSON array of cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridSpec {
    Paper,
    File(String),
}

impl FromStr for GridSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "paper" {
            Ok(GridSpec::Paper)
        } else if let Some(path) = s.strip_prefix('@') {
            Ok(GridSpec::File(path.to_string()))
        } else {
            Err(format!("--grid takes paper or @file, got '{s}'"))
        }
    }
}

/// Configuration of the `table` command.
#[derive(Debug, Clone)]
pub struct TableConfig {
    pub family: TableFamily,
    pub grid: GridSpec,
    pub format: OutputFormat,
}

fn grid_cells(path: &str) -> Result<Vec<serde_json::Map<String, serde_json::Value>>, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Invalid(format!("cannot read '{path}': {e}")))?;
    let cells: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_str(&text)
        .map_err(|e| CmdError::Invalid(format!("grid file '{path}': {e}")))?;
    Ok(cells)
}

fn cell_number(
    cell: &serde_json::Map<String, serde_json::Value>,
    name: &str,
) -> Result<f64, CmdError> {
    cell.get(name)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| CmdError::Invalid(format!("grid cell missing numeric '{name}'")))
}

/// Builds the requested complexity table and prints it.
pub fn cmd_table(config: &TableConfig, out: &mut dyn Write) -> Result<(), CmdError> {
    let table: ComplexityTable = match (config.family, &config.grid) {
        (TableFamily::Poisson, GridSpec::Paper) => table_poisson(&paper_grid_poisson())?,
        (TableFamily::Binomial, GridSpec::Paper) => table_binomial(&paper_grid_binomial())?,
        (TableFamily::PoissonTweedie, GridSpec::Paper) => {
            table_poisson_tweedie(&paper_grid_poisson_tweedie())?
        }
        (TableFamily::Poisson, GridSpec::File(path)) => {
            let mut grid = Vec::new();
            for cell in grid_cells(path)? {
                grid.push(cell_number(&cell, "lambda")?);
            }
            table_poisson(&grid)?
        }
        (TableFamily::Binomial, GridSpec::File(path)) => {
            let mut grid = Vec::new();
            for cell in grid_cells(path)? {
                let n = cell_number(&cell, "n")?;
                if !(n >= 1.0 && n.fract() == 0.0) {
                    return Err(CmdError::Invalid("grid cell requires integer n >= 1".into()));
                }
                grid.push((n as u64, cell_number(&cell, "p")?));
            }
            table_binomial(&grid)?
        }
        (TableFamily::PoissonTweedie, GridSpec::File(path)) => {
            let mut grid = Vec::new();
            for cell in grid_cells(path)? {
                grid.push((
                    cell_number(&cell, "a")?,
                    cell_number(&cell, "b")?,
                    cell_number(&cell, "c")?,
                ));
            }
            table_poisson_tweedie(&grid)?
        }
    };

    match config.format {
        OutputFormat::Csv => write!(out, "{}", table.to_csv())?,
        OutputFormat::Json => writeln!(out, "{}", table.to_json())?,
    }
    Ok(())
}

/// Configuration of the `envelope` command.
#[derive(Debug, Clone)]
pub struct EnvelopeConfig {
    pub dist: DistributionSpec,
    pub m_rule: MRule,
    pub format: OutputFormat,
    pub tol: f64,
}

/// Prints the full setup stage (both anchors, plus an explicit one if asked).
pub fn cmd_envelope(config: &EnvelopeConfig, out: &mut dyn Write) -> Result<(), CmdError> {
    check_tol(config.tol)?;
    let spec = &config.dist;
    let m_star = select_m_star(spec)?;
    let m_mean = select_m_mean(spec)?;
    let mut entries = vec![("star", build_envelope(spec, m_star)?), ("mean", build_envelope(spec, m_mean)?)];
    if let MRule::Explicit(m) = config.m_rule {
        entries.push(("explicit", build_envelope(spec, m)?));
    }
    let degenerate = entries.iter().any(|(_, env)| env.is_degenerate());

    match config.format {
        OutputFormat::Csv => {
            writeln!(out, "rule,m,c,k,sigma,alpha,expected_iterations,degenerate")?;
            for (rule, env) in &entries {
                writeln!(
                    out,
                    "{rule},{},{},{},{},{},{},{}",
                    env.m(),
                    env.c(),
                    env.k(),
                    env.sigma(),
                    env.alpha(),
                    env.expected_iterations(),
                    env.is_degenerate(),
                )?;
            }
            if degenerate {
                writeln!(out, "# note: distribution looks like a point mass; sampling it through the envelope is unnecessary")?;
            }
        }
        OutputFormat::Json => {
            let mut doc = serde_json::Map::new();
            for (rule, env) in &entries {
                doc.insert(rule.to_string(), envelope_json(env));
            }
            writeln!(out, "{}", serde_json::Value::Object(doc))?;
        }
    }
    Ok(())
}

/// Configuration of the `validate` command.
#[derive(Debug, Clone)]
pub struct ValidateConfig {
    pub dist: DistributionSpec,
    pub n: usize,
    pub seed: SeedSpec,
    pub m_rule: MRule,
    pub format: OutputFormat,
    pub tol: f64,
}

struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn write_checks(
    checks: &[CheckOutcome],
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CmdError> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "check,result,detail")?;
            for c in checks {
                writeln!(out, "{},{},{}", c.name, if c.passed { "pass" } else { "fail" }, c.detail)?;
            }
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = checks
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "check": c.name,
                        "passed": c.passed,
                        "detail": c.detail,
                    })
                })
                .collect();
            writeln!(out, "{}", serde_json::Value::Array(rows))?;
        }
    }
    Ok(())
}

/// Runs characteristic-function sanity, normalization, domination,
/// goodness-of-fit and acceptance-rate checks. Exit 0 only if all pass.
pub fn cmd_validate(config: &ValidateConfig, out: &mut dyn Write) -> Result<(), CmdError> {
    check_tol(config.tol)?;
    if config.n < 1 {
        return Err(CmdError::Invalid("-n must be at least 1".into()));
    }
    let spec = &config.dist;
    let mut checks: Vec<CheckOutcome> = Vec::new();

    // c.f. sanity on a fixed grid: phi(0) = 1, |phi| <= 1, conjugate symmetry.
    let mut worst_mag: f64 = 0.0;
    let mut worst_conj: f64 = 0.0;
    let grid: Vec<f64> = (0..=200).map(|k| k as f64 * std::f64::consts::PI / 200.0).collect();
    for &t in &grid {
        worst_mag = worst_mag.max(spec.cf(t).norm());
        worst_conj = worst_conj.max((spec.cf(-t) - spec.cf(t).conj()).norm());
    }
    let at_zero = (spec.cf(0.0) - num_complex::Complex64::new(1.0, 0.0)).norm();
    checks.push(CheckOutcome {
        name: "cf-unit-at-zero",
        passed: at_zero <= 1e-12,
        detail: format!("|phi(0) - 1| = {at_zero:.3e}"),
    });
    checks.push(CheckOutcome {
        name: "cf-bounded",
        passed: worst_mag <= 1.0 + 1e-12,
        detail: format!("max |phi| = {worst_mag:.15}"),
    });
    checks.push(CheckOutcome {
        name: "cf-conjugate-symmetric",
        passed: worst_conj <= 1e-12,
        detail: format!("max |phi(-t) - conj phi(t)| = {worst_conj:.3e}"),
    });
    let square_integrable = spec.is_square_integrable();
    checks.push(CheckOutcome {
        name: "square-integrable",
        passed: square_integrable,
        detail: if square_integrable {
            "E[X^2] finite".into()
        } else {
            "E[X^2] = infinity".into()
        },
    });

    let sane = checks.iter().all(|c| c.passed);
    if !sane {
        write_checks(&checks, config.format, out)?;
        return Err(CmdError::CheckFailed("characteristic-function sanity checks failed".into()));
    }

    let m = anchor_for(spec, config.m_rule)?;
    let env = build_envelope(spec, m)?;
    let pf = PfEvaluator::new(spec.clone(), config.tol);

    // Normalization and domination over the envelope's effective support.
    let radius = (12.0 * env.sigma()).ceil() as i64;
    let mut mass = 0.0;
    let mut worst_excess: f64 = 0.0;
    for x in (m - radius)..=(m + radius) {
        let p = pf.pf(x)?;
        mass += p;
        worst_excess = worst_excess.max(p - env.hat(x));
    }
    checks.push(CheckOutcome {
        name: "pf-normalization",
        passed: (mass - 1.0).abs() <= 1e-6,
        detail: format!("sum over m +- 12 sigma = {mass:.12}"),
    });
    checks.push(CheckOutcome {
        name: "domination",
        passed: worst_excess <= 1e-12,
        detail: format!("max p(x) - hat(x) = {worst_excess:.3e}"),
    });

    let seed = config.seed.resolve();
    let mut rng = SeededRng::from_seed(seed);
    let report = sample_n(&env, &pf, &mut rng, config.n)?;
    match gof_chi_square(&report.samples, &pf) {
        Ok(gof) => checks.push(CheckOutcome {
            name: "gof-chi-square",
            passed: gof.p_value > 0.001,
            detail: format!(
                "p = {:.6} (statistic {:.3}, {} cells, seed {seed})",
                gof.p_value, gof.statistic, gof.cells
            ),
        }),
        Err(BenchError::InsufficientData(msg)) => checks.push(CheckOutcome {
            name: "gof-chi-square",
            passed: env.is_degenerate(),
            detail: format!("{msg}{}", if env.is_degenerate() { " (degenerate point mass)" } else { "" }),
        }),
        Err(e) => return Err(e.into()),
    }

    let a_hat = report.iterations as f64 / config.n as f64;
    let a = env.expected_iterations();
    let se = (a * (a - 1.0) / config.n as f64).sqrt();
    let band = 3.0 * se;
    checks.push(CheckOutcome {
        name: "acceptance-rate",
        passed: (a_hat - a).abs() <= band.max(1e-9),
        detail: format!("iterations/n = {a_hat:.4} vs expected {a:.4} (3 s.e. = {band:.4})"),
    });

    let all_passed = checks.iter().all(|c| c.passed);
    write_checks(&checks, config.format, out)?;
    if all_passed {
        Ok(())
    } else {
        Err(CmdError::CheckFailed("one or more validation checks failed".into()))
    }
}
