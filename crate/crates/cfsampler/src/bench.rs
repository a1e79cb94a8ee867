//! Expected-complexity tables, goodness-of-fit validation and the
//! independent Poisson-Tweedie cross-checks.
//!
//! Table cells are pure functions of the distribution parameters, so the
//! builders parallelize across cells (row order stays deterministic). The
//! `CFSAMPLER_THREADS` environment variable caps the worker count.

use rayon::prelude::*;
use std::fmt::Write as _;

use rand::RngCore;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::gamma_ur;

use crate::cf::DistributionSpec;
use crate::envelope::{build_envelope, select_m_mean, select_m_star, EnvelopeError};
use crate::quad::{pf_inversion, PfError, PfEvaluator};

/// Stand-in trial count for the limit column of the binomial grid; large
/// enough that the computed complexity sits on the asymptote to three digits.
pub const BINOMIAL_LIMIT_N: u64 = 1_000_000;

/// Asymptotic expected complexity of the sampler on a widening integer
/// distribution (the flat-plus-quadratic envelope around a Normal shape):
/// `(512 / (e pi^3))^{1/4}`.
pub fn normal_limit_constant() -> f64 {
    (512.0 / (std::f64::consts::E * std::f64::consts::PI.powi(3))).powf(0.25)
}

/// Errors raised by the bench utilities.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    InvalidParameters(String),
    /// Too few samples or too few usable cells for a chi-square test.
    InsufficientData(String),
    Envelope(EnvelopeError),
    Pf(PfError),
}

impl std::fmt::Display for BenchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchError::InvalidParameters(msg) => write!(f, "invalid parameters: {msg}"),
            BenchError::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            BenchError::Envelope(e) => write!(f, "{e}"),
            BenchError::Pf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<EnvelopeError> for BenchError {
    fn from(e: EnvelopeError) -> Self {
        BenchError::Envelope(e)
    }
}

impl From<crate::cf::SpecError> for BenchError {
    fn from(e: crate::cf::SpecError) -> Self {
        BenchError::Envelope(EnvelopeError::Spec(e))
    }
}

impl From<PfError> for BenchError {
    fn from(e: PfError) -> Self {
        BenchError::Pf(e)
    }
}

/// One grid cell of a complexity table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// Parameter values in the order of [`ComplexityTable::param_names`].
    pub params: Vec<f64>,
    pub m_star: i64,
    pub m_mean: i64,
    /// Expected iterations with the variance-minimizing anchor.
    pub a_star: f64,
    /// Expected iterations with the mean anchor.
    pub a_mean: f64,
    /// Published complexity of the classical comparison generator for this
    /// cell, when one exists. Emitted as-is, never recomputed.
    pub a_reference: Option<f64>,
}

/// Grid of expected complexities for one family.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityTable {
    pub family: String,
    pub param_names: Vec<&'static str>,
    pub rows: Vec<TableRow>,
}

impl ComplexityTable {
    /// CSV with one header line; absent references print as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.param_names.iter().map(|s| s.to_string()).collect();
        header.extend(["m_star", "m_mean", "A_star", "A_mean", "A_reference"].map(String::from));
        let _ = writeln!(out, "{}", header.join(","));
        for row in &self.rows {
            let mut fields: Vec<String> = row.params.iter().map(|v| v.to_string()).collect();
            fields.push(row.m_star.to_string());
            fields.push(row.m_mean.to_string());
            fields.push(row.a_star.to_string());
            fields.push(row.a_mean.to_string());
            fields.push(row.a_reference.map(|v| v.to_string()).unwrap_or_default());
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    /// JSON with named parameters per row; same values as the CSV form.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let params: serde_json::Map<String, serde_json::Value> = self
                    .param_names
                    .iter()
                    .zip(&row.params)
                    .map(|(name, value)| (name.to_string(), serde_json::json!(value)))
                    .collect();
                serde_json::json!({
                    "params": params,
                    "m_star": row.m_star,
                    "m_mean": row.m_mean,
                    "A_star": row.a_star,
                    "A_mean": row.a_mean,
                    "A_reference": row.a_reference,
                })
            })
            .collect();
        serde_json::json!({ "family": self.family, "rows": rows })
    }
}

fn table_pool() -> Result<rayon::ThreadPool, BenchError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("CFSAMPLER_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => builder = builder.num_threads(n),
            _ => {
                return Err(BenchError::InvalidParameters(format!(
                    "CFSAMPLER_THREADS must be a positive integer, got '{raw}'"
                )))
            }
        }
    }
    builder
        .build()
        .map_err(|e| BenchError::InvalidParameters(format!("cannot build thread pool: {e}")))
}

fn complexity_cell(spec: &DistributionSpec) -> Result<(i64, i64, f64, f64), BenchError> {
    let m_star = select_m_star(spec)?;
    let m_mean = select_m_mean(spec)?;
    let a_star = build_envelope(spec, m_star)?.expected_iterations();
    let a_mean = if m_mean == m_star {
        a_star
    } else {
        build_envelope(spec, m_mean)?.expected_iterations()
    };
    Ok((m_star, m_mean, a_star, a_mean))
}

/// Grid of Poisson rates used for the published comparison table.
pub fn paper_grid_poisson() -> Vec<f64> {
    vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
}

/// Grid of (n, p) pairs for the published comparison table. The last trial
/// count, [`BINOMIAL_LIMIT_N`], stands in for the table's limit column.
pub fn paper_grid_binomial() -> Vec<(u64, f64)> {
    let ns = [10u64, 20, 40, 100, 200, 400, BINOMIAL_LIMIT_N];
    let ps = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut grid = Vec::with_capacity(ns.len() * ps.len());
    for &p in &ps {
        for &n in &ns {
            grid.push((n, p));
        }
    }
    grid
}

/// Grid of (a, b, c) triples for the published Poisson-Tweedie table.
pub fn paper_grid_poisson_tweedie() -> Vec<(f64, f64, f64)> {
    let bs = [1.0, 5.0];
    let as_ = [0.1, 0.3, 0.5, 0.7, 0.9];
    let cs = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut grid = Vec::with_capacity(50);
    for &b in &bs {
        for &a in &as_ {
            for &c in &cs {
                grid.push((a, b, c));
            }
        }
    }
    grid
}

// Published expected complexities of the Ahrens-Dieter Poisson generator
// (with Stadlober's optimization), for comparison only.
const POISSON_REFERENCE: &[(f64, f64)] = &[
    (1.0, 2.21),
    (2.0, 1.91),
    (5.0, 1.70),
    (10.0, 1.60),
    (20.0, 1.53),
    (50.0, 1.46),
    (100.0, 1.43),
];

// Published expected complexities of Stadlober's ratio-of-uniforms Binomial
// generator; the limit row is its asymptotic constant.
const BINOMIAL_REFERENCE: &[(u64, f64, f64)] = &[
    (10, 0.1, 2.21), (20, 0.1, 1.86), (40, 0.1, 1.71), (100, 0.1, 1.60), (200, 0.1, 1.52), (400, 0.1, 1.48),
    (10, 0.2, 1.80), (20, 0.2, 1.73), (40, 0.2, 1.62), (100, 0.2, 1.52), (200, 0.2, 1.47), (400, 0.2, 1.44),
    (10, 0.3, 1.80), (20, 0.3, 1.64), (40, 0.3, 1.57), (100, 0.3, 1.49), (200, 0.3, 1.46), (400, 0.3, 1.43),
    (10, 0.4, 1.74), (20, 0.4, 1.62), (40, 0.4, 1.54), (100, 0.4, 1.47), (200, 0.4, 1.44), (400, 0.4, 1.42),
    (10, 0.5, 1.70), (20, 0.5, 1.60), (40, 0.5, 1.52), (100, 0.5, 1.47), (200, 0.5, 1.44), (400, 0.5, 1.42),
];
const BINOMIAL_REFERENCE_LIMIT: f64 = 1.37;

fn poisson_reference(lambda: f64) -> Option<f64> {
    POISSON_REFERENCE.iter().find(|(l, _)| *l == lambda).map(|(_, a)| *a)
}

fn binomial_reference(n: u64, p: f64) -> Option<f64> {
    if n == BINOMIAL_LIMIT_N {
        return Some(BINOMIAL_REFERENCE_LIMIT);
    }
    BINOMIAL_REFERENCE
        .iter()
        .find(|(rn, rp, _)| *rn == n && *rp == p)
        .map(|(_, _, a)| *a)
}

/// Expected complexities over a list of Poisson rates.
pub fn table_poisson(lambdas: &[f64]) -> Result<ComplexityTable, BenchError> {
    let pool = table_pool()?;
    let rows = pool.install(|| {
        lambdas
            .par_iter()
            .map(|&lambda| {
                let spec = DistributionSpec::poisson(lambda)?;
                let (m_star, m_mean, a_star, a_mean) = complexity_cell(&spec)?;
                Ok(TableRow {
                    params: vec![lambda],
                    m_star,
                    m_mean,
                    a_star,
                    a_mean,
                    a_reference: poisson_reference(lambda),
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()
    })?;
    Ok(ComplexityTable { family: "poisson".into(), param_names: vec!["lambda"], rows })
}

/// Expected complexities over a list of Binomial (n, p) cells.
pub fn table_binomial(grid: &[(u64, f64)]) -> Result<ComplexityTable, BenchError> {
    let pool = table_pool()?;
    let rows = pool.install(|| {
        grid.par_iter()
            .map(|&(n, p)| {
                let spec = DistributionSpec::binomial(n, p)?;
                let (m_star, m_mean, a_star, a_mean) = complexity_cell(&spec)?;
                Ok(TableRow {
                    params: vec![n as f64, p],
                    m_star,
                    m_mean,
                    a_star,
                    a_mean,
                    a_reference: binomial_reference(n, p),
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()
    })?;
    Ok(ComplexityTable { family: "binomial".into(), param_names: vec!["n", "p"], rows })
}

/// Expected complexities over a list of Poisson-Tweedie (a, b, c) cells.
pub fn table_poisson_tweedie(grid: &[(f64, f64, f64)]) -> Result<ComplexityTable, BenchError> {
    let pool = table_pool()?;
    let rows = pool.install(|| {
        grid.par_iter()
            .map(|&(a, b, c)| {
                let spec = DistributionSpec::poisson_tweedie(a, b, c)?;
                if !spec.is_square_integrable() {
                    return Err(BenchError::InvalidParameters(format!(
                        "complexity undefined for {spec}: not square-integrable"
                    )));
                }
                let (m_star, m_mean, a_star, a_mean) = complexity_cell(&spec)?;
                Ok(TableRow {
                    params: vec![a, b, c],
                    m_star,
                    m_mean,
                    a_star,
                    a_mean,
                    a_reference: None,
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()
    })?;
    Ok(ComplexityTable { family: "poisson-tweedie".into(), param_names: vec!["a", "b", "c"], rows })
}

/// Independent Poisson-Tweedie generator for `a < 0`, via the compound
/// Poisson representation: `N ~ Poisson(-(b/a)(1-c)^a)` summands, each a
/// Negative Binomial `(-a, 1-c)`; the aggregate is one Negative Binomial
/// with shape `N(-a)`, drawn here through its Gamma-Poisson mixture.
///
/// This path shares nothing with the rejection sampler, which is what makes
/// it usable as a cross-check oracle.
pub fn sample_pt_compound<R: RngCore>(
    a: f64,
    b: f64,
    c: f64,
    rng: &mut R,
    n: usize,
) -> Result<Vec<i64>, BenchError> {
    if !(a < 0.0 && b > 0.0 && (0.0..1.0).contains(&c) && c > 0.0) {
        return Err(BenchError::InvalidParameters(
            "compound route requires a < 0, b > 0, c in (0, 1)".into(),
        ));
    }
    let rate = -(b / a) * (1.0 - c).powf(a);
    let poisson_n = Poisson::new(rate)
        .map_err(|e| BenchError::InvalidParameters(format!("compound rate: {e}")))?;
    let scale = c / (1.0 - c);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let summands: f64 = poisson_n.sample(rng);
        if summands < 0.5 {
            out.push(0);
            continue;
        }
        let shape = summands * (-a);
        let gamma = Gamma::new(shape, scale)
            .map_err(|e| BenchError::InvalidParameters(format!("gamma shape {shape}: {e}")))?;
        let lam: f64 = gamma.sample(rng);
        if lam <= 0.0 {
            out.push(0);
            continue;
        }
        let count: f64 = Poisson::new(lam)
            .map_err(|e| BenchError::InvalidParameters(format!("poisson rate {lam}: {e}")))?
            .sample(rng);
        out.push(count as i64);
    }
    Ok(out)
}

/// Maximum absolute deviation of the exponential-tilting identity
/// `p_X(x) = e^{(b/a)(1-c)^a} c^x p_Y(x)` over `x_lo..=x_hi`, where `X` is
/// Poisson-Tweedie `(a, b, c)` and `Y` Discrete Stable `(a, b)`. Both sides
/// are computed independently by inversion.
pub fn tilted_stable_check(
    a: f64,
    b: f64,
    c: f64,
    x_lo: i64,
    x_hi: i64,
    tol: f64,
) -> Result<f64, BenchError> {
    if !(a > 0.0 && a <= 1.0 && b > 0.0 && c > 0.0 && c < 1.0) {
        return Err(BenchError::InvalidParameters(
            "tilting identity requires a in (0, 1], b > 0, c in (0, 1)".into(),
        ));
    }
    let pt = DistributionSpec::poisson_tweedie(a, b, c)?;
    let ds = DistributionSpec::discrete_stable(a, b)?;
    let tilt = ((b / a) * (1.0 - c).powf(a)).exp();
    let mut worst = 0.0f64;
    for x in x_lo..=x_hi {
        let lhs = pf_inversion(&pt, x, tol)?;
        let rhs = tilt * c.powi(x as i32) * pf_inversion(&ds, x, tol)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Pearson chi-square goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    /// Degrees of freedom, `cells - 1`.
    pub dof: u64,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: u64,
}

/// Minimum samples for a meaningful chi-square test.
const GOF_MIN_SAMPLES: usize = 1_000;
/// Expected count per pooled cell.
const GOF_MIN_EXPECTED: f64 = 5.0;

/// Chi-square goodness of fit of `samples` against the evaluator's p.f.
///
/// Integer cells over the observed range are pooled left to right until each
/// pooled cell expects at least five counts; mass outside the observed range
/// is folded into the edge cells.
pub fn gof_chi_square(samples: &[i64], pf: &PfEvaluator) -> Result<GofResult, BenchError> {
    if samples.len() < GOF_MIN_SAMPLES {
        return Err(BenchError::InsufficientData(format!(
            "{} samples; need at least {GOF_MIN_SAMPLES}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let lo = *samples.iter().min().expect("nonempty");
    let hi = *samples.iter().max().expect("nonempty");

    let mut observed = vec![0.0f64; (hi - lo + 1) as usize];
    for &s in samples {
        observed[(s - lo) as usize] += 1.0;
    }
    let mut expected = Vec::with_capacity(observed.len());
    let mut mass_in_range = 0.0;
    for x in lo..=hi {
        let p = pf.pf(x)?;
        mass_in_range += p;
        expected.push(n * p);
    }
    // Fold unobserved tail mass into the edge cells (half each).
    let residual = (n * (1.0 - mass_in_range)).max(0.0);
    if let (Some(first), Some(last)) = (expected.first().copied(), expected.last().copied()) {
        let len = expected.len();
        expected[0] = first + 0.5 * residual;
        expected[len - 1] = last + 0.5 * residual;
    }

    let (stat, cells) = pooled_pearson(&observed, &expected)?;
    let dof = cells - 1;
    Ok(GofResult {
        statistic: stat,
        dof,
        p_value: gamma_ur(dof as f64 / 2.0, stat / 2.0),
        cells,
    })
}

fn pooled_pearson(observed: &[f64], expected: &[f64]) -> Result<(f64, u64), BenchError> {
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= GOF_MIN_EXPECTED {
            pooled.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        }
    }
    if pooled.len() < 2 {
        return Err(BenchError::InsufficientData(format!(
            "only {} pooled cell(s); need at least 2",
            pooled.len()
        )));
    }
    let stat = pooled
        .iter()
        .map(|(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum::<f64>();
    Ok((stat, pooled.len() as u64))
}

/// Two-sample chi-square homogeneity test (both samples pooled identically).
pub fn two_sample_chi_square(first: &[i64], second: &[i64]) -> Result<GofResult, BenchError> {
    if first.len() < GOF_MIN_SAMPLES || second.len() < GOF_MIN_SAMPLES {
        return Err(BenchError::InsufficientData(format!(
            "{} / {} samples; need at least {GOF_MIN_SAMPLES} each",
            first.len(),
            second.len()
        )));
    }
    let lo = (*first.iter().min().unwrap()).min(*second.iter().min().unwrap());
    let hi = (*first.iter().max().unwrap()).max(*second.iter().max().unwrap());
    let len = (hi - lo + 1) as usize;
    let mut counts1 = vec![0.0f64; len];
    let mut counts2 = vec![0.0f64; len];
    for &s in first {
        counts1[(s - lo) as usize] += 1.0;
    }
    for &s in second {
        counts2[(s - lo) as usize] += 1.0;
    }

    // Pool on combined counts so both samples share cell boundaries.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut acc1, mut acc2) = (0.0, 0.0);
    for i in 0..len {
        acc1 += counts1[i];
        acc2 += counts2[i];
        if acc1 + acc2 >= 2.0 * GOF_MIN_EXPECTED {
            pooled.push((acc1, acc2));
            acc1 = 0.0;
            acc2 = 0.0;
        }
    }
    if acc1 + acc2 > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc1;
            last.1 += acc2;
        }
    }
    if pooled.len() < 2 {
        return Err(BenchError::InsufficientData("fewer than 2 pooled cells".into()));
    }

    let (n1, n2) = (first.len() as f64, second.len() as f64);
    let (r1, r2) = ((n2 / n1).sqrt(), (n1 / n2).sqrt());
    let stat = pooled
        .iter()
        .map(|(o1, o2)| {
            let d = r1 * o1 - r2 * o2;
            d * d / (o1 + o2)
        })
        .sum::<f64>();
    let cells = pooled.len() as u64;
    let dof = cells - 1;
    Ok(GofResult {
        statistic: stat,
        dof,
        p_value: gamma_ur(dof as f64 / 2.0, stat / 2.0),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::build_envelope;
    use crate::sampler::{sample_n, SeededRng};

    #[test]
    fn limit_constant_value() {
        assert!((normal_limit_constant() - 1.569_934_253_72).abs() < 1e-10);
    }

    #[test]
    fn poisson_table_small_grid() {
        let table = table_poisson(&[1.0, 10.0]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!((table.rows[0].a_star - 1.99).abs() < 0.02);
        assert!((table.rows[1].a_star - 1.61).abs() < 0.02);
        assert_eq!(table.rows[0].a_reference, Some(2.21));
        assert_eq!(table.rows[0].m_star, 1);
        assert_eq!(table.rows[0].m_mean, 1);

        let off_grid = table_poisson(&[3.0]).unwrap();
        assert_eq!(off_grid.rows[0].a_reference, None);
    }

    #[test]
    fn binomial_table_cell() {
        let table = table_binomial(&[(10, 0.5)]).unwrap();
        assert!((table.rows[0].a_star - 1.73).abs() < 0.02);
        assert_eq!(table.rows[0].m_star, 5);
        assert_eq!(table.rows[0].a_reference, Some(1.70));
    }

    #[test]
    fn pt_table_reports_anchor_split() {
        let table = table_poisson_tweedie(&[(0.5, 1.0, 0.5)]).unwrap();
        let row = &table.rows[0];
        assert_ne!(row.m_star, row.m_mean);
        assert!((row.a_star - 2.41).abs() < 0.03, "a_star = {}", row.a_star);
        assert!((row.a_mean - 2.56).abs() < 0.03, "a_mean = {}", row.a_mean);
        assert!(row.a_star <= row.a_mean + 1e-9);
    }

    #[test]
    fn csv_and_json_forms_agree() {
        let table = table_poisson(&[1.0]).unwrap();
        let csv = table.to_csv();
        let json = table.to_json();
        assert!(csv.starts_with("lambda,m_star,m_mean,A_star,A_mean,A_reference\n"));
        let row_csv: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row_csv[0], "1");
        let row_json = &json["rows"][0];
        assert_eq!(row_json["params"]["lambda"], 1.0);
        assert_eq!(row_json["A_star"].as_f64().unwrap().to_string(), row_csv[3]);
    }

    #[test]
    fn compound_oracle_mean() {
        let mut rng = SeededRng::from_seed(11);
        let samples = sample_pt_compound(-1.0, 1.0, 0.5, &mut rng, 200_000).unwrap();
        let mean = samples.iter().sum::<i64>() as f64 / samples.len() as f64;
        // E[X] = bc/(1-c)^{1-a} = 2; sd of the sample mean ~ sqrt(var/n).
        assert!((mean - 2.0).abs() < 0.05, "mean = {mean}");
        assert!(samples.iter().any(|&x| x == 0), "N = 0 must yield zeros");
    }

    #[test]
    fn compound_oracle_rejects_bad_domain() {
        let mut rng = SeededRng::from_seed(1);
        assert!(sample_pt_compound(0.5, 1.0, 0.5, &mut rng, 10).is_err());
        assert!(sample_pt_compound(-1.0, 1.0, 0.0, &mut rng, 10).is_err());
    }

    #[test]
    fn tilting_identity_small_range() {
        let dev = tilted_stable_check(0.5, 1.0, 0.5, 0, 10, 1e-10).unwrap();
        assert!(dev < 1e-8, "deviation {dev}");
    }

    #[test]
    fn gof_accepts_its_own_distribution() {
        let spec = DistributionSpec::poisson(3.0).unwrap();
        let env = build_envelope(&spec, 3).unwrap();
        let pf = PfEvaluator::with_default_tol(spec);
        let mut rng = SeededRng::from_seed(2024);
        let report = sample_n(&env, &pf, &mut rng, 20_000).unwrap();
        let gof = gof_chi_square(&report.samples, &pf).unwrap();
        assert_eq!(gof.dof, gof.cells - 1);
        assert!(gof.p_value > 0.001, "p = {}", gof.p_value);
    }

    #[test]
    fn gof_rejects_wrong_distribution() {
        let right = DistributionSpec::poisson(1.0).unwrap();
        let env = build_envelope(&right, 1).unwrap();
        let pf_right = PfEvaluator::with_default_tol(right);
        let mut rng = SeededRng::from_seed(7);
        let report = sample_n(&env, &pf_right, &mut rng, 100_000).unwrap();
        let pf_wrong = PfEvaluator::with_default_tol(DistributionSpec::poisson(2.0).unwrap());
        let gof = gof_chi_square(&report.samples, &pf_wrong).unwrap();
        assert!(gof.p_value < 1e-6, "p = {}", gof.p_value);
    }

    #[test]
    fn gof_requires_enough_data() {
        let pf = PfEvaluator::with_default_tol(DistributionSpec::poisson(1.0).unwrap());
        assert!(matches!(
            gof_chi_square(&[0, 1, 2], &pf),
            Err(BenchError::InsufficientData(_))
        ));
        // Degenerate single-cell input: all samples equal.
        let constant = vec![0i64; 5_000];
        assert!(matches!(
            gof_chi_square(&constant, &pf),
            Err(BenchError::InsufficientData(_))
        ));
    }

    #[test]
    fn two_sample_consistency_and_power() {
        let spec = DistributionSpec::poisson(4.0).unwrap();
        let env = build_envelope(&spec, 4).unwrap();
        let pf = PfEvaluator::with_default_tol(spec);
        let mut rng = SeededRng::from_seed(31);
        let s1 = sample_n(&env, &pf, &mut rng, 20_000).unwrap().samples;
        let s2 = sample_n(&env, &pf, &mut rng, 20_000).unwrap().samples;
        let same = two_sample_chi_square(&s1, &s2).unwrap();
        assert!(same.p_value > 0.001, "p = {}", same.p_value);

        let other_spec = DistributionSpec::poisson(5.0).unwrap();
        let other_env = build_envelope(&other_spec, 5).unwrap();
        let other_pf = PfEvaluator::with_default_tol(other_spec);
        let s3 = sample_n(&other_env, &other_pf, &mut rng, 20_000).unwrap().samples;
        let diff = two_sample_chi_square(&s1, &s3).unwrap();
        assert!(diff.p_value < 1e-6, "p = {}", diff.p_value);
    }
}
