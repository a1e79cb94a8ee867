//! Adaptive quadrature on finite intervals and inversion-formula evaluation
//! of probability functions.
//!
//! The panel rule is a 33-node Clenshaw-Curtis rule with the nested 17-node
//! rule reusing every other evaluation as the error estimate. Panels are
//! bisected globally: the panel with the largest error estimate is split
//! first, until the estimates sum below `max(abs_tol, rel_tol * |value|)`.
//! The integrands arising here (|phi|, |phi''| and the inversion kernel) are
//! bounded and smooth apart from isolated |.| kinks, which the bisection
//! resolves locally.

use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

use crate::cf::DistributionSpec;

/// Number of nodes of the fine panel rule (the coarse rule uses every other node).
const RULE_NODES: usize = 33;
/// Maximum bisection depth per panel.
const MAX_DEPTH: u32 = 60;
/// Hard cap on live panels; hitting it is reported like depth exhaustion.
const MAX_PANELS: usize = 50_000;

/// Default absolute tolerance for probability-function inversion.
pub const DEFAULT_PF_TOL: f64 = 1e-10;

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    /// Estimated value of the integral.
    pub value: f64,
    /// Sum of per-panel error estimates (conservative for smooth integrands).
    pub abs_error_estimate: f64,
    /// Number of integrand evaluations.
    pub evaluations: u64,
}

/// Errors raised by the quadrature driver and the p.f. evaluators.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadError {
    /// Invalid interval or tolerances.
    BadArguments(String),
    /// Some panel exceeded the maximum bisection depth; the partial result
    /// travels with the error.
    MaxSubdivisions { partial: QuadratureResult },
    /// The integrand produced a non-finite value.
    NonFinite { at: f64 },
}

impl std::fmt::Display for QuadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuadError::BadArguments(msg) => write!(f, "bad quadrature arguments: {msg}"),
            QuadError::MaxSubdivisions { partial } => write!(
                f,
                "maximum subdivision depth exceeded (partial value {} +- {})",
                partial.value, partial.abs_error_estimate
            ),
            QuadError::NonFinite { at } => write!(f, "integrand not finite at t = {at}"),
        }
    }
}

impl std::error::Error for QuadError {}

/// Errors raised while evaluating a probability function.
#[derive(Debug, Clone, PartialEq)]
pub enum PfError {
    Quad(QuadError),
    /// The inversion integral came out below -1e-9: the characteristic
    /// function is not the c.f. of an integer-valued distribution.
    Inconsistent { x: i64, value: f64 },
}

impl std::fmt::Display for PfError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PfError::Quad(e) => write!(f, "{e}"),
            PfError::Inconsistent { x, value } => write!(
                f,
                "inversion produced p({x}) = {value} < -1e-9; the supplied c.f. is inconsistent"
            ),
        }
    }
}

impl std::error::Error for PfError {}

impl From<QuadError> for PfError {
    fn from(e: QuadError) -> Self {
        PfError::Quad(e)
    }
}

/// Clenshaw-Curtis nodes (cos(k pi / n), descending) and weights on [-1, 1].
fn cc_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let nodes: Vec<f64> = (0..=n).map(|k| (k as f64 * std::f64::consts::PI / nf).cos()).collect();
    let mut weights = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let theta = k as f64 * std::f64::consts::PI / nf;
        let mut s = 0.0;
        for j in 1..=n / 2 {
            let b = if j == n / 2 { 1.0 } else { 2.0 };
            s += b / ((4 * j * j - 1) as f64) * (2.0 * j as f64 * theta).cos();
        }
        let c = if k == 0 || k == n { 1.0 } else { 2.0 };
        weights.push(c / nf * (1.0 - s));
    }
    (nodes, weights)
}

struct PanelRule {
    nodes: Vec<f64>,
    fine_weights: Vec<f64>,
    coarse_weights: Vec<f64>,
}

fn panel_rule() -> &'static PanelRule {
    static RULE: OnceLock<PanelRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (nodes, fine_weights) = cc_rule(RULE_NODES - 1);
        let (coarse_nodes, coarse_weights) = cc_rule((RULE_NODES - 1) / 2);
        // The coarse nodes are every other fine node.
        for (i, cn) in coarse_nodes.iter().enumerate() {
            debug_assert!((cn - nodes[2 * i]).abs() < 1e-15);
        }
        PanelRule { nodes, fine_weights, coarse_weights }
    })
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn evaluate_panel<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    depth: u32,
) -> Result<(Panel, u64), QuadError> {
    let rule = panel_rule();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for (k, (&node, &w)) in rule.nodes.iter().zip(&rule.fine_weights).enumerate() {
        let fx = f(mid + half * node);
        if !fx.is_finite() {
            return Err(QuadError::NonFinite { at: mid + half * node });
        }
        fine += w * fx;
        if k % 2 == 0 {
            coarse += rule.coarse_weights[k / 2] * fx;
        }
    }
    let value = half * fine;
    let error = (half * (fine - coarse)).abs();
    Ok((Panel { lo, hi, value, error, depth }, RULE_NODES as u64))
}

/// Integrates a bounded function over `[lo, hi]`.
///
/// Terminates when the summed per-panel error estimates drop below
/// `max(abs_tol, rel_tol * |value|)`; fails with [`QuadError::MaxSubdivisions`]
/// when a panel would have to be bisected past depth 60.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadratureResult, QuadError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(QuadError::BadArguments(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if abs_tol < 0.0 || rel_tol < 0.0 || (abs_tol == 0.0 && rel_tol == 0.0) {
        return Err(QuadError::BadArguments("tolerances must be nonnegative and not both zero".into()));
    }

    let (first, mut evaluations) = evaluate_panel(&f, lo, hi, 0)?;
    let mut total = first.value;
    let mut err_sum = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while err_sum > f64::max(abs_tol, rel_tol * total.abs()) {
        let worst = heap.pop().expect("heap never empties while error remains");
        let partial = || QuadratureResult {
            value: total,
            abs_error_estimate: err_sum,
            evaluations,
        };
        if worst.depth >= MAX_DEPTH || heap.len() + 2 > MAX_PANELS {
            return Err(QuadError::MaxSubdivisions { partial: partial() });
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) {
            // Interval exhausted at machine precision.
            return Err(QuadError::MaxSubdivisions { partial: partial() });
        }
        let (left, n1) = evaluate_panel(&f, worst.lo, mid, worst.depth + 1)?;
        let (right, n2) = evaluate_panel(&f, mid, worst.hi, worst.depth + 1)?;
        evaluations += n1 + n2;
        total += left.value + right.value - worst.value;
        err_sum += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    Ok(QuadratureResult { value: total, abs_error_estimate: err_sum, evaluations })
}

/// `P(X = x)` recovered from the characteristic function:
/// `(1/pi) * Int_0^pi Re(e^{-itx} phi(t)) dt`, clamped to `[0, 1]`.
///
/// Values below `-1e-9` before clamping are reported as an inconsistency in
/// the supplied c.f. rather than rounded away.
pub fn pf_inversion(spec: &DistributionSpec, x: i64, tol: f64) -> Result<f64, PfError> {
    pf_inversion_counted(spec, x, tol).map(|(p, _)| p)
}

fn pf_inversion_counted(spec: &DistributionSpec, x: i64, tol: f64) -> Result<(f64, u64), PfError> {
    let xf = x as f64;
    let integrand = |t: f64| {
        let kernel = Complex64::from_polar(1.0, -t * xf);
        (kernel * spec.cf(t)).re
    };
    let result = integrate(integrand, 0.0, std::f64::consts::PI, tol, 0.0)?;
    let raw = result.value / std::f64::consts::PI;
    if raw < -1e-9 {
        return Err(PfError::Inconsistent { x, value: raw });
    }
    Ok((raw.clamp(0.0, 1.0), result.evaluations))
}

/// How a [`PfEvaluator`] obtains probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStrategy {
    /// The family has a closed-form p.f.
    ClosedForm,
    /// Probabilities come from the inversion formula, memoized per `x`.
    Inversion,
}

/// Memoizing probability-function evaluator.
///
/// Closed-form families answer directly; the rest go through [`pf_inversion`]
/// once per distinct `x`, with results cached. Lookups are safe from multiple
/// threads; concurrent misses may integrate the same `x` twice, but the
/// cached value is identical either way.
pub struct PfEvaluator {
    spec: DistributionSpec,
    strategy: PfStrategy,
    tol: f64,
    cache: RwLock<HashMap<i64, f64>>,
    integrations: AtomicU64,
    evaluations: AtomicU64,
}

impl PfEvaluator {
    /// Picks the strategy for `spec`: closed form when available, otherwise
    /// inversion with absolute tolerance `tol` per point.
    pub fn new(spec: DistributionSpec, tol: f64) -> Self {
        let strategy = if spec.has_closed_pf() {
            PfStrategy::ClosedForm
        } else {
            PfStrategy::Inversion
        };
        PfEvaluator {
            spec,
            strategy,
            tol,
            cache: RwLock::new(HashMap::new()),
            integrations: AtomicU64::new(0),
            evaluations: AtomicU64::new(0),
        }
    }

    /// Evaluator with the default inversion tolerance [`DEFAULT_PF_TOL`].
    pub fn with_default_tol(spec: DistributionSpec) -> Self {
        Self::new(spec, DEFAULT_PF_TOL)
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn strategy(&self) -> PfStrategy {
        self.strategy
    }

    /// Number of inversion integrals performed so far (cache hits excluded).
    pub fn integrations(&self) -> u64 {
        self.integrations.load(Ordering::Relaxed)
    }

    /// Total integrand evaluations spent in inversion integrals.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// `P(X = x)`.
    pub fn pf(&self, x: i64) -> Result<f64, PfError> {
        match self.strategy {
            PfStrategy::ClosedForm => Ok(self
                .spec
                .pf_closed(x)
                .expect("closed-form strategy implies a closed-form p.f.")),
            PfStrategy::Inversion => {
                if let Some(&hit) = self.cache.read().expect("cache lock").get(&x) {
                    return Ok(hit);
                }
                let (p, evals) = pf_inversion_counted(&self.spec, x, self.tol)?;
                self.integrations.fetch_add(1, Ordering::Relaxed);
                self.evaluations.fetch_add(evals, Ordering::Relaxed);
                self.cache.write().expect("cache lock").insert(x, p);
                Ok(p)
            }
        }
    }
}

impl std::fmt::Debug for PfEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PfEvaluator")
            .field("spec", &self.spec.to_string())
            .field("strategy", &self.strategy)
            .field("tol", &self.tol)
            .field("integrations", &self.integrations())
            .finish()
    }
}

/// Numerically checks the weighted inversion identity
/// `(x - m)^2 p(x) = (1/2 pi) Int_{-pi}^{pi} e^{-itx} E[(X - m)^2 e^{itX}] dt`,
/// where `E[(X-m)^2 e^{itX}] = -(phi''(t) - 2im phi'(t) - m^2 phi(t))`.
///
/// Returns `(lhs, rhs)` for comparison; the left side uses the best available
/// p.f. route (closed form, else inversion).
pub fn generalized_inversion_check(
    spec: &DistributionSpec,
    m: i64,
    x: i64,
    tol: f64,
) -> Result<(f64, f64), PfError> {
    let mf = m as f64;
    let xf = x as f64;
    let evaluator = PfEvaluator::new(spec.clone(), tol);
    let lhs = (xf - mf) * (xf - mf) * evaluator.pf(x)?;

    // phi'' - 2im phi' - m^2 phi in the cancellation-free log-derivative
    // form phi ((L' - im)^2 + L'').
    let integrand = |t: f64| {
        let phi = spec.cf(t);
        if phi.norm() == 0.0 {
            return 0.0;
        }
        let (l1, l2) = spec.cf_log_derivs(t);
        let shifted = l1 - Complex64::new(0.0, mf);
        let weighted = -phi * (shifted * shifted + l2);
        (Complex64::from_polar(1.0, -t * xf) * weighted).re
    };
    // The weighted c.f. is Hermitian in t, so the [-pi, pi] integral folds
    // onto twice the real part over [0, pi].
    let result = integrate(integrand, 0.0, std::f64::consts::PI, tol, 0.0)?;
    let rhs = result.value / std::f64::consts::PI;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_constants_exactly() {
        let r = integrate(|_| 1.0, 0.0, PI, 1e-12, 0.0).unwrap();
        assert!((r.value - PI).abs() < 1e-12);
        assert_eq!(r.evaluations, RULE_NODES as u64);
    }

    #[test]
    fn integrates_cosine_to_zero() {
        let r = integrate(f64::cos, 0.0, PI, 1e-10, 0.0).unwrap();
        assert!(r.value.abs() < 1e-10, "got {}", r.value);
    }

    #[test]
    fn integrates_poisson_cf_magnitude() {
        // Int_0^pi e^{cos t - 1} dt = pi e^{-1} I_0(1); value frozen from a
        // 30-digit evaluation of the Bessel form.
        let r = integrate(|t| (t.cos() - 1.0).exp(), 0.0, PI, 1e-12, 0.0).unwrap();
        assert!((r.value - 1.463_226_961_555_045_7).abs() < 1e-12, "got {}", r.value);
    }

    #[test]
    fn resolves_kinked_magnitude_integrand() {
        // |phi_Y''| for Poisson(1) at m = 1 has a conical zero at t = pi/3;
        // frozen from a 30-digit evaluation split at the kink.
        let spec = DistributionSpec::poisson(1.0).unwrap();
        let r = integrate(
            |t| {
                let (d1, d2) = spec.cf_derivs(t);
                let phi = spec.cf(t);
                (d2 - Complex64::new(0.0, 2.0) * d1 - phi).norm()
            },
            0.0,
            PI,
            1e-12,
            0.0,
        )
        .unwrap();
        assert!((r.value / PI - 0.445_422_995_416_188_3).abs() < 1e-11, "got {}", r.value / PI);
    }

    #[test]
    fn reports_depth_exhaustion_with_partial_value() {
        // Bounded but infinitely oscillatory near the left endpoint.
        let r = integrate(|t| (1.0 / t).sin(), 1e-12, 1.0, 1e-14, 0.0);
        match r {
            Err(QuadError::MaxSubdivisions { partial }) => {
                assert!(partial.value.is_finite());
                assert!(partial.evaluations > 1000);
            }
            other => panic!("expected MaxSubdivisions, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(integrate(|_| 1.0, 1.0, 0.0, 1e-10, 0.0).is_err());
        assert!(integrate(|_| 1.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(integrate(|_| 1.0, f64::NAN, 1.0, 1e-10, 0.0).is_err());
    }

    #[test]
    fn reports_non_finite_integrands() {
        let r = integrate(|t| 1.0 / t, 0.0, 1.0, 1e-10, 0.0);
        assert!(matches!(r, Err(QuadError::NonFinite { .. })));
    }

    #[test]
    fn pf_inversion_matches_closed_forms() {
        let poisson = DistributionSpec::poisson(1.0).unwrap();
        let p0 = pf_inversion(&poisson, 0, 1e-10).unwrap();
        assert!((p0 - (-1.0f64).exp()).abs() < 1e-9);

        let binomial = DistributionSpec::binomial(10, 0.5).unwrap();
        let p5 = pf_inversion(&binomial, 5, 1e-10).unwrap();
        assert!((p5 - 252.0 / 1024.0).abs() < 1e-9);
    }

    #[test]
    fn pf_inversion_normalizes_for_poisson_tweedie() {
        let spec = DistributionSpec::poisson_tweedie(0.5, 1.0, 0.5).unwrap();
        let mut sum = 0.0;
        for x in 0..=60 {
            let p = pf_inversion(&spec, x, 1e-10).unwrap();
            assert!(p >= 0.0);
            sum += p;
        }
        assert!((sum - 1.0).abs() < 1e-8, "sum = {sum}");
    }

    #[test]
    fn pf_inversion_flags_bogus_cf() {
        // phi(t) = cos(3t/2) pretends to be a c.f. but inverts to negative
        // mass at some integers.
        let bogus = DistributionSpec::custom(crate::cf::CustomCf::with_finite_differences(|t| {
            Complex64::new((1.5 * t).cos(), 0.0)
        }));
        let mut saw_inconsistent = false;
        for x in 0..4 {
            if matches!(pf_inversion(&bogus, x, 1e-10), Err(PfError::Inconsistent { .. })) {
                saw_inconsistent = true;
            }
        }
        assert!(saw_inconsistent);
    }

    #[test]
    fn evaluator_picks_strategy_and_caches() {
        let closed = PfEvaluator::with_default_tol(DistributionSpec::poisson(1.0).unwrap());
        assert_eq!(closed.strategy(), PfStrategy::ClosedForm);
        assert_eq!(closed.integrations(), 0);

        let inv = PfEvaluator::with_default_tol(
            DistributionSpec::poisson_tweedie(0.5, 1.0, 0.5).unwrap(),
        );
        assert_eq!(inv.strategy(), PfStrategy::Inversion);
        let a = inv.pf(3).unwrap();
        let n1 = inv.integrations();
        let b = inv.pf(3).unwrap();
        assert_eq!(inv.integrations(), n1, "second lookup must hit the cache");
        assert_eq!(a, b);
        assert_eq!(n1, 1);
    }

    #[test]
    fn generalized_inversion_examples() {
        let poisson = DistributionSpec::poisson(1.0).unwrap();
        let (lhs, rhs) = generalized_inversion_check(&poisson, 1, 3, 1e-10).unwrap();
        assert!((lhs - 4.0 * (-1.0f64).exp() / 6.0).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-8, "lhs={lhs} rhs={rhs}");

        let (lhs, rhs) = generalized_inversion_check(&poisson, 0, 1, 1e-10).unwrap();
        assert!((lhs - (-1.0f64).exp()).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-8);

        let binomial = DistributionSpec::binomial(10, 0.5).unwrap();
        let (lhs, rhs) = generalized_inversion_check(&binomial, 5, 7, 1e-10).unwrap();
        assert!((lhs - 4.0 * binomial.pf_closed(7).unwrap()).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn real_part_formula_equals_full_complex_integral() {
        // Conjugate symmetry: the imaginary part of the [0, pi] integral
        // cancels against its reflection, so the real-part formula equals
        // the full complex inversion integral.
        let spec = DistributionSpec::poisson(2.0).unwrap();
        for x in [0i64, 1, 3] {
            let xf = x as f64;
            let re_half = integrate(
                |t| (Complex64::from_polar(1.0, -t * xf) * spec.cf(t)).re,
                0.0,
                PI,
                1e-12,
                0.0,
            )
            .unwrap()
            .value;
            let re_full = integrate(
                |t| (Complex64::from_polar(1.0, -t * xf) * spec.cf(t)).re,
                -PI,
                PI,
                1e-12,
                0.0,
            )
            .unwrap()
            .value;
            let im_full = integrate(
                |t| (Complex64::from_polar(1.0, -t * xf) * spec.cf(t)).im,
                -PI,
                PI,
                1e-12,
                0.0,
            )
            .unwrap()
            .value;
            assert!(im_full.abs() < 1e-10);
            assert!((re_full / (2.0 * PI) - re_half / PI).abs() < 1e-10);
        }
    }
}
