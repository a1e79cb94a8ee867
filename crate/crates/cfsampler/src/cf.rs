//! Built-in integer-valued distributions and their characteristic functions.
//!
//! Every distribution here exposes `phi(t) = E[exp(itX)]` together with its
//! first two derivatives in `t`. The derivatives are what the envelope setup
//! needs: `E[X] = Im phi'(0)` and `E[X^2] = -Re phi''(0)`. Families with a
//! closed-form probability function also expose it (in log space, so large
//! parameters do not overflow); the others are sampled through the inversion
//! formula alone.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;
use statrs::function::gamma::ln_gamma;

/// Step used by the finite-difference fallback for custom distributions.
pub const FD_STEP: f64 = 1e-5;

/// `exp(z) - 1` without cancellation for small `z`.
fn complex_exp_m1(z: Complex64) -> Complex64 {
    // e^{x+iy} - 1 = (expm1(x) cos y - 2 sin^2(y/2)) + i e^x sin y
    let half_sin = (0.5 * z.im).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half_sin * half_sin,
        z.re.exp() * z.im.sin(),
    )
}

/// Errors raised while constructing or interrogating a distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    /// A parameter violates the family's domain; the message names the constraint.
    InvalidParameters(String),
    /// A custom distribution was built without derivatives and without the
    /// finite-difference fallback enabled.
    MissingDerivatives,
    /// Moments were requested for a distribution with infinite `E[X^2]`.
    NotSquareIntegrable(String),
    /// The JSON form of a spec could not be parsed.
    Parse(String),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::InvalidParameters(msg) => write!(f, "invalid parameters: {msg}"),
            SpecError::MissingDerivatives => write!(
                f,
                "custom distribution lacks derivatives and the finite-difference fallback is disabled"
            ),
            SpecError::NotSquareIntegrable(msg) => {
                write!(f, "distribution is not square-integrable: {msg}")
            }
            SpecError::Parse(msg) => write!(f, "cannot parse distribution: {msg}"),
        }
    }
}

impl std::error::Error for SpecError {}

/// User-supplied characteristic function triple `(phi, phi', phi'')`.
///
/// All closures must be valid for `t` in `[-pi, pi]`. When the derivatives
/// are absent they are approximated by central differences, which is
/// explicitly marked approximate through [`CustomCf::derivatives_approximate`].
#[derive(Clone)]
pub struct CustomCf {
    phi: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    dphi: Option<Arc<dyn Fn(f64) -> Complex64 + Send + Sync>>,
    d2phi: Option<Arc<dyn Fn(f64) -> Complex64 + Send + Sync>>,
}

impl CustomCf {
    /// Builds a custom triple from analytic expressions.
    pub fn new<F, D, D2>(phi: F, dphi: D, d2phi: D2) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
        D: Fn(f64) -> Complex64 + Send + Sync + 'static,
        D2: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        CustomCf {
            phi: Arc::new(phi),
            dphi: Some(Arc::new(dphi)),
            d2phi: Some(Arc::new(d2phi)),
        }
    }

    /// Builds a custom triple from `phi` alone; derivatives are approximated
    /// by central differences with step [`FD_STEP`].
    pub fn with_finite_differences<F>(phi: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        CustomCf {
            phi: Arc::new(phi),
            dphi: None,
            d2phi: None,
        }
    }

    /// True when the derivatives come from the finite-difference fallback.
    pub fn derivatives_approximate(&self) -> bool {
        self.dphi.is_none() || self.d2phi.is_none()
    }
}

impl fmt::Debug for CustomCf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCf")
            .field("derivatives_approximate", &self.derivatives_approximate())
            .finish()
    }
}

/// Distribution family plus parameters.
#[derive(Debug, Clone)]
pub enum Family {
    /// Poisson with rate `lambda > 0`.
    Poisson { lambda: f64 },
    /// Binomial with `n >= 1` trials and success probability `p` in `(0, 1)`.
    Binomial { n: u64, p: f64 },
    /// Negative Binomial counting failures before `r` successes (real `r > 0`)
    /// with success probability `q` in `(0, 1)`:
    /// `phi(t) = (q / (1 - (1-q) e^{it}))^r`.
    NegativeBinomial { r: f64, q: f64 },
    /// Discrete Stable with `phi(t) = exp(-(b/a)(1 - e^{it})^a)`, `a` in
    /// `(0, 1]`, `b > 0`. Square-integrable only for `a = 1`.
    DiscreteStable { a: f64, b: f64 },
    /// Poisson-Tweedie with `phi(t) = exp((b/a)[(1-c)^a - (1 - c e^{it})^a])`
    /// on the domain `(a, b, c) in (-inf, 0] x (0, inf) x [0, 1)` union
    /// `(0, 1] x (0, inf) x [0, 1]`; `a = 0` is the Negative Binomial limit.
    PoissonTweedie { a: f64, b: f64, c: f64 },
    /// User-supplied characteristic function.
    Custom(CustomCf),
}

/// A validated distribution: the single entry point for `phi`, its
/// derivatives, moments and (when available) the closed-form p.f.
///
/// Specs are immutable once constructed and cheap to clone; all evaluation
/// methods take `&self`, so a spec can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct DistributionSpec {
    family: Family,
}

fn require(cond: bool, msg: &str) -> Result<(), SpecError> {
    if cond {
        Ok(())
    } else {
        Err(SpecError::InvalidParameters(msg.to_string()))
    }
}

impl DistributionSpec {
    pub fn poisson(lambda: f64) -> Result<Self, SpecError> {
        require(lambda.is_finite() && lambda > 0.0, "poisson requires lambda > 0")?;
        Ok(Self { family: Family::Poisson { lambda } })
    }

    pub fn binomial(n: u64, p: f64) -> Result<Self, SpecError> {
        require(n >= 1, "binomial requires n >= 1")?;
        require(p.is_finite() && p > 0.0 && p < 1.0, "binomial requires p in (0, 1)")?;
        Ok(Self { family: Family::Binomial { n, p } })
    }

    pub fn negative_binomial(r: f64, q: f64) -> Result<Self, SpecError> {
        require(r.is_finite() && r > 0.0, "negative binomial requires r > 0")?;
        require(q.is_finite() && q > 0.0 && q < 1.0, "negative binomial requires q in (0, 1)")?;
        Ok(Self { family: Family::NegativeBinomial { r, q } })
    }

    pub fn discrete_stable(a: f64, b: f64) -> Result<Self, SpecError> {
        require(a.is_finite() && a > 0.0 && a <= 1.0, "discrete stable requires a in (0, 1]")?;
        require(b.is_finite() && b > 0.0, "discrete stable requires b > 0")?;
        Ok(Self { family: Family::DiscreteStable { a, b } })
    }

    pub fn poisson_tweedie(a: f64, b: f64, c: f64) -> Result<Self, SpecError> {
        require(
            a.is_finite() && b.is_finite() && c.is_finite(),
            "poisson-tweedie parameters must be finite",
        )?;
        require(b > 0.0, "poisson-tweedie requires b > 0")?;
        if a <= 0.0 {
            require((0.0..1.0).contains(&c), "poisson-tweedie with a <= 0 requires c in [0, 1)")?;
        } else {
            require(a <= 1.0, "poisson-tweedie requires a <= 1")?;
            require(
                (0.0..=1.0).contains(&c),
                "poisson-tweedie with a in (0, 1] requires c in [0, 1]",
            )?;
        }
        Ok(Self { family: Family::PoissonTweedie { a, b, c } })
    }

    pub fn custom(cf: CustomCf) -> Self {
        Self { family: Family::Custom(cf) }
    }

    /// Like [`DistributionSpec::custom`] but rejects triples that would rely
    /// on the finite-difference fallback.
    pub fn custom_exact(cf: CustomCf) -> Result<Self, SpecError> {
        if cf.derivatives_approximate() {
            return Err(SpecError::MissingDerivatives);
        }
        Ok(Self::custom(cf))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Evaluates `phi(t)`.
    pub fn cf(&self, t: f64) -> Complex64 {
        let i = Complex64::i();
        match &self.family {
            Family::Poisson { lambda } => (lambda * ((i * t).exp() - 1.0)).exp(),
            Family::Binomial { n, p } => {
                let w = Complex64::new(1.0 - p, 0.0) + p * (i * t).exp();
                w.powf(*n as f64)
            }
            Family::NegativeBinomial { r, q } => {
                let d = Complex64::new(1.0, 0.0) - (1.0 - q) * (i * t).exp();
                (q / d).powf(*r)
            }
            Family::DiscreteStable { a, b } => {
                let one_minus_e = Complex64::new(1.0, 0.0) - (i * t).exp();
                (-(b / a) * one_minus_e.powf(*a)).exp()
            }
            Family::PoissonTweedie { a, b, c } => {
                let d = Complex64::new(1.0, 0.0) - c * (i * t).exp();
                if *a == 0.0 {
                    // Negative Binomial limit of the exponent.
                    (Complex64::new(1.0 - c, 0.0) / d).powf(*b)
                } else {
                    // (b/a) [(1-c)^a - d^a] written through expm1 so that
                    // small |a| does not amplify roundoff by b/|a|.
                    let log_flat = (1.0 - c).ln();
                    let log_d = d.ln();
                    let exponent = (b / a)
                        * (Complex64::new((a * log_flat).exp_m1(), 0.0)
                            - complex_exp_m1(a * log_d));
                    exponent.exp()
                }
            }
            Family::Custom(cf) => (cf.phi)(t),
        }
    }

    /// Analytic log-derivative pair `(L', L'')` with `L = log phi`, for the
    /// exponential-form families; `None` for custom specs.
    fn analytic_log_derivs(&self, t: f64) -> Option<(Complex64, Complex64)> {
        let i = Complex64::i();
        match &self.family {
            Family::Poisson { lambda } => {
                let e = (i * t).exp();
                Some((i * lambda * e, -lambda * e))
            }
            Family::Binomial { n, p } => {
                let e = (i * t).exp();
                let w = Complex64::new(1.0 - p, 0.0) + p * e;
                let nf = *n as f64;
                Some((nf * i * p * e / w, -nf * p * (1.0 - p) * e / (w * w)))
            }
            Family::NegativeBinomial { r, q } => {
                let e = (i * t).exp();
                let c = 1.0 - q;
                let d = Complex64::new(1.0, 0.0) - c * e;
                Some((i * r * c * e / d, -r * c * e / (d * d)))
            }
            Family::DiscreteStable { a, b } => {
                let e = (i * t).exp();
                let d = Complex64::new(1.0, 0.0) - e;
                Some((
                    i * b * e * d.powf(a - 1.0),
                    -b * e * d.powf(a - 2.0) * (Complex64::new(1.0, 0.0) - a * e),
                ))
            }
            Family::PoissonTweedie { a, b, c } => {
                let e = (i * t).exp();
                let d = Complex64::new(1.0, 0.0) - c * e;
                if *a == 0.0 {
                    // Negative Binomial limit with r = b, failure weight c.
                    Some((i * b * c * e / d, -b * c * e / (d * d)))
                } else {
                    Some((
                        i * b * c * e * d.powf(a - 1.0),
                        -b * c * e * d.powf(a - 2.0) * (Complex64::new(1.0, 0.0) - a * c * e),
                    ))
                }
            }
            Family::Custom(_) => None,
        }
    }

    /// Evaluates `(phi'(t), phi''(t))`.
    ///
    /// Analytic per family; a custom spec without derivatives falls back to
    /// central differences of `phi` with step [`FD_STEP`].
    pub fn cf_derivs(&self, t: f64) -> (Complex64, Complex64) {
        // Binomial phi has a zero at t = pi when p = 1/2, where the
        // phi * (log phi)' route is 0 * inf; its derivatives stay finite in
        // the direct product form.
        if let Family::Binomial { n, p } = &self.family {
            let i = Complex64::i();
            let e = (i * t).exp();
            let w = Complex64::new(1.0 - p, 0.0) + p * e;
            if *n == 1 {
                return (i * *p * e, -p * e);
            }
            let nf = *n as f64;
            let d1 = nf * i * p * e * w.powf(nf - 1.0);
            let d2 = -nf * p * e * w.powf(nf - 2.0) * ((nf - 1.0) * p * e + w);
            return (d1, d2);
        }
        if let Some((l1, l2)) = self.analytic_log_derivs(t) {
            let phi = self.cf(t);
            return (phi * l1, phi * (l1 * l1 + l2));
        }
        let Family::Custom(cf) = &self.family else { unreachable!() };
        match (&cf.dphi, &cf.d2phi) {
            (Some(d1), Some(d2)) => (d1(t), d2(t)),
            _ => {
                let h = FD_STEP;
                let fp = (cf.phi)(t + h);
                let f0 = (cf.phi)(t);
                let fm = (cf.phi)(t - h);
                ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
            }
        }
    }

    /// Evaluates `(phi'/phi, phi''/phi - (phi'/phi)^2)` at `t`, the
    /// log-derivative pair of `phi`.
    ///
    /// For the built-in families this is analytic and avoids the
    /// cancellation that `phi'' - 2im phi' - m^2 phi` suffers when the
    /// moments are large: the recentred second derivative becomes
    /// `phi ((L' - im)^2 + L'')` with every term near unit scale.
    /// Only meaningful where `phi(t) != 0`.
    pub fn cf_log_derivs(&self, t: f64) -> (Complex64, Complex64) {
        if let Some(pair) = self.analytic_log_derivs(t) {
            return pair;
        }
        let phi = self.cf(t);
        let (d1, d2) = self.cf_derivs(t);
        let l1 = d1 / phi;
        (l1, d2 / phi - l1 * l1)
    }

    /// True when `E[X^2]` is finite.
    pub fn is_square_integrable(&self) -> bool {
        match &self.family {
            Family::DiscreteStable { a, .. } => *a >= 1.0,
            Family::PoissonTweedie { a, c, .. } => *a <= 0.0 || *c < 1.0,
            _ => true,
        }
    }

    /// Returns `(E[X], E[X^2])` extracted from the derivatives at zero:
    /// `E[X] = Im phi'(0)`, `E[X^2] = -Re phi''(0)`. Real/imaginary residues
    /// of the opposite components are discarded.
    pub fn mean_and_second_moment(&self) -> Result<(f64, f64), SpecError> {
        if !self.is_square_integrable() {
            return Err(SpecError::NotSquareIntegrable(self.to_string()));
        }
        let (d1, d2) = self.cf_derivs(0.0);
        Ok((d1.im, -d2.re))
    }

    /// True for families with a closed-form probability function.
    pub fn has_closed_pf(&self) -> bool {
        matches!(
            self.family,
            Family::Poisson { .. } | Family::Binomial { .. } | Family::NegativeBinomial { .. }
        )
    }

    /// Closed-form `P(X = x)` where the family has one, `None` otherwise.
    /// Evaluated in log space so that large `n`/`lambda` do not overflow.
    pub fn pf_closed(&self, x: i64) -> Option<f64> {
        match &self.family {
            Family::Poisson { lambda } => {
                if x < 0 {
                    return Some(0.0);
                }
                let xf = x as f64;
                Some((xf * lambda.ln() - lambda - ln_gamma(xf + 1.0)).exp())
            }
            Family::Binomial { n, p } => {
                if x < 0 || (x as u64) > *n {
                    return Some(0.0);
                }
                let (nf, xf) = (*n as f64, x as f64);
                let log_pf = ln_gamma(nf + 1.0) - ln_gamma(xf + 1.0) - ln_gamma(nf - xf + 1.0)
                    + xf * p.ln()
                    + (nf - xf) * (1.0 - p).ln();
                Some(log_pf.exp())
            }
            Family::NegativeBinomial { r, q } => {
                if x < 0 {
                    return Some(0.0);
                }
                let xf = x as f64;
                let log_pf = ln_gamma(xf + r) - ln_gamma(xf + 1.0) - ln_gamma(*r)
                    + r * q.ln()
                    + xf * (1.0 - q).ln();
                Some(log_pf.exp())
            }
            _ => None,
        }
    }

    /// Parses `{"family": "...", "params": {...}}`.
    ///
    /// Accepted families and parameter names: `poisson` (`lambda`),
    /// `binomial` (`n`, `p`), `negative-binomial` (`r`, `q`),
    /// `discrete-stable` (`a`, `b`), `poisson-tweedie` (`a`, `b`, `c`).
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        #[derive(Deserialize)]
        struct Raw {
            family: String,
            #[serde(default)]
            params: BTreeMap<String, f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        let get = |name: &str| -> Result<f64, SpecError> {
            raw.params.get(name).copied().ok_or_else(|| {
                SpecError::Parse(format!("missing parameter '{name}' for family '{}'", raw.family))
            })
        };
        let expect = |names: &[&str]| -> Result<(), SpecError> {
            for key in raw.params.keys() {
                if !names.contains(&key.as_str()) {
                    return Err(SpecError::Parse(format!(
                        "unknown parameter '{key}' for family '{}' (expected {})",
                        raw.family,
                        names.join(", ")
                    )));
                }
            }
            Ok(())
        };
        match raw.family.as_str() {
            "poisson" => {
                expect(&["lambda"])?;
                Self::poisson(get("lambda")?)
            }
            "binomial" => {
                expect(&["n", "p"])?;
                let n = get("n")?;
                if !(n >= 1.0 && n.fract() == 0.0 && n <= u64::MAX as f64) {
                    return Err(SpecError::InvalidParameters("binomial requires integer n >= 1".into()));
                }
                Self::binomial(n as u64, get("p")?)
            }
            "negative-binomial" => {
                expect(&["r", "q"])?;
                Self::negative_binomial(get("r")?, get("q")?)
            }
            "discrete-stable" => {
                expect(&["a", "b"])?;
                Self::discrete_stable(get("a")?, get("b")?)
            }
            "poisson-tweedie" => {
                expect(&["a", "b", "c"])?;
                Self::poisson_tweedie(get("a")?, get("b")?, get("c")?)
            }
            "custom" => Err(SpecError::Parse(
                "custom distributions carry closures and can only be built through the API".into(),
            )),
            other => Err(SpecError::Parse(format!("unknown family '{other}'"))),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Poisson { lambda } => write!(f, "poisson(lambda={lambda})"),
            Family::Binomial { n, p } => write!(f, "binomial(n={n}, p={p})"),
            Family::NegativeBinomial { r, q } => write!(f, "negative-binomial(r={r}, q={q})"),
            Family::DiscreteStable { a, b } => write!(f, "discrete-stable(a={a}, b={b})"),
            Family::PoissonTweedie { a, b, c } => write!(f, "poisson-tweedie(a={a}, b={b}, c={c})"),
            Family::Custom(cf) => {
                if cf.derivatives_approximate() {
                    write!(f, "custom(finite-difference derivatives)")
                } else {
                    write!(f, "custom")
                }
            }
        }
    }
}
