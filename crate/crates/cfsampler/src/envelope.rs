//! Envelope setup for the rejection sampler.
//!
//! For an integer-valued square-integrable `X` with characteristic function
//! `phi`, the p.f. is bounded by `min(c, k_m / (x - m)^2)` where
//!
//! ```text
//! c   = (1/pi) Int_0^pi |phi(t)| dt
//! k_m = (1/pi) Int_0^pi |phi''(t) - 2im phi'(t) - m^2 phi(t)| dt
//! ```
//!
//! (`k_m` is the same integral for the recentred variable `Y = X - m`; the
//! magnitude absorbs the `e^{-itm}` factor). Rounding a flat-plus-quadratic
//! mixture density to the integers turns that bound into a dominating p.f.
//! `p_Z` with total envelope mass
//!
//! ```text
//! sigma = Round(sqrt(k_m / c)) + 1/2
//! A     = 2 (sigma c + k_m / sigma)        (expected iterations)
//! alpha = 2 sigma c / A                    (mixture weight of the flat part)
//! ```
//!
//! and hat function `h(x) = c` inside `|x - m| <= sigma`, else
//! `k_m / ((x - m)^2 - 1/4)`, with `h = A p_Z` identically.

use crate::cf::DistributionSpec;
use crate::quad::{integrate, QuadError};

use num_complex::Complex64;

/// Absolute floor used by the quadrature runs for `c` and `k_m`.
const CONST_ABS_TOL: f64 = 1e-13;
/// Relative target for the quadrature runs for `c` and `k_m`. Kept a couple
/// of orders above the roundoff floor of the k integrand at million-scale
/// parameters (cancellation noise near its conical zeros), and seven orders
/// tighter than the tables need.
const CONST_REL_TOL: f64 = 1e-10;
/// Requested accuracy (in `m`) of the golden-section search for `m*`.
const M_STAR_TOL: f64 = 1e-4;

/// Errors raised during envelope construction.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeError {
    Quad(QuadError),
    Spec(crate::cf::SpecError),
}

impl std::fmt::Display for EnvelopeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvelopeError::Quad(e) => write!(f, "{e}"),
            EnvelopeError::Spec(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EnvelopeError {}

impl From<QuadError> for EnvelopeError {
    fn from(e: QuadError) -> Self {
        EnvelopeError::Quad(e)
    }
}

impl From<crate::cf::SpecError> for EnvelopeError {
    fn from(e: crate::cf::SpecError) -> Self {
        EnvelopeError::Spec(e)
    }
}

/// Frozen sampler setup around an anchor `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    m: i64,
    c: f64,
    k: f64,
    sigma: f64,
    alpha: f64,
    expected_iterations: f64,
    degenerate: bool,
}

impl Envelope {
    /// Anchor of the envelope.
    pub fn m(&self) -> i64 {
        self.m
    }

    /// Flat bound `(1/pi) Int_0^pi |phi|`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Tail constant `k_m`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Switch radius `j + 1/2`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mixture weight of the flat component, `2 sigma c / A`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Expected proposals per accepted variate (the envelope's total mass).
    pub fn expected_iterations(&self) -> f64 {
        self.expected_iterations
    }

    /// Advisory: the distribution looks like a point mass (`k ~ 0`, `c ~ 1`),
    /// so sampling it through the envelope is wasteful but still valid.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Hat function: `c` inside `|x - m| <= sigma`, else `k / ((x-m)^2 - 1/4)`.
    pub fn hat(&self, x: i64) -> f64 {
        let d = (x - self.m) as f64;
        if d.abs() <= self.sigma {
            self.c
        } else {
            self.k / (d * d - 0.25)
        }
    }

    /// Dominating p.f. of the rounded proposal variable.
    pub fn pz(&self, z: i64) -> f64 {
        let d = (z - self.m) as f64;
        if d.abs() <= self.sigma {
            self.alpha / (2.0 * self.sigma)
        } else {
            (1.0 - self.alpha) * self.sigma / (2.0 * d * d - 0.5)
        }
    }
}

fn magnitude_cf(spec: &DistributionSpec) -> impl Fn(f64) -> f64 + '_ {
    move |t| spec.cf(t).norm()
}

// |phi'' - 2im phi' - m^2 phi| evaluated as |phi| |(L' - im)^2 + L''| with
// L = log phi; the direct form cancels catastrophically when the moments are
// large (the three terms grow like m^2 while the result stays at the scale
// of E[(X - m)^2]).
fn magnitude_recentred_d2(spec: &DistributionSpec, m: f64) -> impl Fn(f64) -> f64 + '_ {
    move |t| {
        let mag = spec.cf(t).norm();
        if mag == 0.0 {
            return 0.0;
        }
        let (l1, l2) = spec.cf_log_derivs(t);
        let shifted = l1 - Complex64::new(0.0, m);
        mag * (shifted * shifted + l2).norm()
    }
}

/// Flat envelope constant `c = (1/pi) Int_0^pi |phi(t)| dt`.
///
/// Independent of the anchor: recentring only multiplies `phi` by a phase.
pub fn compute_c(spec: &DistributionSpec) -> Result<f64, QuadError> {
    let r = integrate(magnitude_cf(spec), 0.0, std::f64::consts::PI, CONST_ABS_TOL, CONST_REL_TOL)?;
    // |phi| <= 1 makes c <= 1; shave off quadrature roundoff.
    Ok((r.value / std::f64::consts::PI).min(1.0))
}

/// Tail envelope constant `k_m` for a real anchor `m` (the continuous
/// extension is what the `m*` minimizer searches over).
pub fn compute_k(spec: &DistributionSpec, m: f64) -> Result<f64, QuadError> {
    let r = integrate(
        magnitude_recentred_d2(spec, m),
        0.0,
        std::f64::consts::PI,
        CONST_ABS_TOL,
        CONST_REL_TOL,
    )?;
    Ok((r.value / std::f64::consts::PI).max(0.0))
}

/// Rounds half-way cases away from zero (the fixed rule used for every
/// rounding step in the setup, matching `f64::round`).
fn round_away(x: f64) -> i64 {
    x.round() as i64
}

/// Mean anchor `Round(E[X])`.
pub fn select_m_mean(spec: &DistributionSpec) -> Result<i64, crate::cf::SpecError> {
    let (mean, _) = spec.mean_and_second_moment()?;
    Ok(round_away(mean))
}

/// Variance-minimizing anchor `Round(argmin_m k_m)`.
///
/// `k_m` is minimized over real `m` by golden-section search on
/// `[E[X] - 4 sd, E[X] + 4 sd]` and the continuous minimizer is rounded.
/// If the search collapses onto a bracket endpoint (so unimodality looks
/// doubtful) the nine integers around `Round(E[X])` are scanned instead.
pub fn select_m_star(spec: &DistributionSpec) -> Result<i64, EnvelopeError> {
    let (mean, m2) = spec.mean_and_second_moment()?;
    let var = (m2 - mean * mean).max(0.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(round_away(mean));
    }

    let (mut lo, mut hi) = (mean - 4.0 * sd, mean + 4.0 * sd);
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = compute_k(spec, x1)?;
    let mut f2 = compute_k(spec, x2)?;
    while hi - lo > M_STAR_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = compute_k(spec, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = compute_k(spec, x2)?;
        }
    }
    let argmin = 0.5 * (lo + hi);

    // A minimizer glued to the original bracket edge means the bracket did
    // not contain an interior minimum; fall back to a local integer scan.
    let edge = M_STAR_TOL.max(1e-12 * sd);
    if (argmin - (mean - 4.0 * sd)).abs() < edge || (argmin - (mean + 4.0 * sd)).abs() < edge {
        let center = round_away(mean);
        let mut best = (f64::INFINITY, center);
        for m in (center - 4)..=(center + 4) {
            let k = compute_k(spec, m as f64)?;
            if k < best.0 {
                best = (k, m);
            }
        }
        return Ok(best.1);
    }

    Ok(round_away(argmin))
}

/// Builds the envelope around the given anchor.
pub fn build_envelope(spec: &DistributionSpec, m: i64) -> Result<Envelope, EnvelopeError> {
    if !spec.is_square_integrable() {
        return Err(crate::cf::SpecError::NotSquareIntegrable(spec.to_string()).into());
    }
    let c = compute_c(spec)?;
    let k = compute_k(spec, m as f64)?;
    let j = round_away((k / c).sqrt());
    let sigma = j as f64 + 0.5;
    let expected_iterations = 2.0 * (sigma * c + k / sigma);
    let alpha = 2.0 * sigma * c / expected_iterations;
    let degenerate = k < 1e-14 && c > 1.0 - 1e-9;
    debug_assert!(sigma > 0.0 && alpha > 0.0 && alpha <= 1.0);
    Ok(Envelope { m, c, k, sigma, alpha, expected_iterations, degenerate })
}
