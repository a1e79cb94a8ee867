//! The rejection loop: proposals from the rounded mixture, hat-function
//! acceptance, guard rails and statistics.
//!
//! One iteration draws `u1, u2, u3` (in that order), builds the proposal
//!
//! ```text
//! U2 = 2 u2 - 1            (uniform on [-1, 1))
//! if u1 > alpha { U2 = 1 / U2 }
//! X = Round(m + sigma U2)
//! ```
//!
//! and accepts when `u3 * h(X) < p(X)`. Strict inequality keeps
//! zero-probability integers out of the stream (with `<=`, a proposal with
//! `p(X) = 0` would be accepted whenever `u3 = 0`).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::envelope::Envelope;
use crate::quad::{PfError, PfEvaluator, PfStrategy};

/// Proposals whose distance from the anchor exceeds this are rejected without
/// evaluating the p.f.; the hat mass beyond it is below `2 k * 1e-12`.
pub const GUARD_DISTANCE: f64 = 1e12;

/// Evaluation radius for inversion-based p.f.s: the inversion integrand
/// oscillates `|x|` times over `[0, pi]`, so its cost grows linearly in the
/// distance from the anchor. Beyond this radius the proposal is rejected
/// without integrating; the envelope mass out there is below `2 k / 1e5`,
/// and for the c.f.s handled here the true mass is smaller by hundreds of
/// orders of magnitude. Closed-form p.f.s are evaluated at any distance up
/// to [`GUARD_DISTANCE`].
pub const PF_EVAL_RADIUS: f64 = 1e5;

/// Consecutive rejections tolerated before concluding the envelope is broken.
pub const ITERATION_LIMIT: u64 = 1_000_000;

/// Errors raised by the sampling loop.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleError {
    /// One variate needed more than [`ITERATION_LIMIT`] proposals: the hat
    /// does not dominate the p.f. or the c.f. is wrong.
    IterationLimit { iterations: u64 },
    /// The p.f. evaluation failed.
    Pf(PfError),
}

impl std::fmt::Display for SampleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleError::IterationLimit { iterations } => write!(
                f,
                "no acceptance after {iterations} proposals; envelope or c.f. is inconsistent"
            ),
            SampleError::Pf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SampleError {}

impl From<PfError> for SampleError {
    fn from(e: PfError) -> Self {
        SampleError::Pf(e)
    }
}

/// Source of uniforms on `[0, 1)`.
///
/// The sampler consumes nothing else, so any deterministic generator with a
/// fixed stream per seed satisfies the reproducibility contract.
pub trait UnitRng {
    fn next_unit(&mut self) -> f64;
}

/// Default generator: ChaCha (12 rounds) keyed by a 64-bit seed, mapped to
/// `[0, 1)` through the top 53 bits. The stream is identical across platforms
/// for a fixed seed.
#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha12Rng);

impl SeededRng {
    pub fn from_seed(seed: u64) -> Self {
        SeededRng(ChaCha12Rng::seed_from_u64(seed))
    }
}

impl UnitRng for SeededRng {
    fn next_unit(&mut self) -> f64 {
        // 53 uniform bits; exact on the [0, 1) grid of spacing 2^-53.
        (self.0.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

// The compound-Poisson oracle in `bench` wants a rand-compatible generator;
// delegating keeps a single seeding story for both worlds.
impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Samples plus acceptance statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleReport {
    pub samples: Vec<i64>,
    /// Total proposals drawn, accepted or not.
    pub iterations: u64,
    /// Proposals discarded by the distance guard without evaluating the p.f.
    pub guard_rejections: u64,
}

impl SampleReport {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.iterations as f64
    }
}

/// Draws one proposal from the envelope's dominating p.f.
pub fn propose<R: UnitRng + ?Sized>(env: &Envelope, rng: &mut R) -> i64 {
    let u1 = rng.next_unit();
    let mut u2 = 2.0 * rng.next_unit() - 1.0;
    if u1 > env.alpha() {
        u2 = 1.0 / u2;
    }
    // f64 -> i64 casts saturate, so even 1/u2 blowups stay well-defined; the
    // guard in the acceptance loop discards anything that far out.
    (env.m() as f64 + env.sigma() * u2).round() as i64
}

fn sample_one_counted<R: UnitRng + ?Sized>(
    env: &Envelope,
    pf: &PfEvaluator,
    rng: &mut R,
) -> Result<(i64, u64, u64), SampleError> {
    let mut iterations = 0u64;
    let mut guard_rejections = 0u64;
    loop {
        iterations += 1;
        if iterations > ITERATION_LIMIT {
            return Err(SampleError::IterationLimit { iterations: iterations - 1 });
        }
        let x = propose(env, rng);
        let u3 = rng.next_unit();
        let distance = ((x - env.m()) as f64).abs();
        if distance > GUARD_DISTANCE
            || (distance > PF_EVAL_RADIUS && pf.strategy() == PfStrategy::Inversion)
        {
            guard_rejections += 1;
            continue;
        }
        let p = pf.pf(x)?;
        if u3 * env.hat(x) < p {
            return Ok((x, iterations, guard_rejections));
        }
    }
}

/// Draws one variate distributed as the evaluator's p.f.
///
/// The envelope must have been built for the same spec and anchor as `pf`.
pub fn sample_one<R: UnitRng + ?Sized>(
    env: &Envelope,
    pf: &PfEvaluator,
    rng: &mut R,
) -> Result<i64, SampleError> {
    sample_one_counted(env, pf, rng).map(|(x, _, _)| x)
}

/// Draws `n` i.i.d. variates; `iterations / n` estimates the envelope mass.
pub fn sample_n<R: UnitRng + ?Sized>(
    env: &Envelope,
    pf: &PfEvaluator,
    rng: &mut R,
    n: usize,
) -> Result<SampleReport, SampleError> {
    let mut samples = Vec::with_capacity(n);
    let mut iterations = 0u64;
    let mut guard_rejections = 0u64;
    for _ in 0..n {
        let (x, it, guards) = sample_one_counted(env, pf, rng)?;
        samples.push(x);
        iterations += it;
        guard_rejections += guards;
    }
    Ok(SampleReport { samples, iterations, guard_rejections })
}
