//! Rejection sampling for integer-valued random variables driven entirely by
//! the characteristic function.
//!
//! Given a square-integrable integer-valued random variable with
//! characteristic function `phi`, two quadratures over `[0, pi]` yield the
//! constants `c` and `k_m` that bound the probability function by
//! `min(c, k_m / (x - m)^2)`. Rounding a flat-plus-quadratic mixture density
//! turns that bound into a dominating p.f., and a three-uniform rejection
//! loop samples the target exactly. When the p.f. itself has no closed form
//! (Poisson-Tweedie is the motivating case) it is recovered pointwise from
//! the inversion formula and memoized.
//!
//! The crate is organized around that pipeline:
//!
//! - [`cf`]: built-in families (Poisson, Binomial, Negative Binomial,
//!   Discrete Stable, Poisson-Tweedie, custom), their `phi`, `phi'`, `phi''`
//!   and closed-form p.f.s;
//! - [`quad`]: adaptive Clenshaw-Curtis integration, inversion-formula p.f.
//!   evaluation and the memoizing [`quad::PfEvaluator`];
//! - [`envelope`]: the constants `c`, `k_m`, anchor selection (`m*`, `m**`)
//!   and the dominating envelope;
//! - [`sampler`]: the seeded rejection loop and sampling statistics;
//! - [`bench`]: expected-complexity tables, chi-square validation and
//!   independent Poisson-Tweedie cross-checks;
//! - [`cli`]: the command implementations behind the `cfsampler` binary.
//!
//! ```
//! use cfsampler::cf::DistributionSpec;
//! use cfsampler::envelope::{build_envelope, select_m_star};
//! use cfsampler::quad::PfEvaluator;
//! use cfsampler::sampler::{sample_n, SeededRng};
//!
//! // Poisson-Tweedie has no simple closed-form p.f.; the sampler only needs phi.
//! let spec = DistributionSpec::poisson_tweedie(0.5, 1.0, 0.5).unwrap();
//! let m = select_m_star(&spec).unwrap();
//! let env = build_envelope(&spec, m).unwrap();
//! let pf = PfEvaluator::with_default_tol(spec);
//! let mut rng = SeededRng::from_seed(42);
//! let report = sample_n(&env, &pf, &mut rng, 1000).unwrap();
//! assert_eq!(report.samples.len(), 1000);
//! ```

pub mod bench;
pub mod cf;
pub mod cli;
pub mod envelope;
pub mod quad;
pub mod sampler;

pub use cf::{CustomCf, DistributionSpec, Family, SpecError};
pub use envelope::{build_envelope, select_m_mean, select_m_star, Envelope};
pub use quad::{integrate, pf_inversion, PfEvaluator, PfStrategy, QuadratureResult};
pub use sampler::{sample_n, sample_one, SampleReport, SeededRng, UnitRng};
