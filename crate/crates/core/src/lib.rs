//! Pricing of discretely sampled arithmetic Asian (and European) call options
//! by truncated generalized-Hermite series.
//!
//! The call payoff `max(x - K, 0)` is expanded in Hermite polynomials composed
//! with the affine map `(x - a) / b`. Taking expectations turns the series into
//! a combination of conditional moments (European) or correlators
//! `E[Y(s_0)^k_0 ... Y(s_m)^k_m | F_t]` (Asian). For polynomial jump-diffusions
//! those are exact: they come from exponentials of the generator matrix acting
//! on the monomial basis, with the multi-time case compressed through L-shaped
//! elimination/duplication selectors.
//!
//! Module map:
//!
//! * [`hermite`]: Hermite and generalized Hermite polynomials, change of basis,
//!   call-payoff coefficients and their L² truncation error.
//! * [`generator`]: model parameters, generator matrices, NIG jump moments,
//!   matrix exponential, moment formula.
//! * [`kronecker`]: vec / vecL calculus, Kronecker products, L-eliminating and
//!   L-duplicating selectors.
//! * [`correlator`]: compressed correlator evaluation plus a tower-rule oracle.
//! * [`pricer`]: European and Asian prices, partial sums per truncation,
//!   stopping criterion, delta and theta.
//! * [`bench`]: Gaussian closed forms, error-bound constant and accuracy metrics.
//! * [`monte_carlo`]: exact-OU and NIG jump-diffusion simulation benchmark.
//! * [`quadrature`]: Gauss–Hermite / Gauss–Legendre / adaptive rules used as
//!   independent verification oracles.

pub mod bench;
pub mod correlator;
mod error;
pub mod generator;
pub mod hermite;
pub mod kronecker;
pub mod monte_carlo;
pub mod pricer;
pub mod quadrature;
pub(crate) mod summation;

pub use error::{Error, Result};
pub use summation::Accumulation;
