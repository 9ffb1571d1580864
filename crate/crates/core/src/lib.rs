//! Barrier-avoidance probabilities of branching Brownian motion.
//!
//! A particle started at distance `x` from a barrier diffuses, and after an
//! exponential lifetime is replaced by a random number of copies drawn from
//! an offspring polynomial `G`. The probability `p(x)` that no descendant
//! ever touches the barrier is computed three ways:
//!
//! * [`bbm`]: direct Monte Carlo of the particle system,
//! * [`pde`]: finite-difference evolution of `u_t = u_xx/2 + lambda (G(u) - u)`
//!   from below (`u = 0`) and above (`u = 1`),
//! * [`stationary`]: the closed form for the binary model and shooting for
//!   general `G`.

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bbm;
pub mod offspring;
pub mod output;
pub mod pde;
pub mod stationary;

pub use offspring::{Criticality, OffspringError, OffspringPolynomial, Regime};
