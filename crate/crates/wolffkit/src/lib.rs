//! Numerical toolkit for Wolff potentials of radial densities.
//!
//! The Wolff potential of a locally integrable density `f >= 0` is
//!
//! ```text
//! W_{beta,gamma}(f)(x) = int_0^inf ( mu(B_t(x)) / t^{n - beta*gamma} )^{1/(gamma-1)} dt/t,
//! mu(B_t(x)) = int_{B_t(x)} f(y) dy,
//! ```
//!
//! a nonlinear generalization of the Riesz potential (`gamma = 2`, `beta = alpha/2`
//! recovers `I_alpha / (n - alpha)`). This crate evaluates such potentials for
//! radial densities, classifies the parameter space of the associated integral
//! system of two coupled equations into non-existence / admissible regimes,
//! builds the explicit slow- and fast-decay solution pairs on the admissible
//! side, and estimates asymptotic decay rates (including logarithmic
//! corrections) from sampled potential values.
//!
//! Modules:
//! - [`system`]: system parameters, closed-form exponents, regime classifier
//! - [`wolff`]: radial densities, ball-mass reduction, potential evaluation
//! - [`asymptotics`]: the affine exponent iteration and tail rate fitting
//! - [`constructions`]: explicit solution pairs and their numerical certification
//! - [`quad`]: adaptive Gauss-Kronrod quadrature used throughout
//! - [`special`]: regularized incomplete beta function and sphere constants

// `!(x > 0)`-style guards are deliberate: they reject NaN along with the
// out-of-range sign, which `x <= 0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod constructions;
pub mod quad;
pub mod special;
pub mod system;
pub mod wolff;

pub use quad::{QuadError, QuadratureSpec, TailPolicy};
pub use system::SystemParams;
pub use wolff::RadialDensity;
