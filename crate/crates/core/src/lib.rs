//! Delay-stability bounds for linear systems
//! `x'(t) = A x(t) + A_d1 x(t - τ) + A_d2 ∫_{t-τ}^t x(s) ds`.
//!
//! The crate builds a two-parameter hierarchy of LMI stability conditions from
//! multiple-integral inequalities over orthogonal hypergeometric polynomials,
//! decides them with an embedded dense SDP solver and searches for delay bounds.
//!
//! Module map:
//! * [`polynomials`], [`projection`]: exact polynomial algebra and basis-change matrices.
//! * [`inequalities`]: quadrature evaluation of the integral functionals and their bounds.
//! * [`lmi`]: assembly of the stability conditions.
//! * [`sdp`]: margin-maximisation SDP and certificate checks.
//! * [`search`]: bisection, stability intervals and hierarchy sweeps.
//! * [`system`]: JSON system files and bundled examples.
//! * [`verify`]: randomized property suites behind `delaybound verify`.

pub mod error;
pub mod inequalities;
pub mod lmi;
pub mod polynomials;
pub mod projection;
pub mod quadrature;
pub mod rational;
pub mod sdp;
pub mod search;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
