//! Linear fractional-order initial value problems
//!
//!   D^α x(t) = A(t) x(t) + u(t),   J^{1−α} x(t)|_{t→t0+} = x0,   0 < α < 1,
//!
//! with the Riemann–Liouville derivative D^α and integral J^α taken from the
//! base point t0. The crate provides two parallel lanes:
//!
//! * an exact lane over fractional power series (closed under J^α, D^α, and
//!   multiplication by matrix polynomials), where the state-transition matrix
//!   Φ(t, t0) is built termwise and — for nilpotent-type systems — terminates
//!   after finitely many terms;
//! * a grid lane using product integration that handles the weakly singular
//!   kernels without losing the endpoint behaviour, for coefficients only
//!   known through samples.
//!
//! Layout:
//! * [`specfun`] — Γ, 1/Γ, ln Γ, Beta, Mittag-Leffler functions, and the
//!   matrix α-exponential.
//! * [`series`] — fractional power series and matrix polynomials with the
//!   termwise integral/derivative rules.
//! * [`grid`] — sampled functions, product-integration operators, and the
//!   differentiation-under-the-integral checker.
//! * [`transition`] — the transition matrix Φ in one- and two-variable form,
//!   with convergence reporting.
//! * [`solver`] — initial value problem assembly and residual checks.
//! * [`validate`] — a self-test battery wired into the CLI.

pub mod error;
pub mod grid;
pub mod series;
pub mod solver;
pub mod specfun;
pub mod transition;
pub mod validate;

pub use error::{Error, Result};
