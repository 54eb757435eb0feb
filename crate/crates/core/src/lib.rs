//! Exact computations for toroidal N=(2,2) superconformal field theories,
//! their Z2-orbifolds, and the elliptic genera of complex tori and K3 surfaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`qseries`]: exact bivariate q/y series with rational coefficients and
//!   a four-variable companion used for non-holomorphic partition functions.
//! * [`modforms`]: Dedekind eta and the Jacobi theta functions, as exact series
//!   and as numeric evaluators, plus a weak-Jacobi-form transformation tester.
//! * [`narain`]: charge lattices built from torus data `(L, B)`, vector
//!   enumeration and the lattice partition sum.
//! * [`cft`]: sector partition functions, spectral flow, the Z2-orbifold and
//!   the conformal field theoretic elliptic genus.
//! * [`charclass`]: truncated Chern-class arithmetic, Todd class, Chern
//!   character, Hirzebruch-Riemann-Roch and the geometric elliptic genus.
//! * [`kummer`]: fixed points, Hodge diamonds and the A1 chart identities of
//!   the Kummer construction.
//! * [`verify`]: the headline identities as a runtime self-check.

pub mod cft;
pub mod charclass;
pub mod error;
pub mod kummer;
pub mod matrix;
pub mod modforms;
pub mod narain;
pub mod qseries;
pub mod rational;
pub mod verify;

pub use error::{Error, Result};
pub use rational::Rational;
