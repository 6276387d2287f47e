//! A finite-dimensional laboratory for multiplicative ergodic decompositions.
//!
//! The crate builds, from the bottom up, everything needed to compute and
//! *verify* Oseledets-type splittings of matrix cocycles that need not be
//! invertible:
//!
//! * [`normed`] — norms, operators between normed spaces, and a deterministic
//!   extremizer over unit spheres.
//! * [`grassmannian`] — subspaces, metrics between them, oblique projections,
//!   dense enumerations, and first-hit selection.
//! * [`opstats`] — operator growth statistics (Bernstein and Gelfand numbers,
//!   minimal growth) and the inequality checks that relate them.
//! * [`cocycle`] — base dynamics, generators, and exact interval products with
//!   dyadic memoization and overflow-safe rescaling.
//! * [`kingman`] — subadditive estimators (forward, backward, window, and
//!   balanced two-sided) and Lyapunov spectrum estimation.
//! * [`oseledets`] — fast-space construction, slow projections, deflation, and
//!   the full inductive decomposition.
//! * [`harness`] — scenario catalog, ground-truth oracles, named checks,
//!   reports, and plot data emission.
//!
//! All numerical procedures are deterministic given their seeds and budgets;
//! re-running a scenario reproduces every reported number bit for bit.

pub mod cocycle;
pub mod error;
pub mod grassmannian;
pub mod harness;
pub mod kingman;
mod linalg;
pub mod normed;
pub mod opstats;
pub mod oseledets;

pub use error::{Error, Result};
