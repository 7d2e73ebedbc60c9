//! Averaging of Hamiltonians with one fast phase and small amplitudes.
//!
//! A Hamiltonian `H0(I) + eps*g0(q, p, y)` with `I = (q^2 + p^2)/2` is brought,
//! one `eps` order at a time, into the form `H_m(I, z, eps) + eps*g_m` through
//! near-identity canonical maps given by mixed generating functions
//! `S = qP + y1 z2 + eps*S1(q, P, y1, z2)`. Every object stays a polynomial in
//! the complex pair `(u, v)`, so the construction is analytic at `I = 0`.
//!
//! * [`series`]: truncated power series, brackets, substitution.
//! * [`homological`]: phase average and the homological equation.
//! * [`normalform`]: the step-by-step normalization.
//! * [`numerics`]: flows, point transforms and drift experiments.
//! * [`harness`]: problem files, built-in examples and report pipelines.

pub mod error;
pub mod harness;
pub mod homological;
pub mod normalform;
pub mod numerics;
pub mod series;

pub use error::{Error, Result};
pub use series::{EvalPoint, MultiIndex, TruncatedSeries, TruncationPolicy, Var};
