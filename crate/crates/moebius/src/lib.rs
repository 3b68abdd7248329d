//! Moebius spaces over finite antipodal spaces.
//!
//! Given a finite set `Z` with a symmetric, positive, diameter-one kernel in
//! which every point has an antipode, the Moebius space `M(Z)` collects all
//! antipodal kernels with the same cross-ratios, metrized by the sup norm of
//! log-derivatives. This crate constructs points of `M(Z)` by integrating the
//! antipodal flow, builds its geodesics and rays, estimates Gromov products,
//! Busemann cocycles and hyperbolicity constants, relates finite samples to
//! their injective hulls, and computes tangent spaces from antipodal graphs.
//!
//! The compute-heavy scans (hyperbolicity quadruples, quasi-metric triples,
//! distance matrices) run on rayon when the default `parallel` feature is
//! enabled and fall back to identical sequential kernels without it.

// `!(x > 0.0)` is used as a NaN-rejecting guard throughout; the suggested
// rewrite `x <= 0.0` would accept NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Indices range over points of Z; enumerating them explicitly reads better
// than iterator adaptors in the numeric kernels.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod flow;
pub mod generators;
pub mod geometry;
pub mod hull;
pub mod matrix;
pub mod rng;
pub mod scan;
pub mod space;
pub mod tangent;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;
pub use space::{AntipodalSpace, MoebiusPoint, Tolerances, ValidationReport};
