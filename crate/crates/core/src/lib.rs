//! Computational toolkit for metric fractals.
//!
//! Attractors of iterated function systems, Kameyama pseudometrics, doubling
//! estimates, and explicit embeddings of finite fractal data into the line,
//! Euclidean space and Hilbert space. Exact rational arithmetic is used wherever
//! the constructions allow it.

pub mod code_space;
pub mod formats;
pub mod hilbert;
pub mod ifs;
pub mod kameyama;
pub mod line_embed;
pub mod metric;
pub mod quotient;
pub mod realization;
pub mod scalar;

pub use scalar::{rat, Rational, Scalar};

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("not ultrametric: d({0},{2}) exceeds max(d({0},{1}), d({1},{2}))")]
    NotUltrametric(usize, usize, usize),
    #[error("triangle inequality fails for points ({0}, {1}, {2})")]
    TriangleViolation(usize, usize, usize),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("not embeddable: {0}")]
    NotEmbeddable(String),
    #[error("Lipschitz bound violated between points {0} and {1}")]
    LipschitzViolation(usize, usize),
    #[error("unresolved membership for point {0}")]
    UnresolvedMembership(String),
    #[error("lattice is not an ultrafractal: {0}")]
    NotUltrafractal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
