//! Exact computer algebra for quivers with potentials.
//!
//! Paths compose left to right: `p·q` traverses `p` first and needs `t(p) = s(q)`.

#![allow(clippy::type_complexity, clippy::needless_range_loop)]

pub mod endo;
pub mod error;
pub mod flow;
pub mod jacobi;
pub mod linalg;
pub mod mutation;
pub mod potential;
pub mod quiver;
pub mod repmod;
pub mod scalar;
pub mod series;
pub mod torus;

pub use endo::{Endomorphism, PlaneBinaryTree};
pub use error::{Error, Result};
pub use flow::{DerivationFamily, TangentField, VectorField};
pub use jacobi::{FinitenessCertificate, JacobiTruncation, QuasiHomogeneity};
pub use mutation::{mutate, premutate, split_trivial, QPPair, SplitRule};
pub use potential::CyclicPotential;
pub use quiver::{DimVector, EulerForm, Quiver};
pub use repmod::{FSeries, MatrixRep};
pub use scalar::{CoeffKind, GaussianRational, Scalar};
pub use series::{CommPoly, GrowthReport, Path, TruncSeries};
pub use torus::{AdOperator, TorusContext, TorusElement};

pub use num_complex::Complex64;
pub use num_rational::BigRational;
