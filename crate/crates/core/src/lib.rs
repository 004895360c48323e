// Parameter guards are written `!(x > 0.0)` so NaN inputs fail them;
// `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The linear-algebra kernels are banded index algorithms; indexed loops
// mirror their standard statements.
#![allow(clippy::needless_range_loop)]

//! Numerical verification toolkit for equilibration of Schrödinger dynamics
//! under Haar-random orthogonal decompositions of a finite-dimensional
//! Hilbert space: samplers for the unitary group, the unit sphere and the
//! decomposition manifold; closed-form overlap moments; exact projector
//! overlap tail laws with their analytic bounds; and exact finite-time
//! averages of projector weights with the matching convergence estimates.

pub mod dynamics;
pub mod eigen;
pub mod haar;
pub mod matrix;
pub mod moments;
pub mod parallel;
pub mod projector;
pub mod qr;
pub mod rng;
pub mod stats;
pub mod tails;

pub use eigen::{hermitian_eigendecomposition, SpectralData};
pub use haar::{
    g_nu, matrix_element, sample_decomposition, sample_haar_unitary, sample_unit_state,
    seminorm_infinity, weight, Decomposition, DimensionProfile, HaarError, UnitVector,
};
pub use matrix::{ComplexMatrix, LinalgError};
pub use projector::apply_projector;
pub use qr::householder_qr;
pub use rng::SeedSpec;
