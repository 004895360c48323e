//! Orthogonal projection onto a contiguous block of frame columns.

use num_complex::Complex64;
use std::ops::Range;

use crate::matrix::{inner, ComplexMatrix, LinalgError};

/// Applies the orthogonal projector onto `span{b_j : j in block}` to `psi`,
/// where `b_j` are columns of `frame`. Returns `sum_j <b_j, psi> b_j`.
///
/// The frame columns are assumed orthonormal; that is the caller's contract
/// (frames in this crate come from QR factorizations).
pub fn apply_projector(
    frame: &ComplexMatrix,
    block: Range<usize>,
    psi: &[Complex64],
) -> Result<Vec<Complex64>, LinalgError> {
    let dim = frame.rows();
    if block.end > frame.cols() || block.start > block.end {
        return Err(LinalgError::BlockOutOfRange {
            start: block.start,
            end: block.end,
            dim: frame.cols(),
        });
    }
    if psi.len() != dim {
        return Err(LinalgError::ShapeMismatch {
            expected: format!("vector of length {dim}"),
            got: format!("length {}", psi.len()),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for j in block {
        let col = frame.column(j);
        let coeff = inner(&col, psi);
        for (o, b) in out.iter_mut().zip(&col) {
            *o += coeff * b;
        }
    }
    Ok(out)
}

/// Squared norm of the projection, `|P psi|^2 = sum_j |<b_j, psi>|^2`.
pub fn projection_weight(
    frame: &ComplexMatrix,
    block: Range<usize>,
    psi: &[Complex64],
) -> Result<f64, LinalgError> {
    let dim = frame.rows();
    if block.end > frame.cols() || block.start > block.end {
        return Err(LinalgError::BlockOutOfRange {
            start: block.start,
            end: block.end,
            dim: frame.cols(),
        });
    }
    if psi.len() != dim {
        return Err(LinalgError::ShapeMismatch {
            expected: format!("vector of length {dim}"),
            got: format!("length {}", psi.len()),
        });
    }
    let mut acc = 0.0;
    for j in block {
        let mut coeff = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            coeff += frame.at(i, j).conj() * psi[i];
        }
        acc += coeff.norm_sqr();
    }
    Ok(acc)
}
