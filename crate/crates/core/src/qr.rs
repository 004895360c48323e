//! Householder QR factorization of square complex matrices.

use num_complex::Complex64;

use crate::matrix::{ComplexMatrix, LinalgError};

/// Phase of `z`, with the convention `phase(0) = 1`.
#[inline]
pub(crate) fn phase(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / n
    }
}

/// Factors a square matrix as `M = Q R` with `Q` unitary and `R` upper
/// triangular, by a sequence of Householder reflections. Columns whose
/// subdiagonal part is already exactly zero are left untouched, so e.g.
/// the identity factors as `(I, I)`.
pub fn householder_qr(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), LinalgError> {
    m.check_finite()?;
    if !m.is_square() {
        return Err(LinalgError::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let n = m.rows();
    let mut r = m.clone();
    let mut q = ComplexMatrix::identity(n);
    let mut v = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n {
        let tail_sq: f64 = (k + 1..n).map(|i| r.at(i, k).norm_sqr()).sum();
        if tail_sq == 0.0 {
            continue;
        }
        let x0 = r.at(k, k);
        let norm = (x0.norm_sqr() + tail_sq).sqrt();
        let alpha = -phase(x0) * norm;
        // v = x - alpha e1, restricted to rows k..n
        v[k] = x0 - alpha;
        for i in k + 1..n {
            v[i] = r.at(i, k);
        }
        let vnorm_sq: f64 = (k..n).map(|i| v[i].norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;

        // R <- H R on the trailing columns
        for j in k..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in k..n {
                dot += v[i].conj() * r.at(i, j);
            }
            let f = beta * dot;
            for i in k..n {
                *r.at_mut(i, j) -= f * v[i];
            }
        }
        // Q <- Q H (H is Hermitian, so this accumulates the product of
        // reflections applied from the left)
        for i in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for j in k..n {
                dot += q.at(i, j) * v[j];
            }
            let f = beta * dot;
            for j in k..n {
                *q.at_mut(i, j) -= f * v[j].conj();
            }
        }
        // The reflection maps the column onto alpha e1 by construction;
        // store that exactly and clear roundoff below the diagonal.
        *r.at_mut(k, k) = alpha;
        for i in k + 1..n {
            *r.at_mut(i, k) = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::vec_norm;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_factors_trivially() {
        let id = ComplexMatrix::identity(4);
        let (q, r) = householder_qr(&id).unwrap();
        assert!(q.sub(&id).frobenius_norm() < 1e-15);
        assert!(r.sub(&id).frobenius_norm() < 1e-15);
    }

    #[test]
    fn swap_matrix_gives_unit_diagonal_r() {
        let m = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        );
        let (q, r) = householder_qr(&m).unwrap();
        assert!(q.unitarity_residual() < 1e-12);
        assert!((r.at(0, 0).norm() - 1.0).abs() < 1e-12);
        assert!((r.at(1, 1).norm() - 1.0).abs() < 1e-12);
        assert!(r.at(1, 0).norm() < 1e-15);
        // Q is a permutation up to phases: each column has a single unit entry.
        for j in 0..2 {
            let col = q.column(j);
            let mut mags: Vec<f64> = col.iter().map(|z| z.norm()).collect();
            mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(mags[0] < 1e-12 && (mags[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_complex_matrix_reconstructs() {
        // Fixed pseudo-random 16x16 input; the residual checks are their own
        // oracle here.
        let n = 16;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = ComplexMatrix::from_fn(n, n, |_, _| c(next(), next()));
        let (q, r) = householder_qr(&m).unwrap();
        assert!(q.unitarity_residual() < 1e-10);
        for i in 0..n {
            for j in 0..i {
                assert_eq!(r.at(i, j), c(0.0, 0.0));
            }
        }
        let resid = q.mul(&r).sub(&m).frobenius_norm();
        assert!(resid <= 1e-10 * m.frobenius_norm());
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut m = ComplexMatrix::identity(2);
        *m.at_mut(0, 0) = c(f64::INFINITY, 0.0);
        assert!(householder_qr(&m).is_err());
    }

    #[test]
    fn rejects_rectangular_input() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            householder_qr(&m),
            Err(LinalgError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn reflection_preserves_column_norms() {
        let m = ComplexMatrix::from_vec(
            3,
            3,
            vec![
                c(1.0, 1.0),
                c(0.0, 2.0),
                c(3.0, 0.0),
                c(0.0, -1.0),
                c(2.0, 0.0),
                c(1.0, 1.0),
                c(4.0, 0.0),
                c(0.5, 0.5),
                c(0.0, 0.0),
            ],
        );
        let (_, r) = householder_qr(&m).unwrap();
        // First column norm is preserved in |R[0,0]|.
        let col0 = m.column(0);
        assert!((r.at(0, 0).norm() - vec_norm(&col0)).abs() < 1e-12);
    }
}
