//! Hermitian eigendecomposition.
//!
//! Strategy: unitary Householder reduction of the Hermitian matrix to complex
//! tridiagonal form, a diagonal phase similarity that makes the tridiagonal
//! real symmetric, then implicit-shift QL iteration (EISPACK tql2 lineage)
//! with eigenvector accumulation. Eigenvalues are returned ascending with a
//! stable sort, so ties keep the iteration's ordering.

use num_complex::Complex64;

use crate::matrix::{ComplexMatrix, LinalgError};
use crate::qr::phase;

/// Maximum QL sweeps per eigenvalue before the solver reports failure.
const MAX_QL_ITERATIONS: usize = 64;

/// Relative Hermiticity tolerance enforced on the input.
pub const HERMITICITY_REL_TOL: f64 = 1e-10;

/// Eigenvalues (ascending) and an orthonormal eigenvector matrix whose
/// column `j` belongs to `eigenvalues[j]`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Spectral data of a diagonal matrix in the standard basis.
    /// Eigenvalues are sorted; the eigenvector columns are the matching
    /// permutation of the standard basis.
    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors = ComplexMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            eigenvalues.push(values[src]);
            *eigenvectors.at_mut(src, col) = Complex64::new(1.0, 0.0);
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    /// `max_{ij} |<phi_i, phi_j> - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += v.at(k, i).conj() * v.at(k, j);
                }
                if i == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// Frobenius norm of `M - V diag(E) V*`.
    pub fn reconstruction_residual(&self, m: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += v.at(i, k) * self.eigenvalues[k] * v.at(j, k).conj();
                }
                acc += (m.at(i, j) - s).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Coefficients of `psi` in the eigenbasis: `c[k] = <phi_k, psi>`.
    pub fn coefficients(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(psi.len(), n, "state dimension mismatch");
        let v = &self.eigenvectors;
        (0..n)
            .map(|k| (0..n).map(|i| v.at(i, k).conj() * psi[i]).sum())
            .collect()
    }

    /// Reassembles a state from eigenbasis coefficients.
    pub fn synthesize(&self, coeff: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(coeff.len(), n);
        let v = &self.eigenvectors;
        (0..n)
            .map(|i| (0..n).map(|k| v.at(i, k) * coeff[k]).sum())
            .collect()
    }
}

/// Diagonalizes a Hermitian matrix.
pub fn hermitian_eigendecomposition(m: &ComplexMatrix) -> Result<SpectralData, LinalgError> {
    m.require_hermitian(HERMITICITY_REL_TOL)?;
    let n = m.rows();
    if n == 0 {
        return Ok(SpectralData {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }

    // Symmetrize roundoff before reducing.
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| (m.at(i, j) + m.at(j, i).conj()) * 0.5);
    let mut q = ComplexMatrix::identity(n);
    tridiagonalize(&mut a, &mut q);

    // Strip subdiagonal phases: T_real = D* T D with D diagonal unitary.
    let mut d: Vec<f64> = (0..n).map(|i| a.at(i, i).re).collect();
    let mut e = vec![0.0f64; n];
    let mut ph = Complex64::new(1.0, 0.0);
    for i in 0..n.saturating_sub(1) {
        let sub = a.at(i + 1, i);
        e[i] = sub.norm();
        let next = ph * phase(sub);
        // Column i of Q is scaled by the accumulated phase of column i,
        // so scale column i+1 by `next` below; column 0 keeps phase 1.
        for r in 0..n {
            *q.at_mut(r, i + 1) *= next;
        }
        ph = next;
    }

    ql_implicit_shift(&mut d, &mut e, &mut q)?;

    // Stable ascending sort, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| q.at(i, order[j]));

    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
    })
}

/// Householder reduction to Hermitian tridiagonal form; accumulates the
/// similarity transform into `q` so that on exit `q* m q` is tridiagonal.
fn tridiagonalize(a: &mut ComplexMatrix, q: &mut ComplexMatrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut w = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n - 2 {
        let below_sq: f64 = (k + 2..n).map(|i| a.at(i, k).norm_sqr()).sum();
        if below_sq == 0.0 {
            continue;
        }
        let x0 = a.at(k + 1, k);
        let norm = (x0.norm_sqr() + below_sq).sqrt();
        let alpha = -phase(x0) * norm;
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a.at(i, k);
        }
        let vnorm_sq: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;

        // w = beta * A v on the trailing block, then the rank-two update
        // A <- A - v qv* - qv v* with qv = w - (beta sigma / 2) v.
        let mut sigma = Complex64::new(0.0, 0.0);
        for i in k + 1..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in k + 1..n {
                acc += a.at(i, j) * v[j];
            }
            w[i] = beta * acc;
            sigma += v[i].conj() * w[i];
        }
        let corr = sigma * (beta * 0.5);
        for i in k + 1..n {
            w[i] -= corr * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                *a.at_mut(i, j) -= upd;
            }
        }
        // The reflected column is alpha e1 by construction.
        *a.at_mut(k + 1, k) = alpha;
        *a.at_mut(k, k + 1) = alpha.conj();
        for i in k + 2..n {
            *a.at_mut(i, k) = Complex64::new(0.0, 0.0);
            *a.at_mut(k, i) = Complex64::new(0.0, 0.0);
        }
        // Q <- Q H
        for i in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for j in k + 1..n {
                dot += q.at(i, j) * v[j];
            }
            let f = beta * dot;
            for j in k + 1..n {
                *q.at_mut(i, j) -= f * v[j].conj();
            }
        }
    }
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix.
/// `d` holds the diagonal, `e[i]` the coupling between `i` and `i+1`
/// (`e[n-1]` is scratch). Rotations are accumulated into the columns of `z`.
fn ql_implicit_shift(
    d: &mut [f64],
    e: &mut [f64],
    z: &mut ComplexMatrix,
) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(LinalgError::ConvergenceFailure {
                    max_iterations: MAX_QL_ITERATIONS,
                });
            }

            // Wilkinson shift.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;

            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                for k in 0..z.rows() {
                    let zi1 = z.at(k, i + 1);
                    let zi = z.at(k, i);
                    *z.at_mut(k, i + 1) = zi * s + zi1 * c;
                    *z.at_mut(k, i) = zi * c - zi1 * s;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
