//! Haar-uniform randomness on the unitary group, the unit sphere and the
//! space of orthogonal decompositions, plus the projector-overlap
//! evaluations built on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

use crate::eigen::SpectralData;
use crate::matrix::{ComplexMatrix, LinalgError};
use crate::projector::{apply_projector, projection_weight};
use crate::qr::{householder_qr, phase};
use crate::rng::{RngStream, SeedSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HaarError {
    #[error("invalid dimension profile: {reason}")]
    InvalidProfile { reason: String },
    #[error("block index {index} out of range for {n_blocks} blocks")]
    BlockOutOfRange { index: usize, n_blocks: usize },
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Block sizes `(d_1, ..., d_N)` of an orthogonal decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimensionProfile {
    dims: Vec<usize>,
}

impl DimensionProfile {
    /// Requires at least two blocks, each of positive dimension.
    pub fn new(dims: Vec<usize>) -> Result<Self, HaarError> {
        if dims.len() < 2 {
            return Err(HaarError::InvalidProfile {
                reason: format!("need at least 2 blocks, got {}", dims.len()),
            });
        }
        if dims.contains(&0) {
            return Err(HaarError::InvalidProfile {
                reason: "zero-dimensional block".into(),
            });
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_blocks(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension `D`.
    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn block_dim(&self, nu: usize) -> Result<usize, HaarError> {
        self.dims
            .get(nu)
            .copied()
            .ok_or(HaarError::BlockOutOfRange {
                index: nu,
                n_blocks: self.n_blocks(),
            })
    }

    /// Column range of block `nu` inside a frame.
    pub fn block_range(&self, nu: usize) -> Result<Range<usize>, HaarError> {
        if nu >= self.dims.len() {
            return Err(HaarError::BlockOutOfRange {
                index: nu,
                n_blocks: self.n_blocks(),
            });
        }
        let start: usize = self.dims[..nu].iter().sum();
        Ok(start..start + self.dims[nu])
    }
}

impl TryFrom<Vec<usize>> for DimensionProfile {
    type Error = HaarError;
    fn try_from(dims: Vec<usize>) -> Result<Self, HaarError> {
        DimensionProfile::new(dims)
    }
}

impl From<DimensionProfile> for Vec<usize> {
    fn from(p: DimensionProfile) -> Vec<usize> {
        p.dims
    }
}

/// Pure state: complex amplitudes with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    amplitudes: Vec<Complex64>,
}

/// Norm-defect tolerance accepted by [`UnitVector::new`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

impl UnitVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, HaarError> {
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > UNIT_NORM_TOL {
            return Err(HaarError::ShapeMismatch(format!(
                "squared norm {norm_sq} deviates from 1 by more than {UNIT_NORM_TOL}"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self, HaarError> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(HaarError::ShapeMismatch(
                "cannot normalize zero vector".into(),
            ));
        }
        for z in &mut amplitudes {
            *z /= norm;
        }
        Ok(Self { amplitudes })
    }

    /// Standard basis state `e_j`.
    pub fn basis_state(dim: usize, j: usize) -> Result<Self, HaarError> {
        if j >= dim {
            return Err(HaarError::IndexOutOfRange { index: j, dim });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[j] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub(crate) fn new_unchecked(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Rank-one density matrix `|phi><phi|`.
    pub fn outer_product(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }
}

/// An orthogonal direct-sum decomposition, stored as a full unitary frame
/// whose contiguous column blocks span the subspaces.
#[derive(Debug, Clone)]
pub struct Decomposition {
    frame: ComplexMatrix,
    profile: DimensionProfile,
}

/// Unitarity defect tolerance accepted by [`Decomposition::new`].
pub const FRAME_UNITARITY_TOL: f64 = 1e-10;

impl Decomposition {
    pub fn new(frame: ComplexMatrix, profile: DimensionProfile) -> Result<Self, HaarError> {
        if frame.rows() != profile.total() || frame.cols() != profile.total() {
            return Err(HaarError::ShapeMismatch(format!(
                "frame is {}x{} but profile total is {}",
                frame.rows(),
                frame.cols(),
                profile.total()
            )));
        }
        let defect = frame.unitarity_residual();
        if defect > FRAME_UNITARITY_TOL {
            return Err(HaarError::ShapeMismatch(format!(
                "frame unitarity defect {defect:.3e} exceeds {FRAME_UNITARITY_TOL:.1e}"
            )));
        }
        Ok(Self { frame, profile })
    }

    /// The decomposition aligned with the standard basis.
    pub fn standard(profile: DimensionProfile) -> Self {
        let frame = ComplexMatrix::identity(profile.total());
        Self { frame, profile }
    }

    pub(crate) fn from_parts_unchecked(frame: ComplexMatrix, profile: DimensionProfile) -> Self {
        Self { frame, profile }
    }

    pub fn frame(&self) -> &ComplexMatrix {
        &self.frame
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.profile.total()
    }

    pub fn n_blocks(&self) -> usize {
        self.profile.n_blocks()
    }

    pub fn block_range(&self, nu: usize) -> Result<Range<usize>, HaarError> {
        self.profile.block_range(nu)
    }

    /// Materializes the projector `P_nu` as a dense matrix. Quadratic in
    /// memory; meant for cross-checks, not hot loops.
    pub fn projector_matrix(&self, nu: usize) -> Result<ComplexMatrix, HaarError> {
        let range = self.block_range(nu)?;
        let n = self.dim();
        let mut p = ComplexMatrix::zeros(n, n);
        for j in range {
            let col = self.frame.column(j);
            for r in 0..n {
                for s in 0..n {
                    *p.at_mut(r, s) += col[r] * col[s].conj();
                }
            }
        }
        Ok(p)
    }
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix, with the
/// R-diagonal phases folded into Q so the factor with positive-real R
/// diagonal is returned. Without that correction QR of Ginibre is not Haar.
pub fn sample_haar_unitary(seed: SeedSpec, dim: usize) -> ComplexMatrix {
    sample_haar_unitary_with(&mut seed.rng(), dim)
}

/// As [`sample_haar_unitary`], drawing from an existing stream.
pub fn sample_haar_unitary_with(rng: &mut RngStream, dim: usize) -> ComplexMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| rng.standard_complex());
    let (q, r) = householder_qr(&g).expect("Ginibre sample is finite");
    ComplexMatrix::from_fn(dim, dim, |i, j| q.at(i, j) * phase(r.at(j, j)))
}

/// Haar-uniform state on the unit sphere of `C^dim`.
pub fn sample_unit_state(seed: SeedSpec, dim: usize) -> UnitVector {
    sample_unit_state_with(&mut seed.rng(), dim)
}

/// As [`sample_unit_state`], drawing from an existing stream.
pub fn sample_unit_state_with(rng: &mut RngStream, dim: usize) -> UnitVector {
    assert!(dim >= 1, "dimension must be positive");
    loop {
        let v: Vec<Complex64> = (0..dim).map(|_| rng.standard_complex()).collect();
        if let Ok(u) = UnitVector::normalized(v) {
            return u;
        }
    }
}

/// Haar-uniform decomposition with the given block profile: the pushforward
/// of Haar measure on `U(D)` under the block-frame map.
pub fn sample_decomposition(seed: SeedSpec, profile: &DimensionProfile) -> Decomposition {
    sample_decomposition_with(&mut seed.rng(), profile)
}

/// As [`sample_decomposition`], drawing from an existing stream.
pub fn sample_decomposition_with(rng: &mut RngStream, profile: &DimensionProfile) -> Decomposition {
    let frame = sample_haar_unitary_with(rng, profile.total());
    Decomposition::from_parts_unchecked(frame, profile.clone())
}

/// `|P_nu psi|^2`, the expected value of the block projector in state `psi`.
pub fn weight(dec: &Decomposition, nu: usize, psi: &UnitVector) -> Result<f64, HaarError> {
    let range = dec.block_range(nu)?;
    if psi.dim() != dec.dim() {
        return Err(HaarError::ShapeMismatch(format!(
            "state dimension {} vs decomposition dimension {}",
            psi.dim(),
            dec.dim()
        )));
    }
    Ok(projection_weight(dec.frame(), range, psi.amplitudes())?)
}

/// `P_nu psi` as an amplitude vector.
pub fn project(
    dec: &Decomposition,
    nu: usize,
    psi: &UnitVector,
) -> Result<Vec<Complex64>, HaarError> {
    let range = dec.block_range(nu)?;
    Ok(apply_projector(dec.frame(), range, psi.amplitudes())?)
}

/// Overlaps `C[alpha][j] = <phi_alpha, b_j>` between an orthonormal basis and
/// the columns of block `nu`. All matrix elements of `P_nu` in that basis are
/// `e_{alpha beta} = (C C*)_{alpha beta}`; computing `C` once is the shared
/// fast path for [`matrix_element`], [`g_nu`] and the dynamics module.
pub fn block_overlaps(
    dec: &Decomposition,
    nu: usize,
    basis: &SpectralData,
) -> Result<Vec<Vec<Complex64>>, HaarError> {
    let range = dec.block_range(nu)?;
    let dim = dec.dim();
    if basis.dim() != dim {
        return Err(HaarError::ShapeMismatch(format!(
            "basis dimension {} vs decomposition dimension {}",
            basis.dim(),
            dim
        )));
    }
    let frame = dec.frame();
    let vecs = &basis.eigenvectors;
    let mut c = vec![vec![Complex64::new(0.0, 0.0); range.len()]; dim];
    for alpha in 0..dim {
        for (jj, j) in range.clone().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                s += vecs.at(i, alpha).conj() * frame.at(i, j);
            }
            c[alpha][jj] = s;
        }
    }
    Ok(c)
}

#[inline]
pub(crate) fn element_from_overlaps(c: &[Vec<Complex64>], alpha: usize, beta: usize) -> Complex64 {
    c[alpha]
        .iter()
        .zip(&c[beta])
        .map(|(a, b)| a * b.conj())
        .sum()
}

/// Matrix element `e_{alpha beta} = <phi_alpha, P_nu phi_beta>` of the block
/// projector in the given orthonormal basis.
pub fn matrix_element(
    dec: &Decomposition,
    nu: usize,
    basis: &SpectralData,
    alpha: usize,
    beta: usize,
) -> Result<Complex64, HaarError> {
    let dim = dec.dim();
    if alpha >= dim {
        return Err(HaarError::IndexOutOfRange { index: alpha, dim });
    }
    if beta >= dim {
        return Err(HaarError::IndexOutOfRange { index: beta, dim });
    }
    let range = dec.block_range(nu)?;
    if basis.dim() != dim {
        return Err(HaarError::ShapeMismatch(format!(
            "basis dimension {} vs decomposition dimension {}",
            basis.dim(),
            dim
        )));
    }
    let frame = dec.frame();
    let vecs = &basis.eigenvectors;
    let mut e = Complex64::new(0.0, 0.0);
    for j in range {
        let mut ca = Complex64::new(0.0, 0.0);
        let mut cb = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            let bij = frame.at(i, j);
            ca += vecs.at(i, alpha).conj() * bij;
            cb += vecs.at(i, beta).conj() * bij;
        }
        e += ca * cb.conj();
    }
    Ok(e)
}

/// Matrix element of the block projector in the standard basis:
/// `sum_{j in block} B[alpha][j] conj(B[beta][j])`. The cheap path for
/// Monte Carlo sweeps where the reference basis is standard.
pub fn matrix_element_standard(
    dec: &Decomposition,
    nu: usize,
    alpha: usize,
    beta: usize,
) -> Result<Complex64, HaarError> {
    let dim = dec.dim();
    if alpha >= dim {
        return Err(HaarError::IndexOutOfRange { index: alpha, dim });
    }
    if beta >= dim {
        return Err(HaarError::IndexOutOfRange { index: beta, dim });
    }
    let range = dec.block_range(nu)?;
    let frame = dec.frame();
    Ok(range
        .map(|j| frame.at(alpha, j) * frame.at(beta, j).conj())
        .sum())
}

/// The worst-matrix-element majorant
/// `g_nu = max_{alpha != beta} |e_{alpha beta}|^2
///        + max_alpha |e_{alpha alpha} - d_nu/D|^2`.
pub fn g_nu(dec: &Decomposition, nu: usize, basis: &SpectralData) -> Result<f64, HaarError> {
    Ok(g_nu_split(dec, nu, basis)?.total())
}

/// Off-diagonal and diagonal parts of `g_nu`, kept separate because the
/// integral bounds treat them separately.
#[derive(Debug, Clone, Copy)]
pub struct GnuParts {
    pub max_offdiag_sq: f64,
    pub max_diag_dev_sq: f64,
}

impl GnuParts {
    pub fn total(&self) -> f64 {
        self.max_offdiag_sq + self.max_diag_dev_sq
    }
}

pub fn g_nu_split(
    dec: &Decomposition,
    nu: usize,
    basis: &SpectralData,
) -> Result<GnuParts, HaarError> {
    let c = block_overlaps(dec, nu, basis)?;
    let d_nu = dec.profile().block_dim(nu)?;
    Ok(gnu_from_overlaps(&c, d_nu, dec.dim()))
}

/// `g_nu` relative to the standard basis. The overlaps reduce to the frame
/// entries themselves, which keeps Monte Carlo sweeps over decompositions
/// at `O(D^2 d)` per sample instead of `O(D^3 d)`.
pub fn g_nu_split_standard(dec: &Decomposition, nu: usize) -> Result<GnuParts, HaarError> {
    let range = dec.block_range(nu)?;
    let d_nu = dec.profile().block_dim(nu)?;
    let dim = dec.dim();
    let frame = dec.frame();
    let c: Vec<Vec<Complex64>> = (0..dim)
        .map(|alpha| range.clone().map(|j| frame.at(alpha, j)).collect())
        .collect();
    Ok(gnu_from_overlaps(&c, d_nu, dim))
}

fn gnu_from_overlaps(c: &[Vec<Complex64>], d_nu: usize, dim: usize) -> GnuParts {
    let ratio = d_nu as f64 / dim as f64;
    let mut max_off = 0.0f64;
    let mut max_diag = 0.0f64;
    for alpha in 0..dim {
        for beta in alpha..dim {
            let e = element_from_overlaps(c, alpha, beta);
            if alpha == beta {
                let dev = (e.re - ratio).powi(2) + e.im.powi(2);
                max_diag = max_diag.max(dev);
            } else {
                // e_{beta alpha} is the conjugate; same magnitude.
                max_off = max_off.max(e.norm_sqr());
            }
        }
    }
    GnuParts {
        max_offdiag_sq: max_off,
        max_diag_dev_sq: max_diag,
    }
}

/// Semi-norm `|rho|_inf = sup_nu |Tr(rho P_nu)|`.
pub fn seminorm_infinity(rho: &ComplexMatrix, dec: &Decomposition) -> Result<f64, HaarError> {
    let dim = dec.dim();
    if rho.rows() != dim || rho.cols() != dim {
        return Err(HaarError::ShapeMismatch(format!(
            "operator is {}x{}, decomposition dimension is {}",
            rho.rows(),
            rho.cols(),
            dim
        )));
    }
    let frame = dec.frame();
    let mut sup = 0.0f64;
    for nu in 0..dec.n_blocks() {
        let mut trace = Complex64::new(0.0, 0.0);
        for j in dec.block_range(nu)? {
            // <b_j, rho b_j>
            let col = frame.column(j);
            let rho_b = rho.mul_vec(&col);
            trace += crate::matrix::inner(&col, &rho_b);
        }
        sup = sup.max(trace.norm());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::hermitian_eigendecomposition;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn profile_rejects_single_block() {
        assert!(matches!(
            DimensionProfile::new(vec![4]),
            Err(HaarError::InvalidProfile { .. })
        ));
        assert!(matches!(
            DimensionProfile::new(vec![2, 0]),
            Err(HaarError::InvalidProfile { .. })
        ));
    }

    #[test]
    fn block_ranges_partition_the_dimension() {
        let p = DimensionProfile::new(vec![2, 3, 1]).unwrap();
        assert_eq!(p.total(), 6);
        assert_eq!(p.block_range(0).unwrap(), 0..2);
        assert_eq!(p.block_range(1).unwrap(), 2..5);
        assert_eq!(p.block_range(2).unwrap(), 5..6);
        assert!(p.block_range(3).is_err());
    }

    #[test]
    fn haar_unitary_is_unitary() {
        for dim in [1usize, 2, 5, 16] {
            let u = sample_haar_unitary(SeedSpec::new(99, dim as u64), dim);
            assert!(u.unitarity_residual() <= 1e-10, "dim {dim}");
        }
    }

    #[test]
    fn unit_states_have_unit_norm() {
        for dim in [1usize, 3, 20] {
            let s = sample_unit_state(SeedSpec::new(5, dim as u64), dim);
            assert!((s.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dim_one_state_is_a_phase() {
        let s = sample_unit_state(SeedSpec::new(8, 0), 1);
        assert!((s.amplitudes()[0].norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        let profile = DimensionProfile::new(vec![2, 3, 3]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(17, 0), &profile);
        let psi = sample_unit_state(SeedSpec::new(17, 1), 8);
        let total: f64 = (0..3).map(|nu| weight(&dec, nu, &psi).unwrap()).sum();
        assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn weight_of_contained_and_orthogonal_states() {
        let profile = DimensionProfile::new(vec![2, 2]).unwrap();
        let dec = Decomposition::standard(profile);
        let inside = UnitVector::basis_state(4, 1).unwrap();
        let outside = UnitVector::basis_state(4, 3).unwrap();
        assert!((weight(&dec, 0, &inside).unwrap() - 1.0).abs() <= 1e-12);
        assert!(weight(&dec, 0, &outside).unwrap() <= 1e-12);
    }

    #[test]
    fn hand_computed_weights_for_uniform_state() {
        let profile = DimensionProfile::new(vec![2, 2]).unwrap();
        let dec = Decomposition::standard(profile);
        let psi = UnitVector::new(vec![c(0.5, 0.0); 4]).unwrap();
        assert!((weight(&dec, 0, &psi).unwrap() - 0.5).abs() <= 1e-12);
        assert!((weight(&dec, 1, &psi).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn matrix_element_against_dense_projector() {
        let profile = DimensionProfile::new(vec![2, 4]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(300, 0), &profile);
        // A generic orthonormal basis from a random Hermitian matrix.
        let mut rng = SeedSpec::new(300, 1).rng();
        let g = ComplexMatrix::from_fn(6, 6, |_, _| rng.standard_complex());
        let herm = ComplexMatrix::from_fn(6, 6, |i, j| (g.at(i, j) + g.at(j, i).conj()) * 0.5);
        let basis = hermitian_eigendecomposition(&herm).unwrap();

        let p = dec.projector_matrix(1).unwrap();
        for alpha in 0..6 {
            for beta in 0..6 {
                let direct = matrix_element(&dec, 1, &basis, alpha, beta).unwrap();
                let col_b = basis.eigenvectors.column(beta);
                let p_b = p.mul_vec(&col_b);
                let col_a = basis.eigenvectors.column(alpha);
                let oracle = crate::matrix::inner(&col_a, &p_b);
                assert!((direct - oracle).norm() <= 1e-12);
                // Hermitian symmetry e_ab = conj(e_ba)
                let flipped = matrix_element(&dec, 1, &basis, beta, alpha).unwrap();
                assert!((direct - flipped.conj()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn aligned_matrix_elements_are_indicator() {
        let profile = DimensionProfile::new(vec![2, 2]).unwrap();
        let dec = Decomposition::standard(profile);
        let basis = SpectralData::from_diagonal(&[0.0, 1.0, 2.0, 3.0]);
        for alpha in 0..4 {
            let e = matrix_element(&dec, 0, &basis, alpha, alpha).unwrap();
            let expect = if alpha < 2 { 1.0 } else { 0.0 };
            assert!((e.re - expect).abs() <= 1e-12 && e.im.abs() <= 1e-12);
        }
        let off = matrix_element(&dec, 0, &basis, 0, 3).unwrap();
        assert!(off.norm() <= 1e-12);
    }

    #[test]
    fn standard_basis_element_matches_generic_path() {
        let profile = DimensionProfile::new(vec![3, 4]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(73, 0), &profile);
        let basis = SpectralData::from_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        for alpha in 0..7 {
            for beta in 0..7 {
                let fast = matrix_element_standard(&dec, 1, alpha, beta).unwrap();
                let generic = matrix_element(&dec, 1, &basis, alpha, beta).unwrap();
                assert!((fast - generic).norm() <= 1e-12);
            }
        }
        let fast = g_nu_split_standard(&dec, 0).unwrap();
        let generic = g_nu_split(&dec, 0, &basis).unwrap();
        assert!((fast.total() - generic.total()).abs() <= 1e-12);
    }

    #[test]
    fn g_nu_aligned_values() {
        // Aligned case, profile (2,2): off-diagonal part vanishes and the
        // diagonal deviation is 1/2 on both included and excluded vectors.
        let profile = DimensionProfile::new(vec![2, 2]).unwrap();
        let dec = Decomposition::standard(profile);
        let basis = SpectralData::from_diagonal(&[0.0, 1.0, 2.0, 3.0]);
        let g = g_nu(&dec, 0, &basis).unwrap();
        assert!((g - 0.25).abs() <= 1e-12);

        // Profile (D-1, 1): direct evaluation gives max diagonal deviation
        // (D-1)/D at the vector outside the block, for either block.
        let d = 5usize;
        let profile = DimensionProfile::new(vec![d - 1, 1]).unwrap();
        let dec = Decomposition::standard(profile);
        let basis = SpectralData::from_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let expected = ((d as f64 - 1.0) / d as f64).powi(2);
        for nu in 0..2 {
            let parts = g_nu_split(&dec, nu, &basis).unwrap();
            assert!(parts.max_offdiag_sq <= 1e-12);
            assert!((parts.max_diag_dev_sq - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn g_nu_matches_brute_force_pair_scan() {
        let profile = DimensionProfile::new(vec![3, 5]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(41, 0), &profile);
        let mut rng = SeedSpec::new(41, 1).rng();
        let g = ComplexMatrix::from_fn(8, 8, |_, _| rng.standard_complex());
        let herm = ComplexMatrix::from_fn(8, 8, |i, j| (g.at(i, j) + g.at(j, i).conj()) * 0.5);
        let basis = hermitian_eigendecomposition(&herm).unwrap();

        let fast = g_nu(&dec, 0, &basis).unwrap();
        // Brute force over all pairs through the dense projector matrix.
        let p = dec.projector_matrix(0).unwrap();
        let ratio = 3.0 / 8.0;
        let mut max_off = 0.0f64;
        let mut max_diag = 0.0f64;
        for alpha in 0..8 {
            for beta in 0..8 {
                let col_b = basis.eigenvectors.column(beta);
                let col_a = basis.eigenvectors.column(alpha);
                let e = crate::matrix::inner(&col_a, &p.mul_vec(&col_b));
                if alpha == beta {
                    max_diag = max_diag.max((e - ratio).norm_sqr());
                } else {
                    max_off = max_off.max(e.norm_sqr());
                }
            }
        }
        assert!((fast - (max_off + max_diag)).abs() <= 1e-12);
    }

    #[test]
    fn seminorm_of_zero_and_microcanonical() {
        let profile = DimensionProfile::new(vec![1, 3]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(55, 0), &profile);
        let zero = ComplexMatrix::zeros(4, 4);
        assert!(seminorm_infinity(&zero, &dec).unwrap() <= 1e-15);
        // rho_mc = I/D has Tr(rho P_nu) = d_nu / D.
        let rho_mc = ComplexMatrix::identity(4).scale(c(0.25, 0.0));
        let val = seminorm_infinity(&rho_mc, &dec).unwrap();
        assert!((val - 0.75).abs() <= 1e-10);
    }

    #[test]
    fn seminorm_identity_for_pure_state_deviation() {
        // | |phi><phi| - rho_mc |_inf = sup_nu | |P_nu phi|^2 - d_nu/D |.
        let profile = DimensionProfile::new(vec![2, 2, 2]).unwrap();
        let dim = 6;
        for trial in 0..5u64 {
            let dec = sample_decomposition(SeedSpec::new(60 + trial, 0), &profile);
            let phi = sample_unit_state(SeedSpec::new(60 + trial, 1), dim);
            let rho = {
                let mut m = phi.outer_product();
                let inv = 1.0 / dim as f64;
                for i in 0..dim {
                    *m.at_mut(i, i) -= inv;
                }
                m
            };
            let lhs = seminorm_infinity(&rho, &dec).unwrap();
            let rhs = (0..3)
                .map(|nu| {
                    let w = weight(&dec, nu, &phi).unwrap();
                    (w - 2.0 / 6.0).abs()
                })
                .fold(0.0f64, f64::max);
            assert!((lhs - rhs).abs() <= 1e-12, "trial {trial}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn block_projectors_sum_to_identity() {
        let profile = DimensionProfile::new(vec![2, 1, 3]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(88, 0), &profile);
        let mut sum = ComplexMatrix::zeros(6, 6);
        for nu in 0..3 {
            let p = dec.projector_matrix(nu).unwrap();
            sum = ComplexMatrix::from_fn(6, 6, |i, j| sum.at(i, j) + p.at(i, j));
        }
        assert!(sum.sub(&ComplexMatrix::identity(6)).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn decomposition_constructor_rejects_skewed_frame() {
        let profile = DimensionProfile::new(vec![1, 1]).unwrap();
        let mut frame = ComplexMatrix::identity(2);
        *frame.at_mut(0, 1) = c(0.3, 0.0);
        assert!(Decomposition::new(frame, profile).is_err());
    }
}
