//! Schrödinger evolution of projector weights: spectrum regularity checks,
//! exact finite-horizon time averages via trigonometric-polynomial
//! integration, their infinite-time limits, and the Monte Carlo experiment
//! drivers for the equilibration statements.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{hermitian_eigendecomposition, SpectralData};
use crate::haar::{
    block_overlaps, sample_decomposition_with, sample_unit_state_with, weight, Decomposition,
    DimensionProfile, GnuParts, HaarError, UnitVector,
};
use crate::matrix::{ComplexMatrix, LinalgError};
use crate::parallel::{self, Accumulator};
use crate::rng::{RngStream, SeedSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("spectrum fails the non-resonance hypothesis: {0}")]
    ResonantSpectrum(String),
    #[error("Fourier expansion of the integrand needs {terms} terms, cap is {cap}")]
    ExpansionTooLarge { terms: usize, cap: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error(transparent)]
    Haar(#[from] HaarError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Default scaled tolerance for degeneracy/resonance detection.
pub const DEFAULT_NR_TOL: f64 = 1e-9;

/// Term cap for the exact Fourier expansion (`D^4` terms).
pub const DEFAULT_TERM_CAP: usize = 1 << 20;

/// Stored outcome of the spectrum regularity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NrFlags {
    pub nondegenerate: bool,
    pub nonresonant: bool,
    /// Relative tolerance (scaled by the spectral range) the flags were
    /// computed at.
    pub tolerance: f64,
}

/// Index tuple witnessing a failed regularity property.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrWitness {
    /// Eigenvalue indices with a gap below tolerance.
    DegeneratePair(usize, usize),
    /// `(alpha, beta, alpha', beta')` with `E_a - E_b ~ E_a' - E_b'`.
    ResonantQuadruple(usize, usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrReport {
    pub nondegenerate: bool,
    pub nonresonant: bool,
    pub witness: Option<NrWitness>,
}

/// Checks the spectrum for degeneracies (adjacent gaps at or below
/// `tol * spectral_range`) and resonances (two ordered pairwise differences
/// `E_a - E_b`, `a != b`, closer than the same scaled tolerance, apart from
/// the forced coincidences).
pub fn check_nr(spectral: &SpectralData, tol: f64) -> NrReport {
    let e = &spectral.eigenvalues;
    let n = e.len();
    if n < 2 {
        return NrReport {
            nondegenerate: true,
            nonresonant: true,
            witness: None,
        };
    }
    let range = e[n - 1] - e[0];
    let scale = (tol * range).max(0.0);

    let mut nondegenerate = true;
    let mut witness = None;
    for i in 0..n - 1 {
        if e[i + 1] - e[i] <= scale {
            nondegenerate = false;
            witness = Some(NrWitness::DegeneratePair(i, i + 1));
            break;
        }
    }

    // All ordered pairwise differences, sorted; near-equal neighbours are
    // resonances (each ordered pair occurs once, so no coincidence is forced).
    let mut diffs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1));
    for a in 0..n {
        for b in 0..n {
            if a != b {
                diffs.push((e[a] - e[b], a, b));
            }
        }
    }
    diffs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut nonresonant = true;
    for w in diffs.windows(2) {
        if (w[1].0 - w[0].0).abs() <= scale {
            nonresonant = false;
            if witness.is_none() {
                witness = Some(NrWitness::ResonantQuadruple(w[0].1, w[0].2, w[1].1, w[1].2));
            }
            break;
        }
    }
    NrReport {
        nondegenerate,
        nonresonant,
        witness,
    }
}

/// Hermitian generator carried together with its spectral data and the
/// regularity flags computed at construction.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    matrix: ComplexMatrix,
    spectral: SpectralData,
    nr_flags: NrFlags,
}

impl Hamiltonian {
    pub fn from_matrix(matrix: ComplexMatrix, nr_tol: f64) -> Result<Self, DynamicsError> {
        let spectral = hermitian_eigendecomposition(&matrix)?;
        let report = check_nr(&spectral, nr_tol);
        Ok(Self {
            matrix,
            spectral,
            nr_flags: NrFlags {
                nondegenerate: report.nondegenerate,
                nonresonant: report.nonresonant,
                tolerance: nr_tol,
            },
        })
    }

    pub fn new(matrix: ComplexMatrix) -> Result<Self, DynamicsError> {
        Self::from_matrix(matrix, DEFAULT_NR_TOL)
    }

    /// Diagonal Hamiltonian in the standard basis.
    pub fn from_spectrum(eigenvalues: &[f64]) -> Self {
        let n = eigenvalues.len();
        let matrix = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(eigenvalues[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let spectral = SpectralData::from_diagonal(eigenvalues);
        let report = check_nr(&spectral, DEFAULT_NR_TOL);
        Self {
            matrix,
            spectral,
            nr_flags: NrFlags {
                nondegenerate: report.nondegenerate,
                nonresonant: report.nonresonant,
                tolerance: DEFAULT_NR_TOL,
            },
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn nr_flags(&self) -> NrFlags {
        self.nr_flags
    }

    pub fn dim(&self) -> usize {
        self.spectral.dim()
    }

    pub fn spectral_range(&self) -> f64 {
        let e = &self.spectral.eigenvalues;
        if e.is_empty() {
            0.0
        } else {
            e[e.len() - 1] - e[0]
        }
    }

    fn require_nonresonant(&self) -> Result<(), DynamicsError> {
        if !self.nr_flags.nonresonant {
            return Err(DynamicsError::ResonantSpectrum(format!(
                "flags at tolerance {:.1e}: nondegenerate = {}, nonresonant = false",
                self.nr_flags.tolerance, self.nr_flags.nondegenerate
            )));
        }
        Ok(())
    }
}

/// Gaussian-unitary-ensemble Hamiltonian: `(G + G*) / 2` with i.i.d.
/// standard complex normal entries. Regularity flags are computed on
/// construction; non-resonance holds almost surely and is re-verified.
pub fn sample_gue(seed: SeedSpec, dim: usize) -> Result<Hamiltonian, DynamicsError> {
    sample_gue_with(&mut seed.rng(), dim)
}

pub fn sample_gue_with(rng: &mut RngStream, dim: usize) -> Result<Hamiltonian, DynamicsError> {
    if dim < 2 {
        return Err(DynamicsError::InvalidParams(
            "GUE sampling needs dimension >= 2".into(),
        ));
    }
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| rng.standard_complex());
    let h = ComplexMatrix::from_fn(dim, dim, |i, j| (g.at(i, j) + g.at(j, i).conj()) * 0.5);
    Hamiltonian::from_matrix(h, DEFAULT_NR_TOL)
}

/// `psi_t = sum_a c_a e^{-i t E_a} phi_a`.
pub fn evolve(h: &Hamiltonian, psi0: &UnitVector, t: f64) -> UnitVector {
    let mut c = h.spectral.coefficients(psi0.amplitudes());
    for (ck, ev) in c.iter_mut().zip(&h.spectral.eigenvalues) {
        *ck *= Complex64::from_polar(1.0, -t * ev);
    }
    UnitVector::new_unchecked(h.spectral.synthesize(&c))
}

/// Trigonometric-polynomial form of `(|P_nu psi_t|^2 - d_nu/D)^2`:
/// terms `(u_w, L_w)` with the signal equal to `sum_w L_w e^{i u_w t}`.
#[derive(Debug, Clone)]
pub struct FourierExpansion {
    /// Sorted by frequency; frequencies are exact-duplicate-merged.
    pub terms: Vec<(f64, Complex64)>,
    pub min_nonzero_freq: Option<f64>,
}

impl FourierExpansion {
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// The zero-frequency coefficient: the infinite-time average.
    pub fn zero_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .find(|(u, _)| *u == 0.0)
            .map(|(_, l)| l.re)
            .unwrap_or(0.0)
    }

    /// Reconstructs the integrand at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(u, l)| l * Complex64::from_polar(1.0, u * t))
            .sum::<Complex64>()
            .re
    }

    /// Exact `1/T int_0^T` of the expansion: each exponential integrates in
    /// closed form.
    pub fn average(&self, horizon: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(u, l) in &self.terms {
            acc += l * phase_average(u, horizon);
        }
        acc.re
    }
}

/// `(1/T) int_0^T e^{iut} dt`, stable for small `|u| T`.
fn phase_average(u: f64, horizon: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let x = u * horizon;
    if x.abs() < 1e-6 {
        // (e^{ix} - 1)/(ix) = 1 + ix/2 - x^2/6 + O(x^3)
        return Complex64::new(1.0 - x * x / 6.0, x / 2.0);
    }
    (Complex64::from_polar(1.0, x) - 1.0) / Complex64::new(0.0, x)
}

/// Hermitian matrix of block-projector elements in the eigenbasis, plus the
/// quantities derived from it. Built once per `(decomposition, block)` and
/// reused across states and horizons.
#[derive(Debug, Clone)]
pub struct BlockElements {
    /// `e[a][b] = <phi_a, P_nu phi_b>`.
    pub elements: Vec<Vec<Complex64>>,
    pub block_fraction: f64,
    pub dim: usize,
}

pub fn block_elements(
    dec: &Decomposition,
    nu: usize,
    basis: &SpectralData,
) -> Result<BlockElements, DynamicsError> {
    let overlaps = block_overlaps(dec, nu, basis)?;
    let dim = dec.dim();
    let d_nu = dec.profile().block_dim(nu)?;
    let mut elements = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let e: Complex64 = overlaps[a]
                .iter()
                .zip(&overlaps[b])
                .map(|(x, y)| x * y.conj())
                .sum();
            elements[a][b] = e;
            elements[b][a] = e.conj();
        }
    }
    Ok(BlockElements {
        elements,
        block_fraction: d_nu as f64 / dim as f64,
        dim,
    })
}

impl BlockElements {
    /// The worst-element majorant `g_nu` computed from these elements.
    pub fn gnu_parts(&self) -> GnuParts {
        let mut max_off = 0.0f64;
        let mut max_diag = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                let e = self.elements[a][b];
                if a == b {
                    let dev = (e.re - self.block_fraction).powi(2) + e.im.powi(2);
                    max_diag = max_diag.max(dev);
                } else {
                    max_off = max_off.max(e.norm_sqr());
                }
            }
        }
        GnuParts {
            max_offdiag_sq: max_off,
            max_diag_dev_sq: max_diag,
        }
    }

    /// Non-resonant infinite-time average for eigenbasis coefficients `c`:
    /// `sum_{a != b} |c_a|^2 |c_b|^2 |e_ab|^2 + (sum_a |c_a|^2 e_aa - d/D)^2`.
    pub fn exact_limit(&self, coeffs: &[Complex64]) -> f64 {
        let probs: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
        let mut cross = 0.0;
        let mut diag = 0.0;
        for a in 0..self.dim {
            diag += probs[a] * self.elements[a][a].re;
            for b in 0..self.dim {
                if a != b {
                    cross += probs[a] * probs[b] * self.elements[a][b].norm_sqr();
                }
            }
        }
        cross + (diag - self.block_fraction).powi(2)
    }
}

/// Builds the Fourier expansion of `(|P_nu psi_t|^2 - d_nu/D)^2` over the
/// eigenbasis of `h`. Frequencies are `(E_a - E_b) + (E_c - E_d)`; the
/// structurally-zero combinations cancel exactly in floating point, so the
/// zero-frequency group is exact.
pub fn weight_deviation_expansion(
    h: &Hamiltonian,
    psi0: &UnitVector,
    dec: &Decomposition,
    nu: usize,
    term_cap: usize,
) -> Result<FourierExpansion, DynamicsError> {
    let dim = h.dim();
    if psi0.dim() != dim || dec.dim() != dim {
        return Err(DynamicsError::InvalidParams(format!(
            "dimension mismatch: H is {}, state is {}, decomposition is {}",
            dim,
            psi0.dim(),
            dec.dim()
        )));
    }
    let quads = dim * dim * dim * dim;
    if quads > term_cap {
        return Err(DynamicsError::ExpansionTooLarge {
            terms: quads,
            cap: term_cap,
        });
    }
    let blocks = block_elements(dec, nu, h.spectral())?;
    let coeffs = h.spectral.coefficients(psi0.amplitudes());
    let energies = &h.spectral.eigenvalues;

    // a_tilde[a][b] = conj(c_a) c_b e_ab - delta_ab |c_a|^2 d/D, so that the
    // centered weight is sum_ab a_tilde[a][b] e^{i t (E_a - E_b)}.
    let mut centered = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut v = coeffs[a].conj() * coeffs[b] * blocks.elements[a][b];
            if a == b {
                v -= coeffs[a].norm_sqr() * blocks.block_fraction;
            }
            centered[a][b] = v;
        }
    }

    let mut raw: Vec<(f64, Complex64)> = Vec::with_capacity(quads);
    for a in 0..dim {
        for b in 0..dim {
            let lab = centered[a][b];
            if lab == Complex64::new(0.0, 0.0) {
                continue;
            }
            let dab = energies[a] - energies[b];
            for g in 0..dim {
                for d in 0..dim {
                    let l = lab * centered[g][d];
                    if l == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let freq = dab + (energies[g] - energies[d]);
                    raw.push((freq, l));
                }
            }
        }
    }
    raw.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // Merge exactly-equal frequencies (duplicates from symmetric index
    // quadruples cancel bit-for-bit, so the zero group assembles exactly).
    let mut terms: Vec<(f64, Complex64)> = Vec::new();
    for (freq, l) in raw {
        match terms.last_mut() {
            Some((f0, l0)) if *f0 == freq => *l0 += l,
            _ => terms.push((freq, l)),
        }
    }
    let min_nonzero_freq = terms
        .iter()
        .filter(|(u, _)| *u != 0.0)
        .map(|(u, _)| u.abs())
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.min(x)))
        });
    Ok(FourierExpansion {
        terms,
        min_nonzero_freq,
    })
}

/// Finite-horizon time average of the squared weight deviation, with the
/// convergence data attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeAverageReport {
    pub nu: usize,
    pub horizon: f64,
    pub finite_time_value: f64,
    /// Present only when the spectrum is non-resonant.
    pub exact_limit: Option<f64>,
    /// `4 M / (T inf_{u != 0} |u|)`; infinite when no nonzero frequency
    /// exists in the expansion.
    pub a6_error_bound: f64,
    pub term_count: usize,
    pub min_nonzero_freq: Option<f64>,
}

/// Exact `f_{nu,T} = (1/T) int_0^T (|P_nu psi_t|^2 - d_nu/D)^2 dt` computed
/// by closed-form integration of the trigonometric expansion.
pub fn finite_time_average(
    h: &Hamiltonian,
    psi0: &UnitVector,
    dec: &Decomposition,
    nu: usize,
    horizon: f64,
) -> Result<TimeAverageReport, DynamicsError> {
    finite_time_average_with_cap(h, psi0, dec, nu, horizon, DEFAULT_TERM_CAP)
}

pub fn finite_time_average_with_cap(
    h: &Hamiltonian,
    psi0: &UnitVector,
    dec: &Decomposition,
    nu: usize,
    horizon: f64,
    term_cap: usize,
) -> Result<TimeAverageReport, DynamicsError> {
    if !(horizon > 0.0) {
        return Err(DynamicsError::InvalidParams(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let expansion = weight_deviation_expansion(h, psi0, dec, nu, term_cap)?;
    let finite_time_value = expansion.average(horizon);
    let m = expansion.term_count() as f64;
    let a6_error_bound = match expansion.min_nonzero_freq {
        Some(u_min) => 4.0 * m / (horizon * u_min),
        None => f64::INFINITY,
    };
    let exact_limit = h.nr_flags.nonresonant.then(|| expansion.zero_coefficient());
    Ok(TimeAverageReport {
        nu,
        horizon,
        finite_time_value,
        exact_limit,
        a6_error_bound,
        term_count: expansion.term_count(),
        min_nonzero_freq: expansion.min_nonzero_freq,
    })
}

/// Quadrature fallback for dimensions past the expansion cap: adaptive
/// Simpson on the time integrand. Returns `(value, error_estimate)`.
pub fn finite_time_average_quadrature(
    h: &Hamiltonian,
    psi0: &UnitVector,
    dec: &Decomposition,
    nu: usize,
    horizon: f64,
    abs_tol: f64,
) -> Result<(f64, f64), DynamicsError> {
    if !(horizon > 0.0) {
        return Err(DynamicsError::InvalidParams(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let dim = h.dim();
    if psi0.dim() != dim || dec.dim() != dim {
        return Err(DynamicsError::InvalidParams("dimension mismatch".into()));
    }
    let overlaps = block_overlaps(dec, nu, h.spectral())?;
    let coeffs = h.spectral.coefficients(psi0.amplitudes());
    let energies = h.spectral.eigenvalues.clone();
    let ratio = dec.profile().block_dim(nu)? as f64 / dim as f64;
    let d_nu = dec.profile().block_dim(nu)?;
    let integrand = move |t: f64| {
        let phased: Vec<Complex64> = coeffs
            .iter()
            .zip(&energies)
            .map(|(c, e)| c * Complex64::from_polar(1.0, -t * e))
            .collect();
        let mut w = 0.0;
        for j in 0..d_nu {
            let amp: Complex64 = phased
                .iter()
                .zip(&overlaps)
                .map(|(p, row)| p * row[j].conj())
                .sum();
            w += amp.norm_sqr();
        }
        (w - ratio).powi(2)
    };
    // Seed panels finer than the fastest oscillation so Simpson cannot alias.
    let max_freq = 2.0 * h.spectral_range().max(1e-12);
    let panels = ((horizon * max_freq / std::f64::consts::PI).ceil() as usize).clamp(8, 1 << 14);
    let mut total = 0.0;
    let mut err_total = 0.0;
    let step = horizon / panels as f64;
    for k in 0..panels {
        let (v, e) = adaptive_simpson(
            &integrand,
            k as f64 * step,
            (k + 1) as f64 * step,
            abs_tol / panels as f64,
            24,
        );
        total += v;
        err_total += e;
    }
    Ok((total / horizon, err_total / horizon))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> (f64, f64) {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        let (lv, le) = recurse(f, a, fa, m, fm, left, flm, tol / 2.0, depth - 1);
        let (rv, re) = recurse(f, m, fm, b, fb, right, frm, tol / 2.0, depth - 1);
        (lv + rv, le + re)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, fm, tol, depth)
}

/// Non-resonant closed form of the infinite-time average
/// `f_nu(psi_0, D)`. Errors on resonant spectra, where the closed form is
/// invalid.
pub fn exact_limit_f(
    h: &Hamiltonian,
    psi0: &UnitVector,
    dec: &Decomposition,
    nu: usize,
) -> Result<f64, DynamicsError> {
    h.require_nonresonant()?;
    let blocks = block_elements(dec, nu, h.spectral())?;
    let coeffs = h.spectral.coefficients(psi0.amplitudes());
    Ok(blocks.exact_limit(&coeffs))
}

/// Markov-style time-fraction bound: a nonnegative signal with long-run
/// mean below `rho` spends at least `1 - rho/gamma` of large times below
/// `gamma`.
pub fn time_fraction_bound(rho: f64, gamma: f64) -> Result<f64, DynamicsError> {
    if !(gamma > 0.0) {
        return Err(DynamicsError::InvalidParams(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !(rho >= 0.0) {
        return Err(DynamicsError::InvalidParams(format!(
            "rho must be nonnegative, got {rho}"
        )));
    }
    Ok((1.0 - rho / gamma).max(0.0))
}

/// Outcome of an equilibration experiment over sampled decompositions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub n_decompositions: usize,
    pub n_success: usize,
    /// Fraction of decompositions whose guaranteed time fraction meets
    /// `1 - delta_prime`.
    pub fraction: f64,
    pub std_error: f64,
    /// The `1 - delta` level the fraction is measured against.
    pub target_fraction: f64,
    pub hypothesis_satisfied: bool,
    pub hypothesis_detail: String,
    /// Guaranteed time fraction of the first sampled decomposition.
    pub sample_time_fraction: f64,
    /// Empirical time fraction of the first sampled decomposition on the
    /// diagnostic grid, when one was supplied.
    pub grid_time_fraction: Option<f64>,
    /// Count of sampled states whose exact limit exceeded its majorant
    /// (uniform-estimate experiment only; must be zero).
    pub f_le_g_violations: usize,
    /// Per-block Monte Carlo means of `g_nu` (uniform-estimate experiment
    /// only).
    pub mean_g: Vec<f64>,
    pub mean_g_std_error: Vec<f64>,
}

/// Chunked decomposition count per stream in the experiment drivers.
const EXPERIMENT_CHUNK: usize = 16;

/// Per-state equilibration experiment: samples decompositions, computes the
/// exact limits `f_nu`, and counts how many decompositions guarantee (via
/// the time-fraction bound) that all `N` weight inequalities hold for a
/// `1 - delta_prime` fraction of large times.
#[allow(clippy::too_many_arguments)]
pub fn theorem_t1_experiment(
    seed: SeedSpec,
    profile: &DimensionProfile,
    h: &Hamiltonian,
    psi0: &UnitVector,
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
    n_dec: usize,
    time_grid: Option<&[f64]>,
    override_hypotheses: bool,
) -> Result<ExperimentOutcome, DynamicsError> {
    validate_experiment_params(profile, h, epsilon, delta, delta_prime, n_dec)?;
    if psi0.dim() != h.dim() {
        return Err(DynamicsError::InvalidParams(
            "state dimension mismatch".into(),
        ));
    }
    let dim = profile.total() as f64;
    let n_blocks = profile.n_blocks();

    // Dimension hypothesis: d_nu > D - eps^2 delta delta' D (D+1) / N^3.
    let threshold = dim
        - epsilon * epsilon * delta * delta_prime * dim * (dim + 1.0) / (n_blocks as f64).powi(3);
    let hypothesis_satisfied = profile.dims().iter().all(|&d| (d as f64) > threshold);
    let hypothesis_detail = format!(
        "dimension threshold {threshold:.6}: min block dimension {}",
        profile.dims().iter().min().unwrap()
    );
    if !hypothesis_satisfied && !override_hypotheses {
        return Err(DynamicsError::HypothesisViolated(hypothesis_detail));
    }

    let gammas: Vec<f64> = profile
        .dims()
        .iter()
        .map(|&d| epsilon * epsilon * d as f64 / (n_blocks as f64 * dim))
        .collect();

    let use_closed_form = h.nr_flags.nonresonant;
    let budget_fraction = |dec: &Decomposition| -> f64 {
        // Markov time-fraction budget: the fraction when inequality nu fails is at
        // most f_nu / gamma_nu; the guaranteed joint fraction subtracts the
        // budgets of all blocks.
        let mut spent = 0.0;
        for (nu, gamma) in gammas.iter().enumerate() {
            let f = if use_closed_form {
                let blocks = block_elements(dec, nu, h.spectral()).expect("valid block");
                blocks.exact_limit(&h.spectral.coefficients(psi0.amplitudes()))
            } else {
                weight_deviation_expansion(h, psi0, dec, nu, DEFAULT_TERM_CAP)
                    .expect("expansion within cap")
                    .zero_coefficient()
            };
            spent += f / gamma;
        }
        (1.0 - spent).max(0.0)
    };

    let parts = parallel::map_chunks(seed, n_dec, EXPERIMENT_CHUNK, |chunk_seed, len| {
        let mut rng = chunk_seed.rng();
        let mut successes = 0u64;
        for _ in 0..len {
            let dec = sample_decomposition_with(&mut rng, profile);
            if budget_fraction(&dec) >= 1.0 - delta_prime {
                successes += 1;
            }
        }
        successes
    });
    let n_success: u64 = parts.iter().sum();

    // Diagnostics on the first sampled decomposition (chunk 0, draw 0).
    let first_dec = sample_decomposition_with(&mut seed.rng(), profile);
    let sample_time_fraction = budget_fraction(&first_dec);
    let grid_time_fraction = time_grid.map(|grid| {
        let mut hits = 0usize;
        for &t in grid {
            let psi_t = evolve(h, psi0, t);
            let ok = (0..n_blocks).all(|nu| {
                let w = weight(&first_dec, nu, &psi_t).expect("valid block");
                let d_nu = profile.dims()[nu] as f64;
                (w - d_nu / dim).abs() < epsilon * (d_nu / (n_blocks as f64 * dim)).sqrt()
            });
            if ok {
                hits += 1;
            }
        }
        hits as f64 / grid.len().max(1) as f64
    });

    Ok(ExperimentOutcome {
        n_decompositions: n_dec,
        n_success: n_success as usize,
        fraction: n_success as f64 / n_dec as f64,
        std_error: parallel::binomial_std_error(n_success, n_dec as u64),
        target_fraction: 1.0 - delta,
        hypothesis_satisfied,
        hypothesis_detail,
        sample_time_fraction,
        grid_time_fraction,
        f_le_g_violations: 0,
        mean_g: vec![],
        mean_g_std_error: vec![],
    })
}

/// Uniform-estimate experiment: the success criterion uses the
/// state-independent majorants `g_nu`, so a successful decomposition
/// guarantees the time fraction for every initial state. Each sampled state
/// additionally hard-checks `f_nu <= g_nu`.
#[allow(clippy::too_many_arguments)]
pub fn theorem_main_experiment(
    seed: SeedSpec,
    profile: &DimensionProfile,
    h: &Hamiltonian,
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
    n_dec: usize,
    n_states: usize,
    c1: f64,
    override_hypotheses: bool,
) -> Result<ExperimentOutcome, DynamicsError> {
    validate_experiment_params(profile, h, epsilon, delta, delta_prime, n_dec)?;
    h.require_nonresonant()?;
    let dim = profile.total() as f64;
    let n_blocks = profile.n_blocks();
    let log_d = dim.ln();

    // Dimension window: max(C1, 10 N^3 / (eps delta delta')) log D < d_nu < D / C1.
    let lower = c1.max(10.0 * (n_blocks as f64).powi(3) / (epsilon * delta * delta_prime)) * log_d;
    let upper = dim / c1;
    let hypothesis_satisfied = profile
        .dims()
        .iter()
        .all(|&d| lower < d as f64 && (d as f64) < upper);
    let hypothesis_detail = format!(
        "dimension window ({lower:.4}, {upper:.4}) for blocks {:?}",
        profile.dims()
    );
    if !hypothesis_satisfied && !override_hypotheses {
        return Err(DynamicsError::HypothesisViolated(hypothesis_detail));
    }

    let gammas: Vec<f64> = profile
        .dims()
        .iter()
        .map(|&d| epsilon * epsilon * d as f64 / (n_blocks as f64 * dim))
        .collect();

    struct ChunkOut {
        successes: u64,
        violations: u64,
        g_parts: Vec<Accumulator>,
        first_fraction: Option<f64>,
    }

    let parts = parallel::map_chunks(seed, n_dec, EXPERIMENT_CHUNK, |chunk_seed, len| {
        let mut rng = chunk_seed.rng();
        let mut out = ChunkOut {
            successes: 0,
            violations: 0,
            g_parts: vec![Accumulator::default(); n_blocks],
            first_fraction: None,
        };
        for _ in 0..len {
            let dec = sample_decomposition_with(&mut rng, profile);
            let blocks: Vec<BlockElements> = (0..n_blocks)
                .map(|nu| block_elements(&dec, nu, h.spectral()).expect("valid block"))
                .collect();
            let mut spent = 0.0;
            for (nu, be) in blocks.iter().enumerate() {
                let g = be.gnu_parts().total();
                out.g_parts[nu].push(g);
                spent += g / gammas[nu];
            }
            let guaranteed = (1.0 - spent).max(0.0);
            if out.first_fraction.is_none() {
                out.first_fraction = Some(guaranteed);
            }
            if guaranteed >= 1.0 - delta_prime {
                out.successes += 1;
            }
            // Hard inequality f_nu(psi_0) <= g_nu for sampled states.
            for _ in 0..n_states {
                let psi0 = sample_unit_state_with(&mut rng, profile.total());
                let coeffs = h.spectral.coefficients(psi0.amplitudes());
                for be in &blocks {
                    let f = be.exact_limit(&coeffs);
                    let g = be.gnu_parts().total();
                    if f > g + 1e-12 {
                        out.violations += 1;
                    }
                }
            }
        }
        out
    });

    let mut n_success = 0u64;
    let mut violations = 0u64;
    let mut g_acc = vec![Accumulator::default(); n_blocks];
    let mut first_fraction = None;
    for p in &parts {
        n_success += p.successes;
        violations += p.violations;
        for (acc, part) in g_acc.iter_mut().zip(&p.g_parts) {
            acc.merge(part);
        }
        if first_fraction.is_none() {
            first_fraction = p.first_fraction;
        }
    }

    Ok(ExperimentOutcome {
        n_decompositions: n_dec,
        n_success: n_success as usize,
        fraction: n_success as f64 / n_dec as f64,
        std_error: parallel::binomial_std_error(n_success, n_dec as u64),
        target_fraction: 1.0 - delta,
        hypothesis_satisfied,
        hypothesis_detail,
        sample_time_fraction: first_fraction.unwrap_or(0.0),
        grid_time_fraction: None,
        f_le_g_violations: violations as usize,
        mean_g: g_acc.iter().map(Accumulator::mean).collect(),
        mean_g_std_error: g_acc.iter().map(Accumulator::std_error).collect(),
    })
}

fn validate_experiment_params(
    profile: &DimensionProfile,
    h: &Hamiltonian,
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
    n_dec: usize,
) -> Result<(), DynamicsError> {
    if profile.total() != h.dim() {
        return Err(DynamicsError::InvalidParams(format!(
            "profile total {} does not match Hamiltonian dimension {}",
            profile.total(),
            h.dim()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(DynamicsError::InvalidParams(
            "epsilon must be positive".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DynamicsError::InvalidParams(
            "delta must lie in (0, 1)".into(),
        ));
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(DynamicsError::InvalidParams(
            "delta_prime must lie in (0, 1)".into(),
        ));
    }
    if n_dec == 0 {
        return Err(DynamicsError::InvalidParams(
            "need at least one decomposition".into(),
        ));
    }
    Ok(())
}
