//! Closed-form moments of projector overlaps on the unit sphere, the
//! genericity threshold for decomposition dimensions, and Monte Carlo
//! estimators for both.
//!
//! The closed forms are evaluated in exact integer arithmetic (one final
//! division), so identities between them can be checked exactly rather than
//! up to rounding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::haar::{
    sample_decomposition_with, sample_unit_state_with, weight, Decomposition, DimensionProfile,
    HaarError, UnitVector,
};
use crate::parallel::{self, Accumulator};
use crate::rng::SeedSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("invalid dimensions: require 1 <= d <= D, got d={d}, D={dim}")]
    InvalidDims { d: usize, dim: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error(transparent)]
    Haar(#[from] HaarError),
}

/// Exact nonnegative rational, reduced lazily; only used to carry the
/// closed-form moments to a single correctly rounded division.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a.max(1)
    }

    pub fn new(num: u128, den: u128) -> Self {
        assert!(den != 0);
        let g = Self::gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn check_dims(d: usize, dim: usize) -> Result<(), MomentsError> {
    if d < 1 || d > dim {
        return Err(MomentsError::InvalidDims { d, dim });
    }
    Ok(())
}

/// Sphere mean of `|P phi|^2` for a `d`-dimensional block: exactly `d / D`.
pub fn sphere_mean(d: usize, dim: usize) -> Result<f64, MomentsError> {
    Ok(sphere_mean_exact(d, dim)?.to_f64())
}

pub fn sphere_mean_exact(d: usize, dim: usize) -> Result<Ratio, MomentsError> {
    check_dims(d, dim)?;
    Ok(Ratio::new(d as u128, dim as u128))
}

/// Sphere variance of `|P phi|^2`: exactly `d (D - d) / (D^2 (D + 1))`.
pub fn sphere_variance(d: usize, dim: usize) -> Result<f64, MomentsError> {
    Ok(sphere_variance_exact(d, dim)?.to_f64())
}

pub fn sphere_variance_exact(d: usize, dim: usize) -> Result<Ratio, MomentsError> {
    check_dims(d, dim)?;
    let (d, dim) = (d as u128, dim as u128);
    Ok(Ratio::new(d * (dim - d), dim * dim * (dim + 1)))
}

/// Scalar field of the sphere in question. The complex case is the one the
/// decomposition geometry uses; the real case is the auxiliary identity on
/// spheres in `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Fourth moment `E[(|P phi|^2)^2]`:
/// complex `(d^2 + d) / (D (D + 1))`, real `(m^2 + 2m) / (n (n + 2))`.
pub fn sphere_fourth_moment(d: usize, dim: usize, field: Field) -> Result<f64, MomentsError> {
    Ok(sphere_fourth_moment_exact(d, dim, field)?.to_f64())
}

pub fn sphere_fourth_moment_exact(
    d: usize,
    dim: usize,
    field: Field,
) -> Result<Ratio, MomentsError> {
    check_dims(d, dim)?;
    let (d, dim) = (d as u128, dim as u128);
    Ok(match field {
        Field::Complex => Ratio::new(d * d + d, dim * (dim + 1)),
        Field::Real => Ratio::new(d * d + 2 * d, dim * (dim + 2)),
    })
}

/// Exact check of `Var = E[x^2] - (E[x])^2` for the complex sphere moments,
/// by integer cross-multiplication (no rounding involved).
pub fn variance_identity_holds(d: usize, dim: usize) -> Result<bool, MomentsError> {
    check_dims(d, dim)?;
    let var = sphere_variance_exact(d, dim)?;
    let m2 = sphere_fourth_moment_exact(d, dim, Field::Complex)?;
    let mean = sphere_mean_exact(d, dim)?;
    // var ?= m2 - mean^2  <=>  var + mean^2 ?= m2
    // lhs = var.num * mean.den^2 + mean.num^2 * var.den, over var.den * mean.den^2
    let lhs_num = var
        .num
        .checked_mul(mean.den * mean.den)
        .and_then(|x| x.checked_add(mean.num * mean.num * var.den));
    let lhs_den = var.den.checked_mul(mean.den * mean.den);
    match (lhs_num, lhs_den) {
        (Some(n), Some(dd)) => {
            // n / dd ?= m2.num / m2.den
            Ok(n.checked_mul(m2.den) == dd.checked_mul(m2.num))
        }
        // Out of u128 range (dimension beyond anything this crate samples);
        // fall back to floating point with a tight tolerance.
        _ => {
            let lhs = sphere_variance(d, dim)?;
            let rhs = sphere_fourth_moment(d, dim, Field::Complex)? - sphere_mean(d, dim)?.powi(2);
            Ok((lhs - rhs).abs() <= 1e-15)
        }
    }
}

/// Mean and dispersion of one Monte Carlo estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentReport {
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Sphere side: fixed standard decomposition, Haar-random states.
    VaryState,
    /// Decomposition side: fixed first basis state, Haar-random decompositions.
    VaryDecomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Power {
    #[serde(rename = "1")]
    First,
    #[serde(rename = "2")]
    Second,
}

/// Monte Carlo estimate of `E[(|P_nu phi|^2)^power]` in either sampling mode,
/// against the matching closed form.
pub fn mc_overlap_moment(
    seed: SeedSpec,
    profile: &DimensionProfile,
    nu: usize,
    power: Power,
    n_samples: usize,
    mode: SampleMode,
) -> Result<MomentReport, MomentsError> {
    if n_samples < 2 {
        return Err(MomentsError::InvalidParams(
            "need at least 2 samples".into(),
        ));
    }
    let dim = profile.total();
    let d_nu = profile.block_dim(nu)?;
    let closed_form = match power {
        Power::First => sphere_mean(d_nu, dim)?,
        Power::Second => sphere_fourth_moment(d_nu, dim, Field::Complex)?,
    };
    let acc = overlap_accumulator(seed, profile, nu, n_samples, mode, move |w| match power {
        Power::First => w,
        Power::Second => w * w,
    })?;
    Ok(MomentReport {
        closed_form,
        mc_estimate: acc.mean(),
        mc_std_error: acc.std_error(),
        n_samples,
    })
}

/// Shared chunked sampler of `f(|P_nu phi|^2)` in either mode.
pub(crate) fn overlap_accumulator(
    seed: SeedSpec,
    profile: &DimensionProfile,
    nu: usize,
    n_samples: usize,
    mode: SampleMode,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<Accumulator, MomentsError> {
    let dim = profile.total();
    profile.block_range(nu)?;
    let standard = Decomposition::standard(profile.clone());
    let fixed_state = UnitVector::basis_state(dim, 0)?;
    let parts = parallel::map_chunks(seed, n_samples, parallel::CHUNK_LEN, |chunk_seed, len| {
        let mut rng = chunk_seed.rng();
        let mut acc = Accumulator::default();
        for _ in 0..len {
            let w = match mode {
                SampleMode::VaryState => {
                    let phi = sample_unit_state_with(&mut rng, dim);
                    weight(&standard, nu, &phi).expect("valid block")
                }
                SampleMode::VaryDecomposition => {
                    let dec = sample_decomposition_with(&mut rng, profile);
                    weight(&dec, nu, &fixed_state).expect("valid block")
                }
            };
            acc.push(f(w));
        }
        acc
    });
    let mut total = Accumulator::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Genericity threshold `D - eps^2 delta D (D + 1) / N^2`; every block
/// dimension must exceed it for the overlap-concentration guarantee to apply.
pub fn generic_dimension_threshold(
    epsilon: f64,
    delta: f64,
    n_blocks: usize,
    dim: usize,
) -> Result<f64, MomentsError> {
    if !(epsilon > 0.0) {
        return Err(MomentsError::InvalidParams(
            "epsilon must be positive".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MomentsError::InvalidParams(
            "delta must lie in (0, 1)".into(),
        ));
    }
    if n_blocks < 2 {
        return Err(MomentsError::InvalidParams("need at least 2 blocks".into()));
    }
    if dim < n_blocks {
        return Err(MomentsError::InvalidParams(format!(
            "total dimension {dim} smaller than block count {n_blocks}"
        )));
    }
    let dimf = dim as f64;
    let nf = n_blocks as f64;
    Ok(dimf - epsilon * epsilon * delta * dimf * (dimf + 1.0) / (nf * nf))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GosCheck {
    /// Fraction of sampled decompositions for which every block satisfies
    /// the concentration inequality.
    pub fraction_satisfying: f64,
    pub std_error: f64,
    pub threshold: f64,
    pub n_samples: usize,
}

/// Empirical check of the concentration statement: for a fixed unit state,
/// sample decompositions and count how often all `N` inequalities
/// `| |P_nu phi|^2 - d_nu/D | < eps sqrt(d_nu / (D N))` hold.
/// Errors unless every block dimension clears the genericity threshold.
pub fn gos_empirical_check(
    seed: SeedSpec,
    profile: &DimensionProfile,
    epsilon: f64,
    delta: f64,
    n_samples: usize,
) -> Result<GosCheck, MomentsError> {
    let dim = profile.total();
    let n_blocks = profile.n_blocks();
    let threshold = generic_dimension_threshold(epsilon, delta, n_blocks, dim)?;
    if let Some(&bad) = profile.dims().iter().find(|&&d| (d as f64) <= threshold) {
        return Err(MomentsError::HypothesisViolated(format!(
            "block dimension {bad} does not exceed the genericity threshold {threshold:.6}"
        )));
    }
    let phi = UnitVector::basis_state(dim, 0)?;
    let bounds: Vec<f64> = profile
        .dims()
        .iter()
        .map(|&d| epsilon * (d as f64 / (dim as f64 * n_blocks as f64)).sqrt())
        .collect();
    let ratios: Vec<f64> = profile
        .dims()
        .iter()
        .map(|&d| d as f64 / dim as f64)
        .collect();

    let parts = parallel::map_chunks(seed, n_samples, parallel::CHUNK_LEN, |chunk_seed, len| {
        let mut rng = chunk_seed.rng();
        let mut hits = 0u64;
        for _ in 0..len {
            let dec = sample_decomposition_with(&mut rng, profile);
            let ok = (0..n_blocks).all(|nu| {
                let w = weight(&dec, nu, &phi).expect("valid block");
                (w - ratios[nu]).abs() < bounds[nu]
            });
            if ok {
                hits += 1;
            }
        }
        hits
    });
    let successes: u64 = parts.iter().sum();
    let fraction = successes as f64 / n_samples as f64;
    Ok(GosCheck {
        fraction_satisfying: fraction,
        std_error: parallel::binomial_std_error(successes, n_samples as u64),
        threshold,
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_plug_ins() {
        assert_eq!(sphere_mean(5, 20).unwrap(), 0.25);
        assert_eq!(sphere_mean(7, 7).unwrap(), 1.0);
        assert_eq!(sphere_mean(1, 2).unwrap(), 0.5);
        assert!(matches!(
            sphere_mean(0, 4),
            Err(MomentsError::InvalidDims { .. })
        ));
        assert!(matches!(
            sphere_mean(5, 4),
            Err(MomentsError::InvalidDims { .. })
        ));
    }

    #[test]
    fn variance_plug_ins() {
        assert_eq!(sphere_variance(6, 6).unwrap(), 0.0);
        assert_eq!(sphere_variance(1, 2).unwrap(), 1.0 / 12.0);
        assert_eq!(sphere_variance(5, 20).unwrap(), 75.0 / 8400.0);
    }

    #[test]
    fn fourth_moment_plug_ins() {
        assert_eq!(sphere_fourth_moment(1, 1, Field::Complex).unwrap(), 1.0);
        assert_eq!(
            sphere_fourth_moment(1, 2, Field::Complex).unwrap(),
            1.0 / 3.0
        );
        assert_eq!(sphere_fourth_moment(1, 3, Field::Real).unwrap(), 0.2);
    }

    #[test]
    fn variance_identity_exact_on_grid() {
        for dim in 1..=64 {
            for d in 1..=dim {
                assert!(variance_identity_holds(d, dim).unwrap(), "d={d}, D={dim}");
            }
        }
    }

    #[test]
    fn variance_symmetry() {
        for dim in 2..=32 {
            for d in 1..dim {
                assert_eq!(
                    sphere_variance_exact(d, dim).unwrap(),
                    sphere_variance_exact(dim - d, dim).unwrap()
                );
            }
        }
    }

    #[test]
    fn mc_matches_closed_form_in_both_modes() {
        let profile = DimensionProfile::new(vec![5, 15]).unwrap();
        for mode in [SampleMode::VaryState, SampleMode::VaryDecomposition] {
            let rep = mc_overlap_moment(
                SeedSpec::new(101, 0),
                &profile,
                0,
                Power::First,
                20_000,
                mode,
            )
            .unwrap();
            assert!(
                (rep.mc_estimate - rep.closed_form).abs() <= 4.0 * rep.mc_std_error,
                "{mode:?}: {} vs {}",
                rep.mc_estimate,
                rep.closed_form
            );
        }
    }

    #[test]
    fn mc_second_moment_matches() {
        let profile = DimensionProfile::new(vec![1, 1]).unwrap();
        let rep = mc_overlap_moment(
            SeedSpec::new(102, 0),
            &profile,
            0,
            Power::Second,
            10_000,
            SampleMode::VaryState,
        )
        .unwrap();
        assert_eq!(rep.closed_form, 1.0 / 3.0);
        assert!((rep.mc_estimate - rep.closed_form).abs() <= 4.0 * rep.mc_std_error);
    }

    #[test]
    fn mc_first_moment_on_two_lines() {
        let profile = DimensionProfile::new(vec![1, 1]).unwrap();
        let rep = mc_overlap_moment(
            SeedSpec::new(103, 0),
            &profile,
            0,
            Power::First,
            10_000,
            SampleMode::VaryDecomposition,
        )
        .unwrap();
        assert_eq!(rep.closed_form, 0.5);
        assert!((rep.mc_estimate - 0.5).abs() <= 4.0 * rep.mc_std_error);
    }

    #[test]
    fn threshold_plug_ins() {
        let t = generic_dimension_threshold(1.0, 1.0 - 1e-12, 2, 4).unwrap();
        assert!((t - (4.0 - 20.0 / 4.0)).abs() < 1e-9);
        let t = generic_dimension_threshold(0.1, 0.1, 2, 100).unwrap();
        assert!((t - 97.475).abs() < 1e-9);
        // epsilon -> 0 pushes the threshold to D.
        let t = generic_dimension_threshold(1e-9, 0.5, 2, 100).unwrap();
        assert!(t > 99.999999);
        assert!(generic_dimension_threshold(-1.0, 0.5, 2, 4).is_err());
    }

    #[test]
    fn gos_check_rejects_small_blocks() {
        let profile = DimensionProfile::new(vec![1, 63]).unwrap();
        // Tiny epsilon makes the threshold approach D = 64 so block 0 fails it.
        let err = gos_empirical_check(SeedSpec::new(1, 0), &profile, 1e-6, 0.5, 10).unwrap_err();
        assert!(matches!(err, MomentsError::HypothesisViolated(_)));
    }

    #[test]
    fn gos_check_slack_inequality_has_full_fraction() {
        let profile = DimensionProfile::new(vec![1, 1]).unwrap();
        // eps = 2, delta = 0.5: threshold = 2 - 1.5 * 4 * 0.5 / ... < 1 and the
        // inequality |w - 1/2| < 1 always holds.
        let out = gos_empirical_check(SeedSpec::new(2, 0), &profile, 2.0, 0.5, 2_000).unwrap();
        assert!(out.threshold < 1.0);
        assert_eq!(out.fraction_satisfying, 1.0);
    }

    #[test]
    fn gos_check_meets_probability_contract() {
        let profile = DimensionProfile::new(vec![10, 10]).unwrap();
        let out = gos_empirical_check(SeedSpec::new(3, 0), &profile, 1.0, 0.5, 5_000).unwrap();
        assert!(
            out.fraction_satisfying >= 1.0 - 0.5 - 4.0 * out.std_error,
            "fraction {}",
            out.fraction_satisfying
        );
    }
}
