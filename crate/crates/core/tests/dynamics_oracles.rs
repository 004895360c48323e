//! Cross-checks of the exact time-average machinery against independent
//! oracles: a self-contained Simpson integrator over the evolved weights,
//! the convergence bound, and the decomposition-averaged mean identity.

use qet_core::dynamics::{
    check_nr, evolve, exact_limit_f, finite_time_average, sample_gue, Hamiltonian,
};
use qet_core::haar::{sample_decomposition_with, sample_unit_state, weight, DimensionProfile};
use qet_core::moments::sphere_variance;
use qet_core::{sample_decomposition, SeedSpec};

/// Test-side quadrature oracle: composite Simpson with panel refinement,
/// evaluating the integrand only through `evolve` + `weight`. Kept separate
/// from the library's integration paths on purpose.
fn simpson_time_average(
    h: &Hamiltonian,
    psi0: &qet_core::UnitVector,
    dec: &qet_core::Decomposition,
    nu: usize,
    horizon: f64,
) -> f64 {
    let ratio = dec.profile().dims()[nu] as f64 / dec.profile().total() as f64;
    let f = |t: f64| {
        let psi_t = evolve(h, psi0, t);
        (weight(dec, nu, &psi_t).unwrap() - ratio).powi(2)
    };
    // Refine until two successive grids agree to 1e-8 relative.
    let mut panels = 256usize;
    let mut last = f64::NAN;
    loop {
        let hstep = horizon / panels as f64;
        let mut acc = f(0.0) + f(horizon);
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * hstep);
        }
        let value = acc * hstep / 3.0 / horizon;
        if (value - last).abs() <= 1e-8 * value.abs().max(1e-12) || panels >= 1 << 17 {
            return value;
        }
        last = value;
        panels *= 2;
    }
}

#[test]
fn exact_average_matches_simpson_oracle() {
    for (trial, dim, dims) in [
        (0u64, 6usize, vec![2usize, 4]),
        (1, 6, vec![3, 3]),
        (2, 8, vec![4, 4]),
    ] {
        let h = sample_gue(SeedSpec::new(2100 + trial, 0), dim).unwrap();
        let profile = DimensionProfile::new(dims).unwrap();
        let dec = sample_decomposition(SeedSpec::new(2100 + trial, 1), &profile);
        let psi0 = sample_unit_state(SeedSpec::new(2100 + trial, 2), dim);
        // The long horizon runs on the first instance only to keep the
        // oracle's panel count in check.
        let horizons: &[f64] = if trial == 0 {
            &[10.0, 100.0, 1000.0]
        } else {
            &[10.0, 100.0]
        };
        for &horizon in horizons {
            let exact = finite_time_average(&h, &psi0, &dec, 0, horizon).unwrap();
            let oracle = simpson_time_average(&h, &psi0, &dec, 0, horizon);
            let rel = (exact.finite_time_value - oracle).abs() / oracle.abs().max(1e-12);
            assert!(
                rel <= 1e-6,
                "trial {trial}, T={horizon}: exact {} vs oracle {oracle}",
                exact.finite_time_value
            );
        }
    }
}

#[test]
fn convergence_bound_on_random_instances() {
    let mut checked = 0usize;
    for trial in 0..10u64 {
        let h = sample_gue(SeedSpec::new(2200, trial), 6).unwrap();
        if !h.nr_flags().nonresonant {
            continue;
        }
        let profile = DimensionProfile::new(vec![2, 2, 2]).unwrap();
        let dec = sample_decomposition(SeedSpec::new(2201, trial), &profile);
        let psi0 = sample_unit_state(SeedSpec::new(2202, trial), 6);
        for nu in 0..3 {
            let limit = exact_limit_f(&h, &psi0, &dec, nu).unwrap();
            for horizon in [10.0, 100.0, 1_000.0, 10_000.0] {
                let rep = finite_time_average(&h, &psi0, &dec, nu, horizon).unwrap();
                assert!(
                    (rep.finite_time_value - limit).abs() <= rep.a6_error_bound,
                    "trial {trial}, nu {nu}, T {horizon}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 100, "only {checked} bound checks ran");
}

#[test]
fn limit_agrees_with_long_horizon_average() {
    let h = sample_gue(SeedSpec::new(2300, 0), 6).unwrap();
    let profile = DimensionProfile::new(vec![3, 3]).unwrap();
    let dec = sample_decomposition(SeedSpec::new(2300, 1), &profile);
    let psi0 = sample_unit_state(SeedSpec::new(2300, 2), 6);
    let limit = exact_limit_f(&h, &psi0, &dec, 0).unwrap();
    let rep = finite_time_average(&h, &psi0, &dec, 0, 1e4 / min_adjacent_gap(&h)).unwrap();
    assert!(
        (rep.finite_time_value - limit).abs() <= rep.a6_error_bound,
        "{} vs {limit} (bound {})",
        rep.finite_time_value,
        rep.a6_error_bound
    );
}

fn min_adjacent_gap(h: &Hamiltonian) -> f64 {
    h.spectral()
        .eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn decomposition_mean_of_limit_matches_sphere_variance() {
    // Scaled-down mean identity: averaging the exact limit over Haar
    // decompositions reproduces the sphere variance.
    let (d, dim) = (5usize, 20usize);
    let h = sample_gue(SeedSpec::new(2400, 0), dim).unwrap();
    let psi0 = sample_unit_state(SeedSpec::new(2400, 1), dim);
    let profile = DimensionProfile::new(vec![d, dim - d]).unwrap();
    let n = 2_000;
    let mut rng = SeedSpec::new(2400, 2).rng();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let dec = sample_decomposition_with(&mut rng, &profile);
        let f = exact_limit_f(&h, &psi0, &dec, 0).unwrap();
        sum += f;
        sum_sq += f * f;
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    let se = (var / n as f64).sqrt();
    let target = sphere_variance(d, dim).unwrap();
    assert!(
        (mean - target).abs() <= 4.0 * se,
        "mean {mean} vs {target} (se {se})"
    );
}

#[test]
fn gue_draws_pass_regularity_checks() {
    let mut rng = SeedSpec::new(2500, 0).rng();
    for _ in 0..100 {
        let h = qet_core::dynamics::sample_gue_with(&mut rng, 8).unwrap();
        assert!(h.matrix().hermitian_residual() <= 1e-14 * h.matrix().frobenius_norm().max(1.0));
        let flags = h.nr_flags();
        assert!(flags.nondegenerate && flags.nonresonant);
        let recheck = check_nr(h.spectral(), 1e-9);
        assert!(recheck.nonresonant);
    }
}

#[test]
fn gue_level_repulsion_keeps_gaps_open() {
    // Adjacent-gap repulsion: no near-degenerate pair in many draws at the
    // scaled tolerance.
    let mut rng = SeedSpec::new(2501, 0).rng();
    for _ in 0..10_000 {
        let h = qet_core::dynamics::sample_gue_with(&mut rng, 2).unwrap();
        let e = &h.spectral().eigenvalues;
        let range = (e[1] - e[0]).abs();
        assert!(range > 1e-12 * e.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0));
    }
}
