//! Property tests over randomized shapes, seeds and parameters.

use num_complex::Complex64;
use proptest::prelude::*;

use qet_core::dynamics::{evolve, sample_gue, time_fraction_bound};
use qet_core::haar::{sample_decomposition, sample_unit_state, weight, DimensionProfile};
use qet_core::matrix::ComplexMatrix;
use qet_core::moments::{sphere_mean, sphere_variance, variance_identity_holds};
use qet_core::{householder_qr, sample_haar_unitary, SeedSpec};

fn complex_entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_reconstructs_and_is_unitary(
        n in 1usize..8,
        entries in complex_entries(64),
    ) {
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            let (re, im) = entries[i * 8 + j];
            Complex64::new(re, im)
        });
        let (q, r) = householder_qr(&m).unwrap();
        prop_assert!(q.unitarity_residual() <= 1e-10);
        let resid = q.mul(&r).sub(&m).frobenius_norm();
        prop_assert!(resid <= 1e-10 * m.frobenius_norm().max(1e-12));
        for i in 0..n {
            for j in 0..i {
                prop_assert_eq!(r.at(i, j), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn haar_unitary_is_always_unitary(seed in any::<u64>(), dim in 1usize..12) {
        let u = sample_haar_unitary(SeedSpec::new(seed, 0), dim);
        prop_assert!(u.unitarity_residual() <= 1e-10);
    }

    #[test]
    fn weights_partition_unity(
        seed in any::<u64>(),
        dims in prop::collection::vec(1usize..4, 2..5),
    ) {
        let profile = DimensionProfile::new(dims).unwrap();
        let dec = sample_decomposition(SeedSpec::new(seed, 0), &profile);
        let psi = sample_unit_state(SeedSpec::new(seed, 1), profile.total());
        let total: f64 = (0..profile.n_blocks())
            .map(|nu| weight(&dec, nu, &psi).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        for nu in 0..profile.n_blocks() {
            let w = weight(&dec, nu, &psi).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&w));
        }
    }

    #[test]
    fn evolution_composes_and_preserves_norm(
        seed in any::<u64>(),
        s in -25.0f64..25.0,
        t in -25.0f64..25.0,
    ) {
        let h = sample_gue(SeedSpec::new(seed, 0), 4).unwrap();
        let psi0 = sample_unit_state(SeedSpec::new(seed, 1), 4);
        let two_step = evolve(&h, &evolve(&h, &psi0, s), t);
        let one_step = evolve(&h, &psi0, s + t);
        for (a, b) in two_step.amplitudes().iter().zip(one_step.amplitudes()) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
        prop_assert!((one_step.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn moment_identity_and_bounds(d in 1usize..500, extra in 0usize..500) {
        let dim = d + extra;
        prop_assert!(variance_identity_holds(d, dim).unwrap());
        let mean = sphere_mean(d, dim).unwrap();
        let var = sphere_variance(d, dim).unwrap();
        prop_assert!((0.0..=1.0).contains(&mean));
        // Variance of a [0,1]-valued variable is at most 1/4.
        prop_assert!((0.0..=0.25).contains(&var));
    }

    #[test]
    fn time_fraction_bound_is_a_probability(
        rho in 0.0f64..10.0,
        gamma in 1e-6f64..10.0,
    ) {
        let p = time_fraction_bound(rho, gamma).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        // Looser levels can only improve the guaranteed fraction.
        let p2 = time_fraction_bound(rho, gamma * 2.0).unwrap();
        prop_assert!(p2 >= p);
    }
}
