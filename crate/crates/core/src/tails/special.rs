//! Log-gamma and the log-Beta prefactor shared by the tail integrands.

use std::f64::consts::PI;

// Lanczos approximation, g = 7, 9 coefficients. Absolute error on ln
// Gamma is a few ulps over the range used here (positive arguments).
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LANCZOS_G: f64 = 7.0;

/// Natural log of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // Reflection keeps the Lanczos series in its accurate range.
        return PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `ln[(D-1)! / ((d-1)! (D-d-1)!)]`, the normalization of the Beta(d, D-d)
/// density; evaluated through `ln_gamma` so it stays finite far beyond the
/// factorial overflow point.
pub fn ln_beta_prefactor(d: usize, dim: usize) -> f64 {
    debug_assert!(d >= 1 && d < dim);
    ln_gamma(dim as f64) - ln_gamma(d as f64) - ln_gamma((dim - d) as f64)
}
