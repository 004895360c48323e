//! Kolmogorov–Smirnov machinery for the statistical verification suites.

/// Asymptotic Kolmogorov survival function
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`,
/// the large-sample p-value of a KS statistic.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // The alternating series converges too slowly here; the p-value is
        // 1 to double precision anyway.
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against the CDF `cdf`.
/// Returns `(statistic, p_value)`.
pub fn ks_test_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = sorted.len() as f64;
    let mut stat = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        stat = stat.max(lo).max(hi);
    }
    let p = kolmogorov_pvalue(n.sqrt() * stat);
    (stat, p)
}

/// Two-sample KS test. Returns `(statistic, p_value)` with the asymptotic
/// p-value at effective sample size `n m / (n + m)`.
pub fn ks_test_two_sample(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).expect("NaN in KS sample"));
    b.sort_by(|p, q| p.partial_cmp(q).expect("NaN in KS sample"));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut stat = 0.0f64;
    while i < n && j < m {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        stat = stat.max(diff);
    }
    let eff = (n as f64 * m as f64) / (n as f64 + m as f64);
    let p = kolmogorov_pvalue(eff.sqrt() * stat);
    (stat, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;

    #[test]
    fn pvalue_is_monotone_and_bounded() {
        let mut last = 1.0;
        for i in 1..40 {
            let lambda = i as f64 * 0.1;
            let p = kolmogorov_pvalue(lambda);
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= last + 1e-12);
            last = p;
        }
        // Classical table value: Q(1.36) ~ 0.049.
        assert!((kolmogorov_pvalue(1.36) - 0.049).abs() < 0.002);
    }

    #[test]
    fn uniform_samples_pass_uniform_cdf() {
        let mut rng = SeedSpec::new(12, 0).rng();
        let samples: Vec<f64> = (0..20_000).map(|_| rng.uniform()).collect();
        let (_, p) = ks_test_cdf(&samples, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn shifted_samples_fail_uniform_cdf() {
        let mut rng = SeedSpec::new(12, 1).rng();
        let samples: Vec<f64> = (0..20_000).map(|_| 0.5 * rng.uniform()).collect();
        let (_, p) = ks_test_cdf(&samples, |x| x.clamp(0.0, 1.0));
        assert!(p < 1e-6);
    }

    #[test]
    fn two_sample_same_distribution() {
        let mut rng = SeedSpec::new(13, 0).rng();
        let xs: Vec<f64> = (0..30_000).map(|_| rng.standard_normal()).collect();
        let ys: Vec<f64> = (0..30_000).map(|_| rng.standard_normal()).collect();
        let (_, p) = ks_test_two_sample(&xs, &ys);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn two_sample_different_distribution() {
        let mut rng = SeedSpec::new(13, 1).rng();
        let xs: Vec<f64> = (0..30_000).map(|_| rng.standard_normal()).collect();
        let ys: Vec<f64> = (0..30_000).map(|_| rng.standard_normal() + 0.1).collect();
        let (_, p) = ks_test_two_sample(&xs, &ys);
        assert!(p < 1e-6, "p = {p}");
    }
}
