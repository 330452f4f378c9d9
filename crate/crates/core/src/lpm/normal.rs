//! Standard normal density, distribution function and log interval masses.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// ln(1 / sqrt(2π))
pub const LN_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_8;

/// Φ(z) = erfc(-z/√2) / 2.
///
/// `erfc` is the fdlibm rational approximation (through `libm`), accurate to
/// about one ulp, so the absolute error of Φ is far below 1e-7.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail Q(z) = 1 - Φ(z), without cancellation for large z.
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

#[inline]
pub fn log_std_normal_pdf(z: f64) -> f64 {
    LN_INV_SQRT_2PI - 0.5 * z * z
}

/// ln(Φ(b) - Φ(a)) for a <= b; either end may be infinite.
///
/// Narrow intervals use Simpson's rule in log space, wide ones a tail
/// difference chosen so the subtraction never cancels two values near 1.
/// Returns `-inf` when the mass underflows.
pub fn log_interval_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b, "log_interval_mass({a}, {b})");
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return 0.0;
    }
    let width = b - a;
    if width <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if width < 1e-3 {
        // Simpson error is about width^4 / 2880 relative, below 1e-15 here.
        let mid = 0.5 * (a + b);
        let lm = log_std_normal_pdf(mid);
        let ratio = (log_std_normal_pdf(a) - lm).exp() + 4.0 + (log_std_normal_pdf(b) - lm).exp();
        return lm + (width / 6.0 * ratio).ln();
    }
    if a >= 0.0 {
        let qa = upper_tail(a);
        let qb = upper_tail(b);
        if qa <= 0.0 {
            return f64::NEG_INFINITY;
        }
        qa.ln() + (-qb / qa).ln_1p()
    } else if b <= 0.0 {
        log_interval_mass(-b, -a)
    } else {
        // a < 0 < b: 1 - Φ(a) - Q(b) = 1 - Q(-a) - Q(b)
        (-(upper_tail(-a) + upper_tail(b))).ln_1p()
    }
}

/// Numerically stable ln Σ exp(v).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Standard normal density, for tests and oracles.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Φ by its Taylor series Φ(z) = 1/2 + φ(z) Σ z^(2n+1) / (1·3·…·(2n+1)),
    /// convergent for every z and accurate near the origin.
    fn cdf_series(z: f64) -> f64 {
        let mut term = z;
        let mut sum = z;
        let mut n = 0;
        while term.abs() > 1e-18 * sum.abs() {
            n += 1;
            term *= z * z / (2 * n + 1) as f64;
            sum += term;
        }
        0.5 + std_normal_pdf(z) * sum
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(8.0) - 1.0).abs() < 1e-7);
        assert!((std_normal_cdf(1.0) - 0.841_344_7).abs() < 1e-6);
        assert!((std_normal_cdf(1.0) - cdf_series(1.0)).abs() < 1e-14);
    }

    #[test]
    fn cdf_matches_series_on_grid() {
        let mut z = -6.0;
        while z <= 6.0 {
            let err = (std_normal_cdf(z) - cdf_series(z)).abs();
            assert!(err < 1e-7, "z = {z}: err {err}");
            z += 0.05;
        }
    }

    #[test]
    fn interval_mass_agrees_with_cdf_difference() {
        let cases = [(-1.0, 1.0), (0.2, 0.9), (-3.0, -0.5), (-0.5, 4.0), (1.0, 1.0005), (-2.0, f64::INFINITY)];
        for (a, b) in cases {
            let direct = std_normal_cdf(b) - std_normal_cdf(a);
            assert_relative_eq!(log_interval_mass(a, b).exp(), direct, max_relative = 1e-10);
        }
        assert_eq!(log_interval_mass(f64::NEG_INFINITY, f64::INFINITY), 0.0);
    }

    #[test]
    fn interval_mass_far_tail() {
        // Both ends deep in the tail: Φ differences cancel to 0, the tail
        // route does not. Reference from the Mills-ratio asymptotic of Q.
        let got = log_interval_mass(20.0, f64::INFINITY);
        let asymptotic = log_std_normal_pdf(20.0) - 20f64.ln() + (1.0 - 1.0 / 400.0 + 3.0 / 160_000.0f64).ln();
        assert!((got - asymptotic).abs() < 1e-6, "{got} vs {asymptotic}");
        // Tiny interval far from the mode stays finite in log space.
        let tiny = log_interval_mass(30.0, 30.0 + 1e-9);
        assert!((tiny - (log_std_normal_pdf(30.0) + 1e-9f64.ln())).abs() < 1e-6);
    }

    #[test]
    fn lse_basic() {
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln());
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[-1000.0, -1000.0 + 3f64.ln()]), -1000.0 + 4f64.ln());
    }
}
