//! Special functions shared by the emission-time and correlation models.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `exp(a) * erfc(b)` without intermediate overflow.
///
/// For large `b` the product is evaluated as `exp(a - b^2) * erfcx(b)` with the
/// asymptotic series of the scaled complementary error function.
pub fn exp_erfc(a: f64, b: f64) -> f64 {
    if b < 20.0 {
        let e = libm::erfc(b);
        if e == 0.0 {
            return 0.0;
        }
        return (a + e.ln()).exp();
    }
    let inv2 = 1.0 / (b * b);
    // 1 - 1/(2b^2) + 3/(4b^4) - 15/(8b^6) + 105/(16b^8)
    let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2.powi(3) + 6.5625 * inv2.powi(4);
    (a - b * b).exp() * series / (b * PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_points() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((norm_cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-12);
    }

    #[test]
    fn exp_erfc_matches_direct_product_where_safe() {
        for &(a, b) in &[(0.0, 0.3), (2.0, -1.5), (-3.0, 4.0), (5.0, 9.9)] {
            let direct = f64::exp(a) * libm::erfc(b);
            let rel = (exp_erfc(a, b) - direct).abs() / direct;
            assert!(rel < 1e-12, "a={a} b={b} rel={rel}");
        }
    }

    #[test]
    fn exp_erfc_asymptotic_branch_is_continuous() {
        let below = exp_erfc(500.0, 20.0 - 1e-12);
        let above = exp_erfc(500.0, 20.0);
        assert!((below - above).abs() / above < 1e-10);
        // exp(1000) overflows on its own.
        let v = exp_erfc(1000.0, 40.0);
        assert!(v.is_finite() && v > 0.0);
    }
}
