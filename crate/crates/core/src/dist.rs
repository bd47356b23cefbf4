//! Reference distributions used for p-values.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Normal density with mean 0 and the given standard deviation.
pub fn normal_pdf_scaled(x: f64, sd: f64) -> f64 {
    normal_pdf(x / sd) / sd
}

/// Two-sided p-value `2 (1 - Phi(|z|))`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    (2.0 * std_normal().sf(z.abs())).clamp(0.0, 1.0)
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df)
        .expect("positive degrees of freedom")
        .sf(x)
        .clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_two_df_is_exponential() {
        for &x in &[0.1, 1.0, 5.99146, 11.411, 40.0] {
            let expect = (-x / 2.0f64).exp();
            assert!((chi_square_sf(x, 2.0) - expect).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn normal_tail_identities() {
        assert!((two_sided_normal_p(1.959964) - 0.05).abs() < 1e-6);
        assert_eq!(two_sided_normal_p(0.0), 1.0);
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
        assert!((normal_pdf(0.0) - 0.398_942_280_4).abs() < 1e-9);
    }
}
