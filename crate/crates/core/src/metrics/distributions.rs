//! Tail probabilities for the reference distributions used by the tests.
//!
//! Student-t and F tails go through the regularized incomplete beta
//! function; normal and χ²(1) tails through the complementary error function.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// Two-sided p-value `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(0.5 * df, 0.5, x.clamp(0.0, 1.0)).clamp(0.0, 1.0)
}

/// Upper tail `P(F ≥ f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() || d1 <= 0.0 || d2 <= 0.0 {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let x = d2 / (d2 + d1 * f);
    beta_reg(0.5 * d2, 0.5 * d1, x.clamp(0.0, 1.0)).clamp(0.0, 1.0)
}

/// Upper tail of the χ² distribution with one degree of freedom.
pub fn chi2_1df_upper_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((0.5 * x).sqrt()).clamp(0.0, 1.0)
}

/// Two-sided standard-normal p-value.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}
