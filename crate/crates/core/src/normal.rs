//! Standard normal helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    }
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// P(lo ≤ Z ≤ hi) for a standard normal Z, evaluated on the tail that keeps
/// precision.
pub fn interval(lo: f64, hi: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    if lo > 0.0 {
        (cdf(-lo) - cdf(-hi)).max(0.0)
    } else {
        (cdf(hi) - cdf(lo)).max(0.0)
    }
}

/// P(lo ≤ X ≤ hi) for X ~ N(mean, sd²), sd ≥ 0. A zero `sd` is a point mass
/// with closed-interval membership at tolerance 1e-9.
pub fn interval_prob(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return if mean >= lo - 1e-9 && mean <= hi + 1e-9 {
            1.0
        } else {
            0.0
        };
    }
    interval((lo - mean) / sd, (hi - mean) / sd)
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if dof == 0 {
        return 0.0;
    }
    ChiSquared::new(dof as f64)
        .map(|d| d.sf(x))
        .unwrap_or(f64::NAN)
}

pub fn inverse_cdf(p: f64) -> f64 {
    use statrs::distribution::Normal;
    Normal::standard().inverse_cdf(p)
}
