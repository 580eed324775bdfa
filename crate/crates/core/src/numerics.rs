//! Scalar special functions and the soft-threshold nonlinearities used by
//! every detector and predictor in the crate.
//!
//! The double-sided ReLU `g_eps(x) = sign(x) * max(0, |x| - eps)` zeroes its
//! argument on `[-eps, eps]` and shrinks it by `eps` elsewhere. Its complement
//! `f_eps(x) = x - g_eps(x)` clips `x` to `[-eps, eps]`; it is the GLRT's
//! maximum-likelihood estimate of the perturbation.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated, finite, non-negative l-infinity budget.
///
/// Zero is allowed and turns the double-sided ReLU into the identity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Budget(f64);

impl Budget {
    pub const ZERO: Budget = Budget(0.0);

    pub fn new(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::invalid(format!(
                "budget must be finite and non-negative, got {eps}"
            )));
        }
        Ok(Budget(eps))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Double-sided ReLU.
    #[inline]
    pub fn shrink(self, x: f64) -> f64 {
        if x > self.0 {
            x - self.0
        } else if x < -self.0 {
            x + self.0
        } else {
            0.0
        }
    }

    /// Complement of [`Budget::shrink`]: `x` clipped to `[-eps, eps]`.
    #[inline]
    pub fn clip(self, x: f64) -> f64 {
        // clamp rather than `x - shrink(x)`, which can overshoot by an ulp
        x.clamp(-self.0, self.0)
    }
}

impl TryFrom<f64> for Budget {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Budget::new(value)
    }
}

impl From<Budget> for f64 {
    fn from(b: Budget) -> f64 {
        b.0
    }
}

pub fn double_sided_relu(x: f64, eps: f64) -> Result<f64> {
    Ok(Budget::new(eps)?.shrink(x))
}

pub fn relu_complement(x: f64, eps: f64) -> Result<f64> {
    Ok(Budget::new(eps)?.clip(x))
}

/// `sign(x)` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn gaussian_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF. Evaluated through `erfc` so the left tail keeps
/// full relative precision.
#[inline]
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Gaussian tail probability `Q(x) = 1 - Phi(x)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `P(lo <= Z <= hi)` for a standard normal `Z`, computed on whichever side
/// avoids cancellation.
fn standard_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        q_function(lo) - q_function(hi)
    } else if hi <= 0.0 {
        q_function(-hi) - q_function(-lo)
    } else {
        1.0 - q_function(-lo) - q_function(hi)
    }
}

/// `x^k * phi(x)`, with the limit 0 at infinity.
fn pdf_term(x: f64, k: i32) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x.powi(k) * gaussian_pdf(x)
    }
}

/// `E[N^n * 1{lo <= N <= hi}]` for `N ~ N(0, sigma^2)` and `n` in `0..=4`.
///
/// Uses the integration-by-parts recursion
/// `M_n = (n-1) M_{n-2} + a^{n-1} phi(a) - b^{n-1} phi(b)` on the
/// standardised interval `[a, b]`. Either bound may be infinite.
pub fn truncated_gaussian_moment(n: u32, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    if n > 4 {
        return Err(Error::invalid(format!("moment order {n} exceeds 4")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::invalid(format!(
            "truncation interval must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let (a, b) = (lo / sigma, hi / sigma);
    let mut even = standard_mass(a, b);
    let mut odd = pdf_term(a, 0) - pdf_term(b, 0);
    for k in 2..=n {
        let next = if k % 2 == 0 {
            (k - 1) as f64 * even + pdf_term(a, k as i32 - 1) - pdf_term(b, k as i32 - 1)
        } else {
            (k - 1) as f64 * odd + pdf_term(a, k as i32 - 1) - pdf_term(b, k as i32 - 1)
        };
        if k % 2 == 0 {
            even = next;
        } else {
            odd = next;
        }
    }
    let standard = if n % 2 == 0 { even } else { odd };
    Ok(standard * sigma.powi(n as i32))
}

/// Polynomial moments of a truncated Gaussian: `E[p(N) * 1{lo <= N <= hi}]`
/// for `p(N) = sum_k coeffs[k] N^k`, degree at most 4.
pub(crate) fn truncated_poly_expectation(
    coeffs: &[f64],
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| Ok(c * truncated_gaussian_moment(k as u32, sigma, lo, hi)?))
        .sum()
}
