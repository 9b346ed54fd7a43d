//! Special functions and numerical integration.
//!
//! Complex error function (via the Faddeeva function), the real gamma
//! function, adaptive Gauss-Kronrod quadrature and piecewise Chebyshev
//! interpolation of complex-valued functions of one real variable.

mod cheb;
mod erf;
mod quad;

pub use cheb::PiecewiseChebyshev;
pub use erf::{erf_complex, faddeeva, gauss_segment};
pub use quad::{
    gauss_kronrod_21, gk21_rule, integrate_finite, integrate_finite_with, integrate_semi_infinite, Domain,
    EndpointMode, QuadOptions, QuadResult, TailQuadResult,
};

use num_complex::Complex64;
use thiserror::Error;

/// Failure modes shared by the numerical routines in this module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpecFunError {
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: estimated error {est_error:.3e} after {evals} evaluations")]
    NonConvergence { est_error: f64, evals: usize },
    #[error("tail truncation failed: successive tail contributions at {at:.3e} still {last:.3e}")]
    TailTruncation { at: f64, last: f64 },
    #[error("non-finite integrand value at {0}")]
    NonFinite(f64),
}

/// Real gamma function, ~15 significant digits.
///
/// Backed by `statrs` (Lanczos). Poles at non-positive integers are
/// reported as a domain error rather than returned as infinities.
pub fn gamma_real(x: f64) -> Result<f64, SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::Domain(format!("gamma of non-finite {x}")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(SpecFunError::Domain(format!("gamma pole at {x}")));
    }
    let g = statrs::function::gamma::gamma(x);
    if !g.is_finite() {
        return Err(SpecFunError::Overflow(format!("gamma({x})")));
    }
    Ok(g)
}

/// `exp(w) - 1` without cancellation for small `w`.
pub fn expm1_c(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let s = (0.5 * b).sin();
    let re = a.exp_m1() * b.cos() - 2.0 * s * s;
    let im = a.exp() * b.sin();
    Complex64::new(re, im)
}

/// `(exp(w) - 1) / w`, equal to 1 at the origin.
pub fn exprel_c(w: Complex64) -> Complex64 {
    if w.norm() < 1e-8 {
        return Complex64::new(1.0, 0.0) + w * 0.5;
    }
    expm1_c(w) / w
}

/// Real version of [`exprel_c`].
pub fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 1.0 + 0.5 * x;
    }
    x.exp_m1() / x
}

/// Pairwise (cascade) summation; deterministic for a given input order.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().fold(Complex64::new(0.0, 0.0), |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Real pairwise summation.
pub fn pairwise_sum_real(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_real(&xs[..mid]) + pairwise_sum_real(&xs[mid..])
}
