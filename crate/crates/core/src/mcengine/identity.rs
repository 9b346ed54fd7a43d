//! Monte Carlo check of `E phi = E g(X_T)` on common random numbers, and
//! prices as the simulated mean of `g(X_T)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_paths, McError, McEstimate, PathRecord};
use crate::charfun::{Branch, ModelSpec};
use crate::pricing::{g_letf_call, payoff_fn, Claim, PayoffFn, SpectralOptions, LETF_CONTOUR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityOptions {
    pub n_steps: usize,
    pub spectral: SpectralOptions,
    /// Relative accuracy of the Chebyshev table used for `g` on the paths.
    pub table_tol: f64,
    pub contour: f64,
    pub z_threshold: f64,
    /// Numerical error allowance of `g` relative to `|E g|`; floors the
    /// standard error so identical sides do not produce 0/0.
    pub numeric_tol: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions {
            n_steps: 50,
            spectral: SpectralOptions::default(),
            table_tol: 1e-10,
            contour: LETF_CONTOUR,
            z_threshold: 3.0,
            numeric_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub claim: Claim,
    pub branch: Branch,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    /// Standard error of the path-wise difference.
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
    pub seed: u64,
    pub n_paths: usize,
}

/// Simulate, evaluate `phi` and `g` on the same paths, and compare.
pub fn check_pricing_identity(
    claim: &Claim,
    model: &ModelSpec,
    branch: Branch,
    n_paths: usize,
    seed: u64,
    opts: &IdentityOptions,
) -> Result<IdentityReport, McError> {
    claim.validate()?;
    let paths = simulate_paths(model, claim.leverage(), n_paths, seed, opts.n_steps)?;
    let g = spectral_payoff(claim, model, branch, &paths, opts)?;
    let pairs: Vec<(Complex64, Complex64)> =
        paths.par_iter().map(|p| (claim.payoff(p.x_t, p.qv_t, p.y_t), g.eval(p.x_t))).collect();
    if let Some(path) = pairs.iter().position(|(a, b)| !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite())) {
        return Err(McError::NonFinite { path, seed });
    }
    let lhs: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<Complex64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<Complex64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (l, r, d) = (McEstimate::from_samples(&lhs), McEstimate::from_samples(&rhs), McEstimate::from_samples(&diff));
    let floor = opts.numeric_tol * r.mean.norm().max(l.mean.norm()).max(1e-3);
    let z_re = d.mean.re.abs() / d.stderr_re.hypot(floor);
    let z = if g.is_real() { z_re } else { z_re.max(d.mean.im.abs() / d.stderr_im.hypot(floor)) };
    let stderr = if g.is_real() { d.stderr_re } else { d.stderr() };
    Ok(IdentityReport {
        claim: claim.clone(),
        branch,
        lhs_re: l.mean.re,
        lhs_im: l.mean.im,
        rhs_re: r.mean.re,
        rhs_im: r.mean.im,
        stderr,
        z,
        pass: z <= opts.z_threshold,
        seed,
        n_paths,
    })
}

/// `g` for the claim, tabulated over the range of simulated `X_T`.
fn spectral_payoff(claim: &Claim, model: &ModelSpec, branch: Branch, paths: &[PathRecord], opts: &IdentityOptions) -> Result<PayoffFn, McError> {
    let (lo, hi) = paths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x_t), b.max(p.x_t)));
    let pad = 0.05 * (hi - lo).max(0.1);
    let spectral = SpectralOptions { x_range: (lo - pad, hi + pad), ..opts.spectral };
    let g = match claim {
        Claim::LetfCall { beta, k } => g_letf_call(*beta, *k, model, branch, opts.contour, &spectral)?,
        _ => payoff_fn(claim, model, branch, &spectral)?,
    };
    Ok(if g.n_nodes() > 0 { g.tabulated(lo - pad, hi + pad, opts.table_tol)? } else { g })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub claim: Claim,
    pub branch: Branch,
    pub price_re: f64,
    pub price_im: f64,
    pub stderr: f64,
    pub seed: u64,
    pub n_paths: usize,
}

/// Price of the claim as the simulated mean of `g(X_T)`.
pub fn price_by_simulation(
    claim: &Claim,
    model: &ModelSpec,
    branch: Branch,
    n_paths: usize,
    seed: u64,
    opts: &IdentityOptions,
) -> Result<PriceReport, McError> {
    claim.validate()?;
    let paths = simulate_paths(model, claim.leverage(), n_paths, seed, opts.n_steps)?;
    let g = spectral_payoff(claim, model, branch, &paths, opts)?;
    let vals: Vec<Complex64> = paths.par_iter().map(|p| g.eval(p.x_t)).collect();
    if let Some(path) = vals.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(McError::NonFinite { path, seed });
    }
    let est = McEstimate::from_samples(&vals);
    let stderr = if g.is_real() { est.stderr_re } else { est.stderr() };
    Ok(PriceReport { claim: claim.clone(), branch, price_re: est.mean.re, price_im: est.mean.im, stderr, seed, n_paths })
}
