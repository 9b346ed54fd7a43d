//! Finite-activity Levy measures with bounded support.
//!
//! The jump part of the log price is a compensated compound Poisson
//! process; everything here is a functional of the Levy measure `nu`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{
    expm1_c, exprel, gauss_segment, integrate_finite_with, QuadOptions, SpecFunError,
};


const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// below this |eta| the Faddeeva closed forms are replaced by quadrature
const SMALL_ETA: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LevyError {
    #[error("invalid Levy measure: {0}")]
    InvalidMeasure(String),
    #[error("beta(e^z - 1) + 1 > 0 fails for beta = {beta} at jump size {z}")]
    Assumption2 { beta: f64, z: f64 },
    #[error(transparent)]
    Numerical(#[from] SpecFunError),
}

impl LevyError {
    pub fn category(&self) -> &'static str {
        match self {
            LevyError::InvalidMeasure(_) => "assumption",
            LevyError::Assumption2 { .. } => "assumption2",
            LevyError::Numerical(_) => "numerical",
        }
    }
}

/// One atom of a Dirac-sum measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub location: f64,
}

/// The three measure families with closed-form exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevyMeasure {
    /// `sum_j lambda_j delta_{m_j}`
    DiracSum { atoms: Vec<Atom> },
    /// `lambda * 1[m1, m2] dz`
    Uniform { lambda: f64, m1: f64, m2: f64 },
    /// `lambda * exp(-alpha |z|) * 1[|z| <= m] dz`
    TruncExp { lambda: f64, alpha: f64, m: f64 },
}

/// A jump of the compound Poisson process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

/// Integrals of simple functions of the jump size against `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevyMoment {
    /// `<1>`
    One,
    /// `<dX>`
    Jump,
    /// `<dX^2>`
    JumpSq,
    /// `<e^dX>`
    ExpJump,
    /// `<dX e^dX>`
    JumpExpJump,
}

impl LevyMeasure {
    pub fn dirac(atoms: &[(f64, f64)]) -> Self {
        LevyMeasure::DiracSum {
            atoms: atoms.iter().map(|&(weight, location)| Atom { weight, location }).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), LevyError> {
        let bad = |m: String| Err(LevyError::InvalidMeasure(m));
        match self {
            LevyMeasure::DiracSum { atoms } => {
                if atoms.is_empty() {
                    return bad("Dirac sum with no atoms".into());
                }
                for a in atoms {
                    if !(a.weight.is_finite() && a.weight > 0.0 && a.location.is_finite()) {
                        return bad(format!("atom ({}, {})", a.weight, a.location));
                    }
                }
            }
            LevyMeasure::Uniform { lambda, m1, m2 } => {
                if !(lambda.is_finite() && *lambda > 0.0 && m1.is_finite() && m2.is_finite() && m1 < m2) {
                    return bad(format!("uniform lambda={lambda} on [{m1}, {m2}]"));
                }
            }
            LevyMeasure::TruncExp { lambda, alpha, m } => {
                if !(lambda.is_finite() && *lambda > 0.0 && alpha.is_finite() && *alpha > 0.0 && m.is_finite() && *m > 0.0) {
                    return bad(format!("truncated exponential lambda={lambda} alpha={alpha} m={m}"));
                }
            }
        }
        Ok(())
    }

    /// `nu(R)`
    pub fn total_mass(&self) -> f64 {
        match self {
            LevyMeasure::DiracSum { atoms } => atoms.iter().map(|a| a.weight).sum(),
            LevyMeasure::Uniform { lambda, m1, m2 } => lambda * (m2 - m1),
            LevyMeasure::TruncExp { lambda, alpha, m } => 2.0 * lambda * m * exprel(-alpha * m),
        }
    }

    /// Smallest and largest possible jump.
    pub fn support(&self) -> (f64, f64) {
        match self {
            LevyMeasure::DiracSum { atoms } => atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                (lo.min(a.location), hi.max(a.location))
            }),
            LevyMeasure::Uniform { m1, m2, .. } => (*m1, *m2),
            LevyMeasure::TruncExp { m, .. } => (-m, *m),
        }
    }

    /// `c` with `nu` supported in `[-c, c]`.
    pub fn support_bound(&self) -> f64 {
        let (lo, hi) = self.support();
        lo.abs().max(hi.abs())
    }

    /// `int f(z) nu(dz)`: exact for atoms, adaptive quadrature otherwise.
    pub fn integrate<F>(&self, mut f: F) -> Result<Complex64, LevyError>
    where
        F: FnMut(f64) -> Complex64,
    {
        let opts = QuadOptions { initial_panels: 8, ..QuadOptions::with_tol(QUAD_TOL) };
        match self {
            LevyMeasure::DiracSum { atoms } => Ok(atoms.iter().map(|a| a.weight * f(a.location)).sum()),
            LevyMeasure::Uniform { lambda, m1, m2 } => {
                Ok(lambda * integrate_finite_with(&mut f, *m1, *m2, &opts)?.value)
            }
            LevyMeasure::TruncExp { lambda, alpha, m } => {
                let mut g = |z: f64| (-alpha * z.abs()).exp() * f(z);
                let l = integrate_finite_with(&mut g, -m, 0.0, &opts)?.value;
                let r = integrate_finite_with(&mut g, 0.0, *m, &opts)?.value;
                Ok(lambda * (l + r))
            }
        }
    }

    /// `int (e^z - 1) nu(dz)`; the jump part of `X` drifts at minus this rate.
    pub fn jump_compensator(&self) -> f64 {
        match self {
            LevyMeasure::DiracSum { atoms } => atoms.iter().map(|a| a.weight * a.location.exp_m1()).sum(),
            LevyMeasure::Uniform { lambda, m1, m2 } => {
                let w = m2 - m1;
                lambda * (m1.exp() * w * exprel(w) - w)
            }
            LevyMeasure::TruncExp { lambda, alpha, m } => {
                lambda * m * (exprel((1.0 - alpha) * m) + exprel(-(1.0 + alpha) * m) - 2.0 * exprel(-alpha * m))
            }
        }
    }

    /// `kappa = int (e^z - 1 - z) nu(dz)`
    pub fn exp_compensator(&self) -> f64 {
        match self {
            LevyMeasure::DiracSum { atoms } => atoms
                .iter()
                .map(|a| a.weight * (a.location.exp_m1() - a.location))
                .sum(),
            LevyMeasure::Uniform { lambda, m1, m2 } => {
                self.jump_compensator() - lambda * 0.5 * (m2 * m2 - m1 * m1)
            }
            // symmetric support: int z nu(dz) = 0
            LevyMeasure::TruncExp { .. } => self.jump_compensator(),
        }
    }

    /// `psi(w, eta) = int (e^{i w z + i eta z^2} - 1 - i w (e^z - 1)) nu(dz)`.
    ///
    /// Closed forms for every family; quadrature takes over for the
    /// continuous families when `0 < |eta| < 1e-6`.
    pub fn psi(&self, omega: Complex64, eta: Complex64) -> Result<Complex64, LevyError> {
        match self {
            LevyMeasure::DiracSum { atoms } => Ok(atoms
                .iter()
                .map(|a| a.weight * psi_integrand(omega, eta, a.location))
                .sum()),
            LevyMeasure::Uniform { lambda, m1, m2 } => {
                if eta != ZERO && eta.norm() < SMALL_ETA {
                    return self.psi_quadrature(omega, eta);
                }
                let w = m2 - m1;
                let g = gauss_segment(omega, eta, *m1, *m2)?;
                let comp = m1.exp() * w * exprel(w) - w;
                Ok(*lambda * (g - w - I * omega * comp))
            }
            LevyMeasure::TruncExp { lambda, alpha, m } => {
                if eta != ZERO && eta.norm() < SMALL_ETA {
                    return self.psi_quadrature(omega, eta);
                }
                let ia = I * *alpha;
                let g = gauss_segment(omega + ia, eta, 0.0, *m)? + gauss_segment(-omega + ia, eta, 0.0, *m)?;
                let mass = 2.0 * m * exprel(-alpha * m);
                Ok(*lambda * (g - mass) - I * omega * self.jump_compensator())
            }
        }
    }

    /// `psi` by direct quadrature of its defining integral (exact sum for atoms).
    pub fn psi_quadrature(&self, omega: Complex64, eta: Complex64) -> Result<Complex64, LevyError> {
        self.integrate(|z| psi_integrand(omega, eta, z))
    }

    /// `d^a/dw^a d^b/deta^b psi(w, eta)`.
    pub fn psi_derivative(
        &self,
        omega: Complex64,
        eta: Complex64,
        a: u32,
        b: u32,
    ) -> Result<Complex64, LevyError> {
        if a == 0 && b == 0 {
            return self.psi(omega, eta);
        }
        let comp = if a == 1 && b == 0 { -I * self.jump_compensator() } else { ZERO };
        if a == 1 && b == 0 {
            if let Some(m1) = self.first_moment_closed(omega, eta)? {
                return Ok(I * m1 + comp);
            }
        }
        let f = |z: f64| I.powu(a + b) * z.powi((a + 2 * b) as i32) * (I * omega * z + I * eta * z * z).exp();
        Ok(self.integrate(f)? + comp)
    }

    // int z e^{i w z + i eta z^2} nu(dz) in closed form where it is well
    // conditioned; None means fall back to quadrature.
    fn first_moment_closed(&self, omega: Complex64, eta: Complex64) -> Result<Option<Complex64>, LevyError> {
        match self {
            LevyMeasure::DiracSum { atoms } => Ok(Some(
                atoms
                    .iter()
                    .map(|a| a.weight * a.location * (I * omega * a.location + I * eta * a.location * a.location).exp())
                    .sum(),
            )),
            LevyMeasure::Uniform { lambda, m1, m2 } => {
                Ok(segment_moment1(omega, eta, *m1, *m2)?.map(|v| *lambda * v))
            }
            LevyMeasure::TruncExp { lambda, alpha, m } => {
                let ia = I * *alpha;
                let r = segment_moment1(omega + ia, eta, 0.0, *m)?;
                let l = segment_moment1(-omega + ia, eta, 0.0, *m)?;
                Ok(match (r, l) {
                    (Some(r), Some(l)) => Some(*lambda * (r - l)),
                    _ => None,
                })
            }
        }
    }

    /// Leveraged-ETF exponent
    /// `chi(q) = int ((beta(e^z-1)+1)^{iq} - 1 - i q beta (e^z-1)) nu(dz)`.
    pub fn chi(&self, beta: f64, q: Complex64) -> Result<Complex64, LevyError> {
        self.check_assumption2(beta)?;
        self.integrate(|z| {
            let x = beta * z.exp_m1();
            expm1_c(I * q * x.ln_1p()) - I * q * x
        })
    }

    /// `int (beta(e^z-1) - log(beta(e^z-1)+1)) nu(dz)`
    pub fn letf_compensator(&self, beta: f64) -> Result<f64, LevyError> {
        self.check_assumption2(beta)?;
        let v = self.integrate(|z| {
            let x = beta * z.exp_m1();
            Complex64::new(x - x.ln_1p(), 0.0)
        })?;
        Ok(v.re)
    }

    /// `beta(e^z - 1) + 1 > 0` on the support of `nu`.
    pub fn check_assumption2(&self, beta: f64) -> Result<(), LevyError> {
        if !beta.is_finite() {
            return Err(LevyError::InvalidMeasure(format!("leverage {beta}")));
        }
        let (lo, hi) = self.support();
        let check = |z: f64| {
            if beta * z.exp_m1() + 1.0 > 0.0 {
                Ok(())
            } else {
                Err(LevyError::Assumption2 { beta, z })
            }
        };
        match self {
            LevyMeasure::DiracSum { atoms } => atoms.iter().try_for_each(|a| check(a.location)),
            _ => check(lo).and_then(|_| check(hi)),
        }
    }

    pub fn moment(&self, which: LevyMoment) -> Result<f64, LevyError> {
        use LevyMoment::*;
        match (self, which) {
            (_, One) => Ok(self.total_mass()),
            (LevyMeasure::DiracSum { atoms }, _) => Ok(atoms
                .iter()
                .map(|a| {
                    let z = a.location;
                    a.weight
                        * match which {
                            One => 1.0,
                            Jump => z,
                            JumpSq => z * z,
                            ExpJump => z.exp(),
                            JumpExpJump => z * z.exp(),
                        }
                })
                .sum()),
            (LevyMeasure::Uniform { lambda, m1, m2 }, _) => {
                let prim = |z: f64| match which {
                    One => z,
                    Jump => 0.5 * z * z,
                    JumpSq => z * z * z / 3.0,
                    ExpJump => z.exp(),
                    JumpExpJump => (z - 1.0) * z.exp(),
                };
                Ok(lambda * (prim(*m2) - prim(*m1)))
            }
            (LevyMeasure::TruncExp { .. }, Jump) => Ok(0.0),
            (LevyMeasure::TruncExp { .. }, _) => {
                let v = self.integrate(|z| {
                    Complex64::new(
                        match which {
                            JumpSq => z * z,
                            ExpJump => z.exp(),
                            _ => z * z.exp(),
                        },
                        0.0,
                    )
                })?;
                Ok(v.re)
            }
        }
    }

    /// Jump times and sizes of the compound Poisson process on `[0, horizon]`.
    pub fn sample_jumps<R: Rng + ?Sized>(&self, rng: &mut R, horizon: f64) -> Vec<JumpEvent> {
        let rate = self.total_mass() * horizon;
        if !(rate > 0.0) {
            return Vec::new();
        }
        let n = Poisson::new(rate).expect("positive Poisson mean").sample(rng) as usize;
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
        times.sort_by(f64::total_cmp);
        times
            .into_iter()
            .map(|time| JumpEvent { time, size: self.sample_size(rng) })
            .collect()
    }

    fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LevyMeasure::DiracSum { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                let mut u = rng.random::<f64>() * total;
                for a in atoms {
                    if u < a.weight {
                        return a.location;
                    }
                    u -= a.weight;
                }
                atoms[atoms.len() - 1].location
            }
            LevyMeasure::Uniform { m1, m2, .. } => m1 + (m2 - m1) * rng.random::<f64>(),
            LevyMeasure::TruncExp { alpha, m, .. } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let u: f64 = rng.random();
                // inverse cdf of alpha e^{-alpha x} restricted to [0, m]
                let x = -(u * (-alpha * m).exp_m1()).ln_1p() / alpha;
                sign * x.min(*m)
            }
        }
    }
}

fn psi_integrand(omega: Complex64, eta: Complex64, z: f64) -> Complex64 {
    expm1_c(I * omega * z + I * eta * z * z) - I * omega * z.exp_m1()
}

// int_lo^hi z e^{i w z + i eta z^2} dz where a closed form is well conditioned.
fn segment_moment1(omega: Complex64, eta: Complex64, lo: f64, hi: f64) -> Result<Option<Complex64>, SpecFunError> {
    let e = |z: f64| (I * omega * z + I * eta * z * z).exp();
    if eta == ZERO {
        if omega.norm() * (hi - lo) < 2.0 {
            return Ok(None);
        }
        let a = I * omega;
        let prim = |z: f64| e(z) * (z / a - 1.0 / (a * a));
        return Ok(Some(prim(hi) - prim(lo)));
    }
    if eta.norm() < 1.0 || omega.norm() > 4.0 * eta.norm() {
        return Ok(None);
    }
    let g = gauss_segment(omega, eta, lo, hi)?;
    Ok(Some((e(hi) - e(lo)) / (2.0 * I * eta) - omega / (2.0 * eta) * g))
}
