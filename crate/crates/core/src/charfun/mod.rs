//! Joint characteristic function of log price and quadratic variation.
//!
//! `E_t exp(i w X_T + i eta [X]_T) = A_t E_t exp(i u X_T)` where `u` is a
//! root of `u^2 + i u = w^2 + i w - 2 i eta`, with `A_t` the transfer
//! factor. Closed-form scenario quantities (constant volatility) live
//! here as well.

mod jet;

pub use jet::Jet2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levy::{LevyError, LevyMeasure};
use crate::mcengine::VolScenario;

const I: Complex64 = Complex64::new(0.0, 1.0);
const BRANCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CharFunError {
    #[error("branch point: discriminant {0:.3e} too close to zero")]
    BranchPoint(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

impl CharFunError {
    pub fn category(&self) -> &'static str {
        match self {
            CharFunError::BranchPoint(_) => "branch_point",
            CharFunError::InvalidModel(_) => "config",
            CharFunError::Levy(e) => e.category(),
        }
    }
}

/// Root selector for `u`: `Plus` has `u(0,0) = 0`, `Minus` has `u(0,0) = -i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn u(self, omega: Complex64, eta: Complex64) -> Complex64 {
        u_branch(omega, eta, self).u
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plus" | "+" => Ok(Branch::Plus),
            "minus" | "-" => Ok(Branch::Minus),
            _ => Err(format!("unknown branch '{s}' (expected plus or minus)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRoot {
    pub u: Complex64,
    /// Set when the discriminant `1/4 - w^2 - i w + 2 i eta` nearly vanishes.
    pub near_branch_point: bool,
}

/// Discriminant `D = 1/4 - w^2 - i w + 2 i eta` minus 1/4.
fn disc_shift(omega: Complex64, eta: Complex64) -> Complex64 {
    -omega * omega - I * omega + 2.0 * I * eta
}

/// `u(w, eta) = i(-1/2 +- sqrt(D))`, principal square root.
///
/// Evaluated as `u+ = i d`, `u- = -i - i d` with
/// `d = sqrt(D) - 1/2 = (D - 1/4) / (sqrt(D) + 1/2)`, which keeps full
/// relative accuracy near `(w, eta) = (0, 0)`.
pub fn u_branch(omega: Complex64, eta: Complex64, branch: Branch) -> BranchRoot {
    let s = disc_shift(omega, eta);
    let disc = s + 0.25;
    let r = disc.sqrt();
    let d = s / (r + 0.5);
    let u = match branch {
        Branch::Plus => I * d,
        Branch::Minus => -I - I * d,
    };
    BranchRoot { u, near_branch_point: disc.norm() < BRANCH_EPS }
}

/// `u(w, eta) - u(0, 0)` without cancellation.
pub fn u_offset(omega: Complex64, eta: Complex64, branch: Branch) -> Complex64 {
    let s = disc_shift(omega, eta);
    let d = s / ((s + 0.25).sqrt() + 0.5);
    branch.sign() * I * d
}

/// `d u(p, eta) / dp` for fixed second argument.
///
/// With `eta = i c` this is `(1 - 2ip) / sqrt(-4p^2 - 4ip - 8c + 1)` on the
/// plus branch; the minus branch is its negative.
pub fn du_dp(p: Complex64, eta: Complex64, branch: Branch) -> Result<Complex64, CharFunError> {
    let disc = disc_shift(p, eta) + 0.25;
    if disc.norm() < BRANCH_EPS {
        return Err(CharFunError::BranchPoint(disc.norm()));
    }
    Ok(branch.sign() * (1.0 - 2.0 * I * p) / (2.0 * disc.sqrt()))
}

/// Taylor jet of `u` around `(w, eta)`.
pub fn u_jet(omega: Complex64, eta: Complex64, branch: Branch, na: usize, nb: usize) -> Result<Jet2, CharFunError> {
    let w = Jet2::var_w(na, nb, omega);
    let e = Jet2::var_eta(na, nb, eta);
    let quarter = Jet2::constant(na, nb, Complex64::new(0.25, 0.0));
    let disc = &(&(&quarter - &(&w * &w)) - &w.scale(I)) + &e.scale(2.0 * I);
    if disc.value().norm() < BRANCH_EPS {
        return Err(CharFunError::BranchPoint(disc.value().norm()));
    }
    let r = disc.sqrt();
    let half = Jet2::constant(na, nb, Complex64::new(0.5, 0.0));
    Ok(match branch {
        Branch::Plus => (&r - &half).scale(I),
        Branch::Minus => (&r + &half).scale(-I),
    })
}

/// Model for simulation and pricing: horizon, jumps, volatility and the
/// starting log price / quadratic variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub horizon: f64,
    pub measure: LevyMeasure,
    pub vol: VolScenario,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub qv0: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), CharFunError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CharFunError::InvalidModel(format!("horizon {}", self.horizon)));
        }
        if !(self.x0.is_finite() && self.qv0.is_finite() && self.qv0 >= 0.0) {
            return Err(CharFunError::InvalidModel(format!("x0 {} qv0 {}", self.x0, self.qv0)));
        }
        self.measure.validate()?;
        self.vol.validate().map_err(CharFunError::InvalidModel)?;
        Ok(())
    }

    /// Upper bound `b` on `int_0^T sigma^2 dt`.
    pub fn variance_bound(&self) -> f64 {
        self.vol.max_level().powi(2) * self.horizon
    }
}

/// `A = exp(tau psi(w, eta) + i(w - u)x + i eta qv - tau psi(u, 0))`.
pub fn transfer_factor(
    omega: Complex64,
    eta: Complex64,
    tau: f64,
    x: f64,
    qv: f64,
    measure: &LevyMeasure,
    branch: Branch,
) -> Result<Complex64, CharFunError> {
    Ok(transfer_log_factor(omega, eta, tau, x, qv, measure, branch)?.exp())
}

/// Logarithm of [`transfer_factor`].
pub fn transfer_log_factor(
    omega: Complex64,
    eta: Complex64,
    tau: f64,
    x: f64,
    qv: f64,
    measure: &LevyMeasure,
    branch: Branch,
) -> Result<Complex64, CharFunError> {
    let root = u_branch(omega, eta, branch);
    if root.near_branch_point {
        return Err(CharFunError::BranchPoint((disc_shift(omega, eta) + 0.25).norm()));
    }
    let u = root.u;
    let psi_we = measure.psi(omega, eta)?;
    let psi_u = measure.psi(u, Complex64::new(0.0, 0.0))?;
    Ok(tau * (psi_we - psi_u) + I * (omega - u) * x + I * eta * qv)
}

/// Constant volatility and a fixed Levy measure; conditional
/// expectations of exponential claims are explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormScenario {
    pub sigma: f64,
    pub measure: LevyMeasure,
    pub horizon: f64,
}

impl ClosedFormScenario {
    pub fn validate(&self) -> Result<(), CharFunError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0 && self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CharFunError::InvalidModel(format!("sigma {} horizon {}", self.sigma, self.horizon)));
        }
        self.measure.validate()?;
        Ok(())
    }

    fn h(q: Complex64) -> Complex64 {
        q * q + I * q
    }

    /// `Q_t^(q) = E_t e^{i q X_T}` as a function of `X_t = x`.
    pub fn q_closed(&self, q: Complex64, t: f64, x: f64) -> Result<Complex64, CharFunError> {
        let tau = self.horizon - t;
        let s2 = self.sigma * self.sigma;
        let psi = self.measure.psi(q, Complex64::new(0.0, 0.0))?;
        Ok((I * q * x + tau * (-0.5 * s2 * Self::h(q) + psi)).exp())
    }

    /// `R_t^(q) = exp(-i q x + (T - t) psi(-i - q, 0))`.
    pub fn r_process(&self, q: Complex64, t: f64, x: f64) -> Result<Complex64, CharFunError> {
        let tau = self.horizon - t;
        let psi = self.measure.psi(-I - q, Complex64::new(0.0, 0.0))?;
        Ok((-I * q * x + tau * psi).exp())
    }

    /// `A_t` for the scenario's measure with `tau = T - t`.
    pub fn a_process(
        &self,
        omega: Complex64,
        eta: Complex64,
        t: f64,
        x: f64,
        qv: f64,
        branch: Branch,
    ) -> Result<Complex64, CharFunError> {
        transfer_factor(omega, eta, self.horizon - t, x, qv, &self.measure, branch)
    }

    /// `E exp(i w X_T + i eta [X]_T)` from `X_0 = 0`, `[X]_0 = 0`.
    pub fn joint_cf(&self, omega: Complex64, eta: Complex64) -> Result<Complex64, CharFunError> {
        let s2 = self.sigma * self.sigma;
        let psi = self.measure.psi(omega, eta)?;
        Ok((self.horizon * (I * eta * s2 - 0.5 * s2 * Self::h(omega) + psi)).exp())
    }
}

#[cfg(test)]
mod tests;
