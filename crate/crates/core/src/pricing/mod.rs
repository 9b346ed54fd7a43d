//! European payoff functions `g` with `E phi(X_T, [X]_T) = E g(X_T)`,
//! and static put/call weights for a payoff of the terminal price.

mod spectral;
mod static_rep;

pub use spectral::{SpectralOptions, SpectralRule, FRAC_Z_MAX, LETF_BANDWIDTH};
pub use static_rep::{payoff_table, static_weights, static_weights_fn, write_payoff_csv, StaticWeights};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charfun::{u_branch, u_jet, CharFunError, Branch, Jet2, ModelSpec};
use crate::levy::{LevyError, LevyMeasure, LevyMoment};
use crate::specfun::{PiecewiseChebyshev, SpecFunError};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default line `Im q` for the leveraged ETF call transform.
pub const LETF_CONTOUR: f64 = -1.5;
pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PricingError {
    #[error("invalid claim: {0}")]
    InvalidClaim(String),
    #[error("payoff generators assume X_0 = 0 and [X]_0 = 0 (got {0})")]
    Normalization(String),
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("finite-difference derivative did not settle: {spread:.3e} relative spread")]
    DerivativeNonConvergence { spread: f64 },
    #[error(transparent)]
    Model(#[from] CharFunError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Numerical(#[from] SpecFunError),
}

impl PricingError {
    pub fn category(&self) -> &'static str {
        match self {
            PricingError::InvalidClaim(_) | PricingError::Normalization(_) | PricingError::Grid(_) => "config",
            PricingError::DerivativeNonConvergence { .. } | PricingError::Numerical(_) => "numerical",
            PricingError::Model(e) => e.category(),
            PricingError::Levy(e) => e.category(),
        }
    }
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Claim {
    /// `X^n [X]^m e^{i w X + i eta [X]}`
    PowerExponential { n: u32, m: u32, omega: Complex64, eta: Complex64 },
    VarianceSwap,
    /// `[X]^r`
    FractionalPower { r: f64 },
    /// `X e^{i p X} / ([X] + eps)^r`
    RatioI {
        p: Complex64,
        r: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// `e^{i p X} / ([X] + eps)^r`
    RatioII {
        p: Complex64,
        r: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// `(e^{Y} - e^k)^+`
    LetfCall { beta: f64, k: f64 },
}

impl Claim {
    pub fn name(&self) -> &'static str {
        match self {
            Claim::PowerExponential { .. } => "power_exponential",
            Claim::VarianceSwap => "variance_swap",
            Claim::FractionalPower { .. } => "fractional_power",
            Claim::RatioI { .. } => "ratio_i",
            Claim::RatioII { .. } => "ratio_ii",
            Claim::LetfCall { .. } => "letf_call",
        }
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        let bad = |s: String| Err(PricingError::InvalidClaim(s));
        let finite_c = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        match self {
            Claim::PowerExponential { omega, eta, .. } if !(finite_c(omega) && finite_c(eta)) => {
                bad("non-finite frequency".into())
            }
            Claim::FractionalPower { r } if !(*r > 0.0 && *r < 1.0) => bad(format!("fractional power r = {r} not in (0,1)")),
            Claim::RatioI { p, r, eps } if !(*r > 0.0 && *r < 1.0 && *eps > 0.0 && eps.is_finite() && finite_c(p)) => {
                bad(format!("ratio I needs 0 < r < 1 and eps > 0 (r = {r}, eps = {eps})"))
            }
            Claim::RatioII { p, r, eps } if !(*r > 0.0 && r.is_finite() && *eps > 0.0 && eps.is_finite() && finite_c(p)) => {
                bad(format!("ratio II needs r > 0 and eps > 0 (r = {r}, eps = {eps})"))
            }
            Claim::LetfCall { beta, k } if !(beta.is_finite() && k.is_finite() && *beta != 0.0) => {
                bad(format!("leverage {beta}, log strike {k}"))
            }
            _ => Ok(()),
        }
    }

    /// `phi(X_T, [X]_T)`; `y` is the log LETF value (only the LETF call uses it).
    pub fn payoff(&self, x: f64, qv: f64, y: f64) -> Complex64 {
        match self {
            Claim::PowerExponential { n, m, omega, eta } => {
                x.powi(*n as i32) * qv.powi(*m as i32) * (I * omega * x + I * eta * qv).exp()
            }
            Claim::VarianceSwap => qv.into(),
            Claim::FractionalPower { r } => qv.powf(*r).into(),
            Claim::RatioI { p, r, eps } => x * (I * p * x).exp() / (qv + eps).powf(*r),
            Claim::RatioII { p, r, eps } => (I * p * x).exp() / (qv + eps).powf(*r),
            Claim::LetfCall { k, .. } => (y.exp() - k.exp()).max(0.0).into(),
        }
    }

    /// Real payoff whose `g` is reported through its real part.
    pub fn is_real(&self) -> bool {
        match self {
            Claim::PowerExponential { n: _, m: _, omega, eta } => *omega == ZERO && *eta == ZERO,
            Claim::VarianceSwap | Claim::FractionalPower { .. } | Claim::LetfCall { .. } => true,
            Claim::RatioI { p, .. } | Claim::RatioII { p, .. } => *p == ZERO,
        }
    }

    pub fn leverage(&self) -> Option<f64> {
        match self {
            Claim::LetfCall { beta, .. } => Some(*beta),
            _ => None,
        }
    }
}

/// State the payoff function is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub tau: f64,
    pub x_t: f64,
    pub qv_t: f64,
    pub y_t: f64,
}

#[derive(Debug, Clone)]
struct PowerExpRepr {
    n: usize,
    m: usize,
    u0: Complex64,
    a: Jet2,
    du: Jet2,
}

impl PowerExpRepr {
    fn eval(&self, x: f64) -> Complex64 {
        let e = self.du.scale(I * x).exp();
        let (n, m) = (self.n, self.m);
        let mut s = ZERO;
        for a in 0..=n {
            for b in 0..=m {
                s += self.a.coef(a, b) * e.coef(n - a, m - b);
            }
        }
        let fact = |k: usize| (1..=k).map(|j| j as f64).product::<f64>();
        (-I).powu((n + m) as u32) * fact(n) * fact(m) * s * (I * self.u0 * x).exp()
    }
}

#[derive(Debug, Clone)]
enum Repr {
    PowerExp(Box<PowerExpRepr>),
    /// plus: `-2x + c`; minus: `(2x + c) e^x`
    VarSwap { plus: bool, c: f64 },
    Spectral(SpectralRule),
}

/// A payoff function `g` of the terminal log price.
#[derive(Debug, Clone)]
pub struct PayoffFn {
    pub claim: Claim,
    pub branch: Branch,
    pub conditioning: Conditioning,
    repr: Repr,
    real: bool,
    table: Option<PiecewiseChebyshev>,
}

impl PayoffFn {
    fn new(claim: Claim, branch: Branch, conditioning: Conditioning, repr: Repr) -> Self {
        let real = claim.is_real();
        PayoffFn { claim, branch, conditioning, repr, real, table: None }
    }

    /// The representation before real payoffs are projected on their real part.
    pub fn eval_unprojected(&self, x: f64) -> Complex64 {
        match &self.repr {
            Repr::PowerExp(p) => p.eval(x),
            Repr::VarSwap { plus: true, c } => (-2.0 * x + c).into(),
            Repr::VarSwap { plus: false, c } => ((2.0 * x + c) * x.exp()).into(),
            Repr::Spectral(r) => r.eval(x),
        }
    }

    /// `g(x)` from the representation itself.
    pub fn eval_exact(&self, x: f64) -> Complex64 {
        let v = self.eval_unprojected(x);
        if self.real {
            v.re.into()
        } else {
            v
        }
    }

    /// `g(x)`, from the interpolation table when one covers `x`.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.table.as_ref().and_then(|t| t.eval(x)).unwrap_or_else(|| self.eval_exact(x))
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Number of spectral nodes behind each exact evaluation (0 for closed forms).
    pub fn n_nodes(&self) -> usize {
        match &self.repr {
            Repr::Spectral(r) => r.n_nodes(),
            _ => 0,
        }
    }

    /// Where the representation's x range was certified, if it has one.
    pub fn certified_range(&self) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Spectral(r) => Some(r.x_range),
            _ => None,
        }
    }

    /// Same function with a piecewise Chebyshev table on `[lo, hi]`.
    pub fn tabulated(mut self, lo: f64, hi: f64, tol: f64) -> Result<Self, PricingError> {
        let this = &self;
        let table = PiecewiseChebyshev::fit(|x| Ok(this.eval_exact(x)), lo, hi, tol)?;
        self.table = Some(table);
        Ok(self)
    }
}

fn check_normalized(model: &ModelSpec) -> Result<(), PricingError> {
    model.validate()?;
    if model.x0 != 0.0 || model.qv0 != 0.0 {
        return Err(PricingError::Normalization(format!("x0 = {}, qv0 = {}", model.x0, model.qv0)));
    }
    Ok(())
}

fn start(model: &ModelSpec) -> Conditioning {
    Conditioning { tau: model.horizon, x_t: model.x0, qv_t: model.qv0, y_t: 0.0 }
}

/// Jet of `psi(u, 0)` composed with a jet of `u`.
fn psi_of_u_jet(measure: &LevyMeasure, u: &Jet2, order: usize) -> Result<Jet2, PricingError> {
    let u0 = u.value();
    let mut series = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        series.push(measure.psi_derivative(u0, ZERO, k as u32, 0)? / fact);
    }
    Ok(u.compose(&series))
}

/// Power-exponential payoff.
///
/// `g(x) = (-i d_w)^n (-i d_eta)^m [A(w, eta) e^{i u(w, eta) x}]` with the
/// derivatives taken exactly through truncated Taylor arithmetic.
pub fn g_power_exp(n: u32, m: u32, omega: Complex64, eta: Complex64, model: &ModelSpec, branch: Branch) -> Result<PayoffFn, PricingError> {
    let claim = Claim::PowerExponential { n, m, omega, eta };
    claim.validate()?;
    check_normalized(model)?;
    let (na, nb) = (n as usize, m as usize);
    let u = u_jet(omega, eta, branch, na, nb)?;
    let measure = &model.measure;
    let mut psi_err = None;
    let psi_we = Jet2::from_fn(na, nb, |a, b| {
        let fact: f64 = (1..=a).chain(1..=b).map(|j| j as f64).product();
        match measure.psi_derivative(omega, eta, a as u32, b as u32) {
            Ok(v) => v / fact,
            Err(e) => {
                psi_err.get_or_insert(e);
                ZERO
            }
        }
    });
    if let Some(e) = psi_err {
        return Err(e.into());
    }
    let psi_u = psi_of_u_jet(measure, &u, na + nb)?;
    let a = (&psi_we - &psi_u).scale(model.horizon.into()).exp();
    let u0 = u.value();
    let mut du = u;
    du = &du - &Jet2::constant(na, nb, u0);
    let repr = PowerExpRepr { n: na, m: nb, u0, a, du };
    Ok(PayoffFn::new(claim, branch, start(model), Repr::PowerExp(Box::new(repr))))
}

/// `(-i d_w)^a (-i d_eta)^b A(w, eta)` by central differences with two
/// Richardson refinements; a cross-check for the exact derivatives.
pub fn transfer_derivative_fd(
    omega: Complex64,
    eta: Complex64,
    a: u32,
    b: u32,
    model: &ModelSpec,
    branch: Branch,
) -> Result<Complex64, PricingError> {
    let order = (a + b) as usize;
    let f = |w: Complex64, e: Complex64| {
        crate::charfun::transfer_factor(w, e, model.horizon, model.x0, model.qv0, &model.measure, branch)
    };
    if order == 0 {
        return Ok(f(omega, eta)?);
    }
    let binom = |n: u32, k: u32| (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
    let diff = |h: f64| -> Result<Complex64, PricingError> {
        let mut s = ZERO;
        for j in 0..=a {
            for k in 0..=b {
                let c = binom(a, j) * binom(b, k) * if (a - j + b - k) % 2 == 0 { 1.0 } else { -1.0 };
                let dw = (j as f64 - a as f64 / 2.0) * h;
                let de = (k as f64 - b as f64 / 2.0) * h;
                s += c * f(omega + dw, eta + de)?;
            }
        }
        Ok(s / h.powi(order as i32))
    };
    let scale = f(omega, eta)?.norm();
    // the best step depends on how fast A varies; keep the most self-consistent one
    let mut best: Option<(f64, Complex64)> = None;
    for base in [0.005, 0.01, 0.02, 0.04] {
        let h = base * order as f64;
        let (d1, d2, d3) = (diff(h)?, diff(h / 2.0)?, diff(h / 4.0)?);
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d3 - d2) / 3.0;
        let r = (16.0 * r2 - r1) / 15.0;
        let spread = (r - r2).norm() / r.norm().max(scale).max(1e-300);
        if best.is_none_or(|(s, _)| spread < s) {
            best = Some((spread, r));
        }
    }
    let (spread, r) = best.expect("steps");
    if spread > 1e-6 {
        return Err(PricingError::DerivativeNonConvergence { spread });
    }
    Ok((-I).powu(a + b) * r)
}

/// `int f(z) nu(dz)` for the five moment functions.
pub fn levy_moment(measure: &LevyMeasure, which: LevyMoment) -> Result<f64, PricingError> {
    Ok(measure.moment(which)?)
}

/// Variance swap: plus branch `-2x + c`, minus branch `(2x + c) e^x`.
pub fn g_variance_swap(model: &ModelSpec, branch: Branch) -> Result<PayoffFn, PricingError> {
    check_normalized(model)?;
    let mom = |w| levy_moment(&model.measure, w);
    use LevyMoment::*;
    let t = model.horizon;
    let (plus, c) = match branch {
        Branch::Plus => (true, t * (-2.0 * mom(ExpJump)? + mom(JumpSq)? + 2.0 * mom(Jump)? + 2.0 * mom(One)?)),
        Branch::Minus => (false, t * (-2.0 * mom(JumpExpJump)? + 2.0 * mom(ExpJump)? + mom(JumpSq)? - 2.0 * mom(One)?)),
    };
    Ok(PayoffFn::new(Claim::VarianceSwap, branch, start(model), Repr::VarSwap { plus, c }))
}

/// Fractional power `[X]_T^r`, `0 < r < 1`; `r = 1/2` is the volatility swap.
pub fn g_frac_power(r: f64, model: &ModelSpec, branch: Branch, opts: &SpectralOptions) -> Result<PayoffFn, PricingError> {
    let claim = Claim::FractionalPower { r };
    claim.validate()?;
    check_normalized(model)?;
    let rule = spectral::frac_rule(r, model.horizon, &model.measure, branch, opts)?;
    Ok(PayoffFn::new(claim, branch, start(model), Repr::Spectral(rule)))
}

/// `X_T e^{i p X_T} / ([X]_T + eps)^r`, `0 < r < 1`.
pub fn g_ratio_i(p: Complex64, r: f64, eps: f64, model: &ModelSpec, branch: Branch, opts: &SpectralOptions) -> Result<PayoffFn, PricingError> {
    let claim = Claim::RatioI { p, r, eps };
    claim.validate()?;
    check_normalized(model)?;
    let rule = spectral::ratio_rule(p, r, eps, true, model.horizon, &model.measure, branch, opts)?;
    Ok(PayoffFn::new(claim, branch, start(model), Repr::Spectral(rule)))
}

/// `e^{i p X_T} / ([X]_T + eps)^r`, `r > 0`.
pub fn g_ratio_ii(p: Complex64, r: f64, eps: f64, model: &ModelSpec, branch: Branch, opts: &SpectralOptions) -> Result<PayoffFn, PricingError> {
    let claim = Claim::RatioII { p, r, eps };
    claim.validate()?;
    check_normalized(model)?;
    let rule = spectral::ratio_rule(p, r, eps, false, model.horizon, &model.measure, branch, opts)?;
    Ok(PayoffFn::new(claim, branch, start(model), Repr::Spectral(rule)))
}

/// Leveraged ETF call at time 0 (`X_0 = x0`, `Y_0 = 0`).
pub fn g_letf_call(beta: f64, k: f64, model: &ModelSpec, branch: Branch, contour: f64, opts: &SpectralOptions) -> Result<PayoffFn, PricingError> {
    model.validate()?;
    let cond = Conditioning { tau: model.horizon, x_t: model.x0, qv_t: model.qv0, y_t: 0.0 };
    g_letf_call_at(beta, k, cond, &model.measure, branch, contour, opts)
}

/// Leveraged ETF call conditioned on `(X_t, Y_t)` with `tau = T - t` left.
pub fn g_letf_call_at(
    beta: f64,
    k: f64,
    cond: Conditioning,
    measure: &LevyMeasure,
    branch: Branch,
    contour: f64,
    opts: &SpectralOptions,
) -> Result<PayoffFn, PricingError> {
    let claim = Claim::LetfCall { beta, k };
    claim.validate()?;
    let rule = spectral::letf_rule(beta, k, cond.tau, cond.x_t, cond.y_t, measure, branch, contour, opts)?;
    Ok(PayoffFn::new(claim, branch, cond, Repr::Spectral(rule)))
}

/// `(e^{tau chi(q)} / e^{tau psi(u, 0)}, u)` with `u = u(q beta, q beta (1 - beta) / 2)`:
/// `E_t e^{i q (Y_T - Y_t)} = factor * E_t e^{i u (X_T - X_t)}`.
pub fn letf_cf(beta: f64, q: Complex64, tau: f64, measure: &LevyMeasure, branch: Branch) -> Result<(Complex64, Complex64), PricingError> {
    if !(tau >= 0.0) {
        return Err(PricingError::InvalidClaim(format!("tau = {tau}")));
    }
    measure.check_assumption2(beta)?;
    let root = u_branch(q * beta, q * (0.5 * beta * (1.0 - beta)), branch);
    if root.near_branch_point {
        return Err(CharFunError::BranchPoint(0.0).into());
    }
    let factor = (tau * (measure.chi(beta, q)? - measure.psi(root.u, ZERO)?)).exp();
    Ok((factor, root.u))
}

/// `g` for any claim family, with default LETF contour.
pub fn payoff_fn(claim: &Claim, model: &ModelSpec, branch: Branch, opts: &SpectralOptions) -> Result<PayoffFn, PricingError> {
    match *claim {
        Claim::PowerExponential { n, m, omega, eta } => g_power_exp(n, m, omega, eta, model, branch),
        Claim::VarianceSwap => g_variance_swap(model, branch),
        Claim::FractionalPower { r } => g_frac_power(r, model, branch, opts),
        Claim::RatioI { p, r, eps } => g_ratio_i(p, r, eps, model, branch, opts),
        Claim::RatioII { p, r, eps } => g_ratio_ii(p, r, eps, model, branch, opts),
        Claim::LetfCall { beta, k } => g_letf_call(beta, k, model, branch, LETF_CONTOUR, opts),
    }
}
