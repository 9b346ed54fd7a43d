//! Dynamic replication of `e^{i w X_T + i eta [X]_T}` when jumps take
//! finitely many sizes.
//!
//! The hedge holds `A` claims on `e^{i u X_T}`, shares, and collars
//! pairing claims on `e^{i q X_T}` and `e^{i(-i-q) X_T}`. Collar units
//! `H` cancel the tracking error of the naive hedge at every jump size.
//! Instruments are marked with constant-volatility closed forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::charfun::{Branch, CharFunError, ClosedFormScenario};
use crate::levy::{JumpEvent, LevyError, LevyMeasure};
use crate::mcengine::PathStreams;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HedgeError {
    #[error("replication needs a Dirac-sum jump measure")]
    NonDiracMeasure,
    #[error("invalid collar: {0}")]
    InvalidCollar(String),
    #[error("collar matrix is rank deficient (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },
    #[error("linear solve residual {residual:.3e} too large")]
    Residual { residual: f64 },
    #[error("jump of size {0} is not an atom of the measure")]
    UnknownJump(f64),
    #[error("jump P&L {realized} disagrees with the predicted tracking error {predicted}")]
    SelfFinancing { realized: Complex64, predicted: Complex64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] CharFunError),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

impl HedgeError {
    pub fn category(&self) -> &'static str {
        match self {
            HedgeError::NonDiracMeasure | HedgeError::InvalidCollar(_) | HedgeError::InvalidInput(_) | HedgeError::UnknownJump(_) => {
                "config"
            }
            HedgeError::RankDeficient { .. } | HedgeError::Residual { .. } => "numerical",
            HedgeError::SelfFinancing { .. } => "internal",
            HedgeError::Model(e) => e.category(),
            HedgeError::Levy(e) => e.category(),
        }
    }
}

/// `F(z) = e^{i w z + i eta z^2} - e^{i u z} - i(w - u)(e^z - 1)`
pub fn f_jump(z: f64, omega: Complex64, eta: Complex64, u: Complex64) -> Complex64 {
    (I * omega * z + I * eta * z * z).exp() - (I * u * z).exp() - I * (omega - u) * z.exp_m1()
}

/// `G(z; q) = -e^{i q z} + e^{(1 - i q) z} - (1 - 2 i q)(e^z - 1)`
pub fn g_jump(z: f64, q: Complex64) -> Complex64 {
    -(I * q * z).exp() + ((1.0 - I * q) * z).exp() - (1.0 - 2.0 * I * q) * z.exp_m1()
}

/// `K_i = A Q^(u) F(z_i)`
pub fn build_k(aq: Complex64, omega: Complex64, eta: Complex64, u: Complex64, atoms: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(atoms.len(), atoms.iter().map(|&z| aq * f_jump(z, omega, eta, u)))
}

/// `L_ij = R^(q_j) Q^(q_j) G(z_i; q_j)`
pub fn build_l(q_list: &[Complex64], rq: &[Complex64], atoms: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(atoms.len(), q_list.len(), |i, j| rq[j] * g_jump(atoms[i], q_list[j]))
}

/// Solution of `L H = k`: exact for square `L`, minimum norm when `L` is wide.
pub fn solve_hedge(k: &DVector<Complex64>, l: &DMatrix<Complex64>) -> Result<DVector<Complex64>, HedgeError> {
    let (n, m) = l.shape();
    if n != k.len() || m < n || n == 0 {
        return Err(HedgeError::InvalidInput(format!("L is {n}x{m}, K has {} rows", k.len())));
    }
    let sv = l.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax) {
        return Err(HedgeError::RankDeficient { cond: smax / smin });
    }
    let h = if n == m {
        l.clone().lu().solve(k).ok_or(HedgeError::RankDeficient { cond: smax / smin })?
    } else {
        let lh = l.adjoint();
        let y = (l * &lh).lu().solve(k).ok_or(HedgeError::RankDeficient { cond: smax / smin })?;
        lh * y
    };
    let residual = (l * &h - k).norm();
    if residual > 1e-10 * (k.norm() + l.norm() * h.norm()) {
        return Err(HedgeError::Residual { residual });
    }
    Ok(h)
}

fn check_q(q: Complex64) -> Result<(), HedgeError> {
    for bad in [Complex64::new(0.0, 0.0), Complex64::new(0.0, -0.5), Complex64::new(0.0, -1.0)] {
        if (q - bad).norm() < 1e-12 {
            return Err(HedgeError::InvalidCollar(format!("q = {q} is excluded")));
        }
    }
    if !(q.re.is_finite() && q.im.is_finite()) {
        return Err(HedgeError::InvalidCollar(format!("q = {q}")));
    }
    Ok(())
}

/// Collar frequencies; each `q` is paired with `-i - q`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CollarSpec {
    pub q_list: Vec<Complex64>,
}

impl CollarSpec {
    pub fn validate(&self) -> Result<(), HedgeError> {
        if self.q_list.is_empty() {
            return Err(HedgeError::InvalidCollar("no collars".into()));
        }
        self.q_list.iter().try_for_each(|&q| check_q(q))
    }

    /// `q_1 = i`, then imaginary `q` from [`scan_values`] while they raise the rank.
    pub fn for_atoms(atoms: &[f64]) -> Result<Self, HedgeError> {
        match atoms {
            [] => Err(HedgeError::InvalidInput("no atoms".into())),
            [z] if *z == 0.0 => Err(HedgeError::InvalidInput("jump size 0".into())),
            [_] => Ok(CollarSpec { q_list: vec![I] }),
            [z1, z2] => {
                let (q1, q2) = choose_collar_params(*z1, *z2)?;
                Ok(CollarSpec { q_list: vec![q1, q2] })
            }
            _ => {
                let mut q_list = vec![I];
                for q in scan_values() {
                    if q_list.len() == atoms.len() {
                        break;
                    }
                    let mut trial = q_list.clone();
                    trial.push(q);
                    let ones = vec![Complex64::new(1.0, 0.0); trial.len()];
                    let sv = build_l(&trial, &ones, atoms).svd(false, false).singular_values;
                    if sv.min() > 1e-6 * sv.max() {
                        q_list = trial;
                    }
                }
                if q_list.len() < atoms.len() {
                    return Err(HedgeError::RankDeficient { cond: f64::INFINITY });
                }
                Ok(CollarSpec { q_list })
            }
        }
    }
}

/// `+-i k` for `k` in 2, 3, 5, 8, 13, ... up to 100.
pub fn scan_values() -> Vec<Complex64> {
    let mut out = Vec::new();
    let (mut a, mut b) = (2.0, 3.0);
    while a <= 100.0 {
        out.push(Complex64::new(0.0, a));
        out.push(Complex64::new(0.0, -a));
        (a, b) = (b, a + b);
    }
    out
}

/// `q_1 = i` and the first scanned `q_2` with
/// `|G(z1;q1)G(z2;q2) - G(z1;q2)G(z2;q1)| > 1e-6` times the size of its terms.
pub fn choose_collar_params(z1: f64, z2: f64) -> Result<(Complex64, Complex64), HedgeError> {
    if !(z1 * z2 * (z1 - z2) != 0.0 && z1.is_finite() && z2.is_finite()) {
        return Err(HedgeError::InvalidInput(format!("need z1 z2 (z1 - z2) != 0, got ({z1}, {z2})")));
    }
    let q1 = I;
    for q2 in scan_values() {
        let (a, b) = (g_jump(z1, q1) * g_jump(z2, q2), g_jump(z1, q2) * g_jump(z2, q1));
        if (a - b).norm() > 1e-6 * (a.norm() + b.norm()) {
            return Ok((q1, q2));
        }
    }
    Err(HedgeError::InvalidCollar(format!("scan exhausted for ({z1}, {z2})")))
}

/// Fixed data for hedging one exponential claim.
#[derive(Debug, Clone)]
pub struct HedgeContext {
    pub scenario: ClosedFormScenario,
    pub omega: Complex64,
    pub eta: Complex64,
    pub branch: Branch,
    pub u: Complex64,
    pub atoms: Vec<f64>,
    pub collar: CollarSpec,
    /// `int (e^z - 1) nu(dz)`
    compensator: f64,
}

impl HedgeContext {
    pub fn new(
        scenario: ClosedFormScenario,
        omega: Complex64,
        eta: Complex64,
        branch: Branch,
        collar: Option<CollarSpec>,
    ) -> Result<Self, HedgeError> {
        scenario.validate()?;
        let atoms: Vec<f64> = match &scenario.measure {
            LevyMeasure::DiracSum { atoms } => atoms.iter().filter(|a| a.weight > 0.0).map(|a| a.location).collect(),
            _ => return Err(HedgeError::NonDiracMeasure),
        };
        if atoms.is_empty() || atoms.iter().any(|z| *z == 0.0) {
            return Err(HedgeError::InvalidInput("atoms must be nonzero".into()));
        }
        let collar = match collar {
            Some(c) => c,
            None => CollarSpec::for_atoms(&atoms)?,
        };
        collar.validate()?;
        if collar.q_list.len() < atoms.len() {
            return Err(HedgeError::InvalidCollar(format!("{} collars for {} jump sizes", collar.q_list.len(), atoms.len())));
        }
        let root = crate::charfun::u_branch(omega, eta, branch);
        if root.near_branch_point {
            return Err(CharFunError::BranchPoint(0.0).into());
        }
        let compensator = scenario.measure.jump_compensator();
        Ok(HedgeContext { scenario, omega, eta, branch, u: root.u, atoms, collar, compensator })
    }

    fn qbar(q: Complex64) -> Complex64 {
        -I - q
    }

    /// Prices of the traded instruments at a state.
    pub fn prices(&self, t: f64, x: f64, qv: f64) -> Result<Prices, HedgeError> {
        let sc = &self.scenario;
        let a = sc.a_process(self.omega, self.eta, t, x, qv, self.branch)?;
        let q_u = sc.q_closed(self.u, t, x)?;
        let mut q = Vec::with_capacity(self.collar.q_list.len());
        let mut q_bar = Vec::with_capacity(q.capacity());
        let mut r = Vec::with_capacity(q.capacity());
        let mut r_bar = Vec::with_capacity(q.capacity());
        for &qj in &self.collar.q_list {
            q.push(sc.q_closed(qj, t, x)?);
            q_bar.push(sc.q_closed(Self::qbar(qj), t, x)?);
            r.push(sc.r_process(qj, t, x)?);
            r_bar.push(sc.r_process(Self::qbar(qj), t, x)?);
        }
        Ok(Prices { a, q_u, share: x.exp(), q, q_bar, r, r_bar })
    }

    /// Collar units `H` solving `L H = -K` at the given prices.
    pub fn collar_units(&self, p: &Prices) -> Result<DVector<Complex64>, HedgeError> {
        let k = build_k(p.a * p.q_u, self.omega, self.eta, self.u, &self.atoms);
        let rq: Vec<Complex64> = p.r.iter().zip(&p.q).map(|(r, q)| r * q).collect();
        let l = build_l(&self.collar.q_list, &rq, &self.atoms);
        solve_hedge(&(-k), &l)
    }

    /// Positions for collar units `h` at prices `p`, with portfolio value `value`.
    pub fn positions(&self, p: &Prices, h: &[Complex64], value: Complex64) -> Positions {
        let aq = p.a * p.q_u;
        let mut share_val = I * (self.omega - self.u) * aq;
        let mut collar = Vec::with_capacity(h.len());
        let mut collar_bar = Vec::with_capacity(h.len());
        for (j, &qj) in self.collar.q_list.iter().enumerate() {
            share_val += h[j] * (1.0 - 2.0 * I * qj) * p.r[j] * p.q[j];
            collar.push(h[j] * p.r[j]);
            collar_bar.push(-h[j] * p.r_bar[j]);
        }
        let mut pos = Positions { claim_u: p.a, shares: share_val / p.share, collar, collar_bar, bond: Complex64::new(0.0, 0.0) };
        pos.bond = value - pos.risky_value(p);
        pos
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prices {
    pub a: Complex64,
    /// `Q^(u) = E_t e^{i u X_T}`
    pub q_u: Complex64,
    pub share: f64,
    pub q: Vec<Complex64>,
    pub q_bar: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub r_bar: Vec<Complex64>,
}

/// Complex units held in each instrument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Positions {
    pub claim_u: Complex64,
    pub shares: Complex64,
    /// units of the claim on `e^{i q_j X_T}`
    pub collar: Vec<Complex64>,
    /// units of the claim on `e^{i(-i-q_j) X_T}`
    pub collar_bar: Vec<Complex64>,
    pub bond: Complex64,
}

impl Positions {
    fn risky_value(&self, p: &Prices) -> Complex64 {
        let mut v = self.claim_u * p.q_u + self.shares * p.share;
        for j in 0..self.collar.len() {
            v += self.collar[j] * p.q[j] + self.collar_bar[j] * p.q_bar[j];
        }
        v
    }

    pub fn value(&self, p: &Prices) -> Complex64 {
        self.bond + self.risky_value(p)
    }

    /// Value of the collar legs alone (zero when held as prescribed).
    pub fn collar_value(&self, p: &Prices) -> Complex64 {
        (0..self.collar.len()).map(|j| self.collar[j] * p.q[j] + self.collar_bar[j] * p.q_bar[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeState {
    pub t: f64,
    pub x: f64,
    pub qv: f64,
    pub value: Complex64,
    pub h: Vec<Complex64>,
    pub positions: Positions,
}

impl HedgeState {
    /// Initial state: the portfolio costs the claim's price.
    pub fn start(ctx: &HedgeContext) -> Result<Self, HedgeError> {
        let p = ctx.prices(0.0, 0.0, 0.0)?;
        let value = p.a * p.q_u;
        let h: Vec<Complex64> = ctx.collar_units(&p)?.iter().cloned().collect();
        let positions = ctx.positions(&p, &h, value);
        Ok(HedgeState { t: 0.0, x: 0.0, qv: 0.0, value, h, positions })
    }

    /// Reset positions at the current state; self-financing by construction.
    pub fn rebalance(&mut self, ctx: &HedgeContext) -> Result<(), HedgeError> {
        let p = ctx.prices(self.t, self.x, self.qv)?;
        self.h = ctx.collar_units(&p)?.iter().cloned().collect();
        self.positions = ctx.positions(&p, &self.h, self.value);
        Ok(())
    }

    /// Move to a new state holding positions fixed.
    pub fn mark(&mut self, ctx: &HedgeContext, t: f64, x: f64, qv: f64) -> Result<Prices, HedgeError> {
        let p = ctx.prices(t, x, qv)?;
        self.value = self.positions.value(&p);
        (self.t, self.x, self.qv) = (t, x, qv);
        Ok(p)
    }
}

/// Outcome of one jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpReport {
    /// `Delta(A Q^(u)) - Delta(portfolio)`
    pub tracking_error: Complex64,
    /// `K_i + (L H)_i` at the pre-jump state
    pub predicted: Complex64,
}

/// Apply a jump of size `z` with positions held from just before it.
///
/// The realized tracking error is compared with `K_i + (L H)_i`; a
/// mismatch means the instrument marks and the jump algebra disagree.
pub fn jump_update(state: &HedgeState, z: f64, ctx: &HedgeContext) -> Result<(HedgeState, JumpReport), HedgeError> {
    let mut next = state.clone();
    if z == 0.0 {
        return Ok((next, JumpReport { tracking_error: 0.0.into(), predicted: 0.0.into() }));
    }
    let i = ctx.atoms.iter().position(|a| (a - z).abs() <= 1e-12 * a.abs()).ok_or(HedgeError::UnknownJump(z))?;
    let before = ctx.prices(state.t, state.x, state.qv)?;
    let after = next.mark(ctx, state.t, state.x + z, state.qv + z * z)?;
    let target = after.a * after.q_u - before.a * before.q_u;
    let realized = target - (next.value - state.value);
    let aq = before.a * before.q_u;
    let mut predicted = aq * f_jump(z, ctx.omega, ctx.eta, ctx.u);
    for (j, &qj) in ctx.collar.q_list.iter().enumerate() {
        predicted += state.h[j] * before.r[j] * before.q[j] * g_jump(ctx.atoms[i], qj);
    }
    let scale = aq.norm() + state.positions.value(&before).norm() + state.h.iter().zip(&before.r).zip(&before.q).map(|((h, r), q)| (h * r * q).norm()).sum::<f64>();
    if (realized - predicted).norm() > 1e-8 * scale.max(1e-300) {
        return Err(HedgeError::SelfFinancing { realized, predicted });
    }
    Ok((next, JumpReport { tracking_error: realized, predicted }))
}

/// Diagnostics of one hedged path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgePath {
    /// Portfolio minus claim payoff at maturity.
    pub terminal_error: Complex64,
    pub payoff: Complex64,
    pub n_jumps: usize,
    /// Largest `|tracking error|` over the path's jumps.
    pub max_jump_error: f64,
    /// Largest `|collar value|` seen at rebalancing times.
    pub max_collar_value: f64,
    /// `A_T Q_T^(u)` minus the payoff.
    pub terminal_mark_error: f64,
}

/// One path with given jumps; Brownian increments come from `rng`.
pub fn simulate_hedge_path<R: Rng + ?Sized>(
    ctx: &HedgeContext,
    n_steps: usize,
    jumps: &[JumpEvent],
    rng: &mut R,
) -> Result<HedgePath, HedgeError> {
    if n_steps == 0 {
        return Err(HedgeError::InvalidInput("n_steps must be positive".into()));
    }
    let horizon = ctx.scenario.horizon;
    let sigma = ctx.scenario.sigma;
    let dt = horizon / n_steps as f64;
    let mut state = HedgeState::start(ctx)?;
    let mut max_jump_error: f64 = 0.0;
    let mut max_collar_value: f64 = 0.0;
    let mut ji = 0;
    let (mut x, mut qv, mut t) = (0.0, 0.0, 0.0);
    let collar_check = |state: &HedgeState, max: &mut f64| -> Result<(), HedgeError> {
        let p = ctx.prices(state.t, state.x, state.qv)?;
        *max = max.max(state.positions.collar_value(&p).norm() / state.value.norm().max(1e-300));
        Ok(())
    };
    for k in 1..=n_steps {
        let t_grid = if k == n_steps { horizon } else { k as f64 * dt };
        loop {
            let jump = jumps.get(ji).filter(|j| j.time < t_grid);
            let te = jump.map_or(t_grid, |j| j.time);
            let h = te - t;
            if h > 0.0 {
                let zn: f64 = StandardNormal.sample(rng);
                x += -(0.5 * sigma * sigma + ctx.compensator) * h + sigma * h.sqrt() * zn;
                qv += sigma * sigma * h;
            }
            t = te;
            state.mark(ctx, t, x, qv)?;
            match jump {
                Some(j) => {
                    state.rebalance(ctx)?;
                    collar_check(&state, &mut max_collar_value)?;
                    let (next, rep) = jump_update(&state, j.size, ctx)?;
                    state = next;
                    max_jump_error = max_jump_error.max(rep.tracking_error.norm());
                    x += j.size;
                    qv += j.size * j.size;
                    ji += 1;
                    state.rebalance(ctx)?;
                }
                None => {
                    if k < n_steps {
                        state.rebalance(ctx)?;
                        collar_check(&state, &mut max_collar_value)?;
                    }
                    break;
                }
            }
        }
    }
    let payoff = (I * ctx.omega * x + I * ctx.eta * qv).exp();
    let p = ctx.prices(horizon, x, qv)?;
    Ok(HedgePath {
        terminal_error: state.value - payoff,
        payoff,
        n_jumps: ji,
        max_jump_error,
        max_collar_value,
        terminal_mark_error: (p.a * p.q_u - payoff).norm(),
    })
}

/// One path with jumps drawn from the scenario's measure.
pub fn simulate_hedge(ctx: &HedgeContext, n_steps: usize, streams: &mut PathStreams) -> Result<HedgePath, HedgeError> {
    let jumps = ctx.scenario.measure.sample_jumps(&mut streams.jumps, ctx.scenario.horizon);
    simulate_hedge_path(ctx, n_steps, &jumps, &mut streams.brownian)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeReportRow {
    pub n_steps: usize,
    pub n_paths: usize,
    pub mean_abs_error: f64,
    pub p95_abs_error: f64,
    pub mean_jumps_per_path: f64,
}

/// Terminal hedge error statistics for each rebalancing frequency.
/// Path `i` uses the same random streams for every `n_steps`.
pub fn hedge_convergence(ctx: &HedgeContext, steps: &[usize], n_paths: usize, seed: u64) -> Result<Vec<HedgeReportRow>, HedgeError> {
    if n_paths == 0 {
        return Err(HedgeError::InvalidInput("n_paths must be positive".into()));
    }
    steps
        .iter()
        .map(|&n| {
            let paths: Vec<HedgePath> = (0..n_paths)
                .into_par_iter()
                .map(|i| simulate_hedge(ctx, n, &mut PathStreams::for_path(seed, i)))
                .collect::<Result<_, _>>()?;
            let mut errs: Vec<f64> = paths.iter().map(|p| p.terminal_error.norm()).collect();
            let mean = crate::specfun::pairwise_sum_real(&errs) / n_paths as f64;
            errs.sort_by(f64::total_cmp);
            let idx = ((0.95 * n_paths as f64).ceil() as usize).clamp(1, n_paths) - 1;
            let jumps: f64 = paths.iter().map(|p| p.n_jumps as f64).sum::<f64>() / n_paths as f64;
            Ok(HedgeReportRow { n_steps: n, n_paths, mean_abs_error: mean, p95_abs_error: errs[idx], mean_jumps_per_path: jumps })
        })
        .collect()
}

pub fn write_hedge_csv<W: std::io::Write>(rows: &[HedgeReportRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_steps,n_paths,mean_abs_error,p95_abs_error,mean_jumps_per_path")?;
    for r in rows {
        writeln!(out, "{},{},{:?},{:?},{:?}", r.n_steps, r.n_paths, r.mean_abs_error, r.p95_abs_error, r.mean_jumps_per_path)?;
    }
    Ok(())
}
