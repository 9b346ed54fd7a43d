//! Payoff functions given by integrals over a spectral variable.
//!
//! Every integral-represented `g` has the shape
//! `g(x) = e^{i u0 x} (c + sum_k (a_k + b_k s) K(l_k + r_k s))`, `s = x - shift`,
//! with `K = exp` or `K = -expm1`. The nodes come from one adaptive
//! Gauss-Kronrod pass whose error is measured at a set of probe points
//! spanning the requested x range, so the same rule serves every x there.

use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::PricingError;
use crate::charfun::{du_dp, u_branch, u_offset, Branch};
use crate::levy::LevyMeasure;
use crate::specfun::{expm1_c, gamma_real, gk21_rule, EndpointMode, SpecFunError};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const N_PROBES: usize = 9;

/// Accuracy controls for integral-represented payoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Range of log prices where the rule is certified.
    pub x_range: (f64, f64),
    /// Relative quadrature tolerance at the probe points.
    pub tol: f64,
    /// Upper limit of the spectral variable. `None` picks a per-claim default.
    pub cutoff: Option<f64>,
    pub max_panels: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { x_range: (-6.0, 6.0), tol: 1e-9, cutoff: None, max_panels: 20_000 }
    }
}

// default cutoffs
pub const FRAC_Z_MAX: f64 = 2.0e4;
pub const LETF_BANDWIDTH: f64 = 300.0;
const RATIO_DAMP_LOG: f64 = 37.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    Exp,
    NegExpm1,
}

impl Kernel {
    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Kernel::Exp => z.exp(),
            Kernel::NegExpm1 => -expm1_c(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SpectralNode {
    pub weight: Complex64,
    pub slope: Complex64,
    pub log_coef: Complex64,
    pub rate: Complex64,
}

impl SpectralNode {
    fn term(&self, kernel: Kernel, s: f64) -> Complex64 {
        let amp = if self.slope == ZERO { self.weight } else { self.weight + self.slope * s };
        amp * kernel.apply(self.log_coef + self.rate * s)
    }
}

/// A node rule for one payoff function.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRule {
    pub(crate) u0: Complex64,
    pub(crate) constant: Complex64,
    pub(crate) shift: f64,
    pub(crate) kernel: Kernel,
    pub(crate) nodes: Vec<SpectralNode>,
    pub(crate) x_range: (f64, f64),
    /// Where the spectral integral was truncated.
    pub cutoff: f64,
}

impl SpectralRule {
    pub fn eval(&self, x: f64) -> Complex64 {
        let s = x - self.shift;
        let mut acc = self.constant;
        for n in &self.nodes {
            acc += n.term(self.kernel, s);
        }
        if self.u0 == ZERO {
            acc
        } else {
            (I * self.u0 * x).exp() * acc
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

pub(crate) struct Segment {
    pub a: f64,
    pub b: f64,
    pub mode: EndpointMode,
    pub panels: usize,
}

struct Panel {
    seg: usize,
    sa: f64,
    sb: f64,
    // (node, kronrod weight incl. jacobian)
    nodes: Vec<(SpectralNode, f64)>,
    errs: Vec<f64>,
    abs: Vec<f64>,
    key: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.key.total_cmp(&o.key).is_eq()
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.key.total_cmp(&o.key)
    }
}

fn map_s(seg: &Segment, s: f64) -> (f64, f64) {
    let w = seg.b - seg.a;
    match seg.mode {
        EndpointMode::LeftPower(k) => (seg.a + w * s.powf(k), k * w * s.powf(k - 1.0)),
        EndpointMode::RightPower(k) => (seg.b - w * (1.0 - s).powf(k), k * w * (1.0 - s).powf(k - 1.0)),
        _ => (seg.a + w * s, w),
    }
}

type NodeFn<'a> = dyn Fn(f64) -> Result<SpectralNode, PricingError> + 'a;

/// Adaptive GK21 over the segments, error measured at `probes` (values of `s`).
pub(crate) fn build_nodes(
    node_at: &NodeFn<'_>,
    segments: &[Segment],
    kernel: Kernel,
    probes: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<Vec<SpectralNode>, PricingError> {
    let rule = gk21_rule();
    let np = probes.len();
    let eval_panel = |seg_i: usize, sa: f64, sb: f64| -> Result<Panel, PricingError> {
        let seg = &segments[seg_i];
        let (c, h) = (0.5 * (sa + sb), 0.5 * (sb - sa));
        let mut nodes = Vec::with_capacity(21);
        let mut k = vec![ZERO; np];
        let mut g = vec![ZERO; np];
        for &(xi, wk, wg) in &rule {
            let (t, jac) = map_s(seg, c + h * xi);
            let node = node_at(t)?;
            for (p, &s) in probes.iter().enumerate() {
                let v = node.term(kernel, s) * jac;
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(SpecFunError::NonFinite(t).into());
                }
                k[p] += wk * v;
                g[p] += wg * v;
            }
            nodes.push((node, wk * h * jac));
        }
        let errs: Vec<f64> = (0..np).map(|p| ((k[p] - g[p]) * h).norm()).collect();
        let abs: Vec<f64> = (0..np).map(|p| (k[p] * h).norm()).collect();
        Ok(Panel { seg: seg_i, sa, sb, nodes, errs, abs, key: 0.0 })
    };

    let mut panels = Vec::new();
    for (j, seg) in segments.iter().enumerate() {
        if seg.b <= seg.a {
            continue;
        }
        let n = seg.panels.max(1);
        for i in 0..n {
            panels.push(eval_panel(j, i as f64 / n as f64, (i + 1) as f64 / n as f64)?);
        }
    }
    let mut err_tot = vec![0.0; np];
    let mut abs_tot = vec![0.0; np];
    for p in &panels {
        for q in 0..np {
            err_tot[q] += p.errs[q];
            abs_tot[q] += p.abs[q];
        }
    }
    let key = |p: &Panel, abs_tot: &[f64]| -> f64 {
        (0..np).map(|q| p.errs[q] / abs_tot[q].max(1e-300)).fold(0.0, f64::max)
    };
    let mut heap = BinaryHeap::new();
    for mut p in panels {
        p.key = key(&p, &abs_tot);
        heap.push(p);
    }
    let converged = |e: &[f64], a: &[f64]| (0..np).all(|q| e[q] <= tol * a[q].max(1e-300));
    while !converged(&err_tot, &abs_tot) {
        if heap.len() >= max_panels {
            let worst = (0..np).map(|q| err_tot[q] / abs_tot[q].max(1e-300)).fold(0.0, f64::max);
            return Err(SpecFunError::NonConvergence { est_error: worst, evals: 21 * heap.len() }.into());
        }
        let w = heap.pop().expect("panels");
        let m = 0.5 * (w.sa + w.sb);
        let l = eval_panel(w.seg, w.sa, m)?;
        let r = eval_panel(w.seg, m, w.sb)?;
        for q in 0..np {
            err_tot[q] += l.errs[q] + r.errs[q] - w.errs[q];
            abs_tot[q] += l.abs[q] + r.abs[q] - w.abs[q];
        }
        for mut p in [l, r] {
            p.key = key(&p, &abs_tot);
            heap.push(p);
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| (p.seg, p.sa).partial_cmp(&(q.seg, q.sa)).expect("finite"));
    Ok(panels
        .into_iter()
        .flat_map(|p| p.nodes.into_iter())
        .map(|(n, w)| SpectralNode { weight: n.weight * w, slope: n.slope * w, ..n })
        .collect())
}

fn probes(opts: &SpectralOptions, shift: f64) -> Result<Vec<f64>, PricingError> {
    let (lo, hi) = opts.x_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(PricingError::InvalidClaim(format!("x range [{lo}, {hi}]")));
    }
    Ok((0..N_PROBES).map(|j| lo + (hi - lo) * j as f64 / (N_PROBES - 1) as f64 - shift).collect())
}

fn max_abs_s(opts: &SpectralOptions, shift: f64) -> f64 {
    (opts.x_range.0 - shift).abs().max((opts.x_range.1 - shift).abs())
}

fn panels_for_phase(phase: f64) -> usize {
    ((phase / std::f64::consts::PI).ceil() as usize).clamp(4, 4000)
}

/// `r / Gamma(1 - r) int_0^inf z^{-r-1} (e^{i u(0,0) x} - F(z) e^{i u(0, iz) x}) dz`
/// with `F(z) = exp(T psi(0, iz) - T psi(u, 0))`.
///
/// The oscillatory part is truncated at `z_max` (option `cutoff`); the
/// non-oscillatory tail `int_{z_max}^inf z^{-r-1} dz` is added exactly.
/// The dropped part has expectation bounded by
/// `z_max^{-r} E exp(-z_max [X]_T) / Gamma(1 - r)`.
pub(crate) fn frac_rule(
    r: f64,
    horizon: f64,
    measure: &LevyMeasure,
    branch: Branch,
    opts: &SpectralOptions,
) -> Result<SpectralRule, PricingError> {
    let z_max = opts.cutoff.unwrap_or(FRAC_Z_MAX);
    let k = 1.0 / (1.0 - r);
    let pref = r / gamma_real(1.0 - r)?;
    let u0 = branch.u(ZERO, ZERO);
    let node_at = |t: f64| -> Result<SpectralNode, PricingError> {
        let z = t.powf(k);
        let eta = Complex64::new(0.0, z);
        let du = u_offset(ZERO, eta, branch);
        let u = u0 + du;
        let log_coef = horizon * (measure.psi(ZERO, eta)? - measure.psi(u, ZERO)?);
        let weight = if t > 0.0 { pref * k * t.powf(-k * r - 1.0) } else { 0.0 };
        Ok(SpectralNode { weight: weight.into(), slope: ZERO, log_coef, rate: I * du })
    };
    let t_star = 0.125f64.powf(1.0 / k);
    let t_max = z_max.powf(1.0 / k);
    let phase = (2.0 * z_max).sqrt() * max_abs_s(opts, 0.0);
    let mut segs = vec![Segment { a: 0.0, b: t_star.min(t_max), mode: EndpointMode::RightPower(2.0), panels: 4 }];
    if t_max > t_star {
        segs.push(Segment { a: t_star, b: t_max, mode: EndpointMode::LeftPower(2.0), panels: panels_for_phase(phase) });
    }
    let nodes = build_nodes(&node_at, &segs, Kernel::NegExpm1, &probes(opts, 0.0)?, opts.tol, opts.max_panels)?;
    Ok(SpectralRule {
        u0,
        constant: (z_max.powf(-r) / gamma_real(1.0 - r)?).into(),
        shift: 0.0,
        kernel: Kernel::NegExpm1,
        nodes,
        x_range: opts.x_range,
        cutoff: z_max,
    })
}

/// Ratio claims `x^j e^{i p x} / ([X]_T + eps)^r`, `j = 0, 1`.
///
/// `1/Gamma(r) int_0^inf w^{r-1} e^{-w eps} F(p, iw) e^{i u(p, iw) x} dw`,
/// with `(-i d/dp)` applied under the integral for `j = 1`. The
/// integral is cut where `e^{-w eps}` drops below `e^{-37}`.
pub(crate) fn ratio_rule(
    p: Complex64,
    r: f64,
    eps: f64,
    with_x: bool,
    horizon: f64,
    measure: &LevyMeasure,
    branch: Branch,
    opts: &SpectralOptions,
) -> Result<SpectralRule, PricingError> {
    let w_max = opts.cutoff.unwrap_or(RATIO_DAMP_LOG / eps);
    let kappa = ratio_power(r);
    let gr = gamma_real(r)?;
    let node_at = |t: f64| ratio_node(p, t, kappa, r, eps, gr, with_x, horizon, measure, branch);
    let t_max = w_max.powf(1.0 / kappa);
    let phase = (2.0 * w_max).sqrt() * max_abs_s(opts, 0.0);
    // D(w) = 1/4 - p^2 - ip - 2w vanishes at w*
    let w_star = (Complex64::new(0.25, 0.0) - p * p - I * p) * 0.5;
    let mut segs = Vec::new();
    if w_star.im.abs() < 1e-12 && w_star.re > 0.0 && w_star.re < w_max {
        let t_star = w_star.re.powf(1.0 / kappa);
        segs.push(Segment { a: 0.0, b: t_star, mode: EndpointMode::RightPower(2.0), panels: 4 });
        segs.push(Segment { a: t_star, b: t_max, mode: EndpointMode::LeftPower(2.0), panels: panels_for_phase(phase) });
    } else {
        segs.push(Segment { a: 0.0, b: t_max, mode: EndpointMode::Regular, panels: panels_for_phase(phase) });
    }
    let nodes = build_nodes(&node_at, &segs, Kernel::Exp, &probes(opts, 0.0)?, opts.tol, opts.max_panels)?;
    Ok(SpectralRule { u0: ZERO, constant: ZERO, shift: 0.0, kernel: Kernel::Exp, nodes, x_range: opts.x_range, cutoff: w_max })
}

fn ratio_power(r: f64) -> f64 {
    if r < 1.0 {
        1.0 / r
    } else {
        1.0
    }
}

/// Integrand at `w = t^kappa` including `dw/dt` and `1/Gamma(r)`.
#[allow(clippy::too_many_arguments)]
fn ratio_node(
    p: Complex64,
    t: f64,
    kappa: f64,
    r: f64,
    eps: f64,
    gr: f64,
    with_x: bool,
    horizon: f64,
    measure: &LevyMeasure,
    branch: Branch,
) -> Result<SpectralNode, PricingError> {
    let w = t.powf(kappa);
    let eta = Complex64::new(0.0, w);
    let root = u_branch(p, eta, branch);
    let u = root.u;
    let base = if t > 0.0 || kappa * r == 1.0 { kappa * t.powf(kappa * r - 1.0) / gr } else { 0.0 };
    let lc = horizon * (measure.psi(p, eta)? - measure.psi(u, ZERO)?) - w * eps;
    if !with_x {
        return Ok(SpectralNode { weight: base.into(), slope: ZERO, log_coef: lc, rate: I * u });
    }
    // integrable 1/sqrt singularity at the branch point; the substitution keeps nodes off it
    let dudp = du_dp(p, eta, branch)?;
    let dl = horizon * (measure.psi_derivative(p, eta, 1, 0)? - measure.psi_derivative(u, ZERO, 1, 0)? * dudp);
    Ok(SpectralNode { weight: base * (-I * dl), slope: base * dudp, log_coef: lc, rate: I * u })
}

/// Leveraged ETF call `(e^{Y_T} - e^k)^+` priced off `X_T`:
/// `int phi^(q) e^{i q Y_t + tau chi(q) - tau psi(u, 0)} e^{i u (x - X_t)} dq_r`,
/// `u = u(q beta, q beta (1 - beta) / 2)`, on the line `Im q = q_im`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn letf_rule(
    beta: f64,
    k: f64,
    tau: f64,
    x_t: f64,
    y_t: f64,
    measure: &LevyMeasure,
    branch: Branch,
    q_im: f64,
    opts: &SpectralOptions,
) -> Result<SpectralRule, PricingError> {
    measure.check_assumption2(beta)?;
    if q_im >= -1.0 {
        return Err(PricingError::InvalidClaim(format!("contour Im q = {q_im} must be below -1")));
    }
    let q_max = opts.cutoff.unwrap_or(LETF_BANDWIDTH / beta.abs().max(1e-3));
    let two_pi = 2.0 * std::f64::consts::PI;
    let node_at = |qr: f64| -> Result<SpectralNode, PricingError> {
        let q = Complex64::new(qr, q_im);
        let omega = q * beta;
        let eta = q * (0.5 * beta * (1.0 - beta));
        let root = u_branch(omega, eta, branch);
        if root.near_branch_point {
            return Err(crate::charfun::CharFunError::BranchPoint(0.0).into());
        }
        let u = root.u;
        let lc = k - I * k * q + I * q * y_t + tau * (measure.chi(beta, q)? - measure.psi(u, ZERO)?);
        Ok(SpectralNode { weight: -1.0 / (two_pi * (q * q + I * q)), slope: ZERO, log_coef: lc, rate: I * u })
    };
    let phase = q_max * ((k - y_t).abs() + beta.abs() * max_abs_s(opts, x_t));
    let segs = [Segment { a: -q_max, b: q_max, mode: EndpointMode::Regular, panels: panels_for_phase(phase).max(16) }];
    let nodes = build_nodes(&node_at, &segs, Kernel::Exp, &probes(opts, x_t)?, opts.tol, opts.max_panels)?;
    Ok(SpectralRule { u0: ZERO, constant: ZERO, shift: x_t, kernel: Kernel::Exp, nodes, x_range: opts.x_range, cutoff: q_max })
}
