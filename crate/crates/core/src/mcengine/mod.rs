//! Monte Carlo simulation of `(X, [X], Y)` under a volatility scenario
//! independent of the Brownian motion and the jumps.
//!
//! Each path draws from three ChaCha streams (volatility, Brownian,
//! jumps) keyed by `(seed, path index)`, so results do not depend on the
//! number of worker threads.

mod identity;

pub use identity::{check_pricing_identity, price_by_simulation, IdentityOptions, IdentityReport, PriceReport};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charfun::{CharFunError, ModelSpec};
use crate::levy::{JumpEvent, LevyError};
use crate::pricing::PricingError;
use crate::specfun::{pairwise_sum, pairwise_sum_real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum McError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite functional value on path {path} (seed {seed})")]
    NonFinite { path: usize, seed: u64 },
    #[error(transparent)]
    Model(#[from] CharFunError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

impl McError {
    pub fn category(&self) -> &'static str {
        match self {
            McError::InvalidInput(_) => "config",
            McError::NonFinite { .. } => "numerical",
            McError::Model(e) => e.category(),
            McError::Levy(e) => e.category(),
            McError::Pricing(e) => e.category(),
        }
    }
}

/// Volatility path law. Levels are volatilities (not variances).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VolScenario {
    Constant {
        sigma: f64,
    },
    /// Continuous-time Markov chain on `levels`; `rates[i][j]` is the
    /// jump intensity from state i to j (diagonal ignored).
    RegimeSwitching {
        levels: Vec<f64>,
        rates: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
}

impl VolScenario {
    /// Symmetric two-state chain started from its stationary law.
    pub fn two_state(low: f64, high: f64, rate: f64) -> Self {
        VolScenario::RegimeSwitching {
            levels: vec![low, high],
            rates: vec![vec![0.0, rate], vec![rate, 0.0]],
            initial: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            VolScenario::Constant { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(format!("volatility {sigma}"));
                }
            }
            VolScenario::RegimeSwitching { levels, rates, initial } => {
                let n = levels.len();
                if n == 0 || rates.len() != n || initial.len() != n || rates.iter().any(|r| r.len() != n) {
                    return Err("regime-switching dimensions disagree".into());
                }
                if levels.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err("regime volatility levels must be positive".into());
                }
                if rates.iter().flatten().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return Err("generator rates must be non-negative".into());
                }
                let total: f64 = initial.iter().sum();
                if initial.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err("initial distribution must be a probability vector".into());
                }
            }
        }
        Ok(())
    }

    pub fn max_level(&self) -> f64 {
        match self {
            VolScenario::Constant { sigma } => *sigma,
            VolScenario::RegimeSwitching { levels, .. } => levels.iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn min_level(&self) -> f64 {
        match self {
            VolScenario::Constant { sigma } => *sigma,
            VolScenario::RegimeSwitching { levels, .. } => levels.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Piecewise-constant path as `(start, end, sigma)` segments covering `[0, horizon]`.
    pub fn sample_segments<R: rand::Rng + ?Sized>(&self, rng: &mut R, horizon: f64) -> Vec<(f64, f64, f64)> {
        match self {
            VolScenario::Constant { sigma } => vec![(0.0, horizon, *sigma)],
            VolScenario::RegimeSwitching { levels, rates, initial } => {
                let pick = |rng: &mut R, w: &[f64], skip: Option<usize>| -> usize {
                    let tot: f64 = w.iter().enumerate().filter(|(j, _)| Some(*j) != skip).map(|(_, v)| v).sum();
                    let mut u = rng.random::<f64>() * tot;
                    let mut last = 0;
                    for (j, v) in w.iter().enumerate() {
                        if Some(j) == skip || *v <= 0.0 {
                            continue;
                        }
                        last = j;
                        if u < *v {
                            return j;
                        }
                        u -= v;
                    }
                    last
                };
                let mut state = pick(rng, initial, None);
                let mut t = 0.0;
                let mut out = Vec::new();
                loop {
                    let out_rate: f64 = rates[state].iter().enumerate().filter(|(j, _)| *j != state).map(|(_, r)| r).sum();
                    let hold = if out_rate > 0.0 {
                        Exp::new(out_rate).expect("positive rate").sample(rng)
                    } else {
                        f64::INFINITY
                    };
                    let end = (t + hold).min(horizon);
                    out.push((t, end, levels[state]));
                    if end >= horizon {
                        return out;
                    }
                    t = end;
                    state = pick(rng, &rates[state], Some(state));
                }
            }
        }
    }
}

/// Independent random streams for one path.
pub struct PathStreams {
    pub vol: ChaCha8Rng,
    pub brownian: ChaCha8Rng,
    pub jumps: ChaCha8Rng,
}

impl PathStreams {
    pub fn for_path(seed: u64, index: usize) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(3 * index as u64 + k);
            r
        };
        PathStreams { vol: stream(0), brownian: stream(1), jumps: stream(2) }
    }
}

/// Terminal values of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub x_t: f64,
    pub qv_t: f64,
    /// Log LETF value, started at 0; zero when no leverage was simulated.
    pub y_t: f64,
    pub jumps: Vec<JumpEvent>,
    /// `int_0^T sigma_s^2 ds`
    pub vol_integral: f64,
}

/// One path of `(X, [X], Y)` on `[0, T]`.
///
/// The volatility path is piecewise constant, so Gaussian increments are
/// exact on every grid cell (grid refined by regime-switch times); jumps
/// are applied at their exact times.
pub fn simulate_path(
    model: &ModelSpec,
    beta: Option<f64>,
    streams: &mut PathStreams,
    n_steps: usize,
) -> Result<PathRecord, McError> {
    if n_steps == 0 {
        return Err(McError::InvalidInput("n_steps must be positive".into()));
    }
    let horizon = model.horizon;
    let segments = model.vol.sample_segments(&mut streams.vol, horizon);
    let dt = horizon / n_steps as f64;
    let (mut xc, mut qc) = (0.0, 0.0);
    for &(a, b, sigma) in &segments {
        let s2 = sigma * sigma;
        let mut t = a;
        while t < b {
            let next_grid = ((t / dt).floor() + 1.0) * dt;
            let e = next_grid.min(b);
            let e = if e <= t { b } else { e };
            let h = e - t;
            let z: f64 = StandardNormal.sample(&mut streams.brownian);
            xc += -0.5 * s2 * h + sigma * h.sqrt() * z;
            qc += s2 * h;
            t = e;
        }
    }
    let jumps = model.measure.sample_jumps(&mut streams.jumps, horizon);
    let comp = model.measure.jump_compensator();
    let xj = jumps.iter().map(|j| j.size).sum::<f64>() - comp * horizon;
    let qj: f64 = jumps.iter().map(|j| j.size * j.size).sum();
    let y_t = match beta {
        None => 0.0,
        Some(b) => {
            model.measure.check_assumption2(b)?;
            let yc = b * xc + 0.5 * b * (1.0 - b) * qc;
            let yj = jumps.iter().map(|j| (b * j.size.exp_m1()).ln_1p()).sum::<f64>() - b * comp * horizon;
            yc + yj
        }
    };
    Ok(PathRecord {
        x_t: model.x0 + xc + xj,
        qv_t: model.qv0 + qc + qj,
        y_t,
        jumps,
        vol_integral: qc,
    })
}

/// Paths `0..n_paths` for a master seed, in index order.
pub fn simulate_paths(
    model: &ModelSpec,
    beta: Option<f64>,
    n_paths: usize,
    seed: u64,
    n_steps: usize,
) -> Result<Vec<PathRecord>, McError> {
    model.validate()?;
    if n_paths < 2 {
        return Err(McError::InvalidInput("need at least two paths".into()));
    }
    (0..n_paths)
        .into_par_iter()
        .map(|i| simulate_path(model, beta, &mut PathStreams::for_path(seed, i), n_steps))
        .collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[Complex64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let re: Vec<f64> = xs.iter().map(|x| (x.re - mean.re).powi(2)).collect();
        let im: Vec<f64> = xs.iter().map(|x| (x.im - mean.im).powi(2)).collect();
        let var_re = pairwise_sum_real(&re) / (n - 1.0);
        let var_im = pairwise_sum_real(&im) / (n - 1.0);
        McEstimate { mean, stderr_re: (var_re / n).sqrt(), stderr_im: (var_im / n).sqrt(), n_paths: xs.len() }
    }

    /// Larger of the real and imaginary standard errors.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.max(self.stderr_im)
    }
}

/// `E f(path)` with a standard error.
pub fn mc_expectation<F>(
    model: &ModelSpec,
    beta: Option<f64>,
    functional: F,
    n_paths: usize,
    seed: u64,
    n_steps: usize,
) -> Result<McEstimate, McError>
where
    F: Fn(&PathRecord) -> Complex64 + Sync,
{
    let paths = simulate_paths(model, beta, n_paths, seed, n_steps)?;
    let vals: Vec<Complex64> = paths.par_iter().map(&functional).collect();
    if let Some(path) = vals.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(McError::NonFinite { path, seed });
    }
    Ok(McEstimate::from_samples(&vals))
}
