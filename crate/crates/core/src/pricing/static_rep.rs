//! Static replication of `f(S_T) = g(log S_T)` with a bond and
//! out-of-the-money puts and calls.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{PayoffFn, PricingError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticWeights {
    pub spot: f64,
    pub bond_units: f64,
    pub strike_grid: Vec<f64>,
    /// `f''(K) dK` for strikes below spot (half weight at spot).
    pub put_density: Vec<f64>,
    /// `f''(K) dK` for strikes above spot (half weight at spot).
    pub call_density: Vec<f64>,
}

impl StaticWeights {
    /// Portfolio value given put and call prices per strike.
    pub fn value<P, C>(&self, put: P, call: C) -> f64
    where
        P: Fn(f64) -> f64,
        C: Fn(f64) -> f64,
    {
        let mut v = self.bond_units;
        for (i, &k) in self.strike_grid.iter().enumerate() {
            if self.put_density[i] != 0.0 {
                v += self.put_density[i] * put(k);
            }
            if self.call_density[i] != 0.0 {
                v += self.call_density[i] * call(k);
            }
        }
        v
    }
}

/// Weights for `f(S) = Re g(log S)`.
pub fn static_weights(g: &PayoffFn, spot: f64, strike_grid: &[f64]) -> Result<StaticWeights, PricingError> {
    static_weights_fn(|s| g.eval(s.ln()).re, spot, strike_grid)
}

/// Bond `f(spot)` plus `f''(K) dK` in puts below and calls above spot;
/// `f''` is the second divided difference on the (possibly uneven) grid.
pub fn static_weights_fn<F: Fn(f64) -> f64>(f: F, spot: f64, strike_grid: &[f64]) -> Result<StaticWeights, PricingError> {
    let n = strike_grid.len();
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(PricingError::Grid(format!("spot {spot}")));
    }
    if n < 3 || strike_grid[0] <= 0.0 || strike_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PricingError::Grid("strikes must be positive and strictly increasing (at least 3)".into()));
    }
    if !(strike_grid[0] < spot && spot < strike_grid[n - 1]) {
        return Err(PricingError::Grid(format!("grid [{}, {}] does not bracket spot {spot}", strike_grid[0], strike_grid[n - 1])));
    }
    let fk: Vec<f64> = strike_grid.iter().map(|&k| f(k)).collect();
    let mut put = vec![0.0; n];
    let mut call = vec![0.0; n];
    for i in 1..n - 1 {
        let (hm, hp) = (strike_grid[i] - strike_grid[i - 1], strike_grid[i + 1] - strike_grid[i]);
        let f2 = 2.0 * ((fk[i + 1] - fk[i]) / hp - (fk[i] - fk[i - 1]) / hm) / (hp + hm);
        let w = f2 * 0.5 * (hp + hm);
        let k = strike_grid[i];
        if k < spot {
            put[i] = w;
        } else if k > spot {
            call[i] = w;
        } else {
            put[i] = 0.5 * w;
            call[i] = 0.5 * w;
        }
    }
    Ok(StaticWeights {
        spot,
        bond_units: f(spot),
        strike_grid: strike_grid.to_vec(),
        put_density: put,
        call_density: call,
    })
}

/// `(S, g(log S))` on a positive grid, in grid order.
pub fn payoff_table(g: &PayoffFn, s_grid: &[f64]) -> Result<Vec<(f64, Complex64)>, PricingError> {
    if let Some(s) = s_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(PricingError::Grid(format!("price {s} is not positive")));
    }
    Ok(s_grid.par_iter().map(|&s| (s, g.eval(s.ln()))).collect())
}

pub fn write_payoff_csv<W: Write>(rows: &[(f64, Complex64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "S,Re_g,Im_g")?;
    for (s, v) in rows {
        writeln!(out, "{s:?},{:?},{:?}", v.re, v.im)?;
    }
    Ok(())
}
