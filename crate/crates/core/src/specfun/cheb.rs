use std::f64::consts::PI;

use num_complex::Complex64;

use super::SpecFunError;

const NPTS: usize = 48;
const TAIL: usize = 4;
const MAX_PIECES: usize = 4096;

#[derive(Debug, Clone)]
struct Piece {
    a: f64,
    b: f64,
    coef: Vec<Complex64>,
}

/// Piecewise Chebyshev interpolant of a complex function on `[lo, hi]`.
///
/// Each piece is bisected until the trailing coefficients fall below
/// `tol` times the local magnitude.
#[derive(Debug, Clone)]
pub struct PiecewiseChebyshev {
    pieces: Vec<Piece>,
}

impl PiecewiseChebyshev {
    pub fn fit<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Self, SpecFunError>
    where
        F: Fn(f64) -> Result<Complex64, SpecFunError>,
    {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SpecFunError::Domain(format!("chebyshev range [{lo}, {hi}]")));
        }
        let nodes: Vec<f64> = (0..NPTS).map(|j| (PI * (j as f64 + 0.5) / NPTS as f64).cos()).collect();
        let cos_tab: Vec<f64> = (0..NPTS * NPTS)
            .map(|i| {
                let (k, j) = (i / NPTS, i % NPTS);
                (PI * k as f64 * (j as f64 + 0.5) / NPTS as f64).cos()
            })
            .collect();
        let mut pieces = Vec::new();
        let mut stack = vec![(lo, hi)];
        while let Some((a, b)) = stack.pop() {
            let vals = nodes
                .iter()
                .map(|t| {
                    let x = 0.5 * (a + b) + 0.5 * (b - a) * t;
                    let v = f(x)?;
                    if v.re.is_finite() && v.im.is_finite() {
                        Ok(v)
                    } else {
                        Err(SpecFunError::NonFinite(x))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let coef: Vec<Complex64> = (0..NPTS)
                .map(|k| {
                    let s = vals
                        .iter()
                        .enumerate()
                        .fold(Complex64::new(0.0, 0.0), |acc, (j, v)| acc + v * cos_tab[k * NPTS + j]);
                    let c = s * (2.0 / NPTS as f64);
                    if k == 0 {
                        0.5 * c
                    } else {
                        c
                    }
                })
                .collect();
            let scale = vals.iter().map(|v| v.norm()).fold(1e-300, f64::max);
            let tail = coef[NPTS - TAIL..].iter().map(|c| c.norm()).fold(0.0, f64::max);
            if tail <= tol * scale {
                pieces.push(Piece { a, b, coef });
            } else {
                if pieces.len() + stack.len() >= MAX_PIECES || (b - a) <= 1e-9 * (hi - lo) {
                    return Err(SpecFunError::NonConvergence { est_error: tail / scale, evals: NPTS });
                }
                let m = 0.5 * (a + b);
                stack.push((m, b));
                stack.push((a, m));
            }
        }
        pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
        Ok(PiecewiseChebyshev { pieces })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.pieces[0].a, self.pieces[self.pieces.len() - 1].b)
    }

    pub fn n_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Interpolated value, or `None` outside the fitted range.
    pub fn eval(&self, x: f64) -> Option<Complex64> {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let idx = self.pieces.partition_point(|p| p.b < x).min(self.pieces.len() - 1);
        let p = &self.pieces[idx];
        let t = (2.0 * x - p.a - p.b) / (p.b - p.a);
        // Clenshaw
        let (mut b1, mut b2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for c in p.coef[1..].iter().rev() {
            let b0 = c + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        Some(p.coef[0] + t * b1 - b2)
    }
}
