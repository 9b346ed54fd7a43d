//! Truncated bivariate Taylor series in `(dw, deta)`.
//!
//! Coefficient `(a, b)` holds `d^a_w d^b_eta f / (a! b!)`; degrees are
//! truncated at `a <= na`, `b <= nb`.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    na: usize,
    nb: usize,
    c: Vec<Complex64>,
}

impl Jet2 {
    pub fn constant(na: usize, nb: usize, v: Complex64) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); (na + 1) * (nb + 1)];
        c[0] = v;
        Jet2 { na, nb, c }
    }

    /// The first variable `w` expanded around `v`.
    pub fn var_w(na: usize, nb: usize, v: Complex64) -> Self {
        let mut j = Self::constant(na, nb, v);
        if na >= 1 {
            j.c[nb + 1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    /// The second variable `eta` expanded around `v`.
    pub fn var_eta(na: usize, nb: usize, v: Complex64) -> Self {
        let mut j = Self::constant(na, nb, v);
        if nb >= 1 {
            j.c[1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    /// Build from a coefficient function `(a, b) -> d^a d^b f / (a! b!)`.
    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(na: usize, nb: usize, mut f: F) -> Self {
        let mut c = Vec::with_capacity((na + 1) * (nb + 1));
        for a in 0..=na {
            for b in 0..=nb {
                c.push(f(a, b));
            }
        }
        Jet2 { na, nb, c }
    }

    pub fn coef(&self, a: usize, b: usize) -> Complex64 {
        self.c[a * (self.nb + 1) + b]
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    /// `d^a_w d^b_eta f` at the expansion point.
    pub fn derivative(&self, a: usize, b: usize) -> Complex64 {
        self.coef(a, b) * (factorial(a) * factorial(b))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Jet2 { na: self.na, nb: self.nb, c: self.c.iter().map(|v| v * s).collect() }
    }

    fn order(&self) -> usize {
        self.na + self.nb
    }

    /// `sum_k series[k] (self - self(0))^k`.
    pub fn compose(&self, series: &[Complex64]) -> Self {
        let mut d = self.clone();
        d.c[0] = Complex64::new(0.0, 0.0);
        let n = series.len().min(self.order() + 1);
        let mut acc = Jet2::constant(self.na, self.nb, series[n - 1]);
        for k in (0..n - 1).rev() {
            acc = &acc * &d;
            acc.c[0] += series[k];
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e0 = self.c[0].exp();
        let series: Vec<Complex64> = (0..=self.order()).map(|k| e0 / factorial(k)).collect();
        self.compose(&series)
    }

    /// Principal square root; the expansion point must not be zero.
    pub fn sqrt(&self) -> Self {
        let x0 = self.c[0];
        let r0 = x0.sqrt();
        // sqrt(x0 + d) = r0 sum_k binom(1/2, k) (d / x0)^k
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        let mut pow = Complex64::new(1.0, 0.0);
        for k in 0..=self.order() {
            series.push(r0 * binom * pow);
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            pow /= x0;
        }
        self.compose(&series)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl<'a> Add<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn add(self, o: &Jet2) -> Jet2 {
        Jet2 { na: self.na, nb: self.nb, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn sub(self, o: &Jet2) -> Jet2 {
        Jet2 { na: self.na, nb: self.nb, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn mul(self, o: &Jet2) -> Jet2 {
        let (na, nb) = (self.na, self.nb);
        let mut c = vec![Complex64::new(0.0, 0.0); (na + 1) * (nb + 1)];
        for a1 in 0..=na {
            for b1 in 0..=nb {
                let x = self.c[a1 * (nb + 1) + b1];
                if x == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for a2 in 0..=na - a1 {
                    for b2 in 0..=nb - b1 {
                        c[(a1 + a2) * (nb + 1) + b1 + b2] += x * o.c[a2 * (nb + 1) + b2];
                    }
                }
            }
        }
        Jet2 { na, nb, c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_linear_form_has_product_coefficients() {
        // exp(2w + 3 eta): d^a d^b = 2^a 3^b
        let w = Jet2::var_w(3, 2, Complex64::new(0.0, 0.0));
        let e = Jet2::var_eta(3, 2, Complex64::new(0.0, 0.0));
        let j = (&w.scale(2.0.into()) + &e.scale(3.0.into())).exp();
        for a in 0..=3 {
            for b in 0..=2 {
                let expect = 2f64.powi(a as i32) * 3f64.powi(b as i32);
                assert!((j.derivative(a, b).re - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let w = Jet2::var_w(2, 2, Complex64::new(0.3, -0.2));
        let e = Jet2::var_eta(2, 2, Complex64::new(1.1, 0.4));
        let x = &(&w * &w) + &e;
        let r = x.sqrt();
        let back = &r * &r;
        for (p, q) in back.c.iter().zip(&x.c) {
            assert!((p - q).norm() < 1e-13);
        }
    }
}
