use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use super::{exprel_c, SpecFunError};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
// exp() overflows just above 709.78
const EXP_MAX: f64 = 709.0;

// Weideman's rational approximation, N terms.
const WEIDEMAN_N: usize = 40;

struct Weideman {
    l: f64,
    a: Vec<f64>,
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        // f_k on k = -M+1..M-1, preceded by a zero, then fftshift
        let mut f = vec![0.0; m2];
        for (j, k) in (-(m as i64) + 1..m as i64).enumerate() {
            let theta = k as f64 * PI / m as f64;
            let t = l * (0.5 * theta).tan();
            f[j + 1] = (-t * t).exp() * (l * l + t * t);
        }
        let shifted: Vec<f64> = (0..m2).map(|i| f[(i + m) % m2]).collect();
        let a = (1..=n)
            .map(|k| {
                let s: f64 = shifted
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (2.0 * PI * (j * k) as f64 / m2 as f64).cos())
                    .sum();
                s / m2 as f64
            })
            .collect();
        Weideman { l, a }
    })
}

fn w_weideman(z: Complex64) -> Complex64 {
    let tab = weideman();
    let i = Complex64::i();
    let lmiz = tab.l - i * z;
    let zz = (tab.l + i * z) / lmiz;
    let mut p = Complex64::new(0.0, 0.0);
    for a in tab.a.iter().rev() {
        p = p * zz + a;
    }
    2.0 * p / (lmiz * lmiz) + 1.0 / (SQRT_PI * lmiz)
}

// Laplace continued fraction, good for large |z| in the upper half plane.
fn w_cont_frac(z: Complex64) -> Complex64 {
    let r = z.norm();
    let terms = if r > 20.0 { 12 } else if r > 12.0 { 24 } else { 48 };
    let mut t = Complex64::new(0.0, 0.0);
    for k in (1..=terms).rev() {
        t = (0.5 * k as f64) / (z - t);
    }
    Complex64::i() / (SQRT_PI * (z - t))
}

fn w_upper(z: Complex64) -> Complex64 {
    if z.norm() > 8.0 {
        w_cont_frac(z)
    } else {
        w_weideman(z)
    }
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)`.
///
/// Fails with an overflow error in the lower half plane when the
/// reflection term `2 exp(-z^2)` is not representable.
pub fn faddeeva(z: Complex64) -> Result<Complex64, SpecFunError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SpecFunError::Domain(format!("faddeeva({z})")));
    }
    if z.im >= 0.0 {
        return Ok(w_upper(z));
    }
    let e = -z * z;
    if e.re > EXP_MAX {
        return Err(SpecFunError::Overflow(format!("faddeeva({z})")));
    }
    Ok(2.0 * e.exp() - w_upper(-z))
}

fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..200 {
        term = -term * z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// Complex error function with the standard normalization
/// `erf(z) = 2/sqrt(pi) * int_0^z exp(-t^2) dt`.
pub fn erf_complex(z: Complex64) -> Result<Complex64, SpecFunError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SpecFunError::Domain(format!("erf({z})")));
    }
    if z.norm() <= 2.0 {
        return Ok(erf_series(z));
    }
    let e = -z * z;
    if e.re > EXP_MAX {
        return Err(SpecFunError::Overflow(format!("erf({z})")));
    }
    let s = if z.re >= 0.0 { 1.0 } else { -1.0 };
    let one = Complex64::new(1.0, 0.0);
    Ok(s * (one - e.exp() * w_upper(Complex64::i() * s * z)))
}

/// `int_lo^hi exp(i w z + i eta z^2) dz` along the real segment.
///
/// Closed form through the Faddeeva function. Exponents are folded so
/// that each endpoint contributes `exp(i w m + i eta m^2) w(..)`, which
/// stays accurate for small `eta` where the completing-the-square terms
/// individually blow up.
pub fn gauss_segment(
    omega: Complex64,
    eta: Complex64,
    lo: f64,
    hi: f64,
) -> Result<Complex64, SpecFunError> {
    let i = Complex64::i();
    if eta == Complex64::new(0.0, 0.0) {
        let w = i * omega * (hi - lo);
        return Ok((i * omega * lo).exp() * (hi - lo) * exprel_c(w));
    }
    let rho = (-i * eta).sqrt();
    let shift = omega / (2.0 * eta);
    let endpoint = |m: f64| -> Result<(f64, Complex64), SpecFunError> {
        let s = rho * (m + shift);
        let sig = if s.re >= 0.0 { 1.0 } else { -1.0 };
        let e = i * omega * m + i * eta * m * m;
        if e.re > EXP_MAX {
            return Err(SpecFunError::Overflow(format!("gauss_segment endpoint {m}")));
        }
        Ok((sig, e.exp() * w_upper(i * sig * s)))
    };
    let (s1, t1) = endpoint(lo)?;
    let (s2, t2) = endpoint(hi)?;
    let mut acc = s1 * t1 - s2 * t2;
    if s1 != s2 {
        let c = -i * omega * omega / (4.0 * eta);
        if c.re > EXP_MAX {
            return Err(SpecFunError::Overflow("gauss_segment saddle".into()));
        }
        acc += (s2 - s1) * c.exp();
    }
    Ok(SQRT_PI / (2.0 * rho) * acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn weideman_and_cf_agree_in_overlap() {
        for &(x, y) in &[(8.5, 0.1), (6.0, 6.0), (0.3, 9.0), (-7.0, 5.0), (10.0, 0.0)] {
            let z = c(x, y);
            let a = w_weideman(z);
            let b = w_cont_frac(z);
            assert!((a - b).norm() <= 1e-13 * a.norm(), "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn erf_branches_agree_at_switch_radius() {
        for k in 0..16 {
            let th = k as f64 * PI / 8.0 + 0.1;
            let z = c(2.0 * th.cos(), 2.0 * th.sin());
            let s = if z.re >= 0.0 { 1.0 } else { -1.0 };
            let via_w = s * (c(1.0, 0.0) - (-z * z).exp() * w_upper(Complex64::i() * s * z));
            let ser = erf_series(z);
            assert!((via_w - ser).norm() < 2e-14 * ser.norm().max(1.0), "{z}");
        }
    }
}
