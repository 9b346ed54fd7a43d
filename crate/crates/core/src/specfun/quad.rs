use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::SpecFunError;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21),
// non-negative half; XGK[10] = 0 is the centre.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_064_480,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss weights for XGK[1], XGK[3], .., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Nodes on [-1, 1] with Kronrod and Gauss weights (Gauss weight is zero
/// at the Kronrod-only nodes).
pub fn gk21_rule() -> [(f64, f64, f64); 21] {
    let mut out = [(0.0, 0.0, 0.0); 21];
    for j in 0..10 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        out[2 * j] = (-XGK[j], WGK[j], wg);
        out[2 * j + 1] = (XGK[j], WGK[j], wg);
    }
    out[20] = (0.0, WGK[10], 0.0);
    out
}

/// One Gauss-Kronrod 21 panel: returns (kronrod, gauss) estimates.
pub fn gauss_kronrod_21<F>(f: &mut F, a: f64, b: f64) -> Result<(Complex64, Complex64), SpecFunError>
where
    F: FnMut(f64) -> Complex64 + ?Sized,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = Complex64::new(0.0, 0.0);
    let mut g = Complex64::new(0.0, 0.0);
    for (x, wk, wg) in gk21_rule() {
        let t = c + h * x;
        let v = f(t);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(SpecFunError::NonFinite(t));
        }
        k += wk * v;
        g += wg * v;
    }
    Ok((k * h, g * h))
}

/// How the integrand behaves at the interval ends.
///
/// `LeftPower(k)` substitutes `x = a + (b - a) s^k`, which removes an
/// integrable singularity `(x - a)^(-alpha)` for `k = 1 / (1 - alpha)`;
/// `k = 2` also smooths square-root kinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointMode {
    Regular,
    LeftPower(f64),
    RightPower(f64),
    BothPower(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
    pub endpoint: EndpointMode,
    /// Equal panels to start from; more panels guard against missing
    /// narrow features.
    pub initial_panels: usize,
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions {
            abs_tol: tol,
            rel_tol: tol,
            max_evals: 200_000,
            endpoint: EndpointMode::Regular,
            initial_panels: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub est_error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuadResult {
    pub value: Complex64,
    pub est_error: f64,
    pub evals: usize,
    /// Where the geometric panel sequence was cut off (per half line).
    pub truncated_at: f64,
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive GK21 over `[a, b]` with absolute and relative tolerance `tol`.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult, SpecFunError>
where
    F: FnMut(f64) -> Complex64,
{
    integrate_finite_with(f, a, b, &QuadOptions::with_tol(tol))
}

pub fn integrate_finite_with<F>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult, SpecFunError>
where
    F: FnMut(f64) -> Complex64,
{
    finite_dyn(&mut f, a, b, opts)
}

fn finite_dyn(
    f: &mut dyn FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult, SpecFunError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(SpecFunError::Domain(format!("finite integral over [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), est_error: 0.0, evals: 0 });
    }
    if b < a {
        let r = finite_dyn(f, b, a, opts)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    let w = b - a;
    match opts.endpoint {
        EndpointMode::Regular => adapt(f, a, b, opts),
        EndpointMode::LeftPower(k) => {
            check_power(k)?;
            let mut g = |s: f64| f(a + w * s.powf(k)) * (k * w * s.powf(k - 1.0));
            adapt(&mut g, 0.0, 1.0, opts)
        }
        EndpointMode::RightPower(k) => {
            check_power(k)?;
            let mut g = |s: f64| f(b - w * s.powf(k)) * (k * w * s.powf(k - 1.0));
            adapt(&mut g, 0.0, 1.0, opts)
        }
        EndpointMode::BothPower(k) => {
            let m = 0.5 * (a + b);
            let half = QuadOptions { abs_tol: 0.5 * opts.abs_tol, ..*opts };
            let l = finite_dyn(f, a, m, &QuadOptions { endpoint: EndpointMode::LeftPower(k), ..half })?;
            let r = finite_dyn(f, m, b, &QuadOptions { endpoint: EndpointMode::RightPower(k), ..half })?;
            Ok(QuadResult {
                value: l.value + r.value,
                est_error: l.est_error + r.est_error,
                evals: l.evals + r.evals,
            })
        }
    }
}

fn check_power(k: f64) -> Result<(), SpecFunError> {
    if k.is_finite() && k >= 1.0 {
        Ok(())
    } else {
        Err(SpecFunError::Domain(format!("substitution power {k} must be >= 1")))
    }
}

fn adapt(f: &mut dyn FnMut(f64) -> Complex64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, SpecFunError> {
    let n0 = opts.initial_panels.max(1);
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for j in 0..n0 {
        let pa = a + (b - a) * j as f64 / n0 as f64;
        let pb = if j + 1 == n0 { b } else { a + (b - a) * (j + 1) as f64 / n0 as f64 };
        let (k, g) = gauss_kronrod_21(f, pa, pb)?;
        evals += 21;
        let e = (k - g).norm();
        total += k;
        err += e;
        heap.push(Panel { a: pa, b: pb, value: k, err: e });
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= target {
            break;
        }
        if evals >= opts.max_evals {
            return Err(SpecFunError::NonConvergence { est_error: err, evals });
        }
        let worst = heap.pop().expect("non-empty panel heap");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // cannot split further in floating point
            return Err(SpecFunError::NonConvergence { est_error: err, evals });
        }
        let (k1, g1) = gauss_kronrod_21(f, worst.a, m)?;
        let (k2, g2) = gauss_kronrod_21(f, m, worst.b)?;
        evals += 42;
        let (e1, e2) = ((k1 - g1).norm(), (k2 - g2).norm());
        total += k1 + k2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: m, value: k1, err: e1 });
        heap.push(Panel { a: m, b: worst.b, value: k2, err: e2 });
    }
    // re-sum from the panels to shed drift from incremental updates
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().fold(Complex64::new(0.0, 0.0), |s, p| s + p.value);
    let est_error = panels.iter().map(|p| p.err).sum();
    Ok(QuadResult { value, est_error, evals })
}

/// Unbounded integration domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[start, inf)`
    HalfLine { start: f64 },
    /// `(-inf, inf)`, split at zero.
    WholeLine,
}

const MAX_TAIL_PANELS: usize = 80;

/// Integral over an unbounded domain by geometrically growing panels.
///
/// Panels start at width `decay_hint` and double; summation stops once
/// three consecutive panels are negligible. `endpoint` applies to the
/// first panel of a half line (for instance `LeftPower(2.0)` for an
/// inverse square root at the origin).
pub fn integrate_semi_infinite<F>(
    mut f: F,
    domain: Domain,
    tol: f64,
    decay_hint: f64,
    endpoint: EndpointMode,
) -> Result<TailQuadResult, SpecFunError>
where
    F: FnMut(f64) -> Complex64,
{
    if !(decay_hint.is_finite() && decay_hint > 0.0) {
        return Err(SpecFunError::Domain(format!("decay hint {decay_hint}")));
    }
    match domain {
        Domain::HalfLine { start } => half_line(&mut f, start, 1.0, tol, decay_hint, endpoint),
        Domain::WholeLine => {
            let r = half_line(&mut f, 0.0, 1.0, 0.5 * tol, decay_hint, endpoint)?;
            let l = half_line(&mut f, 0.0, -1.0, 0.5 * tol, decay_hint, endpoint)?;
            Ok(TailQuadResult {
                value: r.value + l.value,
                est_error: r.est_error + l.est_error,
                evals: r.evals + l.evals,
                truncated_at: r.truncated_at.max(l.truncated_at),
            })
        }
    }
}

fn half_line<F>(
    f: &mut F,
    start: f64,
    dir: f64,
    tol: f64,
    h: f64,
    endpoint: EndpointMode,
) -> Result<TailQuadResult, SpecFunError>
where
    F: FnMut(f64) -> Complex64,
{
    let mut g = |s: f64| f(start + dir * s);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0;
    let (mut lo, mut hi) = (0.0, h);
    let mut quiet = 0;
    for n in 0..MAX_TAIL_PANELS {
        let mode = if n == 0 { endpoint } else { EndpointMode::Regular };
        let opts = QuadOptions { endpoint: mode, ..QuadOptions::with_tol(0.1 * tol) };
        let r = integrate_finite_with(&mut g, lo, hi, &opts)?;
        total += r.value;
        err += r.est_error;
        evals += r.evals;
        if r.value.norm() <= 0.1 * tol * total.norm().max(1.0) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(TailQuadResult {
                    value: total,
                    est_error: err + r.value.norm(),
                    evals,
                    truncated_at: start + dir * hi,
                });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(SpecFunError::TailTruncation { at: start + dir * lo, last: err })
}
