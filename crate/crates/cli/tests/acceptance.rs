// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
// Runs without the libtest harness so the lines always reach the output.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use qvrep_core::charfun::{u_branch, Branch, ClosedFormScenario, ModelSpec};
use qvrep_core::levy::LevyMeasure;
use qvrep_core::mcengine::{check_pricing_identity, simulate_paths, IdentityOptions, McEstimate, VolScenario};
use qvrep_core::pricing::{g_variance_swap, Claim};
use qvrep_core::replication::{hedge_convergence, jump_update, HedgeContext, HedgeState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: Complex64 = Complex64::new(0.0, 1.0);

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rand_c(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    // uniform in the disc of radius r
    loop {
        let z = c(rng.random_range(-r..r), rng.random_range(-r..r));
        if z.norm() <= r {
            return z;
        }
    }
}

fn model(measure: LevyMeasure, vol: VolScenario) -> ModelSpec {
    ModelSpec { horizon: 0.25, measure, vol, x0: 0.0, qv0: 0.0 }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn psi_closed_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let families = [
        LevyMeasure::dirac(&[(1.0, 0.5), (0.5, -0.4)]),
        LevyMeasure::Uniform { lambda: 1.0, m1: -0.5, m2: 0.5 },
        LevyMeasure::TruncExp { lambda: 1.0, alpha: 2.0, m: 0.8 },
    ];
    let mut worst: f64 = 0.0;
    for nu in &families {
        for _ in 0..200 {
            let (w, e) = (rand_c(&mut rng, 5.0), rand_c(&mut rng, 5.0));
            let d = (nu.psi(w, e).map_err(|x| x.to_string())? - nu.psi_quadrature(w, e).map_err(|x| x.to_string())?).norm();
            worst = worst.max(d);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-8 && secs < 10.0, format!("max |psi - quadrature| = {worst:.2e} in {secs:.2} s"))
}

fn branch_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (w, e) = (rand_c(&mut rng, 5.0), rand_c(&mut rng, 5.0));
        let rhs = w * w + I * w - 2.0 * I * e;
        for br in [Branch::Plus, Branch::Minus] {
            let u = u_branch(w, e, br).u;
            worst = worst.max((u * u + I * u - rhs).norm() / (1.0 + rhs.norm()));
        }
    }
    let origin = u_branch(c(0.0, 0.0), c(0.0, 0.0), Branch::Plus).u == c(0.0, 0.0)
        && u_branch(c(0.0, 0.0), c(0.0, 0.0), Branch::Minus).u == c(0.0, -1.0);
    check(worst <= 1e-12 && origin, format!("max relative residual {worst:.2e}, origin values exact: {origin}"))
}

fn transfer_identity_closed_form() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sc = ClosedFormScenario { sigma: 0.2, measure: LevyMeasure::TruncExp { lambda: 1.0, alpha: 2.0, m: 0.8 }, horizon: 0.25 };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (w, e) = (rand_c(&mut rng, 2.0), rand_c(&mut rng, 2.0));
        let lhs = sc.joint_cf(w, e).map_err(|x| x.to_string())?;
        for br in [Branch::Plus, Branch::Minus] {
            let u = u_branch(w, e, br).u;
            let rhs = sc.a_process(w, e, 0.0, 0.0, 0.0, br).map_err(|x| x.to_string())? * sc.q_closed(u, 0.0, 0.0).map_err(|x| x.to_string())?;
            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-10 && secs < 5.0, format!("max relative gap {worst:.2e} in {secs:.2} s"))
}

fn identity_by_simulation() -> Outcome {
    let start = Instant::now();
    let vol = VolScenario::two_state(0.1, 0.3, 2.0);
    let claim_families = [LevyMeasure::dirac(&[(1.0, 0.5), (0.5, -0.4)]), LevyMeasure::Uniform { lambda: 1.0, m1: -0.5, m2: 0.5 }];
    let letf_families = [LevyMeasure::dirac(&[(2.0, -0.4)]), LevyMeasure::Uniform { lambda: 1.0, m1: -0.3, m2: 0.3 }];
    let zero = c(0.0, 0.0);
    let mut cases: Vec<(Claim, &LevyMeasure)> = Vec::new();
    for nu in &claim_families {
        for claim in [
            Claim::PowerExponential { n: 1, m: 1, omega: c(0.5, 0.0), eta: c(0.3, 0.0) },
            Claim::VarianceSwap,
            Claim::FractionalPower { r: 0.5 },
            Claim::RatioI { p: zero, r: 0.5, eps: 1e-3 },
            Claim::RatioII { p: zero, r: 0.7, eps: 1e-3 },
        ] {
            cases.push((claim, nu));
        }
    }
    for nu in &letf_families {
        for beta in [-2.0, 1.0, 2.0] {
            cases.push((Claim::LetfCall { beta, k: 0.0 }, nu));
        }
    }
    let (mut n_checks, mut worst_z, mut failures) = (0, 0.0f64, Vec::new());
    for (claim, nu) in &cases {
        let md = model((*nu).clone(), vol.clone());
        for br in [Branch::Plus, Branch::Minus] {
            let rep = check_pricing_identity(claim, &md, br, 100_000, 42, &IdentityOptions::default()).map_err(|e| format!("{}: {e}", claim.name()))?;
            n_checks += 1;
            worst_z = worst_z.max(rep.z);
            if !rep.pass {
                failures.push(format!("{} {br:?} z={:.2}", claim.name(), rep.z));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failures.is_empty() && secs < 300.0,
        format!("{n_checks} checks at 1e5 paths, max z = {worst_z:.2}, {secs:.1} s; failures: {failures:?}"),
    )
}

fn variance_swap_special_cases() -> Outcome {
    let tiny = model(LevyMeasure::dirac(&[(1e-14, 0.0)]), VolScenario::Constant { sigma: 0.2 });
    let g = g_variance_swap(&tiny, Branch::Plus).map_err(|e| e.to_string())?;
    let exact = [-1.3, -0.2, 0.0, 0.4, 2.0].iter().all(|&x| g.eval(x).re == -2.0 * x);
    let mut worst: f64 = 0.0;
    for (lam, m) in [(1.0, -2.0), (2.0, 0.5), (0.5, 1.0)] {
        let md = model(LevyMeasure::dirac(&[(lam, m)]), VolScenario::Constant { sigma: 0.2 });
        let direct = 0.25 * lam * (-2.0 * f64::exp(m) + m * m + 2.0 * m + 2.0);
        let g = g_variance_swap(&md, Branch::Plus).map_err(|e| e.to_string())?;
        worst = worst.max((g.eval(0.0).re - direct).abs());
    }
    let (lam, m) = (1.0, -2.0);
    let md = model(LevyMeasure::dirac(&[(lam, m)]), VolScenario::Constant { sigma: 0.2 });
    let paths = simulate_paths(&md, None, 100_000, 5, 50).map_err(|e| e.to_string())?;
    let qv: Vec<Complex64> = paths.iter().map(|p| c(p.qv_t, 0.0)).collect();
    let est = McEstimate::from_samples(&qv);
    let analytic = 0.04 * 0.25 + lam * 0.25 * m * m;
    let z = (est.mean.re - analytic).abs() / est.stderr_re;
    check(
        exact && worst <= 1e-12 && z <= 3.0,
        format!("g(x) = -2x exact: {exact}; Dirac g(0) max gap {worst:.1e}; MC E[X]_T z = {z:.2}"),
    )
}

fn collar_pair_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sc = ClosedFormScenario { sigma: 0.2, measure: LevyMeasure::dirac(&[(1.0, 0.5), (0.5, -0.4)]), horizon: 0.25 };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = rand_c(&mut rng, 2.0);
        let (t, x) = (rng.random_range(0.0..0.25), rng.random_range(-1.0..1.0));
        let f = |q: Complex64| -> Result<Complex64, String> {
            Ok(sc.r_process(q, t, x).map_err(|e| e.to_string())? * sc.q_closed(q, t, x).map_err(|e| e.to_string())?)
        };
        let (a, b) = (f(q)?, f(-I - q)?);
        worst = worst.max((a - b).norm() / a.norm().max(1.0));
    }
    check(worst <= 1e-10, format!("max relative gap {worst:.2e}"))
}

fn jump_self_financing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sc = ClosedFormScenario { sigma: 0.2, measure: LevyMeasure::dirac(&[(1.0, 0.3), (1.0, -0.4)]), horizon: 0.25 };
    let ctx = HedgeContext::new(sc, c(1.0, 0.0), c(0.5, 0.0), Branch::Plus, None).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut s = HedgeState::start(&ctx).map_err(|e| e.to_string())?;
        (s.t, s.x, s.qv) = (rng.random_range(0.0..0.24), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.3));
        s.rebalance(&ctx).map_err(|e| e.to_string())?;
        let p = ctx.prices(s.t, s.x, s.qv).map_err(|e| e.to_string())?;
        for &z in &ctx.atoms {
            let (_, rep) = jump_update(&s, z, &ctx).map_err(|e| e.to_string())?;
            worst = worst.max(rep.tracking_error.norm() / (p.a * p.q_u).norm());
        }
    }
    check(worst <= 1e-10, format!("max |tracking error| / |A Q| = {worst:.2e} over 50 states x 2 atoms"))
}

fn hedge_convergence_study() -> Outcome {
    let start = Instant::now();
    let sc = ClosedFormScenario { sigma: 0.2, measure: LevyMeasure::dirac(&[(1.0, 0.3), (1.0, -0.4)]), horizon: 0.25 };
    let (w, e) = (c(1.0, 0.0), c(0.5, 0.0));
    let claim_mod = sc.joint_cf(w, e).map_err(|x| x.to_string())?.norm();
    let mut detail = Vec::new();
    let mut ok = true;
    for br in [Branch::Plus, Branch::Minus] {
        let ctx = HedgeContext::new(sc.clone(), w, e, br, None).map_err(|x| x.to_string())?;
        let rows = hedge_convergence(&ctx, &[64, 256, 1024], 1000, 42).map_err(|x| x.to_string())?;
        let errs: Vec<f64> = rows.iter().map(|r| r.mean_abs_error).collect();
        ok &= errs.windows(2).all(|p| p[1] < p[0]) && errs[2] < 0.05 * claim_mod;
        detail.push(format!("{br:?} {:.2e}/{:.2e}/{:.2e}", errs[0], errs[1], errs[2]));
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 180.0, format!("mean |error| at 64/256/1024 steps: {}; |claim| = {claim_mod:.3}; {secs:.1} s", detail.join(", ")))
}

fn unit_leverage_call() -> Outcome {
    let md = model(LevyMeasure::dirac(&[(2.0, -0.4)]), VolScenario::Constant { sigma: 0.2 });
    let mut detail = Vec::new();
    let mut ok = true;
    for br in [Branch::Plus, Branch::Minus] {
        let rep = check_pricing_identity(&Claim::LetfCall { beta: 1.0, k: 0.0 }, &md, br, 100_000, 9, &IdentityOptions::default())
            .map_err(|e| e.to_string())?;
        ok &= rep.pass;
        detail.push(format!("{br:?}: call {:.5} vs E g {:.5} (z = {:.2})", rep.lhs_re, rep.rhs_re, rep.z));
    }
    check(ok, detail.join("; "))
}

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("qvrep-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn qvrep(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qvrep")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(out.stdout)
}

fn vs_config(lam: f64, m: f64, branch: &str) -> String {
    format!(
        r#"{{"model": {{"horizon": 0.25, "measure": {{"type": "dirac_sum", "atoms": [{{"weight": {lam:?}, "location": {m:?}}}]}},
            "vol": {{"type": "constant", "sigma": 0.2}}}},
          "claim": {{"type": "variance_swap"}}, "branch": "{branch}",
          "payoff_table": {{"s_min": 0.5, "s_max": 1.5, "n_points": 101}}}}"#
    )
}

fn curve(dir: &Scratch, lam: f64, m: f64, branch: &str) -> Result<Vec<f64>, String> {
    let cfg = dir.file(&format!("vs_{lam}_{m}_{branch}.json"), &vs_config(lam, m, branch));
    let out = qvrep(&["payoff-table", "--config", cfg.to_str().unwrap()])?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().map_err(|e| e.to_string())).collect()
}

fn figure_ordering() -> Outcome {
    let start = Instant::now();
    let dir = Scratch::new("fig");
    let mut ok = true;
    for br in ["plus", "minus"] {
        let neg = curve(&dir, 1.0, -2.0, br)?;
        let flat = curve(&dir, 1.0, 0.0, br)?;
        let pos = curve(&dir, 1.0, 2.0, br)?;
        ok &= neg.len() == 101 && neg.iter().zip(&flat).all(|(a, b)| a > b) && pos.iter().zip(&flat).all(|(a, b)| a < b);
        let l2 = curve(&dir, 2.0, -2.0, br)?;
        let l3 = curve(&dir, 3.0, -2.0, br)?;
        ok &= neg.iter().zip(&l2).zip(&l3).all(|((a, b), c)| a < b && b < c);
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 30.0, format!("m and lambda orderings on 101 points, both branches, {secs:.2} s"))
}

fn determinism() -> Outcome {
    let dir = Scratch::new("det");
    let base = r#"{"model": {"horizon": 0.25, "measure": {"type": "dirac_sum", "atoms": [{"weight": 1.0, "location": 0.3}, {"weight": 1.0, "location": -0.4}]},
                   "vol": {"type": "regime_switching", "levels": [0.1, 0.3], "rates": [[0.0, 2.0], [2.0, 0.0]], "initial": [0.5, 0.5]}},
                   "claim": CLAIM, "seed": 11, "mc": {"n_paths": 2000}, "hedge": {"n_steps": [16, 64], "n_paths": 50},
                   "payoff_table": {"s_min": 0.6, "s_max": 1.4, "n_points": 9}}"#;
    let frac = dir.file("frac.json", &base.replace("CLAIM", r#"{"type": "fractional_power", "r": 0.5}"#));
    let expo = base.replace("CLAIM", r#"{"type": "power_exponential", "n": 0, "m": 0, "omega": [1.0, 0.0], "eta": [0.5, 0.0]}"#);
    let expo = dir.file("expo.json", &expo.replace(r#""type": "regime_switching", "levels": [0.1, 0.3], "rates": [[0.0, 2.0], [2.0, 0.0]], "initial": [0.5, 0.5]"#, r#""type": "constant", "sigma": 0.2"#));
    let (f, e) = (frac.to_str().unwrap(), expo.to_str().unwrap());
    let runs: Vec<Vec<&str>> = vec![
        vec!["price", "--config", f],
        vec!["payoff-table", "--config", f, "--branch", "minus"],
        vec!["mc-check", "--config", f],
        vec!["mc-check", "--config", e, "--seed", "3"],
        vec!["hedge-sim", "--config", e],
        vec!["psi-eval", "--config", f, "--omega", "1,-0.2", "--eta", "0.3"],
    ];
    for args in &runs {
        let a = qvrep(args)?;
        let b = qvrep(args)?;
        if a != b || a.is_empty() {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    // output files too
    let (o1, o2) = (dir.0.join("o1.csv"), dir.0.join("o2.csv"));
    for o in [&o1, &o2] {
        qvrep(&["hedge-sim", "--config", e, "--out", o.to_str().unwrap()])?;
    }
    let same = read(&o1)? == read(&o2)?;
    check(same, format!("{} commands byte-identical across runs", runs.len() + 1))
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| e.to_string())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("psi closed form vs quadrature", psi_closed_vs_quadrature),
        ("branch identity", branch_identity),
        ("transfer identity in closed form", transfer_identity_closed_form),
        ("pricing identity by Monte Carlo", identity_by_simulation),
        ("variance swap special cases", variance_swap_special_cases),
        ("collar pair symmetry", collar_pair_symmetry),
        ("jump self-financing", jump_self_financing),
        ("hedge convergence", hedge_convergence_study),
        ("unit leverage LETF call", unit_leverage_call),
        ("variance swap figure ordering", figure_ordering),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(d) => println!("PASS criterion {:>2} {name}: {d}", i + 1),
            Err(d) => {
                println!("FAIL criterion {:>2} {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
