use super::*;
use crate::levy::LevyMeasure;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn families() -> Vec<LevyMeasure> {
    vec![
        LevyMeasure::dirac(&[(1.0, -2.0)]),
        LevyMeasure::dirac(&[(1.0, 0.5), (0.5, -0.4)]),
        LevyMeasure::Uniform { lambda: 1.0, m1: -0.5, m2: 0.5 },
        LevyMeasure::TruncExp { lambda: 1.0, alpha: 2.0, m: 0.8 },
    ]
}

#[test]
fn roots_solve_the_quadratic() {
    let pts = [c(0.0, 0.0), c(0.3, -0.2), c(-1.5, 0.4), c(2.0, 1.0), c(0.0, 5.0)];
    for &w in &pts {
        for &e in &pts {
            for br in [Branch::Plus, Branch::Minus] {
                let u = u_branch(w, e, br).u;
                let lhs = u * u + I * u;
                let rhs = w * w + I * w - 2.0 * I * e;
                assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()), "{w} {e} {br:?}");
            }
        }
    }
    assert_eq!(u_branch(c(0.0, 0.0), c(0.0, 0.0), Branch::Plus).u, c(0.0, 0.0));
    assert_eq!(u_branch(c(0.0, 0.0), c(0.0, 0.0), Branch::Minus).u, c(0.0, -1.0));
    // u(w, 0) = w on plus, -i - w on minus
    let w = c(0.7, -0.3);
    assert!((u_branch(w, c(0.0, 0.0), Branch::Plus).u - w).norm() < 1e-14);
    assert!((u_branch(w, c(0.0, 0.0), Branch::Minus).u - (-I - w)).norm() < 1e-14);
}

#[test]
fn branch_point_is_flagged() {
    // D = 1/4 - w^2 - i w + 2 i eta vanishes at w = 0, eta = i/8
    let r = u_branch(c(0.0, 0.0), c(0.0, 0.125), Branch::Plus);
    assert!(r.near_branch_point);
    assert!(du_dp(c(0.0, 0.0), c(0.0, 0.125), Branch::Plus).is_err());
    let m = LevyMeasure::dirac(&[(1.0, -2.0)]);
    let e = transfer_factor(c(0.0, 0.0), c(0.0, 0.125), 0.25, 0.0, 0.0, &m, Branch::Minus).unwrap_err();
    assert_eq!(e.category(), "branch_point");
    assert!(!u_branch(c(0.0, 0.0), c(0.0, 0.126), Branch::Plus).near_branch_point);
}

#[test]
fn offset_matches_difference() {
    for br in [Branch::Plus, Branch::Minus] {
        let (w, e) = (c(0.4, 0.1), c(0.2, 3.0));
        let d = u_offset(w, e, br);
        let direct = u_branch(w, e, br).u - u_branch(c(0.0, 0.0), c(0.0, 0.0), br).u;
        assert!((d - direct).norm() < 1e-14);
    }
    // tiny arguments keep relative accuracy: u+ ~ w + ...
    let d = u_offset(c(1e-12, 0.0), c(0.0, 0.0), Branch::Minus);
    assert!((d + 1e-12).norm() < 1e-24);
}

#[test]
fn du_dp_matches_central_difference() {
    let h = 1e-6;
    for br in [Branch::Plus, Branch::Minus] {
        // p = 0 with eta = 2i lies on the principal cut of sqrt(D); stay off it
        for &(p, e) in &[(c(-0.1, 0.0), c(0.0, 2.0)), (c(0.5, -0.2), c(0.0, 0.01)), (c(-1.0, 0.3), c(0.1, 10.0))] {
            let fd = (u_branch(p + h, e, br).u - u_branch(p - h, e, br).u) / (2.0 * h);
            let an = du_dp(p, e, br).unwrap();
            assert!((fd - an).norm() < 1e-8 * (1.0 + an.norm()), "{p} {e}: {fd} vs {an}");
        }
    }
}

#[test]
fn u_jet_matches_finite_differences() {
    let (w, e) = (c(0.3, -0.1), c(0.05, 0.4));
    let h = 1e-4;
    for br in [Branch::Plus, Branch::Minus] {
        let j = u_jet(w, e, br, 2, 2).unwrap();
        let f = |dw: f64, de: f64| u_branch(w + dw, e + de, br).u;
        assert!((j.value() - f(0.0, 0.0)).norm() < 1e-15);
        let dw = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
        let de = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
        let dww = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
        let dwe = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        assert!((j.derivative(1, 0) - dw).norm() < 1e-7);
        assert!((j.derivative(0, 1) - de).norm() < 1e-7);
        assert!((j.derivative(2, 0) - dww).norm() < 1e-5);
        assert!((j.derivative(1, 1) - dwe).norm() < 1e-5);
    }
}

// E e^{i w X_T + i eta [X]_T} = A_0 E e^{i u X_T}, both sides in closed form.
#[test]
fn transfer_identity_in_closed_form() {
    for m in families() {
        let sc = ClosedFormScenario { sigma: 0.2, measure: m, horizon: 0.25 };
        for br in [Branch::Plus, Branch::Minus] {
            for &(w, e) in &[(c(0.5, 0.0), c(1.0, 0.0)), (c(-1.0, 0.2), c(0.0, 3.0)), (c(0.0, 0.0), c(2.0, -0.1))] {
                let lhs = sc.joint_cf(w, e).unwrap();
                let u = br.u(w, e);
                let rhs = sc.a_process(w, e, 0.0, 0.0, 0.0, br).unwrap() * sc.q_closed(u, 0.0, 0.0).unwrap();
                assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0), "{br:?} {w} {e}: {lhs} {rhs}");
            }
        }
    }
}

// R^(q) Q^(q) = R^(-i-q) Q^(-i-q)
#[test]
fn r_q_symmetry() {
    for m in families() {
        let sc = ClosedFormScenario { sigma: 0.3, measure: m, horizon: 0.5 };
        for &q in &[c(0.4, 0.0), c(-1.2, 0.3), c(2.0, -0.7)] {
            for &(t, x) in &[(0.0, 0.0), (0.2, -0.3), (0.45, 0.8)] {
                let a = sc.r_process(q, t, x).unwrap() * sc.q_closed(q, t, x).unwrap();
                let q2 = -I - q;
                let b = sc.r_process(q2, t, x).unwrap() * sc.q_closed(q2, t, x).unwrap();
                assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
            }
        }
    }
}

#[test]
fn transfer_factor_conditioning() {
    // x and qv enter as i(w - u)x + i eta qv
    let m = LevyMeasure::Uniform { lambda: 1.0, m1: -0.5, m2: 0.5 };
    let (w, e) = (c(0.7, 0.0), c(0.5, 0.0));
    let a0 = transfer_factor(w, e, 0.1, 0.0, 0.0, &m, Branch::Plus).unwrap();
    let a1 = transfer_factor(w, e, 0.1, 0.3, 0.02, &m, Branch::Plus).unwrap();
    let u = Branch::Plus.u(w, e);
    let expect = a0 * (I * (w - u) * 0.3 + I * e * 0.02).exp();
    assert!((a1 - expect).norm() < 1e-13);
    // tau = 0, x = qv = 0: trivial
    let one = transfer_factor(w, e, 0.0, 0.0, 0.0, &m, Branch::Minus).unwrap();
    assert!((one - 1.0).norm() < 1e-15);
}

#[test]
fn model_validation() {
    let ok = ModelSpec {
        horizon: 0.25,
        measure: LevyMeasure::dirac(&[(1.0, -2.0)]),
        vol: VolScenario::Constant { sigma: 0.2 },
        x0: 0.0,
        qv0: 0.0,
    };
    assert!(ok.validate().is_ok());
    assert!((ok.variance_bound() - 0.01).abs() < 1e-15);
    let bad = ModelSpec { horizon: -1.0, ..ok.clone() };
    assert_eq!(bad.validate().unwrap_err().category(), "config");
    let bad = ModelSpec { qv0: -0.1, ..ok.clone() };
    assert!(bad.validate().is_err());
    let bad = ModelSpec { vol: VolScenario::Constant { sigma: 0.0 }, ..ok };
    assert!(bad.validate().is_err());
    assert_eq!("minus".parse::<Branch>().unwrap(), Branch::Minus);
    assert!("sideways".parse::<Branch>().is_err());
}
