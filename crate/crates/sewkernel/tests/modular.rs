use num_complex::Complex64 as C64;
use sewkernel::elliptic_core::{Jacobi, SeriesBudget, Tau, I};
use sewkernel::modular::*;
use sewkernel::szego_genus1::TwistConfig;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn base() -> LiftedPoint {
    LiftedPoint::new(c(0.15, 1.05), c(1.1, 0.8), c(0.0, 0.3).exp() * 2e-3, 0)
}

fn tw() -> TwistConfig {
    TwistConfig::new(0.2, 0.1, 0.3, 0.3, 1).unwrap()
}

fn g(s: &str) -> GroupElement {
    s.parse().unwrap()
}

fn frac_dist(x: f64) -> f64 {
    (x - x.round()).abs()
}

#[test]
fn generators_are_symplectic() {
    for s in ["A", "B", "C", "S", "T", "A^-1", "S^-1", "T B C^-1"] {
        assert!(is_symplectic(g(s).matrix()), "{s}");
    }
    assert_eq!(g("S S S S").matrix(), &nalgebra::Matrix4::identity());
    for r in heisenberg_relations() {
        assert!(r.is_identity_matrix(), "{r}");
    }
    assert!(!commutator(&g("A"), &g("B")).is_identity_matrix());
    assert!(g("T S^-1 A").compose(&g("T S^-1 A").inverse()).is_identity_matrix());
}

#[test]
fn identity_fixes_the_point() {
    let b = SeriesBudget::default();
    let p = LiftedPoint { m: 3, ..base() };
    assert_eq!(act_point(&GroupElement::identity(), &p, &b).unwrap(), p);
    assert_eq!(act_twist(&GroupElement::identity(), &tw()), tw());
    assert_eq!(chi_multiplier(&GroupElement::identity(), &tw()), c(1.0, 0.0));
}

#[test]
fn t_generator_on_points() {
    let b = SeriesBudget::default();
    let p = base();
    let q = act_point(&g("T"), &p, &b).unwrap();
    assert!((q.tau - p.tau - 1.0).norm() < 1e-15);
    assert_eq!((q.w, q.rho, q.m), (p.w, p.rho, p.m));
}

#[test]
fn lifted_log_stays_consistent() {
    let b = SeriesBudget::default();
    let p = base();
    let letters = ["A", "B", "C", "S", "T", "A^-1", "B^-1", "C^-1", "S^-1", "T^-1"];
    let mut words: Vec<String> = letters.iter().map(|s| s.to_string()).collect();
    for x in ["A", "S", "T^-1"] {
        for y in ["B^-1", "T", "C"] {
            for z in ["S", "A", "B"] {
                words.push(format!("{x} {y} {z}"));
            }
        }
    }
    for word in words {
        let (tau, w, rho, lhat) = transported_lhat(&g(&word), &p, &b).unwrap();
        let k = Jacobi::new(Tau::new(tau).unwrap(), b).unwrap().k(w).unwrap();
        let defect = (lhat.exp() * k * k / (-rho) - 1.0).norm();
        assert!(defect < 1e-9, "{word}: {defect}");
    }
}

#[test]
fn twist_action_examples() {
    let t = tw();
    let u = act_twist(&g("C"), &t);
    assert_eq!((u.alpha1, u.beta1, u.kappa, u.b), (t.alpha1, t.beta1, t.kappa, t.b));
    assert!((u.beta2 - (t.beta2 - t.kappa - 0.5)).abs() < 1e-15);
    // [A,B]C⁻² acts trivially modulo 1
    let r = act_twist(&heisenberg_relations()[0], &t);
    for (x, y) in [(r.alpha1, t.alpha1), (r.beta1, t.beta1), (r.beta2, t.beta2), (r.kappa, t.kappa)] {
        assert!(frac_dist(x - y) < 1e-12, "{x} {y}");
    }
    // inverses undo the action exactly
    for s in ["A B", "S T^-1 C", "T S A^-1"] {
        let back = act_twist(&g(s).inverse(), &act_twist(&g(s), &t));
        assert!((back.alpha1 - t.alpha1).abs() + (back.beta1 - t.beta1).abs() + (back.beta2 - t.beta2).abs() < 1e-14);
    }
}

#[test]
fn sl2_twist_matches_symplectic_characteristic_rule() {
    // (−β̃; α̃) = M(−β; α) + ½(−diag ABᵀ; diag CDᵀ), read off the embedded matrix
    let t = tw();
    for s in ["S", "T", "S^-1", "T^-1"] {
        let m = *g(s).matrix();
        let (a, bb, cc, d) = (m[(0, 0)] as f64, m[(0, 2)] as f64, m[(2, 0)] as f64, m[(2, 2)] as f64);
        let beta = -(a * -t.beta1 + bb * t.alpha1 - 0.5 * a * bb);
        let alpha = cc * -t.beta1 + d * t.alpha1 + 0.5 * cc * d;
        let u = act_twist(&g(s), &t);
        assert!(frac_dist(u.alpha1 - alpha) < 1e-14 && frac_dist(u.beta1 - beta) < 1e-14, "{s}");
    }
}

#[test]
fn multiplier_examples() {
    let t0 = TwistConfig { alpha1: 0.0, ..tw() };
    assert!((chi_multiplier(&g("T"), &t0) - (-I * std::f64::consts::PI / 12.0).exp()).norm() < 1e-15);
    let t = tw();
    let k = t.kappa;
    assert!((chi_multiplier(&g("C"), &t) - (-I * std::f64::consts::PI * k * (k + 1.0)).exp()).norm() < 1e-15);
    assert!((chi_multiplier(&g("S"), &t) - (-I * 2.0 * std::f64::consts::PI * t.alpha1 * t.beta1).exp()).norm() < 1e-15);
    for s in ["A", "B^-1", "S T", "T^-1 C S"] {
        let e = g(s);
        let round = chi_multiplier(&e.inverse().compose(&e), &t);
        assert!((round - 1.0).norm() < 1e-14, "{s}");
        // cocycle along a split word
        let (g1, g2) = (g("A S^-1"), e.clone());
        let lhs = chi_multiplier(&g1.compose(&g2), &t);
        let rhs = chi_multiplier(&g1, &act_twist(&g2, &t)) * chi_multiplier(&g2, &t);
        assert!((lhs - rhs).norm() < 1e-14);
    }
}

#[test]
fn generator_invariance() {
    let b = SeriesBudget::default();
    let (p, t) = (base(), tw());
    let id = invariance_residual(&GroupElement::identity(), &p, &t, 12, 256, &b).unwrap();
    assert_eq!((id.residual, id.det_residual), (0.0, 0.0));
    for (s, tol) in [("T", 1e-6), ("A", 1e-6), ("B", 1e-6), ("C", 1e-6), ("S", 1e-5), ("T^-1", 1e-6), ("B^-1", 1e-6)] {
        let r = invariance_residual(&g(s), &p, &t, 12, 256, &b).unwrap();
        assert!(r.residual < tol, "{s}: {r:?}");
        assert!(r.det_residual < 1e-6, "{s}: {r:?}");
    }
}

#[test]
fn word_invariance_and_fault_injection() {
    let b = SeriesBudget::default();
    let (p, t) = (base(), tw());
    let e = g("A T^-1 B");
    let r = invariance_residual(&e, &p, &t, 12, 256, &b).unwrap();
    assert!(r.residual < 1e-6, "{r:?}");
    let bad = invariance_with_chi(&e, &p, &t, r.chi * 1.01, 12, 256, &b).unwrap();
    assert!((bad.residual - 0.01).abs() < 1e-4, "{bad:?}");
}

#[test]
fn relation_word_fixes_the_lift() {
    // [A,B]C⁻² returns to the same point and winding
    let b = SeriesBudget::default();
    let (p, t) = (base(), tw());
    let r = &heisenberg_relations()[0];
    let q = act_point(r, &p, &b).unwrap();
    assert!((q.w - p.w).norm() < 1e-12 && q.m == p.m, "{q:?}");
    let u = act_twist(r, &t);
    let chi = chi_multiplier(r, &t);
    // Ẑ(u)(x̂) = χ·Ẑ(t)(x̂) with u ≡ t mod 1; β₂ shifts by an integer n give the factor e^{2πinκ}
    let n = (u.beta2 - t.beta2).round();
    let expected = (I * 2.0 * std::f64::consts::PI * n * t.kappa).exp();
    assert!((chi - expected).norm() < 1e-12, "chi {chi}, shift {n}");
}

#[test]
fn image_outside_domain_is_rejected() {
    let b = SeriesBudget::default();
    let far = LiftedPoint::new(c(0.0, 1.0), c(0.02, 0.0), c(1e-2, 0.0), 0);
    assert!(act_point(&g("T"), &far, &b).is_err());
}
