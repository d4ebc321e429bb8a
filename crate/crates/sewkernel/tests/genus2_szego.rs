use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sewkernel::determinants::minor_expansion_det;
use sewkernel::elliptic_core::{SeriesBudget, Tau, TWO_PI_I};
use sewkernel::genus2_szego::*;
use sewkernel::szego_genus1::{SewingConfig, TwistConfig};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn sew(rho: C64) -> SewingConfig {
    SewingConfig::new(Tau::new(c(0.0, 1.0)).unwrap(), c(1.3, 0.9), rho)
}

fn tw() -> TwistConfig {
    TwistConfig::new(0.2, 0.1, 0.3, 0.3, 1).unwrap()
}

fn ctx(rho: C64, t: &TwistConfig, n: usize) -> GenusTwo {
    GenusTwo::new(&sew(rho), t, n, 256, &SeriesBudget::default()).unwrap()
}

const X: C64 = C64::new(0.5, 1.7);
const Y: C64 = C64::new(-0.6, -1.5);

#[test]
fn zero_truncation_is_genus_one_kernel() {
    let g = ctx(c(1e-3, 0.0), &tw(), 0);
    assert_eq!(g.eval(X, Y).unwrap(), g.ker.s(X, Y).unwrap());
    assert_eq!(g.det_i_minus_t(), c(1.0, 0.0));
}

#[test]
fn small_rho_limit() {
    // the correction is of order |ρ|^{½−|κ|}
    let t = tw();
    let corr = |r: f64| {
        let g = ctx(c(0.0, 0.4).exp() * r, &t, 10);
        (g.eval(X, Y).unwrap() - g.ker.s(X, Y).unwrap()).norm()
    };
    let (c1, c2) = (corr(1e-4), corr(1e-6));
    let order = (c1 / c2).log10() / 2.0;
    assert!(c2 < 1e-1 && (order - 0.2).abs() < 0.05, "order {order}");
}

#[test]
fn truncation_refinement_is_geometric() {
    let rho = c(0.0, 0.4).exp() * 2e-2;
    let vals: Vec<C64> = [4, 8, 12, 16].iter().map(|&n| ctx(rho, &tw(), n).eval(X, Y).unwrap()).collect();
    let d: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    assert!(d[1] < 0.5 * d[0] && d[2] < 0.5 * d[1], "{d:?}");
}

#[test]
fn local_singularity() {
    let g = ctx(c(1e-3, 2e-4), &tw(), 8);
    for x in [c(0.4, 1.9), c(-1.0, -0.3)] {
        let y = x + c(2e-7, 1e-7);
        assert!(((x - y) * g.eval(x, y).unwrap() - 1.0).norm() < 1e-5);
    }
}

#[test]
fn a_cycle_multiplier() {
    let t = tw();
    let g = ctx(c(0.0, 0.4).exp() * 1e-3, &t, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = c(rng.gen_range(-2.5..-0.8), rng.gen_range(-2.0..2.0));
        let y = c(rng.gen_range(0.2..2.5), rng.gen_range(2.2..3.0));
        let (v0, v1) = (g.eval(x, y).unwrap(), g.eval(x + TWO_PI_I, y).unwrap());
        assert!((v1 / v0 - t.phi1()).norm() < 1e-8, "ratio {}", v1 / v0);
    }
}

#[test]
fn branch_coherence() {
    // B → B + 2 with log ρ → log ρ − 2πi keeps l̂ and every sheet-dependent power fixed
    let t = tw();
    let t2 = TwistConfig { b: t.b + 2, ..t };
    let rho = c(0.0, 0.4).exp() * 1e-3;
    let g1 = ctx(rho, &t, 10);
    let g2 = GenusTwo::new(&sew(rho).with_sheet(-1), &t2, 10, 256, &SeriesBudget::default()).unwrap();
    let (v1, v2) = (g1.eval(X, Y).unwrap(), g2.eval(X, Y).unwrap());
    assert!((v1 - v2).norm() < 1e-10 * v1.norm());
    assert!((g1.det_i_minus_t() - g2.det_i_minus_t()).norm() < 1e-10);
}

#[test]
fn sewing_condition_across_the_handle() {
    let t = tw();
    let rho = c(0.0, 0.4).exp() * 1e-3;
    let g = ctx(rho, &t, 16);
    let root = rho.norm().sqrt();
    for a in 1..=2 {
        for ang in [0.3, 2.0, -2.5] {
            let r = sewing_residual(&g, a, c(0.0, ang).exp() * 1.3 * root, c(2.0, 1.5)).unwrap();
            assert!(r.residual < 1e-10, "{r:?}");
            assert_eq!(r.sign, 1);
            assert!(r.by_sign[1] > 1e-2);
        }
    }
    assert!(sewing_residual(&g, 1, c(1e-6, 0.0), c(2.0, 1.5)).is_err());
}

#[test]
fn sewing_condition_untwisted() {
    // κ = 0 with θ₂ = −1 (β₂ = 0): both sign conventions coincide
    let t = TwistConfig::new(0.0, 0.25, 0.0, 0.0, 1).unwrap();
    let rho = c(2e-3, 0.0);
    let g = ctx(rho, &t, 12);
    let r = sewing_residual(&g, 2, c(0.0, 1.0).exp() * 1.2 * rho.norm().sqrt(), c(-2.0, 1.0)).unwrap();
    assert!(r.by_sign[0] < 1e-10 && r.by_sign[1] < 1e-10);
}

#[test]
fn sewing_residual_decreases_with_n() {
    let t = tw();
    let rho = c(0.0, -1.1).exp() * 4e-2;
    let res: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&n| {
            let g = GenusTwo::new(&sew(rho).with_radii(0.3, 0.3), &t, n, 256, &SeriesBudget::default()).unwrap();
            sewing_residual(&g, 1, c(0.0, 0.5).exp() * 0.22, c(-2.0, 2.0)).unwrap().residual
        })
        .collect();
    assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
}

#[test]
fn bordered_determinant_factorizes() {
    // det[[S_κ, −ξHD],[H̄ᵀ, I−T]] = det S^(2)·det(I−T)
    let t = tw();
    for n in [3, 10] {
        let g = ctx(c(0.0, 0.9).exp() * 5e-3, &t, n);
        let xs = [c(0.5, 1.7), c(-1.1, 0.4)];
        let ys = [c(-0.6, -1.5), c(2.1, -0.7)];
        let lx: Vec<C64> = xs.iter().map(|&x| g.ker.ell(x).unwrap()).collect();
        let ly: Vec<C64> = ys.iter().map(|&y| g.ker.ell(y).unwrap()).collect();
        let s = DMatrix::from_fn(2, 2, |i, j| g.ker.s_with_ell(xs[i], lx[i], ys[j], ly[j]).unwrap());
        let rows: Vec<Vec<C64>> = (0..2).map(|i| g.h_row(xs[i], lx[i]).unwrap()).collect();
        let cols: Vec<Vec<C64>> = (0..2).map(|j| g.hbar_vec(ys[j], ly[j]).unwrap()).collect();
        let p = 2 * n;
        let u = DMatrix::from_fn(2, p, |i, k| -rows[i][k]);
        let v = DMatrix::from_fn(p, 2, |k, j| cols[j][k]);
        let s2 = DMatrix::from_fn(2, 2, |i, j| g.eval_with_ell(xs[i], lx[i], ys[j], ly[j]).unwrap());
        let rhs = s2.lu().determinant() * g.det_i_minus_t();
        let lhs = if p <= 12 {
            minor_expansion_det(&(-&g.t.data), Some((&s, &u, &v))).unwrap()
        } else {
            let full = DMatrix::from_fn(2 + p, 2 + p, |i, j| match (i < 2, j < 2) {
                (true, true) => s[(i, j)],
                (true, false) => u[(i, j - 2)],
                (false, true) => v[(i - 2, j)],
                _ => -g.t.data[(i - 2, j - 2)] + if i == j { 1.0 } else { 0.0 },
            });
            full.lu().determinant()
        };
        assert!((lhs - rhs).norm() < 1e-8 * rhs.norm(), "n = {n}");
    }
}

#[test]
fn excised_points_and_domain() {
    let g = ctx(c(1e-3, 0.0), &tw(), 4);
    assert!(g.eval(c(1e-4, 0.0), Y).is_err());
    assert!(s2_eval(X, Y, &sew(c(0.0, 0.0)), &tw(), 4, 64).is_err());
    let e = s2_eval(X, Y, &sew(c(1e-3, 0.0)), &tw(), 4, 64).unwrap();
    assert_eq!((e.n, e.quad_m, e.branch.b), (4, 64, 1));
    let report = domain_check(&SewingConfig::new(Tau::new(c(0.0, 1.0)).unwrap(), c(0.05, 0.0), c(1e-2, 0.0)));
    assert!(!report.ok && report.margin < 0.0 && report.worst_lambda.norm() < 1e-12);
}
