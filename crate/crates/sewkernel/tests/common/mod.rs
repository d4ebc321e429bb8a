#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use sewkernel::elliptic_core::{dedekind_eta, Jacobi, SeriesBudget};
use sewkernel::partition::z1_twisted_2pt;
use sewkernel::quad::circle;
use sewkernel::szego_genus1::{SewingConfig, TwistConfig, TwistedKernel};

pub type Coefficients = HashMap<(Vec<usize>, Vec<usize>), C64>;

/// Shape `(s1, s2, t1, t2)`: `s1` points `x = w + u`, `s2` points `x = u`, `t1` points `y = v`,
/// `t2` points `y = w + v`.
pub type Shape = (usize, usize, usize, usize);

/// Node circles of the `2p` variables: `u_i` on `|u| = rx(1 − δi)`, `v_j` on `|v| = ry(1 − δj)`, so
/// that no two variables meet and every `|u_i|` exceeds every `|v_j|`.
fn nodes(p: usize, m: usize, (rx, ry): (f64, f64)) -> Vec<Vec<C64>> {
    let shrink = |i: usize| 1.0 - 0.08 * i as f64;
    (0..p).map(|i| circle(rx * shrink(i), m)).chain((0..p).map(|j| circle(ry * shrink(j), m))).collect()
}

/// Coefficients of `Π u_i^{k_i−1} Π v_j^{l_j−1}` of `f` by an `m`-point trapezoid rule in every
/// variable on the circles of [`nodes`]. `f` receives the node index of each variable.
/// Keys are the ordered mode tuples `(k₁ ⊕ k₂, l₁ ⊕ l₂)` with all modes `≤ max_mode`.
fn extract(p: usize, max_mode: usize, m: usize, radii: (f64, f64), f: impl Fn(&[usize]) -> C64) -> Coefficients {
    let pts = nodes(p, m, radii);
    let dims = 2 * p;
    let tuples: Vec<Vec<usize>> = (0..max_mode.pow(dims as u32))
        .map(|mut i| {
            (0..dims)
                .map(|_| {
                    let d = i % max_mode + 1;
                    i /= max_mode;
                    d
                })
                .collect()
        })
        .collect();
    let total = m.pow(dims as u32);
    let mut acc = vec![C64::new(0.0, 0.0); tuples.len()];
    let mut idx = vec![0usize; dims];
    for _ in 0..total {
        let val = f(&idx);
        let loc: Vec<C64> = (0..dims).map(|d| pts[d][idx[d]]).collect();
        for (t, a) in tuples.iter().zip(acc.iter_mut()) {
            let mut mono = C64::new(1.0, 0.0);
            for d in 0..dims {
                mono *= loc[d].powu(t[d] as u32 - 1);
            }
            *a += val / mono;
        }
        for d in 0..dims {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
        }
    }
    tuples
        .into_iter()
        .zip(acc)
        .map(|(t, a)| ((t[..p].to_vec(), t[p..].to_vec()), a / total as f64))
        .collect()
}

/// Coefficients of the generating form built directly from the ordered product of prime forms
/// for `ψ⁺` at `x_i`, `ψ⁻` at `y_j`, `e^κ` at `w` and `e^{−κ}` at `0`. Local `u^{±κ}` factors are
/// divided out with continuous logarithms anchored to the kernel's puncture logarithms.
pub fn generating_coefficients(sew: &SewingConfig, tw: &TwistConfig, shape: Shape, max_mode: usize, m: usize, radii: (f64, f64)) -> Coefficients {
    let (s1, s2, t1, t2) = shape;
    let b = SeriesBudget::default();
    let jac = Jacobi::new(sew.tau, b).unwrap();
    let ker = TwistedKernel::new(sew, tw, &b).unwrap();
    let (w, k) = (sew.w, tw.kappa);
    let p = s1 + s2;
    assert_eq!(p, t1 + t2);
    let kl = |z: C64| jac.k(z).unwrap().ln();
    let kz = |z: C64| (jac.k(z).unwrap() / z).ln();
    let align = ker.lambda(1, C64::new(0.0, 0.0)).unwrap() - kl(-w);
    let pts = nodes(p, m, radii);
    let th = |z: C64| jac.theta(tw.alpha1, C64::new(tw.beta1, 0.0), z).unwrap();
    let pre = (-kl(w) * k * k).exp() / dedekind_eta(&sew.tau, &b).unwrap();
    extract(p, max_mode, m, radii, |idx| {
        let loc: Vec<C64> = (0..2 * p).map(|d| pts[d][idx[d]]).collect();
        let xs: Vec<C64> = (0..p).map(|i| if i < s1 { w + loc[i] } else { loc[i] }).collect();
        let ys: Vec<C64> = (0..p).map(|j| if j < t1 { loc[p + j] } else { w + loc[p + j] }).collect();
        // ordered insertions ψ⁺(x₁) ψ⁻(y₁) ψ⁺(x₂) ψ⁻(y₂) …: integer powers of K
        let mut ins: Vec<(f64, C64)> = Vec::new();
        for i in 0..p {
            ins.push((1.0, xs[i]));
            ins.push((-1.0, ys[i]));
        }
        let mut val = pre * th(xs.iter().sum::<C64>() - ys.iter().sum::<C64>() + w * k);
        for r in 0..ins.len() {
            for s in r + 1..ins.len() {
                let kv = jac.k(ins[r].1 - ins[s].1).unwrap();
                val *= if ins[r].0 * ins[s].0 > 0.0 { kv } else { kv.inv() };
            }
        }
        let mut log = C64::new(0.0, 0.0);
        for i in 0..p {
            let u = loc[i];
            log += if i < s1 { kz(u) - kl(w + u) } else { kl(u - w) - kz(u) + align };
        }
        for j in 0..p {
            let v = loc[p + j];
            log += if j < t1 { kz(v) - kl(v - w) - align } else { kl(w + v) - kz(v) };
        }
        val * (log * k).exp()
    })
}

/// Coefficients of the genus-one generating form `Z^(1)·det[S_κ(x_i, y_j)]`, evaluated with
/// `ℓ(x) = (−1)^c log z + λ_c(z)` at the puncture `c` of each point and the `±log z` parts
/// dropped, which divides out the local `z^{±κ}` factors.
pub fn gen1_coefficients(sew: &SewingConfig, tw: &TwistConfig, shape: Shape, max_mode: usize, m: usize, radii: (f64, f64)) -> Coefficients {
    let (s1, s2, t1, t2) = shape;
    let b = SeriesBudget::default();
    let ker = TwistedKernel::new(sew, tw, &b).unwrap();
    let p = s1 + s2;
    assert_eq!(p, t1 + t2);
    let z1 = z1_twisted_2pt(sew, tw, &b).unwrap();
    let pts = nodes(p, m, radii);
    // continuous λ on each variable's circle: puncture 2 at w for s1 x's and t2 y's, puncture 1 at 0 otherwise
    let punct: Vec<usize> = (0..2 * p).map(|d| if d < p { if d < s1 { 2 } else { 1 } } else if d - p < t1 { 1 } else { 2 }).collect();
    let lams: Vec<Vec<C64>> = (0..2 * p).map(|d| ker.lambda_circle(punct[d], pts[d][0].norm(), m).unwrap()).collect();
    let at = |d: usize, n: usize| (if punct[d] == 2 { sew.w } else { C64::new(0.0, 0.0) } + pts[d][n], lams[d][n]);
    extract(p, max_mode, m, radii, |idx| {
        let xs: Vec<(C64, C64)> = (0..p).map(|i| at(i, idx[i])).collect();
        let ys: Vec<(C64, C64)> = (0..p).map(|j| at(p + j, idx[p + j])).collect();
        let mat = DMatrix::from_fn(p, p, |i, j| ker.s_with_ell(xs[i].0, xs[i].1, ys[j].0, ys[j].1).unwrap());
        z1 * mat.determinant()
    })
}
