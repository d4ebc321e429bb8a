//! Genus-one special functions on the lattice `2πi(ℤτ ⊕ ℤ)`: theta functions with
//! characteristics, the prime form `K`, Dedekind eta, Eisenstein series, the
//! Weierstrass-type functions `P_k`, the twisted `P₁`, and the genus-two theta
//! constant.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SewError};

pub const I: C64 = C64::new(0.0, 1.0);
pub const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

const MAX_DOUBLINGS: usize = 4;
const POLE_TOL: f64 = 1e-13;

/// Modulus in the upper half plane with its cached nome `q = e^{2πiτ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tau {
    value: C64,
    q: C64,
}

impl Tau {
    pub fn new(value: C64) -> Result<Self> {
        if !(value.re.is_finite() && value.im.is_finite()) || value.im <= 0.0 {
            return Err(SewError::Domain(format!("tau = {value} is not in the upper half plane")));
        }
        let q = (TWO_PI_I * value).exp();
        if q.norm() >= 1.0 {
            return Err(SewError::Domain(format!("|q| = {} is not below 1", q.norm())));
        }
        Ok(Self { value, q })
    }

    pub fn value(&self) -> C64 {
        self.value
    }

    pub fn q(&self) -> C64 {
        self.q
    }
}

/// Real characteristic `[α; β]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub alpha: f64,
    pub beta: f64,
}

impl Characteristic {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(SewError::Validation("characteristic must be finite".into()));
        }
        Ok(Self { alpha, beta })
    }

    /// Recovers `(α, β)` from multipliers `θ = −e^{−2πiβ}`, `φ = −e^{2πiα}` on principal branches.
    pub fn from_multipliers(theta: C64, phi: C64) -> Self {
        Self {
            alpha: (-phi).arg() / (2.0 * PI),
            beta: -(-theta).arg() / (2.0 * PI),
        }
    }
}

/// Truncation controls shared by every series evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesBudget {
    pub lattice_cutoff: usize,
    pub qseries_cutoff: usize,
    pub rel_tol: f64,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        Self { lattice_cutoff: 8, qseries_cutoff: 32, rel_tol: 1e-16 }
    }
}

impl SeriesBudget {
    pub fn validate(&self) -> Result<()> {
        if self.lattice_cutoff < 4 || self.qseries_cutoff < 4 {
            return Err(SewError::Validation("series cutoffs must be at least 4".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(SewError::Validation("rel_tol must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Lattice point `2πi(mτ + n)`.
pub fn lattice_point(tau: &Tau, m: i64, n: i64) -> C64 {
    TWO_PI_I * (tau.value * m as f64 + n as f64)
}

/// Real coordinates `(u, v)` with `z = 2πi(uτ + v)`.
pub fn lattice_coords(z: C64, tau: &Tau) -> (f64, f64) {
    let s = z / TWO_PI_I;
    let u = s.im / tau.value.im;
    (u, s.re - u * tau.value.re)
}

/// Nearest lattice point to `z`, returned with its indices `(m, n)`.
pub fn nearest_lattice_point(z: C64, tau: &Tau) -> (C64, i64, i64) {
    let (u, v) = lattice_coords(z, tau);
    let (m0, n0) = (u.round() as i64, v.round() as i64);
    let mut best = (lattice_point(tau, m0, n0), m0, n0);
    let mut dist = (z - best.0).norm();
    for dm in -2..=2 {
        for dn in -3..=3 {
            let p = lattice_point(tau, m0 + dm, n0 + dn);
            let d = (z - p).norm();
            if d < dist {
                dist = d;
                best = (p, m0 + dm, n0 + dn);
            }
        }
    }
    best
}

/// `D(q)`: length of the shortest nonzero lattice vector.
pub fn lattice_min(tau: &Tau) -> f64 {
    let mut best = 2.0 * PI;
    let mut m = 1i64;
    while 2.0 * PI * m as f64 * tau.value.im < best {
        let n0 = (-(m as f64) * tau.value.re).round() as i64;
        for n in n0 - 1..=n0 + 1 {
            best = best.min(lattice_point(tau, m, n).norm());
        }
        m += 1;
    }
    best
}

/// Outward walk `t ↦ t·r, r ↦ r·q` over Gaussian summands.
struct Walk {
    t: C64,
    r: C64,
    q: C64,
}

impl Walk {
    fn next(&mut self) -> C64 {
        self.t *= self.r;
        self.r *= self.q;
        self.t
    }
}

fn exhausted(what: &str) -> SewError {
    SewError::BudgetExhausted(what.to_string())
}

/// Theta series with complex-extended `β`, summed outward from the dominant index.
pub fn theta_series(alpha: f64, beta: C64, z: C64, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    let t = tau.value;
    let zz = z + TWO_PI_I * beta;
    let center = zz.re / (2.0 * PI * t.im);
    let m0 = (center - alpha).round() + alpha;
    let t0 = (I * PI * t * m0 * m0 + zz * m0).exp();
    let mut up = Walk { t: t0, r: (I * PI * t * (2.0 * m0 + 1.0) + zz).exp(), q: tau.q };
    let mut dn = Walk { t: t0, r: (-(I * PI * t * (2.0 * m0 - 1.0)) - zz).exp(), q: tau.q };
    let mut sum = t0;
    let mut scale = t0.norm();
    let mut c = b.lattice_cutoff;
    for _ in 0..c {
        let (a, d) = (up.next(), dn.next());
        sum += a + d;
        scale += a.norm() + d.norm();
    }
    for _ in 0..MAX_DOUBLINGS {
        let mut tail = C64::new(0.0, 0.0);
        let mut tail_abs = 0.0;
        for _ in 0..c {
            let (a, d) = (up.next(), dn.next());
            tail += a + d;
            tail_abs += a.norm() + d.norm();
        }
        sum += tail;
        scale += tail_abs;
        if tail_abs <= b.rel_tol * scale || !scale.is_finite() {
            return finite(sum, "theta series");
        }
        c *= 2;
    }
    Err(exhausted("theta series"))
}

fn finite(v: C64, what: &str) -> Result<C64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(SewError::Domain(format!("{what} overflowed")))
    }
}

/// `ϑ[α;β](z, τ)` by its lattice series.
pub fn theta_char_g1(c: Characteristic, z: C64, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    b.validate()?;
    theta_series(c.alpha, C64::new(c.beta, 0.0), z, tau, b)
}

/// `ϑ₁` paired into `2i Σ (−1)ⁿ e^{iπ(n+½)²τ} sinh((n+½)z)`, accurate near the zero at the origin.
fn theta1_sinh(z: C64, tau: &Tau, b: &SeriesBudget, deriv: bool) -> Result<C64> {
    let t = tau.value;
    let mut g = (I * PI * t * 0.25).exp();
    let mut r = (I * PI * t * 2.0).exp();
    let term = |n: usize, g: C64| {
        let m = n as f64 + 0.5;
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        if deriv {
            g * (s * m)
        } else {
            g * (z * m).sinh() * s
        }
    };
    let mut n = 0usize;
    let mut sum = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    let mut c = b.lattice_cutoff;
    while n < c {
        let v = term(n, g);
        sum += v;
        scale += v.norm();
        g *= r;
        r *= tau.q;
        n += 1;
    }
    for _ in 0..MAX_DOUBLINGS {
        let mut tail_abs = 0.0;
        while n < 2 * c {
            let v = term(n, g);
            sum += v;
            tail_abs += v.norm();
            g *= r;
            r *= tau.q;
            n += 1;
        }
        scale += tail_abs;
        if tail_abs <= b.rel_tol * scale {
            return finite(sum * C64::new(0.0, 2.0), "theta1");
        }
        c *= 2;
    }
    Err(exhausted("theta1 series"))
}

/// Per-modulus cache of `ϑ₁′(0)` and `D(q)` for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Jacobi {
    pub tau: Tau,
    pub budget: SeriesBudget,
    dtheta1: C64,
    dmin: f64,
}

impl Jacobi {
    pub fn new(tau: Tau, budget: SeriesBudget) -> Result<Self> {
        budget.validate()?;
        let dtheta1 = theta1_sinh(C64::new(0.0, 0.0), &tau, &budget, true)?;
        Ok(Self { tau, budget, dtheta1, dmin: lattice_min(&tau) })
    }

    /// `ϑ₁′(0, τ)`.
    pub fn dtheta1(&self) -> C64 {
        self.dtheta1
    }

    /// `D(q)`.
    pub fn lattice_min(&self) -> f64 {
        self.dmin
    }

    pub fn theta1(&self, z: C64) -> Result<C64> {
        if z.norm() < 1.0 {
            theta1_sinh(z, &self.tau, &self.budget, false)
        } else {
            theta_series(0.5, C64::new(0.5, 0.0), z, &self.tau, &self.budget)
        }
    }

    pub fn theta(&self, alpha: f64, beta: C64, z: C64) -> Result<C64> {
        theta_series(alpha, beta, z, &self.tau, &self.budget)
    }

    /// Distance from `z` to the nearest lattice point.
    pub fn lattice_distance(&self, z: C64) -> f64 {
        (z - nearest_lattice_point(z, &self.tau).0).norm()
    }

    /// `K(z) = ϑ₁(z)/ϑ₁′(0)`, refusing points at the lattice.
    pub fn k(&self, z: C64) -> Result<C64> {
        let d = self.lattice_distance(z);
        if d < POLE_TOL * self.dmin {
            return Err(SewError::PoleProximity(format!("K evaluated {d:e} from a lattice point")));
        }
        Ok(self.theta1(z)? / self.dtheta1)
    }
}

/// `K(z, τ) = ϑ₁(z)/∂_zϑ₁(0)`.
pub fn prime_form_k(z: C64, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    Jacobi::new(*tau, *b)?.k(z)
}

/// `η(τ) = q^{1/24} ∏ (1 − qⁿ)`.
pub fn dedekind_eta(tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    b.validate()?;
    let q = tau.q;
    let mut prod = C64::new(1.0, 0.0);
    let mut qn = C64::new(1.0, 0.0);
    let mut n = 0usize;
    let mut c = b.qseries_cutoff;
    while n < c {
        qn *= q;
        prod *= C64::new(1.0, 0.0) - qn;
        n += 1;
    }
    for _ in 0..MAX_DOUBLINGS {
        let before = prod;
        while n < 2 * c {
            qn *= q;
            prod *= C64::new(1.0, 0.0) - qn;
            n += 1;
        }
        if (prod - before).norm() <= b.rel_tol * prod.norm() {
            return Ok((TWO_PI_I * tau.value / 24.0).exp() * prod);
        }
        c *= 2;
    }
    Err(exhausted("eta product"))
}

/// `ln((n)!)` by summation.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// `ζ(s)` for real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    const N: f64 = 12.0;
    const B2J: [f64; 6] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
    let mut sum: f64 = (1..N as usize).map(|n| (n as f64).powf(-s)).sum();
    sum += N.powf(1.0 - s) / (s - 1.0) + 0.5 * N.powf(-s);
    let mut rising = s;
    let mut fact = 2.0;
    let mut pw = N.powf(-s - 1.0);
    for (j, bern) in B2J.iter().enumerate() {
        sum += bern / fact * rising * pw;
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        pw /= N * N;
    }
    sum
}

/// Constant term `2ζ(k)/(2πi)^k` of `E_k` (equal to `−B_k/k!`).
fn eisenstein_constant(k: usize) -> f64 {
    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * 2.0 * zeta(k as f64) / (2.0 * PI).powi(k as i32)
}

/// `Σ_{j≥1} j^{k−1}/(k−1)! · f(j)` with `f(j)` decaying at least like `ρ^j`.
fn weighted_power_sum(k: usize, decay: f64, mut f: impl FnMut(usize) -> C64, rel_tol: f64, what: &str) -> Result<C64> {
    let lf = ln_factorial(k - 1);
    let peak = if decay < 1.0 { (k as f64 - 1.0) / -decay.ln() } else { f64::INFINITY };
    if !peak.is_finite() {
        return Err(exhausted(what));
    }
    let cap = 200_000usize;
    let mut acc = C64::new(0.0, 0.0);
    for j in 1..cap {
        let w = ((k as f64 - 1.0) * (j as f64).ln() - lf).exp();
        let term = f(j) * w;
        acc += term;
        if j as f64 > peak && term.norm() <= rel_tol * acc.norm().max(1e-300) {
            return Ok(acc);
        }
        if j as f64 > peak && w * decay.powi(j as i32) < 1e-300 {
            return Ok(acc);
        }
    }
    Err(exhausted(what))
}

/// `E_k(τ) = 2ζ(k)/(2πi)^k + (2/(k−1)!) Σ n^{k−1} qⁿ/(1 − qⁿ)`, the normalization under which
/// `P₂(z) = 1/z² + Σ_{k≥2} (k−1) E_k z^{k−2}`.
pub fn eisenstein(k: usize, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    if k < 2 || k % 2 == 1 {
        return Err(SewError::Domain(format!("Eisenstein weight {k} must be even and at least 2")));
    }
    b.validate()?;
    let q = tau.q;
    let tail = weighted_power_sum(
        k,
        q.norm(),
        |n| {
            let qn = q.powu(n as u32);
            qn / (C64::new(1.0, 0.0) - qn) * 2.0
        },
        b.rel_tol,
        "Eisenstein series",
    )?;
    Ok(tail + eisenstein_constant(k))
}

/// `Σ_{m∈ℤ} (z − 2πim)^{−k}` for `k ≥ 2`.
fn strip_sum(k: usize, z: C64, rel_tol: f64) -> Result<C64> {
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    if z.re >= 1.0 {
        let e = (-z).exp();
        return weighted_power_sum(k, e.norm(), |j| e.powu(j as u32), rel_tol, "strip sum");
    }
    if z.re <= -1.0 {
        let e = z.exp();
        return Ok(weighted_power_sum(k, e.norm(), |j| e.powu(j as u32), rel_tol, "strip sum")? * sign_k);
    }
    let shift = (z.im / (2.0 * PI)).round();
    let z = z - TWO_PI_I * shift;
    // m ≠ 0 terms: (−1)^k Σ_j C(k+j−1, j) z^j (2πi)^{−(k+j)} (1 + (−1)^{k+j}) ζ(k+j)
    let x = z / TWO_PI_I;
    let mut coef = TWO_PI_I.powi(-(k as i32)) * sign_k;
    let mut acc = z.powi(-(k as i32));
    let mut j = 0usize;
    loop {
        if (k + j) % 2 == 0 {
            let term = coef * 2.0 * zeta((k + j) as f64);
            acc += term;
            if j > 4 && term.norm() <= rel_tol * acc.norm() {
                return Ok(acc);
            }
        }
        coef *= x * ((k + j) as f64 / (j + 1) as f64);
        j += 1;
        if j > 2000 {
            return Err(exhausted("strip sum"));
        }
    }
}

/// `P_k(z, τ)` for `k ≥ 2`: `P₂ = ℘ + E₂` and `P_{k+1} = −(1/k)∂_z P_k`.
pub fn weierstrass_p(k: usize, z: C64, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    if k < 2 {
        return Err(SewError::Domain("weierstrass_P requires k >= 2".into()));
    }
    b.validate()?;
    let (p, _, _) = nearest_lattice_point(z, tau);
    let z = z - p;
    if z.norm() < POLE_TOL * lattice_min(tau) {
        return Err(SewError::PoleProximity(format!("P_{k} evaluated at a lattice point")));
    }
    let m_sum = strip_sum(k, z, b.rel_tol)?;
    let q = tau.q;
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    let (em, ep) = ((-z).exp(), z.exp());
    let decay = q.norm() * em.norm().max(ep.norm());
    let q_part = weighted_power_sum(
        k,
        decay,
        |j| {
            let qj = q.powu(j as u32);
            ((em * q).powu(j as u32) + (ep * q).powu(j as u32) * sign_k) / (C64::new(1.0, 0.0) - qj)
        },
        b.rel_tol,
        "P_k q-series",
    )?;
    Ok(m_sum + q_part)
}

/// Genus-one Szegő kernel `P₁[θ₁;φ₁](z) = ϑ[α₁;β₁](z)/(ϑ[α₁;β₁](0)·K(z))`.
pub fn twisted_p1(theta1: C64, phi1: C64, z: C64, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    let one = C64::new(1.0, 0.0);
    if (theta1 - one).norm() < 1e-12 && (phi1 - one).norm() < 1e-12 {
        return Err(SewError::UndefinedKernel);
    }
    let c = Characteristic::from_multipliers(theta1, phi1);
    let jac = Jacobi::new(*tau, *b)?;
    let beta = C64::new(c.beta, 0.0);
    let t0 = jac.theta(c.alpha, beta, C64::new(0.0, 0.0))?;
    if t0.norm() < 1e-12 {
        return Err(SewError::DegenerateCharacteristic(t0.norm()));
    }
    Ok(jac.theta(c.alpha, beta, z)? / (t0 * jac.k(z)?))
}

/// `θ^{(2)}[α;β](0|Ω) = Σ_{n∈ℤ²} e^{iπ(n+α)·Ω·(n+α) + 2πi(n+α)·β}`.
pub fn theta_char_g2(alpha: [f64; 2], beta: [f64; 2], omega: [[C64; 2]; 2], b: &SeriesBudget) -> Result<C64> {
    b.validate()?;
    if (omega[0][1] - omega[1][0]).norm() > 1e-12 * (omega[0][1].norm() + 1.0) {
        return Err(SewError::Domain("period matrix must be symmetric".into()));
    }
    let (a, bb, d) = (omega[0][0].im, omega[0][1].im, omega[1][1].im);
    if !(a > 0.0 && a * d - bb * bb > 0.0) {
        return Err(SewError::Domain("Im Omega is not positive definite".into()));
    }
    let c0 = [(-alpha[0]).round() as i64, (-alpha[1]).round() as i64];
    let term = |n0: i64, n1: i64| {
        let m = [n0 as f64 + alpha[0], n1 as f64 + alpha[1]];
        let quad = omega[0][0] * m[0] * m[0] + omega[0][1] * (2.0 * m[0] * m[1]) + omega[1][1] * m[1] * m[1];
        (I * PI * quad + TWO_PI_I * (m[0] * beta[0] + m[1] * beta[1])).exp()
    };
    let shell = |lo: i64, hi: i64| {
        let mut s = C64::new(0.0, 0.0);
        let mut s_abs = 0.0;
        for i in -hi..=hi {
            for j in -hi..=hi {
                if i.abs().max(j.abs()) < lo {
                    continue;
                }
                let v = term(c0[0] + i, c0[1] + j);
                s += v;
                s_abs += v.norm();
            }
        }
        (s, s_abs)
    };
    let mut c = b.lattice_cutoff as i64;
    let (mut sum, mut scale) = shell(0, c);
    for _ in 0..MAX_DOUBLINGS {
        let (t, t_abs) = shell(c + 1, 2 * c);
        sum += t;
        scale += t_abs;
        if t_abs <= b.rel_tol * scale {
            return Ok(sum);
        }
        c *= 2;
    }
    Err(exhausted("genus-two theta"))
}
