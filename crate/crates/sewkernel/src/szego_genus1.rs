//! The twisted genus-one kernel `S_κ`, its regularization near the punctures, the moment
//! matrix `C`, the half-order differentials `d`, `d̄` and the truncated matrix `T`.
//!
//! Branches. Every κ-power is built from one lifted logarithm `l̂` of `−ρ/K(w)²`. The kernel
//! factorizes as `S_κ(x,y) = e^{κ(ℓ(x)−ℓ(y))}·H(x−y)` with `ℓ(x) = Log(ϑ₁(x−w)/ϑ₁(x))`
//! taken per point. Near the punctures `ℓ` is replaced by `±log z + λ_c(z)`, where `λ_c` is a
//! continuous logarithm on the puncture disc anchored at `λ₂(0) = −Log K(w)` and
//! `λ₁(0) = λ₂(0) − (l̂ − log ρ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::elliptic_core::{nearest_lattice_point, Jacobi, SeriesBudget, Tau, I, TWO_PI_I};
use crate::error::{Result, SewError};
use crate::quad::{circle, par_map, taylor_coeffs, taylor_coeffs_2d};

/// Default number of trapezoid nodes per circle.
pub const DEFAULT_QUAD_M: usize = 256;
/// Relative distance (in units of `D(q)`) below which two points count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-8;

/// The other puncture label: `1̄ = 2`, `2̄ = 1`.
pub fn bar(a: usize) -> usize {
    3 - a
}

fn check_label(a: usize) -> Result<()> {
    if a == 1 || a == 2 {
        Ok(())
    } else {
        Err(SewError::Validation(format!("puncture label {a} must be 1 or 2")))
    }
}

/// Twist parameters `(α₁, β₁, β₂, κ)` and the odd branch integer `B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistConfig {
    pub alpha1: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub kappa: f64,
    #[serde(rename = "B")]
    pub b: i64,
}

impl TwistConfig {
    pub fn new(alpha1: f64, beta1: f64, beta2: f64, kappa: f64, b: i64) -> Result<Self> {
        let t = Self { alpha1, beta1, beta2, kappa, b };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.alpha1, self.beta1, self.beta2, self.kappa].iter().all(|v| v.is_finite()) {
            return Err(SewError::Validation("twist parameters must be finite".into()));
        }
        if !(self.kappa > -0.5 && self.kappa < 0.5) {
            return Err(SewError::Validation(format!("kappa = {} outside (-1/2, 1/2)", self.kappa)));
        }
        if self.b.rem_euclid(2) != 1 {
            return Err(SewError::Validation(format!("B = {} must be odd", self.b)));
        }
        Ok(())
    }

    /// `θ₁ = −e^{−2πiβ₁}`.
    pub fn theta1(&self) -> C64 {
        -(-TWO_PI_I * self.beta1).exp()
    }

    /// `φ₁ = −e^{2πiα₁}`.
    pub fn phi1(&self) -> C64 {
        -(TWO_PI_I * self.alpha1).exp()
    }

    /// `θ₂ = −e^{−2πiβ₂}`.
    pub fn theta2(&self) -> C64 {
        -(-TWO_PI_I * self.beta2).exp()
    }

    /// `φ₂ = −e^{2πiκ}`.
    pub fn phi2(&self) -> C64 {
        -(TWO_PI_I * self.kappa).exp()
    }

    /// `ξ = e^{iπB/2}`.
    pub fn xi(&self) -> C64 {
        (I * PI * self.b as f64 / 2.0).exp()
    }

    /// `k_a − k = κ(−1)^{ā}`.
    pub fn mode_shift(&self, a: usize) -> f64 {
        if a == 1 {
            self.kappa
        } else {
            -self.kappa
        }
    }
}

/// A sewing point `(τ, w, ρ)` with quadrature radii and the sheet of `log ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SewingConfig {
    pub tau: Tau,
    pub w: C64,
    pub rho: C64,
    pub r1: f64,
    pub r2: f64,
    pub sheet: i64,
}

impl SewingConfig {
    /// Uses the default radii `0.45·min(|w − λ*|, D(q))`.
    pub fn new(tau: Tau, w: C64, rho: C64) -> Self {
        let r = Self::default_radius(&tau, w);
        Self { tau, w, rho, r1: r, r2: r, sheet: 0 }
    }

    pub fn with_radii(mut self, r1: f64, r2: f64) -> Self {
        self.r1 = r1;
        self.r2 = r2;
        self
    }

    pub fn with_sheet(mut self, sheet: i64) -> Self {
        self.sheet = sheet;
        self
    }

    pub fn default_radius(tau: &Tau, w: C64) -> f64 {
        let gap = (w - nearest_lattice_point(w, tau).0).norm();
        0.45 * gap.min(crate::elliptic_core::lattice_min(tau))
    }

    /// `min_λ |w − λ|`.
    pub fn puncture_gap(&self) -> f64 {
        (self.w - nearest_lattice_point(self.w, &self.tau).0).norm()
    }

    pub fn radius(&self, c: usize) -> f64 {
        if c == 1 {
            self.r1
        } else {
            self.r2
        }
    }

    /// `Log ρ + 2πi·sheet`.
    pub fn log_rho(&self) -> C64 {
        self.rho.ln() + TWO_PI_I * self.sheet as f64
    }

    /// Checks `(τ, w, ρ) ∈ 𝒟^ρ` and the radius constraints.
    pub fn validate(&self) -> Result<()> {
        let gap = self.puncture_gap();
        let root = self.rho.norm().sqrt();
        if !(self.rho.re.is_finite() && self.rho.im.is_finite() && self.w.re.is_finite() && self.w.im.is_finite()) {
            return Err(SewError::Validation("w and rho must be finite".into()));
        }
        if root <= 0.0 {
            return Err(SewError::Domain("rho = 0 is outside the sewing domain".into()));
        }
        if gap <= 2.0 * root {
            return Err(SewError::Domain(format!("|w - lambda| = {gap:.3e} <= 2|rho|^(1/2) = {:.3e}", 2.0 * root)));
        }
        let dmin = crate::elliptic_core::lattice_min(&self.tau);
        for r in [self.r1, self.r2] {
            if !(r > 0.0 && r < 0.5 * dmin) {
                return Err(SewError::Domain(format!("radius {r} must lie in (0, D(q)/2)")));
            }
        }
        if self.rho.norm() > self.r1 * self.r2 {
            return Err(SewError::Domain("|rho| exceeds r1*r2".into()));
        }
        if self.r1 + self.r2 >= gap {
            return Err(SewError::Domain("annuli at 0 and w overlap".into()));
        }
        Ok(())
    }
}

/// Lifted logarithms fixing every fractional power: `log ρ` and `l̂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub log_rho: C64,
    pub lhat: C64,
}

/// Block index `(a, k)` with `a ∈ {1, 2}`, `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockIndex {
    pub a: usize,
    pub k: usize,
}

impl BlockIndex {
    /// `k_a = k + κ(−1)^{ā}`.
    pub fn k_a(&self, kappa: f64) -> f64 {
        self.k as f64 + if self.a == 1 { kappa } else { -kappa }
    }

    /// Position in the flattening `(1,1..N), (2,1..N)`.
    pub fn flat(&self, n: usize) -> usize {
        (self.a - 1) * n + self.k - 1
    }

    pub fn from_flat(i: usize, n: usize) -> Self {
        Self { a: i / n + 1, k: i % n + 1 }
    }
}

/// A `2N × 2N` truncation indexed by pairs of [`BlockIndex`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub n: usize,
    pub data: DMatrix<C64>,
}

impl BlockMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: DMatrix::zeros(2 * n, 2 * n) }
    }

    pub fn get(&self, a: usize, k: usize, b: usize, l: usize) -> C64 {
        self.data[(BlockIndex { a, k }.flat(self.n), BlockIndex { a: b, k: l }.flat(self.n))]
    }

    /// Leading `2m × 2m` truncation (`m ≤ n`).
    pub fn truncate(&self, m: usize) -> Self {
        let idx: Vec<usize> = (0..m).chain(self.n..self.n + m).collect();
        Self { n: m, data: DMatrix::from_fn(2 * m, 2 * m, |i, j| self.data[(idx[i], idx[j])]) }
    }
}

/// Evaluation context for `S_κ` at fixed `(τ, w)`, twist and branch.
#[derive(Clone, Debug)]
pub struct TwistedKernel {
    pub jac: Jacobi,
    pub w: C64,
    pub twist: TwistConfig,
    pub branch: Branch,
    pub radii: [f64; 2],
    theta_kw: C64,
    k_w: C64,
    lam0: [C64; 2],
}

impl TwistedKernel {
    /// Branch `l̂ = iπB + log ρ − 2 Log K(w)`.
    pub fn new(sew: &SewingConfig, tw: &TwistConfig, b: &SeriesBudget) -> Result<Self> {
        let jac = Jacobi::new(sew.tau, *b)?;
        let k_w = jac.k(sew.w)?;
        let log_rho = sew.log_rho();
        let lhat = I * PI * tw.b as f64 + log_rho - k_w.ln() * 2.0;
        Self::build(jac, sew, tw, Branch { log_rho, lhat }, k_w)
    }

    /// Explicit lifted logarithm `l̂`.
    pub fn with_lhat(sew: &SewingConfig, tw: &TwistConfig, b: &SeriesBudget, lhat: C64) -> Result<Self> {
        let jac = Jacobi::new(sew.tau, *b)?;
        let k_w = jac.k(sew.w)?;
        Self::build(jac, sew, tw, Branch { log_rho: sew.log_rho(), lhat }, k_w)
    }

    fn build(jac: Jacobi, sew: &SewingConfig, tw: &TwistConfig, branch: Branch, k_w: C64) -> Result<Self> {
        tw.validate()?;
        let theta_kw = jac.theta(tw.alpha1, C64::new(tw.beta1, 0.0), sew.w * tw.kappa)?;
        if theta_kw.norm() < 1e-12 {
            return Err(SewError::DegenerateCharacteristic(theta_kw.norm()));
        }
        let lam2 = -k_w.ln();
        let lam1 = lam2 - (branch.lhat - branch.log_rho);
        Ok(Self {
            jac,
            w: sew.w,
            twist: *tw,
            branch,
            radii: [sew.r1, sew.r2],
            theta_kw,
            k_w,
            lam0: [lam1, lam2],
        })
    }

    pub fn kappa(&self) -> f64 {
        self.twist.kappa
    }

    /// `ϑ[α₁;β₁](κw)`.
    pub fn theta_kw(&self) -> C64 {
        self.theta_kw
    }

    /// `K(w)`.
    pub fn k_w(&self) -> C64 {
        self.k_w
    }

    /// `ξ = K(w)·e^{l̂/2}·e^{−log ρ/2}`, equal to `e^{iπB/2}` on the default branch.
    pub fn xi(&self) -> C64 {
        self.k_w * ((self.branch.lhat - self.branch.log_rho) * 0.5).exp()
    }

    /// `ρ^x = e^{x log ρ}` on the recorded sheet.
    pub fn rho_pow(&self, x: f64) -> C64 {
        (self.branch.log_rho * x).exp()
    }

    /// Torus point for local coordinate `z` at puncture `c`.
    pub fn pt(&self, c: usize, z: C64) -> C64 {
        if c == 1 {
            z
        } else {
            z + self.w
        }
    }

    /// `ϑ₁(x − w)/ϑ₁(x)`.
    pub fn ratio(&self, x: C64) -> Result<C64> {
        Ok(self.jac.theta1(x - self.w)? / self.jac.theta1(x)?)
    }

    /// Principal `ℓ(x) = Log(ϑ₁(x − w)/ϑ₁(x))`.
    pub fn ell(&self, x: C64) -> Result<C64> {
        self.check_off_punctures(x)?;
        Ok(self.ratio(x)?.ln())
    }

    fn check_off_punctures(&self, x: C64) -> Result<()> {
        let tol = COINCIDENCE_TOL * self.jac.lattice_min();
        for (name, c) in [("0", C64::new(0.0, 0.0)), ("w", self.w)] {
            let d = self.jac.lattice_distance(x - c);
            if d < tol {
                return Err(SewError::PoleProximity(format!("point within {d:e} of the puncture {name}")));
            }
        }
        Ok(())
    }

    /// `H(u) = ϑ[α₁;β₁](u + κw)/(ϑ[α₁;β₁](κw)·K(u))`.
    pub fn h(&self, u: C64) -> Result<C64> {
        let d = self.jac.lattice_distance(u);
        if d < COINCIDENCE_TOL * self.jac.lattice_min() {
            return Err(SewError::Coincident(d));
        }
        self.h_raw(u)
    }

    fn h_raw(&self, u: C64) -> Result<C64> {
        let t = self.twist;
        let num = self.jac.theta(t.alpha1, C64::new(t.beta1, 0.0), u + self.w * t.kappa)?;
        Ok(num * self.jac.dtheta1() / (self.theta_kw * self.jac.theta1(u)?))
    }

    /// `S_κ(x, y)` with principal `ℓ(x)`, `ℓ(y)`.
    pub fn s(&self, x: C64, y: C64) -> Result<C64> {
        let (lx, ly) = (self.ell(x)?, self.ell(y)?);
        self.s_with_ell(x, lx, y, ly)
    }

    /// `S_κ(x, y)` with caller-supplied logarithms `ℓ(x)`, `ℓ(y)`.
    pub fn s_with_ell(&self, x: C64, ell_x: C64, y: C64, ell_y: C64) -> Result<C64> {
        Ok(((ell_x - ell_y) * self.kappa()).exp() * self.h(x - y)?)
    }

    /// `g_c(z) = ratio(pt_c(z))·z^{∓1}`, holomorphic and nonzero on the puncture disc.
    fn g(&self, c: usize, z: C64) -> Result<C64> {
        let r = self.ratio(self.pt(c, z))?;
        Ok(if c == 1 { r * z } else { r / z })
    }

    fn g0(&self, c: usize) -> C64 {
        if c == 1 {
            -self.k_w
        } else {
            C64::new(1.0, 0.0) / self.k_w
        }
    }

    /// Continuous `λ_c(z) = log g_c(z)` along the radial path from the anchor at 0.
    pub fn lambda(&self, c: usize, z: C64) -> Result<C64> {
        check_label(c)?;
        if z.norm() == 0.0 {
            return Ok(self.lam0[c - 1]);
        }
        let mut steps = 16usize;
        'refine: while steps <= 4096 {
            let mut prev = self.g0(c);
            let mut acc = C64::new(0.0, 0.0);
            for j in 1..=steps {
                let gj = self.g(c, z * (j as f64 / steps as f64))?;
                let step = (gj / prev).ln();
                if step.im.abs() > 0.5 {
                    steps *= 4;
                    continue 'refine;
                }
                acc += step;
                prev = gj;
            }
            return Ok(self.lam0[c - 1] + acc);
        }
        Err(SewError::BranchAmbiguity("radial continuation of the puncture logarithm".into()))
    }

    /// `λ_c` at the `m` nodes of `|z| = r`, continued around the circle.
    pub fn lambda_circle(&self, c: usize, r: f64, m: usize) -> Result<Vec<C64>> {
        let pts = circle(r, m);
        let gs: Vec<C64> = par_map(pts.clone(), |z| self.g(c, z)).into_iter().collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(m);
        let mut acc = self.lambda(c, pts[0])?;
        out.push(acc);
        for j in 1..=m {
            let step = (gs[j % m] / gs[j - 1]).ln();
            if step.im.abs() > 1.0 {
                return Err(SewError::BranchAmbiguity("puncture logarithm varies too fast on the circle".into()));
            }
            acc += step;
            if j < m {
                out.push(acc);
            }
        }
        if (acc - out[0]).norm() > 1e-8 {
            return Err(SewError::OutsideAnnulus(format!(
                "puncture logarithm winds around |z| = {r} (closure gap {:.2e})",
                (acc - out[0]).norm()
            )));
        }
        Ok(out)
    }

    /// Regularized kernel `S̃ = e^{κ(λ_ā(x) − λ_b(y))}·H(pt_ā(x) − pt_b(y))` for `x` at puncture `ā`
    /// and `y` at puncture `b`.
    pub fn regular(&self, x: C64, y: C64, a: usize, b: usize) -> Result<C64> {
        check_label(a)?;
        check_label(b)?;
        let ab = bar(a);
        for (z, c) in [(x, ab), (y, b)] {
            if z.norm() > self.radii[c - 1] * (1.0 + 1e-12) {
                return Err(SewError::OutsideAnnulus(format!("|z| = {} exceeds r{c} = {}", z.norm(), self.radii[c - 1])));
            }
        }
        let e = (self.lambda(ab, x)? - self.lambda(b, y)?) * self.kappa();
        Ok(e.exp() * self.h(self.pt(ab, x) - self.pt(b, y))?)
    }

    /// Quadrature radii `(r_x, r_y)` used for the block `C_ab`.
    pub fn block_radii(&self, a: usize, b: usize) -> (f64, f64) {
        let ab = bar(a);
        let ry = self.radii[b - 1] * if ab == b { 0.8 } else { 1.0 };
        (self.radii[ab - 1], ry)
    }

    /// Moment matrix `C_ab(k, l)` for `k, l ≤ n` from `m`-point trapezoid sums.
    pub fn moments(&self, n: usize, m: usize) -> Result<DMatrix<C64>> {
        self.moments_with_radii(n, m, |a, b| self.block_radii(a, b))
    }

    pub fn moments_with_radii(&self, n: usize, m: usize, radii: impl Fn(usize, usize) -> (f64, f64)) -> Result<DMatrix<C64>> {
        check_resolution(n, m)?;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for a in 1..=2 {
            for b in 1..=2 {
                let ab = bar(a);
                let (rx, ry) = radii(a, b);
                let ex: Vec<C64> = self.lambda_circle(ab, rx, m)?.iter().map(|l| (l * self.kappa()).exp()).collect();
                let ey: Vec<C64> = self.lambda_circle(b, ry, m)?.iter().map(|l| (-l * self.kappa()).exp()).collect();
                let xs: Vec<C64> = circle(rx, m).into_iter().map(|z| self.pt(ab, z)).collect();
                let ys: Vec<C64> = circle(ry, m).into_iter().map(|z| self.pt(b, z)).collect();
                let rows = par_map((0..m).collect(), |j| {
                    ys.iter()
                        .zip(&ey)
                        .map(|(&y, &e)| Ok(self.h_raw(xs[j] - y)? * ex[j] * e))
                        .collect::<Result<Vec<C64>>>()
                });
                let mut grid = Vec::with_capacity(m * m);
                for row in rows {
                    grid.extend(row?);
                }
                let coeffs = taylor_coeffs_2d(&grid, m, rx, ry, n);
                for k in 0..n {
                    for l in 0..n {
                        out[((a - 1) * n + k, (b - 1) * n + l)] = coeffs[k][l];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Contour radius at puncture `c` that keeps `point` (and its lattice translates) outside.
    pub fn contour_radius(&self, c: usize, point: C64) -> f64 {
        let d = self.jac.lattice_distance(point - self.pt(c, C64::new(0.0, 0.0)));
        self.radii[c - 1].min(0.6 * d)
    }

    /// `[d_a(x, k)]` over `(a, k)`, `k ≤ n`, with the external branch `ℓ(x)` supplied.
    pub fn d_vec(&self, x: C64, ell_x: C64, n: usize, m: usize) -> Result<Vec<C64>> {
        check_resolution(n, m)?;
        let mut out = Vec::with_capacity(2 * n);
        let ex = (ell_x * self.kappa()).exp();
        for a in 1..=2 {
            let r = self.contour_radius(a, x);
            let lam = self.lambda_circle(a, r, m)?;
            let samples = circle(r, m)
                .into_iter()
                .zip(lam)
                .map(|(z, l)| Ok(ex * (-l * self.kappa()).exp() * self.h(x - self.pt(a, z))?))
                .collect::<Result<Vec<C64>>>()?;
            out.extend(taylor_coeffs(&samples, r, n));
        }
        Ok(out)
    }

    /// `[d̄_a(y, k)]` over `(a, k)`, `k ≤ n`, with the external branch `ℓ(y)` supplied.
    pub fn dbar_vec(&self, y: C64, ell_y: C64, n: usize, m: usize) -> Result<Vec<C64>> {
        check_resolution(n, m)?;
        let mut out = Vec::with_capacity(2 * n);
        let ey = (-ell_y * self.kappa()).exp();
        for a in 1..=2 {
            let c = bar(a);
            let r = self.contour_radius(c, y);
            let lam = self.lambda_circle(c, r, m)?;
            let samples = circle(r, m)
                .into_iter()
                .zip(lam)
                .map(|(z, l)| Ok(ey * (l * self.kappa()).exp() * self.h(self.pt(c, z) - y)?))
                .collect::<Result<Vec<C64>>>()?;
            out.extend(taylor_coeffs(&samples, r, n));
        }
        Ok(out)
    }

    /// Diagonal of `D^{θ₂}`: `θ₂⁻¹` on `a = 1`, `−θ₂` on `a = 2`.
    pub fn d_theta(&self, n: usize) -> Vec<C64> {
        let th2 = self.twist.theta2();
        (0..2 * n).map(|i| if i < n { th2.inv() } else { -th2 }).collect()
    }

    /// `k_a` over the flattened index.
    pub fn k_shifted(&self, n: usize) -> Vec<f64> {
        (0..2 * n).map(|i| BlockIndex::from_flat(i, n).k_a(self.kappa())).collect()
    }

    /// `T = ξ·G·D^{θ₂}` with `G_ab(k, l) = ρ^{(k_a + l_b − 1)/2} C_ab(k, l)`.
    pub fn t_from_moments(&self, c: &DMatrix<C64>) -> BlockMatrix {
        let n = c.nrows() / 2;
        let ks = self.k_shifted(n);
        let d = self.d_theta(n);
        let xi = self.xi();
        let data = DMatrix::from_fn(2 * n, 2 * n, |i, j| xi * self.rho_pow(0.5 * (ks[i] + ks[j] - 1.0)) * c[(i, j)] * d[j]);
        BlockMatrix { n, data }
    }

    pub fn build_t(&self, n: usize, m: usize) -> Result<BlockMatrix> {
        Ok(self.t_from_moments(&self.moments(n, m)?))
    }
}

fn check_resolution(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(SewError::Validation("truncation order must be at least 1".into()));
    }
    if m < 2 * (n + 4) {
        return Err(SewError::UnderResolved { quad_m: m, needed: 2 * (n + 4) });
    }
    Ok(())
}

/// `S_κ(x, y)`.
pub fn s_kappa(x: C64, y: C64, sew: &SewingConfig, tw: &TwistConfig, b: &SeriesBudget) -> Result<C64> {
    TwistedKernel::new(sew, tw, b)?.s(x, y)
}

/// Regularized kernel `S̃` with `x` the local coordinate at puncture `ā` and `y` at puncture `b`.
pub fn s_kappa_regular(
    x: C64,
    y: C64,
    a: usize,
    b_side: usize,
    sew: &SewingConfig,
    tw: &TwistConfig,
    b: &SeriesBudget,
) -> Result<C64> {
    TwistedKernel::new(sew, tw, b)?.regular(x, y, a, b_side)
}

/// Single moment `C_ab(k, l)`.
pub fn moment_c(a: usize, b: usize, k: usize, l: usize, sew: &SewingConfig, tw: &TwistConfig, quad_m: usize) -> Result<C64> {
    check_label(a)?;
    check_label(b)?;
    if k == 0 || l == 0 {
        return Err(SewError::Validation("moment indices start at 1".into()));
    }
    sew.validate()?;
    let n = k.max(l);
    let c = TwistedKernel::new(sew, tw, &SeriesBudget::default())?.moments(n, quad_m)?;
    Ok(c[((a - 1) * n + k - 1, (b - 1) * n + l - 1)])
}

/// Which half-order differential to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfDiffSide {
    D,
    Dbar,
}

/// `d_a(x, k)` or `d̄_a(y, k)` at a point off the punctures, principal external branch.
pub fn half_diff(
    side: HalfDiffSide,
    a: usize,
    point: C64,
    k: usize,
    sew: &SewingConfig,
    tw: &TwistConfig,
    quad_m: usize,
) -> Result<C64> {
    check_label(a)?;
    if k == 0 {
        return Err(SewError::Validation("mode index starts at 1".into()));
    }
    sew.validate()?;
    let ker = TwistedKernel::new(sew, tw, &SeriesBudget::default())?;
    let ell = ker.ell(point)?;
    let v = match side {
        HalfDiffSide::D => ker.d_vec(point, ell, k, quad_m)?,
        HalfDiffSide::Dbar => ker.dbar_vec(point, ell, k, quad_m)?,
    };
    Ok(v[(a - 1) * k + k - 1])
}

/// Truncated `T` on the default branch.
pub fn build_t(n: usize, sew: &SewingConfig, tw: &TwistConfig, quad_m: usize) -> Result<BlockMatrix> {
    sew.validate()?;
    TwistedKernel::new(sew, tw, &SeriesBudget::default())?.build_t(n, quad_m)
}
