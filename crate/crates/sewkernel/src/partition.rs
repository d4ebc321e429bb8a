//! Genus-one and genus-two partition and generating functions: the charged `n`-point
//! function, the twisted 2-point function, Fock-vector 2-point functions and the
//! fermionic, bosonic and theta forms at genus two.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::determinants::{continued_sqrt_det, det_inv_sqrt_i_minus_r, build_r};
use crate::elliptic_core::{dedekind_eta, theta_char_g2, twisted_p1, Characteristic, Jacobi, SeriesBudget, Tau, I, TWO_PI_I};
use crate::error::{Result, SewError};
use crate::genus2_szego::GenusTwo;
use crate::quad::par_map;
use crate::szego_genus1::{SewingConfig, TwistConfig, TwistedKernel};

/// Largest weight accepted by [`fock_sum_oracle`].
pub const MAX_FOCK_WEIGHT: f64 = 6.0;

/// What to do with a charged correlator whose charges do not sum to zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeMode {
    #[default]
    Strict,
    Lenient,
}

/// Charges `β_i` at positions `z_i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InsertionList {
    pub pairs: Vec<(C64, C64)>,
}

impl InsertionList {
    pub fn new(pairs: Vec<(C64, C64)>) -> Self {
        Self { pairs }
    }

    pub fn charge(&self) -> C64 {
        self.pairs.iter().map(|p| p.0).sum()
    }
}

/// `q^{½α²}/η·exp(αΣβ_i z_i)·Π_{r<s} K(z_r − z_s)^{β_rβ_s}` with principal powers.
pub fn z1_alpha_npoint(alpha: C64, ins: &InsertionList, tau: &Tau, b: &SeriesBudget, mode: ChargeMode) -> Result<C64> {
    let total = ins.charge();
    if total.norm() > 1e-12 {
        return match mode {
            ChargeMode::Strict => Err(SewError::ChargeImbalance(format!("{total}"))),
            ChargeMode::Lenient => Ok(C64::new(0.0, 0.0)),
        };
    }
    let jac = Jacobi::new(*tau, *b)?;
    let tol = 1e-8 * jac.lattice_min();
    let mut log = I * PI * tau.value() * alpha * alpha;
    for (beta, z) in &ins.pairs {
        log += alpha * beta * z;
    }
    for (r, (br, zr)) in ins.pairs.iter().enumerate() {
        for (bs, zs) in &ins.pairs[r + 1..] {
            let d = jac.lattice_distance(zr - zs);
            if d < tol {
                return Err(SewError::Coincident(d));
            }
            if br * bs != C64::new(0.0, 0.0) {
                log += br * bs * jac.k(zr - zs)?.ln();
            }
        }
    }
    Ok(log.exp() / dedekind_eta(tau, b)?)
}

/// `ϑ[α₁;β₁](κw)/(η·K(w)^{κ²})`, principal `K^{κ²}`.
pub fn z1_twisted_2pt(sew: &SewingConfig, tw: &TwistConfig, b: &SeriesBudget) -> Result<C64> {
    tw.validate()?;
    let jac = Jacobi::new(sew.tau, *b)?;
    let th = jac.theta(tw.alpha1, C64::new(tw.beta1, 0.0), sew.w * tw.kappa)?;
    if th.norm() < 1e-12 {
        return Err(SewError::DegenerateCharacteristic(th.norm()));
    }
    let kw = jac.k(sew.w)?;
    Ok(th * (-kw.ln() * tw.kappa * tw.kappa).exp() / dedekind_eta(&sew.tau, b)?)
}

fn check_pairs(xs: &[C64], ys: &[C64]) -> Result<()> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(SewError::Validation("need equally many x and y points, at least one".into()));
    }
    Ok(())
}

/// `Z^(1)(e^κ, w; e^{−κ}, 0)·det[S_κ(x_i, y_j)]`.
pub fn gen1_form(xs: &[C64], ys: &[C64], sew: &SewingConfig, tw: &TwistConfig, b: &SeriesBudget) -> Result<C64> {
    check_pairs(xs, ys)?;
    let ker = TwistedKernel::new(sew, tw, b)?;
    let n = xs.len();
    let lx: Vec<C64> = xs.iter().map(|&x| ker.ell(x)).collect::<Result<_>>()?;
    let ly: Vec<C64> = ys.iter().map(|&y| ker.ell(y)).collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = ker.s_with_ell(xs[i], lx[i], ys[j], ly[j])?;
        }
    }
    Ok(z1_twisted_2pt(sew, tw, b)? * m.lu().determinant())
}

/// `|LHS/RHS − 1|` for
/// `(−1)^{n(n−1)/2}·ϑ[α;β](Σ(x_m − y_m))/ϑ[α;β](0)·Π_{i<j}K(x_ij)K(y_ij)/Π_{i,j}K(x_i − y_j) = det P₁(x_i − y_j)`.
pub fn frobenius_residual(xs: &[C64], ys: &[C64], ch: Characteristic, tau: &Tau, b: &SeriesBudget) -> Result<f64> {
    check_pairs(xs, ys)?;
    let n = xs.len();
    let jac = Jacobi::new(*tau, *b)?;
    let tol = 1e-8 * jac.lattice_min();
    let pts: Vec<C64> = xs.iter().chain(ys).copied().collect();
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            let d = jac.lattice_distance(p - q);
            if d < tol {
                return Err(SewError::Coincident(d));
            }
        }
    }
    let beta = C64::new(ch.beta, 0.0);
    let t0 = jac.theta(ch.alpha, beta, C64::new(0.0, 0.0))?;
    if t0.norm() < 1e-12 {
        return Err(SewError::DegenerateCharacteristic(t0.norm()));
    }
    let shift: C64 = xs.iter().zip(ys).map(|(x, y)| x - y).sum();
    let mut lhs = jac.theta(ch.alpha, beta, shift)? / t0;
    for i in 0..n {
        for j in i + 1..n {
            lhs *= jac.k(xs[i] - xs[j])? * jac.k(ys[i] - ys[j])?;
        }
        for j in 0..n {
            lhs /= jac.k(xs[i] - ys[j])?;
        }
    }
    if (n * (n - 1) / 2) % 2 == 1 {
        lhs = -lhs;
    }
    let theta = -(-TWO_PI_I * ch.beta).exp();
    let phi = -(TWO_PI_I * ch.alpha).exp();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = twisted_p1(theta, phi, xs[i] - ys[j], tau, b)?;
        }
    }
    let rhs = p.lu().determinant();
    Ok((lhs / rhs - 1.0).norm())
}

/// Fock vector `ψ⁺(−k₁)…ψ⁺(−k_s)ψ⁻(−l₁)…ψ⁻(−l_t)|0⟩` by its mode lists.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FockLabel {
    pub k: Vec<usize>,
    pub l: Vec<usize>,
}

impl FockLabel {
    pub fn new(k: Vec<usize>, l: Vec<usize>) -> Result<Self> {
        for v in [&k, &l] {
            if v.first() == Some(&0) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SewError::Validation("modes must be strictly increasing positive integers".into()));
            }
        }
        Ok(Self { k, l })
    }

    pub fn vacuum() -> Self {
        Self { k: vec![], l: vec![] }
    }

    pub fn s(&self) -> usize {
        self.k.len()
    }

    pub fn t(&self) -> usize {
        self.l.len()
    }

    /// `Σ(k_i − ½) + Σ(l_j − ½)`.
    pub fn wt(&self) -> f64 {
        self.k.iter().chain(&self.l).map(|&m| m as f64 - 0.5).sum()
    }

    /// `wt + κ(s − t) + ½κ²`.
    pub fn wt_kappa(&self, kappa: f64) -> f64 {
        self.wt() + kappa * (self.s() as f64 - self.t() as f64) + 0.5 * kappa * kappa
    }
}

fn strict_subsets(max: usize, budget: f64) -> Vec<Vec<usize>> {
    // increasing tuples from 1..=max with Σ(m − ½) ≤ budget
    let mut out = vec![vec![]];
    let mut frontier = vec![(vec![], 0.0)];
    while let Some((v, w)) = frontier.pop() {
        let start = v.last().map_or(1, |&m: &usize| m + 1);
        for m in start..=max {
            let nw = w + m as f64 - 0.5;
            if nw > budget + 1e-12 {
                break;
            }
            let mut nv: Vec<usize> = v.clone();
            nv.push(m);
            out.push(nv.clone());
            frontier.push((nv, nw));
        }
    }
    out
}

/// Labels with `wt[Ψ_κ] ≤ W` and all modes `≤ nmax`, ordered by `(wt[Ψ_κ], s, t, 𝐤, 𝐥)`.
pub fn fock_labels(w: f64, kappa: f64, nmax: usize) -> Vec<FockLabel> {
    let budget = w + 0.5;
    let subsets = strict_subsets(nmax, budget + 1.0);
    let mut out = Vec::new();
    for k in &subsets {
        for l in &subsets {
            let lab = FockLabel { k: k.clone(), l: l.clone() };
            if lab.wt_kappa(kappa) <= w + 1e-12 {
                out.push(lab);
            }
        }
    }
    out.sort_by(|a, b| {
        a.wt_kappa(kappa)
            .total_cmp(&b.wt_kappa(kappa))
            .then(a.s().cmp(&b.s()))
            .then(a.t().cmp(&b.t()))
            .then(a.k.cmp(&b.k))
            .then(a.l.cmp(&b.l))
    });
    out
}

/// `ε = (−1)^{(t₁+s₂)t₂+⌊p/2⌋}e^{iπBκ(s₂−t₁)}`.
pub fn fock_epsilon(s2: usize, t1: usize, t2: usize, p: usize, tw: &TwistConfig) -> C64 {
    let sign = if ((t1 + s2) * t2 + p / 2) % 2 == 0 { 1.0 } else { -1.0 };
    (I * PI * tw.b as f64 * tw.kappa * (s2 as f64 - t1 as f64)).exp() * sign
}

/// `ε·Z^(1)·det C_ab(𝐤_a, 𝐥_b)` from a precomputed moment matrix of order `n`.
pub fn fock_2pt_from_moments(label1: &FockLabel, label2: &FockLabel, c: &DMatrix<C64>, z1: C64, tw: &TwistConfig) -> Result<C64> {
    let n = c.nrows() / 2;
    let (k1, l2, k2, l1) = (&label1.k, &label1.l, &label2.k, &label2.l);
    let p = k1.len() + k2.len();
    if p != l1.len() + l2.len() {
        return Err(SewError::Validation(format!("unbalanced labels: s1 + s2 = {p} but t1 + t2 = {}", l1.len() + l2.len())));
    }
    if k1.iter().chain(k2).chain(l1).chain(l2).any(|&m| m == 0 || m > n) {
        return Err(SewError::Validation(format!("modes must lie in 1..={n}")));
    }
    let rows: Vec<usize> = k1.iter().map(|k| k - 1).chain(k2.iter().map(|k| n + k - 1)).collect();
    let cols: Vec<usize> = l1.iter().map(|l| l - 1).chain(l2.iter().map(|l| n + l - 1)).collect();
    let det = if p == 0 {
        C64::new(1.0, 0.0)
    } else {
        DMatrix::from_fn(p, p, |i, j| c[(rows[i], cols[j])]).lu().determinant()
    };
    Ok(fock_epsilon(k2.len(), l1.len(), l2.len(), p, tw) * z1 * det)
}

/// Torus 2-point function of `Ψ_κ[𝐤₁, 𝐥₂]` at `w` and `Ψ_{−κ}[𝐤₂, 𝐥₁]` at `0`.
pub fn fock_2pt(
    label1: &FockLabel,
    label2: &FockLabel,
    sew: &SewingConfig,
    tw: &TwistConfig,
    n: usize,
    quad_m: usize,
) -> Result<C64> {
    sew.validate()?;
    let b = SeriesBudget::default();
    let ker = TwistedKernel::new(sew, tw, &b)?;
    let c = ker.moments(n, quad_m)?;
    fock_2pt_from_moments(label1, label2, &c, z1_twisted_2pt(sew, tw, &b)?, tw)
}

/// `e^{2πiβ₂κ}·e^{½κ²l̂}·ϑ[α₁;β₁](κw)/η`, the prefactor of `det(I − T)`.
pub fn fermionic_prefactor(ker: &TwistedKernel, tau: &Tau, b: &SeriesBudget) -> Result<C64> {
    let t = ker.twist;
    let phase = (TWO_PI_I * t.beta2 * t.kappa + ker.branch.lhat * (0.5 * t.kappa * t.kappa)).exp();
    Ok(phase * ker.theta_kw() / dedekind_eta(tau, b)?)
}

/// `e^{2πiβ₂κ}(e^{iπB}ρ)^{½κ²}·Z^(1)·det(I − T)`.
pub fn z2_fermionic(sew: &SewingConfig, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget) -> Result<C64> {
    let g = GenusTwo::new(sew, tw, n, quad_m, b)?;
    Ok(fermionic_prefactor(&g.ker, &sew.tau, b)? * g.det_i_minus_t())
}

/// `ε₁ρ^{wt[Ψ_κ]}` with `ε₁ = (−1)^{st+⌊wt⌋}e^{iπB·wt[Ψ_κ]}`, taken on the sheet of `log ρ`.
pub fn dual_prefactor(label: &FockLabel, tw: &TwistConfig, log_rho: C64) -> C64 {
    let (s, t) = (label.s(), label.t());
    let sign = if (s * t + label.wt().floor() as usize) % 2 == 0 { 1.0 } else { -1.0 };
    ((I * PI * tw.b as f64 + log_rho) * label.wt_kappa(tw.kappa)).exp() * sign
}

/// `(−ξθ₂⁻¹)^s(ξθ₂)^tρ^{wt+κ(s−t)}(e^{iπB}ρ)^{½κ²}`.
pub fn absorbed_prefactor(label: &FockLabel, tw: &TwistConfig, log_rho: C64) -> C64 {
    let (s, t) = (label.s() as i32, label.t() as i32);
    let (xi, th2) = (tw.xi(), tw.theta2());
    let k = tw.kappa;
    (-xi / th2).powi(s)
        * (xi * th2).powi(t)
        * (log_rho * (label.wt() + k * (s - t) as f64)).exp()
        * ((I * PI * tw.b as f64 + log_rho) * (0.5 * k * k)).exp()
}

/// `Σ (−θ₂)^{t−s}e^{2πiβ₂κ}·ε₁ρ^{wt[Ψ_κ]}·Z^(1)(Ψ_κ[𝐤,𝐥], w; Ψ_{−κ}[𝐥,𝐤], 0)` over labels with
/// `wt[Ψ_κ] ≤ W`.
pub fn fock_sum_oracle(w: f64, sew: &SewingConfig, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget) -> Result<C64> {
    if w > MAX_FOCK_WEIGHT {
        return Err(SewError::TooLarge(format!("weight cutoff {w} exceeds {MAX_FOCK_WEIGHT}")));
    }
    sew.validate()?;
    let labels = fock_labels(w, tw.kappa, usize::MAX / 4);
    let need = labels.iter().flat_map(|l| l.k.iter().chain(&l.l)).copied().max().unwrap_or(1);
    if need > n {
        return Err(SewError::Validation(format!("weight {w} needs modes up to {need} but N = {n}")));
    }
    let ker = TwistedKernel::new(sew, tw, b)?;
    let c = ker.moments(n, quad_m)?;
    let z1 = z1_twisted_2pt(sew, tw, b)?;
    let log_rho = ker.branch.log_rho;
    let th2 = tw.theta2();
    let phase = (TWO_PI_I * tw.beta2 * tw.kappa).exp();
    let terms = par_map(labels, |lab| {
        let dual = FockLabel { k: lab.l.clone(), l: lab.k.clone() };
        let z = fock_2pt_from_moments(&lab, &dual, &c, z1, tw)?;
        Ok((-th2).powi(lab.t() as i32 - lab.s() as i32) * phase * dual_prefactor(&lab, tw, log_rho) * z)
    });
    let mut sum = C64::new(0.0, 0.0);
    for t in terms {
        sum += t?;
    }
    Ok(sum)
}

/// `det(1 − R)^{−1/2}/η`.
pub fn z2_heisenberg(sew: &SewingConfig, n: usize, b: &SeriesBudget) -> Result<C64> {
    sew.validate()?;
    Ok(det_inv_sqrt_i_minus_r(n, sew, b)? / dedekind_eta(&sew.tau, b)?)
}

fn check_omega(omega: &[[C64; 2]; 2]) -> Result<()> {
    let (a, bb, d) = (omega[0][0].im, omega[0][1].im, omega[1][1].im);
    if (omega[0][1] - omega[1][0]).norm() > 1e-12 * (1.0 + omega[0][1].norm()) || !(a > 0.0 && a * d - bb * bb > 0.0) {
        return Err(SewError::Domain("period matrix must be symmetric with positive definite imaginary part".into()));
    }
    Ok(())
}

/// `e^{iπ(μ²Ω₁₁ + 2μνΩ₁₂ + ν²Ω₂₂)}·Z_M^(2)`.
pub fn z2_mu_nu(mu: f64, nu: f64, omega: [[C64; 2]; 2], sew: &SewingConfig, n: usize, b: &SeriesBudget) -> Result<C64> {
    check_omega(&omega)?;
    let q = omega[0][0] * mu * mu + omega[0][1] * (2.0 * mu * nu) + omega[1][1] * nu * nu;
    Ok((I * PI * q).exp() * z2_heisenberg(sew, n, b)?)
}

/// `θ^(2)[(α₁, κ); (β₁, β₂)](Ω)·Z_M^(2)`.
pub fn z2_theta_form(omega: [[C64; 2]; 2], sew: &SewingConfig, tw: &TwistConfig, n: usize, b: &SeriesBudget) -> Result<C64> {
    check_omega(&omega)?;
    tw.validate()?;
    let th = theta_char_g2([tw.alpha1, tw.kappa], [tw.beta1, tw.beta2], omega, b)?;
    Ok(th * z2_heisenberg(sew, n, b)?)
}

/// Residuals of the triple-product form at genus two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TripleProduct {
    /// `|det(I − T)·det(I − R)^{½} − 1|`, or the full ratio residual when `Ω` is given.
    pub residual: f64,
    /// The same quantity at `ρ/10` on the same ray (leading-order mode only).
    pub residual_tenth: Option<f64>,
}

fn det_product(sew: &SewingConfig, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget) -> Result<(GenusTwo, C64)> {
    let g = GenusTwo::new(sew, tw, n, quad_m, b)?;
    let (_, root) = continued_sqrt_det(&build_r(n, sew, b)?)?;
    let d = g.det_i_minus_t() * root;
    Ok((g, d))
}

pub fn triple_product_residual(
    sew: &SewingConfig,
    tw: &TwistConfig,
    n: usize,
    quad_m: usize,
    b: &SeriesBudget,
    omega: Option<[[C64; 2]; 2]>,
) -> Result<TripleProduct> {
    let (g, d) = det_product(sew, tw, n, quad_m, b)?;
    match omega {
        Some(om) => {
            check_omega(&om)?;
            let th = theta_char_g2([tw.alpha1, tw.kappa], [tw.beta1, tw.beta2], om, b)?;
            let k = tw.kappa;
            let pre = (TWO_PI_I * tw.beta2 * k + g.ker.branch.lhat * (0.5 * k * k)).exp() * g.ker.theta_kw();
            Ok(TripleProduct { residual: (th / (pre * d) - 1.0).norm(), residual_tenth: None })
        }
        None => {
            let tenth = SewingConfig { rho: sew.rho / 10.0, ..*sew };
            let (_, d10) = det_product(&tenth, tw, n, quad_m, b)?;
            Ok(TripleProduct { residual: (d - 1.0).norm(), residual_tenth: Some((d10 - 1.0).norm()) })
        }
    }
}

/// `Z^(2)·det[S^(2)(x_i, y_j)]`.
pub fn gen2_form(
    xs: &[C64],
    ys: &[C64],
    sew: &SewingConfig,
    tw: &TwistConfig,
    n: usize,
    quad_m: usize,
    b: &SeriesBudget,
) -> Result<C64> {
    check_pairs(xs, ys)?;
    let g = GenusTwo::new(sew, tw, n, quad_m, b)?;
    let z2 = fermionic_prefactor(&g.ker, &sew.tau, b)? * g.det_i_minus_t();
    let p = xs.len();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = g.eval(xs[i], ys[j])?;
        }
    }
    Ok(z2 * m.lu().determinant())
}
