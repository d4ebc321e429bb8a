//! The genus-two Szegő kernel `S^(2)(x, y) = S_κ(x, y) + ξ·h(x)·D^{θ₂}(I − T)⁻¹·h̄ᵀ(y)` on the
//! sewn surface, the sewing residual across the handle and the domain check for `𝒟^ρ`.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::elliptic_core::{lattice_point, nearest_lattice_point, SeriesBudget};
use crate::error::{Result, SewError};
use crate::szego_genus1::{bar, BlockMatrix, Branch, SewingConfig, TwistConfig, TwistedKernel};

/// Sheet data needed to reproduce an evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchRecord {
    pub b: i64,
    pub sheet: i64,
    pub log_rho: C64,
    pub lhat: C64,
    pub xi: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelEval {
    pub value: C64,
    pub n: usize,
    pub quad_m: usize,
    pub branch: BranchRecord,
}

/// Factorized `I − T` and prefactors at fixed `(sew, tw, N, quad_M)`.
pub struct GenusTwo {
    pub ker: TwistedKernel,
    pub sew: SewingConfig,
    pub n: usize,
    pub quad_m: usize,
    pub t: BlockMatrix,
    lu: Option<LU<C64, Dyn, Dyn>>,
    pref: Vec<C64>,
}

impl GenusTwo {
    /// `n = 0` drops the correction term.
    pub fn new(sew: &SewingConfig, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget) -> Result<Self> {
        sew.validate()?;
        Self::from_kernel(TwistedKernel::new(sew, tw, b)?, sew, n, quad_m)
    }

    pub fn with_lhat(sew: &SewingConfig, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget, lhat: C64) -> Result<Self> {
        sew.validate()?;
        Self::from_kernel(TwistedKernel::with_lhat(sew, tw, b, lhat)?, sew, n, quad_m)
    }

    pub fn from_kernel(ker: TwistedKernel, sew: &SewingConfig, n: usize, quad_m: usize) -> Result<Self> {
        if n == 0 {
            return Ok(Self { ker, sew: *sew, n, quad_m, t: BlockMatrix::zeros(0), lu: None, pref: vec![] });
        }
        let t = ker.build_t(n, quad_m)?;
        let lu = (DMatrix::<C64>::identity(2 * n, 2 * n) - &t.data).lu();
        if !lu.is_invertible() {
            return Err(SewError::SolveFailed);
        }
        let pref = ker.k_shifted(n).iter().map(|&ka| ker.rho_pow(0.5 * (ka - 0.5))).collect();
        Ok(Self { ker, sew: *sew, n, quad_m, t, lu: Some(lu), pref })
    }

    pub fn branch(&self) -> Branch {
        self.ker.branch
    }

    pub fn record(&self) -> BranchRecord {
        BranchRecord {
            b: self.ker.twist.b,
            sheet: self.sew.sheet,
            log_rho: self.ker.branch.log_rho,
            lhat: self.ker.branch.lhat,
            xi: self.ker.xi(),
        }
    }

    /// `h_a(x, k) = ρ^{½(k_a−½)} d_a(x, k)`.
    pub fn h_vec(&self, x: C64, ell_x: C64) -> Result<Vec<C64>> {
        let d = self.ker.d_vec(x, ell_x, self.n, self.quad_m)?;
        Ok(d.iter().zip(&self.pref).map(|(a, b)| a * b).collect())
    }

    /// `h̄_a(y, k) = ρ^{½(k_a−½)} d̄_a(y, k)`.
    pub fn hbar_vec(&self, y: C64, ell_y: C64) -> Result<Vec<C64>> {
        let d = self.ker.dbar_vec(y, ell_y, self.n, self.quad_m)?;
        Ok(d.iter().zip(&self.pref).map(|(a, b)| a * b).collect())
    }

    /// `ξ·h(x)·D^{θ₂}` as a row.
    pub fn h_row(&self, x: C64, ell_x: C64) -> Result<Vec<C64>> {
        let xi = self.ker.xi();
        let h = self.h_vec(x, ell_x)?;
        Ok(h.iter().zip(self.ker.d_theta(self.n)).map(|(v, d)| xi * v * d).collect())
    }

    /// `S^(2)(x, y)` with caller-supplied external logarithms.
    pub fn eval_with_ell(&self, x: C64, ell_x: C64, y: C64, ell_y: C64) -> Result<C64> {
        let s0 = self.ker.s_with_ell(x, ell_x, y, ell_y)?;
        let Some(lu) = &self.lu else {
            return Ok(s0);
        };
        let row = self.h_row(x, ell_x)?;
        let hb = DVector::from_vec(self.hbar_vec(y, ell_y)?);
        let sol = lu.solve(&hb).ok_or(SewError::SolveFailed)?;
        let corr: C64 = row.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
        let v = s0 + corr;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(SewError::Method("non-finite kernel value".into()));
        }
        Ok(v)
    }

    /// `S^(2)(x, y)` on principal logarithms.
    pub fn eval(&self, x: C64, y: C64) -> Result<C64> {
        for p in [x, y] {
            self.check_on_surface(p)?;
        }
        self.eval_with_ell(x, self.ker.ell(x)?, y, self.ker.ell(y)?)
    }

    /// Rejects points inside the excised discs `|z_a| < |ρ|/r_ā`.
    pub fn check_on_surface(&self, p: C64) -> Result<()> {
        for c in 1..=2 {
            let z = self.ker.jac.lattice_distance(p - self.ker.pt(c, C64::new(0.0, 0.0)));
            let inner = self.sew.rho.norm() / self.sew.radius(bar(c));
            if z <= inner {
                return Err(SewError::OutsideAnnulus(format!("point lies in the excised disc at puncture {c}")));
            }
        }
        Ok(())
    }

    pub fn det_i_minus_t(&self) -> C64 {
        self.lu.as_ref().map_or(C64::new(1.0, 0.0), |lu| lu.determinant())
    }
}

/// `S^(2)(x, y)` with its truncation and branch metadata.
pub fn s2_eval(x: C64, y: C64, sew: &SewingConfig, tw: &TwistConfig, n: usize, quad_m: usize) -> Result<KernelEval> {
    let g = GenusTwo::new(sew, tw, n, quad_m, &SeriesBudget::default())?;
    Ok(KernelEval { value: g.eval(x, y)?, n, quad_m, branch: g.record() })
}

/// Outcome of the handle sewing check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SewingResidual {
    /// Smaller of the two normalized residuals.
    pub residual: f64,
    /// Exponent `e` in `θ₂^{e(a−ā)}` that achieved it.
    pub sign: i32,
    /// Residuals for `e = +1` and `e = −1`.
    pub by_sign: [f64; 2],
}

/// Compares `S^(2)` at `x_a` (local coordinate `z_a` at puncture `a`) and at its sewn image
/// `z_ā = ρ/z_a`: the normalized residual `|J·S^(2)(x_a, y) + θ₂^{e(a−ā)}S^(2)(x_ā, y)|/|S^(2)(x_ā, y)|`
/// with `J = (−1)^{ā}ξρ^{½}/z_ā`, for both exponent conventions `e = ±1`.
pub fn sewing_residual(g: &GenusTwo, a: usize, z_a: C64, y: C64) -> Result<SewingResidual> {
    if a != 1 && a != 2 {
        return Err(SewError::Validation(format!("puncture label {a} must be 1 or 2")));
    }
    let ab = bar(a);
    let log_za = z_a.ln();
    let log_zb = g.ker.branch.log_rho - log_za;
    let z_b = log_zb.exp();
    let rho = g.sew.rho.norm();
    for (z, c) in [(z_a, a), (z_b, ab)] {
        let r = z.norm();
        if !(r > rho / g.sew.radius(bar(c)) && r < g.sew.radius(c)) {
            return Err(SewError::OutsideAnnulus(format!("|z_{c}| = {r:.3e} is not inside the sewing annulus")));
        }
    }
    let sgn = |c: usize| if c == 1 { -1.0 } else { 1.0 };
    let ell_a = log_za * sgn(a) + g.ker.lambda(a, z_a)?;
    let ell_b = log_zb * sgn(ab) + g.ker.lambda(ab, z_b)?;
    let ell_y = g.ker.ell(y)?;
    let va = g.eval_with_ell(g.ker.pt(a, z_a), ell_a, y, ell_y)?;
    let vb = g.eval_with_ell(g.ker.pt(ab, z_b), ell_b, y, ell_y)?;
    let jac = g.ker.xi() * (g.ker.branch.log_rho * 0.5).exp() / z_b * sgn(ab);
    let th2 = g.ker.twist.theta2();
    let exp_a = a as i32 - ab as i32;
    let by_sign = [1, -1].map(|e: i32| (jac * va + th2.powi(e * exp_a) * vb).norm() / vb.norm());
    let (residual, sign) = if by_sign[0] <= by_sign[1] { (by_sign[0], 1) } else { (by_sign[1], -1) };
    Ok(SewingResidual { residual, sign, by_sign })
}

/// [`sewing_residual`] from configuration inputs.
pub fn sewing_multiplier_residual(
    a: usize,
    z_a: C64,
    y: C64,
    sew: &SewingConfig,
    tw: &TwistConfig,
    n: usize,
    quad_m: usize,
) -> Result<SewingResidual> {
    let g = GenusTwo::new(sew, tw, n, quad_m, &SeriesBudget::default())?;
    sewing_residual(&g, a, z_a, y)
}

/// Result of testing `|w − λ| > 2|ρ|^{½} > 0` over the lattice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainReport {
    pub ok: bool,
    /// Lattice point `λ` with the smallest margin.
    pub worst_lambda: C64,
    /// `|w − λ| − 2|ρ|^{½}` at that point.
    pub margin: f64,
    pub diagnostics: String,
}

pub fn domain_check(sew: &SewingConfig) -> DomainReport {
    let root = sew.rho.norm().sqrt();
    let (_, m0, n0) = nearest_lattice_point(sew.w, &sew.tau);
    let mut worst = (f64::INFINITY, C64::new(0.0, 0.0));
    for m in m0 - 2..=m0 + 2 {
        for n in n0 - 2..=n0 + 2 {
            let lam = lattice_point(&sew.tau, m, n);
            let margin = (sew.w - lam).norm() - 2.0 * root;
            if margin < worst.0 {
                worst = (margin, lam);
            }
        }
    }
    let finite = sew.rho.re.is_finite() && sew.rho.im.is_finite() && sew.w.re.is_finite() && sew.w.im.is_finite();
    let ok = finite && root > 0.0 && worst.0 > 0.0;
    let diagnostics = if !finite {
        "non-finite input".to_string()
    } else if root == 0.0 {
        "rho = 0: the bound 2|rho|^(1/2) > 0 fails".to_string()
    } else {
        format!("worst lattice point {} + {}i, margin {:.6e}", worst.1.re, worst.1.im, worst.0)
    };
    DomainReport { ok, worst_lambda: worst.1, margin: worst.0, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic_core::Tau;

    #[test]
    fn domain_examples() {
        let tau = Tau::new(C64::new(0.0, 1.0)).unwrap();
        let pi = std::f64::consts::PI;
        assert!(domain_check(&SewingConfig::new(tau, C64::new(0.0, pi), C64::new(1e-4, 0.0))).ok);
        assert!(!domain_check(&SewingConfig::new(tau, C64::new(0.0, pi), C64::new(0.0, 0.0))).ok);
        assert!(!domain_check(&SewingConfig::new(tau, C64::new(0.0, 0.0), C64::new(1e-4, 0.0))).ok);
    }
}
