//! Truncated determinants: `det(I − T)` by trace-log or LU, the bosonic matrix `R` with
//! `det(1 − R)^{−1/2}`, and principal-minor expansions.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::elliptic_core::{eisenstein, ln_factorial, weierstrass_p, SeriesBudget};
use crate::error::{Result, SewError};
use crate::szego_genus1::{BlockMatrix, SewingConfig};

/// Largest matrix accepted by [`minor_expansion_det`].
pub const MAX_MINOR_SIZE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetMethod {
    TraceLog,
    Lu,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetResult {
    pub value: C64,
    pub n: usize,
    pub method: DetMethod,
    pub est_error: f64,
}

fn frob(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral radius estimate `‖M^{2^j}‖^{2^{−j}}` from repeated squaring with rescaling.
pub fn spectral_radius(m: &DMatrix<C64>) -> f64 {
    let n0 = frob(m);
    if n0 == 0.0 {
        return 0.0;
    }
    let mut b = m / C64::new(n0, 0.0);
    let mut log_norm = n0.ln();
    let mut power = 1.0;
    for _ in 0..8 {
        b = &b * &b;
        let nb = frob(&b);
        if nb == 0.0 {
            return 0.0;
        }
        log_norm = 2.0 * log_norm + nb.ln();
        power *= 2.0;
        b /= C64::new(nb, 0.0);
    }
    (log_norm / power).exp()
}

/// `det(I − M)`.
pub fn det_i_minus(m: &BlockMatrix, method: DetMethod) -> Result<DetResult> {
    det_i_minus_matrix(&m.data, m.n, method)
}

pub fn det_i_minus_matrix(m: &DMatrix<C64>, n: usize, method: DetMethod) -> Result<DetResult> {
    if m.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(SewError::Method("matrix has non-finite entries".into()));
    }
    match method {
        DetMethod::Lu => {
            let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
            let value = (id - m).lu().determinant();
            let est_error = f64::EPSILON * m.nrows() as f64 * value.norm().max(1.0);
            Ok(DetResult { value, n, method, est_error })
        }
        DetMethod::TraceLog => {
            let sr = spectral_radius(m);
            if sr >= 1.0 {
                return Err(SewError::Method(format!("spectral radius {sr:.3} >= 1; use the lu method")));
            }
            let mut acc = C64::new(0.0, 0.0);
            let mut power = m.clone();
            let mut last = 0.0;
            for k in 1..=200 {
                let term = power.trace() / k as f64;
                acc -= term;
                last = term.norm();
                if last <= 1e-14 * acc.norm() {
                    let value = acc.exp();
                    return Ok(DetResult { value, n, method, est_error: last * value.norm() });
                }
                power = &power * m;
            }
            let value = acc.exp();
            Ok(DetResult { value, n, method, est_error: last * value.norm() })
        }
    }
}

/// `C(k, l) = (−1)^{k+1}(k+l−1)!/((k−1)!(l−1)!)·E_{k+l}` and `D(k, l)` with `P_{k+l}(w)`.
fn binom_factor(k: usize, l: usize) -> f64 {
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    sign * (ln_factorial(k + l - 1) - ln_factorial(k - 1) - ln_factorial(l - 1)).exp()
}

/// Truncated `R_ab(k, l) = −ρ^{(k+l)/2}/√(kl)·[[D(k,l), C(k,l)], [C(k,l), D(l,k)]]`.
pub fn build_r(n: usize, sew: &SewingConfig, b: &SeriesBudget) -> Result<BlockMatrix> {
    if n == 0 {
        return Err(SewError::Validation("truncation order must be at least 1".into()));
    }
    let tau = &sew.tau;
    let log_rho = sew.log_rho();
    let mut e = vec![C64::new(0.0, 0.0); 2 * n + 1];
    let mut p = vec![C64::new(0.0, 0.0); 2 * n + 1];
    for s in 2..=2 * n {
        if s % 2 == 0 {
            e[s] = eisenstein(s, tau, b)?;
        }
        p[s] = weierstrass_p(s, sew.w, tau, b)?;
    }
    let mut r = BlockMatrix::zeros(n);
    for k in 1..=n {
        for l in 1..=n {
            let pre = -(log_rho * ((k + l) as f64 / 2.0)).exp() / ((k * l) as f64).sqrt();
            let ckl = e[k + l] * binom_factor(k, l);
            r.data[(k - 1, l - 1)] = pre * p[k + l] * binom_factor(k, l);
            r.data[(k - 1, n + l - 1)] = pre * ckl;
            r.data[(n + k - 1, l - 1)] = pre * ckl;
            r.data[(n + k - 1, n + l - 1)] = pre * p[k + l] * binom_factor(l, k);
        }
    }
    Ok(r)
}

/// `det(1 − R)^{−1/2}` continued from `ρ = 0` along the ray `sρ`, `s ∈ [0, 1]`.
pub fn det_inv_sqrt_i_minus_r(n: usize, sew: &SewingConfig, b: &SeriesBudget) -> Result<C64> {
    let r = build_r(n, sew, b)?;
    let (_, root) = continued_sqrt_det(&r)?;
    Ok(root.inv())
}

/// `(det(I − R), √det(I − R))` with the root continued along the ray from `R = 0`.
pub fn continued_sqrt_det(r: &BlockMatrix) -> Result<(C64, C64)> {
    let n = r.n;
    let weights: Vec<f64> = (0..2 * n).map(|i| (i % n + 1) as f64 / 2.0).collect();
    let det_at = |s: f64| -> C64 {
        let scaled = DMatrix::from_fn(2 * n, 2 * n, |i, j| r.data[(i, j)] * s.powf(weights[i] + weights[j]));
        (DMatrix::<C64>::identity(2 * n, 2 * n) - scaled).lu().determinant()
    };
    let mut s: f64 = 0.0;
    let mut d_prev = C64::new(1.0, 0.0);
    let mut root = C64::new(1.0, 0.0);
    let mut h: f64 = 1.0 / 16.0;
    let mut guard = 0;
    while s < 1.0 {
        guard += 1;
        if guard > 100_000 {
            return Err(SewError::BranchAmbiguity("square-root continuation did not finish".into()));
        }
        let s_next = (s + h).min(1.0);
        let d = det_at(s_next);
        let step = d / d_prev;
        if d.norm() == 0.0 {
            return Err(SewError::BranchAmbiguity("det(1 - R) vanishes on the ray".into()));
        }
        if (step - 1.0).norm() > 0.25 {
            h /= 2.0;
            if h < 1e-12 {
                return Err(SewError::BranchAmbiguity("det(1 - R) passes too close to zero".into()));
            }
            continue;
        }
        // principal root of a ratio near 1 carries the continuous branch
        root *= step.sqrt();
        d_prev = d;
        s = s_next;
        h = (h * 2.0).min(1.0 / 16.0);
    }
    Ok((d_prev, root))
}

/// `Σ_𝐦 det M(𝐦, 𝐦)` over all principal subindices, which equals `det(I + M)`; with a border
/// `(S, U, V)` the sum of `det [[S, U(𝐦)], [V(𝐦), M(𝐦,𝐦)]]`, which equals `det [[S, U], [V, I + M]]`.
pub fn minor_expansion_det(m: &DMatrix<C64>, border: Option<(&DMatrix<C64>, &DMatrix<C64>, &DMatrix<C64>)>) -> Result<C64> {
    let p = m.nrows();
    if m.ncols() != p {
        return Err(SewError::Validation("matrix must be square".into()));
    }
    if p > MAX_MINOR_SIZE {
        return Err(SewError::TooLarge(format!("minor expansion of size {p} exceeds {MAX_MINOR_SIZE}")));
    }
    let sn = border.map_or(0, |(s, _, _)| s.nrows());
    if let Some((s, u, v)) = border {
        if s.ncols() != sn || u.shape() != (sn, p) || v.shape() != (p, sn) {
            return Err(SewError::Validation("border blocks have inconsistent shapes".into()));
        }
    }
    let mut total = C64::new(0.0, 0.0);
    for mask in 0u32..(1u32 << p) {
        let idx: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        let q = idx.len();
        let dim = sn + q;
        if dim == 0 {
            total += 1.0;
            continue;
        }
        let sub = DMatrix::from_fn(dim, dim, |i, j| match (border, i < sn, j < sn) {
            (Some((s, _, _)), true, true) => s[(i, j)],
            (Some((_, u, _)), true, false) => u[(i, idx[j - sn])],
            (Some((_, _, v)), false, true) => v[(idx[i - sn], j)],
            _ => m[(idx[i - sn], idx[j - sn])],
        });
        total += sub.lu().determinant();
    }
    Ok(total)
}
