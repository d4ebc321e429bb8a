//! The group `L = Ĥ ⋊ Γ₁ ⊂ Sp(4, ℤ)` acting on sewing points, on twists and on the lifted
//! logarithm, with its multiplier system and numerical invariance checks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::elliptic_core::{Jacobi, SeriesBudget, Tau, I, TWO_PI_I};
use crate::error::{Result, SewError};
use crate::genus2_szego::GenusTwo;
use crate::partition::fermionic_prefactor;
use crate::szego_genus1::{SewingConfig, TwistConfig};

/// Generators of `L`: `A = μ(1,0,0)`, `B = μ(0,1,0)`, `C = μ(0,0,1)` and the `SL₂` pair `S`, `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    A,
    B,
    C,
    S,
    T,
}

/// A generator or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    pub gen: Generator,
    pub inverse: bool,
}

impl Letter {
    pub fn inv(self) -> Self {
        Self { inverse: !self.inverse, ..self }
    }

    /// `(a, b, c)` for Heisenberg letters.
    fn heisenberg(self) -> Option<(i64, i64, i64)> {
        let s = if self.inverse { -1 } else { 1 };
        match self.gen {
            Generator::A => Some((s, 0, 0)),
            Generator::B => Some((0, s, 0)),
            Generator::C => Some((0, 0, s)),
            _ => None,
        }
    }

    /// `(a₁, b₁, c₁, d₁)` for `Γ₁` letters.
    fn sl2(self) -> Option<(i64, i64, i64, i64)> {
        let m = match self.gen {
            Generator::S => (0, 1, -1, 0),
            Generator::T => (1, 1, 0, 1),
            _ => return None,
        };
        Some(if self.inverse { (m.3, -m.1, -m.2, m.0) } else { m })
    }

    pub fn matrix(self) -> Matrix4<i64> {
        if let Some((a, b, c)) = self.heisenberg() {
            mu_matrix(a, b, c)
        } else {
            let (a1, b1, c1, d1) = self.sl2().unwrap();
            gamma_matrix(a1, b1, c1, d1)
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.gen, if self.inverse { "^-1" } else { "" })
    }
}

/// `μ(a, b, c)`.
pub fn mu_matrix(a: i64, b: i64, c: i64) -> Matrix4<i64> {
    Matrix4::new(1, 0, 0, b, a, 1, b, c, 0, 0, 1, -a, 0, 0, 0, 1)
}

/// `γ₁` embedding of `(a₁ b₁; c₁ d₁)`.
pub fn gamma_matrix(a1: i64, b1: i64, c1: i64, d1: i64) -> Matrix4<i64> {
    Matrix4::new(a1, 0, b1, 0, 0, 1, 0, 0, c1, 0, d1, 0, 0, 0, 0, 1)
}

/// `Mᵀ J M = J` with `J = (0 I; −I 0)`.
pub fn is_symplectic(m: &Matrix4<i64>) -> bool {
    let j = Matrix4::new(0, 0, 1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, -1, 0, 0);
    m.transpose() * j * m == j
}

/// A word in the generators with its cached `Sp(4, ℤ)` matrix. The word `g₁g₂…` acts on the
/// left, so the last letter is applied first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GroupElement {
    word: Vec<Letter>,
    matrix: Matrix4<i64>,
}

impl GroupElement {
    pub fn identity() -> Self {
        Self { word: vec![], matrix: Matrix4::identity() }
    }

    pub fn from_letters(word: Vec<Letter>) -> Self {
        let matrix = word.iter().fold(Matrix4::identity(), |m, l| m * l.matrix());
        Self { word, matrix }
    }

    pub fn generator(gen: Generator) -> Self {
        Self::from_letters(vec![Letter { gen, inverse: false }])
    }

    pub fn word(&self) -> &[Letter] {
        &self.word
    }

    pub fn matrix(&self) -> &Matrix4<i64> {
        &self.matrix
    }

    pub fn inverse(&self) -> Self {
        Self::from_letters(self.word.iter().rev().map(|l| l.inv()).collect())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::from_letters(self.word.iter().chain(&other.word).copied().collect())
    }

    pub fn is_identity_matrix(&self) -> bool {
        self.matrix == Matrix4::identity()
    }
}

/// `[X, Y] = XYX⁻¹Y⁻¹`.
pub fn commutator(x: &GroupElement, y: &GroupElement) -> GroupElement {
    x.compose(y).compose(&x.inverse()).compose(&y.inverse())
}

/// The defining relations `[A,B]C⁻² = [A,C] = [B,C] = 1` on the cached matrices.
pub fn heisenberg_relations() -> [GroupElement; 3] {
    let (a, b, c) = (GroupElement::generator(Generator::A), GroupElement::generator(Generator::B), GroupElement::generator(Generator::C));
    let c_inv = c.inverse();
    [commutator(&a, &b).compose(&c_inv).compose(&c_inv), commutator(&a, &c), commutator(&b, &c)]
}

impl FromStr for GroupElement {
    type Err = SewError;

    /// Whitespace-, `*`- or `.`-separated letters, each optionally followed by `^-1`;
    /// `1`, `I`, `e` or the empty string denote the identity.
    fn from_str(s: &str) -> Result<Self> {
        let mut word = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == '*' || c == '.').filter(|t| !t.is_empty()) {
            if matches!(tok, "1" | "I" | "e" | "id") {
                continue;
            }
            let (head, inverse) = match tok.strip_suffix("^-1") {
                Some(h) => (h, true),
                None => (tok, false),
            };
            let gen = match head {
                "A" => Generator::A,
                "B" => Generator::B,
                "C" => Generator::C,
                "S" => Generator::S,
                "T" => Generator::T,
                _ => return Err(SewError::Validation(format!("unknown generator '{tok}'"))),
            };
            word.push(Letter { gen, inverse });
        }
        Ok(Self::from_letters(word))
    }
}

impl TryFrom<String> for GroupElement {
    type Error = SewError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GroupElement> for String {
    fn from(g: GroupElement) -> String {
        g.to_string()
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.word.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A point `(τ, w, ρ)` of the covering space: `l̂ = Log(−ρ/K(w,τ)²) + 2πim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub tau: C64,
    pub w: C64,
    pub rho: C64,
    pub m: i64,
}

impl LiftedPoint {
    pub fn new(tau: C64, w: C64, rho: C64, m: i64) -> Self {
        Self { tau, w, rho, m }
    }

    /// Principal `Log(−ρ/K(w)²)`.
    pub fn principal_log(&self, b: &SeriesBudget) -> Result<C64> {
        let jac = Jacobi::new(Tau::new(self.tau)?, *b)?;
        let k = jac.k(self.w)?;
        Ok((-self.rho / (k * k)).ln())
    }

    pub fn lhat(&self, b: &SeriesBudget) -> Result<C64> {
        Ok(self.principal_log(b)? + TWO_PI_I * self.m as f64)
    }

    /// The sewing configuration on the principal sheet of `log ρ`, default radii.
    pub fn sewing(&self) -> Result<SewingConfig> {
        let sew = SewingConfig::new(Tau::new(self.tau)?, self.w, self.rho);
        sew.validate()?;
        Ok(sew)
    }
}

#[derive(Clone, Copy)]
struct Moving {
    tau: C64,
    w: C64,
    rho: C64,
    lhat: C64,
}

fn step_point(l: Letter, p: Moving) -> Moving {
    if let Some((a, b, c)) = l.heisenberg() {
        let (a, b, c) = (a as f64, b as f64, c as f64);
        Moving {
            w: p.w + TWO_PI_I * (p.tau * a + b),
            lhat: p.lhat + TWO_PI_I * a * a * p.tau + p.w * (2.0 * a) + TWO_PI_I * (a * b + c),
            ..p
        }
    } else {
        let (a1, b1, c1, d1) = l.sl2().unwrap();
        let (a1, b1, c1, d1) = (a1 as f64, b1 as f64, c1 as f64, d1 as f64);
        let f = p.tau * c1 + d1;
        Moving {
            tau: (p.tau * a1 + b1) / f,
            w: p.w / f,
            rho: p.rho / (f * f),
            lhat: p.lhat - p.w * p.w * c1 / (f * TWO_PI_I),
        }
    }
}

/// `l̂(g.x̂)` transported letter by letter from `l̂(x̂)`, together with the image point.
pub fn transported_lhat(g: &GroupElement, p: &LiftedPoint, b: &SeriesBudget) -> Result<(C64, C64, C64, C64)> {
    let mut cur = Moving { tau: p.tau, w: p.w, rho: p.rho, lhat: p.lhat(b)? };
    for &l in g.word.iter().rev() {
        cur = step_point(l, cur);
        Tau::new(cur.tau)?;
    }
    Ok((cur.tau, cur.w, cur.rho, cur.lhat))
}

/// `g.x̂`, with the winding fixed by the transported `l̂`.
pub fn act_point(g: &GroupElement, p: &LiftedPoint, b: &SeriesBudget) -> Result<LiftedPoint> {
    let (tau, w, rho, lhat) = transported_lhat(g, p, b)?;
    let mut out = LiftedPoint { tau, w, rho, m: 0 };
    out.sewing()?;
    let winding = (lhat - out.principal_log(b)?) / TWO_PI_I;
    let m = winding.re.round();
    if (winding - m).norm() > 1e-6 {
        return Err(SewError::BranchAmbiguity(format!("transported l-hat is off the lattice of lifts by {:.3e}", (winding - m).norm())));
    }
    out.m = m as i64;
    Ok(out)
}

fn step_twist(l: Letter, t: TwistConfig) -> TwistConfig {
    let k = t.kappa;
    if let Some((a, b, c)) = l.heisenberg() {
        let (a, b, c) = (a as f64, b as f64, c as f64);
        return TwistConfig {
            alpha1: t.alpha1 - a * k,
            beta1: t.beta1 - b * k,
            beta2: t.beta2 + a * t.beta1 - b * t.alpha1 - c * k + 0.5 * (a * b - c),
            ..t
        };
    }
    let (alpha1, beta1) = match (l.gen, l.inverse) {
        (Generator::S, false) => (t.beta1, -t.alpha1),
        (Generator::S, true) => (-t.beta1, t.alpha1),
        (Generator::T, false) => (t.alpha1, t.beta1 - t.alpha1 - 0.5),
        (Generator::T, true) => (t.alpha1, t.beta1 + t.alpha1 + 0.5),
        _ => unreachable!(),
    };
    TwistConfig { alpha1, beta1, ..t }
}

/// `g.(α₁, β₁, β₂, κ)`; `κ` and `B` are fixed.
pub fn act_twist(g: &GroupElement, tw: &TwistConfig) -> TwistConfig {
    g.word.iter().rev().fold(*tw, |t, &l| step_twist(l, t))
}

fn letter_chi(l: Letter, t: &TwistConfig) -> C64 {
    if l.inverse {
        // χ(g⁻¹, t) = 1/χ(g, g⁻¹.t)
        return letter_chi(l.inv(), &step_twist(l, *t)).inv();
    }
    let (a1, b1, k) = (t.alpha1, t.beta1, t.kappa);
    match l.gen {
        Generator::S => (-TWO_PI_I * a1 * b1).exp(),
        Generator::T => (-I * PI * (a1 * a1 + a1 + 1.0 / 12.0)).exp(),
        _ => {
            let (a, b, c) = l.heisenberg().unwrap();
            (-TWO_PI_I * (b as f64) * a1 * k).exp() * (I * PI * ((a * b - c) as f64) * k * (k + 1.0)).exp()
        }
    }
}

/// `χ(g)` composed along the word: `χ(g₁g₂, t) = χ(g₁, g₂.t)·χ(g₂, t)`.
pub fn chi_multiplier(g: &GroupElement, tw: &TwistConfig) -> C64 {
    let mut t = *tw;
    let mut chi = C64::new(1.0, 0.0);
    for &l in g.word.iter().rev() {
        chi *= letter_chi(l, &t);
        t = step_twist(l, t);
    }
    chi
}

/// `Ẑ = e^{2πiβ₂κ}e^{½κ²l̂}ϑ[α₁;β₁](κw)/η·det(I − T)` at a lifted point, and `det(I − T)`.
pub fn lifted_partition(p: &LiftedPoint, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget) -> Result<(C64, C64)> {
    let sew = p.sewing()?;
    let g = GenusTwo::with_lhat(&sew, tw, n, quad_m, b, p.lhat(b)?)?;
    let det = g.det_i_minus_t();
    Ok((fermionic_prefactor(&g.ker, &sew.tau, b)? * det, det))
}

/// Outcome of an invariance check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Invariance {
    /// `|Ẑ(g.t)(g.x̂)/(χ·Ẑ(t)(x̂)) − 1|`.
    pub residual: f64,
    /// `|det(I − T)(g.t)(g.x̂)/det(I − T)(t)(x̂) − 1|`.
    pub det_residual: f64,
    pub chi: C64,
    pub value: C64,
    pub image_value: C64,
    pub image: LiftedPoint,
}

/// Invariance check with an explicit multiplier (used for fault injection).
pub fn invariance_with_chi(
    g: &GroupElement,
    p: &LiftedPoint,
    tw: &TwistConfig,
    chi: C64,
    n: usize,
    quad_m: usize,
    b: &SeriesBudget,
) -> Result<Invariance> {
    tw.validate()?;
    let image = act_point(g, p, b)?;
    let (z0, d0) = lifted_partition(p, tw, n, quad_m, b)?;
    let (z1, d1) = lifted_partition(&image, &act_twist(g, tw), n, quad_m, b)?;
    Ok(Invariance {
        residual: (z1 / (chi * z0) - 1.0).norm(),
        det_residual: (d1 / d0 - 1.0).norm(),
        chi,
        value: z0,
        image_value: z1,
        image,
    })
}

pub fn invariance_residual(g: &GroupElement, p: &LiftedPoint, tw: &TwistConfig, n: usize, quad_m: usize, b: &SeriesBudget) -> Result<Invariance> {
    invariance_with_chi(g, p, tw, chi_multiplier(g, tw), n, quad_m, b)
}
