//! Batch front-end: run configurations, dispatch of evaluations, identity checks and sweeps,
//! and JSON/CSV emission.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::determinants::det_inv_sqrt_i_minus_r;
use crate::elliptic_core::{Characteristic, SeriesBudget, Tau};
use crate::error::{Result, SewError};
use crate::genus2_szego::{domain_check, sewing_multiplier_residual, GenusTwo};
use crate::modular::{chi_multiplier, invariance_with_chi, GroupElement, LiftedPoint};
use crate::partition::{
    fock_sum_oracle, frobenius_residual, gen1_form, gen2_form, triple_product_residual, z1_twisted_2pt, z2_heisenberg, z2_theta_form,
};
use crate::quad::par_map;
use crate::szego_genus1::{s_kappa, SewingConfig, TwistConfig};

pub const SCHEMA: u32 = 1;
pub const MAX_SWEEP_POINTS: usize = 10_000;

/// Exit status: success.
pub const EXIT_OK: i32 = 0;
/// Exit status: a numerical check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status: invalid input.
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "sewkernel", version, about = "Genus-two Szegő kernel and partition function evaluator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Evaluate a single quantity.
    Eval(Io),
    /// Run an identity check against a tolerance.
    Check(Io),
    /// Evaluate a target over a 1- or 2-axis grid.
    Sweep(Io),
}

#[derive(clap::Args, Debug, Clone)]
pub struct Io {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Eval,
    Check,
    Sweep,
}

/// Complex number as `{re, im}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<Cx> for C64 {
    fn from(c: Cx) -> C64 {
        C64::new(c.re, c.im)
    }
}

impl From<C64> for Cx {
    fn from(c: C64) -> Cx {
        Cx { re: c.re, im: c.im }
    }
}

fn cx(re: f64, im: f64) -> Cx {
    Cx { re, im }
}

/// Numerical inputs; every field has a default so that configurations stay short.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub tau: Cx,
    pub w: Cx,
    pub rho: Cx,
    pub alpha1: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub kappa: f64,
    #[serde(rename = "B")]
    pub b: i64,
    pub sheet: i64,
    /// Winding of the lifted logarithm.
    pub m: i64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "quad_M")]
    pub quad_m: usize,
    pub radii: Option<[f64; 2]>,
    pub omega: Option<[[Cx; 2]; 2]>,
    pub x: Cx,
    pub y: Cx,
    pub xs: Option<Vec<Cx>>,
    pub ys: Option<Vec<Cx>>,
    /// Number of point pairs for checks that generate their own points.
    pub n_points: usize,
    /// Puncture label for the sewing check.
    pub a: usize,
    /// Local coordinate at puncture `a`; defaults to `1.3|ρ|^{½}e^{0.3i}`.
    pub z: Option<Cx>,
    /// Weight cutoff for `fock_sum_oracle`.
    #[serde(rename = "W")]
    pub weight: f64,
    /// Word in `A, B, C, S, T` and inverses.
    pub generator: String,
    /// Factor applied to the multiplier in the invariance check.
    pub chi_scale: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            tau: cx(0.0, 1.0),
            w: cx(1.3, 0.9),
            rho: cx(1e-3, 0.0),
            alpha1: 0.2,
            beta1: 0.1,
            beta2: 0.3,
            kappa: 0.3,
            b: 1,
            sheet: 0,
            m: 0,
            n: 12,
            quad_m: 256,
            radii: None,
            omega: None,
            x: cx(0.5, 1.7),
            y: cx(-0.6, -1.5),
            xs: None,
            ys: None,
            n_points: 2,
            a: 1,
            z: None,
            weight: 3.0,
            generator: "T".into(),
            chi_scale: 1.0,
        }
    }
}

/// One sweep axis: a parameter name with explicit values or a linear/log grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    /// `"linear"` (default) or `"log"` (`from`/`to` are base-10 exponents).
    #[serde(default)]
    pub scale: Option<String>,
}

impl Axis {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            return Ok(v.clone());
        }
        let (Some(a), Some(b), Some(n)) = (self.from, self.to, self.count) else {
            return Err(SewError::Validation(format!("axis '{}' needs values or from/to/count", self.param)));
        };
        let lin: Vec<f64> = match n {
            0 => vec![],
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        };
        match self.scale.as_deref() {
            None | Some("linear") => Ok(lin),
            Some("log") => Ok(lin.into_iter().map(|e| 10f64.powf(e)).collect()),
            Some(s) => Err(SewError::Validation(format!("unknown axis scale '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the subcommand when given.
    #[serde(default)]
    pub command: Option<CommandName>,
    pub target: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub sweep: Vec<Axis>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

pub const EVAL_TARGETS: &[&str] = &[
    "z1_twisted_2pt",
    "s_kappa",
    "s2",
    "det_i_minus_t",
    "z2_fermionic",
    "z2_heisenberg",
    "z2_theta_form",
    "fock_sum_oracle",
    "gen1_form",
    "gen2_form",
];

pub const CHECK_TARGETS: &[&str] = &["frobenius", "triple_product", "sewing", "invariance"];

/// Default tolerance of each check.
pub fn default_tolerance(check: &str) -> f64 {
    match check {
        "frobenius" => 1e-9,
        "triple_product" => 1e-4,
        "sewing" => 1e-5,
        _ => 1e-6,
    }
}

impl Params {
    pub fn twist(&self) -> Result<TwistConfig> {
        TwistConfig::new(self.alpha1, self.beta1, self.beta2, self.kappa, self.b)
    }

    pub fn sewing(&self) -> Result<SewingConfig> {
        let mut sew = SewingConfig::new(Tau::new(self.tau.into())?, self.w.into(), self.rho.into()).with_sheet(self.sheet);
        if let Some([r1, r2]) = self.radii {
            sew = sew.with_radii(r1, r2);
        }
        sew.validate()?;
        let report = domain_check(&sew);
        if !report.ok {
            return Err(SewError::Domain(report.diagnostics));
        }
        Ok(sew)
    }

    fn omega(&self) -> Result<[[C64; 2]; 2]> {
        let om = self.omega.ok_or_else(|| SewError::Validation("this target needs the period matrix 'omega'".into()))?;
        Ok(om.map(|row| row.map(C64::from)))
    }

    /// `xs`, `ys` if given, otherwise `n_points` fixed generic points.
    pub fn points(&self) -> Result<(Vec<C64>, Vec<C64>)> {
        match (&self.xs, &self.ys) {
            (Some(xs), Some(ys)) => Ok((xs.iter().map(|&c| c.into()).collect(), ys.iter().map(|&c| c.into()).collect())),
            (None, None) => {
                let n = self.n_points;
                let xs = (0..n).map(|j| C64::new(0.5 - 0.55 * j as f64, 1.7 - 1.1 * j as f64)).collect();
                let ys = (0..n).map(|j| C64::new(-0.6 + 0.35 * j as f64 * j as f64, -1.5 + 1.3 * j as f64)).collect();
                Ok((xs, ys))
            }
            _ => Err(SewError::Validation("give both 'xs' and 'ys' or neither".into())),
        }
    }

    fn lifted(&self) -> LiftedPoint {
        LiftedPoint::new(self.tau.into(), self.w.into(), self.rho.into(), self.m)
    }

    /// Sets a real sweep coordinate.
    pub fn set(&mut self, name: &str, v: f64) -> Result<()> {
        let polar = |c: Cx| C64::from(c).to_polar();
        match name {
            "alpha1" => self.alpha1 = v,
            "beta1" => self.beta1 = v,
            "beta2" => self.beta2 = v,
            "kappa" => self.kappa = v,
            "tau_re" => self.tau.re = v,
            "tau_im" => self.tau.im = v,
            "w_re" => self.w.re = v,
            "w_im" => self.w.im = v,
            "rho_abs" => self.rho = C64::from_polar(v, polar(self.rho).1).into(),
            "rho_arg" => self.rho = C64::from_polar(polar(self.rho).0, v).into(),
            "N" => {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(SewError::Validation(format!("N = {v} is not a non-negative integer")));
                }
                self.n = v as usize
            }
            _ => return Err(SewError::Validation(format!("unknown sweep parameter '{name}'"))),
        }
        Ok(())
    }
}

/// Branch record of an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchInfo {
    #[serde(rename = "B")]
    pub b: i64,
    pub sheet: i64,
    pub m: i64,
    pub log_rho: Cx,
    pub lhat: Cx,
    pub xi: Cx,
}

/// A computed value with its branch record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluated {
    pub value: Cx,
    pub branch: Option<BranchInfo>,
}

fn branch_of(g: &GenusTwo, m: i64) -> BranchInfo {
    let r = g.record();
    BranchInfo { b: r.b, sheet: r.sheet, m, log_rho: r.log_rho.into(), lhat: r.lhat.into(), xi: r.xi.into() }
}

pub fn evaluate(target: &str, p: &Params) -> Result<Evaluated> {
    let b = SeriesBudget::default();
    let plain = |v: C64| Ok(Evaluated { value: v.into(), branch: None });
    let with = |v: C64, g: &GenusTwo| Ok(Evaluated { value: v.into(), branch: Some(branch_of(g, p.m)) });
    match target {
        "z1_twisted_2pt" => plain(z1_twisted_2pt(&p.sewing()?, &p.twist()?, &b)?),
        "s_kappa" => plain(s_kappa(p.x.into(), p.y.into(), &p.sewing()?, &p.twist()?, &b)?),
        "z2_heisenberg" => plain(z2_heisenberg(&p.sewing()?, p.n, &b)?),
        "z2_theta_form" => plain(z2_theta_form(p.omega()?, &p.sewing()?, &p.twist()?, p.n, &b)?),
        "fock_sum_oracle" => plain(fock_sum_oracle(p.weight, &p.sewing()?, &p.twist()?, p.n, p.quad_m, &b)?),
        "gen1_form" => {
            let (xs, ys) = p.points()?;
            plain(gen1_form(&xs, &ys, &p.sewing()?, &p.twist()?, &b)?)
        }
        "s2" | "det_i_minus_t" | "z2_fermionic" | "gen2_form" => {
            let (sew, tw) = (p.sewing()?, p.twist()?);
            let g = GenusTwo::new(&sew, &tw, p.n, p.quad_m, &b)?;
            let v = match target {
                "s2" => g.eval(p.x.into(), p.y.into())?,
                "det_i_minus_t" => g.det_i_minus_t(),
                "z2_fermionic" => crate::partition::fermionic_prefactor(&g.ker, &sew.tau, &b)? * g.det_i_minus_t(),
                _ => {
                    let (xs, ys) = p.points()?;
                    gen2_form(&xs, &ys, &sew, &tw, p.n, p.quad_m, &b)?
                }
            };
            with(v, &g)
        }
        _ => Err(SewError::Validation(format!("unknown eval target '{target}'; expected one of {}", EVAL_TARGETS.join(", ")))),
    }
}

/// Residual of a check at the configured truncation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub residual: f64,
    /// Named auxiliary quantities (multiplier, sign convention, …).
    pub details: Value,
}

pub fn run_check(check: &str, p: &Params) -> Result<CheckOutcome> {
    let b = SeriesBudget::default();
    match check {
        "frobenius" => {
            let (xs, ys) = p.points()?;
            let ch = Characteristic::new(p.alpha1, p.beta1)?;
            let r = frobenius_residual(&xs, &ys, ch, &Tau::new(p.tau.into())?, &b)?;
            Ok(CheckOutcome { residual: r, details: json!({ "n": xs.len() }) })
        }
        "triple_product" => {
            let om = match p.omega {
                Some(_) => Some(p.omega()?),
                None => None,
            };
            let r = triple_product_residual(&p.sewing()?, &p.twist()?, p.n, p.quad_m, &b, om)?;
            let heis = det_inv_sqrt_i_minus_r(p.n, &p.sewing()?, &b)?;
            Ok(CheckOutcome {
                residual: r.residual,
                details: json!({ "residual_tenth": r.residual_tenth, "det_inv_sqrt_i_minus_r": Cx::from(heis) }),
            })
        }
        "sewing" => {
            let sew = p.sewing()?;
            let z = p.z.map(C64::from).unwrap_or_else(|| C64::from_polar(1.3 * sew.rho.norm().sqrt(), 0.3));
            let r = sewing_multiplier_residual(p.a, z, p.y.into(), &sew, &p.twist()?, p.n, p.quad_m)?;
            Ok(CheckOutcome { residual: r.residual, details: json!({ "sign": r.sign, "by_sign": r.by_sign }) })
        }
        "invariance" => {
            let g: GroupElement = p.generator.parse()?;
            let tw = p.twist()?;
            p.sewing()?;
            let chi = chi_multiplier(&g, &tw) * p.chi_scale;
            let r = invariance_with_chi(&g, &p.lifted(), &tw, chi, p.n, p.quad_m, &b)?;
            Ok(CheckOutcome {
                residual: r.residual,
                details: json!({
                    "generator": g.to_string(),
                    "chi": Cx::from(r.chi),
                    "det_residual": r.det_residual,
                    "image": { "tau": Cx::from(r.image.tau), "w": Cx::from(r.image.w), "rho": Cx::from(r.image.rho), "m": r.image.m },
                }),
            })
        }
        _ => Err(SewError::Validation(format!("unknown check '{check}'; expected one of {}", CHECK_TARGETS.join(", ")))),
    }
}

/// Truncations at which a check is repeated for its refinement trace.
fn trace_orders(check: &str, n: usize) -> Vec<usize> {
    if check == "frobenius" {
        return vec![n];
    }
    let mut v: Vec<usize> = [n.saturating_sub(8), n.saturating_sub(4)].into_iter().filter(|&k| k >= 2).collect();
    v.dedup();
    v.push(n);
    v
}

/// Whether a failure is an input problem (exit 2) rather than a numerical one (exit 1).
pub fn is_validation(e: &SewError) -> bool {
    matches!(
        e,
        SewError::Validation(_)
            | SewError::Domain(_)
            | SewError::OutsideAnnulus(_)
            | SewError::Coincident(_)
            | SewError::ChargeImbalance(_)
            | SewError::TooLarge(_)
            | SewError::UnderResolved { .. }
            | SewError::DegenerateCharacteristic(_)
            | SewError::UndefinedKernel
    )
}

fn error_kind(e: &SewError) -> &'static str {
    match e {
        SewError::BudgetExhausted(_) => "budget_exhausted",
        SewError::PoleProximity(_) => "pole_proximity",
        SewError::Domain(_) => "domain",
        SewError::DegenerateCharacteristic(_) => "degenerate_characteristic",
        SewError::UndefinedKernel => "undefined_kernel",
        SewError::Coincident(_) => "coincident",
        SewError::OutsideAnnulus(_) => "outside_annulus",
        SewError::UnderResolved { .. } => "under_resolved",
        SewError::Method(_) => "method",
        SewError::SolveFailed => "solve_failed",
        SewError::ChargeImbalance(_) => "charge_imbalance",
        SewError::TooLarge(_) => "too_large",
        SewError::BranchAmbiguity(_) => "branch_ambiguity",
        SewError::Validation(_) => "validation",
    }
}

/// Machine-readable diagnostic for a failed run.
pub fn diagnostic(e: &SewError) -> Value {
    json!({ "schema": SCHEMA, "error": { "kind": error_kind(e), "message": e.to_string() } })
}

/// Rendered output and exit status.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub body: String,
    pub status: i32,
}

fn cfg_json(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("configuration serializes")
}

fn csv_text(comments: &[(&str, String)], header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut out = String::new();
    for (k, v) in comments {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    let mut w = csv::Writer::from_writer(vec![]);
    let io = |e: csv::Error| SewError::Validation(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| SewError::Validation(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn check_command(cfg: &RunConfig, cmd: CommandName) -> Result<()> {
    match cfg.command {
        Some(c) if c != cmd => Err(SewError::Validation(format!("configuration is for '{c:?}' but the '{cmd:?}' subcommand was used"))),
        _ => Ok(()),
    }
}

pub fn cmd_eval(cfg: &RunConfig, format: Format) -> Result<Report> {
    check_command(cfg, CommandName::Eval)?;
    let p = &cfg.params;
    p.twist()?;
    let ev = evaluate(&cfg.target, p)?;
    let v = json!({
        "schema": SCHEMA,
        "command": "eval",
        "target": cfg.target,
        "config": cfg_json(cfg),
        "value": ev.value,
        "truncation": { "N": p.n, "quad_M": p.quad_m },
        "branch": ev.branch,
    });
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&v).expect("json") + "\n",
        Format::Csv => csv_text(
            &[("schema", SCHEMA.to_string()), ("config", cfg_json(cfg).to_string()), ("branch", json!(ev.branch).to_string())],
            &["target", "value_re", "value_im", "N", "quad_M"].map(String::from),
            &[vec![cfg.target.clone(), num(ev.value.re), num(ev.value.im), p.n.to_string(), p.quad_m.to_string()]],
        )?,
    };
    Ok(Report { body, status: EXIT_OK })
}

pub fn cmd_check(cfg: &RunConfig, format: Format) -> Result<Report> {
    check_command(cfg, CommandName::Check)?;
    let p = &cfg.params;
    let tol = cfg.tolerance.unwrap_or_else(|| default_tolerance(&cfg.target));
    if !(tol > 0.0) {
        return Err(SewError::Validation(format!("tolerance {tol} must be positive")));
    }
    if !CHECK_TARGETS.contains(&cfg.target.as_str()) {
        return Err(SewError::Validation(format!("unknown check '{}'; expected one of {}", cfg.target, CHECK_TARGETS.join(", "))));
    }
    let mut trace = Vec::new();
    let mut last = None;
    for n in trace_orders(&cfg.target, p.n) {
        let q = Params { n, ..p.clone() };
        let out = run_check(&cfg.target, &q)?;
        trace.push((n, out.residual));
        last = Some(out);
    }
    let out = last.expect("at least one truncation");
    let pass = out.residual < tol;
    let status = if pass { EXIT_OK } else { EXIT_CHECK_FAILED };
    let body = match format {
        Format::Json => {
            let v = json!({
                "schema": SCHEMA,
                "command": "check",
                "target": cfg.target,
                "config": cfg_json(cfg),
                "tolerance": tol,
                "residual": out.residual,
                "pass": pass,
                "trace": trace.iter().map(|&(n, r)| json!({ "N": n, "residual": r })).collect::<Vec<_>>(),
                "details": out.details,
            });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        Format::Csv => csv_text(
            &[("schema", SCHEMA.to_string()), ("config", cfg_json(cfg).to_string()), ("details", out.details.to_string())],
            &["target", "N", "residual", "tolerance", "pass"].map(String::from),
            &trace
                .iter()
                .map(|&(n, r)| vec![cfg.target.clone(), n.to_string(), num(r), num(tol), (r < tol).to_string()])
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Report { body, status })
}

pub fn cmd_sweep(cfg: &RunConfig, format: Format) -> Result<Report> {
    check_command(cfg, CommandName::Sweep)?;
    if cfg.sweep.is_empty() || cfg.sweep.len() > 2 {
        return Err(SewError::Validation(format!("a sweep needs 1 or 2 axes, got {}", cfg.sweep.len())));
    }
    let is_check = CHECK_TARGETS.contains(&cfg.target.as_str());
    if !is_check && !EVAL_TARGETS.contains(&cfg.target.as_str()) {
        return Err(SewError::Validation(format!("unknown sweep target '{}'", cfg.target)));
    }
    let grids: Vec<Vec<f64>> = cfg.sweep.iter().map(|a| a.grid()).collect::<Result<_>>()?;
    let total = grids.iter().map(|g| g.len()).product::<usize>();
    if total == 0 {
        return Err(SewError::Validation("sweep grid is empty".into()));
    }
    if total > MAX_SWEEP_POINTS {
        return Err(SewError::TooLarge(format!("sweep grid has {total} points, limit {MAX_SWEEP_POINTS}")));
    }
    let mut points = Vec::with_capacity(total);
    for i in 0..total {
        let coords: Vec<f64> = if grids.len() == 1 {
            vec![grids[0][i]]
        } else {
            let n1 = grids[1].len();
            vec![grids[0][i / n1], grids[1][i % n1]]
        };
        let mut p = cfg.params.clone();
        for (axis, &v) in cfg.sweep.iter().zip(&coords) {
            p.set(&axis.param, v)?;
        }
        points.push((coords, p));
    }
    let target = cfg.target.clone();
    let tol = cfg.tolerance.unwrap_or_else(|| default_tolerance(&target));
    let results = par_map(points, |(coords, p)| {
        let r = if is_check {
            run_check(&target, &p).map(|o| (None, Some(o.residual)))
        } else {
            evaluate(&target, &p).map(|e| (Some(e.value), None))
        };
        (coords, r)
    });
    let mut failed = false;
    let mut rows = Vec::with_capacity(total);
    let mut json_rows = Vec::with_capacity(total);
    for (coords, r) in results {
        let mut row: Vec<String> = coords.iter().map(|&v| num(v)).collect();
        match &r {
            Ok((value, residual)) => {
                if let Some(v) = value {
                    row.extend([num(v.re), num(v.im)]);
                }
                if let Some(res) = residual {
                    failed |= !(*res < tol);
                    row.extend([num(*res), (*res < tol).to_string()]);
                }
                row.push(String::new());
            }
            Err(e) => {
                failed = true;
                row.extend([String::new(), String::new()]);
                row.push(e.to_string());
            }
        }
        json_rows.push(match r {
            Ok((value, residual)) => json!({ "at": coords, "value": value, "residual": residual }),
            Err(e) => json!({ "at": coords, "error": e.to_string() }),
        });
        rows.push(row);
    }
    let mut header: Vec<String> = cfg.sweep.iter().map(|a| a.param.clone()).collect();
    if is_check {
        header.extend(["residual", "pass"].map(String::from));
    } else {
        header.extend(["value_re", "value_im"].map(String::from));
    }
    header.push("error".into());
    let body = match format {
        Format::Csv => csv_text(&[("schema", SCHEMA.to_string()), ("config", cfg_json(cfg).to_string())], &header, &rows)?,
        Format::Json => {
            let v = json!({ "schema": SCHEMA, "command": "sweep", "target": target, "config": cfg_json(cfg), "rows": json_rows });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
    };
    Ok(Report { body, status: if failed { EXIT_CHECK_FAILED } else { EXIT_OK } })
}

/// Reads the configuration, runs the command and writes the output; returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let (cmd, io) = match &cli.command {
        Command::Eval(io) => (CommandName::Eval, io),
        Command::Check(io) => (CommandName::Check, io),
        Command::Sweep(io) => (CommandName::Sweep, io),
    };
    let fail = |e: SewError| {
        eprintln!("{}", diagnostic(&e));
        if is_validation(&e) {
            EXIT_INVALID
        } else {
            EXIT_CHECK_FAILED
        }
    };
    let cfg: RunConfig = match std::fs::read_to_string(&io.config)
        .map_err(|e| SewError::Validation(format!("cannot read {}: {e}", io.config.display())))
        .and_then(|s| serde_json::from_str(&s).map_err(|e| SewError::Validation(format!("bad configuration: {e}"))))
    {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let default_format = if cmd == CommandName::Sweep { Format::Csv } else { Format::Json };
    let format = io.format.or(cfg.format).unwrap_or(default_format);
    let start = std::time::Instant::now();
    let report = match cmd {
        CommandName::Eval => cmd_eval(&cfg, format),
        CommandName::Check => cmd_check(&cfg, format),
        CommandName::Sweep => cmd_sweep(&cfg, format),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    eprintln!("{}", json!({ "elapsed_s": start.elapsed().as_secs_f64() }));
    let out = io.out.clone().or(cfg.out.clone());
    let written = match out {
        Some(path) => std::fs::write(&path, &report.body).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(report.body.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        return fail(SewError::Validation(e));
    }
    report.status
}

/// Caps the worker pool at `SEWKERNEL_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("SEWKERNEL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| SewError::Validation(format!("SEWKERNEL_THREADS = '{v}' is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| SewError::Validation(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}
