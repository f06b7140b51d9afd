//! Setups (a refinable low-pass plus `qN` masks), extension-principle checks, synthesis of the
//! wavelet generators and the weighted-to-unitary normalization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UmfError};
use crate::frames::{covered_grid, LatticeParams, WaveletSystem};
use crate::funcspace::{FreqFn, GridFnRepr, GridSpec};
use crate::gf::{FieldParams, GaloisField};
use crate::localfield::KElem;

/// Tolerance of the cellwise identities.
pub const CHECK_TOL: f64 = 1e-12;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["paper-example-3.1", "shannon", "shannon-corrected-3.1"];

/// Default cap on the covered test grid when [`synthesize`] picks levels itself.
pub const DEFAULT_LEVEL_DIM: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub lat: LatticeParams,
    pub psi0_hat: FreqFn,
    /// `m_0, ..., m_{qN-1}`
    pub masks: Vec<FreqFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupRepr {
    pub field: FieldParams,
    pub nu: u32,
    pub r: u64,
    pub psi0_hat: GridFnRepr,
    pub masks: Vec<GridFnRepr>,
}

impl Setup {
    pub fn new(lat: LatticeParams, psi0_hat: FreqFn, masks: Vec<FreqFn>) -> Result<Self> {
        if masks.iter().chain([&psi0_hat]).any(|f| f.field() != lat.field()) {
            return Err(UmfError::Parameter("setup functions over different fields".into()));
        }
        Ok(Setup { lat, psi0_hat, masks })
    }

    pub fn field(&self) -> &GaloisField {
        self.lat.field()
    }

    pub fn to_repr(&self) -> SetupRepr {
        SetupRepr {
            field: self.field().params().clone(),
            nu: self.lat.nu(),
            r: self.lat.r(),
            psi0_hat: self.psi0_hat.to_repr(),
            masks: self.masks.iter().map(FreqFn::to_repr).collect(),
        }
    }

    pub fn from_repr(repr: &SetupRepr) -> Result<Self> {
        let field = GaloisField::new(repr.field.clone())?;
        let lat = LatticeParams::new(&field, repr.nu, repr.r)?;
        let psi0 = FreqFn::from_repr(&field, &repr.psi0_hat)?;
        let masks = repr.masks.iter().map(|m| FreqFn::from_repr(&field, m)).collect::<Result<_>>()?;
        Setup::new(lat, psi0, masks)
    }

    fn require_arity(&self) -> Result<()> {
        let qn = self.lat.qn() as usize;
        if self.masks.len() != qn {
            return Err(UmfError::InvalidSetup(format!("expected {qn} masks, got {}", self.masks.len())));
        }
        Ok(())
    }

    /// Grid holding the low-pass and every mask.
    fn joint_grid(&self) -> GridSpec {
        self.masks.iter().fold(self.psi0_hat.grid(), |g, m| g.join(&m.grid()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    /// Offending cells, canonical order, on the grid named in `detail`.
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub checks: Vec<Check>,
}

impl Diagnostics {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn grid_label(g: GridSpec) -> String {
    format!("grid (s={}, m={})", g.s, g.m)
}

/// Checks every setup invariant and reports offending cells instead of failing.
pub fn validate_setup(setup: &Setup) -> Diagnostics {
    let mut checks = Vec::new();
    let qn = setup.lat.qn() as usize;
    checks.push(Check { name: "arity", pass: setup.masks.len() == qn, detail: format!("{} masks, expected {qn}", setup.masks.len()), cells: vec![] });

    let psi0 = &setup.psi0_hat;
    let limit = 2 + setup.lat.nu() as i32;
    let outside: Vec<usize> =
        (0..psi0.dim()).filter(|&i| psi0.values()[i] != Complex64::new(0.0, 0.0) && psi0.cell_norm_exp(i).is_some_and(|e| e > limit)).collect();
    checks.push(Check {
        name: "support",
        pass: outside.is_empty(),
        detail: format!("support within |xi| <= q^{limit}; {}", grid_label(psi0.grid())),
        cells: outside,
    });

    match setup.masks.first() {
        Some(m0) => {
            let d = setup.lat.dilation_exp();
            let pg = psi0.grid();
            let grid = GridSpec { s: pg.s, m: (pg.m + d).max(m0.grid().m) };
            let bad: Vec<usize> = match FreqFn::zeros(setup.field(), grid) {
                Ok(cells) => (0..cells.dim())
                    .filter(|&i| {
                        let xi = cells.cell_elem(i);
                        let lhs = psi0.value_at(&xi.shift(-d));
                        let rhs = m0.value_at(&xi) * psi0.value_at(&xi);
                        (lhs - rhs).norm() > CHECK_TOL
                    })
                    .collect(),
                Err(e) => {
                    checks.push(Check { name: "refinement", pass: false, detail: e.to_string(), cells: vec![] });
                    return finish(checks, psi0);
                }
            };
            checks.push(Check {
                name: "refinement",
                pass: bad.is_empty(),
                detail: format!("psi0(p^-{d} xi) = m0(xi) psi0(xi); {}", grid_label(grid)),
                cells: bad,
            });
        }
        None => checks.push(Check { name: "refinement", pass: false, detail: "no low-pass mask".into(), cells: vec![] }),
    }
    finish(checks, psi0)
}

fn finish(mut checks: Vec<Check>, psi0: &FreqFn) -> Diagnostics {
    let v0 = psi0.values()[0];
    let ok = (v0 - Complex64::new(1.0, 0.0)).norm() <= CHECK_TOL;
    checks.push(Check {
        name: "small_ball",
        pass: ok,
        detail: format!("psi0 = {v0} on the cell of 0; {}", grid_label(psi0.grid())),
        cells: if ok { vec![] } else { vec![0] },
    });
    Diagnostics { checks }
}

/// Cellwise outcome of a mask identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub pass: bool,
    pub max_residual: f64,
    pub grid: GridSpec,
    pub checked_cells: usize,
    /// `(cell, residual)` for every checked cell above tolerance.
    pub failing: Vec<(usize, f64)>,
}

fn identity_report(setup: &Setup, grid: GridSpec, strict: bool, tol: f64, residual: impl Fn(&KElem) -> f64) -> Result<IdentityReport> {
    let cells = FreqFn::zeros(setup.field(), grid)?;
    let mut max_residual: f64 = 0.0;
    let mut failing = Vec::new();
    let mut checked = 0;
    for i in 0..cells.dim() {
        let xi = cells.cell_elem(i);
        if !strict && setup.psi0_hat.value_at(&xi) == Complex64::new(0.0, 0.0) {
            continue;
        }
        checked += 1;
        let r = residual(&xi);
        max_residual = max_residual.max(r);
        if r > tol {
            failing.push((i, r));
        }
    }
    Ok(IdentityReport { pass: failing.is_empty(), max_residual, grid, checked_cells: checked, failing })
}

/// `|sum_l |m_l(xi)|^2 - 1|` on the cells where `psi0 != 0`, or on every cell when `strict`.
/// Only the mask count is required of the setup; the other invariants are reported by
/// [`validate_setup`].
pub fn uep_check(setup: &Setup, strict: bool) -> Result<IdentityReport> {
    uep_check_tol(setup, strict, CHECK_TOL)
}

pub fn uep_check_tol(setup: &Setup, strict: bool, tol: f64) -> Result<IdentityReport> {
    setup.require_arity()?;
    if !(tol > 0.0) {
        return Err(UmfError::Validation("tolerance must be positive".into()));
    }
    identity_report(setup, setup.joint_grid(), strict, tol, |xi| (setup.masks.iter().map(|m| m.value_at(xi).norm_sqr()).sum::<f64>() - 1.0).abs())
}

/// Strictly positive weight for the oblique principle. Values come from `phi` inside its window
/// and equal `exterior` outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct OepWeight {
    phi: FreqFn,
    exterior: f64,
}

impl OepWeight {
    pub fn new(phi: FreqFn, exterior: f64) -> Result<Self> {
        if phi.values().iter().any(|v| v.im != 0.0 || v.re <= 0.0) || exterior <= 0.0 || !exterior.is_finite() {
            return Err(UmfError::Validation("weight must be real and strictly positive".into()));
        }
        if (phi.values()[0].re - 1.0).abs() > CHECK_TOL {
            return Err(UmfError::Validation("weight must be 1 on the cell of 0".into()));
        }
        Ok(OepWeight { phi, exterior })
    }

    pub fn constant_one(field: &GaloisField, grid: GridSpec) -> Result<Self> {
        let phi = FreqFn::from_values(field, grid, vec![Complex64::new(1.0, 0.0); grid.dim(field.q())?])?;
        Self::new(phi, 1.0)
    }

    pub fn phi(&self) -> &FreqFn {
        &self.phi
    }

    pub fn exterior(&self) -> f64 {
        self.exterior
    }

    pub fn value_at(&self, x: &KElem) -> f64 {
        self.phi.cell_index(x).map_or(self.exterior, |i| self.phi.values()[i].re)
    }
}

/// Grid fine enough for both `phi(xi)` and `phi(p^{-d} xi)` alongside the setup.
fn weighted_grid(setup: &Setup, w: &OepWeight) -> GridSpec {
    let d = setup.lat.dilation_exp();
    let g = setup.joint_grid();
    GridSpec { s: g.s, m: g.m.max(w.phi.grid().m + d) }
}

/// `|phi(p^{-d} xi)|m_0|^2 + sum_{l>=1}|m_l|^2 - phi(xi)|`, cells chosen as in [`uep_check`].
pub fn oep_check(setup: &Setup, w: &OepWeight, strict: bool) -> Result<IdentityReport> {
    setup.require_arity()?;
    if w.phi.field() != setup.field() {
        return Err(UmfError::Parameter("weight over a different field".into()));
    }
    let d = setup.lat.dilation_exp();
    identity_report(setup, weighted_grid(setup, w), strict, CHECK_TOL, |xi| {
        let low = w.value_at(&xi.shift(-d)) * setup.masks[0].value_at(xi).norm_sqr();
        let high: f64 = setup.masks[1..].iter().map(|m| m.value_at(xi).norm_sqr()).sum();
        (low + high - w.value_at(xi)).abs()
    })
}

/// `psi_l^ = (qN)^{1/2} freq_dilate(m_l psi0^, 1)`, i.e. `psi_l^(p^{-d} xi) = m_l(xi) psi0^(xi)`.
pub fn synthesize_generators(setup: &Setup) -> Result<Vec<FreqFn>> {
    setup.require_arity()?;
    let nu = setup.lat.nu();
    let root = (setup.lat.qn() as f64).sqrt();
    setup.masks[1..].iter().map(|m| Ok(m.mul(&setup.psi0_hat)?.freq_dilate(1, nu)?.scale(Complex64::new(root, 0.0)))).collect()
}

/// Generators plus levels. Without an explicit range the levels grow outward from `j = 0`
/// while the covered test grid stays within [`DEFAULT_LEVEL_DIM`] cells.
pub fn synthesize(setup: &Setup, j_range: Option<(i32, i32)>) -> Result<WaveletSystem> {
    let gens = synthesize_generators(setup)?;
    let sys = WaveletSystem::new(setup.lat.clone(), setup.psi0_hat.clone(), gens, (0, 0))?;
    match j_range {
        Some(r) => Ok(sys.with_j_range(r)),
        None => default_levels(sys),
    }
}

fn default_levels(sys: WaveletSystem) -> Result<WaveletSystem> {
    let q = sys.field().q();
    let fits = |s: &WaveletSystem| -> bool { matches!(covered_grid(s), Ok(Some(g)) if g.dim(q).is_ok_and(|d| d <= DEFAULT_LEVEL_DIM)) };
    let mut cur = sys;
    if !fits(&cur) {
        return Ok(cur);
    }
    for step in 0..32 {
        let (lo, hi) = cur.j_range;
        let next = if step % 2 == 0 { cur.with_j_range((lo, hi + 1)) } else { cur.with_j_range((lo - 1, hi)) };
        if !fits(&next) {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

/// High-pass masks solving the weighted identity for a given low-pass mask and weight: the
/// `qN - 1` masks are equal with `|m_l|^2 = (phi(xi) - phi(p^{-d} xi)|m_0(xi)|^2) / (qN - 1)` on
/// the support of `psi0^` and zero elsewhere. Fails when the right side is negative somewhere.
pub fn oep_masks_from_weight(lat: &LatticeParams, psi0: &FreqFn, m0: &FreqFn, w: &OepWeight) -> Result<Setup> {
    let d = lat.dilation_exp();
    let field = psi0.field();
    let g = psi0.grid().join(&m0.grid());
    let grid = GridSpec { s: g.s, m: g.m.max(w.phi.grid().m + d) };
    let denom = (lat.qn() - 1) as f64;
    let mut negative = Vec::new();
    let high = FreqFn::from_fn(field, grid, |xi| {
        if psi0.value_at(xi) == Complex64::new(0.0, 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let v = (w.value_at(xi) - w.value_at(&xi.shift(-d)) * m0.value_at(xi).norm_sqr()) / denom;
        if v < -CHECK_TOL {
            negative.push(xi.clone());
        }
        Complex64::new(v.max(0.0).sqrt(), 0.0)
    })?;
    if !negative.is_empty() {
        return Err(UmfError::Validation(format!("weight leaves a negative high-pass energy on {} cells of the low-pass support", negative.len())));
    }
    let mut masks = vec![m0.clone()];
    masks.extend(std::iter::repeat_n(high, lat.qn() as usize - 1));
    Setup::new(lat.clone(), psi0.clone(), masks)
}

/// The weighted-to-unitary change of variables:
/// `psi0~ = sqrt(phi) psi0`, `m0~ = sqrt(phi(p^{-d} .)/phi) m0`, `m_l~ = m_l / sqrt(phi)`.
/// The result is checked against the unitary identity, the support and refinement of the
/// original, its value at 0, and the original generators.
pub fn oep_normalize(setup: &Setup, w: &OepWeight) -> Result<Setup> {
    let report = oep_check(setup, w, false)?;
    if !report.pass {
        return Err(UmfError::CheckFailed(format!("weighted identity fails, residual {:e}", report.max_residual)));
    }
    let d = setup.lat.dilation_exp();
    let field = setup.field();
    let pg = setup.psi0_hat.grid().join(&w.phi.grid());
    let psi0 = FreqFn::from_fn(field, pg, |xi| setup.psi0_hat.value_at(xi) * w.value_at(xi).sqrt())?;
    let m0 = &setup.masks[0];
    let g0 = m0.grid().join(&w.phi.grid());
    let g0 = GridSpec { s: g0.s, m: g0.m.max(w.phi.grid().m + d) };
    let mut masks = vec![FreqFn::from_fn(field, g0, |xi| m0.value_at(xi) * (w.value_at(&xi.shift(-d)) / w.value_at(xi)).sqrt())?];
    for m in &setup.masks[1..] {
        let g = m.grid().join(&w.phi.grid());
        masks.push(FreqFn::from_fn(field, g, |xi| m.value_at(xi) / w.value_at(xi).sqrt())?);
    }
    let keep = |f: FreqFn, like: &FreqFn| f.coarsen(like.grid()).unwrap_or(f);
    let psi0 = keep(psi0, &setup.psi0_hat);
    let masks = masks.into_iter().zip(&setup.masks).map(|(m, like)| keep(m, like)).collect();
    let out = Setup::new(setup.lat.clone(), psi0, masks)?;

    let uep = uep_check(&out, false)?;
    if !uep.pass {
        return Err(UmfError::CheckFailed(format!("normalized masks fail the unitary identity, residual {:e}", uep.max_residual)));
    }
    let same_support = (0..out.psi0_hat.dim()).all(|i| {
        let xi = out.psi0_hat.cell_elem(i);
        (out.psi0_hat.values()[i] == Complex64::new(0.0, 0.0)) == (setup.psi0_hat.value_at(&xi) == Complex64::new(0.0, 0.0))
    });
    if !same_support {
        return Err(UmfError::CheckFailed("normalized low-pass changed support".into()));
    }
    let (before, after) = (validate_setup(setup), validate_setup(&out));
    for name in ["refinement", "small_ball"] {
        if before.get(name).is_some_and(|c| c.pass) && !after.get(name).is_some_and(|c| c.pass) {
            return Err(UmfError::CheckFailed(format!("normalized setup fails the {name} check")));
        }
    }
    let dev = max_generator_deviation(&synthesize_generators(setup)?, &synthesize_generators(&out)?)?;
    if dev > CHECK_TOL {
        return Err(UmfError::CheckFailed(format!("normalized generators differ by {dev:e}")));
    }
    Ok(out)
}

/// Largest cellwise difference between two generator lists, on joined grids.
pub fn max_generator_deviation(a: &[FreqFn], b: &[FreqFn]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(UmfError::Validation("generator counts differ".into()));
    }
    let mut dev: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x.add(&y.scale(Complex64::new(-1.0, 0.0)))?;
        dev = diff.values().iter().map(|v| v.norm()).fold(dev, f64::max);
    }
    Ok(dev)
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Low-pass `1_{B^k}` with the contracted-ball mask `m_0 = 1_{B^{k+d}}` and `qN - 1` equal
/// high-pass masks `(qN - 1)^{-1/2} 1_{B^k \ B^{k+d}}`.
pub fn shannon_setup(field: &GaloisField, nu: u32, r: u64, k: i32) -> Result<Setup> {
    let lat = LatticeParams::new(field, nu, r)?;
    let d = lat.dilation_exp();
    let grid = GridSpec::new(-k, k + d)?;
    let psi0 = FreqFn::indicator(field, grid, k)?;
    let m0 = FreqFn::indicator(field, grid, k + d)?;
    let c = 1.0 / ((lat.qn() - 1) as f64).sqrt();
    let shell = psi0.add(&m0.scale(-one()))?.scale(Complex64::new(c, 0.0));
    let mut masks = vec![m0];
    masks.extend(std::iter::repeat_n(shell, lat.qn() as usize - 1));
    Setup::new(lat, psi0, masks)
}

/// Low-pass `1_{B^{-(2+nu)}}` with `m_0` the contracted ball, `m_1` its complement in the
/// window, and `m_2`, `m_3` the constants given (four masks, so `qN = 4`).
fn example_setup(field: &GaloisField, nu: u32, r: u64, m2: Complex64, m3: Complex64) -> Result<Setup> {
    let lat = LatticeParams::new(field, nu, r)?;
    if lat.qn() != 4 {
        return Err(UmfError::Unsupported(format!("this example has four masks; qN = {}", lat.qn())));
    }
    let d = lat.dilation_exp();
    let k = -(2 + nu as i32);
    let grid = GridSpec::new(-k, k + d)?;
    let psi0 = FreqFn::indicator(field, grid, k)?;
    let m0 = FreqFn::indicator(field, grid, k + d)?;
    let m1 = psi0.add(&m0.scale(-one()))?;
    let constant = |c: Complex64| psi0.map(|_| c);
    Setup::new(lat, psi0.clone(), vec![m0, m1, constant(m2), constant(m3)])
}

pub fn builtin(name: &str, field: &FieldParams, nu: u32, r: u64) -> Result<Setup> {
    let field = GaloisField::new(field.clone())?;
    let zero = Complex64::new(0.0, 0.0);
    match name {
        "paper-example-3.1" => example_setup(&field, nu, r, one(), Complex64::new(0.0, 1.0)),
        "shannon-corrected-3.1" => example_setup(&field, nu, r, zero, zero),
        "shannon" => shannon_setup(&field, nu, r, 1 + nu as i32),
        other => Err(UmfError::Parameter(format!("unknown builtin {other:?}; expected one of {}", BUILTIN_NAMES.join(", ")))),
    }
}

/// Shannon setup with a weight equal to 1 on the contracted ball and 1/2 elsewhere, and the
/// high-pass masks solved from the weighted identity.
pub fn oep_instance(field: &GaloisField, nu: u32, r: u64) -> Result<(Setup, OepWeight)> {
    let base = shannon_setup(field, nu, r, 1 + nu as i32)?;
    let d = base.lat.dilation_exp();
    let grid = GridSpec::new(0, 2 * d)?;
    let contracted = 2 * d;
    let phi = FreqFn::from_norm_fn(field, grid, |e| match e {
        Some(e) if e > -contracted => Complex64::new(0.5, 0.0),
        _ => one(),
    })?;
    let w = OepWeight::new(phi, 0.5)?;
    let setup = oep_masks_from_weight(&base.lat, &base.psi0_hat, &base.masks[0], &w)?;
    Ok((setup, w))
}
