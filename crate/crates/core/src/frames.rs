//! The nonuniform translation set, wavelet systems, level energies and frame bounds.
//!
//! Level `j` of a generator `psi` pairs `f` with `D_{p^j} T_lambda psi`. On the frequency side
//! this is `int (D_j f^)(xi) conj(psi^(xi)) chi(lambda xi) dxi` with
//! `D_j f^ = freq_dilate(f^, -j)`. Summing `|.|^2` over one coset `a + Z` of the integer set
//! equals the `L^2(D)` norm of the periodization of `(D_j f^) conj(psi^) chi_a` over `Z`, which
//! is how level energies are evaluated exactly.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, UmfError};
use crate::funcspace::{cell_norm_exp, chi_exponents, inverse_fast_values, map_cell, FreqFn, GridSpec, MAX_GRID_DIM};
use crate::gf::GaloisField;
use crate::localfield::{root_of_unity, sigma, KElem};

/// Largest test-space grid accepted by [`frame_bounds`].
pub const FRAME_DIM_CAP: usize = 4096;

/// `Lambda = Z union (sigma + Z)` with `N = q^nu` and `sigma = u(r)/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParams {
    nu: u32,
    r: u64,
    sigma: KElem,
}

impl LatticeParams {
    pub fn new(field: &GaloisField, nu: u32, r: u64) -> Result<Self> {
        let sigma = sigma(field, nu, r)?;
        Ok(LatticeParams { nu, r, sigma })
    }

    /// `nu = 0`, where `Lambda` collapses to `Z`.
    pub fn uniform(field: &GaloisField) -> Self {
        Self::new(field, 0, 1).expect("r = 1 is a valid offset for nu = 0")
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn sigma(&self) -> &KElem {
        &self.sigma
    }

    pub fn field(&self) -> &GaloisField {
        self.sigma.field()
    }

    /// Exponent `d = 1 + nu` with `p^{-1} N = p^{-d}`.
    pub fn dilation_exp(&self) -> i32 {
        1 + self.nu as i32
    }

    /// `qN = q^{1+nu}`, the number of masks in a setup.
    pub fn qn(&self) -> u64 {
        (self.field().q() as u64).pow(1 + self.nu)
    }

    /// Number of distinct cosets of `Z` making up `Lambda`.
    pub fn cosets(&self) -> usize {
        if self.nu == 0 {
            1
        } else {
            2
        }
    }
}

/// All `lambda` in `Lambda` with `|lambda| <= q^m`, `Z` branch first. For `nu = 0` the two
/// branches are the same set and only one copy is returned.
pub fn lambda_enumerate(lat: &LatticeParams, m: i32) -> Result<Vec<KElem>> {
    if m < 1 {
        return Err(UmfError::Parameter(format!("lambda enumeration needs m >= 1, got {m}")));
    }
    let field = lat.field();
    let count = (field.q() as usize)
        .checked_pow(m as u32)
        .filter(|&c| c <= MAX_GRID_DIM)
        .ok_or_else(|| UmfError::WindowOverflow(format!("q^{m} translates is too many")))?;
    let mut out: Vec<KElem> = (0..count as u64).map(|n| KElem::u(field, n)).collect();
    if lat.cosets() > 1 {
        let shifted = out.iter().map(|u| lat.sigma.try_add(u)).collect::<Result<Vec<_>>>()?;
        out.extend(shifted);
    }
    Ok(out)
}

/// `int (D_j f^) conj(psi^) chi(lam .)`, evaluated cell by cell.
pub fn analysis_coeff(f_hat: &FreqFn, psi_hat: &FreqFn, j: i32, lam: &KElem, lat: &LatticeParams) -> Result<Complex64> {
    let g = product(f_hat, psi_hat, j, lat)?;
    coeff_of_product(&g, lam)
}

fn product(f_hat: &FreqFn, psi_hat: &FreqFn, j: i32, lat: &LatticeParams) -> Result<FreqFn> {
    let neg_j = j.checked_neg().ok_or_else(|| UmfError::WindowOverflow("level out of range".into()))?;
    f_hat.freq_dilate(neg_j, lat.nu())?.mul(&psi_hat.conj())
}

fn coeff_of_product(g: &FreqFn, lam: &KElem) -> Result<Complex64> {
    let grid = g.grid();
    let g = match lam.norm_exp() {
        Some(e) if e > grid.m => g.restrict(GridSpec::new(grid.s, e)?)?,
        _ => g.clone(),
    };
    Ok(g.modulate(lam)?.haar_integral())
}

/// Every coefficient of level `j` that can be nonzero, paired with its translate.
pub fn level_coefficients(f_hat: &FreqFn, psi_hat: &FreqFn, j: i32, lat: &LatticeParams) -> Result<Vec<(KElem, Complex64)>> {
    let g = product(f_hat, psi_hat, j, lat)?;
    let lams = lambda_enumerate(lat, g.grid().m.max(1))?;
    lams.into_iter().map(|lam| coeff_of_product(&g, &lam).map(|c| (lam, c))).collect()
}

/// Linear map from the cells of `f^` to the periodized product `(D_j f^) conj(psi^) chi_a` on
/// `D`, one entry list per coset `a + Z` of `Lambda`.
struct LevelMap {
    field: GaloisField,
    out_grid: GridSpec,
    /// `(f cell, class in D, coefficient)`
    branches: Vec<Vec<(usize, usize, Complex64)>>,
}

impl LevelMap {
    fn new(f_grid: GridSpec, psi: &FreqFn, j: i32, lat: &LatticeParams) -> Result<Self> {
        let field = psi.field();
        let q = field.q() as usize;
        let dj = lat.dilation_exp().checked_mul(j).ok_or_else(|| UmfError::WindowOverflow("level out of range".into()))?;
        let fdil = GridSpec::new(f_grid.s - dj, f_grid.m + dj)?;
        let pg = psi.grid();
        let m = fdil.m.max(pg.m).max(1);
        let s = fdil.s.min(pg.s).max(0);
        let grid = GridSpec::new(s, m)?;
        let out_grid = GridSpec::new(0, m)?;
        let dim = grid.dim(field.q())?;
        let scale = (field.q() as f64).powf(dj as f64 / 2.0);
        let sigma_exps = if lat.cosets() > 1 { Some(chi_exponents(field, &grid, lat.sigma())?) } else { None };
        let p = field.p();
        let div = q.pow(s as u32);
        let mut branches = vec![Vec::new(); lat.cosets()];
        for y in 0..dim {
            let Some(pi) = map_cell(y, q, &pg, &grid) else { continue };
            let w = psi.values()[pi];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let Some(x) = map_cell(y, q, &fdil, &grid) else { continue };
            let coeff = w.conj() * scale;
            let c = y / div;
            branches[0].push((x, c, coeff));
            if let Some(e) = &sigma_exps {
                branches[1].push((x, c, coeff * root_of_unity(p, e[y])));
            }
        }
        Ok(LevelMap { field: field.clone(), out_grid, branches })
    }

    fn periodized(&self, f: &[Complex64], branch: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.out_grid.dim(self.field.q()).expect("checked at construction")];
        for &(x, c, a) in &self.branches[branch] {
            out[c] += a * f[x];
        }
        out
    }

    /// Sum of `|coefficient|^2` over one coset, via the inverse transform on `D`.
    fn branch_energy(&self, f: &[Complex64], branch: usize) -> Result<f64> {
        let g = FreqFn::from_values(&self.field, self.out_grid, self.periodized(f, branch))?;
        Ok(inverse_fast_values(&g)?.iter().map(|v| v.norm_sqr()).sum())
    }

    /// True when no two nonzero cells of the product share a class, i.e. periodization
    /// does not fold the product onto itself.
    fn alias_free(&self, f: &[Complex64]) -> bool {
        let mut seen = BTreeSet::new();
        self.branches[0].iter().filter(|(x, _, a)| (a * f[*x]).norm() > 0.0).all(|&(_, c, _)| seen.insert(c))
    }
}

fn check_field(a: &FreqFn, b: &FreqFn) -> Result<()> {
    if a.field() != b.field() {
        return Err(UmfError::Parameter("functions over different fields".into()));
    }
    Ok(())
}

/// `sum_{lambda in Lambda} |analysis_coeff|^2`.
pub fn level_energy(f_hat: &FreqFn, psi_hat: &FreqFn, j: i32, lat: &LatticeParams) -> Result<f64> {
    check_field(f_hat, psi_hat)?;
    let map = LevelMap::new(f_hat.grid(), psi_hat, j, lat)?;
    (0..lat.cosets()).map(|b| map.branch_energy(f_hat.values(), b)).sum()
}

/// `int |(D_j f^) psi^|^2`, computed without any lattice sum.
pub fn level_energy_closed(f_hat: &FreqFn, psi_hat: &FreqFn, j: i32, lat: &LatticeParams) -> Result<f64> {
    check_field(f_hat, psi_hat)?;
    Ok(product(f_hat, psi_hat, j, lat)?.norm_sq())
}

/// Whether the product at level `j` is free of aliasing, which is exactly when the lattice sum
/// equals `cosets * level_energy_closed`.
pub fn level_comparable(f_hat: &FreqFn, psi_hat: &FreqFn, j: i32, lat: &LatticeParams) -> Result<bool> {
    check_field(f_hat, psi_hat)?;
    Ok(LevelMap::new(f_hat.grid(), psi_hat, j, lat)?.alias_free(f_hat.values()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSystem {
    pub lat: LatticeParams,
    pub psi0_hat: FreqFn,
    pub psi_hat: Vec<FreqFn>,
    /// Inclusive; empty when `j_range.0 > j_range.1`.
    pub j_range: (i32, i32),
}

impl WaveletSystem {
    pub fn new(lat: LatticeParams, psi0_hat: FreqFn, psi_hat: Vec<FreqFn>, j_range: (i32, i32)) -> Result<Self> {
        if psi_hat.is_empty() {
            return Err(UmfError::Validation("a wavelet system needs at least one generator".into()));
        }
        if psi_hat.iter().chain([&psi0_hat]).any(|g| g.field() != lat.field()) {
            return Err(UmfError::Parameter("generators and lattice over different fields".into()));
        }
        Ok(WaveletSystem { lat, psi0_hat, psi_hat, j_range })
    }

    pub fn field(&self) -> &GaloisField {
        self.lat.field()
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> {
        self.j_range.0..=self.j_range.1
    }

    pub fn with_j_range(&self, j_range: (i32, i32)) -> Self {
        WaveletSystem { j_range, ..self.clone() }
    }
}

/// Wavelet energy at each level, summed over generators.
pub fn level_energies(f_hat: &FreqFn, sys: &WaveletSystem) -> Result<Vec<(i32, f64)>> {
    sys.levels()
        .map(|j| {
            let e = sys.psi_hat.iter().map(|psi| level_energy(f_hat, psi, j, &sys.lat)).sum::<Result<f64>>()?;
            Ok((j, e))
        })
        .collect()
}

/// `sum_l sum_j sum_lambda |<f, D_{p^j} T_lambda psi_l>|^2` over the system's levels.
pub fn total_energy(f_hat: &FreqFn, sys: &WaveletSystem) -> Result<f64> {
    Ok(level_energies(f_hat, sys)?.iter().map(|(_, e)| e).sum())
}

/// `sum_{l >= 0} level_energy(psi_l, j - 1) - level_energy(psi_0, j)`, with `psi_0` the
/// low-pass generator.
pub fn telescoping_residual(f_hat: &FreqFn, sys: &WaveletSystem, j: i32) -> Result<f64> {
    let below = [&sys.psi0_hat].into_iter().chain(&sys.psi_hat).map(|psi| level_energy(f_hat, psi, j - 1, &sys.lat)).sum::<Result<f64>>()?;
    Ok(below - level_energy(f_hat, &sys.psi0_hat, j, &sys.lat)?)
}

/// Low-pass energies for `j = j_hi, j_hi - 1, ..., j_lo`.
pub fn low_pass_decay(f_hat: &FreqFn, psi0_hat: &FreqFn, lat: &LatticeParams, j_lo: i32, j_hi: i32) -> Result<Vec<(i32, f64)>> {
    (j_lo..=j_hi).rev().map(|j| Ok((j, level_energy(f_hat, psi0_hat, j, lat)?))).collect()
}

/// Norm exponents `(a, b)` with the support of `f` inside `q^a <= |xi| <= q^b`. A nonzero value
/// on the cell of 0 is read as `a = -m`, the finest representable scale.
pub fn support_annulus<D: crate::funcspace::Domain>(f: &crate::funcspace::GridFn<D>) -> Option<(i32, i32)> {
    let (lo, hi) = f.support_norm_range()?;
    Some((lo.unwrap_or(-f.grid().m), hi))
}

/// Levels at which some generator overlaps the dilated support of a function living on the
/// annulus `(a, b)`. Generators nonzero at 0 are capped at their grid resolution.
pub fn j_range_for(annulus: (i32, i32), generators: &[FreqFn], lat: &LatticeParams) -> Option<(i32, i32)> {
    let d = lat.dilation_exp();
    let (a, b) = annulus;
    let mut out: Option<(i32, i32)> = None;
    for psi in generators {
        let Some((alpha, beta)) = support_annulus(psi) else { continue };
        let lo = (a - beta).div_euclid(d) + i32::from((a - beta).rem_euclid(d) != 0);
        let hi = (b - alpha).div_euclid(d);
        if lo > hi {
            continue;
        }
        out = Some(out.map_or((lo, hi), |(l, h)| (l.min(lo), h.max(hi))));
    }
    out
}

/// Norm exponents of the generators' nonzero cells, and whether the cell of 0 is nonzero.
fn generator_shells(psi: &FreqFn) -> (BTreeSet<i32>, bool) {
    let q = psi.field().q() as usize;
    let mut shells = BTreeSet::new();
    let mut ball = false;
    for (i, v) in psi.values().iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        match cell_norm_exp(i, q, &psi.grid()) {
            Some(e) => {
                shells.insert(e);
            }
            None => ball = true,
        }
    }
    (shells, ball)
}

/// Cells of `grid` (other than the cell of 0) seen by at least one generator at some level.
pub fn covered_cells(sys: &WaveletSystem, grid: GridSpec) -> Result<Vec<usize>> {
    let q = sys.field().q() as usize;
    let dim = grid.dim(sys.field().q())?;
    let d = sys.lat.dilation_exp();
    let gens: Vec<_> = sys.psi_hat.iter().map(|g| (generator_shells(g), g.grid().m)).collect();
    let covered = |e: i32| sys.levels().any(|j| gens.iter().any(|((shells, ball), m)| shells.contains(&(e - d * j)) || (*ball && e - d * j <= -m)));
    Ok((1..dim).filter(|&i| cell_norm_exp(i, q, &grid).is_some_and(covered)).collect())
}

/// Smallest grid holding every norm shell covered by the system's levels, or `None` if nothing
/// is covered. Generators nonzero at 0 contribute the shell just below their resolution.
pub fn covered_grid(sys: &WaveletSystem) -> Result<Option<GridSpec>> {
    let d = sys.lat.dilation_exp();
    let mut range: Option<(i32, i32)> = None;
    for psi in &sys.psi_hat {
        let (shells, ball) = generator_shells(psi);
        let mut exps: Vec<i32> = shells.into_iter().collect();
        if ball {
            exps.push(-psi.grid().m);
        }
        for j in sys.levels() {
            for e in &exps {
                let e = e + d * j;
                range = Some(range.map_or((e, e), |(lo, hi)| (lo.min(e), hi.max(e))));
            }
        }
    }
    match range {
        None => Ok(None),
        Some((lo, hi)) => Ok(Some(GridSpec::new(hi, 1 - lo)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsMethod {
    /// Dense Hermitian eigendecomposition of the frame operator, block by block.
    ExactGram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBounds {
    pub a: f64,
    pub b: f64,
    pub method: BoundsMethod,
    /// Largest `||M v - lambda v||` over the extreme eigenpairs.
    pub residual: f64,
    /// Dimension of the test space.
    pub dim: usize,
    pub blocks: usize,
}

/// The frame operator restricted to a set of cells, kept as rank-one rows
/// `weight * conj(a) a^T` with `a` sparse over the local cell indices.
pub struct FrameOperator {
    field: GaloisField,
    grid: GridSpec,
    cells: Vec<usize>,
    rows: Vec<(f64, Vec<(usize, Complex64)>)>,
}

impl FrameOperator {
    pub fn assemble(sys: &WaveletSystem, grid: GridSpec, cells: &[usize]) -> Result<Self> {
        let q = sys.field().q();
        let dim = grid.dim(q)?;
        let mut local = vec![usize::MAX; dim];
        for (k, &c) in cells.iter().enumerate() {
            if c >= dim {
                return Err(UmfError::Range { value: c as u64, bound: dim as u64 });
            }
            local[c] = k;
        }
        let jobs: Vec<(usize, i32)> = (0..sys.psi_hat.len()).flat_map(|l| sys.levels().map(move |j| (l, j))).collect();
        let per_job: Vec<Vec<(f64, Vec<(usize, Complex64)>)>> = jobs
            .par_iter()
            .map(|&(l, j)| {
                let map = LevelMap::new(grid, &sys.psi_hat[l], j, &sys.lat)?;
                let classes = map.out_grid.dim(q)?;
                // energy weight q^{-m_g}, measured against the cell norm q^{-m_f}
                let weight = (q as f64).powi(grid.m - map.out_grid.m);
                let mut rows = Vec::new();
                for entries in &map.branches {
                    let mut by_class: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); classes];
                    for &(x, c, a) in entries {
                        if local[x] != usize::MAX {
                            by_class[c].push((local[x], a));
                        }
                    }
                    rows.extend(by_class.into_iter().filter(|r| !r.is_empty()).map(|r| (weight, r)));
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        Ok(FrameOperator { field: sys.field().clone(), grid, cells: cells.to_vec(), rows: per_job.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    /// `<S f, f> / ||f||^2`-normalized form: `sum weight |a . f|^2` scaled by `q^{-m}`, which
    /// equals `total_energy(f)` for `f` supported on the operator's cells.
    pub fn quadratic_form(&self, f: &FreqFn) -> Result<f64> {
        if f.grid() != self.grid || f.field() != &self.field {
            return Err(UmfError::Validation("function not on the operator's grid".into()));
        }
        let v = f.values();
        let norm = self.grid.cell_weight(self.field.q());
        Ok(self.rows.iter().map(|(w, r)| w * r.iter().map(|&(k, a)| a * v[self.cells[k]]).sum::<Complex64>().norm_sqr()).sum::<f64>() * norm)
    }

    /// Connected groups of cells coupled by some row.
    fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.cells.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (_, r) in &self.rows {
            let first = find(&mut parent, r[0].0);
            for &(k, _) in &r[1..] {
                let root = find(&mut parent, k);
                parent[root] = first;
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..n {
            let root = find(&mut parent, k);
            groups.entry(root).or_default().push(k);
        }
        groups.into_values().collect()
    }

    pub fn bounds(&self) -> Result<FrameBounds> {
        if self.cells.is_empty() {
            return Err(UmfError::Validation("empty test space".into()));
        }
        let blocks = self.blocks();
        let mut block_of = vec![(0usize, 0usize); self.cells.len()];
        for (b, members) in blocks.iter().enumerate() {
            for (pos, &k) in members.iter().enumerate() {
                block_of[k] = (b, pos);
            }
        }
        let mut rows_by_block: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
        for (i, (_, r)) in self.rows.iter().enumerate() {
            rows_by_block[block_of[r[0].0].0].push(i);
        }
        let results: Vec<(f64, f64, f64)> = blocks
            .par_iter()
            .zip(rows_by_block.par_iter())
            .map(|(members, rows)| {
                let n = members.len();
                let mut m = DMatrix::<Complex64>::zeros(n, n);
                for &ri in rows {
                    let (w, r) = &self.rows[ri];
                    for &(k1, a1) in r {
                        for &(k2, a2) in r {
                            m[(block_of[k1].1, block_of[k2].1)] += a1.conj() * a2 * *w;
                        }
                    }
                }
                if n == 1 {
                    let v = m[(0, 0)].re;
                    return (v, v, 0.0);
                }
                let eig = m.clone().symmetric_eigen();
                let (mut imin, mut imax) = (0, 0);
                for i in 0..n {
                    if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                        imin = i;
                    }
                    if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                        imax = i;
                    }
                }
                let resid = |i: usize| {
                    let v = eig.eigenvectors.column(i);
                    (&m * v - v * Complex64::new(eig.eigenvalues[i], 0.0)).norm()
                };
                (eig.eigenvalues[imin], eig.eigenvalues[imax], resid(imin).max(resid(imax)))
            })
            .collect();
        let a = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let b = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let residual = results.iter().map(|r| r.2).fold(0.0, f64::max);
        Ok(FrameBounds { a: a.max(0.0), b, method: BoundsMethod::ExactGram, residual, dim: self.cells.len(), blocks: blocks.len() })
    }
}

/// Optimal frame bounds over all functions on `grid` supported in the covered annulus.
pub fn frame_bounds(sys: &WaveletSystem, grid: GridSpec) -> Result<FrameBounds> {
    frame_bounds_capped(sys, grid, FRAME_DIM_CAP)
}

pub fn frame_bounds_capped(sys: &WaveletSystem, grid: GridSpec, cap: usize) -> Result<FrameBounds> {
    let dim = grid.dim(sys.field().q())?;
    if dim > cap {
        return Err(UmfError::DimensionCap { dim, cap });
    }
    let cells = covered_cells(sys, grid)?;
    FrameOperator::assemble(sys, grid, &cells)?.bounds()
}
