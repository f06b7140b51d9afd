//! Piecewise-constant, compactly supported functions on quotient grids `B^{-s} / B^m`.
//!
//! A grid `(s, m)` has `q^{s+m}` cells. The cell with representative
//! `xi = sum_{l=-s}^{m-1} c_l p^l` sits at index `sum_t digit(c_{-s+t}) q^t`, so the lowest
//! exponent is the least significant digit. Haar measure is normalized to `mu(D) = 1`, so every
//! cell weighs `q^{-m}`.

use std::marker::PhantomData;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UmfError};
use crate::gf::GaloisField;
use crate::localfield::{root_of_unity, KElem};

/// Largest |s| or |m| accepted for a grid window.
pub const MAX_WINDOW_EXP: i32 = 256;
/// Largest number of cells any grid function may allocate.
pub const MAX_GRID_DIM: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub s: i32,
    pub m: i32,
}

impl GridSpec {
    pub fn new(s: i32, m: i32) -> Result<Self> {
        if s + m < 1 {
            return Err(UmfError::WindowOverflow(format!("grid (s={s}, m={m}) needs s + m >= 1")));
        }
        if s.abs() > MAX_WINDOW_EXP || m.abs() > MAX_WINDOW_EXP {
            return Err(UmfError::WindowOverflow(format!("grid (s={s}, m={m}) exceeds |exp| <= {MAX_WINDOW_EXP}")));
        }
        Ok(GridSpec { s, m })
    }

    /// Number of digits per cell representative.
    pub fn digits(&self) -> usize {
        (self.s + self.m) as usize
    }

    /// Lowest stored exponent, `-s`.
    pub fn lo(&self) -> i32 {
        -self.s
    }

    pub fn dim(&self, q: u32) -> Result<usize> {
        (q as usize)
            .checked_pow(self.digits() as u32)
            .filter(|&d| d <= MAX_GRID_DIM)
            .ok_or_else(|| UmfError::WindowOverflow(format!("grid (s={}, m={}) over q={q} is too large", self.s, self.m)))
    }

    pub fn contains(&self, other: &GridSpec) -> bool {
        self.s >= other.s && self.m >= other.m
    }

    /// Smallest grid containing both.
    pub fn join(&self, other: &GridSpec) -> GridSpec {
        GridSpec { s: self.s.max(other.s), m: self.m.max(other.m) }
    }

    /// The dual grid carrying the transform: support and resolution swap.
    pub fn dual(&self) -> GridSpec {
        GridSpec { s: self.m, m: self.s }
    }

    pub fn cell_weight(&self, q: u32) -> f64 {
        (q as f64).powi(-self.m)
    }
}

/// Maps a cell index of `to` onto the index of the containing cell of `from`, assuming
/// `to.m >= from.m`. Returns `None` when the cell lies outside the support window of `from`.
#[inline]
pub(crate) fn map_cell(n: usize, q: usize, from: &GridSpec, to: &GridSpec) -> Option<usize> {
    let shift = to.s - from.s;
    let from_dim = q.pow(from.digits() as u32);
    if shift >= 0 {
        let div = q.pow(shift as u32);
        if n % div != 0 {
            return None;
        }
        Some((n / div) % from_dim)
    } else {
        let mul = q.pow((-shift) as u32);
        Some((n * mul) % from_dim)
    }
}

/// Exponent `e` such that the cell representative has norm `q^e`; `None` for the cell of 0.
#[inline]
pub(crate) fn cell_norm_exp(idx: usize, q: usize, grid: &GridSpec) -> Option<i32> {
    if idx == 0 {
        return None;
    }
    let mut t = 0;
    let mut i = idx;
    while i % q == 0 {
        i /= q;
        t += 1;
    }
    Some(-(grid.lo() + t))
}

/// Digit values of a cell, lowest exponent first.
pub(crate) fn cell_digits(idx: usize, q: usize, len: usize, out: &mut [u32]) {
    let mut i = idx;
    for d in out.iter_mut().take(len) {
        *d = (i % q) as u32;
        i /= q;
    }
}

/// Which side of the transform a function lives on.
pub trait Domain: Clone + Copy + std::fmt::Debug + PartialEq + Default {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Freq;
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Time;
impl Domain for Freq {}
impl Domain for Time {}

/// A piecewise-constant function on a grid; values in canonical cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn<D: Domain> {
    field: GaloisField,
    grid: GridSpec,
    values: Vec<Complex64>,
    _domain: PhantomData<D>,
}

pub type FreqFn = GridFn<Freq>;
pub type TimeFn = GridFn<Time>;

/// JSON form `{"s": int, "m": int, "values": [[re, im], ...]}` in canonical cell order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFnRepr {
    pub s: i32,
    pub m: i32,
    pub values: Vec<[f64; 2]>,
}

impl<D: Domain> GridFn<D> {
    pub fn zeros(field: &GaloisField, grid: GridSpec) -> Result<Self> {
        let dim = grid.dim(field.q())?;
        Ok(GridFn { field: field.clone(), grid, values: vec![Complex64::new(0.0, 0.0); dim], _domain: PhantomData })
    }

    pub fn from_values(field: &GaloisField, grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        let dim = grid.dim(field.q())?;
        if values.len() != dim {
            return Err(UmfError::Validation(format!("expected {dim} values, got {}", values.len())));
        }
        Ok(GridFn { field: field.clone(), grid, values, _domain: PhantomData })
    }

    /// Builds a function from its value at each cell representative.
    pub fn from_fn(field: &GaloisField, grid: GridSpec, mut f: impl FnMut(&KElem) -> Complex64) -> Result<Self> {
        let mut out = Self::zeros(field, grid)?;
        for idx in 0..out.values.len() {
            out.values[idx] = f(&out.cell_elem(idx));
        }
        Ok(out)
    }

    /// Builds a function from the norm exponent of each cell (`None` for the cell of 0).
    pub fn from_norm_fn(field: &GaloisField, grid: GridSpec, f: impl Fn(Option<i32>) -> Complex64) -> Result<Self> {
        let mut out = Self::zeros(field, grid)?;
        let q = field.q() as usize;
        for (idx, v) in out.values.iter_mut().enumerate() {
            *v = f(cell_norm_exp(idx, q, &grid));
        }
        Ok(out)
    }

    /// `1` on the cells inside `B^k`, zero elsewhere; requires `-s <= k <= m`.
    pub fn indicator(field: &GaloisField, grid: GridSpec, k: i32) -> Result<Self> {
        if k < -grid.s || k > grid.m {
            return Err(UmfError::WindowOverflow(format!("ball B^{k} outside window (s={}, m={})", grid.s, grid.m)));
        }
        Self::from_norm_fn(field, grid, |e| match e {
            Some(e) if e > -k => Complex64::new(0.0, 0.0),
            _ => Complex64::new(1.0, 0.0),
        })
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn q(&self) -> usize {
        self.field.q() as usize
    }

    pub fn cell_elem(&self, idx: usize) -> KElem {
        let q = self.q();
        let mut i = idx;
        let mut digits = Vec::new();
        for t in 0..self.grid.digits() {
            digits.push((self.grid.lo() + t as i32, (i % q) as u32));
            i /= q;
        }
        KElem::from_digits(&self.field, digits).expect("digits in range")
    }

    /// Index of the cell containing `x`, or `None` when `x` is outside the support window.
    pub fn cell_index(&self, x: &KElem) -> Option<usize> {
        if x.valuation().is_some_and(|v| v < self.grid.lo()) {
            return None;
        }
        let q = self.q();
        let mut idx = 0;
        let mut scale = 1;
        for t in 0..self.grid.digits() {
            idx += x.digit(self.grid.lo() + t as i32) as usize * scale;
            scale *= q;
        }
        Some(idx)
    }

    /// Pointwise value; zero outside the support window.
    pub fn value_at(&self, x: &KElem) -> Complex64 {
        self.cell_index(x).map_or(Complex64::new(0.0, 0.0), |i| self.values[i])
    }

    pub fn cell_norm_exp(&self, idx: usize) -> Option<i32> {
        cell_norm_exp(idx, self.q(), &self.grid)
    }

    pub fn haar_integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_weight(self.field.q())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_weight(self.field.q())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }

    fn same_field(&self, other_field: &GaloisField) -> Result<()> {
        if &self.field != other_field {
            return Err(UmfError::Parameter(format!("mismatched fields {:?} and {:?}", self.field, other_field)));
        }
        Ok(())
    }

    /// `<f, g> = int f conj(g)`, computed on the smallest grid containing both.
    pub fn inner(&self, other: &GridFn<D>) -> Result<Complex64> {
        self.same_field(&other.field)?;
        let grid = self.grid.join(&other.grid);
        let (a, b) = (self.refine(grid)?, other.refine(grid)?);
        let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y.conj()).sum();
        Ok(s * grid.cell_weight(self.field.q()))
    }

    /// Value-preserving embedding into a containing grid.
    pub fn refine(&self, grid: GridSpec) -> Result<Self> {
        if !grid.contains(&self.grid) {
            return Err(UmfError::WindowOverflow(format!("grid (s={}, m={}) does not contain (s={}, m={})", grid.s, grid.m, self.grid.s, self.grid.m)));
        }
        self.restrict(grid)
    }

    /// `f * 1_{B^{-grid.s}}` expressed on `grid`, which must be at least as fine as `f`'s grid.
    pub fn restrict(&self, grid: GridSpec) -> Result<Self> {
        if grid.m < self.grid.m {
            return Err(UmfError::WindowOverflow(format!("target resolution m={} is coarser than source m={}", grid.m, self.grid.m)));
        }
        let grid = GridSpec::new(grid.s, grid.m)?;
        if grid == self.grid {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(&self.field, grid)?;
        let q = self.q();
        for (n, v) in out.values.iter_mut().enumerate() {
            if let Some(i) = map_cell(n, q, &self.grid, &grid) {
                *v = self.values[i];
            }
        }
        Ok(out)
    }

    /// The same function on a coarser or smaller grid, if it is representable there exactly:
    /// zero outside the target window and constant on each target cell.
    pub fn coarsen(&self, grid: GridSpec) -> Option<Self> {
        if self.grid.m < grid.m {
            return None;
        }
        let q = self.q();
        let mut out = Self::zeros(&self.field, grid).ok()?;
        let mut seen = vec![false; out.values.len()];
        for (n, v) in self.values.iter().enumerate() {
            match map_cell(n, q, &grid, &self.grid) {
                None if *v != Complex64::new(0.0, 0.0) => return None,
                None => {}
                Some(i) if seen[i] => {
                    if out.values[i] != *v {
                        return None;
                    }
                }
                Some(i) => {
                    seen[i] = true;
                    out.values[i] = *v;
                }
            }
        }
        Some(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Pointwise sum on the joined grid.
    pub fn add(&self, other: &GridFn<D>) -> Result<Self> {
        self.same_field(&other.field)?;
        let grid = self.grid.join(&other.grid);
        let mut a = self.refine(grid)?;
        let b = other.refine(grid)?;
        a.values.iter_mut().zip(&b.values).for_each(|(x, y)| *x += y);
        Ok(a)
    }

    /// Pointwise product. The product is supported in the smaller window and needs the finer
    /// resolution, so it lives on `(min s, max m)`.
    pub fn mul(&self, other: &GridFn<D>) -> Result<Self> {
        self.same_field(&other.field)?;
        let m = self.grid.m.max(other.grid.m);
        let s = self.grid.s.min(other.grid.s).max(1 - m);
        let grid = GridSpec::new(s, m)?;
        let mut a = self.restrict(grid)?;
        let b = other.restrict(grid)?;
        a.values.iter_mut().zip(&b.values).for_each(|(x, y)| *x *= y);
        Ok(a)
    }

    /// Smallest and largest norm exponents over nonzero cells. The cell of 0 reports `None` as
    /// its lower end.
    pub fn support_norm_range(&self) -> Option<(Option<i32>, i32)> {
        let q = self.q();
        let mut lo: Option<Option<i32>> = None;
        let mut hi: Option<i32> = None;
        for (i, v) in self.values.iter().enumerate() {
            if *v == Complex64::new(0.0, 0.0) {
                continue;
            }
            let e = cell_norm_exp(i, q, &self.grid);
            let e_hi = e.unwrap_or(-self.grid.m);
            hi = Some(hi.map_or(e_hi, |h: i32| h.max(e_hi)));
            lo = Some(match (lo, e) {
                (None, e) => e,
                (Some(None), _) | (Some(_), None) => None,
                (Some(Some(a)), Some(b)) => Some(a.min(b)),
            });
        }
        Some((lo?, hi?))
    }

    /// Per-cell exponents of `chi(lam * xi)`; requires `|lam| <= q^m`.
    pub fn chi_exponents(&self, lam: &KElem) -> Result<Vec<u32>> {
        chi_exponents(&self.field, &self.grid, lam)
    }

    /// Pointwise multiplication by `chi(lam * xi)`.
    pub fn modulate(&self, lam: &KElem) -> Result<Self> {
        let exps = self.chi_exponents(lam)?;
        let p = self.field.p();
        let roots: Vec<Complex64> = (0..p).map(|k| root_of_unity(p, k)).collect();
        let mut out = self.clone();
        out.values.iter_mut().zip(&exps).for_each(|(v, &k)| *v *= roots[k as usize]);
        Ok(out)
    }

    pub fn to_repr(&self) -> GridFnRepr {
        GridFnRepr { s: self.grid.s, m: self.grid.m, values: self.values.iter().map(|v| [v.re, v.im]).collect() }
    }

    pub fn from_repr(field: &GaloisField, repr: &GridFnRepr) -> Result<Self> {
        let grid = GridSpec::new(repr.s, repr.m)?;
        let values = repr.values.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        Self::from_values(field, grid, values)
    }
}

pub(crate) fn chi_exponents(field: &GaloisField, grid: &GridSpec, lam: &KElem) -> Result<Vec<u32>> {
    if lam.field() != field {
        return Err(UmfError::Parameter("modulation parameter over a different field".into()));
    }
    if let Some(e) = lam.norm_exp() {
        if e > grid.m {
            return Err(UmfError::ResolutionTooCoarse { norm_exp: e, m: grid.m });
        }
    }
    let q = field.q() as usize;
    let dim = grid.dim(field.q())?;
    // (digit position in the cell index, digit of lam it pairs with)
    let pairs: Vec<(usize, u32)> = lam
        .digits()
        .filter_map(|(e, d)| {
            let t = -1 - e - grid.lo();
            (t >= 0 && (t as usize) < grid.digits()).then_some((t as usize, d))
        })
        .collect();
    let strides: Vec<(usize, u32)> = pairs.iter().map(|&(t, d)| (q.pow(t as u32), d)).collect();
    let mut out = vec![0u32; dim];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = 0;
        for &(stride, d) in &strides {
            let digit = ((idx / stride) % q) as u32;
            acc = field.add_digits(acc, field.mul_digits(d, digit));
        }
        *o = field.trace0(acc);
    }
    Ok(out)
}

impl FreqFn {
    /// `xi -> (qN)^{-j/2} f(p^{(1+nu) j} xi)`, the frequency-side image of the time dilation
    /// `D_{p^{-j}}`. The cell layout is unchanged; only the window shifts by `(1+nu) j`.
    pub fn freq_dilate(&self, j: i32, nu: u32) -> Result<Self> {
        let d = (1 + nu as i32).checked_mul(j).ok_or_else(|| UmfError::WindowOverflow("dilation exponent overflows".into()))?;
        let grid = GridSpec::new(self.grid.s + d, self.grid.m - d)?;
        let q = self.field.q() as f64;
        let factor = q.powf(-(d as f64) / 2.0);
        let mut out = self.scale(Complex64::new(factor, 0.0));
        out.grid = grid;
        Ok(out)
    }

    /// Sum over the translates `N u(k) = p^{-nu} u(k)`; returns a function on the fundamental
    /// domain `B^{-nu}` (grid `(nu, m)`).
    pub fn periodize(&self, nu: u32) -> Result<Self> {
        let nu = nu as i32;
        let m = self.grid.m.max(1 - nu);
        let src = if m > self.grid.m { self.restrict(GridSpec::new(self.grid.s.max(nu), m)?)? } else { self.clone() };
        let out_grid = GridSpec::new(nu, m)?;
        if src.grid.s <= nu {
            return src.refine(out_grid);
        }
        let mut out = Self::zeros(&self.field, out_grid)?;
        let q = self.field.q() as usize;
        let div = q.pow((src.grid.s - nu) as u32);
        for (i, v) in src.values.iter().enumerate() {
            out.values[i / div] += v;
        }
        Ok(out)
    }

    /// Coefficient of `f` against `e_n = q^{k/2} chi(p^{-k} u(n) .)` restricted to `B^k`; the
    /// `e_n` form an orthonormal basis of `L^2(B^k)`. Coefficients whose character oscillates
    /// within a grid cell vanish exactly.
    pub fn ball_fourier_coeff(&self, k: i32, n: u64) -> Result<Complex64> {
        let q = self.field.q() as usize;
        if k > self.grid.m {
            return Err(UmfError::WindowOverflow(format!("ball B^{k} finer than resolution m={}", self.grid.m)));
        }
        let outside = self.values.iter().enumerate().any(|(i, v)| *v != Complex64::new(0.0, 0.0) && cell_norm_exp(i, q, &self.grid).is_some_and(|e| e > -k));
        if outside {
            return Err(UmfError::Assumption(format!("support not contained in B^{k}")));
        }
        let lam = KElem::u(&self.field, n).shift(-k);
        if lam.norm_exp().is_some_and(|e| e > self.grid.m) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let exps = self.chi_exponents(&lam)?;
        let p = self.field.p();
        let s: Complex64 = self.values.iter().zip(&exps).map(|(v, &e)| v * root_of_unity(p, e).conj()).sum();
        Ok(s * self.grid.cell_weight(self.field.q()) * (self.field.q() as f64).powf(k as f64 / 2.0))
    }
}

/// Sign of the character in the transform kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    /// `chi(-xi x)`, time to frequency.
    Forward,
    /// `chi(xi x)`, frequency to time.
    Inverse,
}

/// Complex multiplications performed by a transform, for the operation-count contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MulCount(pub u64);

fn kernel_table(field: &GaloisField, kernel: Kernel) -> Vec<Complex64> {
    let q = field.q();
    let p = field.p();
    let mut t = Vec::with_capacity((q * q) as usize);
    for c in 0..q {
        for d in 0..q {
            let a = field.trace0(field.mul_digits(c, d));
            let a = match kernel {
                Kernel::Forward => (p - a) % p,
                Kernel::Inverse => a,
            };
            t.push(root_of_unity(p, a));
        }
    }
    t
}

fn transform_naive_impl(field: &GaloisField, grid: GridSpec, values: &[Complex64], kernel: Kernel) -> Result<(Vec<Complex64>, MulCount)> {
    let q = field.q() as usize;
    let p = field.p();
    let len = grid.digits();
    let dim = values.len();
    let out_grid = grid.dual();
    out_grid.dim(field.q())?;
    // trace table: exponent of chi(+c d) for digit values c, d
    let mut tr = vec![0u32; q * q];
    for c in 0..q {
        for d in 0..q {
            tr[c * q + d] = field.trace0(field.mul_digits(c as u32, d as u32));
        }
    }
    let roots: Vec<Complex64> = (0..p)
        .map(|k| match kernel {
            Kernel::Forward => root_of_unity(p, (p - k) % p),
            Kernel::Inverse => root_of_unity(p, k),
        })
        .collect();
    let mut digits_in = vec![0u32; dim * len];
    for i in 0..dim {
        cell_digits(i, q, len, &mut digits_in[i * len..(i + 1) * len]);
    }
    let weight = grid.cell_weight(field.q());
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    let mut od = vec![0u32; len];
    for (o, slot) in out.iter_mut().enumerate() {
        cell_digits(o, q, len, &mut od);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in values.iter().enumerate() {
            let di = &digits_in[i * len..(i + 1) * len];
            // input position t pairs with output position len-1-t
            let mut a = 0u32;
            for t in 0..len {
                a += tr[od[len - 1 - t] as usize * q + di[t] as usize];
            }
            acc += v * roots[(a % p) as usize];
        }
        *slot = acc * weight;
    }
    Ok((out, MulCount((dim * dim) as u64)))
}

fn transform_fast_impl(field: &GaloisField, grid: GridSpec, values: &[Complex64], kernel: Kernel) -> Result<(Vec<Complex64>, MulCount)> {
    let q = field.q() as usize;
    let len = grid.digits();
    let dim = values.len();
    grid.dual().dim(field.q())?;
    let k = kernel_table(field, kernel);
    let mut buf = values.to_vec();
    let mut x = vec![Complex64::new(0.0, 0.0); q];
    let mut mults = 0u64;
    let mut stride = 1;
    for _ in 0..len {
        let block = stride * q;
        for base in (0..dim).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (d, xd) in x.iter_mut().enumerate() {
                    *xd = buf[start + d * stride];
                }
                for c in 0..q {
                    let row = &k[c * q..(c + 1) * q];
                    buf[start + c * stride] = row.iter().zip(&x).map(|(kc, xd)| kc * xd).sum();
                }
                mults += (q * q) as u64;
            }
        }
        stride = block;
    }
    // digit reversal: position t of the butterfly output is position len-1-t of the dual grid
    let weight = grid.cell_weight(field.q());
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (i, v) in buf.iter().enumerate() {
        let mut r = 0;
        let mut ii = i;
        for _ in 0..len {
            r = r * q + ii % q;
            ii /= q;
        }
        out[r] = v * weight;
    }
    Ok((out, MulCount(mults)))
}

/// `f^(xi) = int f(x) chi(-xi x) dx` by direct summation; output on the dual grid.
pub fn transform_naive(f: &TimeFn) -> Result<FreqFn> {
    transform_naive_counted(f).map(|(g, _)| g)
}

pub fn transform_naive_counted(f: &TimeFn) -> Result<(FreqFn, MulCount)> {
    let (v, c) = transform_naive_impl(&f.field, f.grid, &f.values, Kernel::Forward)?;
    Ok((FreqFn::from_values(&f.field, f.grid.dual(), v)?, c))
}

/// Same transform as [`transform_naive`], via one q-point butterfly per digit position.
pub fn transform_fast(f: &TimeFn) -> Result<FreqFn> {
    transform_fast_counted(f).map(|(g, _)| g)
}

pub fn transform_fast_counted(f: &TimeFn) -> Result<(FreqFn, MulCount)> {
    let (v, c) = transform_fast_impl(&f.field, f.grid, &f.values, Kernel::Forward)?;
    Ok((FreqFn::from_values(&f.field, f.grid.dual(), v)?, c))
}

/// `f(x) = int f^(xi) chi(xi x) dxi` by direct summation.
pub fn inverse_naive(g: &FreqFn) -> Result<TimeFn> {
    let (v, _) = transform_naive_impl(&g.field, g.grid, &g.values, Kernel::Inverse)?;
    TimeFn::from_values(&g.field, g.grid.dual(), v)
}

pub fn inverse_fast(g: &FreqFn) -> Result<TimeFn> {
    let (v, _) = transform_fast_impl(&g.field, g.grid, &g.values, Kernel::Inverse)?;
    TimeFn::from_values(&g.field, g.grid.dual(), v)
}

/// Inverse-kernel sums `int g(xi) chi(xi x) dxi` at every dual-grid point, as a raw vector.
pub(crate) fn inverse_fast_values(g: &FreqFn) -> Result<Vec<Complex64>> {
    transform_fast_impl(&g.field, g.grid, &g.values, Kernel::Inverse).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FieldParams;
    use crate::localfield::chi_pair;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn gf2() -> GaloisField {
        GaloisField::from_prime(2).unwrap()
    }

    fn gf4() -> GaloisField {
        GaloisField::new(FieldParams::default_for(2, 2).unwrap()).unwrap()
    }

    fn g(s: i32, m: i32) -> GridSpec {
        GridSpec::new(s, m).unwrap()
    }

    fn random_fn<D: Domain>(field: &GaloisField, grid: GridSpec, seed: u64) -> GridFn<D> {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let dim = grid.dim(field.q()).unwrap();
        GridFn::from_values(field, grid, (0..dim).map(|_| Complex64::new(next(), next())).collect()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0, 0).is_err());
        assert!(GridSpec::new(-3, 4).is_ok());
        assert_eq!(g(2, 3).dim(2).unwrap(), 32);
        assert!(matches!(g(40, 40).dim(2), Err(UmfError::WindowOverflow(_))));
    }

    #[test]
    fn indicator_integrals() {
        let f = gf2();
        assert_eq!(FreqFn::indicator(&f, g(1, 1), 0).unwrap().haar_integral(), c(1.0));
        assert_eq!(FreqFn::indicator(&f, g(2, 0), -1).unwrap().haar_integral(), c(2.0));
        let top = FreqFn::indicator(&f, g(2, 3), 3).unwrap();
        assert_eq!(top.values().iter().filter(|v| v.re != 0.0).count(), 1);
        assert_eq!(top.haar_integral(), c(0.125));
        assert!(FreqFn::indicator(&f, g(2, 3), 4).is_err());
        assert!(FreqFn::indicator(&f, g(2, 3), -3).is_err());
        let f4 = gf4();
        for k in -2..=2 {
            let ind = FreqFn::indicator(&f4, g(2, 2), k).unwrap();
            assert!((ind.haar_integral() - c(4f64.powi(-k))).norm() < 1e-12);
        }
    }

    #[test]
    fn inner_examples() {
        let f = gf2();
        let one = FreqFn::indicator(&f, g(1, 1), 0).unwrap();
        assert_eq!(one.inner(&one).unwrap(), c(1.0));
        let grid = g(1, 2);
        let d = FreqFn::indicator(&f, grid, 0).unwrap();
        let e1 = d.modulate(&KElem::u(&f, 1)).unwrap();
        let e2 = d.modulate(&KElem::u(&f, 2)).unwrap();
        assert!(e1.inner(&e2).unwrap().norm() < 1e-15);
        assert!((e1.inner(&e1).unwrap() - c(1.0)).norm() < 1e-15);
        // grids are joined automatically
        let coarse = FreqFn::indicator(&f, g(0, 1), 0).unwrap();
        assert_eq!(coarse.inner(&FreqFn::indicator(&f, g(3, 2), 0).unwrap()).unwrap(), c(1.0));
    }

    #[test]
    fn refine_examples() {
        let f = gf4();
        let x: FreqFn = random_fn(&f, g(1, 1), 3);
        assert_eq!(x.refine(g(1, 1)).unwrap(), x);
        let y = x.refine(g(2, 3)).unwrap();
        assert!((y.haar_integral() - x.haar_integral()).norm() < 1e-12);
        assert!((y.norm_sq() - x.norm_sq()).abs() < 1e-12);
        assert!(x.refine(g(0, 3)).is_err());
        for idx in 0..x.dim() {
            let cell = x.cell_elem(idx);
            assert_eq!(y.value_at(&cell), x.values()[idx]);
        }
    }

    #[test]
    fn coarsen_inverts_refine() {
        let f = gf4();
        let x: FreqFn = random_fn(&f, g(1, 1), 12);
        let y = x.refine(g(2, 3)).unwrap();
        assert_eq!(y.coarsen(g(1, 1)).unwrap(), x);
        assert!(x.coarsen(g(1, 2)).is_none());
        let fine: FreqFn = random_fn(&f, g(1, 2), 1);
        assert!(fine.coarsen(g(1, 1)).is_none());
        let ind = FreqFn::indicator(&f, g(2, 2), 0).unwrap();
        assert_eq!(ind.coarsen(g(0, 1)).unwrap(), FreqFn::indicator(&f, g(0, 1), 0).unwrap());
        assert!(ind.coarsen(g(-1, 2)).is_none());
    }

    #[test]
    fn modulate_examples() {
        let f = gf2();
        let x: FreqFn = random_fn(&f, g(2, 2), 5);
        assert_eq!(x.modulate(&KElem::zero(&f)).unwrap(), x);
        let y = x.modulate(&KElem::u(&f, 3)).unwrap();
        assert!((y.norm_sq() - x.norm_sq()).abs() < 1e-12);
        let ind = FreqFn::indicator(&f, g(1, 1), -1).unwrap();
        let z = ind.modulate(&KElem::u(&f, 1)).unwrap();
        assert_eq!(z.value_at(&KElem::one(&f)), c(-1.0));
        assert_eq!(z.value_at(&KElem::zero(&f)), c(1.0));
        assert!(matches!(ind.modulate(&KElem::u(&f, 2)), Err(UmfError::ResolutionTooCoarse { norm_exp: 2, m: 1 })));
    }

    #[test]
    fn modulate_matches_chi_pair() {
        let f = gf4();
        let grid = g(2, 2);
        let x: FreqFn = random_fn(&f, grid, 9);
        for n in [1u64, 5, 7, 13] {
            let lam = KElem::u(&f, n);
            let y = x.modulate(&lam).unwrap();
            for idx in 0..x.dim() {
                let e = chi_pair(&lam, &x.cell_elem(idx)).unwrap().value();
                assert!((y.values()[idx] - x.values()[idx] * e).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dilation_examples() {
        let f = gf2();
        let x: FreqFn = random_fn(&f, g(2, 3), 1);
        assert_eq!(x.freq_dilate(0, 1).unwrap(), x);
        for j in -3..=3 {
            assert!((x.freq_dilate(j, 1).unwrap().norm_sq() - x.norm_sq()).abs() < 1e-12);
        }
        let ind = FreqFn::indicator(&f, g(1, 1), -1).unwrap();
        let d = ind.freq_dilate(1, 1).unwrap();
        assert_eq!(d.grid(), g(3, -1));
        assert!((d.haar_integral() - ind.haar_integral() * 2.0).norm() < 1e-12);
        // support became B^{-3}: the value at p^{-3} unit is nonzero
        assert!(d.value_at(&KElem::prime_power(&f, -3)).norm() > 0.0);
        let composed = x.freq_dilate(2, 0).unwrap().freq_dilate(-5, 0).unwrap();
        let direct = x.freq_dilate(-3, 0).unwrap();
        assert_eq!(composed.grid(), direct.grid());
        for (a, b) in composed.values().iter().zip(direct.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn dilation_agrees_with_pointwise_definition() {
        let f = gf2();
        let nu = 1;
        let x: FreqFn = random_fn(&f, g(2, 2), 4);
        for j in [-1, 1] {
            let y = x.freq_dilate(j, nu).unwrap();
            let d = (1 + nu as i32) * j;
            for idx in 0..y.dim() {
                let xi = y.cell_elem(idx);
                let expect = x.value_at(&xi.shift(d)) * 4f64.powf(-j as f64 / 2.0);
                assert!((y.values()[idx] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dilation_conjugates_modulation() {
        // modulate(dilate(f, j), lam) == dilate(modulate(f, p^{-(1+nu) j} lam), j)
        let f = gf2();
        for nu in [0u32, 1] {
            let x: FreqFn = random_fn(&f, g(3, 3), 11);
            for j in [-1, 1] {
                let d = (1 + nu as i32) * j;
                for n in [1u64, 2, 3] {
                    let lam = KElem::u(&f, n);
                    let lhs = x.freq_dilate(j, nu).unwrap().modulate(&lam);
                    let rhs = x.modulate(&lam.shift(-d)).and_then(|y| y.freq_dilate(j, nu));
                    match (lhs, rhs) {
                        (Ok(a), Ok(b)) => assert_eq!(a, b),
                        (Err(_), Err(_)) => {}
                        (a, b) => panic!("one side failed: {a:?} / {b:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn periodize_examples() {
        let f = gf2();
        let inside = FreqFn::indicator(&f, g(1, 2), -1).unwrap();
        let p = inside.periodize(1).unwrap();
        assert_eq!(p, inside);
        let big = FreqFn::indicator(&f, g(3, 1), -3).unwrap();
        let pb = big.periodize(1).unwrap();
        assert_eq!(pb.grid(), g(1, 1));
        assert!(pb.values().iter().all(|v| *v == c(4.0)));
        let x: FreqFn = random_fn(&f, g(4, 2), 2);
        assert!((x.periodize(1).unwrap().haar_integral() - x.haar_integral()).norm() < 1e-12);
    }

    #[test]
    fn ball_coefficients() {
        let f = gf2();
        let grid = g(2, 3);
        for k in [-1, 0, 1] {
            let e0 = FreqFn::indicator(&f, grid, k).unwrap().scale(c(2f64.powf(k as f64 / 2.0)));
            assert!((e0.ball_fourier_coeff(k, 0).unwrap() - c(1.0)).norm() < 1e-12);
            for n in 1..20 {
                assert!(e0.ball_fourier_coeff(k, n).unwrap().norm() < 1e-12);
            }
        }
        let d = FreqFn::indicator(&f, g(0, 3), 0).unwrap();
        let chi5 = d.modulate(&KElem::u(&f, 5)).unwrap();
        for n in 0..8u64 {
            let expect = if n == 5 { 1.0 } else { 0.0 };
            assert!((chi5.ball_fourier_coeff(0, n).unwrap() - c(expect)).norm() < 1e-12);
        }
        assert!(matches!(FreqFn::indicator(&f, grid, -1).unwrap().ball_fourier_coeff(0, 0), Err(UmfError::Assumption(_))));
    }

    #[test]
    fn transform_examples() {
        let f = gf2();
        let d = TimeFn::indicator(&f, g(1, 1), 0).unwrap();
        for t in [transform_naive(&d).unwrap(), transform_fast(&d).unwrap()] {
            assert_eq!(t.grid(), g(1, 1));
            assert_eq!(t.values(), FreqFn::indicator(&f, g(1, 1), 0).unwrap().values());
        }
        let grid = g(2, 2);
        let mut delta = TimeFn::zeros(&f, grid).unwrap();
        delta.values_mut()[0] = c(4.0);
        let t = transform_fast(&delta).unwrap();
        assert!(t.values().iter().all(|v| (v - c(1.0)).norm() < 1e-15));
    }

    #[test]
    fn transform_kernel_sign_pinned() {
        // f = 1 on the cell of p^{-1}+B^1 in grid (1,1): f^(xi) = q^{-1} chi(-xi p^{-1}).
        let f = GaloisField::from_prime(3).unwrap();
        let grid = g(1, 1);
        let mut x = TimeFn::zeros(&f, grid).unwrap();
        let cell = x.cell_index(&KElem::prime_power(&f, -1)).unwrap();
        x.values_mut()[cell] = c(1.0);
        let t = transform_naive(&x).unwrap();
        let xi = KElem::monomial(&f, 0, 1);
        let expect = chi_pair(&xi, &KElem::prime_power(&f, -1).neg()).unwrap().value() / 3.0;
        assert!((t.value_at(&xi) - expect).norm() < 1e-15);
        assert!((transform_fast(&x).unwrap().value_at(&xi) - expect).norm() < 1e-15);
    }

    #[test]
    fn fast_matches_naive_small() {
        for field in [gf2(), GaloisField::from_prime(3).unwrap(), gf4(), GaloisField::from_prime(5).unwrap()] {
            for (s, m) in [(1, 0), (0, 1), (2, 1), (-1, 3), (3, -1), (1, 2)] {
                let x: TimeFn = random_fn(&field, g(s, m), (s * 7 + m) as u64);
                let a = transform_naive(&x).unwrap();
                let b = transform_fast(&x).unwrap();
                for (u, v) in a.values().iter().zip(b.values()) {
                    assert!((u - v).norm() < 1e-12);
                }
                let back = inverse_fast(&b).unwrap();
                let back_naive = inverse_naive(&a).unwrap();
                for ((u, v), w) in back.values().iter().zip(x.values()).zip(back_naive.values()) {
                    assert!((u - v).norm() < 1e-12);
                    assert!((w - v).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mult_counts() {
        let f = gf2();
        let x: TimeFn = random_fn(&f, g(1, 0), 1);
        let (_, naive) = transform_naive_counted(&x).unwrap();
        let (_, fast) = transform_fast_counted(&x).unwrap();
        assert_eq!(naive, MulCount(4));
        assert_eq!(fast, MulCount(4));
        let y: TimeFn = random_fn(&f, g(5, 5), 1);
        let (_, fast) = transform_fast_counted(&y).unwrap();
        assert_eq!(fast.0, 1024 * 10 * 2);
    }

    #[test]
    fn json_roundtrip() {
        let f = gf2();
        let x: FreqFn = random_fn(&f, g(1, 1), 8);
        let s = serde_json::to_string(&x.to_repr()).unwrap();
        let back = FreqFn::from_repr(&f, &serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, x);
        let bad = GridFnRepr { s: 1, m: 1, values: vec![[0.0, 0.0]; 3] };
        assert!(FreqFn::from_repr(&f, &bad).is_err());
        assert!(serde_json::from_str::<GridFnRepr>(r#"{"s":1,"m":1,"values":[],"x":1}"#).is_err());
    }

    #[test]
    fn product_window() {
        let f = gf2();
        let a = FreqFn::indicator(&f, g(3, 1), -3).unwrap();
        let b = FreqFn::indicator(&f, g(0, 4), 0).unwrap();
        let p = a.mul(&b).unwrap();
        assert_eq!(p.grid(), g(0, 4));
        assert!((p.haar_integral() - c(1.0)).norm() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn plancherel(seed in any::<u64>(), s in -2i32..4, m in -2i32..4, fi in 0usize..3) {
            prop_assume!(s + m >= 1);
            let field = [gf2(), GaloisField::from_prime(3).unwrap(), gf4()][fi].clone();
            let x: TimeFn = random_fn(&field, g(s, m), seed);
            let t = transform_fast(&x).unwrap();
            prop_assert!((t.norm_sq() - x.norm_sq()).abs() <= 1e-12 * x.norm_sq().max(1.0));
        }

        #[test]
        fn refine_preserves_norm(seed in any::<u64>(), ds in 0i32..3, dm in 0i32..3) {
            let f = gf2();
            let x: FreqFn = random_fn(&f, g(1, 2), seed);
            let y = x.refine(g(1 + ds, 2 + dm)).unwrap();
            prop_assert!((y.norm_sq() - x.norm_sq()).abs() < 1e-12);
            prop_assert!((y.haar_integral() - x.haar_integral()).norm() < 1e-12);
        }

        #[test]
        fn ball_parseval(seed in any::<u64>(), k in -1i32..2) {
            let f = GaloisField::from_prime(3).unwrap();
            let grid = g(2, 2);
            let x: FreqFn = random_fn(&f, grid, seed);
            let ball = FreqFn::indicator(&f, grid, k).unwrap();
            let y = FreqFn::from_values(&f, grid, x.values().iter().zip(ball.values()).map(|(a, b)| a * b).collect()).unwrap();
            let count = 3u64.pow((grid.m - k) as u32);
            let total: f64 = (0..count).map(|n| y.ball_fourier_coeff(k, n).unwrap().norm_sqr()).sum();
            prop_assert!((total - y.norm_sq()).abs() < 1e-12);
        }

        #[test]
        fn periodize_preserves_integral(seed in any::<u64>(), nu in 0u32..3) {
            let f = gf2();
            let x: FreqFn = random_fn(&f, g(4, 1), seed);
            let p = x.periodize(nu).unwrap();
            prop_assert_eq!(p.grid(), g(nu as i32, 1));
            prop_assert!((p.haar_integral() - x.haar_integral()).norm() < 1e-12);
        }
    }
}
