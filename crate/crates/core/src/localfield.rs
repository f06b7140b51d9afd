//! Elements of K = GF(q)((p)) with finite digit support, the coset enumeration `u(n)`
//! and the canonical additive character.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UmfError};
use crate::gf::{FqElem, GaloisField};

/// `x = sum_l c_l p^l`, stored sparsely. Digits are GF(q) digit values; zero digits are
/// never stored, so the first key is the valuation.
#[derive(Clone, PartialEq, Eq)]
pub struct KElem {
    field: GaloisField,
    digits: BTreeMap<i32, u32>,
}

impl fmt::Debug for KElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self.digits.iter().map(|(e, d)| format!("{d}*p^{e}")).collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl KElem {
    pub fn zero(field: &GaloisField) -> Self {
        KElem { field: field.clone(), digits: BTreeMap::new() }
    }

    pub fn one(field: &GaloisField) -> Self {
        Self::monomial(field, 0, 1)
    }

    /// `d * p^exp` for a digit value `d` (reduced into [0, q) by the caller).
    pub fn monomial(field: &GaloisField, exp: i32, digit: u32) -> Self {
        let mut digits = BTreeMap::new();
        if digit != 0 {
            digits.insert(exp, digit);
        }
        KElem { field: field.clone(), digits }
    }

    /// The prime element raised to `k`.
    pub fn prime_power(field: &GaloisField, k: i32) -> Self {
        Self::monomial(field, k, 1)
    }

    pub fn from_digits(field: &GaloisField, digits: impl IntoIterator<Item = (i32, u32)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (e, d) in digits {
            if d >= field.q() {
                return Err(UmfError::Range { value: d as u64, bound: field.q() as u64 });
            }
            if d != 0 && map.insert(e, d).is_some() {
                return Err(UmfError::Validation(format!("exponent {e} listed twice")));
            }
        }
        Ok(KElem { field: field.clone(), digits: map })
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    /// Digit value at exponent `exp` (0 when absent).
    pub fn digit(&self, exp: i32) -> u32 {
        self.digits.get(&exp).copied().unwrap_or(0)
    }

    pub fn coefficient(&self, exp: i32) -> FqElem {
        FqElem::from_digit(&self.field, self.digit(exp) as u64).expect("stored digits are in range")
    }

    pub fn digits(&self) -> impl Iterator<Item = (i32, u32)> + '_ {
        self.digits.iter().map(|(&e, &d)| (e, d))
    }

    pub fn valuation(&self) -> Option<i32> {
        self.digits.keys().next().copied()
    }

    /// `k` such that `|x| = q^k`; `None` for zero.
    pub fn norm_exp(&self) -> Option<i32> {
        self.valuation().map(|v| -v)
    }

    pub fn norm(&self) -> f64 {
        match self.valuation() {
            None => 0.0,
            Some(v) => (self.field.q() as f64).powi(-v),
        }
    }

    /// Multiplication by `p^k`.
    pub fn shift(&self, k: i32) -> KElem {
        KElem { field: self.field.clone(), digits: self.digits.iter().map(|(&e, &d)| (e + k, d)).collect() }
    }

    /// Keeps only digits with exponent in `[lo, hi)`.
    pub fn truncate(&self, lo: i32, hi: i32) -> KElem {
        KElem { field: self.field.clone(), digits: self.digits.range(lo..hi).map(|(&e, &d)| (e, d)).collect() }
    }

    fn same_field(&self, other: &KElem) -> Result<()> {
        if self.field != other.field {
            return Err(UmfError::Parameter(format!("mismatched fields {:?} and {:?}", self.field, other.field)));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &KElem) -> Result<KElem> {
        self.same_field(other)?;
        let mut digits = self.digits.clone();
        for (&e, &d) in &other.digits {
            let s = self.field.add_digits(digits.get(&e).copied().unwrap_or(0), d);
            if s == 0 {
                digits.remove(&e);
            } else {
                digits.insert(e, s);
            }
        }
        Ok(KElem { field: self.field.clone(), digits })
    }

    pub fn neg(&self) -> KElem {
        KElem { field: self.field.clone(), digits: self.digits.iter().map(|(&e, &d)| (e, self.field.neg_digit(d))).collect() }
    }

    pub fn try_sub(&self, other: &KElem) -> Result<KElem> {
        self.try_add(&other.neg())
    }

    /// Cauchy product of the digit sequences.
    pub fn try_mul(&self, other: &KElem) -> Result<KElem> {
        self.same_field(other)?;
        let f = &self.field;
        let mut acc: BTreeMap<i32, u32> = BTreeMap::new();
        for (&ea, &da) in &self.digits {
            for (&eb, &db) in &other.digits {
                let e = acc.entry(ea + eb).or_insert(0);
                *e = f.add_digits(*e, f.mul_digits(da, db));
            }
        }
        acc.retain(|_, d| *d != 0);
        Ok(KElem { field: f.clone(), digits: acc })
    }

    /// Digit at exponent -1 of `self * other`, without forming the product.
    pub fn product_digit_m1(&self, other: &KElem) -> Result<u32> {
        self.same_field(other)?;
        let f = &self.field;
        Ok(self.digits.iter().fold(0, |acc, (&e, &d)| f.add_digits(acc, f.mul_digits(d, other.digit(-1 - e)))))
    }

    /// The coset representative `u(n)`: base-q digits `b_t` of `n` placed at exponent `-(t+1)`.
    pub fn u(field: &GaloisField, n: u64) -> KElem {
        let q = field.q() as u64;
        let mut digits = BTreeMap::new();
        let mut n = n;
        let mut exp = -1;
        while n > 0 {
            let b = (n % q) as u32;
            if b != 0 {
                digits.insert(exp, b);
            }
            n /= q;
            exp -= 1;
        }
        KElem { field: field.clone(), digits }
    }

    pub fn to_repr(&self) -> KElemRepr {
        KElemRepr { digits: self.digits().collect() }
    }

    pub fn from_repr(field: &GaloisField, repr: &KElemRepr) -> Result<Self> {
        if repr.digits.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(UmfError::Validation("exponents must be strictly ascending".into()));
        }
        if repr.digits.iter().any(|&(_, d)| d == 0) {
            return Err(UmfError::Validation("zero digits must not be listed".into()));
        }
        KElem::from_digits(field, repr.digits.iter().copied())
    }
}

/// JSON form: `{"digits": [[exponent, digitValue], ...]}`, exponents ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KElemRepr {
    pub digits: Vec<(i32, u32)>,
}

/// A p-th root of unity `exp(2 pi i k / p)`, kept as its exponent so that products are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitComplex {
    p: u32,
    k: u32,
}

impl UnitComplex {
    pub fn new(p: u32, k: u32) -> Self {
        UnitComplex { p, k: k % p }
    }

    pub fn one(p: u32) -> Self {
        UnitComplex { p, k: 0 }
    }

    pub fn exponent(&self) -> u32 {
        self.k
    }

    pub fn order_divides(&self) -> u32 {
        self.p
    }

    pub fn value(&self) -> Complex64 {
        root_of_unity(self.p, self.k)
    }

    pub fn mul(self, other: UnitComplex) -> UnitComplex {
        debug_assert_eq!(self.p, other.p);
        UnitComplex::new(self.p, self.k + other.k)
    }

    pub fn conj(self) -> UnitComplex {
        UnitComplex::new(self.p, self.p - self.k)
    }
}

pub fn root_of_unity(p: u32, k: u32) -> Complex64 {
    let k = k % p;
    match (p, k) {
        (_, 0) => Complex64::new(1.0, 0.0),
        (2, 1) => Complex64::new(-1.0, 0.0),
        _ => Complex64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64),
    }
}

/// Canonical character: `exp(2 pi i a / p)` with `a` the `zeta_0` coordinate of the digit at
/// exponent -1. Trivial on the ring of integers.
pub fn chi(x: &KElem) -> UnitComplex {
    let f = x.field();
    UnitComplex::new(f.p(), f.trace0(x.digit(-1)))
}

/// `chi(xi * x)`.
pub fn chi_pair(xi: &KElem, x: &KElem) -> Result<UnitComplex> {
    let d = xi.product_digit_m1(x)?;
    Ok(UnitComplex::new(xi.field().p(), xi.field().trace0(d)))
}

/// Field element representing the integer `N = q^nu`, namely `p^{-nu}`.
pub fn embed_n(field: &GaloisField, nu: u32) -> KElem {
    KElem::prime_power(field, -(nu as i32))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks the offset parameter `r` against `N = q^nu`: `1 <= r <= qN - 1`, `gcd(r, N) = 1`,
/// `r` odd.
pub fn validate_offset(field: &GaloisField, nu: u32, r: u64) -> Result<()> {
    let q = field.q() as u64;
    let n = q.checked_pow(nu).filter(|n| n.checked_mul(q).is_some()).ok_or_else(|| UmfError::Unsupported(format!("N = q^{nu} overflows")))?;
    let upper = q * n - 1;
    if r < 1 || r > upper {
        return Err(UmfError::Validation(format!("r = {r} outside [1, {upper}]")));
    }
    if gcd(r, n) != 1 {
        return Err(UmfError::Validation(format!("gcd(r = {r}, N = {n}) != 1")));
    }
    if r % 2 == 0 {
        return Err(UmfError::Validation(format!("r = {r} is even")));
    }
    Ok(())
}

/// The nonuniform offset `u(r)/N = p^nu u(r)`.
pub fn sigma(field: &GaloisField, nu: u32, r: u64) -> Result<KElem> {
    validate_offset(field, nu, r)?;
    Ok(KElem::u(field, r).shift(nu as i32))
}

/// Resolves a general integer `N >= 1` to its exponent `nu` when `N` is a power of `q`.
pub fn nu_for_n(field: &GaloisField, n: u64) -> Result<u32> {
    let q = field.q() as u64;
    let mut acc = 1u64;
    let mut nu = 0;
    while acc < n {
        acc = acc.saturating_mul(q);
        nu += 1;
    }
    if acc != n || n == 0 {
        return Err(UmfError::Unsupported(format!("N = {n} is not a power of q = {q}")));
    }
    Ok(nu)
}
