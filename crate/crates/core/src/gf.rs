//! Residue field arithmetic in GF(q), q = p^c, represented as GF(p)[z]/(f(z)).
//!
//! Elements are identified with their digit value `d = a_0 + a_1 p + ... + a_{c-1} p^{c-1}`,
//! where `a_j` is the coordinate on the basis element `z^j`. This makes the
//! digit/field bijection used by the coset enumeration a plain base-p expansion.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmfError};

pub const MAX_PRIME: u32 = 97;
pub const MAX_DEGREE: u32 = 4;

/// Multiplication tables are materialized up to this field size.
const TABLE_LIMIT: u32 = 256;

/// Raw field description as it appears in JSON: `{"p": 2, "c": 2, "f": [1, 1]}`.
///
/// `f` lists the non-leading coefficients of the monic modulus, degree 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub p: u32,
    pub c: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f: Vec<u32>,
}

impl FieldParams {
    pub fn prime(p: u32) -> Self {
        FieldParams { p, c: 1, f: Vec::new() }
    }

    pub fn new(p: u32, c: u32, f: Vec<u32>) -> Self {
        FieldParams { p, c, f }
    }

    /// Shipped default modulus for (p, c): none needed for c = 1, z^2 + z + 1 for GF(4).
    pub fn default_for(p: u32, c: u32) -> Result<Self> {
        match (p, c) {
            (_, 1) => Ok(FieldParams::prime(p)),
            (2, 2) => Ok(FieldParams::new(2, 2, vec![1, 1])),
            _ => Err(UmfError::Parameter(format!("no default modulus for p={p}, c={c}; supply f or use first_irreducible"))),
        }
    }

    /// Lexicographically smallest monic irreducible of degree c (coefficient vector read
    /// as a base-p number, degree-0 digit least significant).
    pub fn first_irreducible(p: u32, c: u32) -> Result<Self> {
        check_prime(p)?;
        check_degree(c)?;
        if c == 1 {
            return Ok(FieldParams::prime(p));
        }
        let total = (p as u64).pow(c);
        for code in 0..total {
            let f = base_digits(code, p, c as usize);
            if is_irreducible(p, &f) {
                return Ok(FieldParams::new(p, c, f));
            }
        }
        Err(UmfError::Parameter(format!("no irreducible of degree {c} over GF({p})")))
    }

    pub fn q(&self) -> u32 {
        self.p.pow(self.c)
    }
}

fn check_prime(p: u32) -> Result<()> {
    if p < 2 || p > MAX_PRIME {
        return Err(UmfError::Parameter(format!("p = {p} outside supported range [2, {MAX_PRIME}]")));
    }
    if (2..p).take_while(|d| d * d <= p).any(|d| p % d == 0) {
        return Err(UmfError::Parameter(format!("p = {p} is not prime")));
    }
    Ok(())
}

fn check_degree(c: u32) -> Result<()> {
    if c == 0 || c > MAX_DEGREE {
        return Err(UmfError::Parameter(format!("c = {c} outside supported range [1, {MAX_DEGREE}]")));
    }
    Ok(())
}

fn base_digits(mut n: u64, base: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((n % base as u64) as u32);
        n /= base as u64;
    }
    out
}

/// Remainder of `num` modulo the monic polynomial `den` (both low-degree first; `den`
/// includes its leading 1).
fn poly_rem(p: u32, num: &[u32], den: &[u32]) -> Vec<u32> {
    let mut r: Vec<u32> = num.to_vec();
    let dd = den.len() - 1;
    while r.len() > dd {
        let lead = r[r.len() - 1];
        let shift = r.len() - 1 - dd;
        if lead != 0 {
            for (i, &d) in den.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p - (lead * d) % p) % p;
            }
        }
        r.pop();
    }
    r
}

/// Brute-force irreducibility: no monic divisor of degree 1..=c/2.
fn is_irreducible(p: u32, f_low: &[u32]) -> bool {
    let c = f_low.len();
    let mut full = f_low.to_vec();
    full.push(1);
    for k in 1..=c / 2 {
        for code in 0..(p as u64).pow(k as u32) {
            let mut div = base_digits(code, p, k);
            div.push(1);
            if poly_rem(p, &full, &div).iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

struct FieldInner {
    params: FieldParams,
    q: u32,
    /// q*q products of digit values, when q <= TABLE_LIMIT.
    mul_table: Option<Vec<u32>>,
}

/// A validated residue field. Cheap to clone; equality is equality of parameters.
#[derive(Clone)]
pub struct GaloisField(Arc<FieldInner>);

impl PartialEq for GaloisField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.params == other.0.params
    }
}

impl Eq for GaloisField {}

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.p(), self.c())
    }
}

impl GaloisField {
    pub fn new(params: FieldParams) -> Result<Self> {
        check_prime(params.p)?;
        check_degree(params.c)?;
        let p = params.p;
        let mut params = params;
        if params.c == 1 {
            if !params.f.is_empty() {
                return Err(UmfError::Parameter("f must be omitted when c = 1".into()));
            }
        } else {
            if params.f.len() != params.c as usize {
                return Err(UmfError::Parameter(format!("f has {} coefficients, expected c = {}", params.f.len(), params.c)));
            }
            if let Some(&bad) = params.f.iter().find(|&&x| x >= p) {
                return Err(UmfError::Parameter(format!("coefficient {bad} not reduced mod {p}")));
            }
            if !is_irreducible(p, &params.f) {
                return Err(UmfError::Parameter(format!("modulus {:?} is reducible over GF({p})", params.f)));
            }
        }
        params.f.shrink_to_fit();
        let q = params.q();
        let mut inner = FieldInner { params, q, mul_table: None };
        if q <= TABLE_LIMIT {
            let mut table = vec![0u32; (q * q) as usize];
            for a in 0..q {
                for b in 0..q {
                    table[(a * q + b) as usize] = mul_slow(&inner.params, a, b);
                }
            }
            inner.mul_table = Some(table);
        }
        Ok(GaloisField(Arc::new(inner)))
    }

    pub fn from_prime(p: u32) -> Result<Self> {
        GaloisField::new(FieldParams::prime(p))
    }

    pub fn params(&self) -> &FieldParams {
        &self.0.params
    }

    pub fn p(&self) -> u32 {
        self.0.params.p
    }

    pub fn c(&self) -> u32 {
        self.0.params.c
    }

    pub fn q(&self) -> u32 {
        self.0.q
    }

    /// Sum of two digit values (coordinatewise mod p, no carries).
    #[inline]
    pub fn add_digits(&self, a: u32, b: u32) -> u32 {
        let p = self.p();
        if self.c() == 1 {
            return (a + b) % p;
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut scale = 1;
        for _ in 0..self.c() {
            out += ((a % p + b % p) % p) * scale;
            a /= p;
            b /= p;
            scale *= p;
        }
        out
    }

    #[inline]
    pub fn neg_digit(&self, a: u32) -> u32 {
        let p = self.p();
        let mut a = a;
        let mut out = 0;
        let mut scale = 1;
        for _ in 0..self.c() {
            out += ((p - a % p) % p) * scale;
            a /= p;
            scale *= p;
        }
        out
    }

    #[inline]
    pub fn mul_digits(&self, a: u32, b: u32) -> u32 {
        match &self.0.mul_table {
            Some(t) => t[(a * self.0.q + b) as usize],
            None => mul_slow(&self.0.params, a, b),
        }
    }

    /// Coordinate on `zeta_0 = 1`, the only coordinate the canonical character reads.
    #[inline]
    pub fn trace0(&self, a: u32) -> u32 {
        a % self.p()
    }

    pub fn element(&self, digit: u32) -> Result<FqElem> {
        FqElem::from_digit(self, digit as u64)
    }

    pub fn zero(&self) -> FqElem {
        FqElem { field: self.clone(), value: 0 }
    }

    pub fn one(&self) -> FqElem {
        FqElem { field: self.clone(), value: 1 }
    }
}

fn mul_slow(params: &FieldParams, a: u32, b: u32) -> u32 {
    let p = params.p;
    let c = params.c as usize;
    if c == 1 {
        return (a * b) % p;
    }
    let ac = base_digits(a as u64, p, c);
    let bc = base_digits(b as u64, p, c);
    let mut prod = vec![0u32; 2 * c - 1];
    for (i, &x) in ac.iter().enumerate() {
        for (j, &y) in bc.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    let mut modulus = params.f.clone();
    modulus.push(1);
    let r = poly_rem(p, &prod, &modulus);
    r.iter().rev().fold(0, |acc, &x| acc * p + x)
}

/// An element of GF(q), bound to its field.
#[derive(Clone, PartialEq, Eq)]
pub struct FqElem {
    field: GaloisField,
    value: u32,
}

impl fmt::Debug for FqElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fq{:?}", self.coords())
    }
}

impl FqElem {
    pub fn from_coords(field: &GaloisField, coords: &[u32]) -> Result<Self> {
        if coords.len() != field.c() as usize {
            return Err(UmfError::Parameter(format!("expected {} coordinates, got {}", field.c(), coords.len())));
        }
        let p = field.p();
        let value = coords.iter().rev().fold(0, |acc, &x| acc * p + x % p);
        Ok(FqElem { field: field.clone(), value })
    }

    /// Inverse of [`FqElem::digit_value`]: `d = sum a_mu p^mu`.
    pub fn from_digit(field: &GaloisField, d: u64) -> Result<Self> {
        let q = field.q() as u64;
        if d >= q {
            return Err(UmfError::Range { value: d, bound: q });
        }
        Ok(FqElem { field: field.clone(), value: d as u32 })
    }

    pub fn digit_value(&self) -> u32 {
        self.value
    }

    pub fn coords(&self) -> Vec<u32> {
        base_digits(self.value as u64, self.field.p(), self.field.c() as usize)
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &FqElem) -> Result<()> {
        if self.field != other.field {
            return Err(UmfError::Parameter(format!("mismatched fields {:?} and {:?}", self.field, other.field)));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &FqElem) -> Result<FqElem> {
        self.same_field(other)?;
        Ok(FqElem { field: self.field.clone(), value: self.field.add_digits(self.value, other.value) })
    }

    pub fn neg(&self) -> FqElem {
        FqElem { field: self.field.clone(), value: self.field.neg_digit(self.value) }
    }

    pub fn try_mul(&self, other: &FqElem) -> Result<FqElem> {
        self.same_field(other)?;
        Ok(FqElem { field: self.field.clone(), value: self.field.mul_digits(self.value, other.value) })
    }

    /// Multiplicative inverse via a^(q-2) (square and multiply).
    pub fn inv(&self) -> Result<FqElem> {
        if self.value == 0 {
            return Err(UmfError::DivisionByZero);
        }
        let f = &self.field;
        let mut exp = f.q() - 2;
        let mut base = self.value;
        let mut acc = 1;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = f.mul_digits(acc, base);
            }
            base = f.mul_digits(base, base);
            exp >>= 1;
        }
        Ok(FqElem { field: f.clone(), value: acc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf4() -> GaloisField {
        GaloisField::new(FieldParams::default_for(2, 2).unwrap()).unwrap()
    }

    fn el(f: &GaloisField, coords: &[u32]) -> FqElem {
        FqElem::from_coords(f, coords).unwrap()
    }

    #[test]
    fn add_examples() {
        let f = gf4();
        let z = el(&f, &[0, 1]);
        assert!(z.try_add(&z).unwrap().is_zero());
        assert_eq!(el(&f, &[1, 0]).try_add(&z).unwrap().coords(), vec![1, 1]);
        let f3 = GaloisField::from_prime(3).unwrap();
        let two = f3.element(2).unwrap();
        assert_eq!(two.try_add(&two).unwrap().digit_value(), 1);
    }

    #[test]
    fn mul_examples() {
        let f = gf4();
        let z = el(&f, &[0, 1]);
        let z1 = el(&f, &[1, 1]);
        assert_eq!(z.try_mul(&z).unwrap(), z1);
        assert_eq!(z.try_mul(&z1).unwrap(), f.one());
        assert_eq!(f.one().try_mul(&z1).unwrap(), z1);
    }

    #[test]
    fn inv_examples() {
        let f = gf4();
        assert_eq!(el(&f, &[0, 1]).inv().unwrap(), el(&f, &[1, 1]));
        assert_eq!(f.one().inv().unwrap(), f.one());
        let f5 = GaloisField::from_prime(5).unwrap();
        assert_eq!(f5.element(2).unwrap().inv().unwrap().digit_value(), 3);
        assert_eq!(f.zero().inv(), Err(UmfError::DivisionByZero));
    }

    #[test]
    fn digit_examples() {
        let f = gf4();
        assert_eq!(f.element(3).unwrap().coords(), vec![1, 1]);
        assert!(f.element(0).unwrap().is_zero());
        let f9 = GaloisField::new(FieldParams::first_irreducible(3, 2).unwrap()).unwrap();
        assert_eq!(f9.element(5).unwrap().coords(), vec![2, 1]);
        assert!(matches!(f9.element(9), Err(UmfError::Range { .. })));
    }

    #[test]
    fn mismatched_fields_rejected() {
        let a = gf4().one();
        let b = GaloisField::from_prime(2).unwrap().one();
        assert!(matches!(a.try_add(&b), Err(UmfError::Parameter(_))));
        assert!(matches!(a.try_mul(&b), Err(UmfError::Parameter(_))));
    }

    #[test]
    fn parameter_validation() {
        assert!(GaloisField::from_prime(9).is_err());
        assert!(GaloisField::from_prime(101).is_err());
        // z^2 + 1 = (z + 1)^2 over GF(2)
        assert!(GaloisField::new(FieldParams::new(2, 2, vec![1, 0])).is_err());
        assert!(GaloisField::new(FieldParams::new(2, 5, vec![1, 0, 1, 0, 0])).is_err());
        assert!(GaloisField::new(FieldParams::new(3, 1, vec![1])).is_err());
        assert_eq!(FieldParams::first_irreducible(2, 2).unwrap().f, vec![1, 1]);
        assert_eq!(FieldParams::first_irreducible(2, 3).unwrap().f, vec![1, 1, 0]);
    }

    #[test]
    fn json_fragment() {
        let s = serde_json::to_string(&FieldParams::prime(3)).unwrap();
        assert_eq!(s, r#"{"p":3,"c":1}"#);
        let back: FieldParams = serde_json::from_str(r#"{"p":2,"c":2,"f":[1,1]}"#).unwrap();
        assert_eq!(back, FieldParams::new(2, 2, vec![1, 1]));
        assert!(serde_json::from_str::<FieldParams>(r#"{"p":2,"c":1,"g":0}"#).is_err());
    }

    fn fields() -> Vec<GaloisField> {
        [(2, 1), (3, 1), (5, 1), (2, 2), (2, 3), (3, 2), (7, 2), (2, 4), (97, 1), (11, 3)]
            .iter()
            .map(|&(p, c)| GaloisField::new(FieldParams::first_irreducible(p, c).unwrap()).unwrap())
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn field_axioms(fi in 0usize..10, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
            let f = &fields()[fi];
            let q = f.q();
            let (a, b, c) = (f.element(a % q).unwrap(), f.element(b % q).unwrap(), f.element(c % q).unwrap());
            let ab = a.try_mul(&b).unwrap();
            prop_assert_eq!(ab.clone(), b.try_mul(&a).unwrap());
            prop_assert_eq!(ab.try_mul(&c).unwrap(), a.try_mul(&b.try_mul(&c).unwrap()).unwrap());
            prop_assert_eq!(a.try_add(&b).unwrap(), b.try_add(&a).unwrap());
            let lhs = a.try_mul(&b.try_add(&c).unwrap()).unwrap();
            let rhs = ab.try_add(&a.try_mul(&c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            if !a.is_zero() {
                prop_assert_eq!(a.try_mul(&a.inv().unwrap()).unwrap(), f.one());
            }
            let mut acc = f.zero();
            for _ in 0..f.p() {
                acc = acc.try_add(&a).unwrap();
            }
            prop_assert!(acc.is_zero());
            prop_assert!(a.try_add(&a.neg()).unwrap().is_zero());
        }

        #[test]
        fn digit_roundtrip(fi in 0usize..10, d in any::<u32>()) {
            let f = &fields()[fi];
            let d = d % f.q();
            let e = f.element(d).unwrap();
            prop_assert_eq!(e.digit_value(), d);
            prop_assert_eq!(FqElem::from_coords(f, &e.coords()).unwrap().digit_value(), d);
        }
    }
}
