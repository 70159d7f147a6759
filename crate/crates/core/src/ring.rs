//! Exact coefficient rings: prime fields, finite extension fields, the
//! rationals, sparse multivariate polynomial rings, and quotients
//! `R[pi]/(pi^2 - pi0)`.
//!
//! Every element carries a canonical form, so equality is coefficient
//! equality after normalization. Rings are immutable handles (`Arc`), cheap
//! to clone and safe to share across worker threads.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, Zero};
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("modulus {0} is not prime")]
    NonPrimeModulus(u64),
    #[error("characteristic 2 is not supported (the residue characteristic is assumed odd)")]
    CharacteristicTwo,
    #[error("modulus polynomial is reducible over F_{0}")]
    ReducibleModulus(u64),
    #[error("invalid ring descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("element is not a unit")]
    NotAUnit,
    #[error("elements belong to different rings")]
    MixedRings,
    #[error("value has no image in the target ring: {0}")]
    NoImage(String),
}

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

/// Exponent vector ordered by graded lexicographic comparison, so sparse
/// polynomial maps have a canonical term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial(Box<[u16]>);

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0u16; nvars].into_boxed_slice())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        assert!(idx < nvars);
        let mut e = vec![0u16; nvars];
        e[idx] = 1;
        Monomial(e.into_boxed_slice())
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(&a, &b)| a.checked_add(b).expect("monomial exponent overflow"))
                .collect(),
        )
    }

    fn divides(&self, other: &Self) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(&a, &b)| a <= b)
    }

    /// `other / self`, assuming divisibility.
    fn div_into(&self, other: &Self) -> Self {
        Monomial(
            other
                .0
                .iter()
                .zip(self.0.iter())
                .map(|(&b, &a)| b - a)
                .collect(),
        )
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

// ---------------------------------------------------------------------------
// Ring descriptors and handles
// ---------------------------------------------------------------------------

/// Descriptor of a supported coefficient ring.
#[derive(Debug, Clone)]
pub enum RingDescriptor {
    /// Z/p for an odd prime p.
    PrimeField(u64),
    /// F_{p^d} presented as F_p[x]/(modulus), modulus monic of degree d >= 2.
    /// Coefficients are listed from the constant term up, including the
    /// leading 1.
    ExtField { p: u64, modulus: Vec<u64> },
    /// The field of rational numbers (used as the symbolic coefficient base).
    Rationals,
    /// Sparse multivariate polynomials over a base ring.
    PolyRing { base: Ring, vars: Vec<String> },
    /// base[pi]/(pi^2 - pi0) with pi0 an element of the base ring.
    QuotientPi { base: Ring, pi0: RingElem },
}

#[derive(Debug)]
enum RingKind {
    PrimeField { p: u64 },
    ExtField { p: u64, modulus: Vec<u64> },
    Rationals,
    Poly { base: Ring, vars: Vec<String> },
    QuotientPi { base: Ring, pi0: RingElem },
}

/// Shared, immutable ring handle.
#[derive(Debug, Clone)]
pub struct Ring(Arc<RingKind>);

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        self.compatible(other)
    }
}
impl Eq for Ring {}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl Ring {
    /// Validated constructor (`ring_make`). Rejects characteristic 2, which
    /// the chart substitutions cannot support.
    pub fn new(desc: RingDescriptor) -> Result<Ring, RingError> {
        match desc {
            RingDescriptor::PrimeField(p) => Ring::prime_field(p),
            RingDescriptor::ExtField { p, modulus } => Ring::ext_field(p, &modulus),
            RingDescriptor::Rationals => Ok(Ring::rationals()),
            RingDescriptor::PolyRing { base, vars } => Ring::poly(&base, &vars),
            RingDescriptor::QuotientPi { base, pi0 } => Ring::quotient_pi(&base, pi0),
        }
    }

    pub fn prime_field(p: u64) -> Result<Ring, RingError> {
        if !is_prime(p) {
            return Err(RingError::NonPrimeModulus(p));
        }
        if p == 2 {
            return Err(RingError::CharacteristicTwo);
        }
        Ok(Ring(Arc::new(RingKind::PrimeField { p })))
    }

    /// F_2 and F_{2^d} are rejected by the validated constructors, but the
    /// raw-condition brute-force oracle is still meaningful there (it never
    /// halves anything). This constructor exists for that single purpose.
    pub fn prime_field_allowing_char_two(p: u64) -> Result<Ring, RingError> {
        if !is_prime(p) {
            return Err(RingError::NonPrimeModulus(p));
        }
        Ok(Ring(Arc::new(RingKind::PrimeField { p })))
    }

    pub fn ext_field(p: u64, modulus: &[u64]) -> Result<Ring, RingError> {
        if !is_prime(p) {
            return Err(RingError::NonPrimeModulus(p));
        }
        if p == 2 {
            return Err(RingError::CharacteristicTwo);
        }
        let modulus: Vec<u64> = modulus.iter().map(|&c| c % p).collect();
        if modulus.len() < 3 || *modulus.last().unwrap() != 1 {
            return Err(RingError::InvalidDescriptor(
                "extension modulus must be monic of degree >= 2".into(),
            ));
        }
        if !poly_is_irreducible(p, &modulus) {
            return Err(RingError::ReducibleModulus(p));
        }
        Ok(Ring(Arc::new(RingKind::ExtField {
            p,
            modulus: modulus.to_vec(),
        })))
    }

    /// F_{p^k} with a deterministically chosen irreducible modulus.
    pub fn ext_field_search(p: u64, k: u32) -> Result<Ring, RingError> {
        if k < 2 {
            return Err(RingError::InvalidDescriptor("extension degree must be >= 2".into()));
        }
        // Enumerate monic polynomials of degree k by their lower coefficients.
        let total = p.checked_pow(k).ok_or_else(|| {
            RingError::InvalidDescriptor("extension field too large".into())
        })?;
        for idx in 0..total {
            let mut rem = idx;
            let mut modulus = vec![0u64; k as usize + 1];
            for c in modulus.iter_mut().take(k as usize) {
                *c = rem % p;
                rem /= p;
            }
            modulus[k as usize] = 1;
            if modulus[0] == 0 {
                continue;
            }
            if let Ok(r) = Ring::ext_field(p, &modulus) {
                return Ok(r);
            }
        }
        Err(RingError::ReducibleModulus(p))
    }

    pub fn rationals() -> Ring {
        Ring(Arc::new(RingKind::Rationals))
    }

    pub fn poly(base: &Ring, vars: &[impl AsRef<str>]) -> Result<Ring, RingError> {
        let names: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        if names.is_empty() {
            return Err(RingError::InvalidDescriptor("no variables".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(RingError::InvalidDescriptor(format!(
                    "duplicate variable {a}"
                )));
            }
        }
        Ok(Ring(Arc::new(RingKind::Poly {
            base: base.clone(),
            vars: names,
        })))
    }

    pub fn quotient_pi(base: &Ring, pi0: RingElem) -> Result<Ring, RingError> {
        if !pi0.ring.compatible(base) {
            return Err(RingError::MixedRings);
        }
        Ok(Ring(Arc::new(RingKind::QuotientPi {
            base: base.clone(),
            pi0,
        })))
    }

    pub fn compatible(&self, other: &Ring) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (&*self.0, &*other.0) {
            (RingKind::PrimeField { p: a }, RingKind::PrimeField { p: b }) => a == b,
            (
                RingKind::ExtField { p: a, modulus: ma },
                RingKind::ExtField { p: b, modulus: mb },
            ) => a == b && ma == mb,
            (RingKind::Rationals, RingKind::Rationals) => true,
            (
                RingKind::Poly { base: a, vars: va },
                RingKind::Poly { base: b, vars: vb },
            ) => va == vb && a.compatible(b),
            (
                RingKind::QuotientPi { base: a, pi0: pa },
                RingKind::QuotientPi { base: b, pi0: pb },
            ) => a.compatible(b) && pa.data == pb.data,
            _ => false,
        }
    }

    pub fn is_field(&self) -> bool {
        match &*self.0 {
            RingKind::PrimeField { .. } | RingKind::ExtField { .. } | RingKind::Rationals => true,
            RingKind::Poly { .. } | RingKind::QuotientPi { .. } => false,
        }
    }

    /// True when the ring is an integral domain, so fraction-free elimination
    /// may divide by pivots.
    pub fn is_domain(&self) -> bool {
        match &*self.0 {
            RingKind::PrimeField { .. } | RingKind::ExtField { .. } | RingKind::Rationals => true,
            RingKind::Poly { base, .. } => base.is_domain(),
            RingKind::QuotientPi { base, pi0 } => base.is_domain() && pi0_is_nonsquare(pi0),
        }
    }

    pub fn characteristic_is_two(&self) -> bool {
        match &*self.0 {
            RingKind::PrimeField { p } | RingKind::ExtField { p, .. } => *p == 2,
            RingKind::Rationals => false,
            RingKind::Poly { base, .. } | RingKind::QuotientPi { base, .. } => {
                base.characteristic_is_two()
            }
        }
    }

    /// Number of elements for finite rings.
    pub fn element_count(&self) -> Option<u64> {
        match &*self.0 {
            RingKind::PrimeField { p } => Some(*p),
            RingKind::ExtField { p, modulus } => {
                let d = (modulus.len() - 1) as u32;
                p.checked_pow(d)
            }
            RingKind::Rationals | RingKind::Poly { .. } => None,
            RingKind::QuotientPi { base, .. } => {
                let n = base.element_count()?;
                n.checked_mul(n)
            }
        }
    }

    /// Indexable enumeration of a finite ring, used to partition brute-force
    /// searches across workers.
    pub fn element_at(&self, idx: u64) -> RingElem {
        match &*self.0 {
            RingKind::PrimeField { p } => {
                assert!(idx < *p);
                self.elem(ElemData::Fp(idx))
            }
            RingKind::ExtField { p, modulus } => {
                let d = modulus.len() - 1;
                let mut rem = idx;
                let mut coeffs = vec![0u64; d];
                for c in coeffs.iter_mut() {
                    *c = rem % p;
                    rem /= p;
                }
                assert_eq!(rem, 0, "index out of range");
                self.elem(ElemData::Ext(trim_poly(coeffs)))
            }
            RingKind::QuotientPi { base, .. } => {
                let n = base.element_count().expect("infinite base");
                let x = base.element_at(idx % n);
                let y = base.element_at(idx / n);
                self.elem(ElemData::Quot(Box::new((x, y))))
            }
            _ => panic!("ring is not finite"),
        }
    }

    pub fn zero(&self) -> RingElem {
        match &*self.0 {
            RingKind::PrimeField { .. } => self.elem(ElemData::Fp(0)),
            RingKind::ExtField { .. } => self.elem(ElemData::Ext(Vec::new())),
            RingKind::Rationals => self.elem(ElemData::Rat(BigRational::zero())),
            RingKind::Poly { .. } => self.elem(ElemData::Poly(BTreeMap::new())),
            RingKind::QuotientPi { base, .. } => {
                self.elem(ElemData::Quot(Box::new((base.zero(), base.zero()))))
            }
        }
    }

    pub fn one(&self) -> RingElem {
        self.from_i64(1)
    }

    pub fn from_i64(&self, n: i64) -> RingElem {
        match &*self.0 {
            RingKind::PrimeField { p } => self.elem(ElemData::Fp(i64_mod(n, *p))),
            RingKind::ExtField { p, .. } => {
                self.elem(ElemData::Ext(trim_poly(vec![i64_mod(n, *p)])))
            }
            RingKind::Rationals => self.elem(ElemData::Rat(BigRational::from(BigInt::from(n)))),
            RingKind::Poly { base, .. } => {
                let c = base.from_i64(n);
                let mut terms = BTreeMap::new();
                if !c.is_zero() {
                    terms.insert(Monomial::one(self.nvars()), c);
                }
                self.elem(ElemData::Poly(terms))
            }
            RingKind::QuotientPi { base, .. } => {
                self.elem(ElemData::Quot(Box::new((base.from_i64(n), base.zero()))))
            }
        }
    }

    pub fn from_rational(&self, r: &BigRational) -> Result<RingElem, RingError> {
        match &*self.0 {
            RingKind::Rationals => Ok(self.elem(ElemData::Rat(r.clone()))),
            RingKind::PrimeField { .. } | RingKind::ExtField { .. } => {
                let num = self.from_bigint(r.numer());
                let den = self.from_bigint(r.denom());
                let inv = den.inv().map_err(|_| {
                    RingError::NoImage(format!("denominator {} vanishes", r.denom()))
                })?;
                Ok(num.mul(&inv))
            }
            RingKind::Poly { base, .. } => {
                let c = base.from_rational(r)?;
                let mut terms = BTreeMap::new();
                if !c.is_zero() {
                    terms.insert(Monomial::one(self.nvars()), c);
                }
                Ok(self.elem(ElemData::Poly(terms)))
            }
            RingKind::QuotientPi { base, .. } => {
                let x = base.from_rational(r)?;
                Ok(self.elem(ElemData::Quot(Box::new((x, base.zero())))))
            }
        }
    }

    fn from_bigint(&self, n: &BigInt) -> RingElem {
        let p = match &*self.0 {
            RingKind::PrimeField { p } | RingKind::ExtField { p, .. } => BigInt::from(*p),
            _ => unreachable!(),
        };
        let mut r = n % &p;
        if r.is_negative() {
            r += &p;
        }
        let v: u64 = r.try_into().unwrap();
        match &*self.0 {
            RingKind::PrimeField { .. } => self.elem(ElemData::Fp(v)),
            RingKind::ExtField { .. } => self.elem(ElemData::Ext(trim_poly(vec![v]))),
            _ => unreachable!(),
        }
    }

    pub fn nvars(&self) -> usize {
        match &*self.0 {
            RingKind::Poly { vars, .. } => vars.len(),
            _ => 0,
        }
    }

    pub fn var_names(&self) -> &[String] {
        match &*self.0 {
            RingKind::Poly { vars, .. } => vars,
            _ => &[],
        }
    }

    pub fn var(&self, name: &str) -> Option<RingElem> {
        match &*self.0 {
            RingKind::Poly { vars, .. } => {
                let idx = vars.iter().position(|v| v == name)?;
                Some(self.var_by_index(idx))
            }
            _ => None,
        }
    }

    pub fn var_by_index(&self, idx: usize) -> RingElem {
        match &*self.0 {
            RingKind::Poly { base, vars } => {
                assert!(idx < vars.len());
                let mut terms = BTreeMap::new();
                terms.insert(Monomial::var(vars.len(), idx), base.one());
                self.elem(ElemData::Poly(terms))
            }
            _ => panic!("not a polynomial ring"),
        }
    }

    /// The class of pi in base[pi]/(pi^2 - pi0).
    pub fn pi(&self) -> Option<RingElem> {
        match &*self.0 {
            RingKind::QuotientPi { base, .. } => {
                Some(self.elem(ElemData::Quot(Box::new((base.zero(), base.one())))))
            }
            _ => None,
        }
    }

    /// pi0 = pi^2, embedded in the quotient ring.
    pub fn pi0(&self) -> Option<RingElem> {
        match &*self.0 {
            RingKind::QuotientPi { base, pi0 } => {
                let _ = base;
                Some(self.embed_base(pi0.clone()))
            }
            _ => None,
        }
    }

    pub fn base(&self) -> Option<&Ring> {
        match &*self.0 {
            RingKind::Poly { base, .. } | RingKind::QuotientPi { base, .. } => Some(base),
            _ => None,
        }
    }

    pub fn embed_base(&self, x: RingElem) -> RingElem {
        match &*self.0 {
            RingKind::QuotientPi { base, .. } => {
                assert!(x.ring.compatible(base));
                self.elem(ElemData::Quot(Box::new((x, base.zero()))))
            }
            _ => panic!("not a quotient ring"),
        }
    }

    /// Embed a base-ring constant into this polynomial ring.
    pub fn const_poly(&self, c: &RingElem) -> RingElem {
        match &*self.0 {
            RingKind::Poly { base, vars } => {
                assert!(c.ring.compatible(base));
                let mut terms = BTreeMap::new();
                if !c.is_zero() {
                    terms.insert(Monomial::one(vars.len()), c.clone());
                }
                self.elem(ElemData::Poly(terms))
            }
            _ => panic!("not a polynomial ring"),
        }
    }

    pub fn random(&self, rng: &mut dyn RngCore) -> RingElem {
        match &*self.0 {
            RingKind::Rationals => {
                let n = (rng.next_u64() % 19) as i64 - 9;
                self.from_i64(n)
            }
            RingKind::Poly { base, .. } => {
                // A small random linear combination of variables plus a constant.
                let mut acc = self.from_i64((rng.next_u64() % 19) as i64 - 9);
                for i in 0..self.nvars() {
                    if rng.next_u64() % 3 == 0 {
                        let c = base.random(rng);
                        let mut terms = BTreeMap::new();
                        if !c.is_zero() {
                            terms.insert(Monomial::var(self.nvars(), i), c);
                        }
                        acc = acc.add(&self.elem(ElemData::Poly(terms)));
                    }
                }
                acc
            }
            RingKind::QuotientPi { base, .. } => {
                let x = base.random(rng);
                let y = base.random(rng);
                self.elem(ElemData::Quot(Box::new((x, y))))
            }
            _ => {
                let n = self.element_count().expect("infinite ring");
                self.element_at(rng.next_u64() % n)
            }
        }
    }

    fn elem(&self, data: ElemData) -> RingElem {
        RingElem {
            ring: self.clone(),
            data,
        }
    }
}

fn i64_mod(n: i64, p: u64) -> u64 {
    let m = (n % p as i64 + p as i64) as u64;
    m % p
}

/// Conservative test that pi0 is not a square in the base ring, which makes
/// base[pi]/(pi^2 - pi0) an integral domain. Recognizes the cases the crate
/// actually uses: a polynomial variable, and non-residues in a prime field.
fn pi0_is_nonsquare(pi0: &RingElem) -> bool {
    if pi0.is_zero() {
        return false;
    }
    match (&*pi0.ring.0, &pi0.data) {
        (RingKind::Poly { .. }, ElemData::Poly(terms)) => {
            terms.len() == 1 && terms.keys().next().unwrap().degree() == 1
        }
        (RingKind::PrimeField { p }, ElemData::Fp(v)) => {
            // Euler criterion.
            pow_mod(*v, (p - 1) / 2, *p) != 1
        }
        _ => false,
    }
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// Elements
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElemData {
    Fp(u64),
    /// Coefficients from the constant term up, trailing zeros trimmed.
    Ext(Vec<u64>),
    Rat(BigRational),
    /// Canonical sparse form: no zero coefficients.
    Poly(BTreeMap<Monomial, RingElem>),
    /// x + y*pi.
    Quot(Box<(RingElem, RingElem)>),
}

#[derive(Debug, Clone)]
pub struct RingElem {
    ring: Ring,
    data: ElemData,
}

impl PartialEq for RingElem {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}
impl Eq for RingElem {}

impl PartialOrd for RingElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for RingElem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.data.cmp(&other.data)
    }
}

fn trim_poly(mut v: Vec<u64>) -> Vec<u64> {
    while v.last() == Some(&0) {
        v.pop();
    }
    v
}

impl RingElem {
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn data(&self) -> &ElemData {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        match &self.data {
            ElemData::Fp(v) => *v == 0,
            ElemData::Ext(v) => v.is_empty(),
            ElemData::Rat(r) => r.is_zero(),
            ElemData::Poly(t) => t.is_empty(),
            ElemData::Quot(xy) => xy.0.is_zero() && xy.1.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        *self == self.ring.one()
    }

    fn assert_same_ring(&self, other: &RingElem) {
        debug_assert!(
            self.ring.compatible(&other.ring),
            "operands from different rings"
        );
    }

    pub fn add(&self, other: &RingElem) -> RingElem {
        self.assert_same_ring(other);
        let data = match (&self.data, &other.data) {
            (ElemData::Fp(a), ElemData::Fp(b)) => {
                let p = match &*self.ring.0 {
                    RingKind::PrimeField { p } => *p,
                    _ => unreachable!(),
                };
                ElemData::Fp((a + b) % p)
            }
            (ElemData::Ext(a), ElemData::Ext(b)) => {
                let p = match &*self.ring.0 {
                    RingKind::ExtField { p, .. } => *p,
                    _ => unreachable!(),
                };
                let n = a.len().max(b.len());
                let mut out = vec![0u64; n];
                for (i, o) in out.iter_mut().enumerate() {
                    let x = a.get(i).copied().unwrap_or(0);
                    let y = b.get(i).copied().unwrap_or(0);
                    *o = (x + y) % p;
                }
                ElemData::Ext(trim_poly(out))
            }
            (ElemData::Rat(a), ElemData::Rat(b)) => ElemData::Rat(a + b),
            (ElemData::Poly(a), ElemData::Poly(b)) => {
                let mut out = a.clone();
                for (m, c) in b {
                    match out.get_mut(m) {
                        Some(acc) => {
                            let s = acc.add(c);
                            if s.is_zero() {
                                out.remove(m);
                            } else {
                                *acc = s;
                            }
                        }
                        None => {
                            out.insert(m.clone(), c.clone());
                        }
                    }
                }
                ElemData::Poly(out)
            }
            (ElemData::Quot(a), ElemData::Quot(b)) => {
                ElemData::Quot(Box::new((a.0.add(&b.0), a.1.add(&b.1))))
            }
            _ => panic!("mismatched element data"),
        };
        self.ring.elem(data)
    }

    pub fn neg(&self) -> RingElem {
        let data = match &self.data {
            ElemData::Fp(a) => {
                let p = match &*self.ring.0 {
                    RingKind::PrimeField { p } => *p,
                    _ => unreachable!(),
                };
                ElemData::Fp((p - a) % p)
            }
            ElemData::Ext(a) => {
                let p = match &*self.ring.0 {
                    RingKind::ExtField { p, .. } => *p,
                    _ => unreachable!(),
                };
                ElemData::Ext(trim_poly(a.iter().map(|&c| (p - c) % p).collect()))
            }
            ElemData::Rat(a) => ElemData::Rat(-a),
            ElemData::Poly(a) => {
                ElemData::Poly(a.iter().map(|(m, c)| (m.clone(), c.neg())).collect())
            }
            ElemData::Quot(a) => ElemData::Quot(Box::new((a.0.neg(), a.1.neg()))),
        };
        self.ring.elem(data)
    }

    pub fn sub(&self, other: &RingElem) -> RingElem {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RingElem) -> RingElem {
        self.assert_same_ring(other);
        let data = match (&self.data, &other.data) {
            (ElemData::Fp(a), ElemData::Fp(b)) => {
                let p = match &*self.ring.0 {
                    RingKind::PrimeField { p } => *p,
                    _ => unreachable!(),
                };
                ElemData::Fp(a * b % p)
            }
            (ElemData::Ext(a), ElemData::Ext(b)) => {
                let (p, modulus) = match &*self.ring.0 {
                    RingKind::ExtField { p, modulus } => (*p, modulus),
                    _ => unreachable!(),
                };
                ElemData::Ext(fp_poly_mulmod(a, b, modulus, p))
            }
            (ElemData::Rat(a), ElemData::Rat(b)) => ElemData::Rat(a * b),
            (ElemData::Poly(a), ElemData::Poly(b)) => {
                let mut out: BTreeMap<Monomial, RingElem> = BTreeMap::new();
                for (ma, ca) in a {
                    for (mb, cb) in b {
                        let m = ma.mul(mb);
                        let c = ca.mul(cb);
                        if c.is_zero() {
                            continue;
                        }
                        match out.get_mut(&m) {
                            Some(acc) => {
                                let s = acc.add(&c);
                                if s.is_zero() {
                                    out.remove(&m);
                                } else {
                                    *acc = s;
                                }
                            }
                            None => {
                                out.insert(m, c);
                            }
                        }
                    }
                }
                ElemData::Poly(out)
            }
            (ElemData::Quot(a), ElemData::Quot(b)) => {
                let pi0 = match &*self.ring.0 {
                    RingKind::QuotientPi { pi0, .. } => pi0,
                    _ => unreachable!(),
                };
                // (x1 + y1 pi)(x2 + y2 pi) = x1x2 + pi0 y1y2 + (x1y2 + x2y1) pi
                let x = a.0.mul(&b.0).add(&pi0.mul(&a.1.mul(&b.1)));
                let y = a.0.mul(&b.1).add(&a.1.mul(&b.0));
                ElemData::Quot(Box::new((x, y)))
            }
            _ => panic!("mismatched element data"),
        };
        self.ring.elem(data)
    }

    pub fn pow(&self, mut e: u64) -> RingElem {
        let mut acc = self.ring.one();
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self) -> Result<RingElem, RingError> {
        match &self.data {
            ElemData::Fp(a) => {
                if *a == 0 {
                    return Err(RingError::NotAUnit);
                }
                let p = match &*self.ring.0 {
                    RingKind::PrimeField { p } => *p,
                    _ => unreachable!(),
                };
                Ok(self.ring.elem(ElemData::Fp(pow_mod(*a, p - 2, p))))
            }
            ElemData::Ext(a) => {
                if a.is_empty() {
                    return Err(RingError::NotAUnit);
                }
                let (p, modulus) = match &*self.ring.0 {
                    RingKind::ExtField { p, modulus } => (*p, modulus.clone()),
                    _ => unreachable!(),
                };
                let inv = fp_poly_invmod(a, &modulus, p).ok_or(RingError::NotAUnit)?;
                Ok(self.ring.elem(ElemData::Ext(inv)))
            }
            ElemData::Rat(a) => {
                if a.is_zero() {
                    return Err(RingError::NotAUnit);
                }
                Ok(self.ring.elem(ElemData::Rat(a.recip())))
            }
            ElemData::Poly(t) => {
                // Units are unit constants.
                if t.len() != 1 {
                    return Err(RingError::NotAUnit);
                }
                let (m, c) = t.iter().next().unwrap();
                if !m.is_one() {
                    return Err(RingError::NotAUnit);
                }
                let cinv = c.inv()?;
                let mut terms = BTreeMap::new();
                terms.insert(m.clone(), cinv);
                Ok(self.ring.elem(ElemData::Poly(terms)))
            }
            ElemData::Quot(xy) => {
                // (x + y pi)^-1 = (x - y pi) / (x^2 - pi0 y^2)
                let pi0 = match &*self.ring.0 {
                    RingKind::QuotientPi { pi0, .. } => pi0,
                    _ => unreachable!(),
                };
                let norm = xy.0.mul(&xy.0).sub(&pi0.mul(&xy.1.mul(&xy.1)));
                let ninv = norm.inv()?;
                Ok(self
                    .ring
                    .elem(ElemData::Quot(Box::new((xy.0.mul(&ninv), xy.1.neg().mul(&ninv))))))
            }
        }
    }

    /// Division by 2, required by the chart substitution chain. Fails only in
    /// characteristic 2.
    pub fn halve(&self) -> Result<RingElem, RingError> {
        match &self.data {
            ElemData::Poly(t) => {
                let mut out = BTreeMap::new();
                for (m, c) in t {
                    out.insert(m.clone(), c.halve()?);
                }
                Ok(self.ring.elem(ElemData::Poly(out)))
            }
            ElemData::Quot(xy) => Ok(self.ring.elem(ElemData::Quot(Box::new((
                xy.0.halve()?,
                xy.1.halve()?,
            ))))),
            _ => {
                if self.ring.characteristic_is_two() {
                    return Err(RingError::CharacteristicTwo);
                }
                let two_inv = self.ring.from_i64(2).inv()?;
                Ok(self.mul(&two_inv))
            }
        }
    }

    /// Exact division, defined when `self = q * d` for some ring element `q`.
    /// Returns `None` when no exact quotient is found.
    pub fn exact_div(&self, d: &RingElem) -> Option<RingElem> {
        if self.is_zero() {
            return Some(self.ring.zero());
        }
        if d.is_zero() {
            return None;
        }
        match (&self.data, &d.data) {
            (_, _) if self.ring.is_field() => d.inv().ok().map(|i| self.mul(&i)),
            (ElemData::Poly(_), ElemData::Poly(dt)) => {
                // Long division by the leading term; exact when d divides self.
                let mut rem = self.clone();
                let mut quo = self.ring.zero();
                let (dm, dc) = dt.iter().next_back().unwrap();
                loop {
                    if rem.is_zero() {
                        return Some(quo);
                    }
                    let (rm, rc) = match &rem.data {
                        ElemData::Poly(rt) => {
                            let (m, c) = rt.iter().next_back().unwrap();
                            (m.clone(), c.clone())
                        }
                        _ => unreachable!(),
                    };
                    if !dm.divides(&rm) {
                        return None;
                    }
                    let qc = rc.exact_div(dc)?;
                    let qm = dm.div_into(&rm);
                    let mut terms = BTreeMap::new();
                    terms.insert(qm, qc);
                    let t = self.ring.elem(ElemData::Poly(terms));
                    quo = quo.add(&t);
                    rem = rem.sub(&t.mul(d));
                }
            }
            (ElemData::Quot(_), ElemData::Quot(dxy)) => {
                // Multiply by the conjugate, divide both components by the norm.
                let pi0 = match &*self.ring.0 {
                    RingKind::QuotientPi { pi0, .. } => pi0,
                    _ => unreachable!(),
                };
                let norm = dxy.0.mul(&dxy.0).sub(&pi0.mul(&dxy.1.mul(&dxy.1)));
                if norm.is_zero() {
                    return None;
                }
                let conj = self
                    .ring
                    .elem(ElemData::Quot(Box::new((dxy.0.clone(), dxy.1.neg()))));
                let num = self.mul(&conj);
                let (nx, ny) = match &num.data {
                    ElemData::Quot(xy) => (xy.0.clone(), xy.1.clone()),
                    _ => unreachable!(),
                };
                let x = nx.exact_div(&norm)?;
                let y = ny.exact_div(&norm)?;
                Some(self.ring.elem(ElemData::Quot(Box::new((x, y)))))
            }
            _ => None,
        }
    }

    /// Image under the evaluation map sending the i-th polynomial variable to
    /// `var_images[i]` and pi to `pi_image`; rational coefficients map via
    /// `Ring::from_rational`. Used to specialize symbolic charts to finite
    /// rings.
    pub fn specialize(
        &self,
        target: &Ring,
        var_images: &[RingElem],
        pi_image: Option<&RingElem>,
    ) -> Result<RingElem, RingError> {
        match &self.data {
            ElemData::Fp(_) | ElemData::Ext(_) => {
                if self.ring.compatible(target) {
                    Ok(target.elem(self.data.clone()))
                } else {
                    Err(RingError::NoImage("finite-field coefficient".into()))
                }
            }
            ElemData::Rat(r) => target.from_rational(r),
            ElemData::Poly(terms) => {
                let base_target = target;
                let mut acc = base_target.zero();
                for (m, c) in terms {
                    let mut t = c.specialize(base_target, &[], pi_image)?;
                    for (i, &e) in m.exponents().iter().enumerate() {
                        if e > 0 {
                            t = t.mul(&var_images[i].pow(e as u64));
                        }
                    }
                    acc = acc.add(&t);
                }
                Ok(acc)
            }
            ElemData::Quot(xy) => {
                let pi = pi_image.ok_or_else(|| RingError::NoImage("no image for pi".into()))?;
                let x = xy.0.specialize(target, var_images, pi_image)?;
                let y = xy.1.specialize(target, var_images, pi_image)?;
                Ok(x.add(&y.mul(pi)))
            }
        }
    }

    /// Total degree in the polynomial variables (quotient components are
    /// inspected recursively). Constants have degree 0.
    pub fn poly_degree(&self) -> u32 {
        match &self.data {
            ElemData::Poly(t) => t.keys().map(|m| m.degree()).max().unwrap_or(0),
            ElemData::Quot(xy) => xy.0.poly_degree().max(xy.1.poly_degree()),
            _ => 0,
        }
    }
}

// Pretty printing -----------------------------------------------------------

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.data {
            ElemData::Fp(v) => write!(f, "{v}"),
            ElemData::Ext(cs) => {
                if cs.is_empty() {
                    return write!(f, "0");
                }
                let parts: Vec<String> = cs
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0)
                    .map(|(i, &c)| match i {
                        0 => format!("{c}"),
                        1 => format!("{c}*x"),
                        _ => format!("{c}*x^{i}"),
                    })
                    .collect();
                write!(f, "{}", parts.join(" + "))
            }
            ElemData::Rat(r) => write!(f, "{r}"),
            ElemData::Poly(terms) => {
                if terms.is_empty() {
                    return write!(f, "0");
                }
                let names = self.ring.var_names();
                let mut parts = Vec::new();
                for (m, c) in terms.iter().rev() {
                    let mut factors = Vec::new();
                    let coeff = format!("{c}");
                    for (i, &e) in m.exponents().iter().enumerate() {
                        match e {
                            0 => {}
                            1 => factors.push(names[i].clone()),
                            _ => factors.push(format!("{}^{}", names[i], e)),
                        }
                    }
                    if factors.is_empty() {
                        parts.push(coeff);
                    } else if coeff == "1" {
                        parts.push(factors.join("*"));
                    } else if coeff == "-1" {
                        parts.push(format!("-{}", factors.join("*")));
                    } else {
                        parts.push(format!("{}*{}", coeff, factors.join("*")));
                    }
                }
                write!(f, "{}", parts.join(" + "))
            }
            ElemData::Quot(xy) => {
                if xy.1.is_zero() {
                    write!(f, "{}", xy.0)
                } else if xy.0.is_zero() {
                    write!(f, "({})*pi", xy.1)
                } else {
                    write!(f, "({}) + ({})*pi", xy.0, xy.1)
                }
            }
        }
    }
}

// F_p[x] helpers for the extension-field kind --------------------------------

fn fp_poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    trim_poly(out)
}

fn fp_poly_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    let dm = m.len() - 1;
    // m is monic.
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        if lead != 0 {
            for (i, &mc) in m.iter().enumerate() {
                let idx = i + shift;
                let sub = lead * mc % p;
                r[idx] = (r[idx] + p - sub) % p;
            }
        }
        r.pop();
        r = trim_poly(r);
        if r.is_empty() {
            break;
        }
    }
    trim_poly(r)
}

fn fp_poly_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    fp_poly_rem(&fp_poly_mul(a, b, p), m, p)
}

fn fp_poly_divmod(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    if a.len() < b.len() {
        return (Vec::new(), a.to_vec());
    }
    let mut r = a.to_vec();
    let mut q = vec![0u64; a.len() - b.len() + 1];
    let blead_inv = pow_mod(*b.last().unwrap(), p - 2, p);
    while r.len() >= b.len() && !r.is_empty() {
        let coef = *r.last().unwrap() * blead_inv % p;
        let shift = r.len() - b.len();
        q[shift] = coef;
        for (i, &bc) in b.iter().enumerate() {
            let sub = coef * bc % p;
            r[i + shift] = (r[i + shift] + p - sub) % p;
        }
        r = trim_poly(r);
    }
    (trim_poly(q), r)
}

fn fp_poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let (mut x, mut y) = (a.to_vec(), b.to_vec());
    while !y.is_empty() {
        let (_, r) = fp_poly_divmod(&x, &y, p);
        x = y;
        y = r;
    }
    if let Some(&l) = x.last() {
        let linv = pow_mod(l, p - 2, p);
        x = x.iter().map(|&c| c * linv % p).collect();
    }
    x
}

fn fp_poly_invmod(a: &[u64], m: &[u64], p: u64) -> Option<Vec<u64>> {
    // Extended Euclid in F_p[x].
    let (mut r0, mut r1) = (m.to_vec(), a.to_vec());
    let (mut t0, mut t1) = (Vec::new(), vec![1u64]);
    while !r1.is_empty() {
        let (q, r) = fp_poly_divmod(&r0, &r1, p);
        let qt = fp_poly_mul(&q, &t1, p);
        let mut t2 = t0.clone();
        // t2 = t0 - q*t1
        let n = t2.len().max(qt.len());
        t2.resize(n, 0);
        for (i, &c) in qt.iter().enumerate() {
            t2[i] = (t2[i] + p - c) % p;
        }
        t0 = t1;
        t1 = trim_poly(t2);
        r0 = r1;
        r1 = r;
    }
    if r0.len() != 1 {
        return None; // gcd not a unit
    }
    let linv = pow_mod(r0[0], p - 2, p);
    Some(trim_poly(t0.iter().map(|&c| c * linv % p).collect()))
}

/// Rabin irreducibility test for a monic polynomial over F_p.
fn poly_is_irreducible(p: u64, m: &[u64]) -> bool {
    let d = (m.len() - 1) as u64;
    let x = vec![0u64, 1];
    // x^(p^k) mod m via repeated Frobenius.
    let frob = |f: &[u64]| -> Vec<u64> {
        let mut acc = vec![1u64];
        let mut b = f.to_vec();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = fp_poly_mulmod(&acc, &b, m, p);
            }
            b = fp_poly_mulmod(&b, &b, m, p);
            e >>= 1;
        }
        acc
    };
    let mut xq = x.clone();
    let mut powers = Vec::new();
    for _ in 0..d {
        xq = frob(&xq);
        powers.push(xq.clone());
    }
    // x^(p^d) == x mod m
    let mut diff = powers[d as usize - 1].clone();
    let n = diff.len().max(2);
    diff.resize(n, 0);
    diff[1] = (diff[1] + p - 1) % p;
    if !trim_poly(diff).is_empty() {
        return false;
    }
    // gcd(x^(p^(d/l)) - x, m) == 1 for every prime l | d
    let mut dd = d;
    let mut primes = Vec::new();
    let mut f = 2;
    while f * f <= dd {
        if dd % f == 0 {
            primes.push(f);
            while dd % f == 0 {
                dd /= f;
            }
        }
        f += 1;
    }
    if dd > 1 {
        primes.push(dd);
    }
    for l in primes {
        let k = d / l;
        let mut diff = powers[k as usize - 1].clone();
        let n = diff.len().max(2);
        diff.resize(n, 0);
        diff[1] = (diff[1] + p - 1) % p;
        let diff = trim_poly(diff);
        if diff.is_empty() {
            return false;
        }
        if fp_poly_gcd(&diff, m, p).len() != 1 {
            return false;
        }
    }
    true
}
