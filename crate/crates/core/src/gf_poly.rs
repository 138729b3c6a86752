//! Arithmetic in the prime field `Z_q` and the polynomial ring `Z_q[x]`.
//!
//! Integers and polynomials are identified through base-`q` digits:
//! `n = n_0 + n_1 q + ... + n_r q^r` corresponds to `n_0 + n_1 x + ... + n_r x^r`.
//! Counting helpers for monic polynomials coprime to a fixed modulus live
//! here as well, with every count kept exact.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rational;

/// A prime modulus `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Prime(u32);

impl Prime {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 || (2..).take_while(|d| d * d <= q).any(|d| q % d == 0) {
            return Err(Error::NotPrime(q));
        }
        Ok(Prime(q))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.0 as u64 - b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    /// Inverse by Fermat's little theorem; `a` must be nonzero.
    pub fn inv(self, a: u32) -> Option<u32> {
        if a % self.0 == 0 {
            return None;
        }
        let (mut base, mut exp, mut acc) = (a as u64 % self.0 as u64, self.0 - 2, 1u64);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % self.0 as u64;
            }
            base = base * base % self.0 as u64;
            exp >>= 1;
        }
        Some(acc as u32)
    }

    /// `q^e` as a `u64`; panics on overflow.
    pub fn pow(self, e: u32) -> u64 {
        (self.0 as u64)
            .checked_pow(e)
            .unwrap_or_else(|| panic!("{}^{} overflows u64", self.0, e))
    }

    /// Base-`q` digits of `n`, least significant first, with no trailing zeros.
    pub fn digits(self, mut n: u64) -> Vec<u32> {
        let q = self.0 as u64;
        let mut out = Vec::new();
        while n > 0 {
            out.push((n % q) as u32);
            n /= q;
        }
        out
    }

    /// Exactly `len` base-`q` digits of `n`, least significant first.
    pub fn digits_padded(self, mut n: u64, len: usize) -> Vec<u32> {
        let q = self.0 as u64;
        (0..len)
            .map(|_| {
                let d = (n % q) as u32;
                n /= q;
                d
            })
            .collect()
    }
}

impl TryFrom<u32> for Prime {
    type Error = Error;
    fn try_from(q: u32) -> Result<Self> {
        Prime::new(q)
    }
}

impl From<Prime> for u32 {
    fn from(p: Prime) -> u32 {
        p.0
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of `Z_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    modulus: Prime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    /// Inverse of the second operand; the first is ignored.
    Inv,
}

impl FieldElement {
    pub fn new(value: u32, modulus: Prime) -> Result<Self> {
        if value >= modulus.get() {
            return Err(Error::OutOfRange {
                value: value as u64,
                modulus: modulus.get(),
            });
        }
        Ok(FieldElement { value, modulus })
    }

    /// Reduces an arbitrary integer into the field.
    pub fn reduce(value: i64, modulus: Prime) -> Self {
        let q = modulus.get() as i64;
        FieldElement {
            value: value.rem_euclid(q) as u32,
            modulus,
        }
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn modulus(self) -> Prime {
        self.modulus
    }

    fn same_field(self, other: Self) -> Result<Prime> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(self.modulus.get(), other.modulus.get()));
        }
        Ok(self.modulus)
    }

    pub fn checked_add(self, other: Self) -> Result<Self> {
        let q = self.same_field(other)?;
        Ok(FieldElement { value: q.add(self.value, other.value), modulus: q })
    }

    pub fn checked_sub(self, other: Self) -> Result<Self> {
        let q = self.same_field(other)?;
        Ok(FieldElement { value: q.sub(self.value, other.value), modulus: q })
    }

    pub fn checked_mul(self, other: Self) -> Result<Self> {
        let q = self.same_field(other)?;
        Ok(FieldElement { value: q.mul(self.value, other.value), modulus: q })
    }

    pub fn inverse(self) -> Result<Self> {
        let value = self.modulus.inv(self.value).ok_or(Error::InverseOfZero)?;
        Ok(FieldElement { value, modulus: self.modulus })
    }
}

/// Applies a field operation; `Inv` inverts `b` after checking the moduli agree.
pub fn field_arith(op: FieldOp, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    match op {
        FieldOp::Add => a.checked_add(b),
        FieldOp::Sub => a.checked_sub(b),
        FieldOp::Mul => a.checked_mul(b),
        FieldOp::Inv => {
            a.same_field(b)?;
            b.inverse()
        }
    }
}

/// A polynomial over `Z_q`, coefficients lowest degree first with no
/// trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    modulus: Prime,
    coeffs: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyOp {
    Add,
    Sub,
    Mul,
    DivMod,
    Gcd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolyResult {
    Single(Polynomial),
    Pair(Polynomial, Polynomial),
}

impl Polynomial {
    /// Builds a polynomial from raw coefficients (lowest first), reducing
    /// each modulo `q`.
    pub fn new(modulus: Prime, coeffs: impl IntoIterator<Item = u32>) -> Self {
        let q = modulus.get();
        let mut p = Polynomial {
            modulus,
            coeffs: coeffs.into_iter().map(|c| c % q).collect(),
        };
        p.trim();
        p
    }

    pub fn from_elements(modulus: Prime, coeffs: &[FieldElement]) -> Result<Self> {
        for c in coeffs {
            if c.modulus() != modulus {
                return Err(Error::ModulusMismatch(modulus.get(), c.modulus().get()));
            }
        }
        Ok(Self::new(modulus, coeffs.iter().map(|c| c.value())))
    }

    pub fn zero(modulus: Prime) -> Self {
        Polynomial { modulus, coeffs: Vec::new() }
    }

    pub fn one(modulus: Prime) -> Self {
        Self::constant(1, modulus)
    }

    pub fn constant(c: u32, modulus: Prime) -> Self {
        Self::new(modulus, [c])
    }

    /// `c * x^e`.
    pub fn monomial(c: u32, e: usize, modulus: Prime) -> Self {
        let mut coeffs = vec![0; e + 1];
        coeffs[e] = c;
        Self::new(modulus, coeffs)
    }

    /// The polynomial attached to `n` through its base-`q` digits.
    pub fn from_int(n: u64, modulus: Prime) -> Self {
        Polynomial { modulus, coeffs: modulus.digits(n) }
    }

    /// Inverse of [`Polynomial::from_int`]; panics if the value overflows `u64`.
    pub fn to_int(&self) -> u64 {
        let q = self.modulus.get() as u64;
        self.coeffs
            .iter()
            .rev()
            .fold(0u64, |acc, &c| acc.checked_mul(q).and_then(|v| v.checked_add(c as u64)).expect("polynomial index overflows u64"))
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
    }

    pub fn modulus(&self) -> Prime {
        self.modulus
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    /// Coefficient of `x^i` (zero past the degree).
    pub fn coeff(&self, i: usize) -> u32 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    pub fn coeff_element(&self, i: usize) -> FieldElement {
        FieldElement { value: self.coeff(i), modulus: self.modulus }
    }

    /// `None` stands for the degree of the zero polynomial (minus infinity).
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs == [1]
    }

    pub fn leading(&self) -> Option<u32> {
        self.coeffs.last().copied()
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == Some(1)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(self.modulus.get(), other.modulus.get()));
        }
        Ok(())
    }

    pub fn scale(&self, c: u32) -> Self {
        let q = self.modulus;
        Self::new(q, self.coeffs.iter().map(|&a| q.mul(a, c % q.get())))
    }

    /// Scales to leading coefficient one; zero stays zero.
    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some(lc) => self.scale(self.modulus.inv(lc).expect("nonzero leading coefficient")),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let q = self.modulus;
        let len = self.coeffs.len().max(other.coeffs.len());
        Ok(Self::new(q, (0..len).map(|i| q.add(self.coeff(i), other.coeff(i)))))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let q = self.modulus;
        let len = self.coeffs.len().max(other.coeffs.len());
        Ok(Self::new(q, (0..len).map(|i| q.sub(self.coeff(i), other.coeff(i)))))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.modulus));
        }
        let q = self.modulus.get() as u64;
        let mut acc = vec![0u64; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                acc[i + j] = (acc[i + j] + a as u64 * b as u64) % q;
            }
        }
        Ok(Self::new(self.modulus, acc.into_iter().map(|c| c as u32)))
    }

    /// Euclidean division: `self = quotient * divisor + remainder`.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        self.check(divisor)?;
        let q = self.modulus;
        let dlen = divisor.coeffs.len();
        let lead_inv = match divisor.leading() {
            None => return Err(Error::DivisionByZero),
            Some(lc) => q.inv(lc).expect("nonzero leading coefficient"),
        };
        let mut rem = self.coeffs.clone();
        if rem.len() < dlen {
            return Ok((Self::zero(q), self.clone()));
        }
        let mut quot = vec![0u32; rem.len() - dlen + 1];
        for shift in (0..quot.len()).rev() {
            let c = q.mul(rem[shift + dlen - 1], lead_inv);
            quot[shift] = c;
            if c != 0 {
                for (i, &d) in divisor.coeffs.iter().enumerate() {
                    rem[shift + i] = q.sub(rem[shift + i], q.mul(c, d));
                }
            }
        }
        Ok((Self::new(q, quot), Self::new(q, rem)))
    }

    pub fn divides(&self, other: &Self) -> Result<bool> {
        Ok(other.div_rem(self)?.1.is_zero())
    }

    /// Monic greatest common divisor; errors when both inputs are zero.
    pub fn gcd(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        if self.is_zero() && other.is_zero() {
            return Err(Error::GcdOfZeros);
        }
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b)?.1;
            a = b;
            b = r;
        }
        Ok(a.monic())
    }

    pub fn is_coprime_to(&self, other: &Self) -> Result<bool> {
        Ok(self.gcd(other)?.is_one())
    }

    /// Distinct monic irreducible factors with multiplicities, by trial
    /// division against monic polynomials of increasing degree.
    pub fn factor(&self) -> Result<Vec<(Polynomial, u32)>> {
        if self.is_zero() {
            return Err(Error::MoebiusOfZero);
        }
        let q = self.modulus;
        let mut rest = self.monic();
        let mut factors = Vec::new();
        let mut d = 1usize;
        while rest.degree().unwrap_or(0) >= 2 * d {
            for cand in enumerate_monic(d, q, None) {
                let mut mult = 0;
                loop {
                    let (quot, rem) = rest.div_rem(&cand)?;
                    if !rem.is_zero() {
                        break;
                    }
                    rest = quot;
                    mult += 1;
                }
                if mult > 0 {
                    factors.push((cand, mult));
                }
            }
            d += 1;
        }
        if rest.degree().unwrap_or(0) >= 1 {
            match factors.iter_mut().find(|(f, _)| *f == rest) {
                Some((_, m)) => *m += 1,
                None => factors.push((rest, 1)),
            }
        }
        factors.sort_by_key(|(f, _)| (f.degree(), f.to_int()));
        Ok(factors)
    }

    /// Product of the distinct irreducible factors (monic).
    pub fn radical(&self) -> Result<Polynomial> {
        let mut r = Polynomial::one(self.modulus);
        for (f, _) in self.factor()? {
            r = &r * &f;
        }
        Ok(r)
    }
}

/// Ring operation dispatcher: `DivMod` yields `(quotient, remainder)`, the
/// rest a single polynomial.
pub fn poly_arith(op: PolyOp, a: &Polynomial, b: &Polynomial) -> Result<PolyResult> {
    Ok(match op {
        PolyOp::Add => PolyResult::Single(a.checked_add(b)?),
        PolyOp::Sub => PolyResult::Single(a.checked_sub(b)?),
        PolyOp::Mul => PolyResult::Single(a.checked_mul(b)?),
        PolyOp::DivMod => {
            let (qt, r) = a.div_rem(b)?;
            PolyResult::Pair(qt, r)
        }
        PolyOp::Gcd => PolyResult::Single(a.gcd(b)?),
    })
}

macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr<&Polynomial> for &Polynomial {
            type Output = Polynomial;
            /// Panics if the moduli differ.
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                self.$checked(rhs).expect("polynomial moduli differ")
            }
        }
        impl $tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}
binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        let q = self.modulus;
        Polynomial::new(q, self.coeffs.iter().map(|&c| q.neg(c)))
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self, self.modulus)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (i, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => write!(f, "x")?,
                (1, c) => write!(f, "{c}x")?,
                (i, 1) => write!(f, "x^{i}")?,
                (i, c) => write!(f, "{c}x^{i}")?,
            }
        }
        Ok(())
    }
}

/// Polynomial Moebius function: `1` on units, `0` when a square of an
/// irreducible divides `f`, `(-1)^rho` for `rho` distinct irreducible factors.
pub fn moebius_q(f: &Polynomial) -> Result<i8> {
    if f.is_zero() {
        return Err(Error::MoebiusOfZero);
    }
    let factors = f.factor()?;
    if factors.iter().any(|&(_, m)| m > 1) {
        return Ok(0);
    }
    Ok(if factors.len() % 2 == 0 { 1 } else { -1 })
}

/// The monic polynomials of degree `a` (the set `W_q(a)`), optionally
/// restricted to those coprime to `coprime_to`. Ordered by integer value.
pub fn enumerate_monic(
    a: usize,
    q: Prime,
    coprime_to: Option<&Polynomial>,
) -> impl Iterator<Item = Polynomial> + '_ {
    let lo = q.pow(a as u32);
    (lo..2 * lo)
        .map(move |n| Polynomial::from_int(n, q))
        .filter(move |k| match coprime_to {
            None => true,
            Some(p) if p.is_zero() => k.is_one(),
            Some(p) => k.is_coprime_to(p).expect("same modulus"),
        })
}

/// `A(p) = prod_j (1 - q^{-deg p_j})` over the distinct irreducible factors of `p`.
pub fn density_factor(p: &Polynomial) -> Result<Rational> {
    let q = p.modulus().get() as i128;
    let mut acc = Rational::one();
    for (f, _) in p.factor()? {
        let d = f.degree().unwrap_or(0) as u32;
        acc *= Rational::one() - Rational::new(1, q.pow(d));
    }
    Ok(acc)
}

/// The product formula `q^a A(p)` for the number of monic degree-`a`
/// polynomials coprime to `p`. It counts exactly only once `a` reaches the
/// degree of the radical of `p`; below that see [`coprime_count_moebius`].
pub fn coprime_count_formula(a: usize, p: &Polynomial) -> Result<Rational> {
    if p.is_zero() {
        return Err(Error::MoebiusOfZero);
    }
    if a < 1 {
        return Err(Error::DegreeTooSmall { min: 1, got: a });
    }
    let q = p.modulus().get() as i128;
    Ok(Rational::from_integer(q.pow(a as u32)) * density_factor(p)?)
}

/// Exact number of monic degree-`a` polynomials coprime to `p`, via
/// `sum_{l | rad p, deg l <= a} mu(l) q^{a - deg l}`.
pub fn coprime_count_moebius(a: usize, p: &Polynomial) -> Result<u64> {
    let q = p.modulus();
    let factors = p.factor()?;
    let mut total: i128 = 0;
    for mask in 0u32..(1 << factors.len()) {
        let deg: usize = factors
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, (f, _))| f.degree().unwrap_or(0))
            .sum();
        if deg > a {
            continue;
        }
        let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        total += sign * q.pow((a - deg) as u32) as i128;
    }
    Ok(total as u64)
}

/// Partial sum `sum mu_q(l) / q^{s deg l}` over all nonzero `l` of degree at
/// most `cutoff` coprime to `p` (non-monic `l` included).
pub fn partial_sum_b(cutoff: usize, p: &Polynomial, s: u32) -> Result<Rational> {
    if p.is_zero() {
        return Err(Error::MoebiusOfZero);
    }
    if s < 2 {
        return Err(Error::Config(format!("dimension s = {s} must be at least 2")));
    }
    let q = p.modulus();
    let units = (q.get() - 1) as i128;
    let mut acc = Rational::zero();
    for d in 0..=cutoff {
        let mut monic_sum: i128 = 0;
        for l in enumerate_monic(d, q, Some(p)) {
            monic_sum += moebius_q(&l)? as i128;
        }
        let denom = (q.get() as i128).pow(s * d as u32);
        acc += Rational::new(units * monic_sum, denom);
    }
    Ok(acc)
}

/// `x * prod_{j=1}^{J} prod_{kappa=1}^{q-1} (1 + kappa x^j)`.
pub fn truncation_modulus(q: Prime, j_trunc: u32) -> Polynomial {
    let mut p = Polynomial::monomial(1, 1, q);
    for j in 1..=j_trunc as usize {
        for kappa in 1..q.get() {
            let factor = &Polynomial::one(q) + &Polynomial::monomial(kappa, j, q);
            p = &p * &factor;
        }
    }
    p
}
