//! `q`-adic Walsh functions.
//!
//! Values are kept as exact exponents `e` of `omega = exp(2 pi i / q)`;
//! complex numbers appear only when a sum is finally realised.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf_poly::{Polynomial, Prime};
use crate::laurent::{sample_haar, LaurentSeries};

/// `omega_q^e` with `e` in `Z_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RootOfUnity {
    q: Prime,
    e: u32,
}

impl RootOfUnity {
    pub fn new(q: Prime, e: i64) -> Self {
        RootOfUnity { q, e: e.rem_euclid(q.get() as i64) as u32 }
    }

    pub fn one(q: Prime) -> Self {
        RootOfUnity { q, e: 0 }
    }

    pub fn exponent(self) -> u32 {
        self.e
    }

    pub fn modulus(self) -> Prime {
        self.q
    }

    pub fn mul(self, other: RootOfUnity) -> RootOfUnity {
        RootOfUnity { q: self.q, e: self.q.add(self.e, other.e) }
    }

    pub fn conj(self) -> RootOfUnity {
        RootOfUnity { q: self.q, e: self.q.neg(self.e) }
    }

    pub fn to_complex(self) -> Complex64 {
        omega_pow(self.q, self.e as i64)
    }
}

/// `exp(2 pi i e / q)` for any integer `e`.
pub fn omega_pow(q: Prime, e: i64) -> Complex64 {
    let e = e.rem_euclid(q.get() as i64);
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / q.get() as f64)
}

/// Exact sum of roots of unity, stored as a histogram of exponents.
///
/// Since `1 + omega + ... + omega^{q-1} = 0` is the only relation among the
/// `q`-th roots for prime `q`, the sum vanishes iff all counts agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootSum {
    q: Prime,
    counts: Vec<i64>,
}

impl RootSum {
    pub fn new(q: Prime) -> Self {
        RootSum { q, counts: vec![0; q.get() as usize] }
    }

    pub fn push(&mut self, w: RootOfUnity) {
        self.counts[w.e as usize] += 1;
    }

    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == self.counts[0])
    }

    /// Value as a multiple of `1` when the sum is real and rational, i.e.
    /// when all counts beyond the first agree.
    pub fn as_integer(&self) -> Option<i64> {
        let rest = self.counts.get(1).copied().unwrap_or(0);
        self.counts[1..].iter().all(|&c| c == rest).then(|| self.counts[0] - rest)
    }

    pub fn to_complex(&self) -> Complex64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(e, &c)| omega_pow(self.q, e as i64) * c as f64)
            .sum()
    }
}

/// Leading-digit decomposition `k = kappa q^{a-1} + k'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decomposition {
    pub kappa: u32,
    pub a: u32,
    pub rest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WalshIndex {
    q: Prime,
    k: u64,
}

impl WalshIndex {
    pub fn new(q: Prime, k: u64) -> Self {
        WalshIndex { q, k }
    }

    pub fn value(self) -> u64 {
        self.k
    }

    pub fn modulus(self) -> Prime {
        self.q
    }

    /// `None` for the zero index.
    pub fn decomposition(self) -> Option<Decomposition> {
        let digits = self.q.digits(self.k);
        let a = digits.len() as u32;
        let kappa = *digits.last()?;
        Some(Decomposition { kappa, a, rest: self.k - kappa as u64 * self.q.pow(a - 1) })
    }

    pub fn digits(self) -> Vec<u32> {
        self.q.digits(self.k)
    }
}

/// Index of the form `k* = q^{a*-1} + q^{a*-2} + l*` with `a* >= 3`, and its
/// tail `k~ = q^{a*-2} + l*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KStar {
    q: Prime,
    a_star: u32,
    l_star: u64,
}

impl KStar {
    pub fn new(q: Prime, a_star: u32, l_star: u64) -> Result<Self> {
        if a_star < 3 {
            return Err(Error::DegreeTooSmall { min: 3, got: a_star as usize });
        }
        let bound = q.pow(a_star - 2);
        if l_star >= bound {
            return Err(Error::OutOfRange { value: l_star, modulus: bound as u32 });
        }
        Ok(KStar { q, a_star, l_star })
    }

    /// Recover from `k~`, whose leading digit must be 1.
    pub fn from_k_tilde(q: Prime, k_tilde: u64) -> Result<Self> {
        let d = WalshIndex::new(q, k_tilde)
            .decomposition()
            .filter(|d| d.kappa == 1)
            .ok_or_else(|| Error::Config(format!("k~ = {k_tilde} must have leading digit 1")))?;
        KStar::new(q, d.a + 1, d.rest)
    }

    pub fn modulus(&self) -> Prime {
        self.q
    }

    pub fn a_star(&self) -> u32 {
        self.a_star
    }

    pub fn l_star(&self) -> u64 {
        self.l_star
    }

    pub fn k_star(&self) -> u64 {
        self.q.pow(self.a_star - 1) + self.k_tilde()
    }

    pub fn k_tilde(&self) -> u64 {
        self.q.pow(self.a_star - 2) + self.l_star
    }
}

/// `wal_j` at the point with digits `xi_1, xi_2, ...`. Digits of `j` beyond
/// the supplied ones must vanish.
pub fn wal_digits(q: Prime, j: u64, xi: &[u32]) -> Result<RootOfUnity> {
    let jd = q.digits(j);
    if jd.len() > xi.len() && jd[xi.len()..].iter().any(|&d| d != 0) {
        return Err(Error::InsufficientPrecision {
            needed: jd.len() as i64 + 1,
            available: xi.len() as i64 + 1,
        });
    }
    Ok(RootOfUnity::new(q, dot(q, &jd, xi) as i64))
}

fn dot(q: Prime, a: &[u32], b: &[u32]) -> u32 {
    let s: u64 = a.iter().zip(b).map(|(&x, &y)| x as u64 * y as u64).sum();
    (s % q.get() as u64) as u32
}

/// `wal_j(r / q^m)`; digits past `m` are zero so any `j` is allowed.
pub fn wal_grid(q: Prime, j: u64, r: u64, m: u32) -> RootOfUnity {
    let xi = q.digits_padded(r, m as usize);
    let jd = q.digits(j);
    let e: u64 = jd
        .iter()
        .zip(xi.iter().rev())
        .map(|(&a, &b)| a as u64 * b as u64)
        .sum();
    RootOfUnity::new(q, (e % q.get() as u64) as i64)
}

/// `wal_j(f)`: the coefficient of `x^{-1}` in `j(x) f(x)`, i.e. `wal_j` of
/// the digit string of `{f}`.
pub fn wal_series(j: &Polynomial, f: &LaurentSeries) -> Result<RootOfUnity> {
    if j.modulus() != f.modulus() {
        return Err(Error::ModulusMismatch(j.modulus().get(), f.modulus().get()));
    }
    let e = j.mul_series_coeff(f)?;
    Ok(RootOfUnity::new(f.modulus(), e as i64))
}

impl Polynomial {
    /// Coefficient of `x^{-1}` in `self * f` without forming the product.
    fn mul_series_coeff(&self, f: &LaurentSeries) -> Result<u32> {
        let q = self.modulus();
        let mut acc = 0u64;
        for (i, &c) in self.coeffs().iter().enumerate() {
            if c != 0 {
                acc += c as u64 * f.coeff(i as i64 + 1)? as u64;
            }
        }
        Ok((acc % q.get() as u64) as u32)
    }
}

/// `sum_{r < q^m} wal_k(r/q^m) conj(wal_l(r/q^m))`, exactly.
pub fn orthonormality_sum(q: Prime, k: u64, l: u64, m: u32) -> RootSum {
    let mut acc = RootSum::new(q);
    for r in 0..q.pow(m) {
        acc.push(wal_grid(q, k, r, m).mul(wal_grid(q, l, r, m).conj()));
    }
    acc
}

/// Grid sum of `wal_k` over `Q(q^m)`; divide by `q^m` for the integral.
pub fn mean_zero_check(q: Prime, k: u64, m: u32) -> Result<RootSum> {
    if k == 0 {
        return Err(Error::ZeroIndex);
    }
    let limit = q.pow(m);
    if k >= limit {
        return Err(Error::IndexTooLarge { k, limit });
    }
    let mut acc = RootSum::new(q);
    for r in 0..limit {
        acc.push(wal_grid(q, k, r, m));
    }
    Ok(acc)
}

/// Outcome of the full Walsh property suite for one prime.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WalshSuiteReport {
    pub q: u32,
    pub index_digits: u32,
    pub pairs: usize,
    /// `wal_j(k f1 + l f2) = wal_{jk}(f1) wal_{jl}(f2)`.
    pub product_rule_failures: u64,
    pub product_rule_max_dev: f64,
    /// `wal_j(f) wal_k(f) = wal_{j+k}(f)` with carry-free `j + k`.
    pub additive_rule_failures: u64,
    pub additive_rule_max_dev: f64,
    /// Off-diagonal orthonormality sums that failed to vanish (m <= `ortho_m`).
    pub orthonormality_failures: u64,
    /// `(m, diagonal value)` for each `m`; expected `q^m`.
    pub diagonal_constants: Vec<(u32, i64)>,
    pub mean_zero_failures: u64,
}

impl WalshSuiteReport {
    pub fn passed(&self) -> bool {
        self.product_rule_failures == 0
            && self.additive_rule_failures == 0
            && self.orthonormality_failures == 0
            && self.mean_zero_failures == 0
            && self.product_rule_max_dev < 1e-12
            && self.additive_rule_max_dev < 1e-12
            && self
                .diagonal_constants
                .iter()
                .all(|&(m, v)| v == Prime::new(self.q).map(|q| q.pow(m) as i64).unwrap_or(-1))
    }
}

/// Checks the product and additive rules for all indices `< q^index_digits`
/// on `pairs` seeded random series pairs, orthonormality for `m <= ortho_m`
/// and the mean-zero property for `m <= mean_m`.
pub fn walsh_suite(
    q: Prime,
    index_digits: u32,
    pairs: usize,
    ortho_m: u32,
    mean_m: u32,
    seed: u64,
) -> Result<WalshSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = q.pow(index_digits);
    let polys: Vec<Polynomial> = (0..n).map(|k| Polynomial::from_int(k, q)).collect();
    let precision = 2 * index_digits as i64 + 2;

    // products j*k as integers, shared by every pair
    let prod: Vec<Vec<u64>> = polys
        .iter()
        .map(|j| polys.iter().map(|k| (j * k).to_int()).collect())
        .collect();
    let prod_limit = q.pow(2 * index_digits - 1);

    let mut report = WalshSuiteReport {
        q: q.get(),
        index_digits,
        pairs,
        product_rule_failures: 0,
        product_rule_max_dev: 0.0,
        additive_rule_failures: 0,
        additive_rule_max_dev: 0.0,
        orthonormality_failures: 0,
        diagonal_constants: Vec::new(),
        mean_zero_failures: 0,
    };

    for _ in 0..pairs {
        let f1 = sample_haar(q, precision, &mut rng);
        let f2 = sample_haar(q, precision, &mut rng);
        // right-hand side: wal_p(f) for every polynomial p of degree < 2d - 1
        let w1: Vec<RootOfUnity> = (0..prod_limit)
            .map(|p| wal_series(&Polynomial::from_int(p, q), &f1))
            .collect::<Result<_>>()?;
        let w2: Vec<RootOfUnity> = (0..prod_limit)
            .map(|p| wal_series(&Polynomial::from_int(p, q), &f2))
            .collect::<Result<_>>()?;
        let kf1: Vec<LaurentSeries> = polys.iter().map(|k| f1.mul_poly(k)).collect::<Result<_>>()?;
        let lf2: Vec<LaurentSeries> = polys.iter().map(|l| f2.mul_poly(l)).collect::<Result<_>>()?;

        for k in 0..n as usize {
            for l in 0..n as usize {
                // left-hand side from the digits of {k f1 + l f2}
                let g = kf1[k].checked_add(&lf2[l])?.fractional_digits(index_digits as usize)?;
                for j in 0..n as usize {
                    let lhs = wal_digits(q, j as u64, &g)?;
                    let rhs = w1[prod[j][k] as usize].mul(w2[prod[j][l] as usize]);
                    if lhs != rhs {
                        report.product_rule_failures += 1;
                    }
                    let dev = (lhs.to_complex() - rhs.to_complex()).norm();
                    report.product_rule_max_dev = report.product_rule_max_dev.max(dev);
                }
            }
        }

        for f in [&f1, &f2] {
            let w: Vec<RootOfUnity> = polys.iter().map(|j| wal_series(j, f)).collect::<Result<_>>()?;
            for j in 0..n as usize {
                for k in 0..n as usize {
                    let sum = (&polys[j] + &polys[k]).to_int() as usize;
                    let (lhs, rhs) = (w[j].mul(w[k]), w[sum]);
                    if lhs != rhs {
                        report.additive_rule_failures += 1;
                    }
                    let dev = (lhs.to_complex() - rhs.to_complex()).norm();
                    report.additive_rule_max_dev = report.additive_rule_max_dev.max(dev);
                }
            }
        }
    }

    for m in 1..=ortho_m {
        let qm = q.pow(m);
        let mut diagonal = None;
        for k in 0..qm {
            for l in 0..qm {
                let sum = orthonormality_sum(q, k, l, m);
                let diff = &Polynomial::from_int(k, q) - &Polynomial::from_int(l, q);
                let divisible = diff.coeffs().iter().take(m as usize).all(|&c| c == 0);
                if !divisible && !sum.is_zero() {
                    report.orthonormality_failures += 1;
                }
                if k == l && k == 0 {
                    diagonal = sum.as_integer();
                }
                if divisible && sum.as_integer() != diagonal {
                    report.orthonormality_failures += 1;
                }
            }
        }
        report.diagonal_constants.push((m, diagonal.unwrap_or(i64::MIN)));
    }

    for m in 1..=mean_m {
        for k in 1..q.pow(m) {
            if !mean_zero_check(q, k, m)?.is_zero() {
                report.mean_zero_failures += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: u32) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn definition_examples() {
        assert_eq!(wal_digits(q(5), 0, &[3, 1]).unwrap(), RootOfUnity::one(q(5)));
        // q=2: wal_1(1/2) = -1
        let w = wal_grid(q(2), 1, 1, 1);
        assert_eq!(w.exponent(), 1);
        assert!((w.to_complex() - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        // q=3: wal_2(1/3) = omega^2
        let w = wal_grid(q(3), 2, 1, 1);
        assert_eq!(w.exponent(), 2);
        assert!((w.to_complex() - Complex64::from_polar(1.0, 4.0 * PI / 3.0)).norm() < 1e-15);
        assert!(wal_digits(q(2), 4, &[1, 1]).is_err());
    }

    #[test]
    fn series_argument() {
        let f = LaurentSeries::from_digits(q(2), 1, &[1, 0, 1], Some(8)).unwrap();
        assert_eq!(wal_series(&Polynomial::zero(q(2)), &f).unwrap().exponent(), 0);
        // j = 1 + x^2 reads digits 1 and 3
        let j = Polynomial::from_int(5, q(2));
        assert_eq!(wal_series(&j, &f).unwrap().exponent(), 0);
        assert_eq!(wal_series(&Polynomial::one(q(2)), &f).unwrap().exponent(), 1);
        let big = Polynomial::monomial(1, 9, q(2));
        assert!(matches!(wal_series(&big, &f), Err(Error::InsufficientPrecision { .. })));
    }

    #[test]
    fn series_and_grid_agree() {
        let f = LaurentSeries::from_digits(q(3), 1, &[2, 0, 1, 1], Some(5)).unwrap();
        let r = 2 * 27 + 3 + 1;
        for j in 0..81 {
            assert_eq!(
                wal_series(&Polynomial::from_int(j, q(3)), &f).unwrap(),
                wal_grid(q(3), j, r, 4)
            );
        }
    }

    #[test]
    fn self_product_in_char_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = sample_haar(q(2), 10, &mut rng);
        let one = Polynomial::one(q(2));
        let w = wal_series(&one, &f).unwrap();
        assert_eq!(w.mul(w), wal_series(&(&one + &one), &f).unwrap());
        assert_eq!(w.mul(w), RootOfUnity::one(q(2)));
    }

    #[test]
    fn orthonormality_examples() {
        assert_eq!(orthonormality_sum(q(2), 1, 2, 2).as_integer(), Some(0));
        assert_eq!(orthonormality_sum(q(3), 0, 0, 1).as_integer(), Some(3));
        assert_eq!(orthonormality_sum(q(3), 5, 5, 2).as_integer(), Some(9));
    }

    #[test]
    fn mean_zero_examples() {
        assert!(mean_zero_check(q(2), 1, 1).unwrap().is_zero());
        assert!(mean_zero_check(q(3), 2, 2).unwrap().is_zero());
        assert!(mean_zero_check(q(2), 3, 2).unwrap().is_zero());
        assert_eq!(mean_zero_check(q(2), 0, 2), Err(Error::ZeroIndex));
        assert!(matches!(mean_zero_check(q(2), 4, 2), Err(Error::IndexTooLarge { .. })));
    }

    #[test]
    fn decompositions() {
        assert_eq!(WalshIndex::new(q(2), 0).decomposition(), None);
        let d = WalshIndex::new(q(3), 23).decomposition().unwrap();
        assert_eq!((d.kappa, d.a, d.rest), (2, 3, 5));
        let ks = KStar::new(q(2), 4, 3).unwrap();
        assert_eq!((ks.k_star(), ks.k_tilde()), (15, 7));
        assert_eq!(KStar::from_k_tilde(q(2), 7).unwrap(), ks);
        assert!(KStar::from_k_tilde(q(3), 2).is_err());
        assert!(KStar::new(q(2), 2, 0).is_err());
        assert!(KStar::new(q(3), 3, 3).is_err());
    }

    #[test]
    fn root_sum_zero_test() {
        let mut s = RootSum::new(q(3));
        s.push(RootOfUnity::new(q(3), 0));
        s.push(RootOfUnity::new(q(3), 1));
        assert!(!s.is_zero());
        s.push(RootOfUnity::new(q(3), -1));
        assert!(s.is_zero());
        assert!(s.to_complex().norm() < 1e-15);
    }

    #[test]
    fn small_suite_passes() {
        for p in [2, 3] {
            let rep = walsh_suite(q(p), 2, 5, 2, 3, 9).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    proptest! {
        #[test]
        fn unit_modulus(p in prop::sample::select(vec![2u32, 3, 5, 7]), j in 0u64..10_000, r in 0u64..625) {
            let w = wal_grid(q(p), j, r % q(p).pow(4), 4);
            prop_assert!((w.to_complex().norm() - 1.0).abs() < 1e-15);
        }

        #[test]
        fn conj_inverts(p in prop::sample::select(vec![2u32, 3, 5]), e in -50i64..50) {
            let w = RootOfUnity::new(q(p), e);
            prop_assert_eq!(w.mul(w.conj()), RootOfUnity::one(q(p)));
        }
    }
}
