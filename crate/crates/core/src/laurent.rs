//! Truncated Laurent series in `x^{-1}` over `Z_q`.
//!
//! A series `sum_k a_k x^{-k}` is stored densely from its first nonzero
//! coefficient up to `precision_end`: every coefficient with index below
//! `precision_end` is known exactly, nothing at or beyond it is. Operations
//! propagate that bound instead of padding with zeros, so a valuation test is
//! either decided on known digits or refused with
//! [`Error::InsufficientPrecision`].

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf_poly::{Polynomial, Prime};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LaurentSeries {
    q: Prime,
    lead_index: i64,
    digits: Vec<u32>,
    precision_end: i64,
}

/// Outcome of a valuation query on a truncated series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    /// `nu(g) = -w` for the first nonzero coefficient index `w`.
    Finite(i64),
    /// Every coefficient with index below `certified_to` vanishes, so
    /// `nu(g) <= -certified_to` (the exact series may be zero, `nu = -inf`).
    Zero { certified_to: i64 },
}

impl LaurentSeries {
    /// `sum_i digits[i] x^{-(lead_index + i)}`, known up to `precision_end`
    /// (defaults to the end of `digits`; later positions are zero).
    pub fn from_digits(
        q: Prime,
        lead_index: i64,
        digits: &[u32],
        precision_end: Option<i64>,
    ) -> Result<Self> {
        if let Some(&bad) = digits.iter().find(|&&d| d >= q.get()) {
            return Err(Error::OutOfRange { value: bad as u64, modulus: q.get() });
        }
        let natural_end = lead_index + digits.len() as i64;
        let precision_end = precision_end.unwrap_or(natural_end);
        if precision_end < natural_end {
            return Err(Error::Config(format!(
                "precision_end {precision_end} cuts into the {} given digits starting at {lead_index}",
                digits.len()
            )));
        }
        let mut dense = digits.to_vec();
        dense.resize((precision_end - lead_index) as usize, 0);
        Ok(Self::normalized(q, lead_index, dense, precision_end))
    }

    fn normalized(q: Prime, mut lead_index: i64, mut digits: Vec<u32>, precision_end: i64) -> Self {
        let skip = digits.iter().take_while(|&&d| d == 0).count();
        if skip > 0 {
            digits.drain(..skip);
            lead_index += skip as i64;
        }
        if digits.is_empty() {
            lead_index = precision_end;
        }
        LaurentSeries { q, lead_index, digits, precision_end }
    }

    /// The zero series, certified below `precision_end`.
    pub fn zero(q: Prime, precision_end: i64) -> Self {
        LaurentSeries { q, lead_index: precision_end, digits: Vec::new(), precision_end }
    }

    /// A polynomial viewed as a series, known below `precision_end`.
    pub fn from_polynomial(p: &Polynomial, precision_end: i64) -> Self {
        let q = p.modulus();
        let Some(deg) = p.degree() else {
            return Self::zero(q, precision_end);
        };
        let lead = -(deg as i64);
        let len = (precision_end - lead).max(0) as usize;
        let digits = (0..len)
            .map(|i| {
                let power = deg as i64 - i as i64;
                if power >= 0 {
                    p.coeff(power as usize)
                } else {
                    0
                }
            })
            .collect();
        Self::normalized(q, lead, digits, precision_end)
    }

    pub fn modulus(&self) -> Prime {
        self.q
    }

    /// Index of the first stored (nonzero) coefficient; equals
    /// `precision_end` when no nonzero digit is known.
    pub fn lead_index(&self) -> i64 {
        self.lead_index
    }

    pub fn precision_end(&self) -> i64 {
        self.precision_end
    }

    /// Stored digits `a_w, a_{w+1}, ...` up to the precision bound.
    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Coefficient of `x^{-index}`.
    pub fn coeff(&self, index: i64) -> Result<u32> {
        if index >= self.precision_end {
            return Err(Error::InsufficientPrecision {
                needed: index + 1,
                available: self.precision_end,
            });
        }
        Ok(if index < self.lead_index {
            0
        } else {
            self.digits[(index - self.lead_index) as usize]
        })
    }

    #[inline]
    fn coeff_unchecked(&self, index: i64) -> u32 {
        if index < self.lead_index {
            0
        } else {
            self.digits[(index - self.lead_index) as usize]
        }
    }

    pub fn is_known_zero(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn valuation(&self) -> Valuation {
        if self.digits.is_empty() {
            Valuation::Zero { certified_to: self.precision_end }
        } else {
            Valuation::Finite(-self.lead_index)
        }
    }

    /// Decides `nu(self) <= bound` from known digits only.
    pub fn valuation_le(&self, bound: i64) -> Result<bool> {
        match self.valuation() {
            Valuation::Finite(v) => Ok(v <= bound),
            Valuation::Zero { certified_to } if -certified_to <= bound => Ok(true),
            Valuation::Zero { certified_to } => Err(Error::InsufficientPrecision {
                needed: -bound,
                available: certified_to,
            }),
        }
    }

    /// Index `w` of the first nonzero coefficient among indices `< limit`,
    /// or `None` if those are all zero. Errors if `limit` exceeds the
    /// precision and no nonzero digit was found before it.
    pub fn first_nonzero_below(&self, limit: i64) -> Result<Option<i64>> {
        if !self.digits.is_empty() && self.lead_index < limit {
            return Ok(Some(self.lead_index));
        }
        if self.digits.is_empty() && self.precision_end < limit {
            return Err(Error::InsufficientPrecision { needed: limit, available: self.precision_end });
        }
        Ok(None)
    }

    /// `{g}`: drops every coefficient with index `<= 0`.
    pub fn fractional_part(&self) -> Self {
        if self.lead_index >= 1 {
            return self.clone();
        }
        let skip = ((1 - self.lead_index) as usize).min(self.digits.len());
        Self::normalized(self.q, 1, self.digits[skip..].to_vec(), self.precision_end)
    }

    fn check(&self, q: Prime) -> Result<()> {
        if self.q != q {
            return Err(Error::ModulusMismatch(self.q.get(), q.get()));
        }
        Ok(())
    }

    /// `k(x) * g(x)`. The output is known below `precision_end - deg k`.
    pub fn mul_poly(&self, k: &Polynomial) -> Result<Self> {
        self.check(k.modulus())?;
        let Some(deg) = k.degree() else {
            return Ok(Self::zero(self.q, self.precision_end));
        };
        let deg = deg as i64;
        let end = self.precision_end - deg;
        let start = self.lead_index - deg;
        if start >= end {
            return Ok(Self::zero(self.q, end));
        }
        let q = self.q.get() as u64;
        let kc = k.coeffs();
        let digits = (start..end)
            .map(|i| {
                let mut acc = 0u64;
                for (t, &c) in kc.iter().enumerate() {
                    if c != 0 {
                        acc += c as u64 * self.coeff_unchecked(i + t as i64) as u64;
                    }
                }
                (acc % q) as u32
            })
            .collect();
        Ok(Self::normalized(self.q, start, digits, end))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check(other.q)?;
        let end = self.precision_end.min(other.precision_end);
        let start = self.lead_index.min(other.lead_index).min(end);
        let q = self.q;
        let digits = (start..end)
            .map(|i| q.add(self.coeff_unchecked(i), other.coeff_unchecked(i)))
            .collect();
        Ok(Self::normalized(q, start, digits, end))
    }

    pub fn scale(&self, c: u32) -> Self {
        let q = self.q;
        let digits = self.digits.iter().map(|&d| q.mul(d, c % q.get())).collect();
        Self::normalized(q, self.lead_index, digits, self.precision_end)
    }

    /// Digits `a_1, ..., a_m` of the fractional part.
    pub fn fractional_digits(&self, m: usize) -> Result<Vec<u32>> {
        if m > 0 && self.precision_end <= m as i64 {
            return Err(Error::InsufficientPrecision {
                needed: m as i64 + 1,
                available: self.precision_end,
            });
        }
        Ok((1..=m as i64).map(|i| self.coeff_unchecked(i)).collect())
    }

    /// `sum_{k=1}^m a_k q^{-k}` for the fractional part, truncated at `m` digits.
    pub fn to_unit_interval(&self, m: usize) -> Result<f64> {
        Ok(digits_to_real(&self.fractional_digits(m)?, self.q))
    }

    /// Drops knowledge at and beyond `precision_end` (no-op if already shorter).
    pub fn truncated(&self, precision_end: i64) -> Self {
        if precision_end >= self.precision_end {
            return self.clone();
        }
        let keep = (precision_end - self.lead_index).max(0) as usize;
        let digits = self.digits[..keep.min(self.digits.len())].to_vec();
        Self::normalized(self.q, self.lead_index.min(precision_end), digits, precision_end)
    }
}

/// `sum_j ks[j] * fs[j]`, known below the smallest per-term precision.
pub fn series_linear_combination(ks: &[Polynomial], fs: &[LaurentSeries]) -> Result<LaurentSeries> {
    if ks.len() != fs.len() {
        return Err(Error::LengthMismatch(ks.len(), fs.len()));
    }
    let mut terms = ks.iter().zip(fs).map(|(k, f)| f.mul_poly(k));
    let mut acc = terms.next().ok_or(Error::EmptyCombination)??;
    for t in terms {
        acc = acc.checked_add(&t?)?;
    }
    Ok(acc)
}

/// `sum_k digits[k-1] q^{-k}`, evaluated from the last digit so the result
/// is the correctly rounded truncation.
pub fn digits_to_real(digits: &[u32], q: Prime) -> f64 {
    let q = q.get() as f64;
    digits.iter().rev().fold(0.0, |acc, &d| (acc + d as f64) / q)
}

/// A Haar-random element of `Z_q((x^{-1}))` with `w >= 1`: digits
/// `a_1 .. a_{K-1}` independent and uniform, known below `K`.
pub fn sample_haar<R: Rng + ?Sized>(q: Prime, precision: i64, rng: &mut R) -> LaurentSeries {
    assert!(precision >= 1, "precision must be at least 1");
    let digits: Vec<u32> = (1..precision).map(|_| rng.gen_range(0..q.get())).collect();
    LaurentSeries::normalized(q, 1, digits, precision)
}

impl fmt::Debug for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} [q={}, known below {}]", self.q, self.precision_end)
    }
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &d) in self.digits.iter().enumerate() {
            if d == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let e = -(self.lead_index + i as i64);
            match (d, e) {
                (d, 0) => write!(f, "{d}")?,
                (1, e) => write!(f, "x^{e}")?,
                (d, e) => write!(f, "{d}x^{e}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(x^{})", -self.precision_end)
    }
}

/// JSON form `{"q":2, "digits":[1,0,1], "lead_index":1}` for
/// `sum digits[i] x^{-(lead_index+i)}`; an optional `precision_end` extends
/// the series with known zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesLiteral {
    pub q: u32,
    pub digits: Vec<u32>,
    #[serde(default = "default_lead")]
    pub lead_index: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_end: Option<i64>,
}

fn default_lead() -> i64 {
    1
}

impl SeriesLiteral {
    pub fn to_series(&self) -> Result<LaurentSeries> {
        LaurentSeries::from_digits(Prime::new(self.q)?, self.lead_index, &self.digits, self.precision_end)
    }

    pub fn from_series(g: &LaurentSeries) -> Self {
        SeriesLiteral {
            q: g.q.get(),
            digits: g.digits.clone(),
            lead_index: g.lead_index,
            precision_end: Some(g.precision_end),
        }
    }
}
