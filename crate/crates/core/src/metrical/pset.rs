//! The admissible tuple set `P`, the threshold `F` and the divergent sum
//! `sum_{k in P} q^{-F(deg k)}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Rational;
use crate::gf_poly::{coprime_count_moebius, enumerate_monic, moebius_q, truncation_modulus, Polynomial, Prime};

/// `F(r) = sum r + (s ln(sum r) + ln ln(sum r)) / ln q` (natural logs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FThreshold {
    pub total_degree: u32,
    pub value: f64,
    /// `m = floor(F)`, the resolution of the certified discrepancy.
    pub floor: u32,
    /// `ceil(F)`, the valuation depth `nu <= -F` asks for.
    pub ceil: u32,
}

impl FThreshold {
    /// `q^{-F}`.
    pub fn weight(&self, q: Prime) -> f64 {
        (q.get() as f64).powf(-self.value)
    }

    /// Per-tuple probability of the deep event, `q^{-(ceil F - 1)}`.
    pub fn deep_probability(&self, q: Prime) -> f64 {
        (q.get() as f64).powi(1 - self.ceil as i32)
    }
}

pub fn f_threshold(degrees: &[u32], q: Prime) -> Result<FThreshold> {
    let d: u32 = degrees.iter().sum();
    if d <= 1 {
        return Err(Error::TotalDegreeTooSmall(d));
    }
    let s = degrees.len() as f64;
    let df = d as f64;
    let value = df + (s * df.ln() + df.ln().ln()) / (q.get() as f64).ln();
    Ok(FThreshold { total_degree: d, value, floor: value.floor() as u32, ceil: value.ceil() as u32 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PSetFilter {
    pub q: Prime,
    pub s: usize,
    /// Truncation parameter `J` of `p = x prod_{j<=J} prod_kappa (1 + kappa x^j)`.
    pub j_trunc: u32,
    /// Largest total degree scanned.
    pub max_total_degree: u32,
}

impl PSetFilter {
    pub fn new(q: Prime, s: usize, j_trunc: u32, max_total_degree: u32) -> Result<Self> {
        if s == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(PSetFilter { q, s, j_trunc, max_total_degree })
    }

    pub fn modulus_p(&self) -> Polynomial {
        truncation_modulus(self.q, self.j_trunc)
    }

    /// Whether a tuple lies in `P` (ignoring the degree cap). The gcd
    /// condition is vacuous for `s = 1`.
    pub fn accepts(&self, ks: &[Polynomial]) -> bool {
        let p = self.modulus_p();
        ks.len() == self.s
            && ks.iter().all(|k| k.is_monic() && k.is_coprime_to(&p).unwrap_or(false))
            && !ks.iter().all(Polynomial::is_one)
            && (self.s == 1 || tuple_gcd(ks).is_one())
    }
}

fn tuple_gcd(ks: &[Polynomial]) -> Polynomial {
    ks.iter().skip(1).fold(ks[0].clone(), |g, k| g.gcd(k).expect("same modulus"))
}

/// All tuples of `P` with total degree at most `R`, in lexicographic order
/// of their integer encodings.
pub fn enumerate_p(filter: &PSetFilter) -> Vec<Vec<Polynomial>> {
    let p = filter.modulus_p();
    let r = filter.max_total_degree as usize;
    let candidates: Vec<(Polynomial, usize)> = (0..=r)
        .flat_map(|a| enumerate_monic(a, filter.q, Some(&p)).map(move |k| (k, a)))
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(filter.s);
    extend(&candidates, filter.s, r, &mut current, &mut out);
    out.retain(|ks: &Vec<Polynomial>| {
        !ks.iter().all(Polynomial::is_one) && (filter.s == 1 || tuple_gcd(ks).is_one())
    });
    out
}

fn extend(
    candidates: &[(Polynomial, usize)],
    s: usize,
    budget: usize,
    current: &mut Vec<Polynomial>,
    out: &mut Vec<Vec<Polynomial>>,
) {
    if current.len() == s {
        out.push(current.clone());
        return;
    }
    for (k, a) in candidates {
        if *a <= budget {
            current.push(k.clone());
            extend(candidates, s, budget - a, current, out);
            current.pop();
        }
    }
}

/// Number of tuples in `P` with the given degree vector, by Moebius
/// inversion over the common divisor:
/// `sum_{l monic, (l, p) = 1} mu(l) prod_i C(a_i - deg l)` with `C(b)` the
/// number of monic degree-`b` polynomials coprime to `p`.
pub fn tuple_count_moebius(degrees: &[usize], p: &Polynomial) -> Result<u64> {
    let q = p.modulus();
    let all_ones = degrees.iter().all(|&a| a == 0);
    if degrees.len() == 1 {
        return Ok(coprime_count_moebius(degrees[0], p)? - all_ones as u64);
    }
    let min = *degrees.iter().min().ok_or(Error::EmptyCombination)?;
    let mut total: i128 = 0;
    for d in 0..=min {
        let mut mu_sum: i128 = 0;
        for l in enumerate_monic(d, q, Some(p)) {
            mu_sum += moebius_q(&l)? as i128;
        }
        if mu_sum == 0 {
            continue;
        }
        let mut prod: i128 = 1;
        for &a in degrees {
            prod *= coprime_count_moebius(a - d, p)? as i128;
        }
        total += mu_sum * prod;
    }
    Ok((total - all_ones as i128) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeRow {
    pub total_degree: u32,
    /// Tuples of `P` with this total degree, by enumeration.
    pub enumerated: u64,
    /// The same count summed from [`tuple_count_moebius`].
    pub predicted: u64,
    /// `enumerated * q^{-F}`.
    pub contribution: f64,
    /// `enumerated / (q^d d^{s-1})`: the term is this over `d ln d`.
    #[serde(with = "crate::rational_str")]
    pub coefficient: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub filter: PSetFilter,
    /// Distinct irreducible factors of `p`.
    pub r_factors: usize,
    pub rows: Vec<DegreeRow>,
    /// `(R', T_{R'})` for `R' = 2..=R`.
    pub partial_sums: Vec<(u32, f64)>,
    /// Partial sums of the analytic lower-bound chain, same cutoffs.
    pub analytic: Vec<(u32, f64)>,
    /// Chain prefactor: the analytic term is this over `d ln d`.
    #[serde(with = "crate::rational_str")]
    pub prefactor: Rational,
    /// `T_{R'} - chain_{R'}`, summed from exact coefficient differences so
    /// that equal sums give exactly zero.
    pub margins: Vec<(u32, f64)>,
    pub log_base: &'static str,
}

impl DivergenceReport {
    pub fn strictly_increasing(&self) -> bool {
        self.partial_sums.windows(2).all(|w| w[1].1 > w[0].1)
    }

    pub fn dominates_analytic(&self) -> bool {
        self.margins.iter().all(|&(_, m)| m >= 0.0)
    }

    pub fn counts_match(&self) -> bool {
        self.rows.iter().all(|r| r.enumerated == r.predicted)
    }
}

/// Degree vectors of length `s` summing to `d`.
fn compositions(d: usize, s: usize) -> Vec<Vec<usize>> {
    if s == 1 {
        return vec![vec![d]];
    }
    (0..=d)
        .flat_map(|a| {
            compositions(d - a, s - 1).into_iter().map(move |mut rest| {
                rest.insert(0, a);
                rest
            })
        })
        .collect()
}

/// `T_R` from enumeration, the per-degree counts with their Moebius
/// prediction, and the analytic chain
/// `2^{-r} sum_{a<=R} 1/(a ln a)` (`s = 1`) or
/// `2^{-rs} ((q-1)/4) (1/(s-1)!) sum_{d<=R} 1/(d ln d)` (`s >= 2`).
pub fn divergence_partial_sum(filter: &PSetFilter) -> Result<DivergenceReport> {
    let r_max = filter.max_total_degree;
    if r_max < 2 {
        return Err(Error::TotalDegreeTooSmall(r_max));
    }
    let q = filter.q;
    let p = filter.modulus_p();
    let r_factors = p.factor()?.len();
    let s = filter.s;
    let mut counts = vec![0u64; r_max as usize + 1];
    for ks in enumerate_p(filter) {
        let d: usize = ks.iter().map(|k| k.degree().unwrap_or(0)).sum();
        counts[d] += 1;
    }
    let mut rows = Vec::new();
    let mut partial_sums = Vec::new();
    let mut analytic = Vec::new();
    let (mut t, mut chain) = (0.0, 0.0);
    let fact: i128 = (1..s as i128).product();
    let prefactor = if s == 1 {
        Rational::new(1, 1 << r_factors)
    } else {
        Rational::new(q.get() as i128 - 1, 4 * fact) / Rational::from_integer(1 << (r_factors * s))
    };
    let mut margins = Vec::new();
    let mut margin = 0.0;
    for d in 2..=r_max {
        let degrees: Vec<u32> = std::iter::once(d).chain(std::iter::repeat_n(0, s - 1)).collect();
        let weight = f_threshold(&degrees, q)?.weight(q);
        let mut predicted = 0;
        for c in compositions(d as usize, s) {
            predicted += tuple_count_moebius(&c, &p)?;
        }
        let enumerated = counts[d as usize];
        let contribution = enumerated as f64 * weight;
        let coefficient = Rational::new(
            enumerated as i128,
            (q.get() as i128).pow(d) * (d as i128).pow(s as u32 - 1),
        );
        let dlnd = d as f64 * (d as f64).ln();
        t += contribution;
        chain += 1.0 / dlnd;
        margin += to_f64(coefficient - prefactor) / dlnd;
        rows.push(DegreeRow { total_degree: d, enumerated, predicted, contribution, coefficient });
        partial_sums.push((d, t));
        analytic.push((d, to_f64(prefactor) * chain));
        margins.push((d, margin));
    }
    Ok(DivergenceReport { filter: *filter, r_factors, rows, partial_sums, analytic, prefactor, margins, log_base: "e" })
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
