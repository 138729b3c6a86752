//! Haar measure of valuation events and the scans built on them.
//!
//! An [`Event`] is `nu({k_1 f_1 + ... + k_s f_s}) <= -t`, i.e. the first
//! `t - 1` digits of the fractional part vanish. Each digit is a linear form
//! in the digits of the `f_j`, so an intersection of events depends only on a
//! finite prefix of every `f_j` and its measure is an exact rational.

pub mod pset;
pub mod witness;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf_poly::{Polynomial, Prime};
use crate::laurent::{sample_haar, series_linear_combination, LaurentSeries};
use crate::Rational;

pub use pset::{
    divergence_partial_sum, enumerate_p, f_threshold, tuple_count_moebius, DivergenceReport, FThreshold,
    PSetFilter,
};
pub use witness::{certify_witness, witness_precision, witness_search, Witness, WitnessCertificate, WitnessSearch};

/// Default cap on `q^{sL}` prefixes for exact enumeration.
pub const DEFAULT_PREFIX_BUDGET: u128 = 1 << 24;

/// `nu({sum_j k_j f_j}) <= -threshold`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    ks: Vec<Polynomial>,
    threshold: u32,
}

impl Event {
    pub fn new(ks: Vec<Polynomial>, threshold: u32) -> Result<Self> {
        let q = ks.first().ok_or(Error::EmptyCombination)?.modulus();
        if let Some(k) = ks.iter().find(|k| k.modulus() != q) {
            return Err(Error::ModulusMismatch(q.get(), k.modulus().get()));
        }
        if ks.iter().all(Polynomial::is_zero) {
            return Err(Error::Config("k-tuple must not be all zero".into()));
        }
        Ok(Event { ks, threshold })
    }

    pub fn ks(&self) -> &[Polynomial] {
        &self.ks
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn modulus(&self) -> Prime {
        self.ks[0].modulus()
    }

    fn max_degree(&self) -> usize {
        self.ks.iter().filter_map(Polynomial::degree).max().unwrap_or(0)
    }

    /// Digits of each `f_j` the event depends on.
    pub fn prefix_len(&self) -> usize {
        (self.threshold as usize).saturating_sub(1) + self.max_degree()
    }

    /// Decides the event on concrete series (errors if they are too short).
    pub fn holds(&self, fs: &[LaurentSeries]) -> Result<bool> {
        let g = series_linear_combination(&self.ks, fs)?;
        let digits = g.fractional_digits((self.threshold as usize).saturating_sub(1))?;
        Ok(digits.iter().all(|&d| d == 0))
    }
}

/// Which family an event specification instantiates; metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// A single `M_m(k)`.
    Mm,
    /// `nu({k f}) <= -sum r` together with `nu({(k + beta) f}) <= -floor(sum r / 2)`.
    TildePair,
    /// A deep event `nu({k f}) <= -ceil(F)`.
    Deep,
    /// Any other intersection.
    Custom,
}

/// Intersection of events on `s`-tuples of series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSpec {
    pub q: Prime,
    pub s: usize,
    pub kind: EventKind,
    pub events: Vec<Event>,
}

impl EventSpec {
    pub fn new(kind: EventKind, events: Vec<Event>) -> Result<Self> {
        let first = events.first().ok_or(Error::EmptyCombination)?;
        let (q, s) = (first.modulus(), first.ks.len());
        for e in &events {
            if e.modulus() != q {
                return Err(Error::ModulusMismatch(q.get(), e.modulus().get()));
            }
            if e.ks.len() != s {
                return Err(Error::LengthMismatch(s, e.ks.len()));
            }
        }
        Ok(EventSpec { q, s, kind, events })
    }

    /// `M_m(k_1, ..., k_s)`.
    pub fn m_m(ks: Vec<Polynomial>, m: u32) -> Result<Self> {
        Self::new(EventKind::Mm, vec![Event::new(ks, m)?])
    }

    /// The pair `M_1 cap M_2` with thresholds `sum r` and `floor(sum r / 2)`.
    pub fn tilde_pair(ks: Vec<Polynomial>, betas: &[Polynomial]) -> Result<Self> {
        if betas.len() != ks.len() {
            return Err(Error::LengthMismatch(ks.len(), betas.len()));
        }
        let m = total_degree(&ks);
        let shifted: Vec<Polynomial> = ks.iter().zip(betas).map(|(k, b)| k + b).collect();
        Self::new(EventKind::TildePair, vec![Event::new(ks, m)?, Event::new(shifted, m / 2)?])
    }

    pub fn intersect(&self, other: &EventSpec) -> Result<EventSpec> {
        let mut events = self.events.clone();
        events.extend(other.events.iter().cloned());
        Self::new(EventKind::Custom, events)
    }

    pub fn prefix_len(&self) -> usize {
        self.events.iter().map(Event::prefix_len).max().unwrap_or(0)
    }

    pub fn holds(&self, fs: &[LaurentSeries]) -> Result<bool> {
        for e in &self.events {
            if !e.holds(fs)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Each vanishing digit as a sparse linear form over the prefix
    /// variables `f_{j,i}`, numbered `j * L + (i - 1)`.
    fn linear_forms(&self, len: usize) -> Vec<Vec<(usize, u32)>> {
        let mut forms = Vec::new();
        for e in &self.events {
            for t in 1..e.threshold as usize {
                let mut form = Vec::new();
                for (j, k) in e.ks.iter().enumerate() {
                    for (i, &c) in k.coeffs().iter().enumerate() {
                        if c != 0 {
                            form.push((j * len + t + i - 1, c));
                        }
                    }
                }
                forms.push(form);
            }
        }
        forms
    }
}

/// Sum of the degrees of a tuple (zero polynomials count as degree 0).
pub fn total_degree(ks: &[Polynomial]) -> u32 {
    ks.iter().map(|k| k.degree().unwrap_or(0) as u32).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureMode {
    ExactPrefix,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub mode: MeasureMode,
    pub value: f64,
    #[serde(with = "crate::rational_str::option", skip_serializing_if = "Option::is_none")]
    pub exact: Option<Rational>,
    /// Prefixes enumerated or samples drawn.
    pub samples: u64,
    pub stderr: f64,
    /// Digits per coordinate that decide the event (exact mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix_len: Option<usize>,
}

/// Exact measure by enumerating all `q^{sL}` digit prefixes.
pub fn measure_exact(spec: &EventSpec, budget: u128) -> Result<MeasureEstimate> {
    let q = spec.q;
    let len = spec.prefix_len();
    let vars = spec.s * len;
    let total = (q.get() as u128).checked_pow(vars as u32).unwrap_or(u128::MAX);
    if total > budget {
        return Err(Error::BudgetExceeded { required: total, budget });
    }
    let forms = spec.linear_forms(len);
    // column v lists (form, coefficient) pairs touched by variable v
    let mut columns: Vec<Vec<(usize, u32)>> = vec![Vec::new(); vars];
    for (idx, form) in forms.iter().enumerate() {
        for &(v, c) in form {
            columns[v].push((idx, c));
        }
    }
    let mut values = vec![0u32; forms.len()];
    let mut nonzero = 0usize;
    let mut digits = vec![0u32; vars];
    let mut hits: u128 = 0;
    'outer: loop {
        if nonzero == 0 {
            hits += 1;
        }
        let mut pos = 0;
        loop {
            if pos == vars {
                break 'outer;
            }
            for &(idx, c) in &columns[pos] {
                let old = values[idx];
                let new = q.add(old, c);
                values[idx] = new;
                match (old == 0, new == 0) {
                    (true, false) => nonzero += 1,
                    (false, true) => nonzero -= 1,
                    _ => {}
                }
            }
            digits[pos] += 1;
            if digits[pos] < q.get() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
    let exact = Rational::new(hits as i128, total as i128);
    Ok(MeasureEstimate {
        mode: MeasureMode::ExactPrefix,
        value: *exact.numer() as f64 / *exact.denom() as f64,
        exact: Some(exact),
        samples: total as u64,
        stderr: 0.0,
        prefix_len: Some(len),
    })
}

/// Monte Carlo estimate from `samples` Haar draws. Work is split into fixed
/// chunks with their own ChaCha stream, so the result does not depend on
/// thread scheduling.
pub fn measure_monte_carlo(spec: &EventSpec, samples: u64, seed: u64) -> Result<MeasureEstimate> {
    if samples == 0 {
        return Err(Error::Config("Monte Carlo needs at least one sample".into()));
    }
    const CHUNK: u64 = 4096;
    let precision = spec.prefix_len() as i64 + 1;
    let chunks: Vec<u64> = (0..samples.div_ceil(CHUNK)).collect();
    let hits = chunks
        .par_iter()
        .map(|&c| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut hits = 0;
            for _ in 0..count {
                let fs: Vec<LaurentSeries> = (0..spec.s).map(|_| sample_haar(spec.q, precision, &mut rng)).collect();
                if spec.holds(&fs)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    let p = hits as f64 / samples as f64;
    Ok(MeasureEstimate {
        mode: MeasureMode::MonteCarlo,
        value: p,
        exact: None,
        samples,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        prefix_len: None,
    })
}

/// Exact when the prefix space fits `budget`, Monte Carlo otherwise.
pub fn measure_mm(spec: &EventSpec, budget: u128, samples: u64, seed: u64) -> Result<MeasureEstimate> {
    match measure_exact(spec, budget) {
        Err(Error::BudgetExceeded { .. }) => measure_monte_carlo(spec, samples, seed),
        other => other,
    }
}

/// First `(i, j) != (0, 0)` with `i k_u + j l_u = 0` for every `u`, where
/// `i` and `j` range over the Walsh indices that the two indicator
/// functions use (`deg i <= t_1 - 2`, `deg j <= t_2 - 2`). Without such a
/// relation the two events are independent.
pub fn find_relation(e1: &Event, e2: &Event, budget: u128) -> Result<Option<(Polynomial, Polynomial)>> {
    let q = e1.modulus();
    let ni = q.pow(e1.threshold.saturating_sub(1));
    let nj = q.pow(e2.threshold.saturating_sub(1));
    if ni as u128 * nj as u128 > budget {
        return Err(Error::BudgetExceeded { required: ni as u128 * nj as u128, budget });
    }
    for i in 0..ni {
        let ip = Polynomial::from_int(i, q);
        let left: Vec<Polynomial> = e1.ks.iter().map(|k| &ip * k).collect();
        for j in 0..nj {
            if i == 0 && j == 0 {
                continue;
            }
            let jp = Polynomial::from_int(j, q);
            if left.iter().zip(&e2.ks).all(|(a, l)| (a + &(&jp * l)).is_zero()) {
                return Ok(Some((ip, jp)));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairProduct {
    #[serde(with = "crate::rational_str")]
    pub joint: Rational,
    #[serde(with = "crate::rational_str")]
    pub first: Rational,
    #[serde(with = "crate::rational_str")]
    pub second: Rational,
    #[serde(with = "crate::rational_str")]
    pub product: Rational,
    pub equal: bool,
    /// Description of a Walsh relation that breaks the independence
    /// argument, if one exists.
    pub relation: Option<String>,
}

/// Joint measure of two single events next to the product of marginals.
pub fn measure_pair_product(e1: &Event, e2: &Event, budget: u128) -> Result<PairProduct> {
    let a = EventSpec::new(EventKind::Custom, vec![e1.clone()])?;
    let b = EventSpec::new(EventKind::Custom, vec![e2.clone()])?;
    let exact = |spec: &EventSpec| -> Result<Rational> {
        Ok(measure_exact(spec, budget)?.exact.expect("exact mode"))
    };
    let (first, second) = (exact(&a)?, exact(&b)?);
    let joint = exact(&a.intersect(&b)?)?;
    let relation = find_relation(e1, e2, budget)?.map(|(i, j)| format!("i = {i}, j = {j}"));
    Ok(PairProduct { joint, first, second, product: first * second, equal: joint == first * second, relation })
}

/// Hypothesis for the tilde pair: each `beta_j` is zero or coprime to
/// `k_j`, not all `beta_j` vanish, `gcd(k) = 1` and `k != (1, ..., 1)`.
pub fn tilde_hypothesis(ks: &[Polynomial], betas: &[Polynomial]) -> Result<()> {
    if ks.len() != betas.len() {
        return Err(Error::LengthMismatch(ks.len(), betas.len()));
    }
    if betas.iter().all(Polynomial::is_zero) {
        return Err(Error::Hypothesis("all beta_j vanish".into()));
    }
    for (j, (k, b)) in ks.iter().zip(betas).enumerate() {
        if k.is_zero() {
            return Err(Error::Hypothesis(format!("k_{} is zero", j + 1)));
        }
        if !b.is_zero() && !k.is_coprime_to(b)? {
            return Err(Error::Hypothesis(format!("beta_{} shares a factor with k_{}", j + 1, j + 1)));
        }
    }
    if ks.iter().all(Polynomial::is_one) {
        return Err(Error::Hypothesis("k = (1, ..., 1)".into()));
    }
    if ks.len() >= 2 {
        let g = ks.iter().skip(1).try_fold(ks[0].clone(), |g, k| g.gcd(k))?;
        if !g.is_one() {
            return Err(Error::Hypothesis(format!("gcd(k) = {g}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TildePairReport {
    pub total_degree: u32,
    pub pair: PairProduct,
    /// `q^{-(m + floor(m/2) - 2)}` with `m` the total degree.
    #[serde(with = "crate::rational_str")]
    pub expected: Rational,
    pub matches: bool,
}

/// Exact joint measure of the tilde pair for `(k, beta)`, checked against
/// `1 / q^{m + floor(m/2) - 2}`.
pub fn tilde_pair_measure(ks: &[Polynomial], betas: &[Polynomial], budget: u128) -> Result<TildePairReport> {
    tilde_hypothesis(ks, betas)?;
    let spec = EventSpec::tilde_pair(ks.to_vec(), betas)?;
    let m = total_degree(ks);
    if m < 2 {
        return Err(Error::TotalDegreeTooSmall(m));
    }
    let pair = measure_pair_product(&spec.events[0], &spec.events[1], budget)?;
    let q = spec.q.get() as i128;
    let expected = Rational::new(1, q.pow(m + m / 2 - 2));
    Ok(TildePairReport { total_degree: m, matches: pair.joint == expected, pair, expected })
}
