//! Scan of `P` for tuples with a deep valuation and shallow shifted
//! valuations, and the discrepancy certificate each one induces.

use rayon::prelude::*;
use serde::Serialize;

use super::pset::{enumerate_p, f_threshold, FThreshold, PSetFilter};
use super::Event;
use crate::discrepancy::{beta_offset, lambda_functional, star_discrepancy_grid, DigitPairing, LambdaReport, PointSetView};
use crate::error::{Error, Result};
use crate::gf_poly::Polynomial;
use crate::laurent::LaurentSeries;
use crate::sequence::DigitalKroneckerConfig;
use crate::walsh::KStar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Integer encodings of `k~_1, ..., k~_s`.
    pub ks: Vec<u64>,
    pub degrees: Vec<u32>,
    pub f: FThreshold,
    /// `floor(F)`.
    pub m: u32,
    /// `q^{m-1}`.
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionFailure {
    pub ks: Vec<u64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSearch {
    pub filter: PSetFilter,
    /// Tuples of `P` with total degree in `2..=R`.
    pub scanned: u64,
    /// Tuples with `nu({sum k_j f_j}) <= -ceil(F)`.
    pub deep_hits: u64,
    /// `sum q^{-(ceil F - 1)}` over the scanned tuples.
    pub poisson_mean: f64,
    /// Deep tuples that also pass the shallow condition.
    pub shallow_passes: u64,
    /// Deep and shallow tuples that cannot be certified on the grid
    /// (a zero degree, or `k* >= q^{floor F}`).
    pub ineligible: u64,
    pub witnesses: Vec<Witness>,
    pub precision_failures: Vec<PrecisionFailure>,
}

enum Outcome {
    Miss,
    Deep { shallow: bool, witness: Option<Witness> },
    Precision(String),
}

/// Digits of each `f_j` that a scan up to total degree `R` may read,
/// including the certificate at resolution `floor F`.
pub fn witness_precision(filter: &PSetFilter) -> Result<i64> {
    let r = filter.max_total_degree.max(2);
    let mut degrees = vec![0; filter.s];
    degrees[0] = r;
    let f = f_threshold(&degrees, filter.q)?;
    let shift = filter.j_trunc.saturating_sub(1) / (filter.q.get() - 1).max(1);
    Ok((2 * f.ceil + r + shift + 4) as i64)
}

fn examine(fs: &[LaurentSeries], ks: &[Polynomial], filter: &PSetFilter) -> Result<Outcome> {
    let q = filter.q;
    let degrees: Vec<u32> = ks.iter().map(|k| k.degree().unwrap_or(0) as u32).collect();
    let f = f_threshold(&degrees, q)?;
    if !Event::new(ks.to_vec(), f.ceil)?.holds(fs)? {
        return Ok(Outcome::Miss);
    }
    let d = f.total_degree;
    let eligible = degrees.iter().all(|&a| a >= 1) && degrees.iter().all(|&a| a + 2 <= f.floor);
    let kstars: Vec<KStar> = if degrees.iter().all(|&a| a >= 1) {
        ks.iter().map(|k| KStar::from_k_tilde(q, k.to_int())).collect::<Result<_>>()?
    } else {
        // no beta offsets exist without a*; the shallow test is undefined
        return Ok(Outcome::Deep { shallow: false, witness: None });
    };
    let s = ks.len();
    let j = filter.j_trunc as u64;
    let mut us = vec![0u64; s];
    let mut shallow = true;
    'scan: loop {
        let mut i = 0;
        while i < s {
            us[i] += 1;
            if us[i] <= j {
                break;
            }
            us[i] = 0;
            i += 1;
        }
        if i == s {
            break 'scan;
        }
        let mut shifted = Vec::with_capacity(s);
        for (k, (ks_j, &u)) in kstars.iter().zip(ks.iter().zip(&us)) {
            let beta = beta_offset(k, u).ok_or(Error::IndexTooLarge { k: u, limit: j + 1 })?;
            shifted.push(ks_j + &Polynomial::from_int(beta, q));
        }
        if Event::new(shifted, d / 2)?.holds(fs)? {
            shallow = false;
            break;
        }
    }
    let witness = (shallow && eligible).then(|| Witness {
        ks: ks.iter().map(Polynomial::to_int).collect(),
        degrees,
        f,
        m: f.floor,
        n: q.pow(f.floor - 1),
    });
    Ok(Outcome::Deep { shallow, witness })
}

/// Scans `P` up to total degree `R` against the given `f`-tuple.
pub fn witness_search(fs: &[LaurentSeries], filter: &PSetFilter) -> Result<WitnessSearch> {
    if fs.len() != filter.s {
        return Err(Error::LengthMismatch(filter.s, fs.len()));
    }
    if let Some(f) = fs.iter().find(|f| f.modulus() != filter.q) {
        return Err(Error::ModulusMismatch(filter.q.get(), f.modulus().get()));
    }
    let tuples: Vec<Vec<Polynomial>> = enumerate_p(filter)
        .into_iter()
        .filter(|ks| ks.iter().map(|k| k.degree().unwrap_or(0)).sum::<usize>() >= 2)
        .collect();
    let outcomes: Vec<(f64, Outcome)> = tuples
        .par_iter()
        .map(|ks| -> Result<(f64, Outcome)> {
            let degrees: Vec<u32> = ks.iter().map(|k| k.degree().unwrap_or(0) as u32).collect();
            let p = f_threshold(&degrees, filter.q)?.deep_probability(filter.q);
            let outcome = match examine(fs, ks, filter) {
                Err(Error::InsufficientPrecision { needed, available }) => {
                    Outcome::Precision(format!("needs precision {needed}, have {available}"))
                }
                other => other?,
            };
            Ok((p, outcome))
        })
        .collect::<Result<_>>()?;
    let mut report = WitnessSearch {
        filter: *filter,
        scanned: tuples.len() as u64,
        deep_hits: 0,
        poisson_mean: 0.0,
        shallow_passes: 0,
        ineligible: 0,
        witnesses: Vec::new(),
        precision_failures: Vec::new(),
    };
    for (ks, (p, outcome)) in tuples.iter().zip(outcomes) {
        report.poisson_mean += p;
        match outcome {
            Outcome::Miss => {}
            Outcome::Deep { shallow, witness } => {
                report.deep_hits += 1;
                if shallow {
                    report.shallow_passes += 1;
                    match witness {
                        Some(w) => report.witnesses.push(w),
                        None => report.ineligible += 1,
                    }
                }
            }
            Outcome::Precision(reason) => report
                .precision_failures
                .push(PrecisionFailure { ks: ks.iter().map(Polynomial::to_int).collect(), reason }),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessCertificate {
    pub witness: Witness,
    pub lambda: LambdaReport,
    /// Exact grid star discrepancy `D*_N`, when the grid fits the budget.
    pub star: Option<f64>,
    /// `(ln N)^s ln ln N`.
    pub log_scale: f64,
    /// `D*_N / log_scale` (falls back to `max |D(x, N)|` on the grid).
    pub ratio: f64,
}

impl WitnessCertificate {
    pub const CSV_HEADER: &'static str = "N,D_star,log_scale,ratio";

    pub fn csv_row(&self) -> String {
        let d = self.star.unwrap_or(self.lambda.max_abs_d);
        format!("{},{},{},{}", self.witness.n, d, self.log_scale, self.ratio)
    }
}

/// Runs the dual-route `Lambda` evaluation for a witness at `m = floor F`,
/// `N = q^{m-1}`, and measures the discrepancy ratio.
pub fn certify_witness(
    fs: &[LaurentSeries],
    witness: &Witness,
    j_trunc: u64,
    pairing: DigitPairing,
    budget: u128,
) -> Result<WitnessCertificate> {
    let q = fs.first().ok_or(Error::EmptyCombination)?.modulus();
    let cfg = DigitalKroneckerConfig::new(q, fs.to_vec(), witness.m as usize, witness.n)?;
    let kstars: Vec<KStar> = witness.ks.iter().map(|&k| KStar::from_k_tilde(q, k)).collect::<Result<_>>()?;
    let lambda = lambda_functional(&cfg, &kstars, witness.n, j_trunc, pairing, budget)?;
    let star = match star_discrepancy_grid(&PointSetView::from_config(&cfg, witness.n)?, witness.n, budget) {
        Ok(rep) => Some(rep.star),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let ln_n = (witness.n as f64).ln();
    let log_scale = ln_n.powi(fs.len() as i32) * ln_n.ln();
    let ratio = star.unwrap_or(lambda.max_abs_d) / log_scale;
    Ok(WitnessCertificate { witness: witness.clone(), lambda, star, log_scale, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf_poly::Prime;
    use crate::laurent::sample_haar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q2() -> Prime {
        Prime::new(2).unwrap()
    }

    #[test]
    fn degenerate_series_has_no_witness() {
        let filter = PSetFilter::new(q2(), 1, 2, 10).unwrap();
        let prec = witness_precision(&filter).unwrap();
        let f = LaurentSeries::from_digits(q2(), 1, &[1], Some(prec)).unwrap();
        let rep = witness_search(&[f], &filter).unwrap();
        assert_eq!(rep.deep_hits, 0);
        assert!(rep.witnesses.is_empty());
        assert!(rep.scanned > 0);
    }

    #[test]
    fn short_series_reported_per_tuple() {
        let filter = PSetFilter::new(q2(), 1, 2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = sample_haar(q2(), 6, &mut rng);
        let rep = witness_search(&[f], &filter).unwrap();
        assert!(!rep.precision_failures.is_empty());
    }

    #[test]
    fn planted_witness_is_found_and_certified() {
        let filter = PSetFilter::new(q2(), 1, 2, 4).unwrap();
        let f_ = f_threshold(&[4], q2()).unwrap();
        let prec = witness_precision(&filter).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let found = (0..20_000).find_map(|_| {
            let f = sample_haar(q2(), prec, &mut rng);
            let rep = witness_search(std::slice::from_ref(&f), &filter).unwrap();
            rep.witnesses.first().cloned().map(|w| (f, w))
        });
        let (f, w) = found.expect("a witness appears with positive probability");
        assert_eq!(w.degrees, vec![4]);
        assert!(filter.accepts(&[Polynomial::from_int(w.ks[0], q2())]));
        assert_eq!(w.m, f_.floor);
        let cert = certify_witness(&[f], &w, 2, DigitPairing::Shifted, 1 << 26).unwrap();
        assert!(cert.lambda.max_abs_d > 0.0);
        assert!(cert.lambda.relative_deviation < 1e-6);
        assert!(cert.ratio > 0.0);
    }
}
