//! Walsh expansion of the local discrepancy of a digital Kronecker sequence:
//!
//! `D(x, N) = sum_{k != 0} (prod_j J_{k_j}(x_j)) G(N, w(k))`
//!
//! where `J_k(x) = int_0^x conj(wal_k)` and `G(N, w(k))` is the character sum
//! `sum_{n<N} prod_j wal_{k_j}(x_{n,j})`, which only depends on the digits of
//! `{sum_j k_j f_j}` from its first nonzero one onwards.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::star::{for_each_corner, PointSetView};
use crate::error::{Error, Result};
use crate::gf_poly::{Polynomial, Prime};
use crate::laurent::{series_linear_combination, LaurentSeries};
use crate::sequence::DigitalKroneckerConfig;
use crate::walsh::{omega_pow, wal_grid, RootSum, WalshIndex};

/// Default bound on `|Im D|` after the full spectral sum.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;

/// `J_k(r / q^m)` from its closed form.
pub fn j_coefficient(q: Prime, k: u64, r: u64, m: u32) -> Result<Complex64> {
    let limit = q.pow(m);
    if k >= limit {
        return Err(Error::IndexTooLarge { k, limit });
    }
    let qf = q.get() as f64;
    let wbar = |j: u64| wal_grid(q, j, r, m).conj().to_complex();
    let tail = |a: u32| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 1..=m - a {
            for l in 1..q.get() {
                let idx = l as u64 * q.pow(a + c - 1) + k;
                acc += wbar(idx) / ((omega_pow(q, l as i64) - 1.0) * qf.powi(c as i32));
            }
        }
        acc
    };
    let Some(d) = WalshIndex::new(q, k).decomposition() else {
        return Ok(Complex64::new(0.5 - 0.5 / qf.powi(m as i32), 0.0) + tail(0));
    };
    let kappa = d.kappa as i64;
    let inv = omega_pow(q, -kappa);
    let body = wbar(d.rest) / (1.0 - inv) + (0.5 + 1.0 / (inv - 1.0)) * wbar(k) + tail(d.a)
        - wbar(k) / (2.0 * qf.powi((m - d.a) as i32));
    Ok(body / qf.powi(d.a as i32))
}

/// `J_k(r/q^m)` for all `k, r < q^m`, indexed `k * q^m + r`.
pub fn j_table(q: Prime, m: u32) -> Result<Vec<Complex64>> {
    let side = q.pow(m);
    let mut out = Vec::with_capacity((side * side) as usize);
    for k in 0..side {
        for r in 0..side {
            out.push(j_coefficient(q, k, r, m)?);
        }
    }
    Ok(out)
}

/// How the digits of `N` are matched with the digits `b_i` of
/// `{sum_j k_j f_j}` inside `G`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitPairing {
    /// `N_{i-1}` pairs with `b_i`; `G = N` once `w > m`. Agrees with direct
    /// counting.
    #[default]
    Shifted,
    /// `N_i` pairs with `b_i`; `G = N` once `w >= m`. Off by one digit and
    /// kept as a negative control for the consistency checks.
    Unshifted,
}

impl fmt::Display for DigitPairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DigitPairing::Shifted => "shifted",
            DigitPairing::Unshifted => "unshifted",
        })
    }
}

impl FromStr for DigitPairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shifted" => Ok(DigitPairing::Shifted),
            "unshifted" => Ok(DigitPairing::Unshifted),
            other => Err(Error::Config(format!("unknown digit pairing {other:?}"))),
        }
    }
}

/// `w(k) = -nu({sum_j k_j f_j})` and the digits `b_1..b_m` of that series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralTerm {
    ks: Vec<u64>,
    /// First index `<= m` with `b_w != 0`, or `None` if `b_1..b_m` vanish.
    w: Option<u32>,
    b: Vec<u32>,
}

impl SpectralTerm {
    pub fn new(ks: Vec<u64>, w: Option<u32>, b: Vec<u32>) -> Result<Self> {
        if let Some(w) = w {
            if w == 0 || w as usize > b.len() {
                return Err(Error::Config(format!("w = {w} outside 1..={}", b.len())));
            }
            if b[w as usize - 1] == 0 {
                return Err(Error::VanishingLeadDigit { w });
            }
        }
        Ok(SpectralTerm { ks, w, b })
    }

    /// Computes `{sum_j k_j f_j}` to `m` certified digits.
    pub fn from_series(fs: &[LaurentSeries], ks: &[u64], m: u32) -> Result<Self> {
        let q = fs.first().ok_or(Error::EmptyCombination)?.modulus();
        let polys: Vec<Polynomial> = ks.iter().map(|&k| Polynomial::from_int(k, q)).collect();
        let g = series_linear_combination(&polys, fs)?;
        let b = g.fractional_digits(m as usize)?;
        let w = b.iter().position(|&d| d != 0).map(|i| i as u32 + 1);
        Ok(SpectralTerm { ks: ks.to_vec(), w, b })
    }

    pub fn ks(&self) -> &[u64] {
        &self.ks
    }

    pub fn w(&self) -> Option<u32> {
        self.w
    }

    /// `b_i` for `1 <= i <= m`.
    pub fn b(&self, i: u32) -> u32 {
        self.b[i as usize - 1]
    }

    pub fn digits(&self) -> &[u32] {
        &self.b
    }
}

/// `G(N, w(k))` for `N < q^m`.
pub fn g_factor(q: Prime, n: u64, term: &SpectralTerm, m: u32, pairing: DigitPairing) -> Result<Complex64> {
    let limit = q.pow(m);
    if n >= limit {
        return Err(Error::CountOutOfRange { n, available: limit - 1 });
    }
    if term.b.len() < m as usize {
        return Err(Error::InsufficientPrecision { needed: m as i64 + 1, available: term.b.len() as i64 + 1 });
    }
    let nd = q.digits_padded(n, m as usize);
    let whole = Complex64::new(n as f64, 0.0);
    // (v, index of the lead digit b, index of the first phase digit of N)
    let (v, w) = match (term.w, pairing) {
        (None, _) => return Ok(whole),
        (Some(w), DigitPairing::Shifted) => (w - 1, w),
        (Some(w), DigitPairing::Unshifted) if w >= m => return Ok(whole),
        (Some(w), DigitPairing::Unshifted) => (w, w),
    };
    let bw = term.b(w) as i64;
    if bw == 0 {
        return Err(Error::VanishingLeadDigit { w });
    }
    let offset = w - v; // b_{r + offset} pairs with N_r
    let phase: i64 = (v + 1..m).map(|r| term.b(r + offset) as i64 * nd[r as usize] as i64).sum();
    let lead = omega_pow(q, bw * nd[v as usize] as i64);
    let qv = q.pow(v);
    let geometric = (lead - 1.0) / (omega_pow(q, bw) - 1.0);
    Ok(omega_pow(q, phase) * (qv as f64 * geometric + lead * (n % qv) as f64))
}

/// `sum_{n < N} prod_j wal_{k_j}(x_{n,j})` over the first `N` points, exactly.
pub fn character_sum(points: &PointSetView, ks: &[u64], n: u64) -> Result<RootSum> {
    if n > points.len() as u64 {
        return Err(Error::CountOutOfRange { n, available: points.len() as u64 });
    }
    let q = points.q();
    let mut acc = RootSum::new(q);
    for i in 0..n as usize {
        let w = points
            .point(i)
            .iter()
            .zip(ks)
            .fold(crate::walsh::RootOfUnity::one(q), |w, (&r, &k)| w.mul(wal_grid(q, k, r, points.m())));
        acc.push(w);
    }
    Ok(acc)
}

/// Precomputed `J` values and spectral terms for every `k in [0, q^m)^s`.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    q: Prime,
    s: usize,
    m: u32,
    side: u64,
    j: Vec<Complex64>,
    terms: Vec<SpectralTerm>,
    pairing: DigitPairing,
}

impl SpectralTable {
    pub fn new(cfg: &DigitalKroneckerConfig, pairing: DigitPairing, budget: u128) -> Result<Self> {
        let q = cfg.q();
        let m = cfg.m() as u32;
        let side = q.pow(m);
        let s = cfg.s();
        let size = (side as u128).pow(s as u32);
        if size > budget {
            return Err(Error::BudgetExceeded { required: size, budget });
        }
        let mut terms = Vec::with_capacity(size as usize);
        let mut err = None;
        for_each_corner(s, side, |ks| match SpectralTerm::from_series(cfg.fs(), ks, m) {
            Ok(t) => terms.push(t),
            Err(e) => {
                err.get_or_insert(e);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(SpectralTable { q, s, m, side, j: j_table(q, m)?, terms, pairing })
    }

    pub fn q(&self) -> Prime {
        self.q
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn pairing(&self) -> DigitPairing {
        self.pairing
    }

    /// Spectral terms with `k` index `sum_j k_j q^{m j}`.
    pub fn terms(&self) -> &[SpectralTerm] {
        &self.terms
    }

    pub fn j(&self, k: u64, r: u64) -> Complex64 {
        self.j[(k * self.side + r) as usize]
    }

    /// `G(N, w(k))` for every `k`, zero at `k = 0`.
    pub fn g_vector(&self, n: u64) -> Result<Vec<Complex64>> {
        let mut g = self
            .terms
            .iter()
            .map(|t| g_factor(self.q, n, t, self.m, self.pairing))
            .collect::<Result<Vec<_>>>()?;
        g[0] = Complex64::new(0.0, 0.0);
        Ok(g)
    }

    /// Spectral `D(x, N)` for every `x in Q^s(q^m)`, coordinate 0 fastest.
    pub fn grid(&self, n: u64) -> Result<Vec<Complex64>> {
        let mut a = self.g_vector(n)?;
        let side = self.side as usize;
        let mut stride = 1usize;
        // contract one coordinate at a time: k_d -> x_d
        for _ in 0..self.s {
            let mut next = vec![Complex64::new(0.0, 0.0); a.len()];
            for (idx, out) in next.iter_mut().enumerate() {
                let lower = idx % stride;
                let x = (idx / stride) % side;
                let base = lower + (idx / (stride * side)) * stride * side;
                *out = (0..side).map(|k| a[base + k * stride] * self.j[k * side + x]).sum();
            }
            a = next;
            stride *= side;
        }
        Ok(a)
    }

    /// Spectral `D(r / q^m, N)` at a single grid point.
    pub fn local(&self, r: &[u64], n: u64) -> Result<Complex64> {
        if r.len() != self.s {
            return Err(Error::LengthMismatch(self.s, r.len()));
        }
        if let Some(&bad) = r.iter().find(|&&v| v >= self.side) {
            return Err(Error::OutOfRange { value: bad, modulus: self.side as u32 });
        }
        let g = self.g_vector(n)?;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = 0;
        for_each_corner(self.s, self.side, |ks| {
            let prod: Complex64 = ks.iter().zip(r).map(|(&k, &x)| self.j(k, x)).product();
            acc += prod * g[idx];
            idx += 1;
        });
        Ok(acc)
    }
}

/// `D(x, N)` through the Walsh expansion, rejecting any imaginary residue
/// above `tol`.
pub fn local_discrepancy_walsh(table: &SpectralTable, r: &[u64], n: u64, tol: f64) -> Result<f64> {
    let v = table.local(r, n)?;
    if v.im.abs() > tol {
        return Err(Error::ImaginaryResidue { residue: v.im.abs(), tolerance: tol });
    }
    Ok(v.re)
}

/// First `(k, N)` where `G` from the table disagrees with the character sum
/// of the actual points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Localization {
    pub ks: Vec<u64>,
    pub n: u64,
    pub w: Option<u32>,
    pub formula: (f64, f64),
    pub direct: (f64, f64),
}

impl fmt::Display for Localization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "k = {:?}, N = {}, w = {:?}: G = {:.6}{:+.6}i but the character sum is {:.6}{:+.6}i",
            self.ks, self.n, self.w, self.formula.0, self.formula.1, self.direct.0, self.direct.1
        )
    }
}

/// Scans `N = 1, 2, ...` up to the size of `points`, and all `k`, in a
/// fixed order; `None` if every `G` matches within `tol * max(N, 1)`.
pub fn localize_failure(table: &SpectralTable, points: &PointSetView, tol: f64) -> Result<Option<Localization>> {
    let limit = (points.len() as u64).min(table.side - 1);
    for n in 1..=limit {
        for term in table.terms.iter().skip(1) {
            let formula = g_factor(table.q, n, term, table.m, table.pairing)?;
            let direct = character_sum(points, term.ks(), n)?.to_complex();
            if (formula - direct).norm() > tol * n as f64 {
                return Ok(Some(Localization {
                    ks: term.ks.clone(),
                    n,
                    w: term.w,
                    formula: (formula.re, formula.im),
                    direct: (direct.re, direct.im),
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::super::star::local_grid_values;
    use super::*;
    use crate::laurent::sample_haar;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: u32) -> Prime {
        Prime::new(n).unwrap()
    }

    /// `J_k(r/q^m)` straight from its integral.
    fn j_direct(q: Prime, k: u64, r: u64, m: u32) -> Complex64 {
        let sum: Complex64 = (0..r).map(|t| wal_grid(q, k, t, m).conj().to_complex()).sum();
        sum / q.pow(m) as f64
    }

    fn random_cfg(p: u32, s: usize, m: usize, seed: u64) -> DigitalKroneckerConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = (0..s).map(|_| sample_haar(q(p), 3 * m as i64 + 4, &mut rng)).collect();
        DigitalKroneckerConfig::new(q(p), fs, m, q(p).pow(m as u32)).unwrap()
    }

    #[test]
    fn j_matches_integral() {
        for p in [2, 3, 5] {
            for m in 1..=3 {
                for k in 0..q(p).pow(m) {
                    for r in 0..q(p).pow(m) {
                        let d = j_coefficient(q(p), k, r, m).unwrap() - j_direct(q(p), k, r, m);
                        assert!(d.norm() < 1e-12, "q={p} m={m} k={k} r={r}");
                    }
                }
            }
        }
        assert!(j_coefficient(q(2), 4, 0, 2).is_err());
    }

    #[test]
    fn j_zero_small_case() {
        assert!(j_coefficient(q(2), 0, 0, 1).unwrap().norm() < 1e-15);
        for r in 0..27 {
            let v = j_coefficient(q(3), 0, r, 3).unwrap();
            assert!(v.im.abs() < 1e-12);
            assert!((v.re - r as f64 / 27.0).abs() < 1e-12);
        }
    }

    #[test]
    fn g_matches_character_sum() {
        for (p, s, m) in [(2u32, 1usize, 3u32), (3, 1, 2), (2, 2, 2), (3, 2, 2)] {
            let cfg = random_cfg(p, s, m as usize, 7 + p as u64);
            let table = SpectralTable::new(&cfg, DigitPairing::Shifted, 1 << 20).unwrap();
            let pts = PointSetView::from_config(&cfg, q(p).pow(m)).unwrap();
            assert_eq!(localize_failure(&table, &pts, 1e-9).unwrap(), None);
        }
    }

    #[test]
    fn unshifted_pairing_is_caught() {
        let cfg = random_cfg(2, 1, 3, 1);
        let table = SpectralTable::new(&cfg, DigitPairing::Unshifted, 1 << 20).unwrap();
        let pts = PointSetView::from_config(&cfg, 8).unwrap();
        let loc = localize_failure(&table, &pts, 1e-9).unwrap().expect("must disagree");
        assert!(loc.n >= 1 && loc.ks.iter().any(|&k| k != 0));
    }

    #[test]
    fn spectral_grid_matches_counting() {
        for (p, s, m) in [(2u32, 1usize, 3u32), (3, 1, 2), (2, 2, 2), (3, 2, 1)] {
            let cfg = random_cfg(p, s, m as usize, 3);
            let table = SpectralTable::new(&cfg, DigitPairing::Shifted, 1 << 20).unwrap();
            let pts = PointSetView::from_config(&cfg, q(p).pow(m)).unwrap();
            for n in 0..q(p).pow(m) {
                let brute = local_grid_values(&pts, n, 1 << 20).unwrap();
                let walsh = table.grid(n).unwrap();
                for (b, w) in brute.iter().zip(&walsh) {
                    assert!((b - w.re).abs() < 1e-9 && w.im.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inverse_x_example() {
        let f = LaurentSeries::from_digits(q(2), 1, &[1], Some(20)).unwrap();
        let cfg = DigitalKroneckerConfig::new(q(2), vec![f], 2, 4).unwrap();
        let table = SpectralTable::new(&cfg, DigitPairing::Shifted, 1 << 20).unwrap();
        assert!((local_discrepancy_walsh(&table, &[3], 2, 1e-9).unwrap() - 0.5).abs() < 1e-12);
        assert!(local_discrepancy_walsh(&table, &[0], 3, 1e-9).unwrap().abs() < 1e-12);
    }

    #[test]
    fn g_shortcuts_and_bound() {
        let term = SpectralTerm::new(vec![1], None, vec![0, 0]).unwrap();
        assert_eq!(g_factor(q(2), 3, &term, 2, DigitPairing::Shifted).unwrap(), Complex64::new(3.0, 0.0));
        let at_m = SpectralTerm::new(vec![1], Some(2), vec![0, 1]).unwrap();
        assert_eq!(g_factor(q(2), 3, &at_m, 2, DigitPairing::Unshifted).unwrap(), Complex64::new(3.0, 0.0));
        assert!(SpectralTerm::new(vec![1], Some(1), vec![0, 1]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let p = [2u32, 3, 5][rng.gen_range(0..3)];
            let m = rng.gen_range(1..=6u32);
            let n = rng.gen_range(0..q(p).pow(m));
            let w = rng.gen_range(1..=m);
            let mut b: Vec<u32> = (0..m).map(|_| rng.gen_range(0..p)).collect();
            b[..w as usize - 1].iter_mut().for_each(|d| *d = 0);
            b[w as usize - 1] = rng.gen_range(1..p);
            let term = SpectralTerm::new(vec![1], Some(w), b).unwrap();
            for pairing in [DigitPairing::Shifted, DigitPairing::Unshifted] {
                let g = g_factor(q(p), n, &term, m, pairing).unwrap();
                assert!(g.norm() <= (p as u64 * n.max(1)) as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn pairing_parse() {
        assert_eq!("shifted".parse::<DigitPairing>().unwrap(), DigitPairing::Shifted);
        assert_eq!(DigitPairing::Unshifted.to_string().parse::<DigitPairing>().unwrap(), DigitPairing::Unshifted);
        assert!("other".parse::<DigitPairing>().is_err());
    }
}
