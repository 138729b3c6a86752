//! The test functional `Lambda(k*) = sum_{x in Q^s(q^m)} D(x, N) wal_{k*}(x)`.
//!
//! Expanding `D` spectrally turns `Lambda` into
//! `sum_k prod_j theta_j(k_j) G(N, w(k))` with
//! `theta(k) = sum_x J_k(x) wal_{k*}(x)`. `theta` vanishes except at
//! `k~ + beta(k~, u)` for `u >= 0`, so only those tuples are visited.
//! [`lambda_functional`] evaluates both routes and insists they agree.

use num_complex::Complex64;
use serde::Serialize;

use super::spectral::{g_factor, j_coefficient, DigitPairing, SpectralTerm};
use super::star::{for_each_corner, local_grid_values, PointSetView};
use crate::error::{Error, Result};
use crate::gf_poly::Prime;
use crate::sequence::DigitalKroneckerConfig;
use crate::walsh::{omega_pow, wal_grid, KStar, RootOfUnity, WalshIndex};

/// `theta(k)` in closed form, for `k < q^m` and `k* < q^m`.
///
/// Nonzero only for `k = k*`, `k = k~` and `k = kappa q^{a-1} + k*` with
/// `a > a*`. All three values carry the factor `q^m` from summing over the
/// `q^m` grid points.
pub fn theta(k: u64, kstar: &KStar, m: u32) -> Result<Complex64> {
    let q = kstar.modulus();
    let limit = q.pow(m);
    if k >= limit {
        return Err(Error::IndexTooLarge { k, limit });
    }
    // on the m-digit grid wal_{k*} only sees k* mod q^m
    if kstar.k_star() >= limit {
        return Err(Error::IndexTooLarge { k: kstar.k_star(), limit });
    }
    let qf = q.get() as f64;
    let qm = limit as f64;
    let a_star = kstar.a_star() as i32;
    let one = Complex64::new(1.0, 0.0);
    if k == kstar.k_star() {
        let inner = (0.5 + one / (omega_pow(q, -1) - 1.0)) / qf.powi(a_star) - 0.5 / qm;
        return Ok(qm * inner);
    }
    if k == kstar.k_tilde() {
        return Ok(qm / (qf.powi(a_star) * (omega_pow(q, 1) - 1.0)));
    }
    match WalshIndex::new(q, k).decomposition() {
        Some(d) if d.rest == kstar.k_star() => {
            Ok(qm / (qf.powi(d.a as i32) * (1.0 - omega_pow(q, -(d.kappa as i64)))))
        }
        _ => Ok(Complex64::new(0.0, 0.0)),
    }
}

/// `sum_{r < q^m} J_k(r/q^m) wal_{k*}(r/q^m)` term by term.
pub fn theta_by_definition(k: u64, kstar: &KStar, m: u32) -> Result<Complex64> {
    let q = kstar.modulus();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..q.pow(m) {
        acc += j_coefficient(q, k, r, m)? * wal_grid(q, kstar.k_star(), r, m).to_complex();
    }
    Ok(acc)
}

/// `beta(k~, u)`: 0, then `q^{a*-1}`, then `q^{a*-1} + q^{a*+t} kappa` where
/// `u - 2 = t (q-1) + (kappa - 1)`. `None` on overflow.
pub fn beta_offset(kstar: &KStar, u: u64) -> Option<u64> {
    let q = kstar.modulus();
    let qq = q.get() as u64;
    let a = kstar.a_star();
    let base = qq.checked_pow(a - 1)?;
    match u {
        0 => Some(0),
        1 => Some(base),
        _ => {
            let t = (u - 2) / (qq - 1);
            let kappa = u - t * (qq - 1) - 1;
            let high = qq.checked_pow(a.checked_add(u32::try_from(t).ok()?)?)?;
            base.checked_add(high.checked_mul(kappa)?)
        }
    }
}

/// `(u, k~ + beta(k~, u))` for every `u` with index below `q^m`.
pub fn spectrum(kstar: &KStar, m: u32) -> Vec<(u64, u64)> {
    let limit = kstar.modulus().pow(m);
    let mut out = Vec::new();
    for u in 0.. {
        match beta_offset(kstar, u).and_then(|b| b.checked_add(kstar.k_tilde())) {
            Some(k) if k < limit => out.push((u, k)),
            _ => break,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    pub q: u32,
    pub s: usize,
    pub m: u32,
    pub n: u64,
    pub k_star: Vec<u64>,
    pub k_tilde: Vec<u64>,
    pub j_trunc: u64,
    /// `Lambda` from the grid of brute-force local discrepancies.
    pub direct: (f64, f64),
    /// `Lambda` from the `theta`-weighted spectral sum.
    pub spectral: (f64, f64),
    pub relative_deviation: f64,
    /// Number of `u`-tuples visited on the spectral route.
    pub spectrum_size: usize,
    /// `|prod_j theta(k~_j) G(N, w(k~))|`.
    pub main_term: f64,
    /// `|sum|` over `0 <= u_j <= J`, `u != 0`.
    pub near_sum: f64,
    /// `|sum|` over tuples with some `u_j > J`.
    pub tail_sum: f64,
    /// `main_term - near_sum - tail_sum`.
    pub split_lower_bound: f64,
    /// `w(k~)`, `None` when no digit among the first `m` is nonzero.
    pub w_tilde: Option<u32>,
    pub grid_points: u64,
    pub max_abs_d: f64,
    pub argmax: Vec<u64>,
    /// `|Lambda| / q^{ms}`; `max |D|` can never be smaller.
    pub certificate_bound: f64,
    pub certified: bool,
    /// `max |D| q^{ms} / |Lambda|`, `None` when `Lambda = 0`.
    pub normalization: Option<f64>,
}

/// Relative tolerance between the two routes.
pub const LAMBDA_REL_TOL: f64 = 1e-6;

/// Evaluates `Lambda(k*)` for the first `N < q^m` points of `cfg` on both
/// routes. Fails with [`Error::RouteDisagreement`] if they differ by more
/// than [`LAMBDA_REL_TOL`] relative, with an absolute floor of
/// `1e-12 q^{ms} max(N, 1)` for the float noise of the grid sum.
pub fn lambda_functional(
    cfg: &DigitalKroneckerConfig,
    kstars: &[KStar],
    n: u64,
    j_trunc: u64,
    pairing: DigitPairing,
    budget: u128,
) -> Result<LambdaReport> {
    let s = cfg.s();
    if kstars.len() != s {
        return Err(Error::LengthMismatch(s, kstars.len()));
    }
    let q: Prime = cfg.q();
    if let Some(k) = kstars.iter().find(|k| k.modulus() != q) {
        return Err(Error::ModulusMismatch(q.get(), k.modulus().get()));
    }
    let m = cfg.m() as u32;
    let side = q.pow(m);
    if n >= side {
        return Err(Error::CountOutOfRange { n, available: side - 1 });
    }
    if let Some(k) = kstars.iter().find(|k| k.k_star() >= side) {
        return Err(Error::IndexTooLarge { k: k.k_star(), limit: side });
    }

    // direct route
    let points = PointSetView::from_config(cfg, n)?;
    let local = local_grid_values(&points, n, budget)?;
    let mut direct = Complex64::new(0.0, 0.0);
    let (mut max_abs_d, mut argmax) = (-1.0f64, vec![0; s]);
    let mut idx = 0;
    for_each_corner(s, side, |r| {
        let d = local[idx];
        idx += 1;
        if d.abs() > max_abs_d {
            max_abs_d = d.abs();
            argmax = r.to_vec();
        }
        if d != 0.0 {
            let w = r
                .iter()
                .zip(kstars)
                .fold(RootOfUnity::one(q), |w, (&x, k)| w.mul(wal_grid(q, k.k_star(), x, m)));
            direct += d * w.to_complex();
        }
    });

    // spectral route
    let spectra: Vec<Vec<(u64, u64)>> = kstars.iter().map(|k| spectrum(k, m)).collect();
    let thetas: Vec<Vec<Complex64>> = spectra
        .iter()
        .zip(kstars)
        .map(|(sp, k)| sp.iter().map(|&(_, idx)| theta(idx, k, m)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let zero = Complex64::new(0.0, 0.0);
    let (mut main, mut near, mut tail) = (zero, zero, zero);
    let mut w_tilde = None;
    let mut visited = 0usize;
    let lens: Vec<u64> = spectra.iter().map(|sp| sp.len() as u64).collect();
    if lens.iter().all(|&l| l > 0) {
        let mut pos = vec![0usize; s];
        loop {
            let ks: Vec<u64> = (0..s).map(|j| spectra[j][pos[j]].1).collect();
            let us: Vec<u64> = (0..s).map(|j| spectra[j][pos[j]].0).collect();
            let weight: Complex64 = (0..s).map(|j| thetas[j][pos[j]]).product();
            let term = SpectralTerm::from_series(cfg.fs(), &ks, m)?;
            let value = weight * g_factor(q, n, &term, m, pairing)?;
            visited += 1;
            if us.iter().all(|&u| u == 0) {
                main += value;
                w_tilde = term.w();
            } else if us.iter().all(|&u| u <= j_trunc) {
                near += value;
            } else {
                tail += value;
            }
            let mut j = 0;
            while j < s {
                pos[j] += 1;
                if (pos[j] as u64) < lens[j] {
                    break;
                }
                pos[j] = 0;
                j += 1;
            }
            if j == s {
                break;
            }
        }
    }
    let spectral = main + near + tail;

    let grid_points = side.pow(s as u32);
    let scale = direct.norm().max(spectral.norm());
    let floor = 1e-12 * grid_points as f64 * n.max(1) as f64;
    let deviation = (direct - spectral).norm();
    let relative_deviation = if scale > 0.0 { deviation / scale } else { 0.0 };
    if deviation > (LAMBDA_REL_TOL * scale).max(floor) {
        return Err(Error::RouteDisagreement { direct: direct.to_string(), spectral: spectral.to_string() });
    }
    let lambda_abs = direct.norm();
    let certificate_bound = lambda_abs / grid_points as f64;
    Ok(LambdaReport {
        q: q.get(),
        s,
        m,
        n,
        k_star: kstars.iter().map(|k| k.k_star()).collect(),
        k_tilde: kstars.iter().map(|k| k.k_tilde()).collect(),
        j_trunc,
        direct: (direct.re, direct.im),
        spectral: (spectral.re, spectral.im),
        relative_deviation,
        spectrum_size: visited,
        main_term: main.norm(),
        near_sum: near.norm(),
        tail_sum: tail.norm(),
        split_lower_bound: main.norm() - near.norm() - tail.norm(),
        w_tilde,
        grid_points,
        max_abs_d,
        argmax,
        certificate_bound,
        certified: max_abs_d >= certificate_bound * (1.0 - 1e-12),
        normalization: (lambda_abs > floor).then(|| max_abs_d * grid_points as f64 / lambda_abs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::{sample_haar, LaurentSeries};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: u32) -> Prime {
        Prime::new(n).unwrap()
    }

    fn random_kstar(p: u32, m: u32, rng: &mut ChaCha8Rng) -> KStar {
        let a = rng.gen_range(3..=m);
        KStar::new(q(p), a, rng.gen_range(0..q(p).pow(a - 2))).unwrap()
    }

    #[test]
    fn closed_forms_match_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in [2, 3, 5] {
            for m in 3..=3 {
                for _ in 0..4 {
                    let ks = random_kstar(p, m, &mut rng);
                    for k in 0..q(p).pow(m) {
                        let d = theta(k, &ks, m).unwrap() - theta_by_definition(k, &ks, m).unwrap();
                        assert!(d.norm() < 1e-10, "q={p} k={k} k*={}", ks.k_star());
                    }
                }
            }
        }
    }

    #[test]
    fn theta_support_and_zero_index() {
        let ks = KStar::new(q(2), 3, 1).unwrap(); // k* = 7, k~ = 3
        assert_eq!(theta(0, &ks, 4).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(theta(5, &ks, 4).unwrap(), Complex64::new(0.0, 0.0));
        // k~: q^m q^{-a*} / (omega - 1) = 16/8 / (-2)
        assert!((theta(3, &ks, 4).unwrap() - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let support: Vec<u64> = (0..16).filter(|&k| theta(k, &ks, 4).unwrap().norm() > 1e-12).collect();
        let from_beta: Vec<u64> = spectrum(&ks, 4).into_iter().map(|(_, k)| k).collect();
        assert_eq!(support, from_beta);
    }

    #[test]
    fn beta_examples() {
        let ks = KStar::new(q(2), 3, 0).unwrap();
        assert_eq!(beta_offset(&ks, 0), Some(0));
        assert_eq!(beta_offset(&ks, 1), Some(4));
        assert_eq!(beta_offset(&ks, 2), Some(12));
        assert_eq!(ks.k_tilde() + 12, ks.k_star() + 8);
        let ks3 = KStar::new(q(3), 4, 5).unwrap();
        for u in 2..20u64 {
            let t = (u - 2) / 2;
            let kappa = u - 2 * t - 1;
            let sum = ks3.k_tilde() + beta_offset(&ks3, u).unwrap();
            assert_eq!(sum, ks3.k_star() + 3u64.pow(4 + t as u32) * kappa);
            // carry free: the digits of k~ and beta never overlap
            let d1 = q(3).digits_padded(ks3.k_tilde(), 16);
            let d2 = q(3).digits_padded(beta_offset(&ks3, u).unwrap(), 16);
            assert!(d1.iter().zip(&d2).all(|(a, b)| a * b == 0));
        }
    }

    #[test]
    fn theta_decay_constant() {
        let mut worst = 0.0f64;
        for p in [2u32, 3, 5] {
            let ks = KStar::new(q(p), 3, 1).unwrap();
            let m = 3 + 3 * p + 2;
            for (u, k) in spectrum(&ks, m).into_iter().take_while(|&(u, _)| u <= 3 * p as u64) {
                let normalized = theta(k, &ks, m).unwrap().norm() / q(p).pow(m) as f64;
                let bound = (p as f64).powf(-(3.0 + u as f64 / p as f64));
                worst = worst.max(normalized / bound);
            }
        }
        assert!(worst <= 4.0, "measured constant {worst}");
    }

    #[test]
    fn routes_agree_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for (p, s, m) in [(2u32, 1usize, 5usize), (3, 1, 4), (2, 2, 4), (3, 2, 3)] {
            for _ in 0..3 {
                let fs = (0..s).map(|_| sample_haar(q(p), 3 * m as i64, &mut rng)).collect();
                let cfg = DigitalKroneckerConfig::new(q(p), fs, m, q(p).pow(m as u32)).unwrap();
                let kstars: Vec<KStar> = (0..s).map(|_| random_kstar(p, m as u32, &mut rng)).collect();
                let n = rng.gen_range(1..q(p).pow(m as u32));
                let rep = lambda_functional(&cfg, &kstars, n, 2, DigitPairing::Shifted, 1 << 24).unwrap();
                assert!(rep.certified);
                assert!(rep.relative_deviation < 1e-6 || rep.direct.0.hypot(rep.direct.1) < 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_inverse_x() {
        let f = LaurentSeries::from_digits(q(2), 1, &[1], Some(20)).unwrap();
        let cfg = DigitalKroneckerConfig::new(q(2), vec![f], 3, 8).unwrap();
        for l in 0..2 {
            let ks = KStar::new(q(2), 3, l).unwrap();
            for n in 1..8 {
                lambda_functional(&cfg, &[ks], n, 1, DigitPairing::Shifted, 1 << 20).unwrap();
            }
        }
    }

    #[test]
    fn k_star_beyond_grid_rejected() {
        let f = LaurentSeries::from_digits(q(2), 1, &[1, 1, 0, 1], Some(20)).unwrap();
        let cfg = DigitalKroneckerConfig::new(q(2), vec![f], 2, 4).unwrap();
        let ks = KStar::new(q(2), 4, 0).unwrap();
        assert!(matches!(
            lambda_functional(&cfg, &[ks], 3, 1, DigitPairing::Shifted, 1 << 20),
            Err(Error::IndexTooLarge { .. })
        ));
        assert!(theta(1, &ks, 2).is_err());
    }
}
