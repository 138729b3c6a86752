//! Digital Kronecker sequences.
//!
//! The `n`-th point has coordinates `{n(x) f_j(x)}` evaluated at `x = q`,
//! truncated to `m` digits. [`point_via_laurent`] computes them by series
//! multiplication; [`point_via_matrices`] uses the Hankel generating
//! matrices `C_j[r][c] = f_{j, r+c+1}`. The two routes are independent and
//! are checked against each other in the tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf_poly::{Polynomial, Prime};
use crate::laurent::{digits_to_real, sample_haar, LaurentSeries, SeriesLiteral};

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalKroneckerConfig {
    q: Prime,
    fs: Vec<LaurentSeries>,
    m: usize,
    max_n: u64,
}

/// Number of base-`q` digits needed to write every `n < max_n` (at least one).
pub fn index_digits(q: Prime, max_n: u64) -> usize {
    q.digits(max_n.saturating_sub(1)).len().max(1)
}

impl DigitalKroneckerConfig {
    /// Validates that every `f_j` lies in `Z_q((x^{-1}))` with `w >= 1` and
    /// is known far enough to produce `m` digits for every `n < max_n`.
    pub fn new(q: Prime, fs: Vec<LaurentSeries>, m: usize, max_n: u64) -> Result<Self> {
        if fs.is_empty() {
            return Err(Error::Config("dimension s must be at least 1".into()));
        }
        if m == 0 {
            return Err(Error::Config("output precision m must be at least 1".into()));
        }
        if max_n == 0 {
            return Err(Error::Config("max_n must be at least 1".into()));
        }
        let needed = (m + index_digits(q, max_n)) as i64;
        for (j, f) in fs.iter().enumerate() {
            if f.modulus() != q {
                return Err(Error::ModulusMismatch(q.get(), f.modulus().get()));
            }
            if f.lead_index() < 1 {
                return Err(Error::Config(format!(
                    "f_{} has a nonzero coefficient at index {} <= 0",
                    j + 1,
                    f.lead_index()
                )));
            }
            if f.precision_end() < needed + 1 {
                return Err(Error::InsufficientPrecision {
                    needed: needed + 1,
                    available: f.precision_end(),
                });
            }
        }
        Ok(DigitalKroneckerConfig { q, fs, m, max_n })
    }

    pub fn q(&self) -> Prime {
        self.q
    }

    pub fn s(&self) -> usize {
        self.fs.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_n(&self) -> u64 {
        self.max_n
    }

    pub fn fs(&self) -> &[LaurentSeries] {
        &self.fs
    }

    /// Same series with a different output precision and index range.
    pub fn with_resolution(&self, m: usize, max_n: u64) -> Result<Self> {
        Self::new(self.q, self.fs.clone(), m, max_n)
    }
}

/// One point: `s` coordinates of `m` digits each, plus their real values.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePoint {
    pub digits: Vec<Vec<u32>>,
    pub coords: Vec<f64>,
}

impl SequencePoint {
    pub fn from_digits(digits: Vec<Vec<u32>>, q: Prime) -> Self {
        let coords = digits.iter().map(|d| digits_to_real(d, q)).collect();
        SequencePoint { digits, coords }
    }

    /// Integer numerators `r_j` with coordinate `x_j = r_j / q^m`.
    pub fn grid_numerators(&self, q: Prime) -> Vec<u64> {
        self.digits.iter().map(|d| digits_to_numerator(d, q)).collect()
    }
}

/// `sum_i d_i q^{m-i}` for digits `d_1..d_m`.
pub fn digits_to_numerator(digits: &[u32], q: Prime) -> u64 {
    digits.iter().fold(0u64, |acc, &d| acc * q.get() as u64 + d as u64)
}

/// Coordinates `{n(x) f_j(x)}` by series multiplication.
pub fn point_via_laurent(cfg: &DigitalKroneckerConfig, n: u64) -> Result<SequencePoint> {
    let np = Polynomial::from_int(n, cfg.q);
    let digits = cfg
        .fs
        .iter()
        .map(|f| f.mul_poly(&np)?.fractional_digits(cfg.m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequencePoint::from_digits(digits, cfg.q))
}

/// Finite `rows x cols` slab of a Hankel generating matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratingMatrix {
    q: Prime,
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

impl GeneratingMatrix {
    /// Entry `(r, c)` (zero based) is `f_{r+c+1}`.
    pub fn from_series(f: &LaurentSeries, rows: usize, cols: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f.coeff((r + c + 1) as i64)?);
            }
        }
        Ok(GeneratingMatrix { q: f.modulus(), rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> u32 {
        self.entries[r * self.cols + c]
    }

    /// First `m` output digits of `C * (n_0, n_1, ...)^T`.
    pub fn apply(&self, n_digits: &[u32], m: usize) -> Result<Vec<u32>> {
        if m > self.rows || n_digits.len() > self.cols {
            return Err(Error::SlabTooSmall {
                rows: self.rows,
                cols: self.cols,
                needed_rows: m,
                needed_cols: n_digits.len(),
            });
        }
        let q = self.q.get() as u64;
        Ok((0..m)
            .map(|r| {
                let row = &self.entries[r * self.cols..];
                let acc: u64 = n_digits.iter().zip(row).map(|(&a, &b)| a as u64 * b as u64).sum();
                (acc % q) as u32
            })
            .collect())
    }
}

/// One `m x index_digits(max_n)` slab per coordinate.
pub fn matrices_from_f(cfg: &DigitalKroneckerConfig) -> Result<Vec<GeneratingMatrix>> {
    let cols = index_digits(cfg.q, cfg.max_n);
    cfg.fs
        .iter()
        .map(|f| GeneratingMatrix::from_series(f, cfg.m, cols))
        .collect()
}

pub fn point_via_matrices(mats: &[GeneratingMatrix], q: Prime, m: usize, n: u64) -> Result<SequencePoint> {
    let nd = q.digits(n);
    let digits = mats.iter().map(|c| c.apply(&nd, m)).collect::<Result<Vec<_>>>()?;
    Ok(SequencePoint::from_digits(digits, q))
}

/// `({n alpha_1}, ..., {n alpha_s})` in floating point.
pub fn classical_kronecker(alphas: &[f64], n: u64) -> Vec<f64> {
    alphas.iter().map(|&a| (n as f64 * a).rem_euclid(1.0)).collect()
}

/// Points `0..count` via the Laurent route.
pub fn generate_block(cfg: &DigitalKroneckerConfig, count: u64) -> Result<Vec<SequencePoint>> {
    points(cfg, count)?.collect()
}

/// Streaming form of [`generate_block`]; precision for the last index is
/// checked before the first point is produced.
pub fn points(
    cfg: &DigitalKroneckerConfig,
    count: u64,
) -> Result<impl Iterator<Item = Result<SequencePoint>> + '_> {
    if count == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    if count > cfg.max_n {
        return Err(Error::CountOutOfRange { n: count, available: cfg.max_n });
    }
    point_via_laurent(cfg, count - 1)?;
    Ok((0..count).map(move |n| point_via_laurent(cfg, n)))
}

/// Grid numerators of points `start..end`, row major (`s` per point).
///
/// Walks `n` upward and adds generating-matrix columns for each digit that
/// changes, so the cost per point is `O(m)` amortised.
pub fn grid_numerators_range(cfg: &DigitalKroneckerConfig, start: u64, end: u64) -> Result<Vec<u64>> {
    if end <= start {
        return Ok(Vec::new());
    }
    let q = cfg.q;
    let m = cfg.m;
    let cols = index_digits(q, end);
    let mats = cfg
        .fs
        .iter()
        .map(|f| GeneratingMatrix::from_series(f, m, cols))
        .collect::<Result<Vec<_>>>()?;
    let mut n_digits = q.digits_padded(start, cols);
    let mut cur: Vec<Vec<u32>> = mats.iter().map(|c| c.apply(&n_digits, m)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(((end - start) as usize) * cfg.s());
    for n in start..end {
        for d in &cur {
            out.push(digits_to_numerator(d, q));
        }
        if n + 1 == end {
            break;
        }
        // n -> n+1: every digit in the carry chain moves by +1 mod q
        let mut pos = 0;
        loop {
            for (c, mat) in cur.iter_mut().zip(&mats) {
                for (r, digit) in c.iter_mut().enumerate() {
                    *digit = q.add(*digit, mat.entry(r, pos));
                }
            }
            n_digits[pos] += 1;
            if n_digits[pos] < q.get() {
                break;
            }
            n_digits[pos] = 0;
            pos += 1;
        }
    }
    Ok(out)
}

/// Parallel [`grid_numerators_range`] over `0..count`; output identical to
/// the serial walk.
pub fn grid_numerators(cfg: &DigitalKroneckerConfig, count: u64) -> Result<Vec<u64>> {
    const CHUNK: u64 = 1 << 14;
    let chunks: Vec<(u64, u64)> = (0..count)
        .step_by(CHUNK as usize)
        .map(|s| (s, (s + CHUNK).min(count)))
        .collect();
    let parts = chunks
        .par_iter()
        .map(|&(s, e)| grid_numerators_range(cfg, s, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// Per-coordinate entry of a sequence config file: either a series literal
/// or `{"random": true, "seed": 7, "precision": 64}` for a Haar sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSpec {
    Random { random: bool, seed: u64, precision: i64 },
    Literal(SeriesLiteral),
}

impl SeriesSpec {
    pub fn resolve(&self, q: Prime) -> Result<LaurentSeries> {
        match self {
            SeriesSpec::Random { random: false, .. } => {
                Err(Error::Config("\"random\": false needs a series literal instead".into()))
            }
            SeriesSpec::Random { seed, precision, .. } => {
                if *precision < 1 {
                    return Err(Error::Config("precision must be at least 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(sample_haar(q, *precision, &mut rng))
            }
            SeriesSpec::Literal(lit) => {
                let g = lit.to_series()?;
                if g.modulus() != q {
                    return Err(Error::ModulusMismatch(q.get(), g.modulus().get()));
                }
                Ok(g)
            }
        }
    }
}

/// JSON sequence configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub q: u32,
    pub s: usize,
    pub fs: Vec<SeriesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl SequenceFile {
    pub fn series(&self) -> Result<(Prime, Vec<LaurentSeries>)> {
        let q = Prime::new(self.q)?;
        if self.fs.len() != self.s {
            return Err(Error::LengthMismatch(self.s, self.fs.len()));
        }
        let fs = self.fs.iter().map(|spec| spec.resolve(q)).collect::<Result<_>>()?;
        Ok((q, fs))
    }

    pub fn build(&self, m: usize, max_n: u64) -> Result<DigitalKroneckerConfig> {
        let (q, fs) = self.series()?;
        DigitalKroneckerConfig::new(q, fs, m, max_n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn q(n: u32) -> Prime {
        Prime::new(n).unwrap()
    }

    fn cfg_from(p: u32, digits: &[u32], m: usize, max_n: u64) -> DigitalKroneckerConfig {
        let f = LaurentSeries::from_digits(q(p), 1, digits, Some(64)).unwrap();
        DigitalKroneckerConfig::new(q(p), vec![f], m, max_n).unwrap()
    }

    fn random_cfg(p: u32, s: usize, m: usize, max_n: u64, seed: u64) -> DigitalKroneckerConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = (0..s).map(|_| sample_haar(q(p), 48, &mut rng)).collect();
        DigitalKroneckerConfig::new(q(p), fs, m, max_n).unwrap()
    }

    #[test]
    fn inverse_x_keeps_lowest_digit() {
        let cfg = cfg_from(2, &[1], 3, 16);
        let xs: Vec<f64> = (0..4).map(|n| point_via_laurent(&cfg, n).unwrap().coords[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn origin_and_hand_example() {
        let cfg = random_cfg(3, 2, 4, 81, 1);
        let p0 = point_via_laurent(&cfg, 0).unwrap();
        assert!(p0.digits.iter().flatten().all(|&d| d == 0));
        // {x (x^-1 + x^-2)} = x^-1
        let cfg = cfg_from(2, &[1, 1], 3, 8);
        assert_eq!(point_via_laurent(&cfg, 2).unwrap().coords, vec![0.5]);
    }

    #[test]
    fn hankel_rows() {
        let f = LaurentSeries::from_digits(q(2), 1, &[1, 0, 1], Some(12)).unwrap();
        let c = GeneratingMatrix::from_series(&f, 3, 4).unwrap();
        assert_eq!((0..4).map(|j| c.entry(0, j)).collect::<Vec<_>>(), vec![1, 0, 1, 0]);
        assert_eq!((0..4).map(|j| c.entry(1, j)).collect::<Vec<_>>(), vec![0, 1, 0, 0]);
        for r in 1..3 {
            for col in 0..3 {
                assert_eq!(c.entry(r, col), c.entry(r - 1, col + 1));
            }
        }
        assert_eq!(c.apply(&[], 3).unwrap(), vec![0, 0, 0]);
        assert!(matches!(c.apply(&[1; 5], 3), Err(Error::SlabTooSmall { .. })));
    }

    #[test]
    fn matrix_route_matches_laurent_route() {
        for (p, k) in [(2u32, 8u32), (3, 5), (5, 4)] {
            let max_n = q(p).pow(k);
            let cfg = random_cfg(p, 2, 6, max_n, p as u64);
            let mats = matrices_from_f(&cfg).unwrap();
            for n in 0..max_n {
                assert_eq!(
                    point_via_matrices(&mats, q(p), 6, n).unwrap(),
                    point_via_laurent(&cfg, n).unwrap(),
                    "q={p} n={n}"
                );
            }
        }
    }

    #[test]
    fn config_rejects_short_precision() {
        let f = LaurentSeries::from_digits(q(2), 1, &[1, 1], Some(6)).unwrap();
        // m = 3 and n < 8 (3 digits) need coefficients below index 7
        assert!(matches!(
            DigitalKroneckerConfig::new(q(2), vec![f.clone()], 3, 8),
            Err(Error::InsufficientPrecision { .. })
        ));
        assert!(DigitalKroneckerConfig::new(q(2), vec![f], 3, 4).is_ok());
        let g = LaurentSeries::from_digits(q(2), 0, &[1], Some(20)).unwrap();
        assert!(DigitalKroneckerConfig::new(q(2), vec![g], 3, 4).is_err());
    }

    #[test]
    fn classical_examples() {
        assert!((classical_kronecker(&[2f64.sqrt()], 1)[0] - 0.41421356).abs() < 1e-8);
        assert_eq!(classical_kronecker(&[2f64.sqrt(), 0.3], 0), vec![0.0, 0.0]);
        assert_eq!(classical_kronecker(&[0.5], 3), vec![0.5]);
    }

    #[test]
    fn block_generation() {
        let cfg = random_cfg(2, 2, 5, 32, 3);
        let one = generate_block(&cfg, 1).unwrap();
        assert_eq!(one[0].coords, vec![0.0, 0.0]);
        let block = generate_block(&cfg, 32).unwrap();
        assert_eq!(block.len(), 32);
        for (n, pt) in block.iter().enumerate() {
            assert_eq!(*pt, point_via_laurent(&cfg, n as u64).unwrap());
        }
        assert_eq!(block, generate_block(&cfg, 32).unwrap());
        assert!(generate_block(&cfg, 0).is_err());
        assert!(generate_block(&cfg, 1 << 40).is_err());
    }

    #[test]
    fn incremental_numerators_match_points() {
        let cfg = random_cfg(3, 2, 5, 3u64.pow(6), 11);
        let grid = grid_numerators(&cfg, 3u64.pow(6)).unwrap();
        for n in 0..3u64.pow(6) {
            let pt = point_via_laurent(&cfg, n).unwrap();
            assert_eq!(&grid[2 * n as usize..2 * n as usize + 2], &pt.grid_numerators(q(3))[..]);
        }
        let tail = grid_numerators_range(&cfg, 100, 300).unwrap();
        assert_eq!(&tail[..], &grid[200..600]);
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = random_cfg(2, 2, 18, 1 << 17, 8);
        let par = grid_numerators(&cfg, 1 << 17).unwrap();
        let ser = grid_numerators_range(&cfg, 0, 1 << 17).unwrap();
        assert_eq!(par, ser);
    }

    #[test]
    fn digit_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for p in [2u32, 3, 5] {
            let qq = q(p);
            let max_n = qq.pow(6);
            let cfg = random_cfg(p, 2, 8, max_n, 40 + p as u64);
            for _ in 0..200 {
                let a = rng.gen_range(0..max_n);
                let b = rng.gen_range(0..max_n);
                let sum = (&Polynomial::from_int(a, qq) + &Polynomial::from_int(b, qq)).to_int();
                let (pa, pb, ps) = (
                    point_via_laurent(&cfg, a).unwrap(),
                    point_via_laurent(&cfg, b).unwrap(),
                    point_via_laurent(&cfg, sum).unwrap(),
                );
                for j in 0..2 {
                    let added: Vec<u32> =
                        pa.digits[j].iter().zip(&pb.digits[j]).map(|(&x, &y)| qq.add(x, y)).collect();
                    assert_eq!(ps.digits[j], added);
                }
            }
        }
    }

    #[test]
    fn first_digit_balance() {
        for p in [2u32, 3] {
            let qq = q(p);
            let k = 5;
            let mut digits = vec![1u32];
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
            digits.extend((0..30).map(|_| rng.gen_range(0..p)));
            let cfg = cfg_from(p, &digits, 3, qq.pow(k));
            let mut counts = vec![0u64; p as usize];
            for n in 0..qq.pow(k) {
                counts[point_via_laurent(&cfg, n).unwrap().digits[0][0] as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == qq.pow(k - 1)), "{counts:?}");
        }
    }

    #[test]
    fn config_file_schema() {
        let text = r#"{"q":2,"s":2,"fs":[{"q":2,"digits":[1],"precision_end":40},{"random":true,"seed":5,"precision":40}]}"#;
        let file: SequenceFile = serde_json::from_str(text).unwrap();
        let cfg = file.build(4, 16).unwrap();
        assert_eq!(cfg.s(), 2);
        let again: SequenceFile = serde_json::from_str(text).unwrap();
        assert_eq!(again.build(4, 16).unwrap(), cfg);
        let bad = r#"{"q":2,"s":1,"fs":[{"random":false,"seed":5,"precision":40}]}"#;
        let file: SequenceFile = serde_json::from_str(bad).unwrap();
        assert!(file.build(4, 16).is_err());
    }
}
