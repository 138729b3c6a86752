//! Point-count discrepancy: local values and the grid star discrepancy.
//!
//! For points on `Q^s(q^m)` the supremum of `|D(x, N)|` over `[0,1]^s` is
//! attained as a limit at grid corners `r / q^m`, `r_j in 0..=q^m`: either
//! from below (half-open box, points with `p_j < r_j`) or from above (closed
//! box, points with `p_j <= r_j`). Both are read off one prefix-sum table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf_poly::Prime;
use crate::sequence::{grid_numerators, DigitalKroneckerConfig, SequencePoint};
use crate::Rational;

/// `N` points with coordinates `r_j / q^m`, stored as the numerators `r_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSetView {
    q: Prime,
    s: usize,
    m: u32,
    coords: Vec<u64>,
}

impl PointSetView {
    /// `coords` is row major, `s` numerators per point, each below `q^m`.
    pub fn new(q: Prime, s: usize, m: u32, coords: Vec<u64>) -> Result<Self> {
        if s == 0 {
            return Err(Error::Config("dimension s must be at least 1".into()));
        }
        if coords.len() % s != 0 {
            return Err(Error::LengthMismatch(coords.len(), s));
        }
        let side = q.pow(m);
        if let Some(&bad) = coords.iter().find(|&&c| c >= side) {
            return Err(Error::OutOfRange { value: bad, modulus: side as u32 });
        }
        Ok(PointSetView { q, s, m, coords })
    }

    /// First `n` points of the sequence at the configuration's resolution.
    pub fn from_config(cfg: &DigitalKroneckerConfig, n: u64) -> Result<Self> {
        if n > cfg.max_n() {
            return Err(Error::CountOutOfRange { n, available: cfg.max_n() });
        }
        let coords = grid_numerators(cfg, n)?;
        Self::new(cfg.q(), cfg.s(), cfg.m() as u32, coords)
    }

    pub fn from_points(q: Prime, m: u32, points: &[SequencePoint]) -> Result<Self> {
        let s = points.first().map_or(1, |p| p.digits.len());
        let mut coords = Vec::with_capacity(points.len() * s);
        for p in points {
            if p.digits.len() != s {
                return Err(Error::LengthMismatch(s, p.digits.len()));
            }
            if p.digits.iter().any(|d| d.len() != m as usize) {
                return Err(Error::Config(format!("points must carry exactly {m} digits")));
            }
            coords.extend(p.grid_numerators(q));
        }
        Self::new(q, s, m, coords)
    }

    pub fn q(&self) -> Prime {
        self.q
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.s
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[u64] {
        &self.coords[i * self.s..(i + 1) * self.s]
    }

    /// `q^m`, the number of grid values per coordinate.
    pub fn side(&self) -> u64 {
        self.q.pow(self.m)
    }

    fn check_count(&self, n: u64) -> Result<()> {
        if n > self.len() as u64 {
            return Err(Error::CountOutOfRange { n, available: self.len() as u64 });
        }
        Ok(())
    }
}

/// `#{n < N : x_n in [0, x)} - N x_1 ... x_s` for a real corner `x`.
pub fn local_discrepancy_brute(p: &PointSetView, x: &[f64], n: u64) -> Result<f64> {
    p.check_count(n)?;
    if x.len() != p.s {
        return Err(Error::LengthMismatch(p.s, x.len()));
    }
    let side = p.side() as f64;
    let count = (0..n as usize)
        .filter(|&i| p.point(i).iter().zip(x).all(|(&c, &xj)| (c as f64 / side) < xj))
        .count();
    Ok(count as f64 - n as f64 * x.iter().product::<f64>())
}

/// Exact `D(r / q^m, N)` for numerators `r_j in 0..=q^m`.
pub fn local_discrepancy_exact(p: &PointSetView, r: &[u64], n: u64) -> Result<Rational> {
    p.check_count(n)?;
    if r.len() != p.s {
        return Err(Error::LengthMismatch(p.s, r.len()));
    }
    let side = p.side();
    if let Some(&bad) = r.iter().find(|&&v| v > side) {
        return Err(Error::OutOfRange { value: bad, modulus: side as u32 });
    }
    let count = (0..n as usize)
        .filter(|&i| p.point(i).iter().zip(r).all(|(&c, &rj)| c < rj))
        .count() as i128;
    let vol: i128 = r.iter().map(|&v| v as i128).product();
    let scale = (side as i128).pow(p.s as u32);
    Ok(Rational::from_integer(count) - Rational::new(n as i128 * vol, scale))
}

/// Prefix counts over the `(q^m + 1)^s` grid corners for the first `N`
/// points. Entry `r` holds `#{n : x_n in [0, r/q^m)}`.
#[derive(Debug, Clone)]
pub struct LocalGrid {
    s: usize,
    side: u64,
    n: u64,
    prefix: Vec<u32>,
}

impl LocalGrid {
    pub fn new(p: &PointSetView, n: u64, budget: u128) -> Result<Self> {
        p.check_count(n)?;
        let side = p.side();
        let corners = (side as u128 + 1).pow(p.s as u32);
        if corners > budget {
            return Err(Error::BudgetExceeded { required: corners, budget });
        }
        let stride = side as usize + 1;
        let mut prefix = vec![0u32; corners as usize];
        for i in 0..n as usize {
            let idx: usize = p
                .point(i)
                .iter()
                .rev()
                .fold(0, |acc, &c| acc * stride + c as usize + 1);
            prefix[idx] += 1;
        }
        let mut step = 1usize;
        for _ in 0..p.s {
            for idx in 0..prefix.len() {
                if (idx / step) % stride != 0 {
                    prefix[idx] += prefix[idx - step];
                }
            }
            step *= stride;
        }
        Ok(LocalGrid { s: p.s, side, n, prefix })
    }

    fn index(&self, r: &[u64]) -> usize {
        let stride = self.side as usize + 1;
        r.iter().rev().fold(0, |acc, &v| acc * stride + v as usize)
    }

    /// Points in the half-open box `[0, r/q^m)`.
    pub fn open_count(&self, r: &[u64]) -> u64 {
        self.prefix[self.index(r)] as u64
    }

    /// Points in the closed box `[0, r/q^m]`.
    pub fn closed_count(&self, r: &[u64]) -> u64 {
        let up: Vec<u64> = r.iter().map(|&v| (v + 1).min(self.side)).collect();
        self.prefix[self.index(&up)] as u64
    }

    /// `q^{ms}`, the common denominator of all local values.
    pub fn scale(&self) -> i128 {
        (self.side as i128).pow(self.s as u32)
    }

    fn scaled_volume(&self, r: &[u64]) -> i128 {
        self.n as i128 * r.iter().map(|&v| v as i128).product::<i128>()
    }

    /// `q^{ms} D(r/q^m, N)` with the half-open box.
    pub fn scaled_open(&self, r: &[u64]) -> i128 {
        self.open_count(r) as i128 * self.scale() - self.scaled_volume(r)
    }

    /// `q^{ms}` times the closed-box limit of `D` at `r/q^m`.
    pub fn scaled_closed(&self, r: &[u64]) -> i128 {
        self.closed_count(r) as i128 * self.scale() - self.scaled_volume(r)
    }
}

/// Iterates `{0..bound}^s` with coordinate 0 varying fastest.
pub(crate) fn for_each_corner(s: usize, bound: u64, mut f: impl FnMut(&[u64])) {
    let mut r = vec![0u64; s];
    loop {
        f(&r);
        let mut j = 0;
        loop {
            if j == s {
                return;
            }
            r[j] += 1;
            if r[j] < bound {
                break;
            }
            r[j] = 0;
            j += 1;
        }
    }
}

/// `D(x, N)` for every `x in Q^s(q^m)`, coordinate 0 varying fastest.
pub fn local_grid_values(p: &PointSetView, n: u64, budget: u128) -> Result<Vec<f64>> {
    let grid = LocalGrid::new(p, n, budget)?;
    let scale = grid.scale() as f64;
    let mut out = Vec::with_capacity((p.side() as usize).pow(p.s as u32));
    for_each_corner(p.s, p.side(), |r| out.push(grid.scaled_open(r) as f64 / scale));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Walsh,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub q: u32,
    pub s: usize,
    pub m: u32,
    pub n: u64,
    pub method: Method,
    /// Largest `|D|` found; the true supremum unless `lower_bound` is set.
    pub star: f64,
    #[serde(with = "crate::rational_str::option", skip_serializing_if = "Option::is_none")]
    pub star_exact: Option<Rational>,
    /// Grid numerators of the maximising corner.
    pub argmax: Vec<u64>,
    /// Whether the maximum is the closed-box limit at `argmax`.
    pub argmax_closed: bool,
    /// Max of `|D(x, N)|` over `x in Q^s(q^m)` with half-open boxes only.
    pub open_grid_max: f64,
    pub lower_bound: bool,
    pub evaluations: u128,
}

/// Exact grid star discrepancy of the first `N` points.
pub fn star_discrepancy_grid(p: &PointSetView, n: u64, budget: u128) -> Result<DiscrepancyReport> {
    let grid = LocalGrid::new(p, n, budget)?;
    let side = p.side();
    let mut best = (-1i128, Vec::new(), false);
    let mut open_best = 0i128;
    for_each_corner(p.s, side + 1, |r| {
        let open = grid.scaled_open(r).abs();
        let closed = grid.scaled_closed(r).abs();
        if open > best.0 {
            best = (open, r.to_vec(), false);
        }
        if closed > best.0 {
            best = (closed, r.to_vec(), true);
        }
        if r.iter().all(|&v| v < side) {
            open_best = open_best.max(open);
        }
    });
    let scale = grid.scale();
    Ok(DiscrepancyReport {
        q: p.q.get(),
        s: p.s,
        m: p.m,
        n,
        method: Method::Brute,
        star: best.0 as f64 / scale as f64,
        star_exact: Some(Rational::new(best.0, scale)),
        argmax: best.1,
        argmax_closed: best.2,
        open_grid_max: open_best as f64 / scale as f64,
        lower_bound: false,
        evaluations: (side as u128 + 1).pow(p.s as u32),
    })
}

/// Lower bound on the star discrepancy from `samples` random grid corners,
/// for grids beyond the exact budget.
pub fn star_discrepancy_sampled(p: &PointSetView, n: u64, samples: u64, seed: u64) -> Result<DiscrepancyReport> {
    p.check_count(n)?;
    let side = p.side();
    let scale = (side as i128).pow(p.s as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (-1i128, vec![0; p.s], false);
    let mut open_best = 0i128;
    for _ in 0..samples {
        let r: Vec<u64> = (0..p.s).map(|_| rng.gen_range(0..=side)).collect();
        let (mut open, mut closed) = (0i128, 0i128);
        for i in 0..n as usize {
            let pt = p.point(i);
            if pt.iter().zip(&r).all(|(&c, &v)| c < v) {
                open += 1;
            }
            if pt.iter().zip(&r).all(|(&c, &v)| c <= v) {
                closed += 1;
            }
        }
        let vol = n as i128 * r.iter().map(|&v| v as i128).product::<i128>();
        let (open, closed) = ((open * scale - vol).abs(), (closed * scale - vol).abs());
        if open > best.0 {
            best = (open, r.clone(), false);
        }
        if closed > best.0 {
            best = (closed, r.clone(), true);
        }
        if r.iter().all(|&v| v < side) {
            open_best = open_best.max(open);
        }
    }
    let best_val = best.0.max(0);
    Ok(DiscrepancyReport {
        q: p.q.get(),
        s: p.s,
        m: p.m,
        n,
        method: Method::Sampled,
        star: best_val as f64 / scale as f64,
        star_exact: Some(Rational::new(best_val, scale)),
        argmax: best.1,
        argmax_closed: best.2,
        open_grid_max: open_best as f64 / scale as f64,
        lower_bound: true,
        evaluations: samples as u128,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: u32) -> Prime {
        Prime::new(n).unwrap()
    }

    fn two_points() -> PointSetView {
        // {0, 0.5} on the grid of quarters
        PointSetView::new(q(2), 1, 2, vec![0, 2]).unwrap()
    }

    #[test]
    fn brute_examples() {
        let p = two_points();
        assert_eq!(local_discrepancy_brute(&p, &[0.0], 2).unwrap(), 0.0);
        assert_eq!(local_discrepancy_brute(&p, &[0.75], 2).unwrap(), 0.5);
        let origin = PointSetView::new(q(3), 2, 1, vec![0, 0]).unwrap();
        assert_eq!(local_discrepancy_brute(&origin, &[1.0, 1.0], 1).unwrap(), 0.0);
        assert!(matches!(local_discrepancy_brute(&p, &[0.5], 3), Err(Error::CountOutOfRange { .. })));
        assert_eq!(local_discrepancy_exact(&p, &[3], 2).unwrap(), Rational::new(1, 2));
    }

    #[test]
    fn single_origin_point() {
        let p = PointSetView::new(q(2), 2, 2, vec![0, 0]).unwrap();
        let rep = star_discrepancy_grid(&p, 1, 1 << 20).unwrap();
        assert_eq!(rep.star_exact, Some(Rational::from_integer(1)));
        assert!(rep.argmax_closed);
        assert_eq!(rep.argmax, vec![0, 0]);
    }

    #[test]
    fn two_point_conventions() {
        let rep = star_discrepancy_grid(&two_points(), 2, 1 << 20).unwrap();
        // the closed-box limit just right of 0 counts the origin with no volume
        assert_eq!(rep.star, 1.0);
        assert_eq!(rep.open_grid_max, 0.5);
    }

    #[test]
    fn prefix_counts_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in 1..=3usize {
            let side = 9u64;
            let coords: Vec<u64> = (0..40 * s).map(|_| rng.gen_range(0..side)).collect();
            let p = PointSetView::new(q(3), s, 2, coords).unwrap();
            for n in [0u64, 1, 17, 40] {
                let grid = LocalGrid::new(&p, n, 1 << 20).unwrap();
                for_each_corner(s, side + 1, |r| {
                    let exact = local_discrepancy_exact(&p, r, n).unwrap();
                    assert_eq!(Rational::new(grid.scaled_open(r), grid.scale()), exact);
                    let closed = (0..n as usize)
                        .filter(|&i| p.point(i).iter().zip(r).all(|(&c, &v)| c <= v))
                        .count() as u64;
                    assert_eq!(grid.closed_count(r), closed);
                });
            }
        }
    }

    #[test]
    fn star_dominates_local_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<u64> = (0..60).map(|_| rng.gen_range(0..8)).collect();
        let p = PointSetView::new(q(2), 2, 3, coords).unwrap();
        let rep = star_discrepancy_grid(&p, 30, 1 << 20).unwrap();
        for v in local_grid_values(&p, 30, 1 << 20).unwrap() {
            assert!(v.abs() <= rep.star + 1e-15);
            assert!(v.abs() <= rep.open_grid_max + 1e-15);
        }
        let sampled = star_discrepancy_sampled(&p, 30, 200, 1).unwrap();
        assert!(sampled.lower_bound);
        assert!(sampled.star <= rep.star);
    }

    #[test]
    fn budget_guard() {
        let p = PointSetView::new(q(2), 3, 4, vec![0, 0, 0]).unwrap();
        assert!(matches!(star_discrepancy_grid(&p, 1, 1000), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn view_validation() {
        assert!(PointSetView::new(q(2), 1, 2, vec![4]).is_err());
        assert!(PointSetView::new(q(2), 2, 2, vec![1, 2, 3]).is_err());
        let pts = vec![SequencePoint::from_digits(vec![vec![1, 0], vec![0, 1]], q(2))];
        let p = PointSetView::from_points(q(2), 2, &pts).unwrap();
        assert_eq!(p.point(0), &[2, 1]);
    }
}
