//! Star discrepancy of finite point sets in `[0,1)^s`, the Erdős–Turán–Koksma
//! bound, and the seed-averaged discrepancy experiment.
//!
//! Discrepancy here is taken over boxes anchored at the origin,
//! `[0, b_1) x .. x [0, b_s)`. Coordinates are exact rationals sharing one
//! denominator, and exact values come back as `Ratio<i128>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{Generator, OutputPoint};
use crate::orbit::decode;
use crate::spectral::{additive_character, KahanSum, Regime};
use crate::system::TriangularSystem;

/// Largest point count accepted by [`discrepancy_grid_exact`].
pub const GRID_MAX_POINTS: usize = 300;
/// Largest dimension accepted by [`discrepancy_grid_exact`].
pub const GRID_MAX_DIM: usize = 3;

pub type Exact = Ratio<i128>;

/// `N` points of `[0,1)^s` with coordinates `num / denom`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    dim: usize,
    denom: u64,
    nums: Vec<u64>,
}

impl PointSet {
    /// `nums` holds the points back to back, `dim` numerators each.
    pub fn new(dim: usize, denom: u64, nums: Vec<u64>) -> Result<Self> {
        if dim == 0 || denom == 0 {
            return Err(Error::InvalidArgument(
                "dimension and denominator must be positive".into(),
            ));
        }
        if nums.is_empty() || !nums.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "need a positive multiple of {dim} coordinates, got {}",
                nums.len()
            )));
        }
        if let Some(&bad) = nums.iter().find(|&&v| v >= denom) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {bad}/{denom} outside [0,1)"
            )));
        }
        Ok(PointSet { dim, denom, nums })
    }

    /// Scales generator outputs `u / p` into a point set.
    pub fn from_outputs(points: &[OutputPoint]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty point set".into()))?;
        let nums = points
            .iter()
            .flat_map(|pt| pt.numerators.iter().copied())
            .collect();
        PointSet::new(first.dim(), first.modulus, nums)
    }

    /// Reads one point per line, comma separated. A field is a fraction
    /// `a/b`, a decimal `0.xyz`, or an integer numerator over `modulus`.
    pub fn parse_csv(text: &str, modulus: Option<u64>) -> Result<Self> {
        let mut rows: Vec<Vec<(u128, u128)>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .map(|f| parse_coordinate(f, modulus))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::Parse(msg) => Error::Parse(format!("line {}: {msg}", lineno + 1)),
                    other => other,
                })?;
            if let Some(prev) = rows.first() {
                if prev.len() != row.len() {
                    return Err(Error::Parse(format!(
                        "line {}: expected {} coordinates, found {}",
                        lineno + 1,
                        prev.len(),
                        row.len()
                    )));
                }
            }
            rows.push(row);
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut denom: u128 = 1;
        for &(_, d) in rows.iter().flatten() {
            denom = lcm(denom, d);
            if denom > u64::MAX as u128 {
                return Err(Error::InvalidArgument(
                    "common denominator exceeds 64 bits".into(),
                ));
            }
        }
        let nums = rows
            .iter()
            .flatten()
            .map(|&(n, d)| (n * (denom / d)) as u64)
            .collect();
        PointSet::new(dim.max(1), denom as u64, nums)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nums.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nums.is_empty()
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn point(&self, i: usize) -> &[u64] {
        &self.nums[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[u64]> {
        self.nums.chunks_exact(self.dim)
    }

    /// First `n` points.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        PointSet::new(
            self.dim,
            self.denom,
            self.nums[..n.min(self.len()) * self.dim].to_vec(),
        )
    }

    /// `N * denom^s`, the common denominator of exact results.
    fn scale(&self) -> Result<i128> {
        (self.denom as i128)
            .checked_pow(self.dim as u32)
            .and_then(|d| d.checked_mul(self.len() as i128))
            .filter(|&v| v < (1i128 << 120))
            .ok_or_else(|| {
                Error::InvalidArgument("point set too large for exact arithmetic".into())
            })
    }
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u128, b: u128) -> u128 {
    a / gcd(a, b) * b
}

fn parse_coordinate(field: &str, modulus: Option<u64>) -> Result<(u128, u128)> {
    let bad = || Error::Parse(format!("bad coordinate {field:?}"));
    let (n, d) = if let Some((n, d)) = field.split_once('/') {
        (
            n.trim().parse::<u128>().map_err(|_| bad())?,
            d.trim().parse::<u128>().map_err(|_| bad())?,
        )
    } else if let Some((int, frac)) = field.split_once('.') {
        if !(int.is_empty() || int == "0")
            || frac.len() > 18
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let d = 10u128.pow(frac.len() as u32);
        (
            if frac.is_empty() {
                0
            } else {
                frac.parse().map_err(|_| bad())?
            },
            d,
        )
    } else if field == "0" {
        (0, 1)
    } else {
        let n = field.parse::<u128>().map_err(|_| bad())?;
        let d = modulus
            .ok_or_else(|| Error::Parse(format!("integer coordinate {field:?} needs a modulus")))?;
        (n, d as u128)
    };
    if d == 0 || n >= d {
        return Err(Error::Parse(format!("coordinate {field:?} outside [0,1)")));
    }
    let g = gcd(n, d);
    Ok((n / g, d / g))
}

/// One-dimensional star discrepancy from the sorted coordinates:
/// `max_i max(i/N - x_(i), x_(i) - (i-1)/N)`.
pub fn star_discrepancy_1d(ps: &PointSet) -> Result<Exact> {
    if ps.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "1d discrepancy needs dimension 1, got {}",
            ps.dim()
        )));
    }
    let scale = ps.scale()?;
    let n = ps.len() as i128;
    let d = ps.denom as i128;
    let mut xs = ps.nums.clone();
    xs.sort_unstable();
    let best = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (i, x) = (i as i128, x as i128);
            ((i + 1) * d - n * x).max(n * x - i * d)
        })
        .max()
        .unwrap_or(0);
    Ok(Exact::new(best, scale))
}

/// Exact star discrepancy by scanning every box corner on the coordinate grid.
///
/// Both sides of the supremum are taken: points strictly inside a corner at
/// the grid value, and points up to and including it (the limit of corners
/// just above). Needs `s <= 3` and `N <= 300`.
pub fn discrepancy_grid_exact(ps: &PointSet) -> Result<Exact> {
    let s = ps.dim();
    let n = ps.len();
    if s > GRID_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "grid method supports dimension <= {GRID_MAX_DIM}, got {s}"
        )));
    }
    if n > GRID_MAX_POINTS {
        return Err(Error::budget(
            "grid discrepancy points",
            n as u128,
            GRID_MAX_POINTS as u128,
        ));
    }
    let scale = ps.scale()?;
    let d = ps.denom as i128;
    let ds = d.pow(s as u32);
    let n_i = n as i128;

    // Per-axis grid of distinct coordinates plus 1, and each point's rank on it.
    let mut grids: Vec<Vec<u64>> = Vec::with_capacity(s);
    let mut ranks = vec![0usize; n * s];
    for j in 0..s {
        let mut g: Vec<u64> = ps.points().map(|pt| pt[j]).collect();
        g.push(ps.denom);
        g.sort_unstable();
        g.dedup();
        for (i, pt) in ps.points().enumerate() {
            ranks[i * s + j] = g.binary_search(&pt[j]).expect("coordinate is on its grid");
        }
        grids.push(g);
    }

    let last = s - 1;
    let g_last = &grids[last];
    let mut open = vec![0i128; g_last.len()];
    let mut closed = vec![0i128; g_last.len()];
    let mut t = vec![0usize; last];
    let mut best = 0i128;
    loop {
        open.fill(0);
        closed.fill(0);
        for i in 0..n {
            let r = &ranks[i * s..(i + 1) * s];
            if (0..last).all(|j| r[j] < t[j]) {
                open[r[last]] += 1;
            }
            if (0..last).all(|j| r[j] <= t[j]) {
                closed[r[last]] += 1;
            }
        }
        let head_vol: i128 = (0..last).map(|j| grids[j][t[j]] as i128).product();
        let (mut below, mut upto) = (0i128, 0i128);
        for (tl, &g) in g_last.iter().enumerate() {
            upto += closed[tl];
            let vol = head_vol * g as i128 * n_i;
            best = best.max(vol - below * ds).max(upto * ds - vol);
            below += open[tl];
        }

        // odometer over the leading axes
        let mut j = 0;
        loop {
            if j == last {
                return Ok(Exact::new(best, scale));
            }
            t[j] += 1;
            if t[j] < grids[j].len() {
                break;
            }
            t[j] = 0;
            j += 1;
        }
    }
}

/// `prod_j max(|a_j|, 1)`.
pub fn r_weight(a: &[i64]) -> u64 {
    a.iter().map(|&v| v.unsigned_abs().max(1)).product()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtkBound {
    pub l: u64,
    /// `1 / L`
    pub truncation: f64,
    /// `(1/N) sum_{0 < |a| <= L} |sum_n e(a . x_n)| / r(a)`
    pub sum_term: f64,
}

impl EtkBound {
    pub fn bound(&self) -> f64 {
        self.truncation + self.sum_term
    }
}

/// The bracketed right side of the Erdős–Turán–Koksma inequality, without
/// its unspecified constant. Costs `(2L+1)^s N` character evaluations.
pub fn etk_bound(ps: &PointSet, l: u64, budget: u64) -> Result<EtkBound> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("L must exceed 1, got {l}")));
    }
    let s = ps.dim();
    let side = 2 * l as u128 + 1;
    let work = side
        .checked_pow(s as u32)
        .and_then(|v| v.checked_mul(ps.len() as u128))
        .unwrap_or(u128::MAX);
    if work > budget as u128 {
        return Err(Error::budget(
            "ETK character evaluations",
            work,
            budget as u128,
        ));
    }
    let count = side.pow(s as u32) as u64;
    let d = ps.denom as i128;
    let l_i = l as i64;
    let terms: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|code| {
            let mut a = vec![0i64; s];
            let mut c = code;
            for v in a.iter_mut() {
                *v = (c % side as u64) as i64 - l_i;
                c /= side as u64;
            }
            if a.iter().all(|&v| v == 0) {
                return 0.0;
            }
            let sum: KahanSum = ps
                .points()
                .map(|pt| {
                    let r = a.iter().zip(pt).fold(0i128, |acc, (&aj, &x)| {
                        (acc + aj as i128 * x as i128).rem_euclid(d)
                    });
                    additive_character(r as i64, ps.denom)
                })
                .collect();
            sum.value().norm() / r_weight(&a) as f64
        })
        .collect();
    let total: f64 = terms.iter().sum();
    Ok(EtkBound {
        l,
        truncation: 1.0 / l as f64,
        sum_term: total / ps.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    OneDim,
    Grid,
    Etk,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d" => Ok(Method::OneDim),
            "grid" => Ok(Method::Grid),
            "etk" => Ok(Method::Etk),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?}, expected 1d, grid or etk"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::OneDim => "1d-exact",
            Method::Grid => "grid-exact",
            Method::Etk => "etk-bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub method: Method,
    pub points: usize,
    pub dim: usize,
    /// Set by the exact methods.
    pub exact: Option<Exact>,
    pub lower: f64,
    pub upper: f64,
    pub etk: Option<EtkBound>,
}

pub fn discrepancy(
    ps: &PointSet,
    method: Method,
    l: u64,
    budget: u64,
) -> Result<DiscrepancyReport> {
    let (exact, etk) = match method {
        Method::OneDim => (Some(star_discrepancy_1d(ps)?), None),
        Method::Grid => (Some(discrepancy_grid_exact(ps)?), None),
        Method::Etk => (None, Some(etk_bound(ps, l, budget)?)),
    };
    let (lower, upper) = match (exact, etk) {
        (Some(v), _) => (to_f64(v), to_f64(v)),
        (None, Some(e)) => (0.0, e.bound()),
        (None, None) => unreachable!(),
    };
    Ok(DiscrepancyReport {
        method,
        points: ps.len(),
        dim: ps.dim(),
        exact,
        lower,
        upper,
        etk,
    })
}

pub fn to_f64(v: Exact) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// Comparison function for the seed-averaged bound, without constants:
/// `N^{-1/2} (ln N)^{m+1} ln p` when `N^{m+1} <= p`, otherwise
/// `p^{-1/(2(m+1))} (ln N)^{m+1} ln p`.
pub fn average_bound(n: u64, p: u64, m: usize) -> (f64, Regime) {
    let (nf, pf, e) = (n as f64, p as f64, m as i32 + 1);
    let logs = nf.ln().powi(e) * pf.ln();
    let short = (n as u128)
        .checked_pow(e as u32)
        .is_some_and(|v| v <= p as u128);
    if short {
        (logs / nf.sqrt(), Regime::Short)
    } else {
        (logs * pf.powf(-1.0 / (2.0 * e as f64)), Regime::Long)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageRow {
    pub n: usize,
    pub bound: f64,
    pub regime: Regime,
    pub mean: Exact,
    pub min: Exact,
    pub max: Exact,
    /// Fraction of seeds with `D_N > t * bound`, one entry per threshold.
    pub exceedance: Vec<f64>,
    /// Distinct discrepancy values and how many seeds hit each.
    pub distribution: BTreeMap<Exact, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageReport {
    pub p: u64,
    pub m: usize,
    pub seeds: u64,
    pub thresholds: Vec<f64>,
    /// Whether `s_{0,1} .. s_{m-1,m} != 0` holds for the system.
    pub precondition: bool,
    pub rows: Vec<AverageRow>,
}

impl AverageReport {
    pub fn means_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean < w[0].mean)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,regime,bound,mean,min,max");
        for t in &self.thresholds {
            let _ = write!(out, ",exceed_t{t}");
        }
        out.push('\n');
        for r in &self.rows {
            let regime = match r.regime {
                Regime::Short => "short",
                Regime::Long => "long",
            };
            let _ = write!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.n,
                regime,
                r.bound,
                to_f64(r.mean),
                to_f64(r.min),
                to_f64(r.max)
            );
            for e in &r.exceedance {
                let _ = write!(out, ",{e:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn distribution_csv(&self) -> String {
        let mut out = String::from("N,discrepancy,exact,seeds\n");
        for r in &self.rows {
            for (v, c) in &r.distribution {
                let _ = writeln!(out, "{},{:.9},{},{c}", r.n, to_f64(*v), v);
            }
        }
        out
    }
}

/// Computes `D_N` of the first `N` emitted points for every seed in
/// F_p^{m+1} and every `N` in `n_list`, then summarizes per `N`.
pub fn average_discrepancy_experiment(
    sys: &TriangularSystem,
    n_list: &[usize],
    thresholds: &[f64],
    budget: u64,
) -> Result<AverageReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::InvalidArgument("N values must be positive".into()));
    }
    let p = sys.field().modulus();
    let m = sys.m();
    let seeds = (p as u128)
        .checked_pow(sys.nvars() as u32)
        .unwrap_or(u128::MAX);
    if seeds > budget as u128 {
        return Err(Error::budget("seed enumeration", seeds, budget as u128));
    }
    let seeds = seeds as u64;
    let n_max = *n_list.iter().max().expect("nonempty");
    if m > 1 && n_max > GRID_MAX_POINTS {
        return Err(Error::budget(
            "grid discrepancy points",
            n_max as u128,
            GRID_MAX_POINTS as u128,
        ));
    }

    let per_seed: Vec<Vec<Exact>> = (0..seeds)
        .into_par_iter()
        .map(|idx| {
            let mut seed = vec![0; sys.nvars()];
            decode(idx, p, &mut seed);
            let mut gen = Generator::new(sys, &seed)?;
            let all = PointSet::from_outputs(&gen.emit(n_max))?;
            n_list
                .iter()
                .map(|&n| {
                    let ps = all.prefix(n)?;
                    if m == 1 {
                        star_discrepancy_1d(&ps)
                    } else {
                        discrepancy_grid_exact(&ps)
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let rows = n_list
        .iter()
        .enumerate()
        .map(|(col, &n)| {
            let (bound, regime) = average_bound(n as u64, p, m);
            let mut distribution = BTreeMap::new();
            let mut sum = Exact::from_integer(0);
            for vals in &per_seed {
                *distribution.entry(vals[col]).or_insert(0u64) += 1;
                sum += vals[col];
            }
            let exceedance = thresholds
                .iter()
                .map(|t| {
                    let over = per_seed
                        .iter()
                        .filter(|v| to_f64(v[col]) > t * bound)
                        .count();
                    over as f64 / seeds as f64
                })
                .collect();
            AverageRow {
                n,
                bound,
                regime,
                mean: sum / seeds as i128,
                min: *distribution.keys().next().expect("seeds exist"),
                max: *distribution.keys().next_back().expect("seeds exist"),
                exceedance,
                distribution,
            }
        })
        .collect();
    Ok(AverageReport {
        p,
        m,
        seeds,
        thresholds: thresholds.to_vec(),
        precondition: sys.has_nonzero_chain_degrees(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use crate::system::{make_nonresidue_system, NonresidueFamily};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: i128, d: i128) -> Exact {
        Exact::new(n, d)
    }

    /// Every grid corner, counting points by direct comparison.
    fn naive(ps: &PointSet) -> Exact {
        let s = ps.dim();
        let d = ps.denom as i128;
        let n = ps.len() as i128;
        let grids: Vec<Vec<u64>> = (0..s)
            .map(|j| {
                let mut g: Vec<u64> = ps.points().map(|p| p[j]).collect();
                g.push(ps.denom);
                g.sort_unstable();
                g.dedup();
                g
            })
            .collect();
        let mut corners: Vec<Vec<u64>> = vec![vec![]];
        for g in &grids {
            corners = corners
                .into_iter()
                .flat_map(|c| {
                    g.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        let mut best = q(0, 1);
        for c in corners {
            let vol = c.iter().fold(q(1, 1), |acc, &v| acc * q(v as i128, d));
            let lt = ps
                .points()
                .filter(|p| p.iter().zip(&c).all(|(x, b)| x < b))
                .count() as i128;
            let le = ps
                .points()
                .filter(|p| p.iter().zip(&c).all(|(x, b)| x <= b))
                .count() as i128;
            best = best.max(vol - q(lt, n)).max(q(le, n) - vol);
        }
        best
    }

    fn random_set(rng: &mut ChaCha8Rng, dim: usize, n: usize, denom: u64) -> PointSet {
        let nums = (0..n * dim).map(|_| rng.gen_range(0..denom)).collect();
        PointSet::new(dim, denom, nums).unwrap()
    }

    #[test]
    fn classical_values() {
        let half = PointSet::new(1, 2, vec![1]).unwrap();
        assert_eq!(star_discrepancy_1d(&half).unwrap(), q(1, 2));
        assert_eq!(discrepancy_grid_exact(&half).unwrap(), q(1, 2));
        for n in 1..40u64 {
            let ps = PointSet::new(1, n, (0..n).collect()).unwrap();
            assert_eq!(star_discrepancy_1d(&ps).unwrap(), q(1, n as i128));
            assert_eq!(discrepancy_grid_exact(&ps).unwrap(), q(1, n as i128));
        }
        let corner = PointSet::new(2, 2, vec![1, 1]).unwrap();
        assert_eq!(discrepancy_grid_exact(&corner).unwrap(), q(3, 4));
        assert_eq!(naive(&corner), q(3, 4));
    }

    #[test]
    fn coincident_points() {
        for dim in 1..=3 {
            for n in 1..6 {
                let ps = PointSet::new(dim, 7, vec![0; n * dim]).unwrap();
                let d = discrepancy_grid_exact(&ps).unwrap();
                assert!(d >= q(1, 1) - q(1, n as i128));
            }
        }
    }

    #[test]
    fn grid_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let dim = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=12);
            let denom = rng.gen_range(2..=11);
            let ps = random_set(&mut rng, dim, n, denom);
            assert_eq!(discrepancy_grid_exact(&ps).unwrap(), naive(&ps), "{ps:?}");
        }
    }

    #[test]
    fn one_dim_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..=100);
            let ps = random_set(&mut rng, 1, n, 97);
            assert_eq!(
                star_discrepancy_1d(&ps).unwrap(),
                discrepancy_grid_exact(&ps).unwrap()
            );
        }
    }

    #[test]
    fn grid_limits() {
        let ps = PointSet::new(4, 5, vec![1; 4]).unwrap();
        assert!(discrepancy_grid_exact(&ps).is_err());
        let ps = PointSet::new(1, 5, vec![1; 301]).unwrap();
        assert!(matches!(
            discrepancy_grid_exact(&ps),
            Err(Error::Budget { .. })
        ));
        assert!(star_discrepancy_1d(&PointSet::new(2, 5, vec![1, 1]).unwrap()).is_err());
    }

    #[test]
    fn point_set_validation() {
        assert!(PointSet::new(1, 5, vec![]).is_err());
        assert!(PointSet::new(2, 5, vec![1, 2, 3]).is_err());
        assert!(PointSet::new(1, 5, vec![5]).is_err());
    }

    #[test]
    fn csv_input() {
        let ps = PointSet::parse_csv("0.5, 1/4\n0.25,0\n", None).unwrap();
        assert_eq!(ps.dim(), 2);
        assert_eq!(ps.denom(), 4);
        assert_eq!(ps.point(0), &[2, 1]);
        let ps = PointSet::parse_csv("2\n4\n4\n", Some(5)).unwrap();
        assert_eq!(ps.point(2), &[4]);
        assert!(PointSet::parse_csv("2\n", None).is_err());
        assert!(PointSet::parse_csv("1.0\n", None).is_err());
        assert!(PointSet::parse_csv("0.5\n0.5,0.5\n", None).is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(r_weight(&[2, 3]), 6);
        assert_eq!(r_weight(&[0, 5]), 5);
        assert_eq!(r_weight(&[0, 0, -4]), 4);
    }

    #[test]
    fn etk_on_lattice() {
        // exponential sums over {i/N} vanish unless N | a
        let ps = PointSet::new(1, 16, (0..16).collect()).unwrap();
        let e = etk_bound(&ps, 15, u64::MAX).unwrap();
        assert!(e.sum_term < 1e-12);
        let e = etk_bound(&ps, 16, u64::MAX).unwrap();
        assert!((e.sum_term - 2.0 / 16.0).abs() < 1e-12);
        assert!(etk_bound(&ps, 1, u64::MAX).is_err());
        assert!(etk_bound(&ps, 8, 10).is_err());
    }

    #[test]
    fn etk_against_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..30 {
            let dim = rng.gen_range(1..=2);
            let n = rng.gen_range(4..=40);
            let ps = random_set(&mut rng, dim, n, 101);
            let exact = to_f64(discrepancy_grid_exact(&ps).unwrap());
            let bound = etk_bound(&ps, 8, u64::MAX).unwrap().bound();
            worst = worst.max(exact / bound);
        }
        assert!(worst.is_finite() && worst > 0.0);
        assert!(worst <= 1.0, "raw bound below exact value, ratio {worst}");
    }

    #[test]
    fn average_experiment_single_point() {
        let f = PrimeField::new(7).unwrap();
        let sys = make_nonresidue_system(f, 1, NonresidueFamily::Chain, &[1], 1, 1).unwrap();
        let rep = average_discrepancy_experiment(&sys, &[1, 2, 7], &[0.5, 1.0], 1000).unwrap();
        assert_eq!(rep.seeds, 49);
        // a single point u/p has star discrepancy max(u, p - u)/p
        let expect = (0..7i128).map(|u| q(u.max(7 - u), 7)).sum::<Exact>() / 7;
        assert_eq!(rep.rows[0].mean, expect);
        assert_eq!(rep.rows[0].exceedance, vec![1.0, 1.0]);
        assert!(rep
            .rows
            .iter()
            .all(|r| r.min >= q(0, 1) && r.max <= q(1, 1)));
        assert!(rep.precondition);
        assert!(rep
            .to_csv()
            .starts_with("N,regime,bound,mean,min,max,exceed_t0.5,exceed_t1\n"));
    }

    #[test]
    fn average_experiment_two_dims() {
        let f = PrimeField::new(3).unwrap();
        let sys = make_nonresidue_system(f, 2, NonresidueFamily::Chain, &[1, 2], 1, 1).unwrap();
        let rep = average_discrepancy_experiment(&sys, &[1, 5], &[1.0], 1000).unwrap();
        // a single point (x, y) has star discrepancy max(1 - xy, x, y)
        let mut sum = q(0, 1);
        for idx in 0..27u64 {
            let (x, y) = (q((idx % 3) as i128, 3), q((idx / 3 % 3) as i128, 3));
            sum += (q(1, 1) - x * y).max(x).max(y);
        }
        assert_eq!(rep.rows[0].mean, sum / 27);
        assert!(average_discrepancy_experiment(&sys, &[0], &[1.0], 1000).is_err());
        assert!(average_discrepancy_experiment(&sys, &[1], &[1.0], 26).is_err());
    }

    #[test]
    fn bound_regimes() {
        // p = 31, m = 1: N^2 <= 31 up to N = 5
        assert_eq!(average_bound(5, 31, 1).1, Regime::Short);
        assert_eq!(average_bound(6, 31, 1).1, Regime::Long);
        let (b, _) = average_bound(4, 31, 1);
        assert!((b - 4f64.ln().powi(2) * 31f64.ln() / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn grid_in_unit_interval(dim in 1usize..=3, nums in proptest::collection::vec(0u64..13, 1..30)) {
            let len = nums.len() / dim * dim;
            prop_assume!(len > 0);
            let ps = PointSet::new(dim, 13, nums[..len].to_vec()).unwrap();
            let d = discrepancy_grid_exact(&ps).unwrap();
            prop_assert!(d >= q(0, 1) && d <= q(1, 1));
        }

        #[test]
        fn duplicated_point_recomputed(nums in proptest::collection::vec(0u64..17, 2..20), pick in 0usize..10, times in 1usize..10) {
            let ps = PointSet::new(2, 17, nums[..nums.len() / 2 * 2].to_vec()).unwrap();
            let i = pick % ps.len();
            let mut more = ps.nums.clone();
            for _ in 0..times {
                more.extend_from_slice(ps.point(i));
            }
            let dup = PointSet::new(2, 17, more).unwrap();
            prop_assert_eq!(discrepancy_grid_exact(&dup).unwrap(), naive(&dup));
            prop_assert_eq!(discrepancy_grid_exact(&ps).unwrap(), naive(&ps));
        }

        #[test]
        fn etk_permutation_invariant(nums in proptest::collection::vec(0u64..31, 2..24), shift in 0usize..24) {
            let len = nums.len() / 2 * 2;
            let ps = PointSet::new(2, 31, nums[..len].to_vec()).unwrap();
            let mut rot: Vec<&[u64]> = ps.points().collect();
            let k = shift % rot.len();
            rot.rotate_left(k);
            rot.reverse();
            let other = PointSet::new(2, 31, rot.concat()).unwrap();
            let a = etk_bound(&ps, 4, u64::MAX).unwrap().bound();
            let b = etk_bound(&other, 4, u64::MAX).unwrap().bound();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
