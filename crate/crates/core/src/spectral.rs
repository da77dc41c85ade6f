//! Brute-force exponential sums over the whole state space.
//!
//! Everything here enumerates F_p^{m+1} (or a slice of it) and is meant for
//! small primes. Sums are accumulated in blocks with compensated summation
//! and the blocks are combined in a fixed order, so results do not depend on
//! the thread count.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::iterate::decompose;
use crate::kernel::StepMap;
use crate::orbit::decode;
use crate::system::TriangularSystem;

pub const DEFAULT_SUM_BUDGET: u64 = 100_000_000;

/// `exp(2 pi i z / modulus)`, with `z` reduced before the trig call.
///
/// # Panics
/// If `modulus == 0`.
pub fn additive_character(z: i64, modulus: u64) -> Complex64 {
    assert!(modulus >= 1, "modulus must be positive");
    let r = (z as i128).rem_euclid(modulus as i128) as u64;
    unit(r, modulus)
}

fn unit(r: u64, modulus: u64) -> Complex64 {
    if r == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * r == modulus {
        return Complex64::new(-1.0, 0.0);
    }
    Complex64::from_polar(1.0, TAU * (r as f64 / modulus as f64))
}

/// Compensated complex accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: Complex64,
    comp: Complex64,
}

impl KahanSum {
    pub fn add(&mut self, z: Complex64) {
        let y = z - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

impl FromIterator<Complex64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        iter.into_iter().for_each(|z| acc.add(z));
        acc
    }
}

const BLOCKS: u64 = 512;

/// `sum_{idx < total} f(state, idx)` over fixed blocks in parallel.
fn block_sum<S, I, F>(total: u64, init: I, f: F) -> Complex64
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, u64) -> Complex64 + Sync,
{
    let size = total.div_ceil(BLOCKS).max(1);
    let parts: Vec<Complex64> = (0..total.div_ceil(size))
        .into_par_iter()
        .map(|blk| {
            let mut state = init();
            (blk * size..((blk + 1) * size).min(total))
                .map(|idx| f(&mut state, idx))
                .collect::<KahanSum>()
                .value()
        })
        .collect();
    parts.into_iter().collect::<KahanSum>().value()
}

/// `e_p(t)` for every residue `t`.
fn phase_table(p: u64) -> Vec<Complex64> {
    (0..p).map(|t| unit(t, p)).collect()
}

/// Closed form of the complete sum `sum_{-(m-1)/2 <= a <= m/2} additive_character(ab)`.
pub fn complete_sum_closed_form(b: i64, modulus: u64) -> i64 {
    if (b as i128).rem_euclid(modulus as i128) == 0 {
        modulus as i64
    } else {
        0
    }
}

/// Evaluates the complete character sum numerically and checks it against
/// the closed form, failing with [`Error::NumericDrift`] beyond `1e-6 * m`.
pub fn complete_sum(b: i64, modulus: u64) -> Result<i64> {
    if modulus == 0 || modulus > i64::MAX as u64 {
        return Err(Error::InvalidArgument(format!(
            "modulus {modulus} out of range"
        )));
    }
    let lo = -((modulus as i64 - 1) / 2);
    let hi = modulus as i64 / 2;
    let sum = (lo..=hi)
        .map(|a| additive_character(((a as i128 * b as i128) % modulus as i128) as i64, modulus))
        .collect::<KahanSum>()
        .value();
    let expected = complete_sum_closed_form(b, modulus);
    let drift = (sum - Complex64::new(expected as f64, 0.0)).norm();
    if drift > 1e-6 * modulus as f64 {
        return Err(Error::NumericDrift {
            computed: sum.re,
            expected: expected as f64,
        });
    }
    Ok(sum.re.round() as i64)
}

/// `sum_{r = start+1}^{start+len} additive_character(c r)`.
pub fn partial_character_sum(modulus: u64, c: i64, start: i64, len: u64) -> Complex64 {
    let m = modulus as i128;
    (1..=len as i128)
        .map(|r| additive_character(((c as i128 * (start as i128 + r)) % m) as i64, modulus))
        .collect::<KahanSum>()
        .value()
}

/// `min(Q, m / |c|)`, the explicit form of the incomplete-sum bound.
pub fn incomplete_sum_bound(modulus: u64, c: i64, len: u64) -> f64 {
    if c == 0 {
        len as f64
    } else {
        (len as f64).min(modulus as f64 / c.unsigned_abs() as f64)
    }
}

/// A nonzero coefficient vector over coordinates `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefVector {
    modulus: u64,
    values: Vec<u64>,
}

impl CoefVector {
    pub fn new(field: PrimeField, values: &[i64]) -> Result<Self> {
        let values: Vec<u64> = values
            .iter()
            .map(|&v| field.reduce_i128(v as i128))
            .collect();
        if values.iter().all(|&v| v == 0) {
            return Err(Error::InvalidArgument(
                "coefficient vector must be nonzero".into(),
            ));
        }
        Ok(CoefVector {
            modulus: field.modulus(),
            values,
        })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// Index of the first nonzero coefficient.
    pub fn leading_index(&self) -> usize {
        self.values
            .iter()
            .position(|&v| v != 0)
            .expect("nonzero by construction")
    }

    fn check(&self, sys: &TriangularSystem) -> Result<()> {
        if self.modulus != sys.field().modulus() {
            return Err(Error::ModulusMismatch(self.modulus, sys.field().modulus()));
        }
        if self.values.len() != sys.m() {
            return Err(Error::VarCountMismatch {
                expected: sys.m(),
                found: self.values.len(),
            });
        }
        Ok(())
    }

    /// `sum_j a_j (x_j - y_j)` over the coordinates from `from` on.
    fn phase_diff(&self, field: PrimeField, x: &[u64], y: &[u64], from: usize) -> u64 {
        (from..self.values.len()).fold(0, |acc, j| {
            field.add(acc, field.mul(self.values[j], field.sub(x[j], y[j])))
        })
    }

    fn phase(&self, field: PrimeField, x: &[u64]) -> u64 {
        self.values
            .iter()
            .zip(x)
            .fold(0, |acc, (&a, &v)| field.add(acc, field.mul(a, v)))
    }
}

fn space_size(p: u64, dims: usize, budget: u64) -> Result<u64> {
    let total = (p as u128).checked_pow(dims as u32).unwrap_or(u128::MAX);
    if total > budget as u128 {
        return Err(Error::budget("state enumeration", total, budget as u128));
    }
    Ok(total as u64)
}

/// Scratch for running orbits from many starting points.
struct Walker {
    map: StepMap,
    x: Vec<u64>,
    tmp: Vec<u64>,
    at_l: Vec<u64>,
    at_k: Vec<u64>,
}

impl Walker {
    fn new(sys: &TriangularSystem) -> Self {
        let n = sys.nvars();
        Walker {
            map: StepMap::new(sys),
            x: vec![0; n],
            tmp: vec![0; n],
            at_l: vec![0; n],
            at_k: vec![0; n],
        }
    }

    /// Runs `k` steps from `self.x`, recording the states after `l` and `k` steps.
    fn run(&mut self, k: u64, l: u64) {
        for step in 0..k {
            if step == l {
                self.at_l.copy_from_slice(&self.x);
            }
            self.map.advance(&mut self.x, &mut self.tmp);
        }
        if l == k {
            self.at_l.copy_from_slice(&self.x);
        }
        self.at_k.copy_from_slice(&self.x);
    }
}

fn check_kl(k: u64, l: u64) -> Result<()> {
    if k < l {
        return Err(Error::InvalidArgument(format!(
            "need k >= l, got k = {k}, l = {l}"
        )));
    }
    Ok(())
}

/// `sum_{x in F_p^{m+1}} e_p(sum_i a_i (f_i^(k)(x) - f_i^(l)(x)))` by direct enumeration.
pub fn difference_sum_direct(
    sys: &TriangularSystem,
    a: &CoefVector,
    k: u64,
    l: u64,
    budget: u64,
) -> Result<Complex64> {
    a.check(sys)?;
    check_kl(k, l)?;
    let field = sys.field();
    let p = field.modulus();
    let total = space_size(p, sys.nvars(), budget)?;
    let table = phase_table(p);
    Ok(block_sum(
        total,
        || Walker::new(sys),
        |w, idx| {
            decode(idx, p, &mut w.x);
            w.run(k, l);
            table[a.phase_diff(field, &w.at_k, &w.at_l, 0) as usize]
        },
    ))
}

/// The collapsed form of the same sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collapse {
    pub value: Complex64,
    /// First index `s` with `a_s != 0`.
    pub leading_index: usize,
    /// Points of F_p^{m-s} where `g_{s,k} = g_{s,l}`.
    pub zero_count: u64,
}

/// Sums over `x_0..x_s` analytically: only points `(x_{s+1}..x_m)` where
/// `g_{s,k} - g_{s,l}` vanishes survive, each weighted by `p^{s+1}`.
///
/// The values of `g_{s,k}` and `h_{s,k}` are read off the linear dependence
/// of `f_s^(k)` on `x_s` by running orbits from `x_s = 0` and `x_s = 1`.
pub fn difference_sum_collapsed(
    sys: &TriangularSystem,
    a: &CoefVector,
    k: u64,
    l: u64,
    budget: u64,
) -> Result<Collapse> {
    a.check(sys)?;
    check_kl(k, l)?;
    let field = sys.field();
    let p = field.modulus();
    let m = sys.m();
    let s = a.leading_index();
    let tail = m - s;
    let total = space_size(p, tail, budget)?;
    let table = phase_table(p);
    let a_s = a.values()[s];
    let zeros = AtomicU64::new(0);

    let inner = block_sum(
        total,
        || (Walker::new(sys), Walker::new(sys)),
        |(w0, w1), idx| {
            w0.x.fill(0);
            decode(idx, p, &mut w0.x[s + 1..]);
            w1.x.copy_from_slice(&w0.x);
            w1.x[s] = 1;
            w0.run(k, l);
            w1.run(k, l);
            let g_k = field.sub(w1.at_k[s], w0.at_k[s]);
            let g_l = field.sub(w1.at_l[s], w0.at_l[s]);
            if g_k != g_l {
                return Complex64::new(0.0, 0.0);
            }
            zeros.fetch_add(1, Ordering::Relaxed);
            let h_diff = field.sub(w0.at_k[s], w0.at_l[s]);
            let phase = field.add(
                field.mul(a_s, h_diff),
                a.phase_diff(field, &w0.at_k, &w0.at_l, s + 1),
            );
            table[phase as usize]
        },
    );
    Ok(Collapse {
        value: inner * (p as f64).powi(s as i32 + 1),
        leading_index: s,
        zero_count: zeros.into_inner(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceSumReport {
    pub k: u64,
    pub l: u64,
    pub direct: Complex64,
    pub collapsed: Collapse,
    /// `1e-6 * p^{m+1}`.
    pub tolerance: f64,
    /// `k^m p^m`, up to the unspecified constant.
    pub bound: f64,
}

impl DifferenceSumReport {
    pub fn agree(&self) -> bool {
        (self.direct - self.collapsed.value).norm() <= self.tolerance
    }

    pub fn ratio(&self) -> f64 {
        self.direct.norm() / self.bound
    }
}

/// Both routes of the sum, for `k >= l`.
pub fn difference_sum(
    sys: &TriangularSystem,
    a: &CoefVector,
    k: u64,
    l: u64,
    budget: u64,
) -> Result<DifferenceSumReport> {
    let direct = difference_sum_direct(sys, a, k, l, budget)?;
    let collapsed = difference_sum_collapsed(sys, a, k, l, budget)?;
    let p = sys.field().modulus() as f64;
    let m = sys.m() as i32;
    Ok(DifferenceSumReport {
        k,
        l,
        direct,
        collapsed,
        tolerance: 1e-6 * p.powi(m + 1),
        bound: (k.max(1) as f64).powi(m) * p.powi(m),
    })
}

/// Whether `g_{s,k} - g_{s,l}` is a nonzero polynomial, from symbolic iterates.
pub fn collapse_nontrivial(
    sys: &TriangularSystem,
    s: usize,
    k: usize,
    l: usize,
    max_terms: usize,
) -> Result<bool> {
    let gk = decompose(sys, s, k, max_terms)?.g;
    let gl = decompose(sys, s, l, max_terms)?.g;
    Ok(gk != gl)
}

/// `V_{a,c}(M, N)`: sum over all seeds of `|sum_{n<N} e_p(a . u_n) e_M(c n)|^2`.
pub fn orbit_power_sum(
    sys: &TriangularSystem,
    a: &CoefVector,
    c: i64,
    modulus: u64,
    n: u64,
    budget: u64,
) -> Result<f64> {
    orbit_power_sum_shifted(sys, a, c, modulus, n, 0, budget)
}

/// As [`orbit_power_sum`] over the window `n in [shift, shift + N)`.
#[allow(clippy::too_many_arguments)]
pub fn orbit_power_sum_shifted(
    sys: &TriangularSystem,
    a: &CoefVector,
    c: i64,
    modulus: u64,
    n: u64,
    shift: u64,
    budget: u64,
) -> Result<f64> {
    a.check(sys)?;
    if modulus == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let field = sys.field();
    let p = field.modulus();
    let states = space_size(p, sys.nvars(), budget)?;
    let work = states as u128 * (n + shift) as u128;
    if work > budget as u128 {
        return Err(Error::budget("orbit steps", work, budget as u128));
    }
    let table = phase_table(p);
    let twist: Vec<Complex64> = (0..n)
        .map(|t| additive_character(((c as i128 * t as i128) % modulus as i128) as i64, modulus))
        .collect();
    let total = block_sum(
        states,
        || Walker::new(sys),
        |w, idx| {
            decode(idx, p, &mut w.x);
            for _ in 0..shift {
                w.map.advance(&mut w.x, &mut w.tmp);
            }
            let mut inner = KahanSum::default();
            for tw in &twist {
                inner.add(table[a.phase(field, &w.x) as usize] * tw);
                w.map.advance(&mut w.x, &mut w.tmp);
            }
            Complex64::new(inner.value().norm_sqr(), 0.0)
        },
    );
    Ok(total.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `N^{m+1} <= p`
    Short,
    Long,
}

/// The comparison function `A(N, p)` and which branch produced it.
pub fn orbit_power_bound(n: u64, p: u64, m: usize) -> (f64, Regime) {
    let (nf, pf, mf) = (n as f64, p as f64, m as f64);
    let short = (n as u128)
        .checked_pow(m as u32 + 1)
        .is_some_and(|v| v <= p as u128);
    if short {
        (nf * pf.powf(mf + 1.0), Regime::Short)
    } else {
        (
            nf * nf * pf.powf(mf * (mf + 2.0) / (mf + 1.0)),
            Regime::Long,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSweepRow {
    pub n: u64,
    pub v: f64,
    pub bound: f64,
    pub ratio: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSweepReport {
    pub p: u64,
    pub m: usize,
    pub rows: Vec<PowerSweepRow>,
    /// Least-squares slope of `ln ratio` against `ln N` over the long regime.
    pub growth_slope: Option<f64>,
}

impl PowerSweepReport {
    /// Slope threshold above which the ratio is reported as growing.
    pub const GROWTH_THRESHOLD: f64 = 0.25;

    pub fn flagged(&self) -> bool {
        self.growth_slope
            .is_some_and(|s| s > Self::GROWTH_THRESHOLD)
    }
}

pub fn orbit_power_sweep(
    sys: &TriangularSystem,
    a: &CoefVector,
    c: i64,
    modulus: u64,
    n_values: &[u64],
    budget: u64,
) -> Result<PowerSweepReport> {
    let p = sys.field().modulus();
    let m = sys.m();
    let rows = n_values
        .iter()
        .map(|&n| {
            let v = orbit_power_sum(sys, a, c, modulus, n, budget)?;
            let (bound, regime) = orbit_power_bound(n, p, m);
            Ok(PowerSweepRow {
                n,
                v,
                bound,
                ratio: v / bound,
                regime,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.regime == Regime::Long && r.ratio > 0.0)
        .map(|r| ((r.n as f64).ln(), r.ratio.ln()))
        .collect();
    Ok(PowerSweepReport {
        p,
        m,
        growth_slope: slope(&pts),
        rows,
    })
}

fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
