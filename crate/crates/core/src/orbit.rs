//! Periods and cycle structure of the map F on F_p^{m+1}.
//!
//! "Maximal period" here means a single cycle through all p^{m+1} states.
//! The period of the emitted m-dimensional projection is available as a
//! secondary statistic via [`projected_period`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernel::StepMap;
use crate::system::TriangularSystem;

pub const DEFAULT_STATE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPeriod {
    pub period: u64,
    pub preperiod: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodOutcome {
    Found(SeedPeriod),
    /// Step budget ran out. If the preperiod is 0 (always the case for
    /// permutation systems) the period is at least `period_lower_bound`.
    Exceeded {
        steps: u64,
        period_lower_bound: u64,
    },
}

/// Brent's cycle detection on `x0, f(x0), f(f(x0)), ..`.
///
/// Returns `(period, preperiod)`, or `Err(lower_bound)` once `max_evals`
/// evaluations were spent without closing the cycle.
pub fn brent<T, F>(x0: &T, mut f: F, max_evals: u64) -> std::result::Result<(u64, u64), u64>
where
    T: Clone + PartialEq,
    F: FnMut(&T) -> T,
{
    let mut power = 1u64;
    let mut lam = 1u64;
    let mut excluded = 0u64;
    let mut tortoise = x0.clone();
    let mut hare = f(x0);
    let mut evals = 1u64;
    while tortoise != hare {
        if evals >= max_evals {
            return Err(excluded.max(lam) + 1);
        }
        if power == lam {
            tortoise = hare.clone();
            excluded = excluded.max(lam);
            power *= 2;
            lam = 0;
        }
        hare = f(&hare);
        evals += 1;
        lam += 1;
    }

    let mut tortoise = x0.clone();
    let mut hare = x0.clone();
    for _ in 0..lam {
        hare = f(&hare);
    }
    let mut mu = 0;
    while tortoise != hare {
        tortoise = f(&tortoise);
        hare = f(&hare);
        mu += 1;
    }
    Ok((lam, mu))
}

fn step_fn(sys: &TriangularSystem) -> impl FnMut(&Vec<u64>) -> Vec<u64> {
    let mut map = StepMap::new(sys);
    move |x: &Vec<u64>| {
        let mut out = vec![0; x.len()];
        map.apply(x, &mut out);
        out
    }
}

fn check_seed(sys: &TriangularSystem, seed: &[u64]) -> Result<Vec<u64>> {
    if seed.len() != sys.nvars() {
        return Err(Error::VarCountMismatch {
            expected: sys.nvars(),
            found: seed.len(),
        });
    }
    let f = sys.field();
    Ok(seed.iter().map(|&v| f.reduce(v)).collect())
}

pub fn period_of_seed(
    sys: &TriangularSystem,
    seed: &[u64],
    max_steps: u64,
) -> Result<PeriodOutcome> {
    let seed = check_seed(sys, seed)?;
    Ok(match brent(&seed, step_fn(sys), max_steps) {
        Ok((period, preperiod)) => PeriodOutcome::Found(SeedPeriod { period, preperiod }),
        Err(bound) => PeriodOutcome::Exceeded {
            steps: max_steps,
            period_lower_bound: bound,
        },
    })
}

/// Least period of the emitted sequence `(u_{n,0}, .., u_{n,m-1})` for a
/// seed on a cycle of length `period`; always a divisor of `period`.
pub fn projected_period(sys: &TriangularSystem, seed: &[u64], period: u64) -> Result<u64> {
    let dim = sys.m();
    let mut x = check_seed(sys, seed)?;
    let mut tmp = x.clone();
    let mut map = StepMap::new(sys);
    let len = usize::try_from(period)
        .map_err(|_| Error::budget("projected period", period as u128, usize::MAX as u128))?;
    let mut seq = Vec::with_capacity(len * dim);
    for _ in 0..len {
        seq.extend_from_slice(&x[..dim]);
        map.advance(&mut x, &mut tmp);
    }
    let mut divisors: Vec<usize> = (1..=len).filter(|d| len % d == 0).collect();
    divisors.sort_unstable();
    let d = divisors
        .into_iter()
        .find(|&d| {
            (0..len).all(|n| {
                seq[n * dim..(n + 1) * dim] == seq[((n + d) % len) * dim..((n + d) % len + 1) * dim]
            })
        })
        .unwrap_or(len);
    Ok(d as u64)
}

/// Cycle decomposition of the functional graph of F.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleStructure {
    pub p: u64,
    pub m: usize,
    pub total_states: u64,
    /// Cycle length -> number of cycles with that length.
    pub cycles: BTreeMap<u64, u64>,
    /// States not lying on any cycle; zero exactly when F is a bijection.
    pub transient_states: u64,
    /// Longest path from a state into its cycle.
    pub max_tail: u64,
}

impl CycleStructure {
    pub fn bijective(&self) -> bool {
        self.transient_states == 0
    }

    pub fn cyclic_states(&self) -> u64 {
        self.cycles.iter().map(|(len, count)| len * count).sum()
    }

    /// A single cycle through every state.
    pub fn maximal_period(&self) -> bool {
        self.cycles.len() == 1 && self.cycles.get(&self.total_states) == Some(&1)
    }
}

fn state_count(sys: &TriangularSystem, budget: u64) -> Result<u64> {
    let p = sys.field().modulus() as u128;
    let total = p.checked_pow(sys.nvars() as u32).unwrap_or(u128::MAX);
    let limit = budget.min(u32::MAX as u64) as u128;
    if total > limit {
        return Err(Error::budget("state space", total, limit));
    }
    Ok(total as u64)
}

pub(crate) fn decode(mut idx: u64, p: u64, out: &mut [u64]) {
    for x in out.iter_mut() {
        *x = idx % p;
        idx /= p;
    }
}

pub(crate) fn encode(x: &[u64], p: u64) -> u64 {
    x.iter().rev().fold(0, |acc, &v| acc * p + v)
}

pub fn full_cycle_structure(sys: &TriangularSystem, budget: u64) -> Result<CycleStructure> {
    let total = state_count(sys, budget)?;
    cycle_structure_from(sys, budget, 0..total)
}

/// As [`full_cycle_structure`], sweeping start states in the given order;
/// states missing from `starts` are still reached if they feed a visited cycle,
/// and every remaining state is swept afterwards.
pub fn cycle_structure_from<I>(
    sys: &TriangularSystem,
    budget: u64,
    starts: I,
) -> Result<CycleStructure>
where
    I: IntoIterator<Item = u64>,
{
    const UNSEEN: u8 = 0;
    const ON_PATH: u8 = 1;
    const DONE: u8 = 2;

    let total = state_count(sys, budget)?;
    let p = sys.field().modulus();
    let n = sys.nvars();
    let mut map = StepMap::new(sys);
    let mut color = vec![UNSEEN; total as usize];
    // Position on the current path while ON_PATH, distance to the cycle once DONE.
    let mut depth = vec![0u32; total as usize];
    let mut cycles = BTreeMap::new();
    let mut transient = 0u64;
    let mut max_tail = 0u64;
    let (mut x, mut y) = (vec![0u64; n], vec![0u64; n]);
    let mut path: Vec<u64> = Vec::new();

    for start in starts.into_iter().chain(0..total) {
        if start >= total || color[start as usize] != UNSEEN {
            continue;
        }
        path.clear();
        let mut cur = start;
        while color[cur as usize] == UNSEEN {
            color[cur as usize] = ON_PATH;
            depth[cur as usize] = path.len() as u32;
            path.push(cur);
            decode(cur, p, &mut x);
            map.apply(&x, &mut y);
            cur = encode(&y, p);
        }
        // Number of path states that are not on a cycle, and the depth at `cur`.
        let (tail_len, base_depth) = if color[cur as usize] == ON_PATH {
            let at = depth[cur as usize] as usize;
            *cycles.entry((path.len() - at) as u64).or_insert(0) += 1;
            (at, 0u32)
        } else {
            (path.len(), depth[cur as usize])
        };
        for (pos, &s) in path.iter().enumerate() {
            color[s as usize] = DONE;
            depth[s as usize] = if pos < tail_len {
                base_depth + (tail_len - pos) as u32
            } else {
                0
            };
        }
        transient += tail_len as u64;
        if tail_len > 0 {
            max_tail = max_tail.max(depth[path[0] as usize] as u64);
        }
    }
    Ok(CycleStructure {
        p,
        m: sys.m(),
        total_states: total,
        cycles,
        transient_states: transient,
        max_tail,
    })
}
