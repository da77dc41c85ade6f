//! Symbolic iteration of a triangular system and the degree growth of its
//! iterates.
//!
//! `f^(0)` is the identity tuple and `f_i^(k) = f_i(f_0^(k-1), .., f_m^(k-1))`.
//! Every iterate keeps the triangular shape `f_i^(k) = X_i g_{i,k} + h_{i,k}`
//! with `g_{i,k}, h_{i,k}` free of `X_0..X_i`, and for `i < m`
//!
//! ```text
//! deg g_{i,k} = k^{m-i} s_{i,i+1} .. s_{m-1,m} / (m-i)! + psi_i(k),   deg psi_i < m - i
//! ```
//!
//! while `deg g_{m,k} = 0`. [`degree_growth_report`] measures the left side
//! exactly and reports the residual against the leading term.

use std::fmt::Write as _;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::poly::SparsePoly;
use crate::system::TriangularSystem;

pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;

/// `f^(0), f^(1), .., f^(k_max)`, each a tuple of `m + 1` polynomials.
pub fn iterate_levels(
    sys: &TriangularSystem,
    k_max: usize,
    max_terms: usize,
) -> Result<Vec<Vec<SparsePoly>>> {
    let field = sys.field();
    let nvars = sys.nvars();
    let identity: Vec<SparsePoly> = (0..nvars)
        .map(|j| SparsePoly::var(field, nvars, j))
        .collect();
    let mut levels = Vec::with_capacity(k_max + 1);
    levels.push(identity);
    for k in 1..=k_max {
        let prev = &levels[k - 1];
        let next = sys
            .polys()
            .iter()
            .map(|f| f.compose_bounded(prev, max_terms))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| match e {
                Error::Budget { .. } => Error::IterateBudget {
                    completed_k: k - 1,
                    limit: max_terms,
                },
                other => other,
            })?;
        levels.push(next);
    }
    Ok(levels)
}

/// The tuple `(f_0^(k), .., f_m^(k))`.
pub fn iterate_symbolic(
    sys: &TriangularSystem,
    k: usize,
    max_terms: usize,
) -> Result<Vec<SparsePoly>> {
    Ok(iterate_levels(sys, k, max_terms)?
        .pop()
        .expect("level 0 always present"))
}

/// `f_i^(k) = X_i * g + h` with `g, h` in `X_{i+1}..X_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterateDecomposition {
    pub i: usize,
    pub k: usize,
    pub g: SparsePoly,
    pub h: SparsePoly,
}

impl IterateDecomposition {
    /// `X_i * g + h`.
    pub fn recombine(&self) -> SparsePoly {
        let xi = SparsePoly::var(self.g.field(), self.g.nvars(), self.i);
        xi.mul(&self.g)
            .and_then(|t| t.add(&self.h))
            .expect("decomposition parts share a ring")
    }
}

/// Splits `f` by its `X_i`-exponent. Any term with `X_i^2` or higher, or
/// with a variable before `X_i`, is an error: valid systems never produce one.
pub fn split_linear(f: &SparsePoly, i: usize, k: usize) -> Result<IterateDecomposition> {
    let (field, nvars) = (f.field(), f.nvars());
    let mut g = SparsePoly::zero(field, nvars);
    let mut h = SparsePoly::zero(field, nvars);
    for (m, c) in f.terms() {
        if let Some(j) = (0..i).find(|&j| m.exponent(j) > 0) {
            return Err(Error::Decomposition {
                coordinate: i,
                k,
                reason: format!("term {m} contains X{j}"),
            });
        }
        match m.exponent(i) {
            0 => h.add_term(m.clone(), c),
            1 => g.add_term(m.with_exponent(i, 0), c),
            e => {
                return Err(Error::Decomposition {
                    coordinate: i,
                    k,
                    reason: format!("term {m} has X{i}^{e}"),
                })
            }
        }
    }
    Ok(IterateDecomposition { i, k, g, h })
}

pub fn decompose(
    sys: &TriangularSystem,
    i: usize,
    k: usize,
    max_terms: usize,
) -> Result<IterateDecomposition> {
    if i > sys.m() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {i} out of range 0..={}",
            sys.m()
        )));
    }
    let iterates = iterate_symbolic(sys, k, max_terms)?;
    split_linear(&iterates[i], i, k)
}

/// Empirical polynomial order of a sequence sampled at consecutive `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthOrder {
    /// Identically zero.
    Zero,
    /// Agrees with a polynomial of exactly this degree on the window.
    Degree(u32),
    /// Too few samples to pin the degree down.
    Undetermined,
}

/// Smallest `d` such that the `(d + 1)`-th differences vanish, requiring at
/// least one difference of that order to have been observed.
pub fn growth_order(values: &[Ratio<i64>]) -> GrowthOrder {
    if values.iter().all(|v| *v == Ratio::from_integer(0)) {
        return GrowthOrder::Zero;
    }
    let mut diffs = values.to_vec();
    let mut d = 0u32;
    loop {
        diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        if diffs.is_empty() {
            return GrowthOrder::Undetermined;
        }
        if diffs.iter().all(|v| *v == Ratio::from_integer(0)) {
            return GrowthOrder::Degree(d);
        }
        d += 1;
    }
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeRow {
    pub i: usize,
    pub k: usize,
    /// `None` if `g_{i,k}` is the zero polynomial.
    pub deg_g: Option<u32>,
    pub predicted_leading: Ratio<i64>,
    pub residual: Option<Ratio<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateFit {
    pub i: usize,
    pub k_from: usize,
    pub k_to: usize,
    /// `s_{i,i+1} .. s_{m-1,m} / (m-i)!`, zero for `i = m`.
    pub predicted_coefficient: Ratio<i64>,
    /// `(m-i)`-th difference of the degree sequence over `(m-i)!`, from
    /// the tail of the window.
    pub fitted_coefficient: Option<Ratio<i64>>,
    pub residual_order: GrowthOrder,
    /// Residual grows at order `>= m - i`, contradicting the degree law.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeReport {
    pub m: usize,
    pub k_max: usize,
    pub rows: Vec<DegreeRow>,
    /// Per-coordinate fit over `k = 1..=k_max`.
    pub fits: Vec<CoordinateFit>,
}

impl DegreeReport {
    pub fn degrees(&self, i: usize) -> Vec<Option<u32>> {
        self.rows
            .iter()
            .filter(|r| r.i == i)
            .map(|r| r.deg_g)
            .collect()
    }

    /// Refits coordinate `i` on `k_from..=k_max`, e.g. to skip small-k transients.
    pub fn fit(&self, i: usize, k_from: usize) -> CoordinateFit {
        let rows: Vec<&DegreeRow> = self
            .rows
            .iter()
            .filter(|r| r.i == i && r.k >= k_from)
            .collect();
        let order = (self.m - i) as u32;
        let predicted_coefficient = if i == self.m {
            Ratio::from_integer(0)
        } else {
            rows.first()
                .filter(|r| r.k > 0)
                .map(|r| r.predicted_leading / Ratio::from_integer((r.k as i64).pow(order)))
                .unwrap_or_else(|| Ratio::from_integer(0))
        };
        let residuals: Option<Vec<Ratio<i64>>> = rows.iter().map(|r| r.residual).collect();
        let residual_order = match &residuals {
            Some(r) => growth_order(r),
            None => GrowthOrder::Undetermined,
        };
        let degs: Option<Vec<Ratio<i64>>> = rows
            .iter()
            .map(|r| r.deg_g.map(|d| Ratio::from_integer(d as i64)))
            .collect();
        let fitted_coefficient = degs.and_then(|mut d| {
            for _ in 0..order {
                d = d.windows(2).map(|w| w[1] - w[0]).collect();
            }
            d.last()
                .map(|v| *v / Ratio::from_integer(factorial(order as usize)))
        });
        let flagged = match residual_order {
            GrowthOrder::Zero => false,
            GrowthOrder::Degree(d) => i == self.m || d >= order,
            GrowthOrder::Undetermined => false,
        };
        CoordinateFit {
            i,
            k_from,
            k_to: self.k_max,
            predicted_coefficient,
            fitted_coefficient,
            residual_order,
            flagged,
        }
    }

    /// CSV with columns `i,k,deg_g,predicted_leading,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,k,deg_g,predicted_leading,residual\n");
        let num = |r: &Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
        for r in &self.rows {
            let deg = r
                .deg_g
                .map_or_else(|| "-inf".to_string(), |d| d.to_string());
            let res = r
                .residual
                .map_or_else(|| "-inf".to_string(), |x| num(&x).to_string());
            writeln!(
                out,
                "{},{},{},{},{}",
                r.i,
                r.k,
                deg,
                num(&r.predicted_leading),
                res
            )
            .unwrap();
        }
        out
    }
}

/// Exact `deg g_{i,k}` for every coordinate and `k = 1..=k_max`.
pub fn degree_growth_report(
    sys: &TriangularSystem,
    k_max: usize,
    max_terms: usize,
) -> Result<DegreeReport> {
    let m = sys.m();
    let levels = iterate_levels(sys, k_max, max_terms)?;
    let mut rows = Vec::with_capacity((m + 1) * k_max);
    for i in 0..=m {
        let coeff = if i == m {
            Ratio::from_integer(0)
        } else {
            Ratio::new(sys.chain_degree_product(i) as i64, factorial(m - i))
        };
        for (k, level) in levels.iter().enumerate().skip(1) {
            let dec = split_linear(&level[i], i, k)?;
            let deg_g = dec.g.total_degree();
            let predicted_leading = coeff * Ratio::from_integer((k as i64).pow((m - i) as u32));
            rows.push(DegreeRow {
                i,
                k,
                deg_g,
                predicted_leading,
                residual: deg_g.map(|d| Ratio::from_integer(d as i64) - predicted_leading),
            });
        }
    }
    let mut report = DegreeReport {
        m,
        k_max,
        rows,
        fits: Vec::new(),
    };
    report.fits = (0..=m).map(|i| report.fit(i, 1)).collect();
    Ok(report)
}

/// `true` when no term of `p` touches `X_0..X_i`.
pub fn free_of_prefix(p: &SparsePoly, i: usize) -> bool {
    p.terms().all(|(m, _)| (0..=i).all(|j| m.exponent(j) == 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use crate::system::{make_nonresidue_system, NonresidueFamily};

    fn field(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn chain(p: u64, m: usize) -> TriangularSystem {
        make_nonresidue_system(field(p), m, NonresidueFamily::Chain, &vec![1; m], 1, 1).unwrap()
    }

    fn poly(p: u64, n: usize, s: &str) -> SparsePoly {
        SparsePoly::parse(field(p), n, s).unwrap()
    }

    #[test]
    fn base_case_is_identity() {
        let sys = chain(5, 2);
        let it = iterate_symbolic(&sys, 0, DEFAULT_TERM_BUDGET).unwrap();
        for (j, p) in it.iter().enumerate() {
            assert_eq!(*p, SparsePoly::var(field(5), 3, j));
        }
    }

    #[test]
    fn second_iterate_by_hand() {
        let sys = chain(5, 1);
        let it = iterate_symbolic(&sys, 2, DEFAULT_TERM_BUDGET).unwrap();
        assert_eq!(it[1], poly(5, 2, "X1 + 2"));
        // (X0 (X1^2 - 2) + 1) ((X1 + 1)^2 - 2) + 1
        let inner = poly(5, 2, "X0*X1^2 - 2*X0 + 1");
        let shifted = poly(5, 2, "X1^2 + 2*X1 - 1");
        let expect = inner.mul(&shifted).unwrap().add(&poly(5, 2, "1")).unwrap();
        assert_eq!(it[0], expect);
    }

    #[test]
    fn decomposition_examples() {
        let sys = TriangularSystem::parse(field(7), &["X1^2 - 3", "X2^2 - 3"], &["2", "5"], 1, 4)
            .unwrap();
        for k in 0..5 {
            let d = decompose(&sys, 2, k, DEFAULT_TERM_BUDGET).unwrap();
            assert_eq!(d.g.as_constant(), Some(1));
            assert_eq!(d.h.as_constant(), Some(4 * k as u64 % 7));
        }
        let d = decompose(&sys, 0, 1, DEFAULT_TERM_BUDGET).unwrap();
        assert_eq!(d.g, sys.g()[0]);
        assert_eq!(d.h, sys.h()[0]);

        let sys = chain(5, 1);
        let d = decompose(&sys, 0, 3, DEFAULT_TERM_BUDGET).unwrap();
        assert_eq!(d.g.total_degree(), Some(6));
        assert_eq!(
            d.recombine(),
            iterate_symbolic(&sys, 3, DEFAULT_TERM_BUDGET).unwrap()[0]
        );
        assert!(free_of_prefix(&d.g, 0) && free_of_prefix(&d.h, 0));
    }

    #[test]
    fn decomposition_rejects_bad_shapes() {
        let f = poly(5, 2, "X0^2*X1 + 1");
        assert!(matches!(
            split_linear(&f, 0, 1),
            Err(Error::Decomposition { .. })
        ));
        let f = poly(5, 2, "X0*X1 + 1");
        assert!(matches!(
            split_linear(&f, 1, 1),
            Err(Error::Decomposition { .. })
        ));
        assert!(decompose(&chain(5, 1), 2, 1, 100).is_err());
    }

    #[test]
    fn budget_reports_completed_level() {
        let sys = chain(7, 2);
        match iterate_symbolic(&sys, 10, 40) {
            Err(Error::IterateBudget {
                completed_k,
                limit: 40,
            }) => assert!(completed_k < 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chain_m1_degrees_are_2k() {
        let r = degree_growth_report(&chain(5, 1), 10, DEFAULT_TERM_BUDGET).unwrap();
        let want: Vec<Option<u32>> = (1..=10).map(|k| Some(2 * k)).collect();
        assert_eq!(r.degrees(0), want);
        assert!(r
            .rows
            .iter()
            .filter(|x| x.i == 0)
            .all(|x| x.residual == Some(Ratio::from_integer(0))));
        assert_eq!(r.degrees(1), vec![Some(0); 10]);
        assert!(r.fits.iter().all(|f| !f.flagged));
        assert_eq!(r.fits[0].fitted_coefficient, Some(Ratio::from_integer(2)));
    }

    #[test]
    fn chain_m2_leading_term() {
        let r = degree_growth_report(&chain(5, 2), 8, DEFAULT_TERM_BUDGET).unwrap();
        assert_eq!(
            r.rows
                .iter()
                .find(|x| x.i == 0 && x.k == 3)
                .unwrap()
                .predicted_leading,
            Ratio::from_integer(18)
        );
        let fit = r.fit(0, 2);
        assert_eq!(fit.predicted_coefficient, Ratio::from_integer(2));
        assert!(matches!(
            fit.residual_order,
            GrowthOrder::Zero | GrowthOrder::Degree(0) | GrowthOrder::Degree(1)
        ));
        assert!(!fit.flagged);
        assert!(r.degrees(2).iter().all(|d| *d == Some(0)));
        let csv = r.to_csv();
        assert!(csv.starts_with("i,k,deg_g,predicted_leading,residual\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 8);
    }

    #[test]
    fn growth_order_detection() {
        let r = |v: &[i64]| {
            v.iter()
                .map(|&x| Ratio::from_integer(x))
                .collect::<Vec<_>>()
        };
        assert_eq!(growth_order(&r(&[0, 0, 0])), GrowthOrder::Zero);
        assert_eq!(growth_order(&r(&[3, 3, 3])), GrowthOrder::Degree(0));
        assert_eq!(growth_order(&r(&[1, 3, 5, 7])), GrowthOrder::Degree(1));
        assert_eq!(growth_order(&r(&[1, 4, 9, 16])), GrowthOrder::Degree(2));
        assert_eq!(growth_order(&r(&[1, 4, 9])), GrowthOrder::Undetermined);
        assert_eq!(growth_order(&r(&[5])), GrowthOrder::Undetermined);
    }
}
