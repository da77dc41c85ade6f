//! Triangular polynomial systems and their permutation certificates.
//!
//! A system over F_p in variables `X0..Xm` has the shape
//!
//! ```text
//! f_i = X_i * g_i(X_{i+1}, .., X_m) + h_i(X_{i+1}, .., X_m),   0 <= i < m
//! f_m = a * X_m + b,                                          a != 0
//! ```
//!
//! where each `g_i` has a unique monic leading monomial
//! `X_{i+1}^{s_{i,i+1}} .. X_m^{s_{i,m}}` that dominates every other term of
//! `g_i` in each variable it contains, and `deg_{X_j} h_i <= s_{i,j}`.
//! The degree matrix `s` is read off `g_i` rather than declared.
//!
//! The induced map on F_p^{m+1} is a bijection exactly when no `g_i` has a
//! zero, which is what [`TriangularSystem::check_permutation`] certifies.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::poly::{Monomial, SparsePoly};

/// Default cap on polynomial evaluations for exhaustive zero searches.
pub const DEFAULT_PERMUTATION_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangularSystem {
    field: PrimeField,
    m: usize,
    g: Vec<SparsePoly>,
    h: Vec<SparsePoly>,
    a: u64,
    b: u64,
    /// `s[i][j - i - 1] = s_{i,j}` for `i < j <= m`.
    s: Vec<Vec<u32>>,
    f: Vec<SparsePoly>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyRole {
    G,
    H,
}

impl fmt::Display for PolyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolyRole::G => "g",
            PolyRole::H => "h",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// `g_i` or `h_i` mentions a variable outside `X_{i+1}..X_m`.
    ForeignVariable(PolyRole),
    /// No term of `g_i` carries every per-variable maximum at once.
    NoLeadingMonomial,
    LeadingCoefficient(u64),
    /// `deg_{X_j} h_i > s_{i,j}`.
    HDegree {
        degree: u32,
        bound: u32,
    },
    ZeroLinearCoefficient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.i.unwrap_or(0);
        let j = self.j.unwrap_or(0);
        match &self.kind {
            ViolationKind::ForeignVariable(role) => {
                write!(f, "{role}_{i} uses X{j}, only X{}..Xm allowed", i + 1)
            }
            ViolationKind::NoLeadingMonomial => {
                write!(f, "g_{i} has no unique leading monomial")
            }
            ViolationKind::LeadingCoefficient(c) => {
                write!(f, "g_{i} leading coefficient is {c}, must be 1")
            }
            ViolationKind::HDegree { degree, bound } => {
                write!(f, "deg_X{j} h_{i} = {degree} > s_{{{i},{j}}} = {bound}")
            }
            ViolationKind::ZeroLinearCoefficient => f.write_str("f_m has linear coefficient a = 0"),
        }
    }
}

impl TriangularSystem {
    /// Assembles a system after checking only its shape (counts, variable
    /// counts, field). Structural conditions are reported by
    /// [`validate_structure`](Self::validate_structure).
    pub fn from_parts(
        field: PrimeField,
        g: Vec<SparsePoly>,
        h: Vec<SparsePoly>,
        a: u64,
        b: u64,
    ) -> Result<Self> {
        let m = g.len();
        if m == 0 {
            return Err(Error::InvalidArgument(
                "system needs m >= 1 (at least one g_i)".into(),
            ));
        }
        if h.len() != m {
            return Err(Error::InvalidArgument(format!(
                "expected {m} h polynomials, found {}",
                h.len()
            )));
        }
        let nvars = m + 1;
        for p in g.iter().chain(h.iter()) {
            if p.field() != field {
                return Err(Error::ModulusMismatch(field.modulus(), p.field().modulus()));
            }
            if p.nvars() != nvars {
                return Err(Error::VarCountMismatch {
                    expected: nvars,
                    found: p.nvars(),
                });
            }
        }
        let (a, b) = (field.reduce(a), field.reduce(b));
        let s = (0..m)
            .map(|i| {
                (i + 1..=m)
                    .map(|j| g[i].degree_in(j).unwrap_or(0))
                    .collect()
            })
            .collect();
        let mut f = Vec::with_capacity(nvars);
        for i in 0..m {
            let xi = SparsePoly::var(field, nvars, i);
            f.push(xi.mul(&g[i])?.add(&h[i])?);
        }
        f.push(
            SparsePoly::var(field, nvars, m)
                .scale(a)
                .add(&SparsePoly::constant(field, nvars, b))?,
        );
        Ok(TriangularSystem {
            field,
            m,
            g,
            h,
            a,
            b,
            s,
            f,
        })
    }

    /// As [`from_parts`](Self::from_parts), rejecting any structural violation.
    pub fn new(
        field: PrimeField,
        g: Vec<SparsePoly>,
        h: Vec<SparsePoly>,
        a: u64,
        b: u64,
    ) -> Result<Self> {
        let sys = Self::from_parts(field, g, h, a, b)?;
        let v = sys.validate_structure();
        if v.is_empty() {
            Ok(sys)
        } else {
            Err(Error::Structure(v))
        }
    }

    /// Parses `g_i`, `h_i` from the polynomial text form.
    pub fn parse(field: PrimeField, g: &[&str], h: &[&str], a: u64, b: u64) -> Result<Self> {
        let nvars = g.len() + 1;
        let parse = |s: &&str| SparsePoly::parse(field, nvars, s);
        Self::from_parts(
            field,
            g.iter().map(parse).collect::<Result<_>>()?,
            h.iter().map(parse).collect::<Result<_>>()?,
            a,
            b,
        )
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    /// Index of the last coordinate; the system has `m + 1` variables.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.m + 1
    }

    pub fn g(&self) -> &[SparsePoly] {
        &self.g
    }

    pub fn h(&self) -> &[SparsePoly] {
        &self.h
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    /// The component polynomials `f_0..f_m`.
    pub fn polys(&self) -> &[SparsePoly] {
        &self.f
    }

    /// `s_{i,j}` for `0 <= i < m`, `i < j <= m`.
    pub fn s(&self, i: usize, j: usize) -> u32 {
        assert!(
            i < self.m && j > i && j <= self.m,
            "s_{{{i},{j}}} out of range"
        );
        self.s[i][j - i - 1]
    }

    /// Rows of the degree matrix; row `i` lists `s_{i,i+1}..s_{i,m}`.
    pub fn s_matrix(&self) -> &[Vec<u32>] {
        &self.s
    }

    /// `s_{i,i+1} * .. * s_{m-1,m}`.
    pub fn chain_degree_product(&self, i: usize) -> u64 {
        (i..self.m).map(|r| self.s(r, r + 1) as u64).product()
    }

    /// Whether `s_{0,1} * .. * s_{m-1,m} != 0`, the precondition of the
    /// exponential-sum and on-average discrepancy bounds.
    pub fn has_nonzero_chain_degrees(&self) -> bool {
        self.chain_degree_product(0) != 0
    }

    pub fn validate_structure(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let v = |i: usize, j: Option<usize>, kind| Violation {
            i: Some(i),
            j,
            kind,
        };
        for i in 0..self.m {
            for (role, p) in [(PolyRole::G, &self.g[i]), (PolyRole::H, &self.h[i])] {
                for j in p.support() {
                    if j <= i {
                        out.push(v(i, Some(j), ViolationKind::ForeignVariable(role)));
                    }
                }
            }

            let g = &self.g[i];
            // Lower terms of g_i are dominated by this monomial by construction,
            // so only its presence and coefficient need checking.
            let lead_exps: Vec<u32> = (0..=self.m).map(|j| g.degree_in(j).unwrap_or(0)).collect();
            let lead =
                Monomial::from_exponents(&lead_exps).expect("exponents come from a monomial");
            let lc = g.coeff(&lead);
            if lc == 0 {
                out.push(v(i, None, ViolationKind::NoLeadingMonomial));
            } else if lc != 1 {
                out.push(v(i, None, ViolationKind::LeadingCoefficient(lc)));
            }

            for j in i + 1..=self.m {
                let bound = lead_exps[j];
                if let Some(degree) = self.h[i].degree_in(j).filter(|&d| d > bound) {
                    out.push(v(i, Some(j), ViolationKind::HDegree { degree, bound }));
                }
            }
        }
        if self.a == 0 {
            out.push(Violation {
                i: Some(self.m),
                j: None,
                kind: ViolationKind::ZeroLinearCoefficient,
            });
        }
        out
    }

    /// The map `x -> (f_0(x), .., f_m(x))` on canonical residues.
    pub fn apply(&self, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.nvars() {
            return Err(Error::VarCountMismatch {
                expected: self.nvars(),
                found: x.len(),
            });
        }
        let x: Vec<u64> = x.iter().map(|&v| self.field.reduce(v)).collect();
        Ok(self.f.iter().map(|f| f.eval_unchecked(&x)).collect())
    }

    /// Certifies that the map permutes F_p^{m+1}.
    ///
    /// Each `g_i` that is literally a product of `X_j^2 - a` with nonresidue
    /// constants is certified at once; the rest are scanned for zeros over
    /// F_p^{m-i}, provided the total scan fits in `budget` evaluations.
    pub fn check_permutation(
        &self,
        budget: u64,
    ) -> std::result::Result<PermutationCertificate, PermutationRefusal> {
        self.certify(budget, true)
    }

    /// Certification by exhaustive zero search only.
    pub fn check_permutation_exhaustive(
        &self,
        budget: u64,
    ) -> std::result::Result<PermutationCertificate, PermutationRefusal> {
        self.certify(budget, false)
    }

    fn certify(
        &self,
        budget: u64,
        allow_nonresidue: bool,
    ) -> std::result::Result<PermutationCertificate, PermutationRefusal> {
        let violations = self.validate_structure();
        if !violations.is_empty() {
            return Err(PermutationRefusal::InvalidStructure(violations));
        }
        let p = self.field.modulus() as u128;
        let mut witnesses: Vec<Option<CoordinateWitness>> = vec![None; self.m];
        let mut needed: u128 = 0;
        for i in 0..self.m {
            if allow_nonresidue {
                if let Some(factors) = quadratic_product_factors(&self.g[i]) {
                    if factors.iter().all(|&(_, a)| self.field.legendre(a) == -1) {
                        witnesses[i] = Some(CoordinateWitness::NonresidueProduct { factors });
                        continue;
                    }
                }
            }
            needed = needed.saturating_add(p.saturating_pow((self.m - i) as u32));
        }
        if needed > budget as u128 {
            return Err(PermutationRefusal::BudgetExceeded { needed, budget });
        }
        for i in 0..self.m {
            if witnesses[i].is_some() {
                continue;
            }
            match self.find_zero(i) {
                Some(point) => return Err(PermutationRefusal::HasZero { i, point }),
                None => {
                    witnesses[i] = Some(CoordinateWitness::NoZeros {
                        points_checked: p.pow((self.m - i) as u32) as u64,
                    })
                }
            }
        }
        Ok(PermutationCertificate {
            witnesses: witnesses.into_iter().map(Option::unwrap).collect(),
        })
    }

    /// Smallest zero of `g_i` over F_p^{m-i} in enumeration order, as a
    /// point in `(X_{i+1}, .., X_m)`.
    fn find_zero(&self, i: usize) -> Option<Vec<u64>> {
        let p = self.field.modulus();
        let free = self.m - i;
        let total = p.pow(free as u32);
        let g = &self.g[i];
        let decode = |mut idx: u64| {
            let mut x = vec![0u64; self.m + 1];
            for slot in x[i + 1..].iter_mut() {
                *slot = idx % p;
                idx /= p;
            }
            x
        };
        (0..total)
            .into_par_iter()
            .find_first(|&idx| g.eval_unchecked(&decode(idx)) == 0)
            .map(|idx| decode(idx)[i + 1..].to_vec())
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            p: self.field.modulus(),
            m: self.m,
            g: self.g.iter().map(|p| p.to_string()).collect(),
            h: self.h.iter().map(|p| p.to_string()).collect(),
            a: self.a as i64,
            b: self.b as i64,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system file serializes")
    }

    /// Reads a system file without structural validation.
    pub fn from_json(src: &str) -> Result<Self> {
        let file: SystemFile =
            serde_json::from_str(src).map_err(|e| Error::Parse(format!("system file: {e}")))?;
        file.into_system()
    }
}

/// On-disk JSON form of a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub p: u64,
    pub m: usize,
    pub g: Vec<String>,
    pub h: Vec<String>,
    pub a: i64,
    pub b: i64,
}

impl SystemFile {
    pub fn into_system(self) -> Result<TriangularSystem> {
        let field = PrimeField::new(self.p)?;
        if self.g.len() != self.m || self.h.len() != self.m {
            return Err(Error::Parse(format!(
                "system file declares m = {} but lists {} g and {} h polynomials",
                self.m,
                self.g.len(),
                self.h.len()
            )));
        }
        let nvars = self.m + 1;
        let parse = |s: &String| SparsePoly::parse(field, nvars, s);
        TriangularSystem::from_parts(
            field,
            self.g.iter().map(parse).collect::<Result<_>>()?,
            self.h.iter().map(parse).collect::<Result<_>>()?,
            field.reduce_i128(self.a as i128),
            field.reduce_i128(self.b as i128),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoordinateWitness {
    /// `g_i = prod (X_j^2 - a_j)` with every `a_j` a quadratic nonresidue.
    NonresidueProduct { factors: Vec<(usize, u64)> },
    /// Every point of the domain of `g_i` was evaluated.
    NoZeros { points_checked: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMethod {
    NonresidueForm,
    Exhaustive,
}

impl fmt::Display for CertificateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateMethod::NonresidueForm => "nonresidue-form",
            CertificateMethod::Exhaustive => "exhaustive",
        })
    }
}

/// Proof that no `g_i` vanishes on F_p, one witness per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationCertificate {
    pub witnesses: Vec<CoordinateWitness>,
}

impl PermutationCertificate {
    /// `Exhaustive` as soon as any coordinate needed a scan.
    pub fn method(&self) -> CertificateMethod {
        if self
            .witnesses
            .iter()
            .all(|w| matches!(w, CoordinateWitness::NonresidueProduct { .. }))
        {
            CertificateMethod::NonresidueForm
        } else {
            CertificateMethod::Exhaustive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PermutationRefusal {
    InvalidStructure(Vec<Violation>),
    /// `g_i` vanishes at `point` (coordinates `X_{i+1}..X_m`): not a permutation.
    HasZero {
        i: usize,
        point: Vec<u64>,
    },
    /// Neither route applies within the evaluation budget.
    BudgetExceeded {
        needed: u128,
        budget: u64,
    },
}

impl fmt::Display for PermutationRefusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PermutationRefusal::InvalidStructure(v) => {
                write!(f, "structure invalid ({} violations)", v.len())
            }
            PermutationRefusal::HasZero { i, point } => {
                write!(f, "not a permutation: g_{i} vanishes at {point:?}")
            }
            PermutationRefusal::BudgetExceeded { needed, budget } => write!(
                f,
                "unknown: exhaustive check needs {needed} evaluations, budget {budget}"
            ),
        }
    }
}

/// Recognizes `g = prod_{j in J} (X_j^2 - a_j)` and returns the pairs
/// `(j, a_j)` in increasing `j`. The constant 1 is the empty product.
pub fn quadratic_product_factors(g: &SparsePoly) -> Option<Vec<(usize, u64)>> {
    let field = g.field();
    let nvars = g.nvars();
    let vars = g.support();
    if g.terms()
        .any(|(m, _)| vars.iter().any(|&j| !matches!(m.exponent(j), 0 | 2)))
    {
        return None;
    }
    let mut lead_exps = vec![0u32; nvars];
    for &j in &vars {
        lead_exps[j] = 2;
    }
    let lead = Monomial::from_exponents(&lead_exps).ok()?;
    if g.coeff(&lead) != 1 {
        return None;
    }
    let mut factors = Vec::with_capacity(vars.len());
    let mut product = SparsePoly::constant(field, nvars, 1);
    for &j in &vars {
        let a = field.neg(g.coeff(&lead.with_exponent(j, 0)));
        let mut factor = SparsePoly::constant(field, nvars, field.neg(a));
        factor.add_term(Monomial::var(nvars, j).with_exponent(j, 2), 1);
        product = product.mul(&factor).ok()?;
        factors.push((j, a));
    }
    (product == *g).then_some(factors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonresidueFamily {
    /// `g_i = X_{i+1}^2 - a_i`.
    Chain,
    /// `g_i = prod_{j=1}^{m-i} (X_{i+j}^2 - a_{i,j})`.
    FullProduct,
}

/// Builds the nonresidue family with every constant equal to the least
/// quadratic nonresidue, `h_i = b_list[i]`, and `f_m = a X_m + b`.
pub fn make_nonresidue_system(
    field: PrimeField,
    m: usize,
    family: NonresidueFamily,
    b_list: &[u64],
    a: u64,
    b: u64,
) -> Result<TriangularSystem> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if b_list.len() != m {
        return Err(Error::InvalidArgument(format!(
            "expected {m} constants b_i, found {}",
            b_list.len()
        )));
    }
    if field.reduce(a) == 0 {
        return Err(Error::InvalidArgument("a must be nonzero".into()));
    }
    let nvars = m + 1;
    let nr = field.smallest_nonresidue();
    let quad = |j: usize| {
        let mut q = SparsePoly::constant(field, nvars, field.neg(nr));
        q.add_term(Monomial::var(nvars, j).with_exponent(j, 2), 1);
        q
    };
    let mut g = Vec::with_capacity(m);
    for i in 0..m {
        let gi = match family {
            NonresidueFamily::Chain => quad(i + 1),
            NonresidueFamily::FullProduct => {
                let mut acc = SparsePoly::constant(field, nvars, 1);
                for j in i + 1..=m {
                    acc = acc.mul(&quad(j))?;
                }
                acc
            }
        };
        g.push(gi);
    }
    let h = b_list
        .iter()
        .map(|&c| SparsePoly::constant(field, nvars, c))
        .collect();
    TriangularSystem::new(field, g, h, a, b)
}
