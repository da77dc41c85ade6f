//! Sparse multivariate polynomials over F_p.
//!
//! A [`SparsePoly`] is a map from [`Monomial`] (an exponent vector over
//! `X0..X{n-1}`) to a nonzero canonical coefficient. Terms are kept in a
//! `BTreeMap` under graded lexicographic order, so equality, iteration
//! and the text form are all deterministic.
//!
//! Text form: a sum of terms `c*X0^e0*...*Xk^ek`. Unit coefficients and
//! unit exponents may be omitted, whitespace is ignored, and `-` is
//! accepted between terms. Output always uses canonical coefficients in
//! `[0, p)` joined by ` + `, highest term first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::field::PrimeField;

pub const MAX_EXPONENT: u32 = u16::MAX as u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(SmallVec<[u16; 6]>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(SmallVec::from_elem(0, nvars))
    }

    pub fn var(nvars: usize, j: usize) -> Self {
        let mut m = Self::one(nvars);
        m.0[j] = 1;
        m
    }

    pub fn from_exponents(exps: &[u32]) -> Result<Self> {
        exps.iter()
            .map(|&e| u16::try_from(e).map_err(|_| Error::ExponentOverflow))
            .collect::<Result<SmallVec<_>>>()
            .map(Monomial)
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn exponent(&self, j: usize) -> u32 {
        self.0[j] as u32
    }

    pub fn exponents(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().map(|&e| e as u32)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn checked_mul(&self, other: &Monomial) -> Result<Monomial> {
        debug_assert_eq!(self.nvars(), other.nvars());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| a.checked_add(b).ok_or(Error::ExponentOverflow))
            .collect::<Result<SmallVec<_>>>()
            .map(Monomial)
    }

    /// Same monomial with the exponent of `X_j` replaced.
    pub fn with_exponent(&self, j: usize, e: u16) -> Monomial {
        let mut m = self.clone();
        m.0[j] = e;
        m
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then `X0 > X1 > ...`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "X{j}")?;
            } else {
                write!(f, "X{j}^{e}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePoly {
    field: PrimeField,
    nvars: usize,
    terms: BTreeMap<Monomial, u64>,
}

impl SparsePoly {
    pub fn zero(field: PrimeField, nvars: usize) -> Self {
        SparsePoly {
            field,
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(field: PrimeField, nvars: usize, c: u64) -> Self {
        let mut p = Self::zero(field, nvars);
        p.add_term(Monomial::one(nvars), field.reduce(c));
        p
    }

    pub fn var(field: PrimeField, nvars: usize, j: usize) -> Self {
        assert!(
            j < nvars,
            "variable X{j} out of range for {nvars} variables"
        );
        let mut p = Self::zero(field, nvars);
        p.terms.insert(Monomial::var(nvars, j), 1);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// monomials are summed, coefficients reduced mod p.
    pub fn from_terms<I, E>(field: PrimeField, nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (E, i64)>,
        E: AsRef<[u32]>,
    {
        let mut p = Self::zero(field, nvars);
        for (exps, c) in terms {
            let exps = exps.as_ref();
            if exps.len() != nvars {
                return Err(Error::VarCountMismatch {
                    expected: nvars,
                    found: exps.len(),
                });
            }
            p.add_term(
                Monomial::from_exponents(exps)?,
                field.reduce_i128(c as i128),
            );
        }
        Ok(p)
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded lexicographic order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, u64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> u64 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    /// The constant coefficient, or `None` if the polynomial has any
    /// non-constant term.
    pub fn as_constant(&self) -> Option<u64> {
        match self.terms.len() {
            0 => Some(0),
            1 => {
                let (m, &c) = self.terms.iter().next().unwrap();
                m.is_one().then_some(c)
            }
            _ => None,
        }
    }

    /// Adds `c * m` in place, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: u64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c == 0 {
            return;
        }
        let f = self.field;
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = f.add(*o.get(), c);
                if s == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check_compatible(&self, other: &SparsePoly) -> Result<()> {
        if self.field != other.field {
            return Err(Error::ModulusMismatch(
                self.field.modulus(),
                other.field.modulus(),
            ));
        }
        if self.nvars != other.nvars {
            return Err(Error::VarCountMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), self.field.neg(c));
        }
        Ok(out)
    }

    pub fn neg(&self) -> SparsePoly {
        let f = self.field;
        SparsePoly {
            field: f,
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| (m.clone(), f.neg(c)))
                .collect(),
        }
    }

    pub fn scale(&self, c: u64) -> SparsePoly {
        let f = self.field;
        let c = f.reduce(c);
        if c == 0 {
            return SparsePoly::zero(f, self.nvars);
        }
        SparsePoly {
            field: f,
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, &a)| (m.clone(), f.mul(a, c)))
                .collect(),
        }
    }

    pub fn mul(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_compatible(other)?;
        let f = self.field;
        if self.is_zero() || other.is_zero() {
            return Ok(SparsePoly::zero(f, self.nvars));
        }
        let mut acc: HashMap<Monomial, u64> =
            HashMap::with_capacity(self.terms.len() * other.terms.len());
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                let m = ma.checked_mul(mb)?;
                let c = f.mul(ca, cb);
                let slot = acc.entry(m).or_insert(0);
                *slot = f.add(*slot, c);
            }
        }
        Ok(SparsePoly {
            field: f,
            nvars: self.nvars,
            terms: acc.into_iter().filter(|&(_, c)| c != 0).collect(),
        })
    }

    pub fn pow(&self, mut e: u32) -> Result<SparsePoly> {
        let mut acc = SparsePoly::constant(self.field, self.nvars, 1);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Largest exponent of `X_j`; `None` for the zero polynomial.
    pub fn degree_in(&self, j: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.exponent(j)).max()
    }

    /// Total degree; `None` stands for the degree of the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        // Graded order puts the highest total degree last.
        self.terms.keys().next_back().map(Monomial::degree)
    }

    /// Highest term under graded lexicographic order.
    pub fn leading_term(&self) -> Option<(&Monomial, u64)> {
        self.terms.iter().next_back().map(|(m, &c)| (m, c))
    }

    /// Indices of variables that occur with positive exponent.
    pub fn support(&self) -> Vec<usize> {
        (0..self.nvars)
            .filter(|&j| self.terms.keys().any(|m| m.exponent(j) > 0))
            .collect()
    }

    /// Substitutes `subs[j]` for `X_j`.
    pub fn compose(&self, subs: &[SparsePoly]) -> Result<SparsePoly> {
        self.compose_bounded(subs, usize::MAX)
    }

    /// As [`compose`](Self::compose), failing with a budget error once any
    /// intermediate or the result exceeds `max_terms` terms.
    pub fn compose_bounded(&self, subs: &[SparsePoly], max_terms: usize) -> Result<SparsePoly> {
        if subs.len() != self.nvars {
            return Err(Error::VarCountMismatch {
                expected: self.nvars,
                found: subs.len(),
            });
        }
        let Some(first) = subs.first() else {
            return Ok(self.clone());
        };
        let (field, out_vars) = (first.field, first.nvars);
        for s in subs {
            if s.field != self.field || s.field != field {
                return Err(Error::ModulusMismatch(
                    self.field.modulus(),
                    s.field.modulus(),
                ));
            }
            if s.nvars != out_vars {
                return Err(Error::VarCountMismatch {
                    expected: out_vars,
                    found: s.nvars,
                });
            }
        }

        let check = |p: &SparsePoly| -> Result<()> {
            if p.num_terms() > max_terms {
                Err(Error::budget(
                    "polynomial term count",
                    p.num_terms() as u128,
                    max_terms as u128,
                ))
            } else {
                Ok(())
            }
        };

        // powers[j][e] = subs[j]^e, filled lazily up to the largest exponent used.
        let mut powers: Vec<Vec<SparsePoly>> = (0..self.nvars)
            .map(|_| vec![SparsePoly::constant(field, out_vars, 1)])
            .collect();
        let mut out = SparsePoly::zero(field, out_vars);
        for (m, &c) in &self.terms {
            let mut term = SparsePoly::constant(field, out_vars, c);
            for (j, e) in m.exponents().enumerate() {
                if e == 0 {
                    continue;
                }
                let e = e as usize;
                while powers[j].len() <= e {
                    let next = powers[j].last().unwrap().mul(&subs[j])?;
                    check(&next)?;
                    powers[j].push(next);
                }
                term = term.mul(&powers[j][e])?;
                check(&term)?;
            }
            for (tm, tc) in term.terms {
                out.add_term(tm, tc);
            }
            check(&out)?;
        }
        Ok(out)
    }

    /// Value at `point`, which must have one residue per variable.
    pub fn evaluate(&self, point: &[u64]) -> Result<u64> {
        if point.len() != self.nvars {
            return Err(Error::VarCountMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        Ok(self.eval_unchecked(point))
    }

    pub(crate) fn eval_unchecked(&self, point: &[u64]) -> u64 {
        let f = self.field;
        let mut acc = 0;
        for (m, &c) in &self.terms {
            let mut t = c;
            for (j, e) in m.exponents().enumerate() {
                if e != 0 {
                    t = f.mul(t, f.pow(f.reduce(point[j]), e as u64));
                }
            }
            acc = f.add(acc, t);
        }
        acc
    }

    /// Parses the text form described in the module docs.
    pub fn parse(field: PrimeField, nvars: usize, src: &str) -> Result<SparsePoly> {
        Parser {
            field,
            nvars,
            chars: src.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
        }
        .parse()
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, &c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
            } else if c == 1 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

struct Parser {
    field: PrimeField,
    nvars: usize,
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Parse(format!("{msg} at offset {}", self.pos)))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<SparsePoly> {
        let mut out = SparsePoly::zero(self.field, self.nvars);
        if self.chars.is_empty() {
            return self.err("empty polynomial");
        }
        let mut negate = false;
        if let Some(c @ ('+' | '-')) = self.peek() {
            negate = c == '-';
            self.pos += 1;
        }
        loop {
            let (m, mut c) = self.term()?;
            if negate {
                c = self.field.neg(c);
            }
            out.add_term(m, c);
            match self.peek() {
                None => break,
                Some('+') => negate = false,
                Some('-') => negate = true,
                Some(_) => return self.err("expected '+' or '-'"),
            }
            self.pos += 1;
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(Monomial, u64)> {
        let mut exps = vec![0u32; self.nvars];
        let mut coeff = 1u64;
        loop {
            match self.peek() {
                Some('X' | 'x') => {
                    self.pos += 1;
                    let j = self.integer()?;
                    if j >= self.nvars as u128 {
                        return self.err(&format!("variable X{j} out of range"));
                    }
                    let e = if self.peek() == Some('^') {
                        self.pos += 1;
                        self.integer()?
                    } else {
                        1
                    };
                    let slot = &mut exps[j as usize];
                    *slot = u32::try_from(e)
                        .ok()
                        .and_then(|e| slot.checked_add(e))
                        .filter(|&s| s <= MAX_EXPONENT)
                        .ok_or(Error::ExponentOverflow)?;
                }
                Some(c) if c.is_ascii_digit() => {
                    let v = self.integer_mod()?;
                    coeff = self.field.mul(coeff, v);
                }
                _ => return self.err("expected coefficient or variable"),
            }
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((Monomial::from_exponents(&exps)?, coeff))
    }

    fn digits(&mut self) -> Result<&[char]> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected digits");
        }
        Ok(&self.chars[start..self.pos])
    }

    fn integer(&mut self) -> Result<u128> {
        let mut v: u128 = 0;
        for &d in self.digits()? {
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add(d.to_digit(10).unwrap() as u128))
                .ok_or_else(|| Error::Parse("integer too large".into()))?;
        }
        Ok(v)
    }

    fn integer_mod(&mut self) -> Result<u64> {
        let f = self.field;
        let mut v = 0u64;
        for &d in self.digits()? {
            v = f.add(
                f.mul(v, f.reduce(10)),
                f.reduce(d.to_digit(10).unwrap() as u64),
            );
        }
        Ok(v)
    }
}
