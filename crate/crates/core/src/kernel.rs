//! Numeric one-step maps shared by the generator, the orbit analysis and
//! the exponential-sum experiments.

use crate::field::PrimeField;
use crate::poly::SparsePoly;
use crate::system::{quadratic_product_factors, TriangularSystem};

/// Receives multiplication counts per output component.
pub trait MulTally {
    fn record(&mut self, component: usize);
}

impl MulTally for () {
    #[inline(always)]
    fn record(&mut self, _component: usize) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Every `g_i = X_{i+1}^2 - a_i` and `h_i` constant.
    Chain,
    /// Every `g_i` a product of `X_j^2 - a_j` factors and `h_i` constant.
    QuadraticProduct,
    /// Term-by-term polynomial evaluation.
    Generic,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Chain => "chain",
            KernelKind::QuadraticProduct => "quadratic-product",
            KernelKind::Generic => "generic",
        })
    }
}

#[derive(Debug, Clone)]
struct Component {
    /// `(j, a_j)`: factor `x_j^2 - a_j`.
    factors: Vec<(usize, u64)>,
    b: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct QuadraticKernel {
    field: PrimeField,
    comps: Vec<Component>,
    /// Variables whose square is needed, each computed once per step.
    squared: Vec<usize>,
    a: u64,
    b: u64,
}

impl QuadraticKernel {
    fn detect(sys: &TriangularSystem) -> Option<Self> {
        let mut comps = Vec::with_capacity(sys.m());
        let mut needed = vec![false; sys.nvars()];
        for i in 0..sys.m() {
            let b = sys.h()[i].as_constant()?;
            let factors = quadratic_product_factors(&sys.g()[i])?;
            if factors.iter().any(|&(j, _)| j <= i) {
                return None;
            }
            for &(j, _) in &factors {
                needed[j] = true;
            }
            comps.push(Component { factors, b });
        }
        Some(QuadraticKernel {
            field: sys.field(),
            comps,
            squared: (0..needed.len()).filter(|&j| needed[j]).collect(),
            a: sys.a(),
            b: sys.b(),
        })
    }

    fn is_chain(&self) -> bool {
        self.comps
            .iter()
            .enumerate()
            .all(|(i, c)| c.factors.len() == 1 && c.factors[0].0 == i + 1)
    }

    /// One simultaneous update. The square of `x_j` is charged to component
    /// `j - 1`, so a chain component costs one squaring and one product.
    #[inline]
    fn step<T: MulTally>(&self, x: &[u64], out: &mut [u64], sq: &mut [u64], tally: &mut T) {
        let f = self.field;
        for &j in &self.squared {
            sq[j] = f.mul(x[j], x[j]);
            tally.record(j - 1);
        }
        for (i, c) in self.comps.iter().enumerate() {
            let mut factors = c.factors.iter();
            out[i] = match factors.next() {
                None => f.add(x[i], c.b),
                Some(&(j, a)) => {
                    let mut g = f.sub(sq[j], a);
                    for &(j, a) in factors {
                        g = f.mul(g, f.sub(sq[j], a));
                        tally.record(i);
                    }
                    tally.record(i);
                    f.add(f.mul(x[i], g), c.b)
                }
            };
        }
        let m = self.comps.len();
        out[m] = f.add(f.mul(self.a, x[m]), self.b);
        tally.record(m);
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Kernel {
    Quadratic(QuadraticKernel),
    Generic(Vec<SparsePoly>),
}

impl Kernel {
    pub(crate) fn for_system(sys: &TriangularSystem) -> Self {
        match QuadraticKernel::detect(sys) {
            Some(k) => Kernel::Quadratic(k),
            None => Kernel::generic(sys),
        }
    }

    pub(crate) fn generic(sys: &TriangularSystem) -> Self {
        Kernel::Generic(sys.polys().to_vec())
    }

    pub(crate) fn kind(&self) -> KernelKind {
        match self {
            Kernel::Quadratic(k) if k.is_chain() => KernelKind::Chain,
            Kernel::Quadratic(_) => KernelKind::QuadraticProduct,
            Kernel::Generic(_) => KernelKind::Generic,
        }
    }

    /// Writes the image of `x` into `out`; `sq` is scratch of length `m + 1`.
    #[inline]
    pub(crate) fn apply<T: MulTally>(
        &self,
        x: &[u64],
        out: &mut [u64],
        sq: &mut [u64],
        tally: &mut T,
    ) {
        match self {
            Kernel::Quadratic(k) => k.step(x, out, sq, tally),
            Kernel::Generic(polys) => {
                for (o, f) in out.iter_mut().zip(polys) {
                    *o = f.eval_unchecked(x);
                }
            }
        }
    }
}

/// A kernel plus its scratch buffers, for callers that just need `x -> F(x)`.
#[derive(Debug, Clone)]
pub(crate) struct StepMap {
    kernel: Kernel,
    sq: Vec<u64>,
}

impl StepMap {
    pub(crate) fn new(sys: &TriangularSystem) -> Self {
        StepMap {
            kernel: Kernel::for_system(sys),
            sq: vec![0; sys.nvars()],
        }
    }

    #[inline]
    pub(crate) fn apply(&mut self, x: &[u64], out: &mut [u64]) {
        self.kernel.apply(x, out, &mut self.sq, &mut ());
    }

    /// In-place `x <- F(x)` using `tmp` as the second buffer.
    #[inline]
    pub(crate) fn advance(&mut self, x: &mut Vec<u64>, tmp: &mut Vec<u64>) {
        self.kernel.apply(x, tmp, &mut self.sq, &mut ());
        std::mem::swap(x, tmp);
    }
}
