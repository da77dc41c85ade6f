//! The vector generator `u_{n+1} = F(u_n)` and its output stream.
//!
//! All `m + 1` coordinates are updated simultaneously from the previous
//! vector. Only coordinates `0..m` are ever emitted; coordinate `m` runs the
//! affine counter `a x + b` that drives the others.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::kernel::Kernel;
pub use crate::kernel::{KernelKind, MulTally};
use crate::system::TriangularSystem;

/// One emitted vector `(u_{n,0}/p, .., u_{n,m-1}/p)` in exact form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutputPoint {
    pub numerators: Vec<u64>,
    pub modulus: u64,
}

impl OutputPoint {
    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    /// Nearest binary floating point values.
    pub fn to_f64(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&u| u as f64 / self.modulus as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// One line per vector, components separated by commas.
    Csv,
    /// One JSON object `{"n": .., "u": [..]}` per line.
    Ndjson,
    /// Each component as 8 little-endian bytes, no separators.
    U64Le,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "ndjson" => Ok(OutputFormat::Ndjson),
            "u64le" => Ok(OutputFormat::U64Le),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

/// Per-component multiplication counter for instrumented runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MulCounts {
    pub per_component: Vec<u64>,
    pub steps: u64,
}

impl MulCounts {
    pub fn new(components: usize) -> Self {
        MulCounts {
            per_component: vec![0; components],
            steps: 0,
        }
    }

    /// Per-step counts, if every total divides evenly by the step count.
    pub fn per_step(&self) -> Option<Vec<u64>> {
        if self.steps == 0 {
            return None;
        }
        self.per_component
            .iter()
            .map(|&c| (c % self.steps == 0).then_some(c / self.steps))
            .collect()
    }
}

impl MulTally for MulCounts {
    #[inline]
    fn record(&mut self, component: usize) {
        self.per_component[component] += 1;
    }
}

/// Streaming state `u_n` of one orbit. Single owner; clone for a fork.
#[derive(Debug, Clone)]
pub struct Generator {
    kernel: Kernel,
    field: PrimeField,
    state: Vec<u64>,
    scratch: Vec<u64>,
    squares: Vec<u64>,
    n: u64,
}

impl Generator {
    /// Starts at `u_0 = seed`, picking the fastest kernel the system admits.
    pub fn new(sys: &TriangularSystem, seed: &[u64]) -> Result<Self> {
        Self::with_kernel(Kernel::for_system(sys), sys, seed)
    }

    /// Forces term-by-term polynomial evaluation.
    pub fn generic(sys: &TriangularSystem, seed: &[u64]) -> Result<Self> {
        Self::with_kernel(Kernel::generic(sys), sys, seed)
    }

    fn with_kernel(kernel: Kernel, sys: &TriangularSystem, seed: &[u64]) -> Result<Self> {
        if seed.len() != sys.nvars() {
            return Err(Error::VarCountMismatch {
                expected: sys.nvars(),
                found: seed.len(),
            });
        }
        let field = sys.field();
        Ok(Generator {
            kernel,
            field,
            state: seed.iter().map(|&v| field.reduce(v)).collect(),
            scratch: vec![0; seed.len()],
            squares: vec![0; seed.len()],
            n: 0,
        })
    }

    pub fn kernel_kind(&self) -> KernelKind {
        self.kernel.kind()
    }

    /// The full vector `u_n`, coordinate `m` included.
    pub fn state(&self) -> &[u64] {
        &self.state
    }

    /// Number of steps taken since the seed.
    pub fn position(&self) -> u64 {
        self.n
    }

    /// Emitted dimension `m`.
    pub fn dim(&self) -> usize {
        self.state.len() - 1
    }

    #[inline]
    pub fn step(&mut self) {
        self.step_tallied(&mut ());
    }

    /// One step, reporting every field multiplication to `tally`.
    #[inline]
    pub fn step_tallied<T: MulTally>(&mut self, tally: &mut T) {
        self.kernel
            .apply(&self.state, &mut self.scratch, &mut self.squares, tally);
        std::mem::swap(&mut self.state, &mut self.scratch);
        self.n += 1;
    }

    pub fn step_counted(&mut self, counts: &mut MulCounts) {
        self.step_tallied(counts);
        counts.steps += 1;
    }

    /// `k` sequential steps.
    pub fn jump(&mut self, k: u64) {
        for _ in 0..k {
            self.step();
        }
    }

    pub fn current_point(&self) -> OutputPoint {
        OutputPoint {
            numerators: self.state[..self.dim()].to_vec(),
            modulus: self.field.modulus(),
        }
    }

    /// Points for `n = position() .. position() + count`, advancing the state.
    pub fn emit(&mut self, count: usize) -> Vec<OutputPoint> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.current_point());
            self.step();
        }
        out
    }

    /// Serializes the next `count` emitted vectors.
    pub fn write_stream<W: Write + ?Sized>(
        &mut self,
        count: u64,
        format: OutputFormat,
        w: &mut W,
    ) -> io::Result<()> {
        let dim = self.dim();
        let mut line = String::new();
        for _ in 0..count {
            let u = &self.state[..dim];
            match format {
                OutputFormat::U64Le => {
                    for &v in u {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                OutputFormat::Csv => {
                    line.clear();
                    for (j, v) in u.iter().enumerate() {
                        if j > 0 {
                            line.push(',');
                        }
                        line.push_str(&v.to_string());
                    }
                    line.push('\n');
                    w.write_all(line.as_bytes())?;
                }
                OutputFormat::Ndjson => {
                    let rec = serde_json::json!({ "n": self.n, "u": u });
                    writeln!(w, "{rec}")?;
                }
            }
            self.step();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub kernel: KernelKind,
    pub steps: u64,
    pub elapsed: Duration,
    /// Multiplications per step for each coordinate `0..=m`, from an
    /// instrumented run.
    pub mults_per_step: Option<Vec<u64>>,
    /// For the chain kernel: every emitted coordinate costs exactly two
    /// multiplications per step. `None` for other kernels.
    pub cost_model_holds: Option<bool>,
    /// Checksum of the final state, so the timed loop cannot be elided.
    pub final_state: Vec<u64>,
}

impl BenchReport {
    pub fn steps_per_second(&self) -> f64 {
        self.steps as f64 / self.elapsed.as_secs_f64().max(1e-12)
    }
}

/// Times `steps` uninstrumented steps, then counts multiplications over
/// `min(steps, 10_000)` instrumented steps from the same seed.
pub fn bench(sys: &TriangularSystem, seed: &[u64], steps: u64) -> Result<BenchReport> {
    let mut gen = Generator::new(sys, seed)?;
    let kernel = gen.kernel_kind();
    let start = Instant::now();
    gen.jump(steps);
    let elapsed = start.elapsed();

    let mut probe = Generator::new(sys, seed)?;
    let mut counts = MulCounts::new(sys.nvars());
    for _ in 0..steps.clamp(1, 10_000) {
        probe.step_counted(&mut counts);
    }
    let mults_per_step = match kernel {
        KernelKind::Generic => None,
        _ => counts.per_step(),
    };
    let cost_model_holds = (kernel == KernelKind::Chain).then(|| {
        mults_per_step
            .as_ref()
            .is_some_and(|c| c[..sys.m()].iter().all(|&x| x == 2))
    });
    Ok(BenchReport {
        kernel,
        steps,
        elapsed,
        mults_per_step,
        cost_model_holds,
        final_state: gen.state().to_vec(),
    })
}
