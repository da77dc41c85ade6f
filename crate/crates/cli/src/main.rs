use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::json;

use permsys::discrepancy::{self, Method, PointSet};
use permsys::iterate::{degree_growth_report, DEFAULT_TERM_BUDGET};
use permsys::orbit::{self, PeriodOutcome};
use permsys::spectral::{self, CoefVector, Regime};
use permsys::system::{PermutationRefusal, DEFAULT_PERMUTATION_BUDGET};
use permsys::{
    generator, make_nonresidue_system, Error, ErrorClass, Generator, NonresidueFamily,
    OutputFormat, PrimeField, TriangularSystem,
};

#[derive(Parser, Debug)]
#[command(
    name = "permsys",
    version,
    about = "Triangular permutation polynomial systems over F_p"
)]
struct Cli {
    /// Worker threads for parallel scans (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Work budget; its unit depends on the subcommand
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Write results here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct SystemArg {
    /// System file (JSON)
    #[arg(long)]
    system: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check structure and certify the permutation property
    Validate(SystemArg),
    /// Write a nonresidue-family system file
    NewSystem {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Family::Chain)]
        family: Family,
        /// Constants h_i, comma separated (default all 1)
        #[arg(long = "b-list", value_delimiter = ',', allow_hyphen_values = true)]
        b_list: Vec<i64>,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        a: i64,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        b: i64,
    },
    /// Emit generator output
    Gen {
        #[command(flatten)]
        sys: SystemArg,
        /// v0,v1,...,vm or "random"
        #[arg(long)]
        seed: String,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Degree growth of the iterates as CSV
    Degrees {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long = "k-max")]
        k_max: usize,
    },
    /// Full and collapsed exponential sums for a coefficient vector
    Expsum {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<i64>,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        l: u64,
    },
    /// Seed-averaged squared orbit sums over a sweep of N
    Vsum {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<i64>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        c: i64,
        #[arg(long = "M", default_value_t = 1)]
        big_m: u64,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<u64>,
        /// Start the window at step L
        #[arg(long = "L", default_value_t = 0)]
        shift: u64,
    },
    /// Discrepancy of a point set read from CSV
    Discrepancy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "grid")]
        method: String,
        #[arg(long = "L", default_value_t = 8)]
        l: u64,
        /// Denominator for integer coordinates
        #[arg(long)]
        modulus: Option<u64>,
    },
    /// Discrepancy distribution over all seeds
    AvgDiscrepancy {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Thresholds t for the exceedance fractions
        #[arg(long = "t", value_delimiter = ',', default_value = "0.5,1,2,4")]
        thresholds: Vec<f64>,
        /// Print the per-value distribution instead of the summary
        #[arg(long)]
        distribution: bool,
    },
    /// Periods of seeds, or the full cycle structure
    Period {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, conflicts_with = "all")]
        seed: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Throughput and multiplication counts of the fast path
    Bench {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Chain,
    FullProduct,
}

struct Failure {
    class: ErrorClass,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            class: e.class(),
            msg: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        class: ErrorClass::Usage,
        msg: msg.into(),
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation | ErrorClass::Numeric => 1,
        ErrorClass::Usage | ErrorClass::Io => 2,
        ErrorClass::Budget => 3,
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let text = e.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("error[usage]: {text}");
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.class, f.msg);
            ExitCode::from(exit_code(f.class))
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let mut out: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(BufWriter::new(fs::File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let budget = cli.budget;
    match cli.cmd {
        Command::Validate(s) => validate(&s.system, budget, &mut out)?,
        Command::NewSystem {
            p,
            m,
            family,
            b_list,
            a,
            b,
        } => new_system(p, m, family, b_list, a, b, &mut out)?,
        Command::Gen {
            sys,
            seed,
            count,
            format,
        } => gen(&sys.system, &seed, count, &format, &mut out)?,
        Command::Degrees { sys, k_max } => {
            let sys = load(&sys.system)?;
            let report = degree_growth_report(
                &sys,
                k_max,
                budget_or(budget, DEFAULT_TERM_BUDGET as u64) as usize,
            )?;
            out.write_all(report.to_csv().as_bytes())?;
        }
        Command::Expsum { sys, a, k, l } => expsum(&sys.system, &a, k, l, budget, &mut out)?,
        Command::Vsum {
            sys,
            a,
            c,
            big_m,
            n,
            shift,
        } => vsum(&sys.system, &a, c, big_m, &n, shift, budget, &mut out)?,
        Command::Discrepancy {
            input,
            method,
            l,
            modulus,
        } => point_discrepancy(&input, &method, l, modulus, budget, &mut out)?,
        Command::AvgDiscrepancy {
            sys,
            n,
            thresholds,
            distribution,
        } => {
            let sys = load(&sys.system)?;
            let rep = discrepancy::average_discrepancy_experiment(
                &sys,
                &n,
                &thresholds,
                budget_or(budget, 10_000_000),
            )?;
            if !rep.precondition {
                eprintln!(
                    "warning: s_{{0,1}}..s_{{m-1,m}} vanishes; the averaged bound does not apply"
                );
            }
            let csv = if distribution {
                rep.distribution_csv()
            } else {
                rep.to_csv()
            };
            out.write_all(csv.as_bytes())?;
        }
        Command::Period { sys, seed, all } => {
            period(&sys.system, seed.as_deref(), all, budget, &mut out)?
        }
        Command::Bench { sys, seed, steps } => {
            bench(&sys.system, seed.as_deref(), steps, &mut out)?
        }
    }
    out.flush()?;
    Ok(())
}

fn budget_or(budget: Option<u64>, default: u64) -> u64 {
    budget.unwrap_or(default)
}

fn load(path: &Path) -> Result<TriangularSystem, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let sys = TriangularSystem::from_json(&text)?;
    let violations = sys.validate_structure();
    if !violations.is_empty() {
        return Err(Error::Structure(violations).into());
    }
    Ok(sys)
}

fn validate(path: &Path, budget: Option<u64>, out: &mut dyn Write) -> Outcome {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let sys = TriangularSystem::from_json(&text)?;
    let violations = sys.validate_structure();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("error[validation]: {v}");
        }
        return Err(Failure {
            class: ErrorClass::Validation,
            msg: format!("{} structural violation(s)", violations.len()),
        });
    }
    writeln!(out, "structure: ok")?;
    writeln!(out, "p = {}, m = {}", sys.field().modulus(), sys.m())?;
    for (i, row) in sys.s_matrix().iter().enumerate() {
        let row: Vec<String> = row.iter().map(u32::to_string).collect();
        writeln!(out, "s[{i}] = ({})", row.join(", "))?;
    }
    writeln!(
        out,
        "chain degrees nonzero: {}",
        sys.has_nonzero_chain_degrees()
    )?;
    match sys.check_permutation(budget_or(budget, DEFAULT_PERMUTATION_BUDGET)) {
        Ok(cert) => {
            writeln!(out, "permutation: certified ({})", cert.method())?;
            Ok(())
        }
        Err(PermutationRefusal::BudgetExceeded { needed, budget }) => Err(Error::Budget {
            what: "permutation scan",
            needed,
            limit: budget as u128,
        }
        .into()),
        Err(refusal) => Err(Failure {
            class: ErrorClass::Validation,
            msg: format!("not a permutation: {refusal}"),
        }),
    }
}

fn new_system(
    p: u64,
    m: usize,
    family: Family,
    b_list: Vec<i64>,
    a: i64,
    b: i64,
    out: &mut dyn Write,
) -> Outcome {
    let field = PrimeField::new(p)?;
    let b_list: Vec<u64> = if b_list.is_empty() {
        vec![1; m]
    } else {
        b_list
            .iter()
            .map(|&v| field.reduce_i128(v as i128))
            .collect()
    };
    let family = match family {
        Family::Chain => NonresidueFamily::Chain,
        Family::FullProduct => NonresidueFamily::FullProduct,
    };
    let sys = make_nonresidue_system(
        field,
        m,
        family,
        &b_list,
        field.reduce_i128(a as i128),
        field.reduce_i128(b as i128),
    )?;
    writeln!(out, "{}", sys.to_json())?;
    Ok(())
}

fn parse_seed(text: &str, sys: &TriangularSystem) -> Result<Vec<u64>, Failure> {
    let field = sys.field();
    let seed: Vec<u64> = if text == "random" {
        let mut rng = rand::rngs::OsRng;
        let seed: Vec<u64> = (0..sys.nvars())
            .map(|_| rng.gen_range(0..field.modulus()))
            .collect();
        let shown: Vec<String> = seed.iter().map(u64::to_string).collect();
        eprintln!("seed: {}", shown.join(","));
        seed
    } else {
        text.split(',')
            .map(|v| {
                v.trim()
                    .parse::<i128>()
                    .map(|v| field.reduce_i128(v))
                    .map_err(|_| usage(format!("bad seed component {v:?}")))
            })
            .collect::<Result<_, _>>()?
    };
    if seed.len() != sys.nvars() {
        return Err(usage(format!(
            "seed needs {} components, got {}",
            sys.nvars(),
            seed.len()
        )));
    }
    Ok(seed)
}

fn gen(path: &Path, seed: &str, count: u64, format: &str, out: &mut dyn Write) -> Outcome {
    let format: OutputFormat = format.parse()?;
    let sys = load(path)?;
    let seed = parse_seed(seed, &sys)?;
    let mut gen = Generator::new(&sys, &seed)?;
    gen.write_stream(count, format, out)?;
    Ok(())
}

fn coef(sys: &TriangularSystem, a: &[i64]) -> Result<CoefVector, Failure> {
    if a.len() != sys.m() {
        return Err(usage(format!(
            "--a needs {} coefficients, got {}",
            sys.m(),
            a.len()
        )));
    }
    CoefVector::new(sys.field(), a).map_err(|e| usage(e.to_string()))
}

fn expsum(
    path: &Path,
    a: &[i64],
    k: u64,
    l: u64,
    budget: Option<u64>,
    out: &mut dyn Write,
) -> Outcome {
    let sys = load(path)?;
    let a = coef(&sys, a)?;
    if k <= l {
        return Err(usage(format!("need k > l, got k = {k}, l = {l}")));
    }
    let r = spectral::difference_sum(
        &sys,
        &a,
        k,
        l,
        budget_or(budget, spectral::DEFAULT_SUM_BUDGET),
    )?;
    writeln!(
        out,
        "p,m,k,l,s,abs_direct,abs_collapsed,zero_count,agree,bound,ratio"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{:.9},{:.9},{},{},{:.6},{:.9}",
        sys.field().modulus(),
        sys.m(),
        k,
        l,
        r.collapsed.leading_index,
        r.direct.norm(),
        r.collapsed.value.norm(),
        r.collapsed.zero_count,
        r.agree(),
        r.bound,
        r.ratio()
    )?;
    if !r.agree() {
        return Err(Failure {
            class: ErrorClass::Numeric,
            msg: "direct and collapsed sums disagree".into(),
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn vsum(
    path: &Path,
    a: &[i64],
    c: i64,
    big_m: u64,
    ns: &[u64],
    shift: u64,
    budget: Option<u64>,
    out: &mut dyn Write,
) -> Outcome {
    let sys = load(path)?;
    let a = coef(&sys, a)?;
    if big_m == 0 || ns.contains(&0) {
        return Err(usage("M and N must be at least 1"));
    }
    let budget = budget_or(budget, spectral::DEFAULT_SUM_BUDGET);
    let p = sys.field().modulus();
    writeln!(out, "N,L,c,M,V,bound,ratio,regime")?;
    for &n in ns {
        let v = spectral::orbit_power_sum_shifted(&sys, &a, c, big_m, n, shift, budget)?;
        let (bound, regime) = spectral::orbit_power_bound(n, p, sys.m());
        let regime = match regime {
            Regime::Short => "short",
            Regime::Long => "long",
        };
        writeln!(
            out,
            "{n},{shift},{c},{big_m},{v:.6},{bound:.6},{:.9},{regime}",
            v / bound
        )?;
    }
    if shift == 0 {
        let report = spectral::orbit_power_sweep(&sys, &a, c, big_m, ns, budget)?;
        if report.flagged() {
            eprintln!(
                "warning: V/A(N,p) grows with N (log-log slope {:.3})",
                report.growth_slope.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

fn point_discrepancy(
    input: &Path,
    method: &str,
    l: u64,
    modulus: Option<u64>,
    budget: Option<u64>,
    out: &mut dyn Write,
) -> Outcome {
    let method: Method = method.parse()?;
    let text = fs::read_to_string(input)
        .map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;
    let ps = PointSet::parse_csv(&text, modulus)?;
    let r = discrepancy::discrepancy(&ps, method, l, budget_or(budget, 1_000_000_000))?;
    writeln!(out, "method,N,dim,value,exact,L,truncation,sum_term")?;
    let (exact, value) = match r.exact {
        Some(v) => (v.to_string(), r.upper),
        None => (String::new(), r.upper),
    };
    let (el, tr, st) = match r.etk {
        Some(e) => (
            e.l.to_string(),
            format!("{:.9}", e.truncation),
            format!("{:.9}", e.sum_term),
        ),
        None => Default::default(),
    };
    writeln!(
        out,
        "{},{},{},{value:.9},{exact},{el},{tr},{st}",
        r.method, r.points, r.dim
    )?;
    Ok(())
}

fn period(
    path: &Path,
    seed: Option<&str>,
    all: bool,
    budget: Option<u64>,
    out: &mut dyn Write,
) -> Outcome {
    let sys = load(path)?;
    let budget = budget_or(budget, orbit::DEFAULT_STATE_BUDGET);
    if all {
        let cs = orbit::full_cycle_structure(&sys, budget)?;
        for (len, count) in &cs.cycles {
            writeln!(out, "{}", json!({"cycle_length": len, "count": count}))?;
        }
        writeln!(
            out,
            "{}",
            json!({
                "p": cs.p,
                "m": cs.m,
                "total_states": cs.total_states,
                "cycles": cs.cycles.values().sum::<u64>(),
                "transient_states": cs.transient_states,
                "max_tail": cs.max_tail,
                "bijective": cs.bijective(),
                "maximal_period": cs.maximal_period(),
            })
        )?;
        return Ok(());
    }
    let text = seed.ok_or_else(|| usage("period needs --seed or --all"))?;
    let seed = parse_seed(text, &sys)?;
    match orbit::period_of_seed(&sys, &seed, budget)? {
        PeriodOutcome::Found(sp) => {
            let projected = orbit::projected_period(&sys, &seed, sp.period)?;
            writeln!(
                out,
                "{}",
                json!({"seed": seed, "period": sp.period, "preperiod": sp.preperiod, "projected_period": projected})
            )?;
            Ok(())
        }
        PeriodOutcome::Exceeded {
            steps,
            period_lower_bound,
        } => {
            writeln!(
                out,
                "{}",
                json!({"seed": seed, "steps": steps, "period_lower_bound": period_lower_bound})
            )?;
            Err(Error::Budget {
                what: "period search steps",
                needed: period_lower_bound as u128,
                limit: steps as u128,
            }
            .into())
        }
    }
}

fn bench(path: &Path, seed: Option<&str>, steps: u64, out: &mut dyn Write) -> Outcome {
    let sys = load(path)?;
    let seed = match seed {
        Some(s) => parse_seed(s, &sys)?,
        None => vec![1; sys.nvars()],
    };
    let r = generator::bench(&sys, &seed, steps)?;
    writeln!(out, "kernel: {}", r.kernel)?;
    writeln!(out, "steps: {}", r.steps)?;
    writeln!(out, "elapsed_s: {:.6}", r.elapsed.as_secs_f64())?;
    writeln!(out, "steps_per_s: {:.0}", r.steps_per_second())?;
    if let Some(m) = &r.mults_per_step {
        let m: Vec<String> = m.iter().map(u64::to_string).collect();
        writeln!(out, "mults_per_component: {}", m.join(","))?;
    }
    if let Some(ok) = r.cost_model_holds {
        writeln!(out, "two_mults_per_component: {ok}")?;
        if !ok {
            return Err(Failure {
                class: ErrorClass::Validation,
                msg: "chain kernel exceeded two multiplications per component".into(),
            });
        }
    }
    Ok(())
}
