use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_permsys"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// p = 5, m = 1 chain system: f_0 = X0 (X1^2 - 2) + 1, f_1 = X1 + 1.
fn chain5(dir: &Path) -> PathBuf {
    let o = run(&["new-system", "--p", "5", "--m", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    write(dir, "chain5.json", &stdout(&o))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_chain_file() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&["validate", "--system", s(&f)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("structure: ok"));
    assert!(text.contains("permutation: certified (nonresidue-form)"));
    assert!(text.contains("s[0] = (2)"));
}

#[test]
fn new_system_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("full.json");
    let o = run(&[
        "new-system",
        "--p",
        "7",
        "--m",
        "2",
        "--family",
        "full-product",
        "--output",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read_to_string(&out).unwrap();
    let v1 = run(&["validate", "--system", s(&out)]);
    assert_eq!(v1.status.code(), Some(0), "{}", stderr(&v1));

    let sys = permsys::TriangularSystem::from_json(&first).unwrap();
    let again = write(dir.path(), "again.json", &sys.to_json());
    assert_eq!(
        std::fs::read_to_string(&again).unwrap().trim(),
        first.trim()
    );
    let v2 = run(&["validate", "--system", s(&again)]);
    assert_eq!(stdout(&v1), stdout(&v2));
}

#[test]
fn validation_failures_exit_1() {
    let dir = TempDir::new().unwrap();
    let planted = write(
        dir.path(),
        "planted.json",
        r#"{"p":5,"m":1,"g":["X1^2 - 1"],"h":["1"],"a":1,"b":1}"#,
    );
    let o = run(&["validate", "--system", s(&planted)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[validation]: not a permutation"));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"p":5,"m":1,"g":["2*X1^2"],"h":["X1^3"],"a":1,"b":1}"#,
    );
    let o = run(&["validate", "--system", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("leading coefficient"), "{err}");
    assert!(err.contains("h_0"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["validate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[usage]:"));

    let o = run(&["validate", "--system", "/nonexistent/file.json"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&[
        "expsum",
        "--system",
        s(&f),
        "--a",
        "1",
        "--k",
        "2",
        "--l",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "expsum",
        "--system",
        s(&f),
        "--a",
        "0",
        "--k",
        "3",
        "--l",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["gen", "--system", s(&f), "--seed", "1,2,3", "--count", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "gen",
        "--system",
        s(&f),
        "--seed",
        "1,2",
        "--count",
        "3",
        "--format",
        "xml",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exit_3() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&["period", "--system", s(&f), "--all", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[budget]:"));
    let o = run(&[
        "period",
        "--system",
        s(&f),
        "--seed",
        "0,0",
        "--budget",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn gen_outputs() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&["gen", "--system", s(&f), "--seed", "2,1", "--count", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "2\n4\n4\n");

    let o = run(&["gen", "--system", s(&f), "--seed", "2,1", "--count", "0"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());

    let o = run(&[
        "gen",
        "--system",
        s(&f),
        "--seed",
        "2,1",
        "--count",
        "2",
        "--format",
        "ndjson",
    ]);
    let lines: Vec<&str> = std::str::from_utf8(&o.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 2);
    let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(v["n"], 1);
    assert_eq!(v["u"][0], 4);

    let o = run(&[
        "gen",
        "--system",
        s(&f),
        "--seed",
        "2,1",
        "--count",
        "7",
        "--format",
        "u64le",
    ]);
    assert_eq!(o.stdout.len(), 7 * 8);

    let o = run(&["gen", "--system", s(&f), "--seed", "random", "--count", "2"]);
    assert!(o.status.success());
    assert!(stderr(&o).starts_with("seed: "));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let o = run(&["new-system", "--p", "1000003", "--m", "3"]);
    let f = write(dir.path(), "big.json", &stdout(&o));
    let a = run(&[
        "gen",
        "--system",
        s(&f),
        "--seed",
        "5,6,7,8",
        "--count",
        "500",
    ]);
    let b = run(&[
        "gen",
        "--system",
        s(&f),
        "--seed",
        "5,6,7,8",
        "--count",
        "500",
        "--threads",
        "1",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn degrees_csv() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&["degrees", "--system", s(&f), "--k-max", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,k,deg_g,predicted_leading,residual"));
    assert!(text.contains("\n0,4,8,"), "{text}");
}

#[test]
fn spectral_commands() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&[
        "expsum",
        "--system",
        s(&f),
        "--a",
        "1",
        "--k",
        "3",
        "--l",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("p,m,k,l,s,abs_direct,abs_collapsed,zero_count,agree,bound,ratio\n"));
    assert!(text.lines().nth(1).unwrap().contains(",true,"));

    let o = run(&[
        "vsum",
        "--system",
        s(&f),
        "--a",
        "1",
        "--N",
        "1,2,3",
        "--c",
        "1",
        "--M",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 4);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("1,0,1,3,25.000000,25.000000,1.0"));
}

#[test]
fn discrepancy_command() {
    let dir = TempDir::new().unwrap();
    let pts = write(dir.path(), "pts.csv", "0.5\n");
    let o = run(&["discrepancy", "--input", s(&pts), "--method", "1d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1d-exact,1,1,0.500000000,1/2"));

    let pts = write(dir.path(), "grid.csv", "1,1\n");
    let o = run(&[
        "discrepancy",
        "--input",
        s(&pts),
        "--method",
        "grid",
        "--modulus",
        "2",
    ]);
    assert!(
        stdout(&o).contains("grid-exact,1,2,0.750000000,3/4"),
        "{}",
        stdout(&o)
    );

    let pts = write(dir.path(), "lat.csv", "0\n0.25\n0.5\n0.75\n");
    let o = run(&[
        "discrepancy",
        "--input",
        s(&pts),
        "--method",
        "etk",
        "--L",
        "3",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("etk-bound,4,1,"));

    let o = run(&["discrepancy", "--input", s(&pts), "--method", "sup"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn avg_discrepancy_command() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&["avg-discrepancy", "--system", s(&f), "--N", "1,2,5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.starts_with("N,regime,bound,mean,min,max,exceed_t0.5,exceed_t1,exceed_t2,exceed_t4\n")
    );
    assert_eq!(text.lines().count(), 4);

    let o = run(&[
        "avg-discrepancy",
        "--system",
        s(&f),
        "--N",
        "1",
        "--distribution",
    ]);
    let text = stdout(&o);
    assert!(text.starts_with("N,discrepancy,exact,seeds\n"));
    // u/5 for u = 0..4, five seeds each
    assert_eq!(
        text.lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u32>().unwrap())
            .sum::<u32>(),
        25
    );
}

#[test]
fn period_command() {
    let dir = TempDir::new().unwrap();
    let f = chain5(dir.path());
    let o = run(&["period", "--system", s(&f), "--seed", "2,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["preperiod"], 0);
    assert!(v["period"].as_u64().unwrap() >= 5);

    let o = run(&["period", "--system", s(&f), "--all"]);
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let summary = lines.last().unwrap();
    assert_eq!(summary["total_states"], 25);
    assert_eq!(summary["bijective"], true);
    let covered: u64 = lines[..lines.len() - 1]
        .iter()
        .map(|r| r["cycle_length"].as_u64().unwrap() * r["count"].as_u64().unwrap())
        .sum();
    assert_eq!(covered, 25);
}

#[test]
fn bench_command() {
    let dir = TempDir::new().unwrap();
    let o = run(&["new-system", "--p", "2305843009213693951", "--m", "3"]);
    let f = write(dir.path(), "m3.json", &stdout(&o));
    let o = run(&["bench", "--system", s(&f), "--steps", "100000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("kernel: chain"));
    assert!(text.contains("mults_per_component: 2,2,2,1"));
    assert!(text.contains("two_mults_per_component: true"));
}
