//! Batch front-end: chart verification, brute-force oracles, scheme
//! censuses, and symplectic property runs, with machine-readable reports.
//!
//! Exit codes: 0 when every reported check passes, 1 when a check fails,
//! 2 on usage or feasibility errors.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngCore, SeedableRng};
use serde::Serialize;

use localmodel::chart::{chart_oracle, Chart, OracleFiber, SetComparison, Status};
use localmodel::lattice::CaseId;
use localmodel::mat::Mat;
use localmodel::ring::Ring;
use localmodel::scheme::{
    anti_fixed_basis, n_scheme_dimension, nprime_fiber_analyze, zero_fiber_dimension,
    zero_fiber_expected_dim, NPrimePoint, Strategy,
};
use localmodel::symplectic::{
    fiber_pair_action, is_symplectic, random_symplectic, stabilizer_decompose,
    symplectic_complete, StabilizerTriple,
};

const SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(name = "localmodel", version, about = "Exact chart verification and finite-field censuses")]
struct Cli {
    /// Seed for every randomized property run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for parallel enumeration (default: LOCALMODEL_WORKERS
    /// or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Enumeration budget (candidate tuples per run).
    #[arg(long, global = true, default_value_t = localmodel::scheme::DEFAULT_BUDGET)]
    budget: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseArg {
    #[value(name = "odd-m")]
    OddM,
    #[value(name = "odd-0")]
    Odd0,
    #[value(name = "even-m")]
    EvenM,
}

impl CaseArg {
    fn build(self, n: usize, s: usize) -> Result<CaseId, String> {
        match self {
            CaseArg::OddM => CaseId::odd_middle(n, s),
            CaseArg::Odd0 => CaseId::odd_zero(n, s),
            CaseArg::EvenM => CaseId::even_middle(n, s),
        }
        .map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the symbolic chart and verify every condition identically.
    VerifyChart(VerifyArgs),
    /// Compare raw brute-force solutions with the rs-parameterization image.
    Oracle(OracleArgs),
    /// Finite-field point counts and dimension estimates.
    Census(CensusArgs),
    /// Seeded symplectic completion / stabilizer / action property runs.
    Symplectic(SymplecticArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    /// Verify every supported (case, n, s) configuration up to --max-n.
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 9)]
    max_n: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "odd-m")]
    case: CaseArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    /// Comma-separated field sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    q: Vec<u64>,
    #[arg(long, value_enum, default_value = "special")]
    fiber: FiberArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FiberArg {
    Special,
    Nilpotent,
}

#[derive(Args)]
struct CensusArgs {
    /// Census of the fiber over the zero row.
    #[arg(long, conflicts_with_all = ["n_scheme", "fibers"])]
    zero_fiber: bool,
    /// Stratified census of the whole matrix scheme.
    #[arg(long, conflicts_with = "fibers")]
    n_scheme: bool,
    /// Sweep the row-completion fibers over every admissible block.
    #[arg(long)]
    fibers: bool,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, value_delimiter = ',', default_value = "3,5")]
    q: Vec<u64>,
    #[arg(long, value_enum, default_value = "auto")]
    strategy: StrategyArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Auto,
    Naive,
    Stratified,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Naive => Strategy::Naive,
            StrategyArg::Stratified => Strategy::Stratified,
        }
    }
}

#[derive(Args)]
struct SymplecticArgs {
    /// Comma-separated even sizes.
    #[arg(long, value_delimiter = ',', default_value = "4,6")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    q: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CheckRow {
    name: String,
    status: &'static str, // pass | fail | skip
    detail: String,
}

#[derive(Serialize)]
struct CountRow {
    label: String,
    q: u64,
    count: u64,
}

#[derive(Serialize)]
struct DimRow {
    label: String,
    dim: i64,
    expected: Option<i64>,
}

#[derive(Serialize)]
struct Report {
    version: String,
    command: String,
    config: serde_json::Value,
    checks: Vec<CheckRow>,
    counts: Vec<CountRow>,
    dims: Vec<DimRow>,
    wall_ms: u128,
}

impl Report {
    fn new(command: &str, config: serde_json::Value) -> Report {
        Report {
            version: format!("{SCHEMA_VERSION}+{}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config,
            checks: Vec::new(),
            counts: Vec::new(),
            dims: Vec::new(),
            wall_ms: 0,
        }
    }

    fn pass(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(CheckRow { name: name.into(), status: "pass", detail: detail.into() });
    }

    fn fail(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(CheckRow { name: name.into(), status: "fail", detail: detail.into() });
    }

    fn skip(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(CheckRow { name: name.into(), status: "skip", detail: detail.into() });
    }

    fn record_status(&mut self, name: String, status: &Status) {
        match status {
            Status::Verified => self.pass(name, ""),
            Status::NotApplicable => self.skip(name, ""),
            Status::Failed { location, witness } => {
                self.fail(name, format!("{location}: {witness}"))
            }
        }
    }

    fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == "fail")
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes"),
            Format::Csv => {
                let esc = |s: &str| {
                    if s.contains(',') || s.contains('"') || s.contains('\n') {
                        format!("\"{}\"", s.replace('"', "\"\""))
                    } else {
                        s.to_string()
                    }
                };
                let mut out = String::new();
                out.push_str("section,name,q,value,status,detail\n");
                let _ = writeln!(out, "meta,version,,{},,", esc(&self.version));
                let _ = writeln!(out, "meta,command,,{},,", esc(&self.command));
                let _ = writeln!(out, "meta,config,,{},,", esc(&self.config.to_string()));
                for c in &self.checks {
                    let _ = writeln!(out, "check,{},,,{},{}", esc(&c.name), c.status, esc(&c.detail));
                }
                for c in &self.counts {
                    let _ = writeln!(out, "count,{},{},{},,", esc(&c.label), c.q, c.count);
                }
                for d in &self.dims {
                    let expected = d.expected.map(|e| e.to_string()).unwrap_or_default();
                    let _ = writeln!(out, "dim,{},,{},,expected={}", esc(&d.label), d.dim, expected);
                }
                let _ = writeln!(out, "meta,wall_ms,,{},,", self.wall_ms);
                out
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn run_verify(args: &VerifyArgs, report: &mut Report) -> Result<(), String> {
    let mut cases = Vec::new();
    if args.sweep {
        let mut n = 3;
        while n <= args.max_n {
            if n % 2 == 1 {
                let m = (n - 1) / 2;
                for s in 1..=m {
                    cases.push(CaseId::odd_middle(n, s).unwrap());
                    cases.push(CaseId::odd_zero(n, s).unwrap());
                }
            } else {
                for s in 1..=n / 2 {
                    cases.push(CaseId::even_middle(n, s).unwrap());
                }
            }
            n += 1;
        }
    } else {
        let (Some(case), Some(n), Some(s)) = (args.case, args.n, args.s) else {
            return Err("verify-chart requires --case, --n, and --s (or --sweep)".into());
        };
        cases.push(case.build(n, s)?);
    }
    for case in cases {
        let tag = format!("{} n={} s={}", case.label(), case.n, case.s);
        let chart = Chart::build(&case).map_err(|e| e.to_string())?;
        let rs = case.r * case.s;
        report.dims.push(DimRow {
            label: format!("{tag} free variables"),
            dim: chart.free_count() as i64,
            expected: Some(rs as i64),
        });
        if chart.free_count() == rs {
            report.pass(format!("{tag}: free variables = rs"), format!("{rs}"));
        } else {
            report.fail(
                format!("{tag}: free variables = rs"),
                format!("{} != {}", chart.free_count(), rs),
            );
        }
        let cond = chart.verify().map_err(|e| e.to_string())?;
        for check in &cond.checks {
            report.record_status(format!("{tag}: {:?}", check.id), &check.status);
            for (name, status) in &check.details {
                if status.is_failure() {
                    report.record_status(format!("{tag}: {:?}/{name}", check.id), status);
                }
            }
        }
    }
    Ok(())
}

fn run_oracle(args: &OracleArgs, budget: u64, report: &mut Report) -> Result<(), String> {
    let case = args.case.build(args.n, args.s)?;
    let fiber = match args.fiber {
        FiberArg::Special => OracleFiber::Special,
        FiberArg::Nilpotent => OracleFiber::NilpotentGeneric,
    };
    for &q in &args.q {
        let out = chart_oracle(&case, q, fiber, budget).map_err(|e| e.to_string())?;
        let tag = format!("{} n={} s={} q={q}", case.label(), case.n, case.s);
        report.counts.push(CountRow { label: format!("{tag} raw solutions"), q, count: out.raw_count });
        report.counts.push(CountRow { label: format!("{tag} parameter points"), q, count: out.param_count });
        let detail = format!(
            "raw {} vs parameterization {} ({})",
            out.raw_count,
            out.param_count,
            match out.comparison {
                SetComparison::Exact => "set equality",
                SetComparison::CountOnly => "count comparison; characteristic 2",
            }
        );
        if out.equal {
            report.pass(format!("{tag}: oracle equality"), detail);
        } else {
            report.fail(format!("{tag}: oracle equality"), detail);
        }
    }
    Ok(())
}

fn run_census(args: &CensusArgs, budget: u64, report: &mut Report) -> Result<(), String> {
    let strategy: Strategy = args.strategy.into();
    if args.m < 1 || args.s < 1 || args.s > args.m {
        return Err(format!("census requires 1 <= s <= m, got m={} s={}", args.m, args.s));
    }
    if args.zero_fiber {
        let (censuses, dim) = zero_fiber_dimension(args.m, args.s, &args.q, budget, strategy)
            .map_err(|e| e.to_string())?;
        for c in &censuses {
            for (rank, count) in &c.per_rank {
                report.counts.push(CountRow {
                    label: format!("zero fiber rank {rank} ({})", c.strategy),
                    q: c.q,
                    count: *count,
                });
            }
            report.counts.push(CountRow { label: "zero fiber total".into(), q: c.q, count: c.total });
            if c.all_ranks_even {
                report.pass(format!("q={}: only even ranks", c.q), format!("max rank {}", c.max_rank));
            } else {
                report.fail(format!("q={}: only even ranks", c.q), format!("{:?}", c.per_rank));
            }
        }
        let expected = zero_fiber_expected_dim(args.m, args.s) as i64;
        report.dims.push(DimRow { label: "zero fiber".into(), dim, expected: Some(expected) });
        if dim == expected {
            report.pass("zero fiber dimension matches formula", format!("{dim}"));
        } else {
            report.fail("zero fiber dimension matches formula", format!("{dim} != {expected}"));
        }
    } else if args.n_scheme {
        let summary = n_scheme_dimension(args.m, args.s, &args.q, budget, strategy)
            .map_err(|e| e.to_string())?;
        for census in &summary.per_q {
            for st in &census.strata {
                report.counts.push(CountRow { label: st.label.clone(), q: census.q, count: st.count });
            }
            report.counts.push(CountRow { label: "total".into(), q: census.q, count: census.total });
        }
        for (label, dim) in &summary.stratum_dims {
            report.dims.push(DimRow { label: label.clone(), dim: *dim, expected: None });
        }
        let rs = summary.rs as i64;
        report.dims.push(DimRow { label: "largest stratum".into(), dim: summary.largest_dim, expected: Some(rs) });
        if summary.largest_dim == rs {
            report.pass("largest stratum has dimension rs", format!("{} (rs = {rs})", summary.largest_stratum));
        } else {
            report.fail("largest stratum has dimension rs", format!("{} != {rs}", summary.largest_dim));
        }
        if summary.zero_stratum_dim < rs {
            report.pass("zero stratum strictly smaller", format!("{} < {rs}", summary.zero_stratum_dim));
        } else {
            report.fail("zero stratum strictly smaller", format!("{} >= {rs}", summary.zero_stratum_dim));
        }
    } else if args.fibers {
        let size = 2 * args.m - 2;
        for &q in &args.q {
            let ring = localmodel::scheme::field_for_q(q).map_err(|e| e.to_string())?;
            let basis = anti_fixed_basis(&ring, size);
            let mut counter = vec![0u64; basis.len()];
            let mut analyzed = 0u64;
            let mut mismatches = 0u64;
            loop {
                let mut y1 = Mat::zeros(&ring, size, size);
                for (t, b) in basis.iter().enumerate() {
                    y1 = y1
                        .add_checked(&b.scale(&ring.element_at(counter[t])))
                        .expect("shape");
                }
                if (&y1 * &y1).is_zero() {
                    let rank = y1.rank().map_err(|e| e.to_string())?;
                    if rank + 1 <= args.s {
                        let fa = nprime_fiber_analyze(&y1, args.s, budget).map_err(|e| e.to_string())?;
                        analyzed += 1;
                        if !fa.matches {
                            mismatches += 1;
                        }
                    }
                }
                let mut done = true;
                for d in counter.iter_mut() {
                    *d += 1;
                    if *d < q {
                        done = false;
                        break;
                    }
                    *d = 0;
                }
                if done || basis.is_empty() {
                    break;
                }
            }
            report.counts.push(CountRow { label: "fiber analyses".into(), q, count: analyzed });
            if mismatches == 0 {
                report.pass(format!("q={q}: fibers match prediction"), format!("{analyzed} blocks"));
            } else {
                report.fail(format!("q={q}: fibers match prediction"), format!("{mismatches} mismatches"));
            }
        }
    } else {
        return Err("census requires one of --zero-fiber, --n-scheme, --fibers".into());
    }
    Ok(())
}

fn run_symplectic(args: &SymplecticArgs, seed: u64, report: &mut Report) -> Result<(), String> {
    let ring = Ring::prime_field(args.q).map_err(|e| e.to_string())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for &two_m in &args.sizes {
        if two_m < 4 || two_m % 2 != 0 {
            return Err(format!("sizes must be even and >= 4, got {two_m}"));
        }
        let mut completion_ok = 0usize;
        let mut done = 0;
        while done < args.trials {
            let c = Mat::from_fn(&ring, 1, two_m, |_, _| ring.random(&mut rng));
            if c.is_zero() {
                continue;
            }
            let g = symplectic_complete(&c).map_err(|e| e.to_string())?;
            if is_symplectic(&g) && g.row_mat(0) == c {
                completion_ok += 1;
            }
            done += 1;
        }
        let name = format!("size {two_m}: completion first-row/symplecticity");
        if completion_ok == args.trials {
            report.pass(name, format!("{completion_ok}/{}", args.trials));
        } else {
            report.fail(name, format!("{completion_ok}/{}", args.trials));
        }

        let mut roundtrip_ok = 0usize;
        for _ in 0..args.trials {
            let t = StabilizerTriple {
                g1: random_symplectic(&ring, two_m - 2, &mut rng),
                g2: Mat::from_fn(&ring, 1, two_m - 2, |_, _| ring.random(&mut rng)),
                g3: ring.random(&mut rng),
            };
            let g = t.assemble();
            if let Ok(back) = stabilizer_decompose(&g) {
                if back.g1 == t.g1 && back.g2 == t.g2 && back.g3 == t.g3 {
                    roundtrip_ok += 1;
                }
            }
        }
        let name = format!("size {two_m}: triple round-trip");
        if roundtrip_ok == args.trials {
            report.pass(name, format!("{roundtrip_ok}/{}", args.trials));
        } else {
            report.fail(name, format!("{roundtrip_ok}/{}", args.trials));
        }

        let size = two_m - 2;
        let m = two_m / 2;
        let j = localmodel::lattice::j2_mat(&ring, size);
        let mut action_ok = 0usize;
        for _ in 0..args.trials {
            let (y1, s) = if size >= 4 && rng.next_u64() % 2 == 0 {
                let mut u = Mat::zeros(&ring, 1, size);
                u.set(0, 0, ring.one());
                let mut v = Mat::zeros(&ring, 1, size);
                v.set(0, 1, ring.one());
                let s_mat = &(&u.transpose() * &v) - &(&v.transpose() * &u);
                let seed_mat = (&j * &s_mat).neg();
                let g = random_symplectic(&ring, size, &mut rng);
                (&(&g.inverse().map_err(|e| e.to_string())? * &seed_mat) * &g, 3usize)
            } else {
                (Mat::zeros(&ring, size, size), m)
            };
            let rank = y1.rank().map_err(|e| e.to_string())?;
            let basis = if rank + 1 == s {
                y1.row_space_basis().map_err(|e| e.to_string())?
            } else {
                y1.left_kernel_basis().map_err(|e| e.to_string())?
            };
            let mut y2 = Mat::zeros(&ring, 1, size);
            for b in &basis {
                y2 = y2.add_checked(&b.scale(&ring.random(&mut rng))).expect("shape");
            }
            let before = NPrimePoint { y1: y1.clone(), y2: y2.clone() };
            let t = StabilizerTriple {
                g1: random_symplectic(&ring, size, &mut rng),
                g2: Mat::from_fn(&ring, 1, size, |_, _| ring.random(&mut rng)),
                g3: ring.random(&mut rng),
            };
            let (y1m, y2m) = fiber_pair_action(&y1, &y2, &t).map_err(|e| e.to_string())?;
            let after = NPrimePoint { y1: y1m, y2: y2m };
            if before.is_valid(s).map_err(|e| e.to_string())?
                && after.is_valid(s).map_err(|e| e.to_string())?
            {
                action_ok += 1;
            }
        }
        let name = format!("size {two_m}: fiber action preservation");
        if action_ok == args.trials {
            report.pass(name, format!("{action_ok}/{}", args.trials));
        } else {
            report.fail(name, format!("{action_ok}/{}", args.trials));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli
        .workers
        .or_else(|| std::env::var("LOCALMODEL_WORKERS").ok().and_then(|v| v.parse().ok()));
    if let Some(w) = workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }

    let (command, config) = describe(&cli);
    let mut report = Report::new(&command, config);
    let start = Instant::now();
    let result = match &cli.cmd {
        Cmd::VerifyChart(args) => run_verify(args, &mut report),
        Cmd::Oracle(args) => run_oracle(args, cli.budget, &mut report),
        Cmd::Census(args) => run_census(args, cli.budget, &mut report),
        Cmd::Symplectic(args) => run_symplectic(args, cli.seed, &mut report),
    };
    report.wall_ms = start.elapsed().as_millis();

    if let Err(msg) = result {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }

    let rendered = report.render(cli.format);
    match &cli.output {
        Some(path) => {
            if let Err(e) = fs::write(path, rendered) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{rendered}"),
    }
    if report.failed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn describe(cli: &Cli) -> (String, serde_json::Value) {
    use serde_json::json;
    match &cli.cmd {
        Cmd::VerifyChart(a) => (
            "verify-chart".into(),
            json!({
                "case": a.case.map(case_name),
                "n": a.n,
                "s": a.s,
                "sweep": a.sweep,
                "max_n": a.max_n,
                "seed": cli.seed,
                "budget": cli.budget,
            }),
        ),
        Cmd::Oracle(a) => (
            "oracle".into(),
            json!({
                "case": case_name(a.case),
                "n": a.n,
                "s": a.s,
                "q": a.q,
                "fiber": match a.fiber { FiberArg::Special => "special", FiberArg::Nilpotent => "nilpotent" },
                "seed": cli.seed,
                "budget": cli.budget,
            }),
        ),
        Cmd::Census(a) => (
            "census".into(),
            json!({
                "mode": if a.zero_fiber { "zero-fiber" } else if a.n_scheme { "n-scheme" } else { "fibers" },
                "m": a.m,
                "s": a.s,
                "q": a.q,
                "strategy": match a.strategy { StrategyArg::Auto => "auto", StrategyArg::Naive => "naive", StrategyArg::Stratified => "stratified" },
                "seed": cli.seed,
                "budget": cli.budget,
            }),
        ),
        Cmd::Symplectic(a) => (
            "symplectic".into(),
            json!({
                "sizes": a.sizes,
                "q": a.q,
                "trials": a.trials,
                "seed": cli.seed,
                "budget": cli.budget,
            }),
        ),
    }
}

fn case_name(c: CaseArg) -> &'static str {
    match c {
        CaseArg::OddM => "odd-m",
        CaseArg::Odd0 => "odd-0",
        CaseArg::EvenM => "even-m",
    }
}
