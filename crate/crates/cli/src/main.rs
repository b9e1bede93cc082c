use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use stun_core::bench::{write_all, SuiteSpec};
use stun_core::frontend::{parse_problem, solve, SolveConfig, SolverChoice, Status};
use stun_core::solver::{BackendConfig, BackendKind};
use stun_core::suite::{run_suite, to_csv, to_markdown, SuiteConfig};

#[derive(Parser)]
#[command(name = "stun", version, about = "Program synthesis through unification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one SyGuS-lite problem and print its define-fun.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
        #[arg(long, value_enum, default_value = "stun")]
        solver: Solver,
        #[arg(long)]
        timeout_ms: Option<u64>,
        /// Print trace events as JSON lines on stderr.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        emit_json: Option<PathBuf>,
    },
    /// Run the benchmark suite; markdown on stdout.
    Suite {
        #[command(flatten)]
        opts: Opts,
        #[command(flatten)]
        sel: Selection,
        /// Solvers to compare.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "stun,cegis")]
        solvers: Vec<Solver>,
        #[arg(long, default_value_t = 10_000)]
        budget_ms: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        threads: Option<usize>,
        /// Write the CSV table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write all rows, including programs, as JSON here.
        #[arg(long)]
        emit_json: Option<PathBuf>,
    },
    /// Write the benchmark files to DIR/<family>/<name>.sl.
    Gen {
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        #[command(flatten)]
        sel: Selection,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Stun,
    Cegis,
}

impl From<Solver> for SolverChoice {
    fn from(s: Solver) -> SolverChoice {
        match s {
            Solver::Stun => SolverChoice::Stun,
            Solver::Cegis => SolverChoice::Cegis,
        }
    }
}

#[derive(Args)]
struct Opts {
    /// `internal`, `smtlib:<path>`, or `smtlib` to use $STUN_SMT_SOLVER.
    #[arg(long, default_value = "internal")]
    backend: String,
    #[arg(long)]
    fuel: Option<u64>,
    #[arg(long)]
    bv_width: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Selection {
    /// Largest n of the max family.
    #[arg(long, default_value_t = 10)]
    max_n: usize,
    #[arg(long, default_value_t = 8)]
    search_n: usize,
    #[arg(long, default_value_t = 6)]
    sum_n: usize,
    /// Number of random LRA problems.
    #[arg(long, default_value_t = 10)]
    random: usize,
    /// Only these families (max, array_search, array_sum, hd, invgen, random_lra).
    #[arg(long, value_delimiter = ',')]
    family: Vec<String>,
}

impl Selection {
    fn spec(&self, seed: u64) -> SuiteSpec {
        let on = |f: &str| self.family.is_empty() || self.family.iter().any(|g| g == f);
        let range = |f: &str, hi: usize| if on(f) { (2..=hi).collect() } else { vec![] };
        SuiteSpec {
            max: range("max", self.max_n),
            array_search: range("array_search", self.search_n),
            array_sum: range("array_sum", self.sum_n),
            hd: if on("hd") { (1..=5).collect() } else { vec![] },
            inv: on("invgen"),
            random_lra: if on("random_lra") { self.random } else { 0 },
            seed,
        }
    }
}

fn backend(spec: &str) -> Result<BackendConfig, String> {
    let kind = match spec {
        "internal" => BackendKind::Internal,
        "smtlib" => match std::env::var_os("STUN_SMT_SOLVER") {
            Some(p) => BackendKind::smtlib(p),
            None => return Err("--backend smtlib needs a path or STUN_SMT_SOLVER".into()),
        },
        s => match s.strip_prefix("smtlib:") {
            Some(p) if !p.is_empty() => BackendKind::smtlib(p),
            _ => return Err(format!("unknown backend {s}")),
        },
    };
    Ok(BackendConfig { kind, ..BackendConfig::default() })
}

fn solve_config(opts: &Opts) -> Result<SolveConfig, String> {
    let mut cfg = SolveConfig { backend: backend(&opts.backend)?, bv_width: opts.bv_width, seed: opts.seed, ..SolveConfig::default() };
    if let Some(f) = opts.fuel {
        cfg.fuel = f;
    }
    if let Some(w) = opts.bv_width {
        if !(1..=64).contains(&w) {
            return Err(format!("--bv-width {w} is out of range"));
        }
    }
    Ok(cfg)
}

fn write(path: &PathBuf, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Solve { file, opts, solver, timeout_ms, trace, emit_json } => {
            let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let problem = parse_problem(&text).map_err(|e| format!("{}:{e}", file.display()))?;
            let cfg = SolveConfig { solver: solver.into(), timeout_ms, trace, ..solve_config(&opts)? };
            let report = solve(&problem, &cfg);
            for e in &report.trace {
                eprintln!("{}", serde_json::to_string(e).expect("serializable"));
            }
            if let Some(p) = &emit_json {
                write(p, &serde_json::to_string_pretty(&report).expect("serializable"))?;
            }
            match &report.program {
                Some(p) => println!("{p}"),
                None => {
                    let detail = report.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default();
                    eprintln!("{}{detail}", report.status);
                }
            }
            Ok(if report.status == Status::Solved { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Suite { opts, sel, solvers, budget_ms, repeats, threads, csv, emit_json } => {
            let benches = sel.spec(opts.seed).benchmarks();
            let cfg = SuiteConfig {
                solvers: solvers.into_iter().map(Into::into).collect(),
                budget_ms,
                repeats,
                threads,
                solve: solve_config(&opts)?,
            };
            let rows = run_suite(&benches, &cfg);
            print!("{}", to_markdown(&rows));
            if let Some(p) = &csv {
                write(p, &to_csv(&rows))?;
            }
            if let Some(p) = &emit_json {
                write(p, &serde_json::to_string_pretty(&rows).expect("serializable"))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Gen { out, sel, seed } => {
            let paths = write_all(&out, &sel.spec(seed).benchmarks()).map_err(|e| format!("{}: {e}", out.display()))?;
            for p in paths {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
