//! Batch execution of benchmarks and the result tables.

use crate::bench::Benchmark;
use crate::frontend::{solve, RunReport, SolveConfig, SolverChoice, Status};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub solvers: Vec<SolverChoice>,
    pub budget_ms: u64,
    pub repeats: usize,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Template for each run; solver and timeout are overridden.
    pub solve: SolveConfig,
}

impl Default for SuiteConfig {
    fn default() -> SuiteConfig {
        SuiteConfig {
            solvers: vec![SolverChoice::Stun, SolverChoice::Cegis],
            budget_ms: 10_000,
            repeats: 3,
            threads: None,
            solve: SolveConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub benchmark: String,
    pub family: String,
    pub solver: SolverChoice,
    pub status: Status,
    pub elapsed_ms: u64,
    pub timeout_ms: u64,
    pub candidates: u64,
    pub program: Option<String>,
    pub error: Option<String>,
}

impl ResultRow {
    /// The fields that do not depend on timing.
    pub fn non_timing(&self) -> (String, SolverChoice, Status, Option<String>, Option<String>) {
        (self.benchmark.clone(), self.solver, self.status, self.program.clone(), self.error.clone())
    }
}

fn run_once(b: &Benchmark, cfg: &SolveConfig) -> RunReport {
    catch_unwind(AssertUnwindSafe(|| solve(&b.problem, cfg))).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        RunReport {
            status: Status::Error,
            program: None,
            elapsed_ms: 0,
            candidates: 0,
            verified: false,
            error: Some(format!("panic: {}", msg.unwrap_or_default())),
            trace: Vec::new(),
            body: None,
        }
    })
}

/// Run one benchmark with one solver, repeating for a median time. A run
/// that does not solve is not repeated.
pub fn run_one(b: &Benchmark, solver: SolverChoice, cfg: &SuiteConfig) -> ResultRow {
    let solve = SolveConfig { solver, timeout_ms: Some(cfg.budget_ms), trace: false, ..cfg.solve.clone() };
    let mut runs = vec![run_once(b, &solve)];
    while runs[0].status == Status::Solved && runs.len() < cfg.repeats.max(1) {
        runs.push(run_once(b, &solve));
    }
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by_key(|&i| runs[i].elapsed_ms);
    let median = runs[order[order.len() / 2]].elapsed_ms;
    let r = &runs[0];
    ResultRow {
        benchmark: b.name.clone(),
        family: b.family.clone(),
        solver,
        status: r.status,
        elapsed_ms: median,
        timeout_ms: cfg.budget_ms,
        candidates: r.candidates,
        program: r.program.clone(),
        error: r.error.clone(),
    }
}

/// Every benchmark with every configured solver, in parallel. Rows follow
/// the benchmark order, then the solver order.
pub fn run_suite(benches: &[Benchmark], cfg: &SuiteConfig) -> Vec<ResultRow> {
    let jobs: Vec<(usize, usize)> =
        (0..benches.len()).flat_map(|b| (0..cfg.solvers.len()).map(move |s| (b, s))).collect();
    let work = || jobs.par_iter().map(|&(b, s)| ((b, s), run_one(&benches[b], cfg.solvers[s], cfg))).collect::<Vec<_>>();
    let mut rows = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(work),
        None => work(),
    };
    rows.sort_by_key(|(k, _)| *k);
    rows.into_iter().map(|(_, r)| r).collect()
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["benchmark", "solver", "status", "elapsed_ms"]).expect("in-memory write");
    for r in rows {
        w.write_record([r.benchmark.clone(), r.solver.to_string(), r.status.to_string(), r.elapsed_ms.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// One line per benchmark, one column per solver.
pub fn to_markdown(rows: &[ResultRow]) -> String {
    let mut solvers: Vec<SolverChoice> = Vec::new();
    let mut benches: Vec<&str> = Vec::new();
    for r in rows {
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver);
        }
        if !benches.contains(&r.benchmark.as_str()) {
            benches.push(&r.benchmark);
        }
    }
    let mut s = String::from("| benchmark |");
    for v in &solvers {
        s.push_str(&format!(" {v} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(solvers.len()));
    s.push('\n');
    for b in benches {
        s.push_str(&format!("| {b} |"));
        for v in &solvers {
            let cell = match rows.iter().find(|r| r.benchmark == b && r.solver == *v) {
                Some(r) if r.status == Status::Solved => format!("{} ms", r.elapsed_ms),
                Some(r) if r.status == Status::Timeout => "TO".to_string(),
                Some(r) => r.status.to_string(),
                None => String::new(),
            };
            s.push_str(&format!(" {cell} |"));
        }
        s.push('\n');
    }
    s
}
