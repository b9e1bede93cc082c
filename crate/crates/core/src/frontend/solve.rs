//! Routing a parsed problem to a synthesizer and reporting the outcome.

use super::{define_fun, Logic, Problem};
use crate::bitvec::{self, BvConfig};
use crate::cegis;
use crate::cle::{nonsep, separable};
use crate::engine::{Ctx, EngineError, TraceEvent, DEFAULT_FUEL};
use crate::logic::spec::Shape;
use crate::logic::term::{Op, Term};
use crate::solver::{Backend, BackendConfig, Deadline};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Stun,
    Cegis,
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverChoice::Stun => "stun",
            SolverChoice::Cegis => "cegis",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub solver: SolverChoice,
    pub backend: BackendConfig,
    pub timeout_ms: Option<u64>,
    pub fuel: u64,
    pub bv_width: Option<u32>,
    pub bv_max_depth: u32,
    pub widening: bool,
    pub trace: bool,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> SolveConfig {
        SolveConfig {
            solver: SolverChoice::Stun,
            backend: BackendConfig::default(),
            timeout_ms: None,
            fuel: DEFAULT_FUEL,
            bv_width: None,
            bv_max_depth: BvConfig::default().max_depth,
            widening: true,
            trace: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Solved,
    UnrealizableSuspected,
    Timeout,
    Error,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Solved => "solved",
            Status::UnrealizableSuspected => "unrealizable-suspected",
            Status::Timeout => "timeout",
            Status::Error => "error",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: Status,
    /// The `define-fun` text of a solved problem.
    pub program: Option<String>,
    pub elapsed_ms: u64,
    pub candidates: u64,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
    #[serde(skip)]
    pub body: Option<Term>,
}

impl RunReport {
    fn failed(status: Status, error: Option<String>) -> RunReport {
        RunReport { status, program: None, elapsed_ms: 0, candidates: 0, verified: false, error, trace: Vec::new(), body: None }
    }
}

/// Operators of the problem's grammar that the bit-vector search understands.
pub fn bv_config(problem: &Problem, max_depth: u32) -> BvConfig {
    let mut cfg = BvConfig { max_depth, ..BvConfig::default() };
    if let Some(ops) = &problem.spec.fun.ops {
        let listed: Vec<Op> = ops.iter().filter_map(|s| Op::from_bv_symbol(s)).collect();
        if !listed.is_empty() {
            cfg.ops = listed;
        }
    }
    cfg
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verification {
    Verified,
    Counterexample(String),
}

/// Check a function body against the whole specification.
pub fn verify_body(ctx: &mut Ctx, problem: &Problem, body: &Term) -> Result<Verification, EngineError> {
    let phi = problem.spec.instantiate(body);
    Ok(match ctx.counterexample(&phi)? {
        None => Verification::Verified,
        Some(m) => Verification::Counterexample(format!("{m:?}")),
    })
}

fn run(ctx: &mut Ctx, problem: &Problem, cfg: &SolveConfig) -> Result<Option<Term>, EngineError> {
    let spec = &problem.spec;
    let ret = spec.fun.ret;
    if cfg.solver == SolverChoice::Cegis {
        return cegis::synthesize(ctx, problem, cfg.seed);
    }
    match (spec.classify(), problem.logic) {
        (Shape::Separable(sep), Logic::Bv(_)) => {
            let t = bitvec::synthesize(ctx, &sep, &bv_config(problem, cfg.bv_max_depth))?;
            Ok(t.map(|t| sep.to_params(&t, &spec.fun.params)))
        }
        (Shape::Separable(sep), _) => {
            let p = separable::synthesize(ctx, &sep)?;
            Ok(p.map(|p| separable::SepCle::new(sep.clone()).to_params(&p, &spec.fun.params).to_term(ret)))
        }
        (Shape::NonSeparable, Logic::Bv(_)) => Err(EngineError::Unsupported("non-separable bit-vector specification".into())),
        (Shape::NonSeparable, _) => Ok(nonsep::synthesize(ctx, spec, cfg.widening)?.map(|p| p.to_term(ret))),
    }
}

/// Synthesize, verify independently, and report.
pub fn solve(problem: &Problem, cfg: &SolveConfig) -> RunReport {
    let resized;
    let problem = match cfg.bv_width {
        Some(w) if matches!(problem.logic, Logic::Bv(_)) => {
            resized = problem.with_bv_width(w);
            &resized
        }
        _ => problem,
    };
    let start = Instant::now();
    let deadline = cfg.timeout_ms.map(Deadline::after_ms).unwrap_or_else(Deadline::none);
    let mut ctx = Ctx::new(Backend::new(cfg.backend.clone()), deadline, cfg.fuel);
    ctx.tracing = cfg.trace;
    let outcome = run(&mut ctx, problem, cfg).and_then(|body| match body {
        None => Ok(None),
        Some(b) => verify_body(&mut ctx, problem, &b).map(|v| Some((b, v))),
    });
    let mut report = match outcome {
        Ok(Some((body, Verification::Verified))) => {
            ctx.event("verified", 0, Some(body.to_string()), None, Some("verified"));
            RunReport {
                status: Status::Solved,
                program: Some(define_fun(&problem.spec.fun, &body)),
                verified: true,
                body: Some(body),
                ..RunReport::failed(Status::Solved, None)
            }
        }
        Ok(Some((body, Verification::Counterexample(c)))) => {
            RunReport::failed(Status::Error, Some(format!("unsound: {body} fails at {c}")))
        }
        Ok(None) => RunReport::failed(Status::UnrealizableSuspected, None),
        Err(EngineError::Timeout) => RunReport::failed(Status::Timeout, None),
        Err(e) => RunReport::failed(Status::Error, Some(e.to_string())),
    };
    report.elapsed_ms = start.elapsed().as_millis() as u64;
    report.candidates = ctx.candidates;
    report.trace = std::mem::take(&mut ctx.trace);
    report
}
