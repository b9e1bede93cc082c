//! Constraint solving: an internal decision procedure for linear arithmetic and
//! fixed-width bit-vectors, and an SMT-LIB2 subprocess client.

mod arith;
pub mod bitblast;
pub mod bv;
pub mod difference;
pub mod fm;
pub mod sat;
pub mod sexp;
pub mod simplex;
pub mod smtlib;

use crate::logic::eval::eval_bool;
use crate::logic::subst::{free_vars, has_invocation, simplify};
use crate::logic::{Sort, Term, Valuation, Value};
use std::path::PathBuf;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Deadline {
        Deadline(None)
    }

    pub fn after(d: Duration) -> Deadline {
        Deadline(Instant::now().checked_add(d))
    }

    pub fn after_ms(ms: u64) -> Deadline {
        Deadline::after(Duration::from_millis(ms))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }

    pub fn earliest(self, o: Deadline) -> Deadline {
        match (self.0, o.0) {
            (Some(a), Some(b)) => Deadline(Some(a.min(b))),
            (a, b) => Deadline(a.or(b)),
        }
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.0.map(|t| t.saturating_duration_since(Instant::now()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn is_unsat(&self) -> bool {
        matches!(self, SatResult::Unsat)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Internal,
    /// An external SMT-LIB2 solver reading a script on stdin.
    SmtLib { path: PathBuf, args: Vec<String> },
}

impl BackendKind {
    /// External solver with the usual stdin flags for well-known executables.
    pub fn smtlib(path: impl Into<PathBuf>) -> BackendKind {
        let path = path.into();
        let stem = path.file_stem().map(|s| s.to_string_lossy().to_lowercase()).unwrap_or_default();
        let args = if stem.starts_with("z3") {
            vec!["-in".into(), "-smt2".into()]
        } else if stem.starts_with("cvc") {
            vec!["--lang=smt2".into(), "--produce-models".into()]
        } else {
            vec![]
        };
        BackendKind::SmtLib { path, args }
    }
}

#[derive(Clone, Debug)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Per-query budget in milliseconds.
    pub query_timeout_ms: u64,
    /// Bit-vector queries with at most this many free bits are enumerated.
    pub bv_exhaustive_width_limit: u32,
    /// Bit-blast wider bit-vector queries to SAT instead of answering unknown.
    pub bv_bitblast: bool,
    /// Branch-and-bound depth for integer problems.
    pub lia_branch_depth: u32,
}

impl Default for BackendConfig {
    fn default() -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Internal,
            query_timeout_ms: 30_000,
            bv_exhaustive_width_limit: 8,
            bv_bitblast: true,
            lia_branch_depth: 48,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("unsupported formula: {0}")]
    Unsupported(String),
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("could not parse solver output: {0}")]
    Parse(String),
    #[error("solver returned a model that does not satisfy the query")]
    BadModel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct BackendStats {
    pub queries: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
}

pub struct Backend {
    pub config: BackendConfig,
    deadline: Deadline,
    pub stats: BackendStats,
}

impl Backend {
    pub fn new(config: BackendConfig) -> Backend {
        Backend { config, deadline: Deadline::none(), stats: BackendStats::default() }
    }

    pub fn internal() -> Backend {
        Backend::new(BackendConfig::default())
    }

    /// Global deadline applied on top of the per-query timeout.
    pub fn set_deadline(&mut self, d: Deadline) {
        self.deadline = d;
    }

    pub fn deadline(&self) -> Deadline {
        self.deadline
    }

    fn query_deadline(&self) -> Deadline {
        Deadline::after_ms(self.config.query_timeout_ms).earliest(self.deadline)
    }

    pub fn check_sat(&mut self, phi: &Term) -> Result<SatResult, BackendError> {
        self.stats.queries += 1;
        let r = self.check_inner(phi);
        match &r {
            Ok(SatResult::Sat(m)) => {
                self.stats.sat += 1;
                if eval_bool(phi, m) != Ok(true) {
                    return Err(BackendError::BadModel);
                }
            }
            Ok(SatResult::Unsat) => self.stats.unsat += 1,
            Ok(SatResult::Unknown(_)) => self.stats.unknown += 1,
            Err(_) => {}
        }
        r
    }

    fn check_inner(&mut self, phi: &Term) -> Result<SatResult, BackendError> {
        if phi.sort() != Sort::Bool {
            return Err(BackendError::Unsupported(format!("non-boolean query {phi}")));
        }
        if has_invocation(phi) {
            return Err(BackendError::Unsupported(format!("uninterpreted invocation in {phi}")));
        }
        let vars = free_vars(phi);
        let s = simplify(phi);
        if s.is_false() {
            return Ok(SatResult::Unsat);
        }
        let complete = |mut m: Valuation| {
            for v in &vars {
                m.entry(v.name.clone()).or_insert_with(|| Value::default_of(v.sort));
            }
            m
        };
        if s.is_true() {
            return Ok(SatResult::Sat(complete(Valuation::new())));
        }
        let deadline = self.query_deadline();
        if deadline.expired() {
            return Ok(SatResult::Unknown("timeout".into()));
        }
        let has_bv = vars.iter().any(|v| matches!(v.sort, Sort::BitVec(_)));
        let has_arith = vars.iter().any(|v| v.sort.is_arith());
        if has_bv && has_arith {
            return Err(BackendError::Unsupported("mixed bit-vector and arithmetic query".into()));
        }
        let r = match &self.config.kind {
            BackendKind::SmtLib { path, args } => smtlib::check(path, args, &s, deadline)?,
            BackendKind::Internal if has_arith => arith::check(&s, deadline, self.config.lia_branch_depth)?,
            BackendKind::Internal => bv::check(&s, &self.config, deadline)?,
        };
        Ok(match r {
            SatResult::Sat(m) => SatResult::Sat(complete(m)),
            o => o,
        })
    }

    /// Validity check: `Some(true)` valid, `Some(false)` with a counterexample
    /// reported through `check_sat`, `None` unknown.
    pub fn is_valid(&mut self, phi: &Term) -> Result<Option<bool>, BackendError> {
        Ok(match self.check_sat(&Term::not(phi.clone()))? {
            SatResult::Unsat => Some(true),
            SatResult::Sat(_) => Some(false),
            SatResult::Unknown(_) => None,
        })
    }
}
