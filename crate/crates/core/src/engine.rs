//! The generic recursive synthesis-through-unification procedure.

use crate::logic::term::{Term, Valuation, Var};
use crate::solver::{Backend, BackendError, Deadline, SatResult};
use serde::Serialize;
use std::fmt;

pub const DEFAULT_FUEL: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("timeout")]
    Timeout,
    #[error("fuel exhausted")]
    FuelExhausted,
    #[error("split produced a good space the program does not satisfy: {0}")]
    SplitUnsound(String),
    #[error("verification inconclusive: {0}")]
    Inconclusive(String),
    #[error("final verification failed: {0}")]
    Unsound(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A region of the input space. `guard` is the local condition that was
/// added to the enclosing space; `constraint` is the whole region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Space {
    pub vars: Vec<Var>,
    pub constraint: Term,
    pub guard: Term,
}

impl Space {
    pub fn full(vars: Vec<Var>) -> Space {
        Space { vars, constraint: Term::tt(), guard: Term::tt() }
    }

    pub fn new(vars: Vec<Var>, constraint: Term) -> Space {
        Space { vars, guard: constraint.clone(), constraint }
    }

    /// `self ∧ g`, remembering `g` as the guard.
    pub fn refine(&self, g: Term) -> Space {
        Space { vars: self.vars.clone(), constraint: Term::and(vec![self.constraint.clone(), g.clone()]), guard: g }
    }

    /// `self ∧ ¬g`.
    pub fn without(&self, g: &Term) -> Space {
        self.refine(Term::not(g.clone()))
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constraint)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub event: String,
    pub depth: usize,
    pub candidate: Option<String>,
    pub space: Option<String>,
    pub verdict: Option<String>,
}

/// Per-run state shared by all recursion levels.
pub struct Ctx {
    pub backend: Backend,
    pub deadline: Deadline,
    pub fuel: u64,
    pub candidates: u64,
    pub tracing: bool,
    pub trace: Vec<TraceEvent>,
    /// Bumped whenever a domain learns something new.
    pub epoch: u64,
}

impl Ctx {
    pub fn new(mut backend: Backend, deadline: Deadline, fuel: u64) -> Ctx {
        backend.set_deadline(deadline);
        Ctx { backend, deadline, fuel, candidates: 0, tracing: false, trace: Vec::new(), epoch: 0 }
    }

    pub fn internal() -> Ctx {
        Ctx::new(Backend::internal(), Deadline::none(), DEFAULT_FUEL)
    }

    pub fn tick(&self) -> Result<(), EngineError> {
        if self.deadline.expired() {
            Err(EngineError::Timeout)
        } else {
            Ok(())
        }
    }

    /// Account for one generated candidate.
    pub fn spend(&mut self) -> Result<(), EngineError> {
        self.tick()?;
        if self.fuel == 0 {
            return Err(EngineError::FuelExhausted);
        }
        self.fuel -= 1;
        self.candidates += 1;
        Ok(())
    }

    pub fn event(&mut self, event: &str, depth: usize, candidate: Option<String>, space: Option<String>, verdict: Option<&str>) {
        if !self.tracing {
            return;
        }
        log::trace!("{event} depth={depth} candidate={candidate:?} verdict={verdict:?}");
        self.trace.push(TraceEvent { event: event.to_string(), depth, candidate, space, verdict: verdict.map(str::to_string) });
    }

    /// A model of `phi`, or `None` when unsatisfiable.
    pub fn model(&mut self, phi: &Term) -> Result<Option<Valuation>, EngineError> {
        match self.backend.check_sat(phi)? {
            SatResult::Sat(m) => Ok(Some(m)),
            SatResult::Unsat => Ok(None),
            SatResult::Unknown(r) => {
                if self.deadline.expired() {
                    Err(EngineError::Timeout)
                } else {
                    Err(EngineError::Inconclusive(r))
                }
            }
        }
    }

    pub fn sat(&mut self, phi: &Term) -> Result<bool, EngineError> {
        Ok(self.model(phi)?.is_some())
    }

    /// `Ok(None)` when `phi` is valid, otherwise a falsifying valuation.
    pub fn counterexample(&mut self, phi: &Term) -> Result<Option<Valuation>, EngineError> {
        self.model(&Term::not(phi.clone()))
    }

    pub fn is_empty(&mut self, s: &Space) -> Result<bool, EngineError> {
        Ok(!self.sat(&s.constraint)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    Counterexample(Valuation),
}

/// A program space with its generation, splitting and unification procedures.
pub trait Domain {
    type Program: Clone + fmt::Display;
    /// Outer unification constraint passed down the recursion.
    type Outer: Clone;
    /// Learned unification constraint, global to one run.
    type Learned;
    /// Counterexample constraints of one recursion level.
    type Cegis;

    fn new_cegis(&mut self, space: &Space, psi: &Self::Outer) -> Self::Cegis;

    /// Part of `space` still to be covered under `psi`.
    fn restrict(&mut self, _ctx: &mut Ctx, space: &Space, _psi: &Self::Outer) -> Result<Space, EngineError> {
        Ok(space.clone())
    }

    /// Program for an empty input space.
    fn base(&mut self, psi: &Self::Outer) -> Self::Program;

    fn generate(
        &mut self,
        ctx: &mut Ctx,
        space: &Space,
        phi: &mut Self::Cegis,
        psi: &Self::Outer,
        beta: &Self::Learned,
    ) -> Result<Option<Self::Program>, EngineError>;

    /// An input in `space` and whether `prog` is correct on it.
    fn pick_input(
        &mut self,
        ctx: &mut Ctx,
        space: &Space,
        prog: &Self::Program,
        psi: &Self::Outer,
    ) -> Result<(Valuation, bool), EngineError>;

    fn project(&mut self, phi: &mut Self::Cegis, inp: &Valuation);

    /// `(good, bad)` with `inp ∈ good` and `prog` correct on all of `good`.
    fn split(
        &mut self,
        ctx: &mut Ctx,
        space: &Space,
        prog: &Self::Program,
        inp: &Valuation,
        psi: &Self::Outer,
    ) -> Result<(Space, Space), EngineError>;

    /// Independent check that `prog` is correct on `good`.
    fn check_good(&mut self, ctx: &mut Ctx, prog: &Self::Program, good: &Space, _psi: &Self::Outer) -> Result<bool, EngineError> {
        Ok(self.verify(ctx, prog, good)? == Verdict::Verified)
    }

    fn unif_constr(&mut self, psi: &Self::Outer, good: &Space, prog: &Self::Program) -> Self::Outer;

    fn widen(&mut self, _ctx: &mut Ctx, psi: Self::Outer, _beta: &Self::Learned) -> Result<Self::Outer, EngineError> {
        Ok(psi)
    }

    /// Strengthen `beta` after a failure. Implementations bump `ctx.epoch`
    /// when something new was learned.
    fn learn_from(&mut self, ctx: &mut Ctx, space: &Space, psi: &Self::Outer, beta: &mut Self::Learned) -> Result<(), EngineError>;

    fn unify(&mut self, good: &Space, prog: Self::Program, bad: &Space, child: Self::Program) -> Self::Program;

    fn verify(&mut self, ctx: &mut Ctx, prog: &Self::Program, space: &Space) -> Result<Verdict, EngineError>;
}

/// One recursion level. `None` means no program satisfying `psi` and the
/// learned constraints exists on `space`.
pub fn stun<D: Domain>(
    d: &mut D,
    ctx: &mut Ctx,
    space: &Space,
    psi: &D::Outer,
    beta: &mut D::Learned,
    depth: usize,
) -> Result<Option<D::Program>, EngineError> {
    let space = d.restrict(ctx, space, psi)?;
    if ctx.is_empty(&space)? {
        let p = d.base(psi);
        ctx.event("base", depth, Some(p.to_string()), None, None);
        return Ok(Some(p));
    }
    let mut phi = d.new_cegis(&space, psi);
    loop {
        ctx.tick()?;
        let Some(prog) = d.generate(ctx, &space, &mut phi, psi, beta)? else {
            let before = ctx.epoch;
            d.learn_from(ctx, &space, psi, beta)?;
            let verdict = if ctx.epoch > before { "learned" } else { "nothing-learned" };
            ctx.event("fail", depth, None, Some(space.to_string()), Some(verdict));
            return Ok(None);
        };
        ctx.spend()?;
        let (inp, ok) = d.pick_input(ctx, &space, &prog, psi)?;
        ctx.event("candidate", depth, Some(prog.to_string()), Some(space.to_string()), Some(if ok { "positive" } else { "counterexample" }));
        if !ok {
            d.project(&mut phi, &inp);
            continue;
        }
        let (good, bad) = d.split(ctx, &space, &prog, &inp, psi)?;
        if !d.check_good(ctx, &prog, &good, psi)? {
            return Err(EngineError::SplitUnsound(format!("{prog} on {good}")));
        }
        ctx.event("split", depth, Some(prog.to_string()), Some(good.guard.to_string()), None);
        let next = d.unif_constr(psi, &good, &prog);
        let next = d.widen(ctx, next, beta)?;
        let before = ctx.epoch;
        match stun(d, ctx, &bad, &next, beta, depth + 1)? {
            Some(child) => {
                let p = d.unify(&good, prog, &bad, child);
                ctx.event("unify", depth, Some(p.to_string()), None, None);
                return Ok(Some(p));
            }
            None if ctx.epoch == before => {
                // Retrying would repeat the same search.
                ctx.event("fail", depth, None, Some(space.to_string()), Some("no-progress"));
                return Ok(None);
            }
            None => {}
        }
    }
}

/// Run the procedure on `space` and verify the result on it.
pub fn synthesize<D: Domain>(
    d: &mut D,
    ctx: &mut Ctx,
    space: &Space,
    psi: &D::Outer,
    beta: &mut D::Learned,
) -> Result<Option<D::Program>, EngineError> {
    let Some(p) = stun(d, ctx, space, psi, beta, 0)? else { return Ok(None) };
    match d.verify(ctx, &p, space)? {
        Verdict::Verified => Ok(Some(p)),
        Verdict::Counterexample(c) => Err(EngineError::Unsound(format!("{p} fails at {c:?}"))),
    }
}
