//! Bit-vector satisfiability: exhaustive enumeration for narrow queries,
//! bit-blasting to SAT for the rest.

use super::bitblast::Blaster;
use super::sat::SatOutcome;
use super::{BackendConfig, BackendError, Deadline, SatResult};
use crate::logic::eval::eval_bool;
use crate::logic::subst::free_vars;
use crate::logic::term::{bv_mask, Sort, Term, Valuation, Value, Var};

fn bits_of(s: Sort) -> u32 {
    match s {
        Sort::Bool => 1,
        Sort::BitVec(w) => w,
        _ => 0,
    }
}

/// Enumerate all assignments, first variable varying slowest.
pub fn exhaustive(phi: &Term, vars: &[Var], deadline: Deadline) -> Result<SatResult, BackendError> {
    let total: u32 = vars.iter().map(|v| bits_of(v.sort)).sum();
    let mut env = Valuation::new();
    let count: u64 = 1u64 << total;
    for n in 0..count {
        if n % 4096 == 4095 && deadline.expired() {
            return Ok(SatResult::Unknown("timeout".into()));
        }
        let mut shift = total;
        for v in vars {
            let w = bits_of(v.sort);
            shift -= w;
            let x = (n >> shift) & bv_mask(w);
            let val = match v.sort {
                Sort::Bool => Value::Bool(x == 1),
                _ => Value::bv(x, w),
            };
            env.insert(v.name.clone(), val);
        }
        match eval_bool(phi, &env) {
            Ok(true) => return Ok(SatResult::Sat(env)),
            Ok(false) => {}
            Err(e) => return Err(BackendError::Unsupported(e.to_string())),
        }
    }
    Ok(SatResult::Unsat)
}

pub fn blast(phi: &Term, vars: &[Var], deadline: Deadline) -> Result<SatResult, BackendError> {
    let mut b = Blaster::new();
    b.assert(phi)?;
    match b.sat.solve(&deadline) {
        SatOutcome::Timeout => Ok(SatResult::Unknown("timeout".into())),
        SatOutcome::Unsat => Ok(SatResult::Unsat),
        SatOutcome::Sat => {
            let mut m = Valuation::new();
            for v in vars {
                let val = b.value_of(&v.name).unwrap_or_else(|| Value::default_of(v.sort));
                m.insert(v.name.clone(), val);
            }
            Ok(SatResult::Sat(m))
        }
    }
}

pub fn check(phi: &Term, cfg: &BackendConfig, deadline: Deadline) -> Result<SatResult, BackendError> {
    let vars: Vec<Var> = free_vars(phi).into_iter().collect();
    let total: u32 = vars.iter().map(|v| bits_of(v.sort)).sum();
    if total <= cfg.bv_exhaustive_width_limit && total < 63 {
        exhaustive(phi, &vars, deadline)
    } else if cfg.bv_bitblast {
        blast(phi, &vars, deadline)
    } else {
        Ok(SatResult::Unknown(format!("{total} free bits exceed the enumeration limit")))
    }
}
