//! A small CDCL SAT solver: two watched literals, first-UIP learning,
//! activity-based decisions, phase saving and Luby restarts.

use super::Deadline;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        Lit(var * 2 + if positive { 0 } else { 1 })
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LBool {
    True,
    False,
    Undef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatOutcome {
    Sat,
    Unsat,
    Timeout,
}

/// Answer of a theory hook.
pub enum Hook {
    Consistent,
    /// A clause of currently false literals.
    Conflict(Vec<Lit>),
    Abort,
}

#[derive(Default)]
pub struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    assign: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    phase: Vec<bool>,
    seen: Vec<bool>,
    unsat: bool,
}

fn luby(mut i: u64) -> u64 {
    // Position i (0-based) in the sequence 1 1 2 1 1 2 4 ...
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1u64 << seq
}

impl Solver {
    pub fn new() -> Solver {
        Solver { var_inc: 1.0, ..Default::default() }
    }

    pub fn num_vars(&self) -> u32 {
        self.assign.len() as u32
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.assign.len() as u32;
        self.assign.push(None);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        v
    }

    fn value(&self, l: Lit) -> LBool {
        match self.assign[l.var() as usize] {
            None => LBool::Undef,
            Some(b) => {
                if b == l.positive() {
                    LBool::True
                } else {
                    LBool::False
                }
            }
        }
    }

    pub fn model_value(&self, v: u32) -> bool {
        self.assign[v as usize].unwrap_or(false)
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.assign[v] = Some(l.positive());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Add a clause at decision level zero. Returns false if the formula became unsat.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if self.unsat {
            return false;
        }
        let mut c: Vec<Lit> = Vec::new();
        for &l in lits {
            match self.value(l) {
                LBool::True => return true,
                LBool::False => continue,
                LBool::Undef => {
                    if c.contains(&!l) {
                        return true;
                    }
                    if !c.contains(&l) {
                        c.push(l);
                    }
                }
            }
        }
        match c.len() {
            0 => {
                self.unsat = true;
                false
            }
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
                !self.unsat
            }
            _ => {
                self.attach(c);
                true
            }
        }
    }

    fn attach(&mut self, c: Vec<Lit>) -> usize {
        let i = self.clauses.len();
        self.watches[c[0].idx()].push(i);
        self.watches[c[1].idx()].push(i);
        self.clauses.push(c);
        i
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let fl = !p;
            let ws = std::mem::take(&mut self.watches[fl.idx()]);
            let mut keep = Vec::with_capacity(ws.len());
            let mut conflict = None;
            let mut i = 0;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let c = &mut self.clauses[ci];
                if c[0] == fl {
                    c.swap(0, 1);
                }
                let first = c[0];
                if self.assign[first.var() as usize] == Some(first.positive()) {
                    keep.push(ci);
                    continue;
                }
                let mut moved = false;
                for k in 2..c.len() {
                    let l = c[k];
                    let val = self.assign[l.var() as usize];
                    if val != Some(!l.positive()) {
                        c.swap(1, k);
                        let nw = c[1];
                        self.watches[nw.idx()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                keep.push(ci);
                if self.value(first) == LBool::False {
                    conflict = Some(ci);
                    keep.extend_from_slice(&ws[i..]);
                    break;
                }
                self.enqueue(first, Some(ci));
            }
            self.watches[fl.idx()] = keep;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut counter = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level();
        loop {
            let c = self.clauses[confl].clone();
            let start = if p.is_some() { 1 } else { 0 };
            for &q in &c[start..] {
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= dl {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[pl.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = !pl;
                break;
            }
            confl = self.reason[pl.var() as usize].expect("implied literal has a reason");
            debug_assert_eq!(self.clauses[confl][0], pl);
        }
        for l in &learnt[1..] {
            self.seen[l.var() as usize] = false;
        }
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut mi = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var() as usize] > self.level[learnt[mi].var() as usize] {
                    mi = k;
                }
            }
            learnt.swap(1, mi);
            bt = self.level[learnt[1].var() as usize];
        }
        self.var_inc /= 0.95;
        (learnt, bt)
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for k in (lim..self.trail.len()).rev() {
            let v = self.trail[k].var() as usize;
            self.phase[v] = self.trail[k].positive();
            self.assign[v] = None;
            self.reason[v] = None;
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    /// Undo all decisions so that clauses can be added again.
    pub fn reset(&mut self) {
        self.cancel_until(0);
    }

    fn pick_branch(&self) -> Option<Lit> {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..self.assign.len() {
            if self.assign[v].is_none() && best.is_none_or(|(a, _)| self.activity[v] > a) {
                best = Some((self.activity[v], v));
            }
        }
        best.map(|(_, v)| Lit::new(v as u32, self.phase[v]))
    }

    pub fn solve(&mut self, deadline: &Deadline) -> SatOutcome {
        self.solve_with(deadline, &mut |_, _| Hook::Consistent)
    }

    /// Turn a theory conflict (all literals false) into a propagation conflict.
    fn theory_conflict(&mut self, mut c: Vec<Lit>) -> Option<usize> {
        c.sort_by_key(|l| std::cmp::Reverse(self.level[l.var() as usize]));
        c.dedup();
        let top = c.first().map(|l| self.level[l.var() as usize]).unwrap_or(0);
        if top == 0 {
            self.unsat = true;
            return None;
        }
        if c.len() == 1 {
            self.cancel_until(0);
            self.enqueue(c[0], None);
            return None;
        }
        self.cancel_until(top);
        Some(self.attach(c))
    }

    /// Solve with a theory hook consulted after each propagation fixpoint.
    /// The flag tells the hook that the assignment is complete.
    pub fn solve_with(&mut self, deadline: &Deadline, hook: &mut dyn FnMut(&[Lit], bool) -> Hook) -> SatOutcome {
        if self.unsat {
            return SatOutcome::Unsat;
        }
        if self.propagate().is_some() {
            self.unsat = true;
            return SatOutcome::Unsat;
        }
        let mut conflicts: u64 = 0;
        let mut restart_no = 0u64;
        let mut budget = 100 * luby(restart_no);
        loop {
            let mut found = self.propagate();
            if found.is_none() && budget > 0 {
                let full = self.trail.len() == self.assign.len();
                match hook(&self.trail, full) {
                    Hook::Consistent => {}
                    Hook::Abort => {
                        self.cancel_until(0);
                        return SatOutcome::Timeout;
                    }
                    Hook::Conflict(c) => {
                        found = self.theory_conflict(c);
                        if self.unsat {
                            return SatOutcome::Unsat;
                        }
                        if found.is_none() {
                            continue;
                        }
                    }
                }
            }
            if let Some(confl) = found {
                conflicts += 1;
                if conflicts.is_multiple_of(256) && deadline.expired() {
                    self.cancel_until(0);
                    return SatOutcome::Timeout;
                }
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return SatOutcome::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let ci = self.attach(learnt);
                    self.enqueue(first, Some(ci));
                }
                budget = budget.saturating_sub(1);
            } else {
                if budget == 0 {
                    restart_no += 1;
                    budget = 100 * luby(restart_no);
                    self.cancel_until(0);
                    continue;
                }
                match self.pick_branch() {
                    None => return SatOutcome::Sat,
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn luby_prefix() {
        let s: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(s, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn pigeonhole_is_unsat() {
        // 5 pigeons, 4 holes
        let mut s = Solver::new();
        let p: Vec<Vec<u32>> = (0..5).map(|_| (0..4).map(|_| s.new_var()).collect()).collect();
        for row in &p {
            s.add_clause(&row.iter().map(|&v| Lit::new(v, true)).collect::<Vec<_>>());
        }
        for h in 0..4 {
            for a in 0..5 {
                for b in a + 1..5 {
                    s.add_clause(&[Lit::new(p[a][h], false), Lit::new(p[b][h], false)]);
                }
            }
        }
        assert_eq!(s.solve(&Deadline::none()), SatOutcome::Unsat);
    }

    #[test]
    fn random_3sat_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(3..10u32);
            let m = rng.gen_range(1..45);
            let cls: Vec<Vec<Lit>> = (0..m)
                .map(|_| (0..3).map(|_| Lit::new(rng.gen_range(0..n), rng.gen())).collect())
                .collect();
            let brute = (0..1u32 << n).any(|a| cls.iter().all(|c| c.iter().any(|l| ((a >> l.var()) & 1 == 1) == l.positive())));
            let mut s = Solver::new();
            for _ in 0..n {
                s.new_var();
            }
            for c in &cls {
                s.add_clause(c);
            }
            let r = s.solve(&Deadline::none());
            assert_eq!(r == SatOutcome::Sat, brute);
            if r == SatOutcome::Sat {
                assert!(cls.iter().all(|c| c.iter().any(|l| s.model_value(l.var()) == l.positive())));
            }
        }
    }
}
