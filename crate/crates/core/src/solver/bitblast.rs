//! Tseitin encoding of bit-vector formulas into CNF.

use super::sat::{Lit, Solver};
use super::BackendError;
use crate::logic::term::{Name, Op, Sort, Term, Value};
use std::collections::{BTreeMap, HashMap};

pub struct Blaster {
    pub sat: Solver,
    tt: Lit,
    bits: HashMap<Term, Vec<Lit>>,
    bools: HashMap<Term, Lit>,
    pub vars: BTreeMap<Name, (Sort, Vec<Lit>)>,
}

impl Default for Blaster {
    fn default() -> Self {
        Self::new()
    }
}

impl Blaster {
    pub fn new() -> Blaster {
        let mut sat = Solver::new();
        let t = sat.new_var();
        let tt = Lit::new(t, true);
        sat.add_clause(&[tt]);
        Blaster { sat, tt, bits: HashMap::new(), bools: HashMap::new(), vars: BTreeMap::new() }
    }

    fn fresh(&mut self) -> Lit {
        Lit::new(self.sat.new_var(), true)
    }

    fn konst(&self, b: bool) -> Lit {
        if b {
            self.tt
        } else {
            !self.tt
        }
    }

    fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        if a == !self.tt || b == !self.tt {
            return !self.tt;
        }
        if a == self.tt {
            return b;
        }
        if b == self.tt {
            return a;
        }
        let o = self.fresh();
        self.sat.add_clause(&[!o, a]);
        self.sat.add_clause(&[!o, b]);
        self.sat.add_clause(&[o, !a, !b]);
        o
    }

    fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and2(!a, !b)
    }

    fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        if a == self.tt {
            return !b;
        }
        if a == !self.tt {
            return b;
        }
        if b == self.tt {
            return !a;
        }
        if b == !self.tt {
            return a;
        }
        let o = self.fresh();
        self.sat.add_clause(&[!o, a, b]);
        self.sat.add_clause(&[!o, !a, !b]);
        self.sat.add_clause(&[o, !a, b]);
        self.sat.add_clause(&[o, a, !b]);
        o
    }

    fn mux(&mut self, c: Lit, a: Lit, b: Lit) -> Lit {
        if c == self.tt {
            return a;
        }
        if c == !self.tt {
            return b;
        }
        if a == b {
            return a;
        }
        let o = self.fresh();
        self.sat.add_clause(&[!c, !a, o]);
        self.sat.add_clause(&[!c, a, !o]);
        self.sat.add_clause(&[c, !b, o]);
        self.sat.add_clause(&[c, b, !o]);
        o
    }

    fn and_n(&mut self, ls: &[Lit]) -> Lit {
        let mut acc = self.tt;
        for &l in ls {
            acc = self.and2(acc, l);
        }
        acc
    }

    fn or_n(&mut self, ls: &[Lit]) -> Lit {
        let mut acc = !self.tt;
        for &l in ls {
            acc = self.or2(acc, l);
        }
        acc
    }

    fn adder(&mut self, a: &[Lit], b: &[Lit], carry_in: Lit) -> Vec<Lit> {
        let mut c = carry_in;
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let t = self.xor2(a[i], b[i]);
            out.push(self.xor2(t, c));
            let g = self.and2(a[i], b[i]);
            let p = self.and2(t, c);
            c = self.or2(g, p);
        }
        out
    }

    fn shift(&mut self, a: &[Lit], s: &[Lit], left: bool) -> Vec<Lit> {
        let w = a.len();
        let f = self.konst(false);
        let mut cur = a.to_vec();
        let mut stage = 0;
        while stage < s.len() && (1usize << stage) < w {
            let k = 1usize << stage;
            let mut next = Vec::with_capacity(w);
            for i in 0..w {
                let moved = if left {
                    if i >= k {
                        cur[i - k]
                    } else {
                        f
                    }
                } else if i + k < w {
                    cur[i + k]
                } else {
                    f
                };
                next.push(self.mux(s[stage], moved, cur[i]));
            }
            cur = next;
            stage += 1;
        }
        // Any higher shift bit set clears the result.
        let high: Vec<Lit> = s[stage..].to_vec();
        let over = self.or_n(&high);
        cur.into_iter().map(|x| self.and2(!over, x)).collect()
    }

    pub fn bv(&mut self, t: &Term) -> Result<Vec<Lit>, BackendError> {
        if let Some(b) = self.bits.get(t) {
            return Ok(b.clone());
        }
        let w = t.sort().bv_width().ok_or_else(|| BackendError::Unsupported(format!("not a bit-vector: {t}")))? as usize;
        let r = match t {
            Term::Var(v) => {
                let bits: Vec<Lit> = (0..w).map(|_| self.fresh()).collect();
                self.vars.insert(v.name.clone(), (v.sort, bits.clone()));
                bits
            }
            Term::Const(Value::Bv(x, _)) => (0..w).map(|i| self.konst((x >> i) & 1 == 1)).collect(),
            Term::Ite(b) => {
                let c = self.boolean(&b.0)?;
                let x = self.bv(&b.1)?;
                let y = self.bv(&b.2)?;
                (0..w).map(|i| self.mux(c, x[i], y[i])).collect()
            }
            Term::App(op, args) => {
                let a = self.bv(&args[0])?;
                match op {
                    Op::BvNot => a.iter().map(|&l| !l).collect(),
                    Op::BvNeg => {
                        let inv: Vec<Lit> = a.iter().map(|&l| !l).collect();
                        let zero = vec![self.konst(false); w];
                        let one = self.tt;
                        self.adder(&inv, &zero, one)
                    }
                    _ => {
                        let b = self.bv(&args[1])?;
                        match op {
                            Op::BvAnd => (0..w).map(|i| self.and2(a[i], b[i])).collect(),
                            Op::BvOr => (0..w).map(|i| self.or2(a[i], b[i])).collect(),
                            Op::BvXor => (0..w).map(|i| self.xor2(a[i], b[i])).collect(),
                            Op::BvAdd => {
                                let f = self.konst(false);
                                self.adder(&a, &b, f)
                            }
                            Op::BvSub => {
                                let nb: Vec<Lit> = b.iter().map(|&l| !l).collect();
                                let t = self.tt;
                                self.adder(&a, &nb, t)
                            }
                            Op::BvShl => self.shift(&a, &b, true),
                            Op::BvLshr => self.shift(&a, &b, false),
                            _ => return Err(BackendError::Unsupported(format!("operator {}", op.symbol()))),
                        }
                    }
                }
            }
            _ => return Err(BackendError::Unsupported(format!("bit-vector term {t}"))),
        };
        self.bits.insert(t.clone(), r.clone());
        Ok(r)
    }

    pub fn boolean(&mut self, t: &Term) -> Result<Lit, BackendError> {
        if let Some(l) = self.bools.get(t) {
            return Ok(*l);
        }
        let r = match t {
            Term::Const(Value::Bool(b)) => self.konst(*b),
            Term::Var(v) if v.sort == Sort::Bool => {
                let l = self.fresh();
                self.vars.insert(v.name.clone(), (Sort::Bool, vec![l]));
                l
            }
            Term::Ite(b) => {
                let c = self.boolean(&b.0)?;
                let x = self.boolean(&b.1)?;
                let y = self.boolean(&b.2)?;
                self.mux(c, x, y)
            }
            Term::App(op, a) => match op {
                Op::Not => !self.boolean(&a[0])?,
                Op::And => {
                    let ls = a.iter().map(|x| self.boolean(x)).collect::<Result<Vec<_>, _>>()?;
                    self.and_n(&ls)
                }
                Op::Or => {
                    let ls = a.iter().map(|x| self.boolean(x)).collect::<Result<Vec<_>, _>>()?;
                    self.or_n(&ls)
                }
                Op::Implies => {
                    let x = self.boolean(&a[0])?;
                    let y = self.boolean(&a[1])?;
                    self.or2(!x, y)
                }
                Op::Eq if a[0].sort() == Sort::Bool => {
                    let x = self.boolean(&a[0])?;
                    let y = self.boolean(&a[1])?;
                    !self.xor2(x, y)
                }
                Op::Eq => {
                    let x = self.bv(&a[0])?;
                    let y = self.bv(&a[1])?;
                    let eqs: Vec<Lit> = (0..x.len()).map(|i| !self.xor2(x[i], y[i])).collect();
                    self.and_n(&eqs)
                }
                _ => return Err(BackendError::Unsupported(format!("boolean term {t}"))),
            },
            _ => return Err(BackendError::Unsupported(format!("boolean term {t}"))),
        };
        self.bools.insert(t.clone(), r);
        Ok(r)
    }

    pub fn assert(&mut self, t: &Term) -> Result<(), BackendError> {
        let l = self.boolean(t)?;
        self.sat.add_clause(&[l]);
        Ok(())
    }

    pub fn value_of(&self, name: &Name) -> Option<Value> {
        let (sort, bits) = self.vars.get(name)?;
        Some(match sort {
            Sort::Bool => Value::Bool(self.sat.model_value(bits[0].var()) == bits[0].positive()),
            Sort::BitVec(w) => {
                let mut x = 0u64;
                for (i, l) in bits.iter().enumerate() {
                    if self.sat.model_value(l.var()) == l.positive() {
                        x |= 1 << i;
                    }
                }
                Value::bv(x, *w)
            }
            _ => return None,
        })
    }
}
