//! Benchmark generators. Each generator writes SyGuS-lite text, which is
//! the source of truth for the benchmark; the parsed problem comes from it.
//!
//! Encodings:
//! - `max_n`: `f(x1..xn) >= xi` for every i and `f = x1 ∨ .. ∨ f = xn`.
//! - `array_search_n`: sorted elements `x1 < .. < xn` and a key `k`; the
//!   result is 0 below `x1`, n above `xn` and i strictly between `xi` and `x(i+1)`.
//! - `array_sum_n`: the sum of the first adjacent pair whose sum exceeds 5, or 0.
//! - `hd-01..05`: width-8 bit tricks given by a reference expression.
//! - `inv-*`: non-separable analogues of inductive-invariant problems; these
//!   are not the original competition files.
//! - `random_lra`: seeded separable constraints over reals.

use crate::frontend::{parse_problem, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Benchmark {
    pub family: String,
    pub name: String,
    pub text: String,
    pub problem: Problem,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("{family} needs n >= {min}, got {n}")]
    TooSmall { family: &'static str, min: usize, n: usize },
    #[error("unknown benchmark {0}")]
    Unknown(String),
}

fn bench(family: &str, name: String, text: String) -> Benchmark {
    let problem = parse_problem(&text).unwrap_or_else(|e| panic!("generated {name} does not parse: {e}\n{text}"));
    Benchmark { family: family.into(), name, text, problem }
}

fn vars(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn header(logic: &str, f: &str, params: &[String], sort: &str, grammar: Option<&str>, decls: &[String]) -> String {
    let ps: Vec<String> = params.iter().map(|p| format!("({p} {sort})")).collect();
    let mut s = format!("(set-logic {logic})\n(synth-fun {f} ({}) {sort}", ps.join(" "));
    if let Some(g) = grammar {
        write!(s, " {g}").unwrap();
    }
    s.push_str(")\n");
    for d in decls {
        writeln!(s, "(declare-var {d} {sort})").unwrap();
    }
    s
}

pub fn max(n: usize) -> Result<Benchmark, GenError> {
    if n < 2 {
        return Err(GenError::TooSmall { family: "max", min: 2, n });
    }
    let xs = vars("x", n);
    let ps = vars("a", n);
    let call = format!("(max{n} {})", xs.join(" "));
    let mut s = header("LIA", &format!("max{n}"), &ps, "Int", None, &xs);
    for x in &xs {
        writeln!(s, "(constraint (>= {call} {x}))").unwrap();
    }
    let eqs: Vec<String> = xs.iter().map(|x| format!("(= {x} {call})")).collect();
    writeln!(s, "(constraint (or {}))\n(check-synth)", eqs.join(" ")).unwrap();
    Ok(bench("max", format!("max_{n}"), s))
}

pub fn array_search(n: usize) -> Result<Benchmark, GenError> {
    if n < 2 {
        return Err(GenError::TooSmall { family: "array_search", min: 2, n });
    }
    let mut xs = vars("x", n);
    let mut ps = vars("y", n);
    let sorted: Vec<String> = (0..n - 1).map(|i| format!("(< {} {})", xs[i], xs[i + 1])).collect();
    let sorted = format!("(and {})", sorted.join(" "));
    xs.push("k".into());
    ps.push("key".into());
    let call = format!("(findIdx {})", xs.join(" "));
    let mut s = header("LIA", "findIdx", &ps, "Int", None, &xs);
    writeln!(s, "(constraint (=> {sorted} (=> (< k x1) (= {call} 0))))").unwrap();
    writeln!(s, "(constraint (=> {sorted} (=> (> k x{n}) (= {call} {n}))))").unwrap();
    for i in 1..n {
        writeln!(s, "(constraint (=> {sorted} (=> (and (> k x{i}) (< k x{})) (= {call} {i}))))", i + 1).unwrap();
    }
    s.push_str("(check-synth)\n");
    Ok(bench("array_search", format!("array_search_{n}"), s))
}

pub fn array_sum(n: usize) -> Result<Benchmark, GenError> {
    if n < 2 {
        return Err(GenError::TooSmall { family: "array_sum", min: 2, n });
    }
    let xs = vars("x", n);
    let ps = vars("y", n);
    let call = format!("(findSum {})", xs.join(" "));
    let mut s = header("LIA", "findSum", &ps, "Int", None, &xs);
    let pair = |i: usize| format!("(+ {} {})", xs[i], xs[i + 1]);
    let mut below: Vec<String> = Vec::new();
    for i in 0..n - 1 {
        let mut cond = below.clone();
        cond.push(format!("(> {} 5)", pair(i)));
        writeln!(s, "(constraint (=> (and {}) (= {call} {})))", cond.join(" "), pair(i)).unwrap();
        below.push(format!("(<= {} 5)", pair(i)));
    }
    writeln!(s, "(constraint (=> (and {}) (= {call} 0)))\n(check-synth)", below.join(" ")).unwrap();
    Ok(bench("array_sum", format!("array_sum_{n}"), s))
}

/// Reference expressions and grammars of the bit-twiddling family.
pub const HD: [(&str, &str, &str); 5] = [
    ("hd-01", "(bvand x (bvsub x #x01))", "(bvadd bvand bvor bvsub)"),
    ("hd-02", "(bvand x (bvadd x #x01))", "(bvadd bvand bvor bvsub)"),
    ("hd-03", "(bvand (bvnot x) (bvsub x #x01))", "(bvadd bvand bvnot bvsub)"),
    ("hd-04", "(bvxor x (bvsub x #x01))", "(bvadd bvand bvsub bvxor)"),
    ("hd-05", "(bvor x (bvsub x #x01))", "(bvadd bvand bvor bvsub)"),
];

pub fn hd(k: usize) -> Result<Benchmark, GenError> {
    let (name, reference, grammar) = *HD.get(k.wrapping_sub(1)).ok_or_else(|| GenError::Unknown(format!("hd-{k:02}")))?;
    let mut s = header("BV", "f", &["y".into()], "(_ BitVec 8)", Some(grammar), &["x".into()]);
    writeln!(s, "(constraint (= (f x) {reference}))\n(check-synth)").unwrap();
    Ok(bench("hd", name.into(), s))
}

/// Non-separable analogues of invariant-generation problems.
pub const INV: [(&str, &str); 5] = [
    (
        "inv-sum",
        "(set-logic LIA)
(synth-fun inv ((i Int)) Int)
(declare-var x Int)
(declare-var y Int)
(constraint (=> (not (= x y)) (= (+ (inv x) (inv y)) 10)))
(check-synth)
",
    ),
    (
        "inv-count",
        "(set-logic LIA)
(synth-fun inv ((i Int)) Int)
(declare-var x Int)
(constraint (= (inv 0) 1))
(constraint (=> (and (= (inv x) 1) (<= 0 x) (<= x 10)) (= (inv (+ x 1)) 1)))
(constraint (= (inv 12) 0))
(check-synth)
",
    ),
    (
        "inv-down",
        "(set-logic LIA)
(synth-fun inv ((i Int)) Int)
(declare-var x Int)
(constraint (= (inv 10) 1))
(constraint (=> (and (= (inv x) 1) (<= 1 x) (<= x 10)) (= (inv (- x 1)) 1)))
(constraint (= (inv (- 2)) 0))
(check-synth)
",
    ),
    (
        "inv-accel",
        "(set-logic LIA)
(synth-fun inv ((i Int) (j Int)) Int)
(declare-var x Int)
(declare-var y Int)
(declare-var u Int)
(declare-var v Int)
(constraint (=> (and (<= 0 x) (<= x 2) (<= 0 y) (<= y 2)) (= (inv x y) 1)))
(constraint (=> (and (= x 4) (= y 0)) (= (inv x y) 0)))
(constraint (=> (and (= (inv x y) 1) (= u (+ x 2)) (= v (+ y 2))) (= (inv u v) 1)))
(check-synth)
",
    ),
    (
        "inv-bounds",
        "(set-logic LIA)
(synth-fun inv ((i Int)) Int)
(declare-var x Int)
(declare-var y Int)
(constraint (=> (< x y) (<= (inv x) (inv y))))
(constraint (= (inv 0) 0))
(constraint (= (inv 3) 1))
(check-synth)
",
    ),
];

pub fn inv(name: &str) -> Result<Benchmark, GenError> {
    let (n, text) = INV.iter().find(|(n, _)| *n == name).ok_or_else(|| GenError::Unknown(name.into()))?;
    Ok(bench("invgen", n.to_string(), text.to_string()))
}

fn random_atom(rng: &mut ChaCha8Rng, xs: &[String], call: &str) -> String {
    let mut terms = Vec::new();
    for x in xs {
        let a: i64 = rng.gen_range(-2..=2);
        if a != 0 {
            terms.push(format!("(* {} {x})", lit(a)));
        }
    }
    let c: i64 = [-1, 1, 1, 2][rng.gen_range(0..4)];
    terms.push(format!("(* {} {call})", lit(c)));
    let rhs = lit(rng.gen_range(-3..=3));
    let rel = ["<=", "<", ">=", ">", "="][rng.gen_range(0..5)];
    let lhs = if terms.len() == 1 { terms.pop().unwrap() } else { format!("(+ {})", terms.join(" ")) };
    format!("({rel} {lhs} {rhs})")
}

fn lit(a: i64) -> String {
    if a < 0 {
        format!("(- {}.0)", -a)
    } else {
        format!("{a}.0")
    }
}

/// A random separable LRA problem; `index` selects one of a seeded stream.
pub fn random_lra(seed: u64, index: usize) -> Benchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
    let n = rng.gen_range(1..=2);
    let xs = vars("x", n);
    let call = format!("(f {})", xs.join(" "));
    let mut s = header("LRA", "f", &vars("a", n), "Real", None, &xs);
    for _ in 0..rng.gen_range(1..=3) {
        let k = rng.gen_range(1..=2);
        let atoms: Vec<String> = (0..k).map(|_| random_atom(&mut rng, &xs, &call)).collect();
        if k == 1 {
            writeln!(s, "(constraint {})", atoms[0]).unwrap();
        } else {
            writeln!(s, "(constraint (or {}))", atoms.join(" ")).unwrap();
        }
    }
    s.push_str("(check-synth)\n");
    bench("random_lra", format!("random_lra_{index:03}"), s)
}

/// Which benchmarks a suite contains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteSpec {
    pub max: Vec<usize>,
    pub array_search: Vec<usize>,
    pub array_sum: Vec<usize>,
    pub hd: Vec<usize>,
    pub inv: bool,
    pub random_lra: usize,
    pub seed: u64,
}

impl Default for SuiteSpec {
    fn default() -> SuiteSpec {
        SuiteSpec {
            max: (2..=10).collect(),
            array_search: (2..=8).collect(),
            array_sum: (2..=6).collect(),
            hd: (1..=5).collect(),
            inv: true,
            random_lra: 10,
            seed: 0,
        }
    }
}

impl SuiteSpec {
    pub fn benchmarks(&self) -> Vec<Benchmark> {
        let mut out = Vec::new();
        out.extend(self.max.iter().filter_map(|&n| max(n).ok()));
        out.extend(self.array_search.iter().filter_map(|&n| array_search(n).ok()));
        out.extend(self.array_sum.iter().filter_map(|&n| array_sum(n).ok()));
        out.extend(self.hd.iter().filter_map(|&k| hd(k).ok()));
        if self.inv {
            out.extend(INV.iter().map(|(n, _)| inv(n).expect("listed")));
        }
        out.extend((0..self.random_lra).map(|i| random_lra(self.seed, i)));
        out
    }
}

/// Write each benchmark to `dir/<family>/<name>.sl`.
pub fn write_all(dir: &std::path::Path, benches: &[Benchmark]) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for b in benches {
        let d = dir.join(&b.family);
        std::fs::create_dir_all(&d)?;
        let p = d.join(format!("{}.sl", b.name));
        std::fs::write(&p, &b.text)?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Logic;
    use crate::logic::spec::Shape;

    #[test]
    fn max2_matches_the_two_variable_spec() {
        let b = max(2).unwrap();
        let Shape::Separable(s) = b.problem.shape() else { panic!() };
        assert_eq!(s.inputs.len(), 2);
        assert_eq!(s.cnf.len(), 3);
        assert!(matches!(max(1), Err(GenError::TooSmall { .. })));
    }

    #[test]
    fn families_classify_as_documented() {
        let spec = SuiteSpec { random_lra: 20, seed: 3, ..SuiteSpec::default() };
        for b in spec.benchmarks() {
            let sep = matches!(b.problem.shape(), Shape::Separable(_));
            match b.family.as_str() {
                "max" | "array_search" | "array_sum" => assert!(sep && b.problem.logic == Logic::Lia, "{}", b.name),
                "hd" => assert!(sep && b.problem.logic == Logic::Bv(8), "{}", b.name),
                "invgen" => assert!(!sep && b.problem.logic == Logic::Lia, "{}", b.name),
                "random_lra" => assert!(sep && b.problem.logic == Logic::Lra, "{}", b.name),
                f => panic!("unexpected family {f}"),
            }
            assert_eq!(parse_problem(&b.problem.to_string()).unwrap(), b.problem);
        }
    }

    #[test]
    fn random_stream_is_seeded() {
        assert_eq!(random_lra(7, 4), random_lra(7, 4));
        let differs = (0..10).any(|i| random_lra(7, i).text != random_lra(8, i).text);
        assert!(differs);
    }

    #[test]
    fn files_land_under_family_directories() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_all(dir.path(), &[max(3).unwrap(), hd(1).unwrap()]).unwrap();
        assert!(paths[0].ends_with("max/max_3.sl"));
        assert!(paths[1].ends_with("hd/hd-01.sl"));
        let text = std::fs::read_to_string(&paths[1]).unwrap();
        assert!(parse_problem(&text).is_ok());
    }
}
