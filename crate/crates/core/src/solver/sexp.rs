//! S-expression reader shared by the SMT-LIB client and the problem parser.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l, _) => Some(l),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<&str> {
        self.list()?.first()?.atom()
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s, _) => write!(f, "{s}"),
            Sexp::List(l, _) => {
                write!(f, "(")?;
                for (i, x) in l.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {msg}")]
pub struct SexpError {
    pub pos: Pos,
    pub msg: String,
}

pub fn parse_all(src: &str) -> Result<Vec<Sexp>, SexpError> {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let mut stack: Vec<(Vec<Sexp>, Pos)> = vec![(Vec::new(), Pos::default())];
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let here = Pos { line, col };
        match c {
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    let d = chars[i];
                    advance(&mut i, &mut line, &mut col, d);
                }
            }
            c if c.is_whitespace() => advance(&mut i, &mut line, &mut col, c),
            '(' => {
                stack.push((Vec::new(), here));
                advance(&mut i, &mut line, &mut col, c);
            }
            ')' => {
                if stack.len() == 1 {
                    return Err(SexpError { pos: here, msg: "unbalanced ')'".into() });
                }
                let (items, p) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List(items, p));
                advance(&mut i, &mut line, &mut col, c);
            }
            '"' | '|' => {
                let close = c;
                let mut s = String::from(c);
                advance(&mut i, &mut line, &mut col, c);
                loop {
                    if i >= chars.len() {
                        return Err(SexpError { pos: here, msg: "unterminated literal".into() });
                    }
                    let d = chars[i];
                    s.push(d);
                    advance(&mut i, &mut line, &mut col, d);
                    if d == close {
                        break;
                    }
                }
                let s = if close == '|' { s[1..s.len() - 1].to_string() } else { s };
                stack.last_mut().unwrap().0.push(Sexp::Atom(s, here));
            }
            _ => {
                let mut s = String::new();
                while i < chars.len() {
                    let d = chars[i];
                    if d.is_whitespace() || d == '(' || d == ')' || d == ';' {
                        break;
                    }
                    s.push(d);
                    advance(&mut i, &mut line, &mut col, d);
                }
                stack.last_mut().unwrap().0.push(Sexp::Atom(s, here));
            }
        }
    }
    if stack.len() != 1 {
        let p = stack.last().unwrap().1;
        return Err(SexpError { pos: p, msg: "unclosed '('".into() });
    }
    Ok(stack.pop().unwrap().0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists() {
        let v = parse_all("(a (b 1) |c d|) ; comment\n#x0f").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].to_string(), "(a (b 1) c d)");
        assert_eq!(v[1].atom(), Some("#x0f"));
        assert_eq!(v[1].pos(), Pos { line: 2, col: 1 });
        assert!(parse_all("(a").is_err());
        assert!(parse_all(")").is_err());
    }
}
