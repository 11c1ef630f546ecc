use std::collections::HashSet;

use super::flat::{is_ident, parse_header, FlatOp, FlatProgram, Operand, Statement};
use super::SnarkError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Mod,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Const(i128),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    fn vars_into(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) if !out.contains(v) => out.push(v.clone()),
            Expr::Var(_) | Expr::Const(_) => {}
            Expr::Neg(e) => e.vars_into(out),
            Expr::Bin(_, l, r) => {
                l.vars_into(out);
                r.vars_into(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(i128),
    Sym(&'static str),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, SnarkError> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = s[start..i].parse().map_err(|_| SnarkError::Parse(format!("number too large: {}", &s[start..i])))?;
            out.push(Tok::Num(n));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(s[start..i].to_owned()));
        } else if s[i..].starts_with("**") {
            out.push(Tok::Sym("**"));
            i += 2;
        } else {
            let sym = match c {
                '+' => "+",
                '-' => "-",
                '*' => "*",
                '/' => "/",
                '%' => "%",
                '(' => "(",
                ')' => ")",
                _ => return Err(SnarkError::Parse(format!("unexpected character `{c}`"))),
            };
            out.push(Tok::Sym(sym));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_sym(&self) -> Option<&'static str> {
        match self.toks.get(self.pos) {
            Some(Tok::Sym(s)) => Some(s),
            _ => None,
        }
    }

    fn eat(&mut self, sym: &str) -> bool {
        if self.peek_sym() == Some(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, SnarkError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_sym() {
                Some("+") => BinOp::Add,
                Some("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, SnarkError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_sym() {
                Some("*") => BinOp::Mul,
                Some("/") => BinOp::Div,
                Some("%") => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, SnarkError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SnarkError> {
        let base = self.atom()?;
        if self.eat("**") {
            return Ok(Expr::bin(BinOp::Pow, base, self.unary()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, SnarkError> {
        let tok = self.toks.get(self.pos).cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Ident(v)) => Ok(Expr::Var(v)),
            Some(Tok::Num(n)) => Ok(Expr::Const(n)),
            Some(Tok::Sym("(")) => {
                let e = self.expr()?;
                if !self.eat(")") {
                    return Err(SnarkError::Parse("expected `)`".into()));
                }
                Ok(e)
            }
            other => Err(SnarkError::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

pub fn parse_expr(s: &str) -> Result<Expr, SnarkError> {
    let mut p = Parser { toks: tokenize(s)?, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(SnarkError::Parse(format!("trailing input in `{s}`")));
    }
    Ok(e)
}

/// A function body of let-bindings and a returned expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceProgram {
    pub inputs: Vec<String>,
    pub bindings: Vec<(String, Expr)>,
    pub ret: Expr,
}

/// Accepts either a bare expression such as `x**3 + 8` or a small function:
///
/// ```text
/// def f(x):
///     y = x**3
///     return y + 8
/// ```
pub fn parse_source(text: &str) -> Result<SourceProgram, SnarkError> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    match lines.first() {
        None => Err(SnarkError::Parse("empty program".into())),
        Some(first) if first.starts_with("def ") => {
            let inputs = parse_header(first)?;
            let mut bindings = Vec::new();
            for line in &lines[1..] {
                if let Some(ret) = line.strip_prefix("return ") {
                    return Ok(SourceProgram { inputs, bindings, ret: parse_expr(ret)? });
                }
                let (name, e) = line.split_once('=').ok_or_else(|| SnarkError::Parse(format!("bad line `{line}`")))?;
                let name = name.trim();
                if !is_ident(name) {
                    return Err(SnarkError::Parse(format!("bad target `{name}`")));
                }
                bindings.push((name.to_owned(), parse_expr(e)?));
            }
            Err(SnarkError::Parse("function has no return".into()))
        }
        Some(_) if lines.len() == 1 => {
            let ret = parse_expr(lines[0])?;
            let mut inputs = Vec::new();
            ret.vars_into(&mut inputs);
            Ok(SourceProgram { inputs, bindings: Vec::new(), ret })
        }
        Some(_) => Err(SnarkError::Parse("multi-line programs need a `def` header".into())),
    }
}

/// Largest exponent unrolled into multiplications.
const MAX_EXPONENT: i128 = 4096;

/// Integer value of a variable-free exponent expression.
fn const_int(e: &Expr) -> Option<i128> {
    match e {
        Expr::Const(c) => Some(*c),
        Expr::Var(_) => None,
        Expr::Neg(x) => const_int(x)?.checked_neg(),
        Expr::Bin(op, l, r) => {
            let (a, b) = (const_int(l)?, const_int(r)?);
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Pow => a.checked_pow(u32::try_from(b).ok()?),
                BinOp::Div | BinOp::Mod => None,
            }
        }
    }
}

struct Flattener {
    used: HashSet<String>,
    next: usize,
    out: Vec<Statement>,
}

impl Flattener {
    fn fresh(&mut self) -> String {
        loop {
            self.next += 1;
            let name = format!("v{}", self.next);
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }

    fn emit(&mut self, target: String, lhs: Operand, op: FlatOp, rhs: Operand) -> Operand {
        self.out.push(Statement { target: target.clone(), lhs, op, rhs });
        Operand::Var(target)
    }

    /// Flattens `e`; the top node is assigned to `target` when given.
    fn lower(&mut self, e: &Expr, target: Option<String>) -> Result<Operand, SnarkError> {
        let leaf = match e {
            Expr::Var(v) => Some(Operand::Var(v.clone())),
            Expr::Const(c) => Some(Operand::Const(*c)),
            _ => None,
        };
        if let Some(leaf) = leaf {
            return Ok(match target {
                Some(t) => self.emit(t, leaf, FlatOp::Mul, Operand::Const(1)),
                None => leaf,
            });
        }
        let (op, l, r) = match e {
            Expr::Neg(inner) => (FlatOp::Sub, Operand::Const(0), self.lower(inner, None)?),
            Expr::Bin(BinOp::Pow, base, exp) => return self.power(base, exp, target),
            Expr::Bin(BinOp::Mod, _, _) => return Err(SnarkError::UnsupportedOp("%".into())),
            Expr::Bin(op, l, r) => {
                let op = match op {
                    BinOp::Add => FlatOp::Add,
                    BinOp::Sub => FlatOp::Sub,
                    BinOp::Mul => FlatOp::Mul,
                    BinOp::Div => FlatOp::Div,
                    BinOp::Pow | BinOp::Mod => unreachable!(),
                };
                (op, self.lower(l, None)?, self.lower(r, None)?)
            }
            Expr::Var(_) | Expr::Const(_) => unreachable!(),
        };
        let t = target.unwrap_or_else(|| self.fresh());
        Ok(self.emit(t, l, op, r))
    }

    fn power(&mut self, base: &Expr, exp: &Expr, target: Option<String>) -> Result<Operand, SnarkError> {
        let k = match const_int(exp) {
            Some(k) if (0..=MAX_EXPONENT).contains(&k) => k,
            _ => return Err(SnarkError::UnsupportedOp("** with a non-constant or negative exponent".into())),
        };
        if k == 0 {
            return self.lower(&Expr::Const(1), target);
        }
        let b = self.lower(base, None)?;
        if k == 1 {
            return Ok(match target {
                Some(t) => self.emit(t, b, FlatOp::Mul, Operand::Const(1)),
                None => b,
            });
        }
        let mut acc = b.clone();
        for i in 1..k {
            let t = if i == k - 1 { target.clone().unwrap_or_else(|| self.fresh()) } else { self.fresh() };
            acc = self.emit(t, acc, FlatOp::Mul, b.clone());
        }
        Ok(acc)
    }
}

/// Flattens a source program; the returned value is assigned to `out`.
pub fn flatten_source(src: &SourceProgram) -> Result<FlatProgram, SnarkError> {
    let mut used: HashSet<String> = src.inputs.iter().cloned().collect();
    used.extend(src.bindings.iter().map(|(n, _)| n.clone()));
    used.insert("out".into());
    let mut f = Flattener { used, next: 0, out: Vec::new() };
    for (name, e) in &src.bindings {
        f.lower(e, Some(name.clone()))?;
    }
    f.lower(&src.ret, Some("out".into()))?;
    let fp = FlatProgram { inputs: src.inputs.clone(), output: "out".into(), statements: f.out };
    fp.validate()?;
    Ok(fp)
}

pub fn flatten(source: &str) -> Result<FlatProgram, SnarkError> {
    flatten_source(&parse_source(source)?)
}
