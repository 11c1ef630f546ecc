use std::collections::{HashMap, HashSet};
use std::fmt;

use super::SnarkError;
use crate::algebra::{Field, FieldElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlatOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FlatOp {
    pub fn symbol(self) -> char {
        match self {
            FlatOp::Add => '+',
            FlatOp::Sub => '-',
            FlatOp::Mul => '*',
            FlatOp::Div => '/',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            '+' => FlatOp::Add,
            '-' => FlatOp::Sub,
            '*' => FlatOp::Mul,
            '/' => FlatOp::Div,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(String),
    Const(i128),
}

impl Operand {
    pub fn var(name: &str) -> Self {
        Operand::Var(name.to_owned())
    }

    fn parse(tok: &str) -> Result<Self, SnarkError> {
        if let Ok(v) = tok.parse::<i128>() {
            return Ok(Operand::Const(v));
        }
        if is_ident(tok) {
            return Ok(Operand::Var(tok.to_owned()));
        }
        Err(SnarkError::Parse(format!("bad operand `{tok}`")))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => write!(f, "{v}"),
            Operand::Const(c) => write!(f, "{c}"),
        }
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `target = lhs op rhs`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Statement {
    pub target: String,
    pub lhs: Operand,
    pub op: FlatOp,
    pub rhs: Operand,
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} {} {}", self.target, self.lhs, self.op.symbol(), self.rhs)
    }
}

/// Straight-line program with one operator per statement and one assignment
/// per target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatProgram {
    pub inputs: Vec<String>,
    pub output: String,
    pub statements: Vec<Statement>,
}

impl FlatProgram {
    /// Checks single assignment and that every operand is defined before use.
    pub fn validate(&self) -> Result<(), SnarkError> {
        let mut defined: HashSet<&str> = HashSet::new();
        for i in &self.inputs {
            if !defined.insert(i) {
                return Err(SnarkError::DuplicateAssignment(i.clone()));
            }
        }
        for st in &self.statements {
            for op in [&st.lhs, &st.rhs] {
                if let Operand::Var(v) = op {
                    if !defined.contains(v.as_str()) {
                        return Err(SnarkError::UnknownVariable(v.clone()));
                    }
                }
            }
            if !defined.insert(&st.target) {
                return Err(SnarkError::DuplicateAssignment(st.target.clone()));
            }
        }
        if !self.statements.iter().any(|s| s.target == self.output) {
            return Err(SnarkError::UnknownVariable(self.output.clone()));
        }
        Ok(())
    }

    /// Runs the program, returning every variable's value.
    pub fn execute(&self, field: Field, inputs: &[FieldElement]) -> Result<HashMap<String, FieldElement>, SnarkError> {
        if inputs.len() != self.inputs.len() {
            return Err(SnarkError::InputMismatch { expected: self.inputs.len(), got: inputs.len() });
        }
        let mut env: HashMap<String, FieldElement> =
            self.inputs.iter().cloned().zip(inputs.iter().copied()).collect();
        for st in &self.statements {
            let get = |o: &Operand| match o {
                Operand::Var(v) => env.get(v).copied().ok_or_else(|| SnarkError::UnknownVariable(v.clone())),
                Operand::Const(c) => Ok(field.from_i128(*c)),
            };
            let (l, r) = (get(&st.lhs)?, get(&st.rhs)?);
            let v = match st.op {
                FlatOp::Add => l + r,
                FlatOp::Sub => l - r,
                FlatOp::Mul => l * r,
                FlatOp::Div => l.checked_div(r).map_err(|_| {
                    SnarkError::WitnessExecutionError(format!("division by zero in `{st}`"))
                })?,
            };
            env.insert(st.target.clone(), v);
        }
        Ok(env)
    }

    pub fn eval(&self, field: Field, inputs: &[FieldElement]) -> Result<FieldElement, SnarkError> {
        let env = self.execute(field, inputs)?;
        env.get(&self.output).copied().ok_or_else(|| SnarkError::UnknownVariable(self.output.clone()))
    }

    /// Parses the listing form: an optional `def f(x, y):` header followed by
    /// one `target = a op b` per line. Without a header, inputs are the
    /// variables read before being assigned, in order of appearance.
    pub fn parse(text: &str) -> Result<Self, SnarkError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).peekable();
        let declared = match lines.peek() {
            Some(l) if l.starts_with("def ") => {
                let header = lines.next().unwrap();
                Some(parse_header(header)?)
            }
            _ => None,
        };
        let mut statements = Vec::new();
        for line in lines {
            statements.push(parse_statement(line)?);
        }
        let output = statements
            .last()
            .map(|s| s.target.clone())
            .ok_or_else(|| SnarkError::Parse("program has no statements".into()))?;
        let inputs = declared.unwrap_or_else(|| infer_inputs(&statements));
        let fp = FlatProgram { inputs, output, statements };
        fp.validate()?;
        Ok(fp)
    }
}

fn infer_inputs(statements: &[Statement]) -> Vec<String> {
    let mut assigned = HashSet::new();
    let mut inputs: Vec<String> = Vec::new();
    for st in statements {
        for op in [&st.lhs, &st.rhs] {
            if let Operand::Var(v) = op {
                if !assigned.contains(v) && !inputs.contains(v) {
                    inputs.push(v.clone());
                }
            }
        }
        assigned.insert(st.target.clone());
    }
    inputs
}

pub(crate) fn parse_header(line: &str) -> Result<Vec<String>, SnarkError> {
    let bad = || SnarkError::Parse(format!("bad function header `{line}`"));
    let rest = line.strip_prefix("def ").ok_or_else(bad)?.trim();
    let open = rest.find('(').ok_or_else(bad)?;
    let close = rest.rfind(')').ok_or_else(bad)?;
    if !is_ident(rest[..open].trim()) || !rest[close + 1..].trim().starts_with(':') {
        return Err(bad());
    }
    let args = rest[open + 1..close].trim();
    if args.is_empty() {
        return Ok(Vec::new());
    }
    args.split(',')
        .map(|a| {
            let a = a.trim();
            if is_ident(a) {
                Ok(a.to_owned())
            } else {
                Err(bad())
            }
        })
        .collect()
}

fn parse_statement(line: &str) -> Result<Statement, SnarkError> {
    let (target, rhs) = line.split_once('=').ok_or_else(|| SnarkError::Parse(format!("missing `=` in `{line}`")))?;
    let target = target.trim();
    if !is_ident(target) {
        return Err(SnarkError::Parse(format!("bad target `{target}`")));
    }
    let rhs = rhs.trim();
    if rhs.contains("**") || rhs.contains('%') {
        return Err(SnarkError::UnsupportedOp(rhs.to_owned()));
    }
    // operator position: first symbol after a non-empty left operand
    let split = rhs
        .char_indices()
        .skip(1)
        .find(|(_, c)| FlatOp::from_symbol(*c).is_some());
    let (lhs, op, r) = match split {
        Some((i, c)) => (rhs[..i].trim(), FlatOp::from_symbol(c).unwrap(), rhs[i + 1..].trim()),
        // a bare copy is normalized to multiplication by one
        None => (rhs, FlatOp::Mul, "1"),
    };
    Ok(Statement { target: target.to_owned(), lhs: Operand::parse(lhs)?, op, rhs: Operand::parse(r)? })
}

impl fmt::Display for FlatProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "def f({}):", self.inputs.join(", "))?;
        for st in &self.statements {
            writeln!(f, "    {st}")?;
        }
        Ok(())
    }
}
