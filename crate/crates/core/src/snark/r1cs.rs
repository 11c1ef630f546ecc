use std::collections::HashMap;

use super::flat::{FlatOp, FlatProgram, Operand};
use super::SnarkError;
use crate::algebra::{Field, FieldElement};

/// `⟨s,a⟩ · ⟨s,b⟩ − ⟨s,c⟩ = 0`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub a: Vec<FieldElement>,
    pub b: Vec<FieldElement>,
    pub c: Vec<FieldElement>,
}

/// Layout is `[1, inputs…, intermediates…, out]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct R1cs {
    pub field: Field,
    pub variables: Vec<String>,
    pub num_inputs: usize,
    pub constraints: Vec<Constraint>,
}

pub(crate) const ONE: &str = "~one";

fn dot(s: &[FieldElement], v: &[FieldElement], field: Field) -> FieldElement {
    s.iter().zip(v).fold(field.zero(), |acc, (x, y)| acc + *x * *y)
}

impl R1cs {
    pub fn width(&self) -> usize {
        self.variables.len()
    }

    pub fn output_index(&self) -> usize {
        self.width() - 1
    }

    pub fn check_length(&self, s: &[FieldElement]) -> Result<(), SnarkError> {
        if s.len() != self.width() {
            return Err(SnarkError::WitnessLength { expected: self.width(), got: s.len() });
        }
        Ok(())
    }

    /// Direct constraint-by-constraint check.
    pub fn is_satisfied(&self, s: &[FieldElement]) -> bool {
        s.len() == self.width()
            && self.constraints.iter().all(|k| {
                dot(s, &k.a, self.field) * dot(s, &k.b, self.field) == dot(s, &k.c, self.field)
            })
    }
}

fn layout(fp: &FlatProgram) -> Vec<String> {
    let mut vars = vec![ONE.to_owned()];
    vars.extend(fp.inputs.iter().cloned());
    vars.extend(fp.statements.iter().map(|s| s.target.clone()).filter(|t| *t != fp.output));
    vars.push(fp.output.clone());
    vars
}

pub fn compile_r1cs(fp: &FlatProgram, field: Field) -> Result<R1cs, SnarkError> {
    fp.validate()?;
    let variables = layout(fp);
    let index: HashMap<&str, usize> = variables.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let width = variables.len();
    let lc = |ops: &[(&Operand, i64)]| -> Result<Vec<FieldElement>, SnarkError> {
        let mut v = vec![field.zero(); width];
        for (op, sign) in ops {
            match op {
                Operand::Var(name) => {
                    let i = *index.get(name.as_str()).ok_or_else(|| SnarkError::UnknownVariable(name.clone()))?;
                    v[i] += field.from_i64(*sign);
                }
                Operand::Const(c) => v[0] += field.from_i128(*c) * field.from_i64(*sign),
            }
        }
        Ok(v)
    };
    let constraints = fp
        .statements
        .iter()
        .map(|st| {
            let target = Operand::Var(st.target.clone());
            let one = Operand::Const(1);
            Ok(match st.op {
                FlatOp::Mul => Constraint { a: lc(&[(&st.lhs, 1)])?, b: lc(&[(&st.rhs, 1)])?, c: lc(&[(&target, 1)])? },
                FlatOp::Add => Constraint {
                    a: lc(&[(&st.lhs, 1), (&st.rhs, 1)])?,
                    b: lc(&[(&one, 1)])?,
                    c: lc(&[(&target, 1)])?,
                },
                FlatOp::Sub => Constraint {
                    a: lc(&[(&st.lhs, 1), (&st.rhs, -1)])?,
                    b: lc(&[(&one, 1)])?,
                    c: lc(&[(&target, 1)])?,
                },
                // q = l / r is enforced as q · r = l
                FlatOp::Div => Constraint { a: lc(&[(&target, 1)])?, b: lc(&[(&st.rhs, 1)])?, c: lc(&[(&st.lhs, 1)])? },
            })
        })
        .collect::<Result<_, SnarkError>>()?;
    Ok(R1cs { field, variables, num_inputs: fp.inputs.len(), constraints })
}

/// Executes the program and arranges the values in R1CS layout order.
pub fn witness(fp: &FlatProgram, field: Field, inputs: &[FieldElement]) -> Result<Vec<FieldElement>, SnarkError> {
    let env = fp.execute(field, inputs)?;
    layout(fp)
        .iter()
        .map(|v| if v == ONE { Ok(field.one()) } else { env.get(v).copied().ok_or_else(|| SnarkError::UnknownVariable(v.clone())) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_program() -> FlatProgram {
        FlatProgram::parse("def f(x):\n n = x*x\n m = n*x\n out = m + 8").unwrap()
    }

    fn ints(f: Field, v: &[i64]) -> Vec<FieldElement> {
        v.iter().map(|x| f.from_i64(*x)).collect()
    }

    #[test]
    fn paper_constraint_vectors() {
        let f = Field::default();
        let r = compile_r1cs(&paper_program(), f).unwrap();
        assert_eq!(r.variables, [ONE, "x", "n", "m", "out"]);
        assert_eq!(r.constraints.len(), 3);
        assert_eq!(r.constraints[0].a, ints(f, &[0, 1, 0, 0, 0]));
        assert_eq!(r.constraints[0].b, ints(f, &[0, 1, 0, 0, 0]));
        assert_eq!(r.constraints[0].c, ints(f, &[0, 0, 1, 0, 0]));
        assert_eq!(r.constraints[1].a, ints(f, &[0, 0, 1, 0, 0]));
        assert_eq!(r.constraints[1].b, ints(f, &[0, 1, 0, 0, 0]));
        assert_eq!(r.constraints[1].c, ints(f, &[0, 0, 0, 1, 0]));
        assert_eq!(r.constraints[2].a, ints(f, &[8, 0, 0, 1, 0]));
        assert_eq!(r.constraints[2].b, ints(f, &[1, 0, 0, 0, 0]));
        assert_eq!(r.constraints[2].c, ints(f, &[0, 0, 0, 0, 1]));
    }

    #[test]
    fn paper_witnesses() {
        let f = Field::default();
        let fp = paper_program();
        let r = compile_r1cs(&fp, f).unwrap();
        for (x, want) in [(3, [1, 3, 9, 27, 35]), (0, [1, 0, 0, 0, 8]), (1, [1, 1, 1, 1, 9])] {
            let s = witness(&fp, f, &[f.elem(x)]).unwrap();
            assert_eq!(s, ints(f, &want));
            assert!(r.is_satisfied(&s));
        }
        assert!(!r.is_satisfied(&ints(f, &[1, 3, 9, 27, 36])));
    }

    #[test]
    fn one_gate_one_constraint() {
        let f = Field::default();
        let fp = FlatProgram::parse("def f(x):\n out = x * 1").unwrap();
        assert_eq!(compile_r1cs(&fp, f).unwrap().constraints.len(), 1);
    }

    #[test]
    fn division_and_subtraction_gates() {
        let f = Field::default();
        let fp = FlatProgram::parse("def f(x, y):\n q = x / y\n out = q - x").unwrap();
        let r = compile_r1cs(&fp, f).unwrap();
        let s = witness(&fp, f, &[f.elem(10), f.elem(4)]).unwrap();
        assert!(r.is_satisfied(&s));
        assert_eq!(s[r.output_index()], f.ratio(5, 2).unwrap() - f.elem(10));
        let zero = witness(&fp, f, &[f.elem(10), f.zero()]);
        assert!(matches!(zero, Err(SnarkError::WitnessExecutionError(_))));
    }

    #[test]
    fn unknown_variable() {
        let f = Field::default();
        let mut fp = paper_program();
        fp.statements[1].rhs = Operand::var("z");
        assert_eq!(compile_r1cs(&fp, f), Err(SnarkError::UnknownVariable("z".into())));
    }
}
