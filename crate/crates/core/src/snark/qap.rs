use super::r1cs::R1cs;
use super::SnarkError;
use crate::algebra::{FieldElement, Polynomial};

/// Per-variable polynomials with `A_i(n) = a_{n,i}` at constraint index
/// `n = 1..=m`, and `Z = ∏ (x − n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Qap {
    pub a: Vec<Polynomial>,
    pub b: Vec<Polynomial>,
    pub c: Vec<Polynomial>,
    pub z: Polynomial,
    /// Bound on `deg P`, `2(m − 1)`.
    pub degree: usize,
}

impl Qap {
    pub fn num_constraints(&self) -> usize {
        self.z.degree().unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        self.a.len()
    }
}

pub fn build_qap(r1cs: &R1cs) -> Result<Qap, SnarkError> {
    let field = r1cs.field;
    let m = r1cs.constraints.len();
    if m == 0 {
        return Err(SnarkError::EmptyCircuit);
    }
    let xs: Vec<FieldElement> = (1..=m as u64).map(|n| field.elem(n)).collect();
    // Lagrange basis L_n with L_n(k) = [n = k]
    let basis: Vec<Polynomial> = xs
        .iter()
        .enumerate()
        .map(|(n, _)| {
            let points: Vec<_> = xs
                .iter()
                .enumerate()
                .map(|(k, x)| (*x, if k == n { field.one() } else { field.zero() }))
                .collect();
            Polynomial::interpolate(field, &points)
        })
        .collect::<Result<_, _>>()?;
    let lift = |rows: Vec<&[FieldElement]>| -> Vec<Polynomial> {
        (0..r1cs.width())
            .map(|i| {
                basis
                    .iter()
                    .zip(&rows)
                    .fold(Polynomial::zero(field), |acc, (l, row)| &acc + &l.scale(row[i]))
            })
            .collect()
    };
    let a = lift(r1cs.constraints.iter().map(|k| k.a.as_slice()).collect());
    let b = lift(r1cs.constraints.iter().map(|k| k.b.as_slice()).collect());
    let c = lift(r1cs.constraints.iter().map(|k| k.c.as_slice()).collect());
    Ok(Qap { a, b, c, z: Polynomial::vanishing(field, xs), degree: 2 * (m - 1) })
}

fn combine(polys: &[Polynomial], s: &[FieldElement]) -> Polynomial {
    let field = polys[0].field();
    polys.iter().zip(s).fold(Polynomial::zero(field), |acc, (p, si)| &acc + &p.scale(*si))
}

/// `P = A·B − C` and `H = P / Z` without checking the remainder.
pub(crate) fn assemble_unchecked(qap: &Qap, s: &[FieldElement]) -> Result<(Polynomial, Polynomial, Polynomial), SnarkError> {
    if s.len() != qap.width() {
        return Err(SnarkError::WitnessLength { expected: qap.width(), got: s.len() });
    }
    let p = &(&combine(&qap.a, s) * &combine(&qap.b, s)) - &combine(&qap.c, s);
    let (h, rem) = p.divmod(&qap.z)?;
    Ok((p, h, rem))
}

/// Returns `(P, H)` with `P = H·Z` exactly.
pub fn assemble(qap: &Qap, s: &[FieldElement]) -> Result<(Polynomial, Polynomial), SnarkError> {
    let (p, h, rem) = assemble_unchecked(qap, s)?;
    if !rem.is_zero() {
        return Err(SnarkError::WitnessUnsatisfied);
    }
    Ok((p, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Field;
    use crate::snark::r1cs::{compile_r1cs, witness, Constraint};
    use crate::snark::FlatProgram;

    fn paper() -> (Field, R1cs, Qap) {
        let f = Field::default();
        let fp = FlatProgram::parse("def f(x):\n n = x*x\n m = n*x\n out = m + 8").unwrap();
        let r = compile_r1cs(&fp, f).unwrap();
        let q = build_qap(&r).unwrap();
        (f, r, q)
    }

    /// The expected polynomials, as `[c0, c1, c2]` rational pairs.
    fn rational_poly(f: Field, coeffs: [(i64, i64); 3]) -> Polynomial {
        Polynomial::new(f, coeffs.iter().map(|(n, d)| f.ratio(*n, *d).unwrap()).collect())
    }

    #[test]
    fn all_fifteen_polynomials() {
        let (f, _, q) = paper();
        let zero = [(0, 1); 3];
        let half_a2 = [(3, 1), (-5, 2), (1, 2)];
        let a3 = [(-3, 1), (4, 1), (-1, 1)];
        let a4 = [(1, 1), (-3, 2), (1, 2)];
        let expected_a = [[(8, 1), (-12, 1), (4, 1)], half_a2, a3, a4, zero];
        let expected_b = [[(1, 1), (-3, 2), (1, 2)], [(0, 1), (3, 2), (-1, 2)], zero, zero, zero];
        let expected_c = [zero, zero, half_a2, a3, a4];
        for i in 0..5 {
            assert_eq!(q.a[i], rational_poly(f, expected_a[i]), "A_{}", i + 1);
            assert_eq!(q.b[i], rational_poly(f, expected_b[i]), "B_{}", i + 1);
            assert_eq!(q.c[i], rational_poly(f, expected_c[i]), "C_{}", i + 1);
        }
        assert_eq!(q.a[1].to_string(), "1/2x^2 - 5/2x + 3");
        assert_eq!(q.z.to_string(), "x^3 - 6x^2 + 11x - 6");
        assert_eq!(q.degree, 4);
    }

    #[test]
    fn evaluation_reproduces_constraints() {
        let (f, r, q) = paper();
        for (n, k) in r.constraints.iter().enumerate() {
            let x = f.elem(n as u64 + 1);
            assert_eq!(q.a.iter().map(|p| p.eval(x)).collect::<Vec<_>>(), k.a);
            assert_eq!(q.b.iter().map(|p| p.eval(x)).collect::<Vec<_>>(), k.b);
            assert_eq!(q.c.iter().map(|p| p.eval(x)).collect::<Vec<_>>(), k.c);
        }
    }

    #[test]
    fn paper_p_and_h() {
        let (f, _, q) = paper();
        let fp = FlatProgram::parse("def f(x):\n n = x*x\n m = n*x\n out = m + 8").unwrap();
        let s = witness(&fp, f, &[f.elem(3)]).unwrap();
        let (p, h) = assemble(&q, &s).unwrap();
        assert_eq!(p, Polynomial::from_i64s(f, &[36, -6, -74, 54, -10]));
        assert_eq!(h, Polynomial::from_i64s(f, &[-6, -10]));
        assert_eq!(&h * &q.z, p);

        let mut bad = s.clone();
        bad[4] = f.elem(36);
        assert_eq!(assemble(&q, &bad), Err(SnarkError::WitnessUnsatisfied));
    }

    #[test]
    fn trivial_constraints_give_zero_polynomials() {
        let f = Field::default();
        let zeros = vec![f.zero(); 2];
        let r = R1cs {
            field: f,
            variables: vec!["~one".into(), "out".into()],
            num_inputs: 0,
            constraints: vec![Constraint { a: zeros.clone(), b: zeros.clone(), c: zeros }; 2],
        };
        let q = build_qap(&r).unwrap();
        let (p, h) = assemble(&q, &[f.one(), f.elem(5)]).unwrap();
        assert!(p.is_zero() && h.is_zero());
    }

    #[test]
    fn empty_circuit_rejected() {
        let f = Field::default();
        let r = R1cs { field: f, variables: vec!["~one".into()], num_inputs: 0, constraints: vec![] };
        assert_eq!(build_qap(&r), Err(SnarkError::EmptyCircuit));
    }
}
