use rand::RngCore;

use super::ProofError;
use crate::algebra::{Field, FieldElement};

pub const DEFAULT_REPETITIONS: usize = 10;

/// Square matrix over a prime field, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    field: Field,
    n: usize,
    data: Vec<FieldElement>,
}

impl Matrix {
    pub fn from_rows(field: Field, rows: &[Vec<i64>]) -> Result<Self, ProofError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ProofError::ShapeMismatch);
        }
        let data = rows.iter().flatten().map(|v| field.from_i64(*v)).collect();
        Ok(Matrix { field, n, data })
    }

    pub fn random(field: Field, n: usize, rng: &mut dyn RngCore) -> Self {
        Matrix { field, n, data: (0..n * n).map(|_| field.random(rng)).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> FieldElement {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: FieldElement) {
        self.data[i * self.n + j] = v;
    }

    /// Cubic-time product, used to build honest instances.
    pub fn mul(&self, other: &Matrix) -> Result<Matrix, ProofError> {
        self.check(other)?;
        let n = self.n;
        let mut data = vec![self.field.zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(Matrix { field: self.field, n, data })
    }

    pub fn mul_vec(&self, v: &[FieldElement]) -> Vec<FieldElement> {
        (0..self.n)
            .map(|i| (0..self.n).fold(self.field.zero(), |acc, j| acc + self.get(i, j) * v[j]))
            .collect()
    }

    fn check(&self, other: &Matrix) -> Result<(), ProofError> {
        if self.n != other.n || self.field != other.field {
            return Err(ProofError::ShapeMismatch);
        }
        Ok(())
    }
}

/// One round with the given challenge vector: `A(Br) == Cr`.
pub fn freivalds_round(a: &Matrix, b: &Matrix, c: &Matrix, r: &[FieldElement]) -> Result<bool, ProofError> {
    a.check(b)?;
    a.check(c)?;
    if r.len() != a.n {
        return Err(ProofError::ShapeMismatch);
    }
    Ok(a.mul_vec(&b.mul_vec(r)) == c.mul_vec(r))
}

/// Accepts iff every one of `repetitions` random rounds passes.
pub fn freivalds_verify(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    repetitions: usize,
    rng: &mut dyn RngCore,
) -> Result<bool, ProofError> {
    a.check(b)?;
    a.check(c)?;
    for _ in 0..repetitions {
        let r: Vec<_> = (0..a.n).map(|_| a.field.random(rng)).collect();
        if !freivalds_round(a, b, c, &r)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn m(rows: &[Vec<i64>]) -> Matrix {
        Matrix::from_rows(Field::default(), rows).unwrap()
    }

    #[test]
    fn two_by_two_examples() {
        let f = Field::default();
        let a = m(&[vec![1, 2], vec![3, 4]]);
        let b = m(&[vec![5, 6], vec![7, 8]]);
        let c = m(&[vec![19, 22], vec![43, 50]]);
        assert_eq!(a.mul(&b).unwrap(), c);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        assert!(freivalds_verify(&a, &b, &c, DEFAULT_REPETITIONS, &mut rng).unwrap());

        let bad = m(&[vec![20, 22], vec![43, 50]]);
        let ones = [f.one(), f.one()];
        assert_eq!(a.mul_vec(&b.mul_vec(&ones)), vec![f.elem(41), f.elem(93)]);
        assert_eq!(bad.mul_vec(&ones), vec![f.elem(42), f.elem(93)]);
        assert!(!freivalds_round(&a, &b, &bad, &ones).unwrap());
    }

    #[test]
    fn trivial_and_mismatch() {
        let z = m(&[vec![0]]);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(freivalds_verify(&z, &z, &z, 3, &mut rng).unwrap());
        let two = m(&[vec![1, 0], vec![0, 1]]);
        assert_eq!(freivalds_verify(&z, &two, &z, 1, &mut rng), Err(ProofError::ShapeMismatch));
        assert_eq!(
            Matrix::from_rows(Field::default(), &[vec![1, 2]]),
            Err(ProofError::ShapeMismatch)
        );
    }

    fn planted_false_accept_rate(field: Field, n: usize, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut fooled = 0;
        for _ in 0..trials {
            let a = Matrix::random(field, n, &mut rng);
            let b = Matrix::random(field, n, &mut rng);
            let mut c = a.mul(&b).unwrap();
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            c.set(i, j, c.get(i, j) + field.random_nonzero(&mut rng));
            fooled += usize::from(freivalds_verify(&a, &b, &c, 1, &mut rng).unwrap());
        }
        fooled as f64 / trials as f64
    }

    #[test]
    fn planted_errors_caught_in_large_field() {
        let rate = planted_false_accept_rate(Field::default(), 4, 10_000, 11);
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn planted_errors_small_field_within_bound() {
        // a single wrong entry survives a round only when r_j = 0, so ~1/p
        let f13 = Field::new(13).unwrap();
        let n = 3;
        let rate = planted_false_accept_rate(f13, n, 10_000, 12);
        assert!(rate <= 2.0 * n as f64 / 13.0, "rate = {rate}");
        assert!((rate - 1.0 / 13.0).abs() < 0.02, "rate = {rate}");
    }
}
