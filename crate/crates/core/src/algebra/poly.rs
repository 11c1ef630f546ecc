use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::{AlgebraError, Field, FieldElement};

/// Dense univariate polynomial, coefficients lowest degree first.
///
/// Always canonical: the trailing coefficient is non-zero unless the
/// polynomial is zero, in which case `coeffs` is empty.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    field: Field,
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(field: Field, mut coeffs: Vec<FieldElement>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { field, coeffs }
    }

    pub fn from_i64s(field: Field, coeffs: &[i64]) -> Self {
        Self::new(field, coeffs.iter().map(|c| field.from_i64(*c)).collect())
    }

    pub fn zero(field: Field) -> Self {
        Polynomial { field, coeffs: Vec::new() }
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::new(c.field(), vec![c])
    }

    /// The monomial `x`.
    pub fn x(field: Field) -> Self {
        Self::new(field, vec![field.zero(), field.one()])
    }

    /// `prod (x - r)` over the given roots.
    pub fn vanishing(field: Field, roots: impl IntoIterator<Item = FieldElement>) -> Self {
        roots.into_iter().fold(Self::constant(field.one()), |acc, r| {
            &acc * &Self::new(field, vec![-r, field.one()])
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> FieldElement {
        self.coeffs.get(i).copied().unwrap_or_else(|| self.field.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: FieldElement) -> FieldElement {
        self.coeffs.iter().rev().fold(self.field.zero(), |acc, c| acc * x + *c)
    }

    pub fn scale(&self, k: FieldElement) -> Self {
        Self::new(self.field, self.coeffs.iter().map(|c| *c * k).collect())
    }

    pub fn divmod(&self, den: &Polynomial) -> Result<(Polynomial, Polynomial), AlgebraError> {
        let den_deg = den.degree().ok_or(AlgebraError::DivisionByZeroPolynomial)?;
        let lead_inv = den.coeffs[den_deg].inv()?;
        let mut rem = self.coeffs.clone();
        let Some(num_deg) = self.degree().filter(|d| *d >= den_deg) else {
            return Ok((Self::zero(self.field), self.clone()));
        };
        let mut quot = vec![self.field.zero(); num_deg - den_deg + 1];
        for shift in (0..=num_deg - den_deg).rev() {
            let c = rem[shift + den_deg] * lead_inv;
            quot[shift] = c;
            if c.is_zero() {
                continue;
            }
            for (i, d) in den.coeffs.iter().enumerate() {
                rem[shift + i] -= c * *d;
            }
        }
        rem.truncate(den_deg);
        Ok((Self::new(self.field, quot), Self::new(self.field, rem)))
    }

    /// Lagrange interpolation through `points`; the result has degree below
    /// the number of points.
    pub fn interpolate(field: Field, points: &[(FieldElement, FieldElement)]) -> Result<Self, AlgebraError> {
        for (i, (xi, _)) in points.iter().enumerate() {
            if points[..i].iter().any(|(xj, _)| xj == xi) {
                return Err(AlgebraError::DuplicateAbscissa);
            }
        }
        let full = Self::vanishing(field, points.iter().map(|(x, _)| *x));
        let mut acc = Self::zero(field);
        for (xi, yi) in points {
            if yi.is_zero() {
                continue;
            }
            // full / (x - xi) is the basis numerator for xi
            let (basis, _) = full.divmod(&Self::new(field, vec![-*xi, field.one()]))?;
            let denom = basis.eval(*xi);
            acc = &acc + &basis.scale(*yi * denom.inv()?);
        }
        Ok(acc)
    }

    fn zip_with(&self, other: &Polynomial, f: impl Fn(FieldElement, FieldElement) -> FieldElement) -> Self {
        assert_eq!(self.field, other.field, "polynomials over different fields");
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(self.field, (0..n).map(|i| f(self.coeff(i), other.coeff(i))).collect())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial::new(self.field, self.coeffs.iter().map(|c| -*c).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.field, rhs.field, "polynomials over different fields");
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero(self.field);
        }
        let mut out = vec![self.field.zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += *a * *b;
            }
        }
        Polynomial::new(self.field, out)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// Renders with small-rational coefficients, e.g. `1/2x^2 - 5/2x + 3`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let text = c.to_string();
            let (neg, mag) = match text.strip_prefix('-') {
                Some(m) => (true, m.to_owned()),
                None => (false, text),
            };
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let mag = if mag == "1" && i > 0 { String::new() } else { mag };
            match i {
                0 => write!(f, "{mag}")?,
                1 => write!(f, "{mag}x")?,
                _ => write!(f, "{mag}x^{i}")?,
            }
        }
        Ok(())
    }
}
