//! Sparse multivariate polynomials with rational coefficients.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{to_f64, Rational};

/// A polynomial in `arity` variables, stored as exponent vector -> coefficient.
///
/// Zero coefficients are never stored, so the zero polynomial has no terms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polynomial {
    arity: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl Polynomial {
    pub fn zero(arity: usize) -> Self {
        Self {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, c: Rational) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(vec![0; arity], c);
        p
    }

    /// The coordinate function `x_{index+1}` (zero-based `index`).
    pub fn var(arity: usize, index: usize) -> Self {
        assert!(index < arity, "variable index out of range");
        let mut exps = vec![0; arity];
        exps[index] = 1;
        let mut p = Self::zero(arity);
        p.add_term(exps, Rational::one());
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, merging duplicates.
    pub fn from_terms<I>(arity: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(arity);
        for (exps, c) in terms {
            if exps.len() != arity {
                return Err(Error::DimensionMismatch {
                    expected: arity,
                    found: exps.len(),
                });
            }
            p.add_term(exps, c);
        }
        Ok(p)
    }

    /// Affine polynomial `c0 + sum_k coeffs[k] * x_k`.
    pub fn affine(constant: Rational, coeffs: &[Rational]) -> Self {
        let arity = coeffs.len();
        let mut p = Self::constant(arity, constant);
        for (k, c) in coeffs.iter().enumerate() {
            let mut exps = vec![0; arity];
            exps[k] = 1;
            p.add_term(exps, c.clone());
        }
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exps).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn is_affine(&self) -> bool {
        self.degree() <= 1
    }

    /// Coefficient of the monomial with exponent vector `exps` (zero if absent).
    pub fn coefficient(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_else(Rational::zero)
    }

    fn check_point_len(&self, len: usize) -> Result<()> {
        if len != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                found: len,
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[Rational]) -> Result<Rational> {
        self.check_point_len(x.len())?;
        let mut total = Rational::zero();
        for (exps, c) in &self.terms {
            let mut term = c.clone();
            for (xi, &e) in x.iter().zip(exps) {
                if e > 0 {
                    term *= num_traits::pow(xi.clone(), e as usize);
                }
            }
            total += term;
        }
        Ok(total)
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        self.check_point_len(x.len())?;
        let mut total = 0.0;
        for (exps, c) in &self.terms {
            let mut term = to_f64(c);
            for (xi, &e) in x.iter().zip(exps) {
                term *= libm::pow(*xi, e as f64);
            }
            total += term;
        }
        Ok(total)
    }

    pub fn partial(&self, var: usize) -> Self {
        assert!(var < self.arity, "variable index out of range");
        let mut out = Self::zero(self.arity);
        for (exps, c) in &self.terms {
            let e = exps[var];
            if e == 0 {
                continue;
            }
            let mut de = exps.clone();
            de[var] = e - 1;
            out.add_term(de, c * Rational::from_integer(e.into()));
        }
        out
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.arity).map(|k| self.partial(k)).collect()
    }

    pub fn gradient_at(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        self.check_point_len(x.len())?;
        self.gradient().iter().map(|g| g.eval(x)).collect()
    }

    pub fn hessian_at(&self, x: &[Rational]) -> Result<Vec<Vec<Rational>>> {
        self.check_point_len(x.len())?;
        self.gradient()
            .iter()
            .map(|g| g.gradient_at(x))
            .collect()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero(self.arity);
        for (exps, v) in &self.terms {
            out.add_term(exps.clone(), v * c);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.arity, Rational::one());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    fn assert_same_arity(&self, other: &Self) {
        assert_eq!(self.arity, other.arity, "polynomial arity mismatch");
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.assert_same_arity(rhs);
        let mut out = self.clone();
        for (exps, c) in &rhs.terms {
            out.add_term(exps.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.assert_same_arity(rhs);
        let mut out = Polynomial::zero(self.arity);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let exps = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest degree first, then lexicographic in the exponent vector
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (i, (exps, c)) in terms.into_iter().enumerate() {
            let negative = *c < Rational::zero();
            let mag = if negative { -(*c).clone() } else { (*c).clone() };
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let is_const = exps.iter().all(|&e| e == 0);
            let mut wrote = false;
            if is_const || !mag.is_one() {
                write!(f, "{}", mag)?;
                wrote = true;
            }
            for (k, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if wrote {
                    write!(f, "*")?;
                }
                write!(f, "x{}", k + 1)?;
                if e > 1 {
                    write!(f, "^{}", e)?;
                }
                wrote = true;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use alloc::string::ToString;

    fn x(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i)
    }

    #[test]
    fn eval_matches_hand_values() {
        // x2^2 - x1 at the origin
        let h = &x(2, 1).pow(2) - &x(2, 0);
        assert_eq!(h.eval(&[int(0), int(0)]).unwrap(), int(0));
        assert_eq!(Polynomial::zero(3).eval(&[int(1), int(-4), ratio(2, 3)]).unwrap(), int(0));
        // x1*x2 + 3 at (1/2, 2)
        let p = &(&x(2, 0) * &x(2, 1)) + &Polynomial::constant(2, int(3));
        assert_eq!(p.eval(&[ratio(1, 2), int(2)]).unwrap(), int(4));
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let p = x(2, 0);
        assert_eq!(
            p.eval(&[int(1)]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn gradient_of_example_constraint() {
        let h = &x(2, 1).pow(2) - &x(2, 0);
        let g = h.gradient();
        assert_eq!(g[0], Polynomial::constant(2, int(-1)));
        assert_eq!(g[1], x(2, 1).scale(&int(2)));
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let c = Polynomial::constant(3, ratio(7, 2));
        assert!(c.gradient().iter().all(Polynomial::is_zero));
    }

    #[test]
    fn power_rule() {
        let p = x(1, 0).pow(2);
        assert_eq!(p.gradient_at(&[int(3)]).unwrap(), vec![int(6)]);
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = &x(2, 0) - &x(2, 0);
        assert!(p.is_zero());
        assert_eq!(p.terms().count(), 0);
    }

    #[test]
    fn display_is_readable() {
        let p = &(&x(2, 1).pow(2) - &x(2, 0)) + &Polynomial::constant(2, ratio(-1, 2));
        assert_eq!(p.to_string(), "x2^2 - x1 - 1/2");
    }
}
