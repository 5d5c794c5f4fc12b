//! Sparse multivariate polynomials in the base coordinates `x^1..x^d`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::scalar::{Rat, Scalar};

/// Default bound on the total degree of any computed polynomial.
pub const DEFAULT_DEGREE_CAP: u32 = 24;

/// Polynomial in `x^1..x^d` with sparse exponent maps and deterministic
/// (sorted) term order.
#[derive(Clone, PartialEq)]
pub struct XPoly<C: Scalar> {
    dim: usize,
    terms: BTreeMap<Vec<u8>, C>,
}

impl<C: Scalar> XPoly<C> {
    pub fn zero(dim: usize) -> Self {
        XPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: C) -> Self {
        let mut p = XPoly::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, C::one())
    }

    /// The coordinate monomial `x^i` (0-based index).
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim, "variable index out of range");
        let mut exp = vec![0u8; dim];
        exp[i] = 1;
        let mut p = XPoly::zero(dim);
        p.add_term(exp, C::one());
        p
    }

    /// Monomial builder from explicit exponents.
    pub fn monomial(dim: usize, exps: &[u8], c: C) -> Self {
        assert_eq!(exps.len(), dim);
        let mut p = XPoly::zero(dim);
        p.add_term(exps.to_vec(), c);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as u32).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add_term(&mut self, exp: Vec<u8>, c: C) {
        debug_assert_eq!(exp.len(), self.dim);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add_ref(&c);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = XPoly::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.neg_ref());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = XPoly::zero(self.dim);
        for (e, k) in &self.terms {
            out.add_term(e.clone(), k.mul_ref(c));
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        self.checked_mul(rhs, DEFAULT_DEGREE_CAP)
            .expect("x-polynomial degree cap exceeded")
    }

    pub fn checked_mul(&self, rhs: &Self, cap: u32) -> Result<Self, Error> {
        assert_eq!(self.dim, rhs.dim);
        if self.total_degree() + rhs.total_degree() > cap {
            return Err(Error::DegreeCap {
                degree: self.total_degree() + rhs.total_degree(),
                cap,
            });
        }
        let mut out = XPoly::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let exp: Vec<u8> = ea.iter().zip(eb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(exp, ca.mul_ref(cb));
            }
        }
        Ok(out)
    }

    /// Partial derivative with respect to `x^i` (0-based).
    pub fn diff(&self, i: usize) -> Self {
        assert!(i < self.dim);
        let mut out = XPoly::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut exp = e.clone();
            exp[i] -= 1;
            let factor = C::from_rat(&Rat::from_integer((e[i] as i64).into()));
            out.add_term(exp, c.mul_ref(&factor));
        }
        out
    }

    /// Evaluate at a point with coordinates in the coefficient domain.
    pub fn eval(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.dim);
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    term = term.mul_ref(&point[i]);
                }
            }
            acc = acc.add_ref(&term);
        }
        acc
    }

    /// Map coefficients into another scalar domain.
    pub fn map_coeffs<C2: Scalar>(&self, f: &impl Fn(&C) -> C2) -> XPoly<C2> {
        let mut out = XPoly::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }

    /// Substitute each `x^i` by the given polynomials.
    pub fn substitute(&self, subs: &[XPoly<C>]) -> Result<Self, Error> {
        assert_eq!(subs.len(), self.dim);
        let out_dim = subs.first().map(|p| p.dim).unwrap_or(self.dim);
        let mut out = XPoly::zero(out_dim);
        for (e, c) in &self.terms {
            let mut term = XPoly::constant(out_dim, c.clone());
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    term = term.checked_mul(&subs[i], DEFAULT_DEGREE_CAP)?;
                }
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    pub fn max_coeff_magnitude(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.magnitude())
            .fold(0.0, f64::max)
    }
}

impl<C: Scalar> fmt::Debug for XPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?})", c)?;
            for (i, &exp) in e.iter().enumerate() {
                if exp > 0 {
                    write!(f, "*x{}", i + 1)?;
                    if exp > 1 {
                        write!(f, "^{}", exp)?;
                    }
                }
            }
        }
        Ok(())
    }
}
