//! Coefficient scalars for the polynomial layers.
//!
//! Three coefficient domains are used throughout the crate:
//!
//! * [`Rat`] — exact rationals, the default for all combinatorial identities;
//! * `f64` — numeric mode, used once Monte Carlo weight estimates enter;
//! * [`WPoly`] — polynomials in formal weight symbols with rational
//!   coefficients. Computing a residual over `WPoly` keeps the dependence on
//!   every graph weight explicit, so the same result can later be evaluated
//!   with an exact table (exact mode) or with Monte Carlo estimates plus
//!   first-order error propagation (numeric mode).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

/// Shorthand for a rational from an integer pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(num.into(), den.into())
}

/// Shorthand for an integer rational.
pub fn rat_int(num: i64) -> Rat {
    Rat::from_integer(num.into())
}

/// Ring operations required of a polynomial coefficient.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, rhs: &Self) -> Self;
    fn sub_ref(&self, rhs: &Self) -> Self;
    fn mul_ref(&self, rhs: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn from_rat(r: &Rat) -> Self;

    /// Best-effort magnitude, used for residual norms and reports.
    fn magnitude(&self) -> f64;
}

impl Scalar for Rat {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn from_rat(r: &Rat) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

/// A monomial in weight symbols: sorted `(symbol, exponent)` pairs.
pub type WMono = Vec<(Arc<str>, u32)>;

/// Sparse polynomial in formal weight symbols over the rationals.
///
/// The empty monomial is the constant term. Weight symbols are introduced
/// only for connected graphs; a disconnected graph's weight is represented
/// as the product of its connected factors' symbols.
#[derive(Clone, PartialEq)]
pub struct WPoly {
    terms: BTreeMap<WMono, Rat>,
}

impl WPoly {
    pub fn constant(r: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !num_traits::Zero::is_zero(&r) {
            terms.insert(Vec::new(), r);
        }
        WPoly { terms }
    }

    /// The formal weight symbol for one connected graph.
    pub fn symbol(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(Arc::from(name), 1)], rat_int(1));
        WPoly { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&WMono, &Rat)> {
        self.terms.iter()
    }

    /// Symbols occurring in this polynomial.
    pub fn symbols(&self) -> Vec<Arc<str>> {
        let mut out: Vec<Arc<str>> = Vec::new();
        for mono in self.terms.keys() {
            for (s, _) in mono {
                if !out.iter().any(|t| t == s) {
                    out.push(s.clone());
                }
            }
        }
        out.sort();
        out
    }

    fn insert(&mut self, mono: WMono, coef: Rat) {
        if num_traits::Zero::is_zero(&coef) {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add_ref(&coef);
                if num_traits::Zero::is_zero(&sum) {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    /// Evaluate with exact values per symbol. `None` if a symbol is missing.
    pub fn eval_exact(&self, values: &BTreeMap<String, Rat>) -> Option<Rat> {
        let mut acc = rat_int(0);
        for (mono, coef) in &self.terms {
            let mut term = coef.clone();
            for (sym, exp) in mono {
                let v = values.get(sym.as_ref())?;
                for _ in 0..*exp {
                    term *= v;
                }
            }
            acc += term;
        }
        Some(acc)
    }

    /// Evaluate with numeric values. `None` if a symbol is missing.
    pub fn eval_f64(&self, values: &BTreeMap<String, f64>) -> Option<f64> {
        let mut acc = 0.0;
        for (mono, coef) in &self.terms {
            let mut term = coef.to_f64()?;
            for (sym, exp) in mono {
                term *= values.get(sym.as_ref())?.powi(*exp as i32);
            }
            acc += term;
        }
        Some(acc)
    }

    /// Partial derivative with respect to one symbol.
    pub fn derivative(&self, sym: &str) -> WPoly {
        let mut out = WPoly::constant(rat_int(0));
        for (mono, coef) in &self.terms {
            if let Some(pos) = mono.iter().position(|(s, _)| s.as_ref() == sym) {
                let exp = mono[pos].1;
                let mut new_mono = mono.clone();
                if exp == 1 {
                    new_mono.remove(pos);
                } else {
                    new_mono[pos].1 = exp - 1;
                }
                out.insert(new_mono, coef * Rat::from_integer(exp.into()));
            }
        }
        out
    }

    /// Delta-method evaluation: value and first-order propagated variance,
    /// given per-symbol `(value, stderr)`.
    pub fn eval_propagate(&self, values: &BTreeMap<String, (f64, f64)>) -> Option<(f64, f64)> {
        let point: BTreeMap<String, f64> = values.iter().map(|(k, v)| (k.clone(), v.0)).collect();
        let val = self.eval_f64(&point)?;
        let mut var = 0.0;
        for sym in self.symbols() {
            let (_, sigma) = values.get(sym.as_ref())?;
            let d = self.derivative(sym.as_ref()).eval_f64(&point)?;
            var += (d * sigma) * (d * sigma);
        }
        Some((val, var))
    }
}

impl fmt::Debug for WPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (mono, coef) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", coef)?;
            for (sym, exp) in mono {
                write!(f, "*{}", sym)?;
                if *exp > 1 {
                    write!(f, "^{}", exp)?;
                }
            }
        }
        Ok(())
    }
}

impl Scalar for WPoly {
    fn zero() -> Self {
        WPoly::constant(rat_int(0))
    }
    fn one() -> Self {
        WPoly::constant(rat_int(1))
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (mono, coef) in &rhs.terms {
            out.insert(mono.clone(), coef.clone());
        }
        out
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (mono, coef) in &rhs.terms {
            out.insert(mono.clone(), -coef.clone());
        }
        out
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        let mut out = WPoly::constant(rat_int(0));
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert(mul_mono(ma, mb), ca * cb);
            }
        }
        out
    }
    fn neg_ref(&self) -> Self {
        let mut out = WPoly::constant(rat_int(0));
        for (mono, coef) in &self.terms {
            out.insert(mono.clone(), -coef.clone());
        }
        out
    }
    fn from_rat(r: &Rat) -> Self {
        WPoly::constant(r.clone())
    }
    fn magnitude(&self) -> f64 {
        // Magnitude of a formal polynomial is only meaningful after
        // evaluation; report the coefficient norm as a fallback.
        self.terms.values().map(|c| c.magnitude()).sum()
    }
}

fn mul_mono(a: &WMono, b: &WMono) -> WMono {
    let mut out = a.to_vec();
    for (sym, exp) in b {
        if let Some(pos) = out.iter().position(|(s, _)| s == sym) {
            out[pos].1 += exp;
        } else {
            out.push((sym.clone(), *exp));
        }
    }
    out.sort();
    out
}

/// Parse a rational from either `a/b` or integer or decimal text.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: num::BigInt = num.trim().parse().ok()?;
        let d: num::BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let digits = frac_part.len() as u32;
        let joined = format!("{}{}", int_part, frac_part);
        let n: num::BigInt = joined.parse().ok()?;
        let d = num::BigInt::from(10u32).pow(digits);
        return Some(Rat::new(n, d));
    }
    let n: num::BigInt = s.parse().ok()?;
    Some(Rat::from_integer(n))
}

/// Render a rational as `a/b` (or `a` when integral).
pub fn format_rat(r: &Rat) -> String {
    if r.denom() == &num::BigInt::one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
