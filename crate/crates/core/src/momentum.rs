//! Momentum-block symbols: polynomials in `m` momentum covectors
//! `p^1..p^m` whose coefficients are [`XPoly`] polynomials in `x`, plus
//! formal power series in the deformation parameter built from them.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::poly::{XPoly, DEFAULT_DEGREE_CAP};
use crate::scalar::{Rat, Scalar};

/// Polynomial in momentum blocks `p^1..p^m` over `x`-polynomial coefficients.
///
/// The monomial key concatenates the per-block exponent vectors, so for
/// `blocks = m` and dimension `d` a key has length `m * d`. Terms are kept in
/// sorted order and zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct MomentumSymbol<C: Scalar> {
    dim: usize,
    blocks: usize,
    terms: BTreeMap<Vec<u8>, XPoly<C>>,
}

impl<C: Scalar> MomentumSymbol<C> {
    pub fn zero(dim: usize, blocks: usize) -> Self {
        MomentumSymbol {
            dim,
            blocks,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_xpoly(blocks: usize, p: XPoly<C>) -> Self {
        let mut out = MomentumSymbol::zero(p.dim(), blocks);
        out.add_term(vec![0; blocks * p.dim()], p);
        out
    }

    pub fn constant(dim: usize, blocks: usize, c: C) -> Self {
        Self::from_xpoly(blocks, XPoly::constant(dim, c))
    }

    /// The momentum coordinate `p^block_i` (both 0-based).
    pub fn momentum_var(dim: usize, blocks: usize, block: usize, i: usize) -> Self {
        assert!(block < blocks && i < dim);
        let mut key = vec![0u8; blocks * dim];
        key[block * dim + i] = 1;
        let mut out = MomentumSymbol::zero(dim, blocks);
        out.add_term(key, XPoly::one(dim));
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &XPoly<C>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, key: Vec<u8>, coef: XPoly<C>) {
        debug_assert_eq!(key.len(), self.blocks * self.dim);
        if coef.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&coef);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.dim, self.blocks), (rhs.dim, rhs.blocks));
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.neg());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, p) in &self.terms {
            out.add_term(k.clone(), p.scale(c));
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        self.scale(&C::from_rat(r))
    }

    pub fn scale_xpoly(&self, q: &XPoly<C>) -> Self {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, p) in &self.terms {
            out.add_term(k.clone(), p.mul(q));
        }
        out
    }

    pub fn momentum_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|k| k.iter().map(|&e| e as u32).sum())
            .max()
            .unwrap_or(0)
    }

    /// Degree in one momentum block for a given key.
    fn key_block_degree(key: &[u8], dim: usize, block: usize) -> u32 {
        key[block * dim..(block + 1) * dim]
            .iter()
            .map(|&e| e as u32)
            .sum()
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        self.checked_mul(rhs, DEFAULT_DEGREE_CAP)
            .expect("momentum degree cap exceeded")
    }

    pub fn checked_mul(&self, rhs: &Self, cap: u32) -> Result<Self, Error> {
        assert_eq!((self.dim, self.blocks), (rhs.dim, rhs.blocks));
        let d = self.momentum_degree() + rhs.momentum_degree();
        if d > cap {
            return Err(Error::DegreeCap { degree: d, cap });
        }
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let key: Vec<u8> = ka.iter().zip(kb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(key, ca.checked_mul(cb, cap)?);
            }
        }
        Ok(out)
    }

    /// Partial derivative with respect to `p^block_i`.
    pub fn diff_p(&self, block: usize, i: usize) -> Self {
        assert!(block < self.blocks && i < self.dim);
        let pos = block * self.dim + i;
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, c) in &self.terms {
            if k[pos] == 0 {
                continue;
            }
            let mut key = k.clone();
            key[pos] -= 1;
            let factor = C::from_rat(&Rat::from_integer((k[pos] as i64).into()));
            out.add_term(key, c.scale(&factor));
        }
        out
    }

    /// Partial derivative with respect to `x^i`.
    pub fn diff_x(&self, i: usize) -> Self {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.diff(i));
        }
        out
    }

    /// Re-route momentum blocks: old block `b` is replaced by the sum of the
    /// new blocks listed in `map[b]` (an empty list sets that block to zero).
    /// Substituting a sum re-expands multinomially.
    pub fn remap_blocks(&self, new_blocks: usize, map: &[Vec<usize>]) -> Self {
        assert_eq!(map.len(), self.blocks);
        for targets in map {
            for &t in targets {
                assert!(t < new_blocks);
            }
        }
        let d = self.dim;
        let mut out = MomentumSymbol::zero(d, new_blocks);
        'term: for (key, coef) in &self.terms {
            // Expand block by block; keep a list of (new_key, multiplier).
            let mut parts: Vec<(Vec<u8>, Rat)> =
                vec![(vec![0u8; new_blocks * d], Rat::from_integer(1.into()))];
            for b in 0..self.blocks {
                let targets = &map[b];
                for i in 0..d {
                    let e = key[b * d + i];
                    if e == 0 {
                        continue;
                    }
                    if targets.is_empty() {
                        continue 'term; // block substituted by zero
                    }
                    let splits = compositions(e, targets.len());
                    let mut next: Vec<(Vec<u8>, Rat)> = Vec::new();
                    for (k, mult) in &parts {
                        for split in &splits {
                            let mut k2 = k.clone();
                            for (t, &cnt) in targets.iter().zip(split.iter()) {
                                k2[t * d + i] += cnt;
                            }
                            next.push((k2, mult * multinomial(e, split)));
                        }
                    }
                    parts = next;
                }
            }
            for (k2, mult) in parts {
                out.add_term(k2, coef.scale(&C::from_rat(&mult)));
            }
        }
        out
    }

    /// Part of the symbol with the given total momentum degree.
    pub fn momentum_homogeneous_part(&self, degree: u32) -> Self {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, c) in &self.terms {
            let d: u32 = k.iter().map(|&e| e as u32).sum();
            if d == degree {
                out.add_term(k.clone(), c.clone());
            }
        }
        out
    }

    /// Part with the given degree in one block.
    pub fn block_homogeneous_part(&self, block: usize, degree: u32) -> Self {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, c) in &self.terms {
            if Self::key_block_degree(k, self.dim, block) == degree {
                out.add_term(k.clone(), c.clone());
            }
        }
        out
    }

    /// Evaluate at explicit momentum and base points.
    pub fn eval(&self, momenta: &[Vec<C>], x: &[C]) -> C {
        assert_eq!(momenta.len(), self.blocks);
        assert_eq!(x.len(), self.dim);
        let mut acc = C::zero();
        for (k, c) in &self.terms {
            let mut term = c.eval(x);
            for b in 0..self.blocks {
                for i in 0..self.dim {
                    for _ in 0..k[b * self.dim + i] {
                        term = term.mul_ref(&momenta[b][i]);
                    }
                }
            }
            acc = acc.add_ref(&term);
        }
        acc
    }

    pub fn map_coeffs<C2: Scalar>(&self, f: &impl Fn(&C) -> C2) -> MomentumSymbol<C2> {
        let mut out = MomentumSymbol::zero(self.dim, self.blocks);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.map_coeffs(f));
        }
        out
    }

    /// Substitute momenta and base coordinates by symbols (polynomial
    /// composition). `p_subs[b][i]` replaces `p^b_i`, `x_subs[i]` replaces
    /// `x^i`; all substituted symbols must share one target shape.
    pub fn compose(
        &self,
        p_subs: &[Vec<MomentumSymbol<C>>],
        x_subs: &[MomentumSymbol<C>],
    ) -> Result<MomentumSymbol<C>, Error> {
        assert_eq!(p_subs.len(), self.blocks);
        assert_eq!(x_subs.len(), self.dim);
        let (td, tb) = target_shape(p_subs, x_subs);
        let mut out = MomentumSymbol::zero(td, tb);
        for (k, coef) in &self.terms {
            let mut term = MomentumSymbol::constant(td, tb, C::one());
            for b in 0..self.blocks {
                for i in 0..self.dim {
                    for _ in 0..k[b * self.dim + i] {
                        term = term.checked_mul(&p_subs[b][i], DEFAULT_DEGREE_CAP)?;
                    }
                }
            }
            // Compose the x-polynomial coefficient.
            let mut coef_sym = MomentumSymbol::zero(td, tb);
            for (e, c) in coef.terms() {
                let mut mono = MomentumSymbol::constant(td, tb, c.clone());
                for (i, &exp) in e.iter().enumerate() {
                    for _ in 0..exp {
                        mono = mono.checked_mul(&x_subs[i], DEFAULT_DEGREE_CAP)?;
                    }
                }
                coef_sym = coef_sym.add(&mono);
            }
            out = out.add(&term.checked_mul(&coef_sym, DEFAULT_DEGREE_CAP)?);
        }
        Ok(out)
    }

    pub fn max_coeff_magnitude(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.max_coeff_magnitude())
            .fold(0.0, f64::max)
    }
}

fn target_shape<C: Scalar>(
    p_subs: &[Vec<MomentumSymbol<C>>],
    x_subs: &[MomentumSymbol<C>],
) -> (usize, usize) {
    if let Some(s) = p_subs.iter().flatten().next() {
        (s.dim, s.blocks)
    } else if let Some(s) = x_subs.first() {
        (s.dim, s.blocks)
    } else {
        (0, 0)
    }
}

impl<C: Scalar> fmt::Debug for MomentumSymbol<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "[{:?}]", c)?;
            for b in 0..self.blocks {
                for i in 0..self.dim {
                    let e = k[b * self.dim + i];
                    if e > 0 {
                        write!(f, "*p{}_{}", b + 1, i + 1)?;
                        if e > 1 {
                            write!(f, "^{}", e)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// All ways to split `total` into `parts` non-negative summands.
pub fn compositions(total: u8, parts: usize) -> Vec<Vec<u8>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// Multinomial coefficient `total! / (c_1! .. c_k!)` as a rational.
pub fn multinomial(total: u8, split: &[u8]) -> Rat {
    debug_assert_eq!(split.iter().map(|&c| c as u32).sum::<u32>(), total as u32);
    let mut num = Rat::from_integer(1.into());
    for f in 2..=(total as i64) {
        num *= Rat::from_integer(f.into());
    }
    for &c in split {
        for f in 2..=(c as i64) {
            num /= Rat::from_integer(f.into());
        }
    }
    num
}

/// Formal power series in the deformation parameter: `orders[k]` is the
/// coefficient symbol of the k-th power.
#[derive(Clone, PartialEq, Debug)]
pub struct HSeries<C: Scalar> {
    dim: usize,
    blocks: usize,
    orders: Vec<MomentumSymbol<C>>,
}

impl<C: Scalar> HSeries<C> {
    pub fn zero(dim: usize, blocks: usize, n_max: usize) -> Self {
        HSeries {
            dim,
            blocks,
            orders: vec![MomentumSymbol::zero(dim, blocks); n_max + 1],
        }
    }

    pub fn from_order0(sym: MomentumSymbol<C>, n_max: usize) -> Self {
        let mut s = HSeries::zero(sym.dim(), sym.blocks(), n_max);
        s.orders[0] = sym;
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn n_max(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn order(&self, k: usize) -> &MomentumSymbol<C> {
        &self.orders[k]
    }

    pub fn set_order(&mut self, k: usize, sym: MomentumSymbol<C>) {
        assert_eq!((sym.dim(), sym.blocks()), (self.dim, self.blocks));
        self.orders[k] = sym;
    }

    pub fn is_zero(&self) -> bool {
        self.orders.iter().all(|s| s.is_zero())
    }

    pub fn truncate(&self, n_max: usize) -> Self {
        let mut out = HSeries::zero(self.dim, self.blocks, n_max);
        for k in 0..=n_max.min(self.n_max()) {
            out.orders[k] = self.orders[k].clone();
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let n = self.n_max().min(rhs.n_max());
        let mut out = HSeries::zero(self.dim, self.blocks, n);
        for k in 0..=n {
            out.orders[k] = self.orders[k].add(&rhs.orders[k]);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.orders {
            *s = s.neg();
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let mut out = self.clone();
        for s in &mut out.orders {
            *s = s.scale_rat(r);
        }
        out
    }

    /// Product truncated to the series length.
    pub fn mul(&self, rhs: &Self) -> Result<Self, Error> {
        let n = self.n_max().min(rhs.n_max());
        let mut out = HSeries::zero(self.dim, self.blocks, n);
        for a in 0..=n {
            if self.orders[a].is_zero() {
                continue;
            }
            for b in 0..=(n - a) {
                if rhs.orders[b].is_zero() {
                    continue;
                }
                let prod = self.orders[a].checked_mul(&rhs.orders[b], DEFAULT_DEGREE_CAP)?;
                out.orders[a + b] = out.orders[a + b].add(&prod);
            }
        }
        Ok(out)
    }

    pub fn diff_p(&self, block: usize, i: usize) -> Self {
        self.map_orders(|s| s.diff_p(block, i))
    }

    pub fn diff_x(&self, i: usize) -> Self {
        self.map_orders(|s| s.diff_x(i))
    }

    pub fn remap_blocks(&self, new_blocks: usize, map: &[Vec<usize>]) -> Self {
        let mut out = HSeries::zero(self.dim, new_blocks, self.n_max());
        for k in 0..=self.n_max() {
            out.orders[k] = self.orders[k].remap_blocks(new_blocks, map);
        }
        out
    }

    pub fn map_orders(&self, f: impl Fn(&MomentumSymbol<C>) -> MomentumSymbol<C>) -> Self {
        let orders: Vec<_> = self.orders.iter().map(f).collect();
        HSeries {
            dim: orders[0].dim(),
            blocks: orders[0].blocks(),
            orders,
        }
    }

    /// Graded composition: substitute each momentum coordinate and each base
    /// coordinate by a series, truncating at this series' length.
    pub fn compose(
        &self,
        p_subs: &[Vec<HSeries<C>>],
        x_subs: &[HSeries<C>],
    ) -> Result<HSeries<C>, Error> {
        assert_eq!(p_subs.len(), self.blocks);
        assert_eq!(x_subs.len(), self.dim);
        let n = self.n_max();
        let (td, tb) = series_target_shape(p_subs, x_subs);
        let mut out = HSeries::zero(td, tb, n);
        for k in 0..=n {
            if self.orders[k].is_zero() {
                continue;
            }
            // Expand the order-k polynomial with graded arguments; its own
            // grading shifts the result by k.
            for (key, coef) in self.orders[k].terms() {
                let mut term = HSeries::from_order0(
                    MomentumSymbol::constant(td, tb, C::one()),
                    n - k,
                );
                for b in 0..self.blocks {
                    for i in 0..self.dim {
                        for _ in 0..key[b * self.dim + i] {
                            term = term.mul(&p_subs[b][i].truncate(n - k))?;
                        }
                    }
                }
                let mut coef_series = HSeries::zero(td, tb, n - k);
                for (e, c) in coef.terms() {
                    let mut mono = HSeries::from_order0(
                        MomentumSymbol::constant(td, tb, c.clone()),
                        n - k,
                    );
                    for (i, &exp) in e.iter().enumerate() {
                        for _ in 0..exp {
                            mono = mono.mul(&x_subs[i].truncate(n - k))?;
                        }
                    }
                    coef_series = coef_series.add(&mono);
                }
                term = term.mul(&coef_series)?;
                for j in 0..=(n - k) {
                    out.orders[k + j] = out.orders[k + j].add(term.order(j));
                }
            }
        }
        Ok(out)
    }

    pub fn max_coeff_magnitude(&self) -> f64 {
        self.orders
            .iter()
            .map(|s| s.max_coeff_magnitude())
            .fold(0.0, f64::max)
    }

    pub fn map_coeffs<C2: Scalar>(&self, f: &impl Fn(&C) -> C2) -> HSeries<C2> {
        HSeries {
            dim: self.dim,
            blocks: self.blocks,
            orders: self.orders.iter().map(|s| s.map_coeffs(f)).collect(),
        }
    }
}

fn series_target_shape<C: Scalar>(
    p_subs: &[Vec<HSeries<C>>],
    x_subs: &[HSeries<C>],
) -> (usize, usize) {
    if let Some(s) = p_subs.iter().flatten().next() {
        (s.dim, s.blocks)
    } else if let Some(s) = x_subs.first() {
        (s.dim, s.blocks)
    } else {
        (0, 0)
    }
}
