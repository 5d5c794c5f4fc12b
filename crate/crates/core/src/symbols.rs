//! Poisson structures with polynomial coefficients, their validation, and
//! the momentum-space symbols of the multidifferential operators attached to
//! Kontsevich graphs.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::graphs::{KontsevichGraph, VertexRef};
use crate::momentum::MomentumSymbol;
use crate::poly::XPoly;
use crate::scalar::{Rat, Scalar};

/// Antisymmetric matrix of x-polynomials `alpha^{ij}(x)`; only `i < j`
/// entries are stored.
#[derive(Clone, PartialEq, Debug)]
pub struct PoissonStructure {
    dim: usize,
    entries: BTreeMap<(usize, usize), XPoly<Rat>>,
}

impl PoissonStructure {
    /// Build from upper-triangular entries, checking Jacobi unless bypassed.
    pub fn new(
        dim: usize,
        upper: BTreeMap<(usize, usize), XPoly<Rat>>,
        check_jacobi: bool,
    ) -> Result<Self, Error> {
        for (&(i, j), p) in &upper {
            if i >= j || j >= dim {
                return Err(Error::Parse(format!(
                    "entry ({},{}) is not upper-triangular within dimension {}",
                    i + 1,
                    j + 1,
                    dim
                )));
            }
            if p.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        let entries = upper
            .into_iter()
            .filter(|(_, p)| !p.is_zero())
            .collect();
        let alpha = PoissonStructure { dim, entries };
        if check_jacobi {
            if let Some(((i, j, k), _)) = alpha
                .jacobi_residual()
                .into_iter()
                .find(|(_, r)| !r.is_zero())
            {
                return Err(Error::Jacobi { i, j, k });
            }
        }
        Ok(alpha)
    }

    /// Fold possibly-redundant entries (any `i != j`) into the
    /// upper-triangular form, rejecting antisymmetry violations.
    pub fn from_full_entries(
        dim: usize,
        raw: Vec<(usize, usize, XPoly<Rat>)>,
        check_jacobi: bool,
    ) -> Result<Self, Error> {
        let mut upper: BTreeMap<(usize, usize), XPoly<Rat>> = BTreeMap::new();
        let mut seen: BTreeMap<(usize, usize), XPoly<Rat>> = BTreeMap::new();
        for (i, j, p) in raw {
            if i == j {
                if !p.is_zero() {
                    return Err(Error::Antisymmetry { i, j });
                }
                continue;
            }
            if let Some(prev) = seen.get(&(i, j)) {
                if *prev != p {
                    return Err(Error::Antisymmetry { i, j });
                }
                continue;
            }
            // If the transpose was seen, enforce the sign relation.
            if let Some(prev) = seen.get(&(j, i)) {
                if prev.add(&p) != XPoly::zero(p.dim()) {
                    return Err(Error::Antisymmetry { i, j });
                }
            }
            seen.insert((i, j), p.clone());
            if i < j {
                upper.insert((i, j), p);
            } else {
                upper.entry((j, i)).or_insert_with(|| p.neg());
            }
        }
        PoissonStructure::new(dim, upper, check_jacobi)
    }

    pub fn zero(dim: usize) -> Self {
        PoissonStructure {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Constant structure from an upper-triangular rational matrix.
    pub fn constant(dim: usize, upper: &[((usize, usize), Rat)]) -> Result<Self, Error> {
        let entries = upper
            .iter()
            .map(|((i, j), c)| ((*i, *j), XPoly::constant(dim, c.clone())))
            .collect();
        PoissonStructure::new(dim, entries, true)
    }

    /// Linear structure `alpha^{ij}(x) = alpha^{ij}_k x^k` from coefficients
    /// indexed as `(i, j, k)` with `i < j`.
    pub fn linear(dim: usize, coeffs: &[((usize, usize, usize), Rat)]) -> Result<Self, Error> {
        let mut entries: BTreeMap<(usize, usize), XPoly<Rat>> = BTreeMap::new();
        for ((i, j, k), c) in coeffs {
            let mono = XPoly::var(dim, *k).scale(c);
            entries
                .entry((*i, *j))
                .and_modify(|p| *p = p.add(&mono))
                .or_insert(mono);
        }
        PoissonStructure::new(dim, entries, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn upper_entries(&self) -> impl Iterator<Item = (&(usize, usize), &XPoly<Rat>)> {
        self.entries.iter()
    }

    /// Entry `alpha^{ij}` with the antisymmetric completion.
    pub fn entry(&self, i: usize, j: usize) -> XPoly<Rat> {
        if i == j {
            return XPoly::zero(self.dim);
        }
        if i < j {
            self.entries
                .get(&(i, j))
                .cloned()
                .unwrap_or_else(|| XPoly::zero(self.dim))
        } else {
            self.entry(j, i).neg()
        }
    }

    /// One residual polynomial per triple `i < j < k`; all zero iff the
    /// Jacobi identity holds.
    pub fn jacobi_residual(&self) -> Vec<((usize, usize, usize), XPoly<Rat>)> {
        let d = self.dim;
        let mut out = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                for k in (j + 1)..d {
                    let mut r = XPoly::zero(d);
                    for l in 0..d {
                        r = r.add(&self.entry(i, l).mul(&self.entry(j, k).diff(l)));
                        r = r.add(&self.entry(j, l).mul(&self.entry(k, i).diff(l)));
                        r = r.add(&self.entry(k, l).mul(&self.entry(i, j).diff(l)));
                    }
                    out.push(((i, j, k), r));
                }
            }
        }
        out
    }

    pub fn is_linear(&self) -> bool {
        self.entries.values().all(|p| {
            p.terms()
                .all(|(e, _)| e.iter().map(|&x| x as u32).sum::<u32>() == 1)
        })
    }

    pub fn is_constant(&self) -> bool {
        self.entries.values().all(|p| p.total_degree() == 0)
    }
}

/// Symbol of the multidifferential operator attached to a Kontsevich graph:
/// the sum over edge-index maps of the vertex contributions, with ground
/// vertex `i` contributing the momentum factors of block `i`.
pub fn hat_b(g: &KontsevichGraph, alpha: &PoissonStructure) -> Result<MomentumSymbol<Rat>, Error> {
    let d = alpha.dim();
    let n = g.n();
    let m = g.m();
    let edges = g.edges(); // canonical order: vertex, then slot
    let mut out = MomentumSymbol::zero(d, m);
    if n == 0 {
        out.add_term(vec![0; m * d], XPoly::one(d));
        return Ok(out);
    }
    // Incoming edge positions per vertex.
    let mut incoming_aerial: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut incoming_ground: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (pos, (_, _, t)) in edges.iter().enumerate() {
        match t {
            VertexRef::Aerial(l) => incoming_aerial[*l].push(pos),
            VertexRef::Ground(i) => incoming_ground[*i].push(pos),
        }
    }
    let mut index = vec![0usize; 2 * n];
    loop {
        // Coefficient: product over aerial vertices of the differentiated
        // structure entries.
        let mut coef = XPoly::one(d);
        for k in 0..n {
            let a = index[2 * k];
            let b = index[2 * k + 1];
            let mut factor = alpha.entry(a, b);
            for &pos in &incoming_aerial[k] {
                factor = factor.diff(index[pos]);
                if factor.is_zero() {
                    break;
                }
            }
            coef = coef.mul(&factor);
            if coef.is_zero() {
                break;
            }
        }
        if !coef.is_zero() {
            let mut key = vec![0u8; m * d];
            for (i, item) in incoming_ground.iter().enumerate() {
                for &pos in item {
                    key[i * d + index[pos]] += 1;
                }
            }
            out.add_term(key, coef);
        }
        // Advance the index map.
        let mut pos = 0;
        loop {
            if pos == 2 * n {
                return Ok(out);
            }
            index[pos] += 1;
            if index[pos] < d {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// Graded series `S_1..S_N` of two-block symbols; the trivial order-0 part
/// `x(p_1+p_2)` is implicit and not stored.
#[derive(Clone, PartialEq, Debug)]
pub struct GradedSeries<C: Scalar> {
    dim: usize,
    orders: BTreeMap<usize, MomentumSymbol<C>>,
}

impl<C: Scalar> GradedSeries<C> {
    pub fn new(dim: usize) -> Self {
        GradedSeries {
            dim,
            orders: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, n: usize, sym: MomentumSymbol<C>) {
        assert!(n >= 1);
        assert_eq!(sym.blocks(), 2);
        assert_eq!(sym.dim(), self.dim);
        self.orders.insert(n, sym);
    }

    pub fn get(&self, n: usize) -> MomentumSymbol<C> {
        self.orders
            .get(&n)
            .cloned()
            .unwrap_or_else(|| MomentumSymbol::zero(self.dim, 2))
    }

    pub fn max_order(&self) -> usize {
        self.orders.keys().max().copied().unwrap_or(0)
    }

    pub fn orders(&self) -> impl Iterator<Item = (&usize, &MomentumSymbol<C>)> {
        self.orders.iter()
    }

    pub fn map_coeffs<C2: Scalar>(&self, f: &impl Fn(&C) -> C2) -> GradedSeries<C2> {
        GradedSeries {
            dim: self.dim,
            orders: self
                .orders
                .iter()
                .map(|(n, s)| (*n, s.map_coeffs(f)))
                .collect(),
        }
    }
}
