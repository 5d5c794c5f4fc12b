//! Campbell-Baker-Hausdorff series for a finite-dimensional Lie algebra
//! given by structure constants, computed from a truncated free associative
//! algebra with Dynkin projection, plus the comparison against the
//! generating-function series for linear Poisson structures.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::momentum::MomentumSymbol;
use crate::poly::XPoly;
use crate::scalar::{rat_int, Rat, Scalar};
use crate::symbols::{GradedSeries, PoissonStructure};

/// Minimal operations needed to evaluate bracket words: covers plain
/// rationals as well as vectors of momentum symbols.
pub trait CbhRing: Clone {
    fn is_zero_elem(&self) -> bool;
    fn add_ref(&self, rhs: &Self) -> Self;
    fn scale_rat(&self, r: &Rat) -> Self;
}

impl CbhRing for Rat {
    fn is_zero_elem(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        self * r
    }
}

impl<C: Scalar> CbhRing for MomentumSymbol<C> {
    fn is_zero_elem(&self) -> bool {
        MomentumSymbol::is_zero(self)
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        self.add(rhs)
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        MomentumSymbol::scale_rat(self, r)
    }
}

/// Structure constants `[e^i, e^j] = sum_k c^{ij}_k e^k`, stored for `i < j`.
#[derive(Clone, PartialEq, Debug)]
pub struct LieAlgebra {
    dim: usize,
    c: BTreeMap<(usize, usize), Vec<Rat>>,
}

impl LieAlgebra {
    pub fn new(dim: usize, upper: BTreeMap<(usize, usize), Vec<Rat>>) -> Result<Self, Error> {
        for (&(i, j), v) in &upper {
            if i >= j || j >= dim || v.len() != dim {
                return Err(Error::Parse(format!(
                    "bad structure constant entry ({}, {})",
                    i, j
                )));
            }
        }
        let l = LieAlgebra { dim, c: upper };
        // Jacobi on the constants.
        for i in 0..dim {
            for j in (i + 1)..dim {
                for k in (j + 1)..dim {
                    for r in 0..dim {
                        let mut acc = rat_int(0);
                        for m in 0..dim {
                            acc += l.c_at(i, j, m) * l.c_at(m, k, r);
                            acc += l.c_at(j, k, m) * l.c_at(m, i, r);
                            acc += l.c_at(k, i, m) * l.c_at(m, j, r);
                        }
                        if !acc.is_zero() {
                            return Err(Error::Jacobi { i, j, k });
                        }
                    }
                }
            }
        }
        Ok(l)
    }

    pub fn abelian(dim: usize) -> Self {
        LieAlgebra {
            dim,
            c: BTreeMap::new(),
        }
    }

    /// Heisenberg algebra: `[e1, e2] = e3`.
    pub fn heisenberg() -> Self {
        let mut c = BTreeMap::new();
        c.insert((0, 1), vec![rat_int(0), rat_int(0), rat_int(1)]);
        LieAlgebra::new(3, c).expect("Heisenberg constants satisfy Jacobi")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c_at(&self, i: usize, j: usize, k: usize) -> Rat {
        if i == j {
            return rat_int(0);
        }
        if i < j {
            self.c
                .get(&(i, j))
                .map(|v| v[k].clone())
                .unwrap_or_else(|| rat_int(0))
        } else {
            -self.c_at(j, i, k)
        }
    }

    /// Bracket of coordinate vectors over any bracket-evaluable ring.
    pub fn bracket<T: CbhRing>(&self, a: &[T], b: &[T], mul: impl Fn(&T, &T) -> T) -> Vec<T> {
        let zero = |t: &T| t.scale_rat(&rat_int(0));
        let mut out: Vec<T> = a.iter().map(zero).collect();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i == j {
                    continue;
                }
                let prod = mul(&a[i], &b[j]);
                if prod.is_zero_elem() {
                    continue;
                }
                for (k, out_k) in out.iter_mut().enumerate() {
                    let c = self.c_at(i, j, k);
                    if c.is_zero() {
                        continue;
                    }
                    *out_k = out_k.add_ref(&prod.scale_rat(&c));
                }
            }
        }
        out
    }
}

/// Extract a Lie algebra from a linear Poisson structure: the bracket
/// constants are twice the structure coefficients.
pub fn from_linear_poisson(alpha: &PoissonStructure) -> Result<LieAlgebra, Error> {
    if !alpha.is_linear() {
        return Err(Error::NotLinear);
    }
    let d = alpha.dim();
    let mut c = BTreeMap::new();
    for (&(i, j), poly) in alpha.upper_entries() {
        let mut v = vec![rat_int(0); d];
        for (e, coef) in poly.terms() {
            let k = e.iter().position(|&x| x == 1).expect("linear monomial");
            v[k] = coef * rat_int(2);
        }
        c.insert((i, j), v);
    }
    LieAlgebra::new(d, c)
}

/// Word in the two free generators, used for the log expansion.
type Word = Vec<u8>;

/// Coefficients of `log(exp X exp Y)` in the free associative algebra,
/// per degree `1..=n_max`, with words as keys.
pub fn cbh_log_words(n_max: usize) -> Vec<BTreeMap<Word, Rat>> {
    // u = exp(X) exp(Y) - 1 truncated at degree n_max.
    let mut u: BTreeMap<Word, Rat> = BTreeMap::new();
    for a in 0..=n_max {
        for b in 0..=(n_max - a) {
            if a + b == 0 {
                continue;
            }
            let mut w = vec![0u8; a];
            w.extend(std::iter::repeat(1u8).take(b));
            let coef =
                rat_int(1) / (crate::graphs::factorial(a) * crate::graphs::factorial(b));
            u.insert(w, coef);
        }
    }
    // log(1 + u) = sum (-1)^{k+1} u^k / k.
    let mut log: BTreeMap<Word, Rat> = BTreeMap::new();
    let mut power: BTreeMap<Word, Rat> = BTreeMap::new();
    power.insert(Vec::new(), rat_int(1)); // u^0
    for k in 1..=n_max {
        // power <- power * u, truncated.
        let mut next: BTreeMap<Word, Rat> = BTreeMap::new();
        for (wa, ca) in &power {
            for (wb, cb) in &u {
                if wa.len() + wb.len() > n_max {
                    continue;
                }
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                let c = ca * cb;
                next.entry(w).and_modify(|x| *x += c.clone()).or_insert(c);
            }
        }
        power = next;
        let sign = if k % 2 == 1 { rat_int(1) } else { rat_int(-1) };
        for (w, c) in &power {
            let add = c * &sign / rat_int(k as i64);
            log.entry(w.clone())
                .and_modify(|x| *x += add.clone())
                .or_insert(add);
        }
    }
    let mut by_degree = vec![BTreeMap::new(); n_max];
    for (w, c) in log {
        if !c.is_zero() && !w.is_empty() {
            by_degree[w.len() - 1].insert(w, c);
        }
    }
    by_degree
}

/// Homogeneous CBH terms evaluated through the structure constants: entry
/// `k-1` is the degree-`k` term of `CBH(a, b)` as a coordinate vector.
///
/// Each word is turned into a left-nested bracket and scaled by the inverse
/// degree (Dynkin projection of a Lie element).
pub fn cbh_terms<T: CbhRing>(
    l: &LieAlgebra,
    a: &[T],
    b: &[T],
    n_max: usize,
    mul: impl Fn(&T, &T) -> T + Copy,
) -> Vec<Vec<T>> {
    assert_eq!(a.len(), l.dim());
    assert_eq!(b.len(), l.dim());
    let words = cbh_log_words(n_max);
    let mut out = Vec::with_capacity(n_max);
    for (deg_idx, coeffs) in words.iter().enumerate() {
        let degree = deg_idx + 1;
        let mut term: Vec<T> = a.iter().map(|t| t.scale_rat(&rat_int(0))).collect();
        for (w, c) in coeffs {
            // Left-nested bracket [..[[w1, w2], w3].., wk]; a single letter
            // is the generator itself.
            let pick = |letter: u8| -> &[T] {
                if letter == 0 {
                    a
                } else {
                    b
                }
            };
            let mut acc: Vec<T> = pick(w[0]).to_vec();
            for &letter in &w[1..] {
                acc = l.bracket(&acc, pick(letter), mul);
            }
            let scale = c / rat_int(degree as i64);
            for (t, v) in term.iter_mut().zip(acc.iter()) {
                *t = t.add_ref(&v.scale_rat(&scale));
            }
        }
        out.push(term);
    }
    out
}

/// CBH terms with the two momentum blocks as arguments: degree-`k` entry is
/// a vector of two-block symbols, polynomial of momentum degree `k`.
pub fn cbh_symbolic(l: &LieAlgebra, n_max: usize) -> Vec<Vec<MomentumSymbol<Rat>>> {
    let d = l.dim();
    let a: Vec<MomentumSymbol<Rat>> = (0..d)
        .map(|i| MomentumSymbol::momentum_var(d, 2, 0, i))
        .collect();
    let b: Vec<MomentumSymbol<Rat>> = (0..d)
        .map(|i| MomentumSymbol::momentum_var(d, 2, 1, i))
        .collect();
    cbh_terms(l, &a, &b, n_max, |x, y| x.mul(y))
}

/// The pairing `<v, x>` of a coordinate vector of two-block symbols with
/// the base point: a two-block symbol with x-linear coefficients.
pub fn pair_with_x(v: &[MomentumSymbol<Rat>]) -> MomentumSymbol<Rat> {
    let d = v.len();
    let mut out = MomentumSymbol::zero(d, 2);
    for (k, comp) in v.iter().enumerate() {
        out = out.add(&comp.scale_xpoly(&XPoly::var(d, k)));
    }
    out
}

/// Per-order residual between the CBH reduction and a generating-function
/// series: order `n` compares `<CBH_{n+1}(p1, p2), x>` with `S_n`.
pub fn compare_with_genfun<C: Scalar>(
    s: &GradedSeries<C>,
    l: &LieAlgebra,
    n_max: usize,
) -> Result<Vec<MomentumSymbol<C>>, Error> {
    if s.dim() != l.dim() {
        return Err(Error::DimMismatch {
            expected: l.dim(),
            got: s.dim(),
        });
    }
    let terms = cbh_symbolic(l, n_max + 1);
    let mut out = Vec::new();
    for n in 1..=n_max {
        let cbh_side = pair_with_x(&terms[n]).map_coeffs(&|r: &Rat| C::from_rat(r));
        out.push(cbh_side.sub(&s.get(n)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    /// Exact matrices over the rationals, for the nilpotent exp/log oracle.
    #[derive(Clone, PartialEq, Debug)]
    struct Mat {
        n: usize,
        a: Vec<Rat>,
    }

    impl Mat {
        fn zero(n: usize) -> Self {
            Mat {
                n,
                a: vec![rat_int(0); n * n],
            }
        }
        fn eye(n: usize) -> Self {
            let mut m = Mat::zero(n);
            for i in 0..n {
                m.a[i * n + i] = rat_int(1);
            }
            m
        }
        fn unit(n: usize, i: usize, j: usize) -> Self {
            let mut m = Mat::zero(n);
            m.a[i * n + j] = rat_int(1);
            m
        }
        fn add(&self, rhs: &Self) -> Self {
            let mut m = self.clone();
            for (x, y) in m.a.iter_mut().zip(&rhs.a) {
                *x += y;
            }
            m
        }
        fn scale(&self, r: &Rat) -> Self {
            let mut m = self.clone();
            for x in m.a.iter_mut() {
                *x *= r;
            }
            m
        }
        fn mul(&self, rhs: &Self) -> Self {
            let n = self.n;
            let mut m = Mat::zero(n);
            for i in 0..n {
                for k in 0..n {
                    if self.a[i * n + k].is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        let prod = &self.a[i * n + k] * &rhs.a[k * n + j];
                        m.a[i * n + j] += prod;
                    }
                }
            }
            m
        }
        fn is_zero(&self) -> bool {
            self.a.iter().all(|x| x.is_zero())
        }
        fn exp_nilpotent(&self) -> Self {
            let mut out = Mat::eye(self.n);
            let mut pow = Mat::eye(self.n);
            let mut k = 1usize;
            loop {
                pow = pow.mul(self);
                if pow.is_zero() {
                    return out;
                }
                out = out.add(&pow.scale(&(rat_int(1) / crate::graphs::factorial(k))));
                k += 1;
            }
        }
        fn log_unipotent(&self) -> Self {
            // log(I + N) for nilpotent N.
            let n = self.n;
            let nil = self.add(&Mat::eye(n).scale(&rat_int(-1)));
            let mut out = Mat::zero(n);
            let mut pow = Mat::eye(n);
            let mut k = 1i64;
            loop {
                pow = pow.mul(&nil);
                if pow.is_zero() {
                    return out;
                }
                let sign = if k % 2 == 1 { rat_int(1) } else { rat_int(-1) };
                out = out.add(&pow.scale(&(sign / rat_int(k))));
                k += 1;
            }
        }
    }

    /// Strictly upper triangular matrices of size `n` as a Lie algebra with
    /// basis `E_{ij}`, `i < j`, plus the coordinate maps.
    fn upper_triangular_algebra(n: usize) -> (LieAlgebra, Vec<(usize, usize)>) {
        let basis: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let d = basis.len();
        let mut c = BTreeMap::new();
        for a in 0..d {
            for b in (a + 1)..d {
                let ma = Mat::unit(n, basis[a].0, basis[a].1);
                let mb = Mat::unit(n, basis[b].0, basis[b].1);
                let comm = ma.mul(&mb).add(&mb.mul(&ma).scale(&rat_int(-1)));
                let mut v = vec![rat_int(0); d];
                for (k, &(i, j)) in basis.iter().enumerate() {
                    v[k] = comm.a[i * n + j].clone();
                }
                if v.iter().any(|x| !x.is_zero()) {
                    c.insert((a, b), v);
                }
            }
        }
        (LieAlgebra::new(d, c).unwrap(), basis)
    }

    fn to_matrix(coords: &[Rat], basis: &[(usize, usize)], n: usize) -> Mat {
        let mut m = Mat::zero(n);
        for (k, &(i, j)) in basis.iter().enumerate() {
            m.a[i * n + j] = coords[k].clone();
        }
        m
    }

    #[test]
    fn order_two_term_is_half_bracket() {
        let l = LieAlgebra::heisenberg();
        let p: Vec<Rat> = vec![rat_int(1), rat_int(0), rat_int(0)];
        let q: Vec<Rat> = vec![rat_int(0), rat_int(1), rat_int(0)];
        let terms = cbh_terms(&l, &p, &q, 3, |a, b| a * b);
        // Degree 1: p + q.
        assert_eq!(terms[0], vec![rat_int(1), rat_int(1), rat_int(0)]);
        // Degree 2: [p, q] / 2 = e3 / 2.
        assert_eq!(terms[1], vec![rat_int(0), rat_int(0), rat(1, 2)]);
        // Heisenberg is 2-step nilpotent: degree 3 vanishes.
        assert!(terms[2].iter().all(|x| x.is_zero()));
    }

    #[test]
    fn abelian_cbh_is_sum() {
        let l = LieAlgebra::abelian(2);
        let p = vec![rat(3, 2), rat(-1, 3)];
        let q = vec![rat(1, 5), rat(2, 7)];
        let terms = cbh_terms(&l, &p, &q, 4, |a, b| a * b);
        assert_eq!(terms[0], vec![rat(3, 2) + rat(1, 5), rat(-1, 3) + rat(2, 7)]);
        for t in &terms[1..] {
            assert!(t.iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn heisenberg_matches_matrix_log_exactly() {
        let l = LieAlgebra::heisenberg();
        let p = vec![rat(2, 3), rat(-1, 2), rat(1, 5)];
        let q = vec![rat(1, 4), rat(3, 7), rat(-2, 3)];
        let terms = cbh_terms(&l, &p, &q, 4, |a, b| a * b);
        let mut total = vec![rat_int(0); 3];
        for t in &terms {
            for (acc, v) in total.iter_mut().zip(t) {
                *acc += v;
            }
        }
        // 3x3 strictly upper representation: e1 -> E12, e2 -> E23,
        // e3 -> E13.
        let basis = [(0usize, 1usize), (1, 2), (0, 2)];
        let to_mat = |v: &[Rat]| {
            let mut m = Mat::zero(3);
            for (k, &(i, j)) in basis.iter().enumerate() {
                m.a[i * 3 + j] = v[k].clone();
            }
            m
        };
        let log = to_mat(&p)
            .exp_nilpotent()
            .mul(&to_mat(&q).exp_nilpotent())
            .log_unipotent();
        assert_eq!(to_mat(&total), log);
    }

    #[test]
    fn upper_triangular_5_matches_matrix_log_through_order_4() {
        // 5x5 strictly upper triangular matrices: nilpotency degree 4, so
        // the degree-4 CBH coefficients are genuinely exercised.
        let (l, basis) = upper_triangular_algebra(5);
        let d = l.dim();
        assert_eq!(d, 10);
        let p: Vec<Rat> = [(0, 1, 2), (4, 1, 1), (7, -1, 2), (9, 1, 1)]
            .iter()
            .fold(vec![rat_int(0); d], |mut v, &(k, n, m)| {
                v[k] = rat(n, m);
                v
            });
        let q: Vec<Rat> = [(1, 1, 1), (4, 1, 2), (7, 1, 1), (9, -1, 1)]
            .iter()
            .fold(vec![rat_int(0); d], |mut v, &(k, n, m)| {
                v[k] = rat(n, m);
                v
            });
        let terms = cbh_terms(&l, &p, &q, 6, |a, b| a * b);
        // Degrees 5 and 6 vanish by nilpotency; catching that also guards
        // the truncation bookkeeping.
        assert!(terms[4].iter().all(|x| x.is_zero()));
        assert!(terms[5].iter().all(|x| x.is_zero()));
        assert!(
            !terms[3].iter().all(|x| x.is_zero()),
            "degree 4 is nontrivial"
        );
        let mut total = vec![rat_int(0); d];
        for t in &terms {
            for (acc, v) in total.iter_mut().zip(t) {
                *acc += v;
            }
        }
        let log = to_matrix(&p, &basis, 5)
            .exp_nilpotent()
            .mul(&to_matrix(&q, &basis, 5).exp_nilpotent())
            .log_unipotent();
        assert_eq!(to_matrix(&total, &basis, 5), log);
    }

    #[test]
    fn associativity_for_nilpotent_algebras() {
        // CBH(a, CBH(b, c)) = CBH(CBH(a, b), c) exactly for the 4x4
        // strictly upper algebra (3-step nilpotent, series terminate).
        let (l, _) = upper_triangular_algebra(4);
        let d = l.dim();
        let a: Vec<MomentumSymbol<Rat>> = (0..d)
            .map(|i| MomentumSymbol::momentum_var(d, 3, 0, i))
            .collect();
        let b: Vec<MomentumSymbol<Rat>> = (0..d)
            .map(|i| MomentumSymbol::momentum_var(d, 3, 1, i))
            .collect();
        let c: Vec<MomentumSymbol<Rat>> = (0..d)
            .map(|i| MomentumSymbol::momentum_var(d, 3, 2, i))
            .collect();
        let n_max = 4;
        let total = |terms: Vec<Vec<MomentumSymbol<Rat>>>| -> Vec<MomentumSymbol<Rat>> {
            let mut out = vec![MomentumSymbol::zero(d, 3); d];
            for t in terms {
                for (acc, v) in out.iter_mut().zip(t) {
                    *acc = acc.add(&v);
                }
            }
            out
        };
        let mul = |x: &MomentumSymbol<Rat>, y: &MomentumSymbol<Rat>| x.mul(y);
        let bc = total(cbh_terms(&l, &b, &c, n_max, mul));
        let lhs = total(cbh_terms(&l, &a, &bc, n_max, mul));
        let ab = total(cbh_terms(&l, &a, &b, n_max, mul));
        let rhs = total(cbh_terms(&l, &ab, &c, n_max, mul));
        for i in 0..d {
            assert_eq!(lhs[i], rhs[i], "component {}", i);
        }
    }

    #[test]
    fn degree_scaling_homogeneity() {
        let l = LieAlgebra::heisenberg();
        let lam = rat(3, 1);
        let p = vec![rat(1, 2), rat(1, 3), rat(0, 1)];
        let q = vec![rat(-1, 4), rat(2, 5), rat(1, 7)];
        let ps: Vec<Rat> = p.iter().map(|x| x * &lam).collect();
        let qs: Vec<Rat> = q.iter().map(|x| x * &lam).collect();
        let base = cbh_terms(&l, &p, &q, 3, |a, b| a * b);
        let scaled = cbh_terms(&l, &ps, &qs, 3, |a, b| a * b);
        for k in 0..3 {
            let factor = (0..=k).fold(rat_int(1), |acc, _| acc * &lam);
            for i in 0..3 {
                assert_eq!(scaled[k][i], &base[k][i] * &factor, "degree {}", k + 1);
            }
        }
    }

    #[test]
    fn from_linear_poisson_doubles_coefficients() {
        // so(3)-type: alpha^{ij} = (1/2) eps^{ijk} x_k gives c^{ij}_k =
        // eps^{ijk}.
        let alpha = PoissonStructure::linear(
            3,
            &[
                ((0, 1, 2), rat(1, 2)),
                ((0, 2, 1), rat(-1, 2)),
                ((1, 2, 0), rat(1, 2)),
            ],
        )
        .unwrap();
        let l = from_linear_poisson(&alpha).unwrap();
        assert_eq!(l.c_at(0, 1, 2), rat_int(1));
        assert_eq!(l.c_at(1, 0, 2), rat_int(-1));
        assert_eq!(l.c_at(0, 2, 1), rat_int(-1));
        // Zero structure maps to the abelian algebra.
        let zero = PoissonStructure::zero(2);
        assert_eq!(from_linear_poisson(&zero).unwrap(), LieAlgebra::abelian(2));
        // Quadratic entries are rejected.
        let quad = PoissonStructure::new(
            2,
            BTreeMap::from([((0, 1), XPoly::var(2, 0).mul(&XPoly::var(2, 1)))]),
            true,
        )
        .unwrap();
        assert!(matches!(from_linear_poisson(&quad), Err(Error::NotLinear)));
    }

    #[test]
    fn first_order_comparison_is_exact() {
        // <CBH_2(p1,p2), x> = (1/2)<[p1,p2], x> equals S_1 = p_1 alpha p_2
        // for the linear structure with doubled bracket constants.
        let alpha = PoissonStructure::linear(
            3,
            &[
                ((0, 1, 2), rat(1, 2)),
                ((0, 2, 1), rat(-1, 2)),
                ((1, 2, 0), rat(1, 2)),
            ],
        )
        .unwrap();
        let l = from_linear_poisson(&alpha).unwrap();
        let mut s1 = MomentumSymbol::zero(3, 2);
        for i in 0..3 {
            for j in 0..3 {
                let e = alpha.entry(i, j);
                if e.is_zero() {
                    continue;
                }
                let mut key = vec![0u8; 6];
                key[i] += 1;
                key[3 + j] += 1;
                s1.add_term(key, e);
            }
        }
        let mut s = GradedSeries::new(3);
        s.set(1, s1);
        let res = compare_with_genfun(&s, &l, 1).unwrap();
        assert!(res[0].is_zero());
    }

    #[test]
    fn abelian_comparison_vanishes_at_every_order() {
        let l = LieAlgebra::abelian(2);
        let s = GradedSeries::<Rat>::new(2);
        for r in compare_with_genfun(&s, &l, 4).unwrap() {
            assert!(r.is_zero());
        }
    }
}
