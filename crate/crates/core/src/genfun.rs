//! Assembly of the deformed generating function as a weighted tree sum, the
//! perturbative associativity machinery (elementary differentials over
//! Cayley trees, the `C_t` operators, order-by-order residuals), and the
//! Hochschild-differential tools used for uniqueness arguments.

use std::collections::BTreeMap;

use crate::cayley::{enumerate_labeled_trees, rooted_classes_up_to, BipartiteTree, RootedClass};
use crate::error::Error;
use crate::graphs::{cr_decomposition, enumerate_trees, CrSide};
use crate::momentum::{HSeries, MomentumSymbol};
use crate::poly::XPoly;
use crate::scalar::{rat_int, Rat, Scalar, WPoly};
use crate::symbols::{hat_b, GradedSeries, PoissonStructure};
use crate::weights::{eval_exact, eval_numeric, WeightResolver};

/// Block re-routing tables from two-block to three-block symbols, per side
/// and vertex color. White vertices are the copies differentiated in `x`,
/// black vertices the copies differentiated in one momentum slot.
fn remap_table(side: CrSide, white: bool) -> [Vec<usize>; 2] {
    match (side, white) {
        (CrSide::One, true) => [vec![0], vec![1]],     // (p1, p2, x)
        (CrSide::One, false) => [vec![0, 1], vec![2]], // (p1+p2, p3, x)
        (CrSide::Two, true) => [vec![1], vec![2]],     // (p2, p3, x)
        (CrSide::Two, false) => [vec![0], vec![1, 2]], // (p1, p2+p3, x)
    }
}

/// Momentum slot differentiated at a black vertex.
fn black_slot(side: CrSide) -> usize {
    match side {
        CrSide::One => 0,
        CrSide::Two => 1,
    }
}

/// The multi-differential operator attached to a labeled bipartite tree:
/// sums over edge labelings; vertex `v` applies its incident-edge
/// derivatives to `args[v]` (in `x` if white, in the side's momentum slot
/// if black) and is then evaluated at the side's three-block points.
pub fn c_t<C: Scalar>(
    side: CrSide,
    tree: &BipartiteTree,
    args: &[MomentumSymbol<C>],
) -> Result<MomentumSymbol<C>, Error> {
    if args.len() != tree.len() {
        return Err(Error::ArityMismatch {
            tree: tree.len(),
            args: args.len(),
        });
    }
    let dim = args.first().map(|s| s.dim()).expect("trees are non-empty");
    for a in args {
        if a.blocks() != 2 || a.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: a.dim(),
            });
        }
    }
    let edges = tree.edges();
    let mut out = MomentumSymbol::zero(dim, 3);
    let mut labels = vec![0usize; edges.len()];
    loop {
        // Product over vertices of the differentiated, re-routed arguments.
        let mut term = MomentumSymbol::constant(dim, 3, C::one());
        for v in 0..tree.len() {
            let mut f = args[v].clone();
            for (e, &(a, b)) in edges.iter().enumerate() {
                if a == v || b == v {
                    f = if tree.is_white(v) {
                        f.diff_x(labels[e])
                    } else {
                        f.diff_p(black_slot(side), labels[e])
                    };
                }
                if f.is_zero() {
                    break;
                }
            }
            let f3 = f.remap_blocks(3, &remap_table(side, tree.is_white(v)));
            term = term.checked_mul(&f3, crate::poly::DEFAULT_DEGREE_CAP)?;
            if term.is_zero() {
                break;
            }
        }
        out = out.add(&term);
        // Advance the labeling (empty label set runs exactly once).
        if edges.is_empty() {
            break;
        }
        let mut pos = 0;
        loop {
            if pos == edges.len() {
                return Ok(out);
            }
            labels[pos] += 1;
            if labels[pos] < dim {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
    Ok(out)
}

/// Positive compositions of `n` into `parts` ordered summands.
fn positive_compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    if parts == 1 {
        return if n >= 1 { vec![vec![n]] } else { vec![] };
    }
    let mut out = Vec::new();
    if n < parts {
        return out;
    }
    for first in 1..=(n + 1 - parts) {
        for mut rest in positive_compositions(n - first, parts - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// One side of the perturbative associativity sum at a fixed order:
/// trees of every size up to `n`, weighted `1/|t|!`, over all compositions
/// of `n` into per-vertex orders.
pub fn side_sum<C: Scalar>(
    s: &GradedSeries<C>,
    n: usize,
    side: CrSide,
) -> Result<MomentumSymbol<C>, Error> {
    let dim = s.dim();
    let mut out = MomentumSymbol::zero(dim, 3);
    for k in 1..=n {
        let trees = enumerate_labeled_trees(k, 1 << 20)?;
        let weight = rat_int(1) / crate::graphs::factorial(k);
        for tree in &trees {
            for comp in positive_compositions(n, k) {
                let args: Vec<MomentumSymbol<C>> = comp.iter().map(|&nv| s.get(nv)).collect();
                if args.iter().any(|a| a.is_zero()) {
                    continue;
                }
                let term = c_t(side, tree, &args)?;
                out = out.add(&term.scale_rat(&weight));
            }
        }
    }
    Ok(out)
}

/// Order-`n` residual of the associativity equation for a graded series:
/// zero iff the series solves the equation at this order.
#[derive(Clone, Debug)]
pub struct SgaResidual<C: Scalar> {
    pub order: usize,
    pub symbol: MomentumSymbol<C>,
}

pub fn sga_residual<C: Scalar>(s: &GradedSeries<C>, n: usize) -> Result<SgaResidual<C>, Error> {
    let m1 = side_sum(s, n, CrSide::One)?;
    let m2 = side_sum(s, n, CrSide::Two)?;
    Ok(SgaResidual {
        order: n,
        symbol: m1.sub(&m2),
    })
}

/// Build the generating-function series as the weighted sum over Kontsevich
/// trees, with weights as formal symbols resolved through the table (graphs
/// whose symbol vanishes never request a weight).
pub fn build_s(
    alpha: &PoissonStructure,
    n_max: usize,
    resolver: &mut WeightResolver,
) -> Result<GradedSeries<WPoly>, Error> {
    let mut s = GradedSeries::new(alpha.dim());
    for n in 1..=n_max {
        let mut order = MomentumSymbol::zero(alpha.dim(), 2);
        let inv_fact = rat_int(1) / crate::graphs::factorial(n);
        for g in enumerate_trees(n, 2, crate::graphs::DEFAULT_ENUMERATION_CAP)? {
            let sym = hat_b(&g, alpha)?;
            if sym.is_zero() {
                continue;
            }
            let w = resolver.wpoly(&g)?;
            let sym_w = sym.map_coeffs(&|r: &Rat| WPoly::constant(r * &inv_fact).mul_ref(&w));
            order = order.add(&sym_w);
        }
        s.set(n, order);
    }
    Ok(s)
}

/// Evaluate a weight-symbolic series with exact table values.
pub fn eval_series_exact(
    s: &GradedSeries<WPoly>,
    assignment: &BTreeMap<String, Rat>,
) -> Result<GradedSeries<Rat>, Error> {
    let mut out = GradedSeries::new(s.dim());
    for (&n, sym) in s.orders() {
        out.set(n, eval_symbol_exact(sym, assignment)?);
    }
    Ok(out)
}

/// Evaluate a weight-symbolic series numerically: values and the
/// first-order propagated standard error per coefficient.
pub fn eval_series_numeric(
    s: &GradedSeries<WPoly>,
    assignment: &BTreeMap<String, (f64, f64)>,
) -> Result<(GradedSeries<f64>, GradedSeries<f64>), Error> {
    let mut vals = GradedSeries::new(s.dim());
    let mut errs = GradedSeries::new(s.dim());
    for (&n, sym) in s.orders() {
        let (v, e) = eval_symbol_numeric(sym, assignment)?;
        vals.set(n, v);
        errs.set(n, e);
    }
    Ok((vals, errs))
}

/// Evaluate one weight-symbolic symbol numerically into value and stderr
/// symbols.
pub fn eval_symbol_numeric(
    sym: &MomentumSymbol<WPoly>,
    assignment: &BTreeMap<String, (f64, f64)>,
) -> Result<(MomentumSymbol<f64>, MomentumSymbol<f64>), Error> {
    let failed = std::cell::RefCell::new(None);
    let v = sym.map_coeffs(&|w: &WPoly| match eval_numeric(w, assignment) {
        Ok((v, _)) => v,
        Err(e) => {
            failed.borrow_mut().get_or_insert(e);
            0.0
        }
    });
    let e = sym.map_coeffs(&|w: &WPoly| match eval_numeric(w, assignment) {
        Ok((_, s)) => s,
        Err(_) => 0.0,
    });
    if let Some(err) = failed.into_inner() {
        return Err(err);
    }
    Ok((v, e))
}

/// Evaluate one weight-symbolic symbol with exact table values.
pub fn eval_symbol_exact(
    sym: &MomentumSymbol<WPoly>,
    assignment: &BTreeMap<String, Rat>,
) -> Result<MomentumSymbol<Rat>, Error> {
    let failed = std::cell::RefCell::new(None);
    let v = sym.map_coeffs(&|w: &WPoly| match eval_exact(w, assignment) {
        Ok(r) => r,
        Err(e) => {
            failed.borrow_mut().get_or_insert(e);
            rat_int(0)
        }
    });
    if let Some(err) = failed.into_inner() {
        return Err(err);
    }
    Ok(v)
}

/// Decide whether a numeric residual passes: every coefficient within
/// `factor` times its propagated standard error plus an absolute floor.
pub fn residual_within(
    value: &MomentumSymbol<f64>,
    stderr: &MomentumSymbol<f64>,
    factor: f64,
    floor: f64,
) -> bool {
    for (key, coef) in value.terms() {
        let v = coef.max_coeff_magnitude();
        let s = stderr
            .terms()
            .find(|(k, _)| *k == key)
            .map(|(_, c)| c.max_coeff_magnitude())
            .unwrap_or(0.0);
        if v > factor * s + floor {
            return false;
        }
    }
    true
}

/// A symbol in `n` momentum blocks viewed as an `n`-cochain.
#[derive(Clone, PartialEq, Debug)]
pub struct Cochain<C: Scalar> {
    pub symbol: MomentumSymbol<C>,
}

impl<C: Scalar> Cochain<C> {
    pub fn new(symbol: MomentumSymbol<C>) -> Self {
        Cochain { symbol }
    }

    pub fn blocks(&self) -> usize {
        self.symbol.blocks()
    }
}

/// The coboundary `df(p_1,..,p_{n+1}) = f(p_2,..) - sum (-1)^{i+1}
/// f(.., p_i + p_{i+1}, ..) + (-1)^{n+1} f(p_1,..,p_n)`.
pub fn hochschild_d<C: Scalar>(f: &Cochain<C>) -> Cochain<C> {
    let n = f.blocks();
    let nb = n + 1;
    // Drop the first argument: old block j -> new block j+1.
    let shift: Vec<Vec<usize>> = (0..n).map(|j| vec![j + 1]).collect();
    let mut out = f.symbol.remap_blocks(nb, &shift);
    // Merge blocks i, i+1 (1-based i), sign -(-1)^{i+1} = (-1)^i.
    for i in 1..=n {
        let map: Vec<Vec<usize>> = (0..n)
            .map(|j| {
                if j + 1 < i {
                    vec![j]
                } else if j + 1 == i {
                    vec![i - 1, i]
                } else {
                    vec![j + 1]
                }
            })
            .collect();
        let term = f.symbol.remap_blocks(nb, &map);
        let sign = if i % 2 == 0 { rat_int(1) } else { rat_int(-1) };
        out = out.add(&term.scale_rat(&sign));
    }
    // Keep the first n arguments: old block j -> new block j, sign (-1)^{n+1}.
    let keep: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
    let last = f.symbol.remap_blocks(nb, &keep);
    let sign = if (n + 1) % 2 == 0 { rat_int(1) } else { rat_int(-1) };
    Cochain::new(out.add(&last.scale_rat(&sign)))
}

/// Primitive of a closed 2-cochain that is homogeneous of momentum degree
/// `m + 1`: `k(p) = -1/(m+1) K^1(p, p)` where `K^1` is the part of degree 1
/// in the first argument. `d(primitive) = K` whenever `K` is exact with
/// vanishing bivector part.
pub fn primitive<C: Scalar>(k: &Cochain<C>, m: usize) -> Result<Cochain<C>, Error> {
    if k.blocks() != 2 {
        return Err(Error::DimMismatch {
            expected: 2,
            got: k.blocks(),
        });
    }
    if !hochschild_d(k).symbol.is_zero() {
        return Err(Error::NotClosed);
    }
    let first_deg1 = k.symbol.block_homogeneous_part(0, 1);
    let diag = first_deg1.remap_blocks(1, &[vec![0], vec![0]]);
    let scale = rat_int(-1) / rat_int((m + 1) as i64);
    Ok(Cochain::new(diag.scale_rat(&scale)))
}

/// Check the coefficient identity behind the primitive construction: with
/// `K = sum K^{I,J} p_1^I p_2^J / (I! J!)` closed, coefficients agree
/// whenever the multi-index sums agree: `K^{I,J} = K^{L,N}` for
/// `I + J = L + N` with all parts nonzero.
pub fn coefficient_identity_holds(k: &Cochain<Rat>) -> bool {
    let dim = k.symbol.dim();
    let fact = |e: &[u8]| -> Rat {
        let mut r = rat_int(1);
        for &x in e {
            r *= crate::graphs::factorial(x as usize);
        }
        r
    };
    // Normalized coefficients K^{I,J} grouped by (I + J, x-monomial).
    let mut groups: BTreeMap<(Vec<u8>, Vec<u8>), BTreeMap<Vec<u8>, Rat>> = BTreeMap::new();
    for (key, coef) in k.symbol.terms() {
        let (a, b) = (key[..dim].to_vec(), key[dim..].to_vec());
        if a.iter().all(|&e| e == 0) || b.iter().all(|&e| e == 0) {
            continue;
        }
        let total: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        for (xe, c) in coef.terms() {
            let norm = c * &fact(&a) * &fact(&b);
            groups
                .entry((total.clone(), xe.clone()))
                .or_default()
                .insert(a.clone(), norm);
        }
    }
    for ((total, _), vals) in &groups {
        let first = vals.values().next().unwrap();
        if vals.values().any(|v| v != first) {
            return false;
        }
        // Splittings with zero coefficient are absent from the map; if any
        // are missing the common value must be zero.
        if vals.len() < count_splittings(total) && !first.is_zero() {
            return false;
        }
    }
    true
}

/// Number of ways to split a multi-index into two nonzero parts.
fn count_splittings(total: &[u8]) -> usize {
    let all: usize = total.iter().map(|&e| e as usize + 1).product();
    all - 2
}

/// Per-order naturality residuals; every symbol is zero for a natural
/// series.
#[derive(Clone, Debug)]
pub struct NaturalityResidual<C: Scalar> {
    pub order: usize,
    /// Deviation from momentum homogeneity of degree `n + 1`.
    pub homogeneity: MomentumSymbol<C>,
    /// Value at `p_2 = 0` (must vanish).
    pub at_second_zero: MomentumSymbol<C>,
    /// Value at `p_1 = 0` (must vanish).
    pub at_first_zero: MomentumSymbol<C>,
    /// Diagonal values of each first-slot homogeneous part (must vanish).
    pub diagonal_parts: Vec<MomentumSymbol<C>>,
}

pub fn naturality_check<C: Scalar>(s: &GradedSeries<C>) -> Vec<NaturalityResidual<C>> {
    let mut out = Vec::new();
    for (&n, sym) in s.orders() {
        let homogeneity = sym.sub(&sym.momentum_homogeneous_part(n as u32 + 1));
        let at_second_zero = sym.remap_blocks(2, &[vec![0], vec![]]);
        let at_first_zero = sym.remap_blocks(2, &[vec![], vec![1]]);
        let diagonal_parts = (0..=(n as u32 + 1))
            .map(|i| {
                sym.block_homogeneous_part(0, i)
                    .remap_blocks(1, &[vec![0], vec![0]])
            })
            .collect();
        out.push(NaturalityResidual {
            order: n,
            homogeneity,
            at_second_zero,
            at_first_zero,
            diagonal_parts,
        });
    }
    out
}

impl NaturalityResidual<Rat> {
    pub fn passes(&self) -> bool {
        self.homogeneity.is_zero()
            && self.at_second_zero.is_zero()
            && self.at_first_zero.is_zero()
            && self.diagonal_parts.iter().all(|d| d.is_zero())
    }
}

impl NaturalityResidual<f64> {
    pub fn passes(&self, tol: f64) -> bool {
        self.homogeneity.max_coeff_magnitude() <= tol
            && self.at_second_zero.max_coeff_magnitude() <= tol
            && self.at_first_zero.max_coeff_magnitude() <= tol
            && self
                .diagonal_parts
                .iter()
                .all(|d| d.max_coeff_magnitude() <= tol)
    }
}

/// Vector series (base point and momentum covector) produced by the tree
/// expansion of the auxiliary variables of the associativity equation.
#[derive(Clone, Debug)]
pub struct BarSeries<C: Scalar> {
    /// Base-point series: `x + ...`, one entry per coordinate.
    pub x: Vec<HSeries<C>>,
    /// Momentum series: merged-block sum plus corrections, per coordinate.
    pub p: Vec<HSeries<C>>,
}

/// Elementary differential of the graded series over a rooted topological
/// tree: a vector of three-block series.
fn elementary_differential<C: Scalar>(
    side: CrSide,
    class: &RootedClass,
    t_series: &HSeries<C>,
    n_max: usize,
) -> Result<Vec<HSeries<C>>, Error> {
    let dim = t_series.dim();
    let children: Vec<Vec<HSeries<C>>> = class
        .children
        .iter()
        .map(|c| elementary_differential(side, c, t_series, n_max))
        .collect::<Result<_, _>>()?;
    let m = children.len();
    let mut out = vec![HSeries::zero(dim, 3, n_max); dim];
    let mut idx = vec![0usize; m];
    loop {
        // Derivative of the vertex function contracted with these children.
        let mut base = t_series.clone();
        for &j in &idx {
            base = if class.white {
                base.diff_x(j)
            } else {
                base.diff_p(black_slot(side), j)
            };
        }
        if !base.is_zero() {
            let mut factor: Option<HSeries<C>> = None;
            for (l, child) in children.iter().enumerate() {
                let c = &child[idx[l]];
                factor = Some(match factor {
                    None => c.clone(),
                    Some(acc) => acc.mul(c)?,
                });
            }
            for (r, slot_out) in out.iter_mut().enumerate() {
                let free = if class.white {
                    base.diff_x(r)
                } else {
                    base.diff_p(black_slot(side), r)
                };
                if free.is_zero() {
                    continue;
                }
                let mapped = free.remap_blocks(3, &remap_table(side, class.white));
                let term = match &factor {
                    None => mapped,
                    Some(f) => mapped.mul(f)?,
                };
                *slot_out = slot_out.add(&term);
            }
        }
        if m == 0 {
            break;
        }
        let mut pos = 0;
        loop {
            if pos == m {
                return Ok(out);
            }
            idx[pos] += 1;
            if idx[pos] < dim {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
    Ok(out)
}

/// The graded series packed as a power series with the grading shifted by
/// one, so each tree vertex carries one power of the parameter.
pub fn shifted_series<C: Scalar>(s: &GradedSeries<C>, n_max: usize) -> HSeries<C> {
    let mut t = HSeries::zero(s.dim(), 2, n_max);
    for n in 1..=n_max {
        t.set_order(n, s.get(n));
    }
    t
}

/// Tree expansion of the auxiliary base point and momentum of one side of
/// the associativity equation: sums of elementary differentials over
/// topological rooted trees weighted by inverse symmetry coefficients.
/// Black-rooted trees feed the base point, white-rooted trees the momentum.
pub fn tree_expand<C: Scalar>(
    s: &GradedSeries<C>,
    side: CrSide,
    n_max: usize,
) -> Result<BarSeries<C>, Error> {
    let dim = s.dim();
    let t_series = shifted_series(s, n_max);
    let mut x: Vec<HSeries<C>> = (0..dim)
        .map(|i| HSeries::from_order0(MomentumSymbol::from_xpoly(3, XPoly::var(dim, i)), n_max))
        .collect();
    let merged: Vec<usize> = match side {
        CrSide::One => vec![0, 1],
        CrSide::Two => vec![1, 2],
    };
    let mut p: Vec<HSeries<C>> = (0..dim)
        .map(|i| {
            let mut sym = MomentumSymbol::zero(dim, 3);
            for &b in &merged {
                sym = sym.add(&MomentumSymbol::momentum_var(dim, 3, b, i));
            }
            HSeries::from_order0(sym, n_max)
        })
        .collect();
    for class in rooted_classes_up_to(n_max) {
        let inv_sigma = rat_int(1) / class.sigma_rat();
        let ed = elementary_differential(side, &class, &t_series, n_max)?;
        let target = if class.white { &mut p } else { &mut x };
        for i in 0..dim {
            target[i] = target[i].add(&ed[i].scale_rat(&inv_sigma));
        }
    }
    Ok(BarSeries { x, p })
}

/// Existence-side bookkeeping: the first-side sum expressed through
/// three-ground Kontsevich trees, `(1/n!) sum over trees of type (n,3) of
/// W(contraction) W(restriction) hat B`.
pub fn konttrees_m1(
    alpha: &PoissonStructure,
    n: usize,
    resolver: &mut WeightResolver,
) -> Result<MomentumSymbol<WPoly>, Error> {
    let mut out = MomentumSymbol::zero(alpha.dim(), 3);
    let inv_fact = rat_int(1) / crate::graphs::factorial(n);
    for g in enumerate_trees(n, 3, crate::graphs::DEFAULT_ENUMERATION_CAP)? {
        let sym = hat_b(&g, alpha)?;
        if sym.is_zero() {
            continue;
        }
        let d = cr_decomposition(&g, CrSide::One)?;
        let mut w = WPoly::constant(rat_int(1));
        for f in &d.factors {
            w = w.mul_ref(&resolver.wpoly(f)?);
        }
        let sym_w = sym.map_coeffs(&|r: &Rat| WPoly::constant(r * &inv_fact).mul_ref(&w));
        out = out.add(&sym_w);
    }
    Ok(out)
}
