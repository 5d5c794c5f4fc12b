//! Kontsevich graphs of type `(n, m)`: enumeration, structural
//! classification, restriction/contraction, connected factorization and the
//! contraction/restriction decomposition of trees with three ground vertices.
//!
//! Graphs are labeled objects: aerial vertices are numbered and the two
//! outgoing edges of each aerial vertex are ordered slots. No isomorphism
//! quotient is taken.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cayley::BipartiteTree;
use crate::error::Error;
use crate::scalar::Rat;

/// Reference to a vertex: aerial `1..n` or ground `g1..gm` (0-based inside).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum VertexRef {
    Aerial(usize),
    Ground(usize),
}

impl fmt::Display for VertexRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexRef::Aerial(k) => write!(f, "{}", k + 1),
            VertexRef::Ground(i) => write!(f, "g{}", i + 1),
        }
    }
}

/// Directed labeled graph of type `(n, m)`: `n` aerial vertices each with an
/// ordered pair of targets, `m` ground vertices with no outgoing edges.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct KontsevichGraph {
    n: usize,
    m: usize,
    targets: Vec<(VertexRef, VertexRef)>,
}

/// Canonical text encoding of a graph; a total order key at fixed `(n, m)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct GraphId(pub String);

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl KontsevichGraph {
    pub fn new(
        n: usize,
        m: usize,
        targets: Vec<(VertexRef, VertexRef)>,
    ) -> Result<Self, Error> {
        if targets.len() != n {
            return Err(Error::InvalidGraph(format!(
                "expected {} target pairs, got {}",
                n,
                targets.len()
            )));
        }
        let check = |t: &VertexRef, k: usize| -> Result<(), Error> {
            match *t {
                VertexRef::Aerial(a) if a >= n => Err(Error::InvalidGraph(format!(
                    "aerial target {} out of range",
                    a + 1
                ))),
                VertexRef::Aerial(a) if a == k => {
                    Err(Error::InvalidGraph(format!("small loop at vertex {}", k + 1)))
                }
                VertexRef::Ground(g) if g >= m => Err(Error::InvalidGraph(format!(
                    "ground target g{} out of range",
                    g + 1
                ))),
                _ => Ok(()),
            }
        };
        for (k, (a, b)) in targets.iter().enumerate() {
            check(a, k)?;
            check(b, k)?;
            if a == b {
                return Err(Error::InvalidGraph(format!(
                    "double edge at vertex {}",
                    k + 1
                )));
            }
        }
        Ok(KontsevichGraph { n, m, targets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn targets(&self) -> &[(VertexRef, VertexRef)] {
        &self.targets
    }

    pub fn target(&self, k: usize, slot: usize) -> VertexRef {
        match slot {
            0 => self.targets[k].0,
            1 => self.targets[k].1,
            _ => panic!("slot must be 0 or 1"),
        }
    }

    /// All `2n` edges in canonical order: vertex by vertex, slot 1 then 2.
    pub fn edges(&self) -> Vec<(usize, usize, VertexRef)> {
        let mut out = Vec::with_capacity(2 * self.n);
        for (k, (a, b)) in self.targets.iter().enumerate() {
            out.push((k, 0, *a));
            out.push((k, 1, *b));
        }
        out
    }

    pub fn id(&self) -> GraphId {
        let mut s = format!("K {} {} :", self.n, self.m);
        for (a, b) in &self.targets {
            s.push_str(&format!("({},{})", a, b));
        }
        GraphId(s)
    }

    pub fn parse(id: &str) -> Result<Self, Error> {
        let rest = id
            .strip_prefix("K ")
            .ok_or_else(|| Error::Parse(format!("graph id must start with 'K ': {id}")))?;
        let (header, pairs) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse("graph id missing ':'".into()))?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad n in graph id".into()))?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad m in graph id".into()))?;
        let parse_ref = |tok: &str| -> Result<VertexRef, Error> {
            if let Some(g) = tok.strip_prefix('g') {
                let i: usize = g
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad ground ref {tok}")))?;
                Ok(VertexRef::Ground(i - 1))
            } else {
                let k: usize = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad aerial ref {tok}")))?;
                Ok(VertexRef::Aerial(k - 1))
            }
        };
        let mut targets = Vec::new();
        let trimmed = pairs.trim();
        if !trimmed.is_empty() {
            for chunk in trimmed.split(')') {
                if chunk.is_empty() {
                    continue;
                }
                let body = chunk
                    .strip_prefix('(')
                    .ok_or_else(|| Error::Parse(format!("bad pair {chunk}")))?;
                let (a, b) = body
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("bad pair {chunk}")))?;
                targets.push((parse_ref(a)?, parse_ref(b)?));
            }
        }
        KontsevichGraph::new(n, m, targets)
    }

    /// Undirected simple edges of the restriction to the aerial vertices.
    pub fn aerial_skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (k, _, t) in self.edges() {
            if let VertexRef::Aerial(l) = t {
                out.insert((k.min(l), k.max(l)));
            }
        }
        out
    }

    /// Number of aerial edges, counted with multiplicity (directed slots).
    pub fn aerial_edge_count(&self) -> usize {
        self.edges()
            .iter()
            .filter(|(_, _, t)| matches!(t, VertexRef::Aerial(_)))
            .count()
    }

    /// Number of edges landing on ground vertices.
    pub fn ground_edge_count(&self) -> usize {
        2 * self.n - self.aerial_edge_count()
    }

    /// Connected components of the aerial skeleton, each sorted, ordered by
    /// their minimal vertex.
    pub fn skeleton_components(&self) -> Vec<Vec<usize>> {
        components_of(self.n, &self.aerial_skeleton())
    }

    pub fn classify(&self) -> GraphClass {
        let comps = self.skeleton_components();
        let connected = comps.len() <= 1;
        // Cycle rank of the aerial multigraph: directed aerial edges minus
        // vertices plus number of components.
        let rank = self.aerial_edge_count() as i64 - self.n as i64 + comps.len() as i64;
        GraphClass {
            connected,
            tree: connected && rank == 0 && self.n > 0,
            loop_number: rank.max(0) as usize,
        }
    }

    pub fn is_tree(&self) -> bool {
        self.classify().tree
    }

    /// Reachability set flowing into `v`: all `w` with a directed path `w -> v`.
    pub fn star_in(&self, v: VertexRef) -> BTreeSet<VertexRef> {
        let mut reach = BTreeSet::new();
        let mut frontier = vec![v];
        while let Some(cur) = frontier.pop() {
            for (k, _, t) in self.edges() {
                if t == cur {
                    let w = VertexRef::Aerial(k);
                    if w != v && reach.insert(w) {
                        frontier.push(w);
                    }
                }
            }
        }
        reach
    }

    /// Reachability set flowing out of `v`: all `w` reachable from `v`.
    pub fn star_out(&self, v: VertexRef) -> BTreeSet<VertexRef> {
        let mut reach = BTreeSet::new();
        let mut frontier = vec![v];
        while let Some(cur) = frontier.pop() {
            if let VertexRef::Aerial(k) = cur {
                for slot in 0..2 {
                    let t = self.target(k, slot);
                    if t != v && reach.insert(t) {
                        frontier.push(t);
                    }
                }
            }
        }
        reach
    }

    /// Relabel aerial vertices by a permutation: vertex `k` becomes `perm[k]`.
    pub fn apply_permutation(&self, perm: &[usize]) -> KontsevichGraph {
        assert_eq!(perm.len(), self.n);
        let relabel = |t: VertexRef| match t {
            VertexRef::Aerial(k) => VertexRef::Aerial(perm[k]),
            g => g,
        };
        let mut targets = vec![(VertexRef::Ground(0), VertexRef::Ground(0)); self.n];
        for (k, (a, b)) in self.targets.iter().enumerate() {
            targets[perm[k]] = (relabel(*a), relabel(*b));
        }
        KontsevichGraph {
            n: self.n,
            m: self.m,
            targets,
        }
    }

    /// Restriction to a vertex subset: keeps edges with both ends inside.
    pub fn restrict(&self, keep: &BTreeSet<VertexRef>) -> Subgraph {
        let mut vertices: Vec<SubVertex> = keep.iter().map(|v| SubVertex::Orig(*v)).collect();
        vertices.sort();
        let mut edges = Vec::new();
        for (k, slot, t) in self.edges() {
            let from = VertexRef::Aerial(k);
            if keep.contains(&from) && keep.contains(&t) {
                edges.push(SubEdge {
                    from: SubVertex::Orig(from),
                    slot,
                    to: SubVertex::Orig(t),
                });
            }
        }
        Subgraph { vertices, edges }
    }

    /// Contraction of a vertex subset to a single `Star` vertex; edges inside
    /// the subset become simple loops and are deleted.
    pub fn contract(&self, absorb: &BTreeSet<VertexRef>) -> Subgraph {
        let mut vertices: Vec<SubVertex> = (0..self.n)
            .map(VertexRef::Aerial)
            .chain((0..self.m).map(VertexRef::Ground))
            .filter(|v| !absorb.contains(v))
            .map(SubVertex::Orig)
            .collect();
        vertices.push(SubVertex::Star);
        vertices.sort();
        let map = |v: VertexRef| {
            if absorb.contains(&v) {
                SubVertex::Star
            } else {
                SubVertex::Orig(v)
            }
        };
        let mut edges = Vec::new();
        for (k, slot, t) in self.edges() {
            let from = map(VertexRef::Aerial(k));
            let to = map(t);
            if from == SubVertex::Star && to == SubVertex::Star {
                continue; // simple loop
            }
            edges.push(SubEdge { from, slot, to });
        }
        Subgraph { vertices, edges }
    }

    /// Connected factorization of a type `(n, 2)` graph: one factor per
    /// skeleton component, ordered by minimal original label, aerial vertices
    /// relabeled order-preservingly. Ground vertices are kept in every factor.
    pub fn connected_factorization(&self) -> Factorization {
        assert_eq!(self.m, 2, "factorization is defined for type (n,2)");
        let comps = self.skeleton_components();
        let mut factors = Vec::new();
        for comp in &comps {
            let pos: BTreeMap<usize, usize> =
                comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let relabel = |t: VertexRef| match t {
                VertexRef::Aerial(k) => VertexRef::Aerial(pos[&k]),
                g => g,
            };
            let targets: Vec<_> = comp
                .iter()
                .map(|&k| {
                    let (a, b) = self.targets[k];
                    (relabel(a), relabel(b))
                })
                .collect();
            factors.push(
                KontsevichGraph::new(comp.len(), 2, targets)
                    .expect("factor of a valid graph is valid"),
            );
        }
        Factorization {
            factors,
            original_labels: comps,
        }
    }
}

/// Structural classification of a graph.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GraphClass {
    pub connected: bool,
    pub tree: bool,
    pub loop_number: usize,
}

/// Vertex of a restriction/contraction result.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum SubVertex {
    Orig(VertexRef),
    Star,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SubEdge {
    pub from: SubVertex,
    pub slot: usize,
    pub to: SubVertex,
}

/// Raw result of a restriction or contraction; possibly not a Kontsevich
/// graph.
#[derive(Clone, PartialEq, Debug)]
pub struct Subgraph {
    pub vertices: Vec<SubVertex>,
    pub edges: Vec<SubEdge>,
}

impl Subgraph {
    /// Try to reinterpret as a Kontsevich graph. Surviving aerial vertices
    /// are relabeled in increasing original order and must keep both slots;
    /// ground vertices (and `Star`, which counts as ground) must have no
    /// outgoing edges and are placed in the order given by `grounds`.
    pub fn to_kontsevich(&self, grounds: &[SubVertex]) -> Result<(KontsevichGraph, Vec<usize>), Error> {
        let aerial: Vec<usize> = self
            .vertices
            .iter()
            .filter_map(|v| match v {
                SubVertex::Orig(VertexRef::Aerial(k)) if !grounds.contains(v) => Some(*k),
                _ => None,
            })
            .collect();
        for v in &self.vertices {
            if !matches!(v, SubVertex::Orig(VertexRef::Aerial(_))) && !grounds.contains(v) {
                return Err(Error::InvalidGraph(format!(
                    "vertex {:?} is not listed among the grounds",
                    v
                )));
            }
        }
        let a_pos: BTreeMap<usize, usize> =
            aerial.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let g_pos: BTreeMap<SubVertex, usize> = grounds
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let map = |v: SubVertex| -> Result<VertexRef, Error> {
            if let Some(&g) = g_pos.get(&v) {
                return Ok(VertexRef::Ground(g));
            }
            match v {
                SubVertex::Orig(VertexRef::Aerial(k)) => Ok(VertexRef::Aerial(a_pos[&k])),
                other => Err(Error::InvalidGraph(format!("unmapped vertex {:?}", other))),
            }
        };
        let mut targets: Vec<[Option<VertexRef>; 2]> = vec![[None, None]; aerial.len()];
        for e in &self.edges {
            match e.from {
                SubVertex::Orig(VertexRef::Aerial(k)) if a_pos.contains_key(&k) => {
                    targets[a_pos[&k]][e.slot] = Some(map(e.to)?);
                }
                _ => {
                    return Err(Error::InvalidGraph(
                        "edge starting from a ground vertex".into(),
                    ))
                }
            }
        }
        let mut pairs = Vec::with_capacity(aerial.len());
        for (i, t) in targets.iter().enumerate() {
            match (t[0], t[1]) {
                (Some(a), Some(b)) => pairs.push((a, b)),
                _ => {
                    return Err(Error::InvalidGraph(format!(
                        "aerial vertex {} lost an edge",
                        aerial[i] + 1
                    )))
                }
            }
        }
        Ok((KontsevichGraph::new(aerial.len(), grounds.len(), pairs)?, aerial))
    }
}

/// Ordered list of connected factors with their original aerial labels.
#[derive(Clone, PartialEq, Debug)]
pub struct Factorization {
    pub factors: Vec<KontsevichGraph>,
    pub original_labels: Vec<Vec<usize>>,
}

impl Factorization {
    pub fn sizes(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.n()).collect()
    }

    /// Rebuild the original graph from the factors and recorded labels.
    pub fn reassemble(&self) -> Result<KontsevichGraph, Error> {
        let n: usize = self.sizes().iter().sum();
        let mut targets = vec![None; n];
        for (factor, labels) in self.factors.iter().zip(&self.original_labels) {
            let relabel = |t: VertexRef| match t {
                VertexRef::Aerial(k) => VertexRef::Aerial(labels[k]),
                g => g,
            };
            for (k, (a, b)) in factor.targets().iter().enumerate() {
                targets[labels[k]] = Some((relabel(*a), relabel(*b)));
            }
        }
        let targets: Option<Vec<_>> = targets.into_iter().collect();
        KontsevichGraph::new(
            n,
            2,
            targets.ok_or_else(|| Error::InvalidGraph("labels do not cover 1..n".into()))?,
        )
    }
}

fn components_of(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Predicted number of graphs of type `(n, m)`.
pub fn graph_count(n: usize, m: usize) -> u128 {
    if n == 0 {
        return 1;
    }
    let choices = ((n + m - 1) * (n + m - 2)) as u128;
    choices.pow(n as u32)
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// All Kontsevich graphs of type `(n, m)` in canonical (targets-lex) order.
pub fn enumerate_graphs(n: usize, m: usize, cap: u128) -> Result<Vec<KontsevichGraph>, Error> {
    assert!(m >= 1, "at least one ground vertex is required");
    let predicted = graph_count(n, m);
    if predicted > cap {
        return Err(Error::EnumerationCap { predicted, cap });
    }
    // Target choices per vertex, in canonical order (aerial before ground).
    let mut out = Vec::with_capacity(predicted as usize);
    let mut current: Vec<(VertexRef, VertexRef)> = Vec::with_capacity(n);
    fn rec(
        n: usize,
        m: usize,
        k: usize,
        current: &mut Vec<(VertexRef, VertexRef)>,
        out: &mut Vec<KontsevichGraph>,
    ) {
        if k == n {
            out.push(KontsevichGraph {
                n,
                m,
                targets: current.clone(),
            });
            return;
        }
        let candidates: Vec<VertexRef> = (0..n)
            .filter(|&a| a != k)
            .map(VertexRef::Aerial)
            .chain((0..m).map(VertexRef::Ground))
            .collect();
        for &a in &candidates {
            for &b in &candidates {
                if a == b {
                    continue;
                }
                current.push((a, b));
                rec(n, m, k + 1, current, out);
                current.pop();
            }
        }
    }
    rec(n, m, 0, &mut current, &mut out);
    debug_assert_eq!(out.len() as u128, predicted);
    Ok(out)
}

/// All Kontsevich trees of type `(n, m)`.
pub fn enumerate_trees(n: usize, m: usize, cap: u128) -> Result<Vec<KontsevichGraph>, Error> {
    Ok(enumerate_graphs(n, m, cap)?
        .into_iter()
        .filter(|g| g.is_tree())
        .collect())
}

/// All connected Kontsevich graphs of type `(n, m)`.
pub fn enumerate_connected(n: usize, m: usize, cap: u128) -> Result<Vec<KontsevichGraph>, Error> {
    Ok(enumerate_graphs(n, m, cap)?
        .into_iter()
        .filter(|g| g.n() > 0 && g.classify().connected)
        .collect())
}

/// The decomposition coefficient `n! / (k! n_1! .. n_k!)`.
pub fn decomposition_coefficient(sizes: &[usize]) -> Rat {
    let n: usize = sizes.iter().sum();
    let mut r = factorial(n);
    r /= factorial(sizes.len());
    for &s in sizes {
        r /= factorial(s);
    }
    r
}

pub fn factorial(n: usize) -> Rat {
    let mut r = Rat::from_integer(1.into());
    for f in 2..=(n as i64) {
        r *= Rat::from_integer(f.into());
    }
    r
}

/// Brute-force cardinality of the factorization fiber over an ordered tuple
/// of connected factors.
pub fn count_fiber(factors: &[KontsevichGraph], cap: u128) -> Result<usize, Error> {
    let n: usize = factors.iter().map(|f| f.n()).sum();
    let mut count = 0;
    for g in enumerate_graphs(n, 2, cap)? {
        if g.connected_factorization().factors == factors {
            count += 1;
        }
    }
    Ok(count)
}

/// Which side of a type `(n, 3)` decomposition: side 1 merges grounds
/// `{g1, g2}`, side 2 merges `{g2, g3}`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CrSide {
    One,
    Two,
}

/// Contraction/restriction decomposition of a type `(n, 3)` Kontsevich tree.
#[derive(Clone, Debug)]
pub struct CrDecomposition {
    /// The Cayley tree: one vertex per factor, white for restriction
    /// factors, black for contraction factors, labeled by the minima rule.
    pub tree: BipartiteTree,
    /// Factors in label order; `tree` vertex `j` carries `factors[j]`.
    pub factors: Vec<KontsevichGraph>,
    /// Original aerial labels per factor.
    pub original_labels: Vec<Vec<usize>>,
    /// Aerial subset `B` (complement of the flow-in set of the spectator
    /// ground vertex).
    pub b_set: BTreeSet<usize>,
}

/// Decompose a tree of type `(n, 3)` around one ground pair.
///
/// For side 1 the spectator ground is `g3`; the restriction lives on grounds
/// `(g1, g2)` and the contraction on `(*, g3)` with the merged vertex first.
/// For side 2 the spectator is `g1`; the restriction lives on `(g2, g3)` and
/// the contraction on `(g1, *)` with the merged vertex second.
pub fn cr_decomposition(g: &KontsevichGraph, side: CrSide) -> Result<CrDecomposition, Error> {
    if g.m() != 3 || !g.is_tree() {
        return Err(Error::NotATree(g.id().0));
    }
    let spectator = match side {
        CrSide::One => VertexRef::Ground(2),
        CrSide::Two => VertexRef::Ground(0),
    };
    let merged: [VertexRef; 2] = match side {
        CrSide::One => [VertexRef::Ground(0), VertexRef::Ground(1)],
        CrSide::Two => [VertexRef::Ground(1), VertexRef::Ground(2)],
    };
    let n_set: BTreeSet<usize> = g
        .star_in(spectator)
        .into_iter()
        .filter_map(|v| match v {
            VertexRef::Aerial(k) => Some(k),
            _ => None,
        })
        .collect();
    let b_set: BTreeSet<usize> = (0..g.n()).filter(|k| !n_set.contains(k)).collect();

    // Restriction factors: type (.,2) trees on the merged ground pair.
    let keep: BTreeSet<VertexRef> = b_set
        .iter()
        .map(|&k| VertexRef::Aerial(k))
        .chain(merged.iter().copied())
        .collect();
    let restriction = g.restrict(&keep);
    let (restr_graph, restr_labels) = restriction.to_kontsevich(&[
        SubVertex::Orig(merged[0]),
        SubVertex::Orig(merged[1]),
    ])?;

    // Contraction factors: type (.,2) trees on (spectator, *) ordered by the
    // position of the merged momentum slot.
    let absorb: BTreeSet<VertexRef> = keep;
    let contraction = g.contract(&absorb);
    let ground_order: [SubVertex; 2] = match side {
        CrSide::One => [SubVertex::Star, SubVertex::Orig(spectator)],
        CrSide::Two => [SubVertex::Orig(spectator), SubVertex::Star],
    };
    let (contr_graph, contr_labels) = contraction.to_kontsevich(&ground_order)?;

    // Collect factors of both graphs with original labels.
    let mut pieces: Vec<(Vec<usize>, KontsevichGraph, bool)> = Vec::new(); // (orig labels, graph, is_white)
    let restr_fact = restr_graph.connected_factorization();
    for (f, labels) in restr_fact.factors.iter().zip(&restr_fact.original_labels) {
        let orig: Vec<usize> = labels.iter().map(|&i| restr_labels[i]).collect();
        pieces.push((orig, f.clone(), true));
    }
    let contr_fact = contr_graph.connected_factorization();
    for (f, labels) in contr_fact.factors.iter().zip(&contr_fact.original_labels) {
        let orig: Vec<usize> = labels.iter().map(|&i| contr_labels[i]).collect();
        pieces.push((orig, f.clone(), false));
    }
    pieces.sort_by_key(|(orig, _, _)| orig[0]);
    for (_, f, _) in &pieces {
        if !f.is_tree() {
            return Err(Error::InvalidGraph(format!(
                "decomposition factor is not a tree: {}",
                f.id()
            )));
        }
    }

    // Cayley tree: edge iff one original edge connects a black set to a
    // white set.
    let colors: Vec<bool> = pieces.iter().map(|(_, _, w)| *w).collect(); // true = white
    let vertex_of: BTreeMap<usize, usize> = pieces
        .iter()
        .enumerate()
        .flat_map(|(j, (orig, _, _))| orig.iter().map(move |&v| (v, j)))
        .collect();
    let mut tree_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (k, _, t) in g.edges() {
        if let VertexRef::Aerial(l) = t {
            let (fk, fl) = (vertex_of[&k], vertex_of[&l]);
            if fk != fl {
                if colors[fk] == colors[fl] {
                    return Err(Error::InvalidGraph(
                        "edge between two factors of the same color".into(),
                    ));
                }
                let key = (fk.min(fl), fk.max(fl));
                if !tree_edges.insert(key) {
                    return Err(Error::InvalidGraph(
                        "two edges between the same pair of factors".into(),
                    ));
                }
            }
        }
    }
    let tree = BipartiteTree::new(colors, tree_edges.into_iter().collect())?;
    let (original_labels, factors): (Vec<_>, Vec<_>) =
        pieces.into_iter().map(|(o, f, _)| (o, f)).unzip();
    Ok(CrDecomposition {
        tree,
        factors,
        original_labels,
        b_set,
    })
}

/// Aerial subsets `S` such that both the restriction to `pair ∪ S` and the
/// contraction of `pair ∪ S` are valid type `(., 2)` Kontsevich graphs.
///
/// `pair` is the merged ground pair `(g_i, g_j)` given by 0-based indices;
/// the remaining ground is the spectator.
pub fn sub_sets(g: &KontsevichGraph, pair: (usize, usize)) -> Vec<BTreeSet<usize>> {
    assert_eq!(g.m(), 3);
    let spectator = (0..3).find(|&i| i != pair.0 && i != pair.1).unwrap();
    let mut out = Vec::new();
    for bits in 0..(1u32 << g.n()) {
        let s: BTreeSet<usize> = (0..g.n()).filter(|&k| bits & (1 << k) != 0).collect();
        let keep: BTreeSet<VertexRef> = s
            .iter()
            .map(|&k| VertexRef::Aerial(k))
            .chain([VertexRef::Ground(pair.0), VertexRef::Ground(pair.1)])
            .collect();
        let restr_ok = g
            .restrict(&keep)
            .to_kontsevich(&[
                SubVertex::Orig(VertexRef::Ground(pair.0)),
                SubVertex::Orig(VertexRef::Ground(pair.1)),
            ])
            .is_ok();
        if !restr_ok {
            continue;
        }
        let contr_ok = g
            .contract(&keep)
            .to_kontsevich(&[SubVertex::Star, SubVertex::Orig(VertexRef::Ground(spectator))])
            .is_ok();
        if contr_ok {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn wedge() -> KontsevichGraph {
        KontsevichGraph::parse("K 1 2 :(g1,g2)").unwrap()
    }

    #[test]
    fn enumeration_counts_match_closed_form() {
        assert_eq!(enumerate_graphs(0, 2, 10).unwrap().len(), 1);
        assert_eq!(enumerate_graphs(1, 2, 100).unwrap().len(), 2);
        assert_eq!(enumerate_graphs(2, 2, 100).unwrap().len(), 36);
        assert_eq!(
            enumerate_graphs(3, 2, 10_000).unwrap().len() as u128,
            graph_count(3, 2)
        );
        assert_eq!(graph_count(3, 2), 1728);
        assert_eq!(graph_count(4, 2), 160000);
    }

    #[test]
    fn enumeration_cap_guard() {
        assert!(matches!(
            enumerate_graphs(2, 2, 35),
            Err(Error::EnumerationCap { predicted: 36, cap: 35 })
        ));
    }

    #[test]
    fn id_round_trip_and_order() {
        for g in enumerate_graphs(2, 2, 100).unwrap() {
            let id = g.id();
            let back = KontsevichGraph::parse(&id.0).unwrap();
            assert_eq!(back, g);
        }
        assert_eq!(wedge().id().0, "K 1 2 :(g1,g2)");
        // Enumeration emits graphs in ascending canonical order.
        let graphs = enumerate_graphs(2, 2, 100).unwrap();
        for w in graphs.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn invariants_reject_loops_and_double_edges() {
        assert!(KontsevichGraph::parse("K 1 2 :(1,g1)").is_err()); // small loop
        assert!(KontsevichGraph::parse("K 1 2 :(g1,g1)").is_err()); // double edge
        assert!(KontsevichGraph::parse("K 1 2 :(g1,g3)").is_err()); // bad ref
    }

    #[test]
    fn classify_wedge_and_trees() {
        let w = wedge();
        let c = w.classify();
        assert!(c.connected && c.tree);
        assert_eq!(c.loop_number, 0);
        // No Kontsevich trees of type (n,1).
        for n in 1..=4 {
            assert_eq!(enumerate_trees(n, 1, 1_000_000).unwrap().len(), 0);
        }
        // 16 trees of type (2,2), derived by exhaustive enumeration.
        assert_eq!(enumerate_trees(2, 2, 100).unwrap().len(), 16);
    }

    #[test]
    fn tree_edge_counts() {
        for n in 1..=3 {
            for m in 2..=3 {
                for t in enumerate_trees(n, m, 1_000_000).unwrap() {
                    assert_eq!(t.aerial_edge_count(), n - 1);
                    assert_eq!(t.ground_edge_count(), n + 1);
                }
            }
        }
    }

    #[test]
    fn star_sets_on_wedge_and_chain() {
        let w = wedge();
        let out: BTreeSet<_> = w.star_out(VertexRef::Aerial(0));
        assert_eq!(
            out,
            BTreeSet::from([VertexRef::Ground(0), VertexRef::Ground(1)])
        );
        assert_eq!(
            w.star_in(VertexRef::Ground(0)),
            BTreeSet::from([VertexRef::Aerial(0)])
        );
        // Transitivity along a 3-chain 3 -> 2 -> 1 -> grounds.
        let chain = KontsevichGraph::parse("K 3 2 :(g1,g2)(1,g1)(2,g2)").unwrap();
        let reach = chain.star_in(VertexRef::Ground(0));
        assert!(reach.contains(&VertexRef::Aerial(2)));
        assert_eq!(
            chain.star_out(VertexRef::Aerial(2)),
            BTreeSet::from([
                VertexRef::Aerial(0),
                VertexRef::Aerial(1),
                VertexRef::Ground(0),
                VertexRef::Ground(1)
            ])
        );
    }

    #[test]
    fn restrict_identity_and_contract_wedge() {
        let w = wedge();
        let all: BTreeSet<VertexRef> = [
            VertexRef::Aerial(0),
            VertexRef::Ground(0),
            VertexRef::Ground(1),
        ]
        .into();
        let sub = w.restrict(&all);
        let (back, labels) = sub
            .to_kontsevich(&[
                SubVertex::Orig(VertexRef::Ground(0)),
                SubVertex::Orig(VertexRef::Ground(1)),
            ])
            .unwrap();
        assert_eq!(back, w);
        assert_eq!(labels, vec![0]);
        // Contracting {1, g1} deletes the loop; the star keeps one incoming
        // edge but the lone aerial vertex is gone, so the result is not a
        // valid Kontsevich graph (a slot was lost).
        let absorb: BTreeSet<VertexRef> = [VertexRef::Aerial(0), VertexRef::Ground(0)].into();
        let sub = w.contract(&absorb);
        assert_eq!(sub.edges.len(), 1);
        assert!(sub
            .to_kontsevich(&[SubVertex::Star, SubVertex::Orig(VertexRef::Ground(1))])
            .is_err());
    }

    #[test]
    fn factorization_round_trip_and_counts() {
        // Disconnected graph in G_{2,2}: two wedges.
        let g = KontsevichGraph::parse("K 2 2 :(g1,g2)(g2,g1)").unwrap();
        let f = g.connected_factorization();
        assert_eq!(f.sizes(), vec![1, 1]);
        assert_eq!(f.reassemble().unwrap(), g);
        // Aggregate factor count over all of G_{3,2} by brute force.
        let mut total = 0usize;
        for g in enumerate_graphs(3, 2, 10_000).unwrap() {
            let f = g.connected_factorization();
            assert_eq!(f.reassemble().unwrap(), g);
            total += f.factors.len();
        }
        // Independent count: each graph contributes its number of skeleton
        // components.
        let direct: usize = enumerate_graphs(3, 2, 10_000)
            .unwrap()
            .iter()
            .map(|g| g.skeleton_components().len())
            .sum();
        assert_eq!(total, direct);
    }

    #[test]
    fn decomposition_coefficients() {
        assert_eq!(decomposition_coefficient(&[1]), rat(1, 1));
        assert_eq!(decomposition_coefficient(&[2, 2]), rat(3, 1));
        assert_eq!(decomposition_coefficient(&[2, 1]), rat(3, 2));
    }

    #[test]
    fn fiber_counts_match_examples() {
        // Two distinct factors of sizes (1,1).
        let w1 = KontsevichGraph::parse("K 1 2 :(g1,g2)").unwrap();
        let w2 = KontsevichGraph::parse("K 1 2 :(g2,g1)").unwrap();
        assert_eq!(count_fiber(&[w1.clone(), w2.clone()], 1000).unwrap(), 1);
        // Aggregate over both orderings of sizes (2,1) equals d(2,1)+d(1,2) = 3.
        let t2: Vec<_> = enumerate_connected(2, 2, 100).unwrap();
        let mut agg = 0usize;
        let pair = (t2[0].clone(), w1.clone());
        agg += count_fiber(&[pair.0.clone(), pair.1.clone()], 10_000).unwrap();
        agg += count_fiber(&[pair.1.clone(), pair.0.clone()], 10_000).unwrap();
        assert_eq!(agg, 3);
    }

    #[test]
    fn fiber_of_distinct_size_2_factors() {
        let c2: Vec<_> = enumerate_connected(2, 2, 100).unwrap();
        let (a, b) = (c2[0].clone(), c2[1].clone());
        assert_ne!(a, b);
        // d(2,2) = 3 for a fixed ordered pair of distinct connected factors.
        assert_eq!(count_fiber(&[a, b], 2_000_000).unwrap(), 3);
    }

    #[test]
    fn permutation_relabels_consistently() {
        let g = KontsevichGraph::parse("K 2 2 :(2,g1)(g1,g2)").unwrap();
        let h = g.apply_permutation(&[1, 0]);
        assert_eq!(h, KontsevichGraph::parse("K 2 2 :(g1,g2)(1,g1)").unwrap());
        assert_eq!(h.apply_permutation(&[1, 0]), g);
    }

    #[test]
    fn cr_decomposition_degenerate_sides() {
        // Tree in T_{1,3} with targets (g1, g2): the spectator g1 side has
        // B = empty, so the tree is the single black contraction vertex.
        let g = KontsevichGraph::parse("K 1 3 :(g1,g2)").unwrap();
        let d = cr_decomposition(&g, CrSide::Two).unwrap();
        assert_eq!(d.tree.len(), 1);
        assert!(!d.tree.is_white(0));
        assert!(d.b_set.is_empty());
        assert_eq!(d.factors.len(), 1);
        assert_eq!(d.factors[0], KontsevichGraph::parse("K 1 2 :(g1,g2)").unwrap());
        // Side 1: spectator g3 receives nothing, so N is empty and the
        // whole tree is one white restriction factor.
        let d1 = cr_decomposition(&g, CrSide::One).unwrap();
        assert_eq!(d1.tree.len(), 1);
        assert!(d1.tree.is_white(0));
        assert_eq!(d1.factors[0], KontsevichGraph::parse("K 1 2 :(g1,g2)").unwrap());
    }

    #[test]
    fn cr_decomposition_two_vertex_tree() {
        // Vertex 2 feeds g2,g3 (in N of side 2? no: star_in(g1) decides).
        // Targets: 1 -> (g1, 2), 2 -> (g2, g3). Vertex 1 reaches g1, vertex
        // 2 does not, so N = {1}, B = {2} for side 2.
        let g = KontsevichGraph::parse("K 2 3 :(g1,2)(g2,g3)").unwrap();
        let d = cr_decomposition(&g, CrSide::Two).unwrap();
        assert_eq!(d.b_set, BTreeSet::from([1]));
        assert_eq!(d.tree.len(), 2);
        assert_eq!(d.tree.edges(), &[(0, 1)]);
        // Factor 0 owns original vertex 0 (black), factor 1 owns vertex 1.
        assert!(!d.tree.is_white(0));
        assert!(d.tree.is_white(1));
        // Black factor: vertex 1 with targets (g1, *) -> grounds (g1, g2).
        assert_eq!(d.factors[0], KontsevichGraph::parse("K 1 2 :(g1,g2)").unwrap());
        // White factor: vertex 2 with targets (g2, g3) -> grounds (g1, g2).
        assert_eq!(d.factors[1], KontsevichGraph::parse("K 1 2 :(g1,g2)").unwrap());
    }

    #[test]
    fn sub_sets_of_trees_are_the_b_sets() {
        // Proof-of-proposition check at small order: for every tree of type
        // (n,3), n <= 2, the valid subsets around (g1,g2) are exactly B_g3
        // and around (g2,g3) exactly B_g1.
        for n in 1..=2 {
            for g in enumerate_trees(n, 3, 1_000_000).unwrap() {
                let d1 = cr_decomposition(&g, CrSide::One).unwrap();
                let subs = sub_sets(&g, (0, 1));
                assert_eq!(subs, vec![d1.b_set.clone()], "graph {}", g.id());
                let d2 = cr_decomposition(&g, CrSide::Two).unwrap();
                let subs = sub_sets(&g, (1, 2));
                assert_eq!(subs, vec![d2.b_set.clone()], "graph {}", g.id());
            }
        }
    }
}
