//! Bipartite (Cayley) tree combinatorics: labeled and topological trees,
//! roots, symmetry coefficients, the Butcher product and root-change
//! equivalence.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::scalar::Rat;

/// Labeled 2-colored tree on vertices `{0..n-1}`. Adjacent vertices always
/// carry different colors; `true` stands for white.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BipartiteTree {
    colors: Vec<bool>,
    edges: Vec<(usize, usize)>,
}

impl BipartiteTree {
    pub fn new(colors: Vec<bool>, mut edges: Vec<(usize, usize)>) -> Result<Self, Error> {
        let n = colors.len();
        if n == 0 {
            return Err(Error::InvalidGraph("empty tree".into()));
        }
        for e in &mut edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort();
        edges.dedup();
        if edges.len() != n - 1 {
            return Err(Error::InvalidGraph(format!(
                "a tree on {} vertices needs {} edges, got {}",
                n,
                n - 1,
                edges.len()
            )));
        }
        for &(a, b) in &edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidGraph("edge endpoint out of range".into()));
            }
            if colors[a] == colors[b] {
                return Err(Error::InvalidGraph(format!(
                    "adjacent vertices {} and {} share a color",
                    a, b
                )));
            }
        }
        let t = BipartiteTree { colors, edges };
        if !t.is_connected() {
            return Err(Error::InvalidGraph("tree is not connected".into()));
        }
        Ok(t)
    }

    pub fn single(white: bool) -> Self {
        BipartiteTree {
            colors: vec![white],
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_white(&self, v: usize) -> bool {
        self.colors[v]
    }

    pub fn colors(&self) -> &[bool] {
        &self.colors
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Canonical rooted form of this tree rooted at `v`.
    pub fn rooted_at(&self, v: usize) -> RootedClass {
        fn build(t: &BipartiteTree, v: usize, parent: Option<usize>) -> RootedClass {
            let mut children: Vec<RootedClass> = t
                .neighbors(v)
                .into_iter()
                .filter(|&w| Some(w) != parent)
                .map(|w| build(t, w, Some(v)))
                .collect();
            children.sort();
            RootedClass {
                white: t.is_white(v),
                children,
            }
        }
        build(self, v, None)
    }

    /// Centroid vertices (one or two) of the underlying tree.
    pub fn centroids(&self) -> Vec<usize> {
        let n = self.len();
        if n == 1 {
            return vec![0];
        }
        // Subtree sizes from an arbitrary root; centroid minimizes the
        // largest component after removal.
        let mut best = Vec::new();
        let mut best_score = usize::MAX;
        for v in 0..n {
            let mut score = 0;
            for w in self.neighbors(v) {
                score = score.max(self.component_size(w, v));
            }
            match score.cmp(&best_score) {
                std::cmp::Ordering::Less => {
                    best_score = score;
                    best = vec![v];
                }
                std::cmp::Ordering::Equal => best.push(v),
                _ => {}
            }
        }
        best
    }

    fn component_size(&self, start: usize, blocked: usize) -> usize {
        let mut seen = vec![false; self.len()];
        seen[blocked] = true;
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count
    }

    /// Canonical key of the unrooted topological class: the minimal rooted
    /// form over the centroids.
    pub fn unrooted_class(&self) -> RootedClass {
        self.centroids()
            .into_iter()
            .map(|c| self.rooted_at(c))
            .min()
            .expect("a tree has a centroid")
    }

    /// Automorphism group order of the colored tree.
    pub fn sym_count(&self) -> u64 {
        // Color-preserving automorphisms fix the centroid set; with two
        // centroids their colors differ, so both are fixed and the rooted
        // symmetry count at either centroid is the full count.
        self.rooted_at(self.centroids()[0]).sigma()
    }

    /// For every vertex, the size of its orbit under the automorphism group
    /// (vertices whose rooted forms are isomorphic).
    pub fn vertex_orbit_sizes(&self) -> Vec<usize> {
        let classes: Vec<RootedClass> = (0..self.len()).map(|v| self.rooted_at(v)).collect();
        (0..self.len())
            .map(|v| classes.iter().filter(|c| **c == classes[v]).count())
            .collect()
    }

    /// For every edge, the size of its orbit: edges whose pair of rooted
    /// components (split at the edge) is isomorphic as an unordered pair.
    pub fn edge_orbit_sizes(&self) -> Vec<usize> {
        let splits: Vec<(RootedClass, RootedClass)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let mut pair = [self.split_at(a, b), self.split_at(b, a)];
                pair.sort();
                let [x, y] = pair;
                (x, y)
            })
            .collect();
        (0..self.edges.len())
            .map(|i| splits.iter().filter(|s| **s == splits[i]).count())
            .collect()
    }

    /// Rooted component containing `root` after deleting the edge to `other`.
    pub fn split_at(&self, root: usize, other: usize) -> RootedClass {
        fn build(t: &BipartiteTree, v: usize, parent: usize) -> RootedClass {
            let mut children: Vec<RootedClass> = t
                .neighbors(v)
                .into_iter()
                .filter(|&w| w != parent)
                .map(|w| build(t, w, v))
                .collect();
            children.sort();
            RootedClass {
                white: t.is_white(v),
                children,
            }
        }
        build(self, root, other)
    }
}

impl fmt::Display for BipartiteTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let colors: String = self
            .colors
            .iter()
            .map(|&w| if w { 'w' } else { 'b' })
            .collect();
        write!(f, "{};", colors)?;
        for (i, (a, b)) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}-{}", a + 1, b + 1)?;
        }
        Ok(())
    }
}

/// Canonical representative of a topological rooted bipartite tree:
/// children are sorted recursively, so structural equality is isomorphism.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct RootedClass {
    pub white: bool,
    pub children: Vec<RootedClass>,
}

impl RootedClass {
    pub fn leaf(white: bool) -> Self {
        RootedClass {
            white,
            children: Vec::new(),
        }
    }

    /// Graft the given subtrees (all of the opposite color) under a new root.
    pub fn node(white: bool, mut children: Vec<RootedClass>) -> Result<Self, Error> {
        for c in &children {
            if c.white == white {
                return Err(Error::InvalidGraph(
                    "child root color must differ from the root".into(),
                ));
            }
        }
        children.sort();
        Ok(RootedClass { white, children })
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    /// Symmetry coefficient: product of factorials of child multiplicities
    /// times the children's coefficients.
    pub fn sigma(&self) -> u64 {
        let mut out = 1u64;
        let mut i = 0;
        while i < self.children.len() {
            let mut j = i;
            while j < self.children.len() && self.children[j] == self.children[i] {
                j += 1;
            }
            let mult = (j - i) as u64;
            out *= factorial_u64(mult);
            out *= self.children[i].sigma().pow(mult as u32);
            i = j;
        }
        out
    }

    /// Symmetry coefficient as a rational, convenient for series weights.
    pub fn sigma_rat(&self) -> Rat {
        Rat::from_integer((self.sigma() as i64).into())
    }

    /// Butcher product `self ∘ rhs`: grafts `rhs` under this root.
    pub fn butcher(&self, rhs: &RootedClass) -> Result<RootedClass, Error> {
        let mut children = self.children.clone();
        children.push(rhs.clone());
        RootedClass::node(self.white, children)
    }

    /// A labeled representative, rooted at vertex 0, children in canonical
    /// order.
    pub fn to_labeled(&self) -> (BipartiteTree, usize) {
        let mut colors = Vec::new();
        let mut edges = Vec::new();
        fn build(
            c: &RootedClass,
            colors: &mut Vec<bool>,
            edges: &mut Vec<(usize, usize)>,
        ) -> usize {
            let me = colors.len();
            colors.push(c.white);
            for child in &c.children {
                let idx = build(child, colors, edges);
                edges.push((me, idx));
            }
            me
        }
        build(self, &mut colors, &mut edges);
        (
            BipartiteTree::new(colors, edges).expect("canonical form is a valid tree"),
            0,
        )
    }

    /// Root-change equivalence: all rooted classes reachable by moving the
    /// root.
    pub fn root_change_orbit(&self) -> Vec<RootedClass> {
        let (t, _) = self.to_labeled();
        let mut all: Vec<RootedClass> = (0..t.len()).map(|v| t.rooted_at(v)).collect();
        all.sort();
        all.dedup();
        all
    }

    /// Canonical key of the unrooted class this rooted tree belongs to.
    pub fn unrooted_key(&self) -> RootedClass {
        let (t, _) = self.to_labeled();
        t.unrooted_class()
    }
}

impl fmt::Display for RootedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.white { "w" } else { "b" };
        if self.children.is_empty() {
            return write!(f, "{}", tag);
        }
        write!(f, "[")?;
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c)?;
        }
        write!(f, "]_{}", tag)
    }
}

fn factorial_u64(n: u64) -> u64 {
    (2..=n).product::<u64>().max(1)
}

/// All topological rooted bipartite trees of the given size.
pub fn rooted_classes_of_size(size: usize) -> Vec<RootedClass> {
    let mut memo: BTreeMap<(usize, bool), Vec<RootedClass>> = BTreeMap::new();
    fn of(size: usize, white: bool, memo: &mut BTreeMap<(usize, bool), Vec<RootedClass>>) -> Vec<RootedClass> {
        if let Some(v) = memo.get(&(size, white)) {
            return v.clone();
        }
        let mut out = Vec::new();
        if size == 1 {
            out.push(RootedClass::leaf(white));
        } else {
            // Children are opposite-colored rooted classes with sizes
            // summing to size-1; enumerate multisets via a non-decreasing
            // sequence over the candidate list.
            let mut candidates: Vec<RootedClass> = Vec::new();
            for s in 1..size {
                candidates.extend(of(s, !white, memo));
            }
            candidates.sort();
            let mut current: Vec<RootedClass> = Vec::new();
            fn rec(
                candidates: &[RootedClass],
                start: usize,
                remaining: usize,
                current: &mut Vec<RootedClass>,
                white: bool,
                out: &mut Vec<RootedClass>,
            ) {
                if remaining == 0 {
                    out.push(RootedClass {
                        white,
                        children: current.clone(),
                    });
                    return;
                }
                for (i, c) in candidates.iter().enumerate().skip(start) {
                    if c.size() > remaining {
                        continue;
                    }
                    current.push(c.clone());
                    rec(candidates, i, remaining - c.size(), current, white, out);
                    current.pop();
                }
            }
            rec(&candidates, 0, size - 1, &mut current, white, &mut out);
        }
        out.sort();
        memo.insert((size, white), out.clone());
        out
    }
    let mut out = of(size, true, &mut memo);
    out.extend(of(size, false, &mut memo));
    out.sort();
    out
}

/// All topological rooted bipartite trees with size up to `n_max`.
pub fn rooted_classes_up_to(n_max: usize) -> Vec<RootedClass> {
    (1..=n_max).flat_map(rooted_classes_of_size).collect()
}

/// Partition of the rooted classes of one size by root-change equivalence.
pub fn root_equivalence_classes(size: usize) -> Vec<Vec<RootedClass>> {
    let mut groups: BTreeMap<RootedClass, Vec<RootedClass>> = BTreeMap::new();
    for c in rooted_classes_of_size(size) {
        groups.entry(c.unrooted_key()).or_default().push(c);
    }
    groups.into_values().collect()
}

/// All labeled bipartite trees on `{0..n-1}`.
pub fn enumerate_labeled_trees(n: usize, cap: u128) -> Result<Vec<BipartiteTree>, Error> {
    assert!(n >= 1);
    let tree_count: u128 = if n == 1 {
        1
    } else {
        (n as u128).pow(n as u32 - 2)
    };
    if tree_count * 2 > cap {
        return Err(Error::EnumerationCap {
            predicted: tree_count * 2,
            cap,
        });
    }
    let mut out = Vec::new();
    for edges in labeled_trees(n) {
        // A connected bipartite graph has exactly two proper colorings.
        let mut colors = vec![true; n];
        // BFS 2-coloring from vertex 0.
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = vec![0usize];
        while let Some(v) = queue.pop() {
            for &(a, b) in &edges {
                let w = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[w] {
                    seen[w] = true;
                    colors[w] = !colors[v];
                    queue.push(w);
                }
            }
        }
        let flipped: Vec<bool> = colors.iter().map(|c| !c).collect();
        out.push(BipartiteTree::new(colors, edges.clone())?);
        out.push(BipartiteTree::new(flipped, edges)?);
    }
    Ok(out)
}

/// Edge lists of all labeled trees on `{0..n-1}` via Prüfer sequences.
fn labeled_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n == 1 {
        return vec![vec![]];
    }
    if n == 2 {
        return vec![vec![(0, 1)]];
    }
    let mut out = Vec::new();
    let len = n - 2;
    let mut seq = vec![0usize; len];
    loop {
        out.push(prufer_to_tree(&seq, n));
        // Increment the sequence in base n.
        let mut i = 0;
        loop {
            if i == len {
                return out;
            }
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

fn prufer_to_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut used = vec![false; n];
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1 && !used[v]).unwrap();
        edges.push((leaf.min(s), leaf.max(s)));
        used[leaf] = true;
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1 && !used[v]).collect();
    edges.push((rest[0], rest[1]));
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> RootedClass {
        RootedClass::leaf(true)
    }
    fn b() -> RootedClass {
        RootedClass::leaf(false)
    }

    #[test]
    fn labeled_tree_counts() {
        assert_eq!(enumerate_labeled_trees(1, 100).unwrap().len(), 2);
        assert_eq!(enumerate_labeled_trees(2, 100).unwrap().len(), 2);
        assert_eq!(enumerate_labeled_trees(3, 100).unwrap().len(), 6);
        assert_eq!(enumerate_labeled_trees(4, 1000).unwrap().len(), 32);
    }

    #[test]
    fn rooted_class_enumeration_small_sizes() {
        assert_eq!(rooted_classes_of_size(1), vec![b(), w()]);
        let size2 = rooted_classes_of_size(2);
        assert_eq!(
            size2,
            vec![
                RootedClass::node(false, vec![w()]).unwrap(),
                RootedClass::node(true, vec![b()]).unwrap(),
            ]
        );
        let size3 = rooted_classes_of_size(3);
        assert_eq!(size3.len(), 4);
        assert!(size3.contains(&RootedClass::node(false, vec![w(), w()]).unwrap()));
        assert!(size3.contains(&RootedClass::node(true, vec![b(), b()]).unwrap()));
        assert!(size3.contains(
            &RootedClass::node(false, vec![RootedClass::node(true, vec![b()]).unwrap()]).unwrap()
        ));
        assert!(size3.contains(
            &RootedClass::node(true, vec![RootedClass::node(false, vec![w()]).unwrap()]).unwrap()
        ));
    }

    #[test]
    fn sigma_values() {
        assert_eq!(b().sigma(), 1);
        assert_eq!(RootedClass::node(false, vec![w(), w()]).unwrap().sigma(), 2);
        assert_eq!(RootedClass::node(false, vec![w()]).unwrap().sigma(), 1);
        let deep = RootedClass::node(
            false,
            vec![
                RootedClass::node(true, vec![b(), b()]).unwrap(),
                RootedClass::node(true, vec![b(), b()]).unwrap(),
            ],
        )
        .unwrap();
        // Two identical children each with sigma 2: 2! * 2 * 2 = 8.
        assert_eq!(deep.sigma(), 8);
    }

    /// Brute-force automorphism count oracle for labeled colored trees.
    fn brute_force_aut(t: &BipartiteTree) -> u64 {
        let n = t.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut count = 0;
        let edge_set: std::collections::BTreeSet<(usize, usize)> =
            t.edges().iter().copied().collect();
        loop {
            let ok = (0..n).all(|v| t.is_white(v) == t.is_white(perm[v]))
                && t.edges().iter().all(|&(a, b)| {
                    let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
                    edge_set.contains(&(x, y))
                });
            if ok {
                count += 1;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        count
    }

    fn next_permutation(p: &mut [usize]) -> bool {
        let n = p.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..].reverse();
        true
    }

    #[test]
    fn sigma_matches_brute_force_automorphisms_up_to_7() {
        for size in 1..=7 {
            for class in rooted_classes_of_size(size) {
                let (t, root) = class.to_labeled();
                // Rooted automorphisms: color- and edge-preserving
                // permutations fixing the root. sigma counts exactly those.
                let n = t.len();
                let mut perm: Vec<usize> = (0..n).collect();
                let edge_set: std::collections::BTreeSet<(usize, usize)> =
                    t.edges().iter().copied().collect();
                let mut count = 0u64;
                loop {
                    let ok = perm[root] == root
                        && (0..n).all(|v| t.is_white(v) == t.is_white(perm[v]))
                        && t.edges().iter().all(|&(a, b)| {
                            let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
                            edge_set.contains(&(x, y))
                        });
                    if ok {
                        count += 1;
                    }
                    if !next_permutation(&mut perm) {
                        break;
                    }
                }
                assert_eq!(class.sigma(), count, "class {}", class);
            }
        }
    }

    #[test]
    fn unrooted_sym_matches_brute_force_up_to_6() {
        for n in 1..=6 {
            for t in enumerate_labeled_trees(n, 1_000_000).unwrap() {
                assert_eq!(t.sym_count(), brute_force_aut(&t), "tree {}", t);
            }
        }
    }

    #[test]
    fn butcher_product_examples() {
        // w ∘ b = [b]_w
        let p = w().butcher(&b()).unwrap();
        assert_eq!(p, RootedClass::node(true, vec![b()]).unwrap());
        // ([w]_b) ∘ w = [w,w]_b
        let p = RootedClass::node(false, vec![w()])
            .unwrap()
            .butcher(&w())
            .unwrap();
        assert_eq!(p, RootedClass::node(false, vec![w(), w()]).unwrap());
        // Color clash rejected.
        assert!(w().butcher(&w()).is_err());
    }

    #[test]
    fn butcher_commutation_up_to_total_6() {
        for su in 1..=5usize {
            for sv in 1..=(6 - su) {
                for u in rooted_classes_of_size(su) {
                    for v in rooted_classes_of_size(sv) {
                        if u.white == v.white {
                            continue;
                        }
                        let uv = u.butcher(&v).unwrap();
                        let vu = v.butcher(&u).unwrap();
                        assert_eq!(uv.unrooted_key(), vu.unrooted_key());
                        assert_eq!(uv.size(), u.size() + v.size());
                    }
                }
            }
        }
    }

    #[test]
    fn root_change_classes_biject_with_unrooted_trees() {
        for n in 1..=6 {
            let classes = root_equivalence_classes(n);
            // Independent count of unrooted topological trees from labeled
            // enumeration.
            let mut unrooted: Vec<RootedClass> = enumerate_labeled_trees(n, 10_000_000)
                .unwrap()
                .iter()
                .map(|t| t.unrooted_class())
                .collect();
            unrooted.sort();
            unrooted.dedup();
            assert_eq!(classes.len(), unrooted.len(), "size {}", n);
        }
        // n = 2: the two rooted trees form a single class.
        assert_eq!(root_equivalence_classes(2).len(), 1);
        // n = 1: white and black vertices are different bipartite trees.
        assert_eq!(root_equivalence_classes(1).len(), 2);
    }

    #[test]
    fn orbit_counts_match_symmetry_quotients() {
        for n in 1..=6 {
            for t in enumerate_labeled_trees(n, 1_000_000).unwrap() {
                let sym = t.sym_count();
                let vorbits = t.vertex_orbit_sizes();
                for v in 0..t.len() {
                    let rooted_sym = t.rooted_at(v).sigma();
                    assert_eq!(
                        vorbits[v] as u64,
                        sym / rooted_sym,
                        "vertex {} of {}",
                        v,
                        t
                    );
                }
                let eorbits = t.edge_orbit_sizes();
                for (i, &(a, b)) in t.edges().iter().enumerate() {
                    let sa = t.split_at(a, b).sigma();
                    let sb = t.split_at(b, a).sigma();
                    assert_eq!(eorbits[i] as u64, sym / (sa * sb), "edge {}-{} of {}", a, b, t);
                }
            }
        }
    }

    #[test]
    fn path_orbit_example() {
        // Path b - w - b: the two black ends form one orbit of size 2.
        let t = BipartiteTree::new(vec![false, true, false], vec![(0, 1), (1, 2)]).unwrap();
        let orbits = t.vertex_orbit_sizes();
        assert_eq!(orbits, vec![2, 1, 2]);
        // Star [w,w,w]_b: leaf orbit size 3 = sym(t)/sym(t_leaf) = 6/2.
        let star = BipartiteTree::new(
            vec![false, true, true, true],
            vec![(0, 1), (0, 2), (0, 3)],
        )
        .unwrap();
        assert_eq!(star.sym_count(), 6);
        assert_eq!(star.vertex_orbit_sizes(), vec![1, 3, 3, 3]);
    }
}
