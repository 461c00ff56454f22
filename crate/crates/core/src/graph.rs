//! Multigraph primitives: stable edge ids, small vertex sets, contraction and
//! cut arithmetic.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Position of an edge in the instance file. Ids are dense, assigned once at
/// parse time and carried unchanged through every contraction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A set of at most 64 vertices stored as a bitmask.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexSet(pub u64);

impl VertexSet {
    pub const EMPTY: VertexSet = VertexSet(0);

    pub fn singleton(v: usize) -> Self {
        VertexSet(1 << v)
    }

    /// `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            VertexSet(u64::MAX)
        } else {
            VertexSet((1u64 << n) - 1)
        }
    }

    pub fn contains(self, v: usize) -> bool {
        v < 64 && self.0 >> v & 1 == 1
    }

    pub fn insert(&mut self, v: usize) {
        self.0 |= 1 << v;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        VertexSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        VertexSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        VertexSet(self.0 & !other.0)
    }

    pub fn complement(self, n: usize) -> Self {
        VertexSet(!self.0 & Self::full(n).0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn min(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(v)
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// The side of the cut `{self, complement}` that avoids vertex 0.
    pub fn canonical(self, n: usize) -> Self {
        if self.contains(0) {
            self.complement(n)
        } else {
            self
        }
    }

    /// Two sets cross when all four regions they induce in `{0..n}` are
    /// nonempty.
    pub fn crosses(self, other: Self, n: usize) -> bool {
        !self.intersection(other).is_empty()
            && !self.difference(other).is_empty()
            && !other.difference(self).is_empty()
            && !self.union(other).complement(n).is_empty()
    }
}

impl FromIterator<usize> for VertexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = VertexSet::EMPTY;
        for v in iter {
            set.insert(v);
        }
        set
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub u: usize,
    pub v: usize,
}

impl Edge {
    pub fn new(id: EdgeId, u: usize, v: usize) -> Self {
        Edge { id, u, v }
    }

    pub fn other(&self, w: usize) -> usize {
        if self.u == w {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, w: usize) -> bool {
        self.u == w || self.v == w
    }

    pub fn crosses(&self, shore: VertexSet) -> bool {
        shore.contains(self.u) != shore.contains(self.v)
    }
}

/// An undirected multigraph on vertices `0..n`. Edges keep the id they had in
/// the graph they were derived from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiGraph {
    n: usize,
    edges: Vec<Edge>,
    #[serde(skip)]
    incidence: Vec<Vec<usize>>,
}

impl MultiGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Self {
        let mut incidence = vec![Vec::new(); n];
        for (pos, e) in edges.iter().enumerate() {
            assert!(e.u < n && e.v < n, "edge {} out of range", e.id);
            incidence[e.u].push(pos);
            if e.v != e.u {
                incidence[e.v].push(pos);
            }
        }
        MultiGraph { n, edges, incidence }
    }

    /// Builds a graph whose edge ids are the positions in `pairs`.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let edges = pairs.iter().enumerate().map(|(i, &(u, v))| Edge::new(EdgeId(i), u, v)).collect();
        Self::new(n, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().map(|e| e.id)
    }

    pub fn find(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn incident(&self, v: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.incidence[v].iter().map(move |&pos| &self.edges[pos])
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    /// Distinct neighbours of `v` with edge multiplicities, sorted by vertex.
    pub fn neighbours(&self, v: usize) -> Vec<(usize, usize)> {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for e in self.incident(v) {
            let w = e.other(v);
            match counts.iter_mut().find(|(x, _)| *x == w) {
                Some(entry) => entry.1 += 1,
                None => counts.push((w, 1)),
            }
        }
        counts.sort_unstable();
        counts
    }

    pub fn multiplicity(&self, u: usize, v: usize) -> usize {
        self.incident(u).filter(|e| e.other(u) == v).count()
    }

    pub fn is_simple(&self) -> bool {
        (0..self.n).all(|v| self.neighbours(v).iter().all(|&(w, k)| k == 1 && w != v))
    }

    pub fn cut_value(&self, shore: VertexSet) -> usize {
        self.edges.iter().filter(|e| e.crosses(shore)).count()
    }

    pub fn cut_edges(&self, shore: VertexSet) -> Vec<EdgeId> {
        self.edges.iter().filter(|e| e.crosses(shore)).map(|e| e.id).collect()
    }

    /// Merges vertices by `class_of[v]` into `classes` new vertices, dropping
    /// edges that become loops.
    pub fn contract(&self, class_of: &[usize], classes: usize) -> MultiGraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| class_of[e.u] != class_of[e.v])
            .map(|e| Edge::new(e.id, class_of[e.u], class_of[e.v]))
            .collect();
        MultiGraph::new(classes, edges)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        uf.components() == 1
    }

    /// True when every cut has at least `k` edges, checked with `n - 1`
    /// unit-capacity max-flow computations from vertex 0.
    pub fn is_k_edge_connected(&self, k: usize) -> bool {
        (1..self.n).all(|t| self.local_edge_connectivity(0, t, k) >= k)
    }

    /// Number of edge-disjoint `s`–`t` paths, capped at `cap`.
    pub fn local_edge_connectivity(&self, s: usize, t: usize, cap: usize) -> usize {
        // Each undirected edge carries flow in one direction at a time.
        let mut flow = vec![0i8; self.edges.len()];
        let mut total = 0;
        while total < cap {
            let mut via: Vec<Option<usize>> = vec![None; self.n];
            let mut seen = vec![false; self.n];
            seen[s] = true;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &pos in &self.incidence[x] {
                    let e = &self.edges[pos];
                    let y = e.other(x);
                    let forward = if e.u == x { 1 } else { -1 };
                    if !seen[y] && flow[pos] != forward {
                        seen[y] = true;
                        via[y] = Some(pos);
                        queue.push_back(y);
                    }
                }
            }
            if !seen[t] {
                break;
            }
            let mut y = t;
            while y != s {
                let pos = via[y].expect("path");
                let e = &self.edges[pos];
                let x = e.other(y);
                flow[pos] += if e.u == x { 1 } else { -1 };
                y = x;
            }
            total += 1;
        }
        total
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n], components: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// Checks that `edges` form a spanning tree on `n` vertices.
pub fn is_spanning_tree(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    let mut uf = UnionFind::new(n);
    let mut count = 0;
    for (u, v) in edges {
        if !uf.union(u, v) {
            return false;
        }
        count += 1;
    }
    count + 1 == n || (n == 0 && count == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k5() -> MultiGraph {
        let pairs: Vec<_> = (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v))).collect();
        MultiGraph::from_pairs(5, &pairs)
    }

    #[test]
    fn vertex_set_algebra() {
        let a: VertexSet = [1, 2, 3].into_iter().collect();
        let b: VertexSet = [3, 4].into_iter().collect();
        assert_eq!(a.intersection(b).to_vec(), vec![3]);
        assert!(a.crosses(b, 6));
        let c: VertexSet = [0, 1, 2, 3].into_iter().collect();
        assert!(!c.crosses(b, 5), "union covers everything");
        assert_eq!(VertexSet::singleton(0).canonical(4).to_vec(), vec![1, 2, 3]);
    }

    #[test]
    fn k5_is_four_connected() {
        let g = k5();
        assert!(g.is_k_edge_connected(4));
        assert!(!g.is_k_edge_connected(5));
        assert_eq!(g.cut_value(VertexSet::singleton(2)), 4);
        assert_eq!(g.cut_value([0, 1].into_iter().collect()), 6);
    }

    #[test]
    fn contraction_keeps_ids_and_drops_loops() {
        let g = k5();
        let c = g.contract(&[0, 0, 1, 1, 2], 3);
        assert_eq!(c.edge_count(), 8);
        assert!(c.edges().iter().all(|e| e.u != e.v));
        assert_eq!(c.multiplicity(0, 1), 4);
        let ids: Vec<_> = c.edge_ids().collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spanning_tree_check() {
        assert!(is_spanning_tree(3, [(0, 1), (1, 2)]));
        assert!(!is_spanning_tree(3, [(0, 1), (0, 1)]));
        assert!(!is_spanning_tree(4, [(0, 1), (1, 2)]));
    }
}
