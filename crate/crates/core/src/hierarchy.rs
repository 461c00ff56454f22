//! Minimum cuts of a 4-regular, 4-edge-connected multigraph and the laminar
//! hierarchy of critical sets built by repeated contraction.
//!
//! A critical set is a minimal proper tight set that no other proper tight set
//! crosses. Contracting its complement yields either a double cycle (a cycle
//! node) or a graph with no proper minimum cut (a degree node). Repeating this
//! until the whole graph is a double cycle through the root gives a tree of
//! nodes whose node cuts and cycle segments are exactly the minimum cuts.

use crate::graph::{EdgeId, MultiGraph, VertexSet};
use crate::instance::{Instance, ROOT, ROOT_LEFT, ROOT_RIGHT};
use serde::Serialize;
use thiserror::Error;

/// Largest vertex count handled by exhaustive cut enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("{n} vertices exceed the exhaustive enumeration limit of {limit}")]
    SizeLimitExceeded { n: usize, limit: usize },
    #[error("vertices 0, 1, 2 are not a root triple")]
    MissingRoot,
    #[error("hierarchy construction failed: {0}")]
    Structure(String),
}

/// A cut given by one shore and the edges crossing it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutView {
    pub shore: VertexSet,
    pub edges: Vec<EdgeId>,
}

/// All minimum cuts, each reported once with the shore avoiding vertex 0.
pub fn enumerate_min_cuts(g: &MultiGraph) -> Result<Vec<CutView>, HierarchyError> {
    let n = g.vertex_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(HierarchyError::SizeLimitExceeded { n, limit: BRUTE_FORCE_LIMIT });
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    let neighbours: Vec<Vec<(usize, usize)>> = (0..n).map(|v| g.neighbours(v)).collect();
    let weight_into = |v: usize, shore: u64| -> usize {
        neighbours[v].iter().filter(|(w, _)| shore >> w & 1 == 1).map(|(_, k)| k).sum()
    };
    // Gray-code walk over the nonempty subsets of {1, .., n-1}.
    let mut shore = 0u64;
    let mut value = 0usize;
    let mut best = usize::MAX;
    let mut found = Vec::new();
    for step in 1u64..(1u64 << (n - 1)) {
        let v = step.trailing_zeros() as usize + 1;
        let deg = g.degree(v);
        if shore >> v & 1 == 0 {
            value = value + deg - 2 * weight_into(v, shore);
            shore |= 1 << v;
        } else {
            shore &= !(1 << v);
            value = value + 2 * weight_into(v, shore) - deg;
        }
        if value < best {
            best = value;
            found.clear();
        }
        if value == best {
            found.push(shore);
        }
    }
    found.sort_unstable();
    Ok(found
        .into_iter()
        .map(|bits| {
            let shore = VertexSet(bits);
            CutView { shore, edges: g.cut_edges(shore) }
        })
        .collect())
}

/// Minimum-cut shores `S` with `1 < |S| < n - 1`, oriented away from vertex 0.
pub fn proper_min_cuts(g: &MultiGraph) -> Result<Vec<VertexSet>, HierarchyError> {
    let n = g.vertex_count();
    Ok(enumerate_min_cuts(g)?
        .into_iter()
        .map(|c| c.shore)
        .filter(|s| s.len() > 1 && s.len() + 1 < n)
        .collect())
}

/// Cyclic vertex order starting at 0 if `g` is a cycle with every edge
/// doubled (four parallel edges when `n == 2`).
pub fn double_cycle_order(g: &MultiGraph) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    if n == 2 {
        return (g.edge_count() == 4 && g.multiplicity(0, 1) == 4).then(|| vec![0, 1]);
    }
    if n < 3 || g.edge_count() != 2 * n {
        return None;
    }
    let mut adjacent = Vec::with_capacity(n);
    for v in 0..n {
        match g.neighbours(v)[..] {
            [(a, 2), (b, 2)] => adjacent.push([a, b]),
            _ => return None,
        }
    }
    let mut order = vec![0, adjacent[0][0]];
    while order.len() < n {
        let (prev, cur) = (order[order.len() - 2], order[order.len() - 1]);
        let next = if adjacent[cur][0] == prev { adjacent[cur][1] } else { adjacent[cur][0] };
        if next == 0 {
            return None;
        }
        order.push(next);
    }
    let last = order[n - 1];
    adjacent[last].contains(&0).then_some(order)
}

pub fn is_double_cycle(g: &MultiGraph) -> bool {
    double_cycle_order(g).is_some()
}

pub fn is_k5(g: &MultiGraph) -> bool {
    g.vertex_count() == 5 && g.edge_count() == 10 && g.is_simple()
}

/// Picks the critical set to contract next: among proper tight sets avoiding
/// `root` that no proper tight set crosses, an inclusion-minimal one, ties
/// broken by the sorted original ids in `labels`.
pub fn find_critical_set(
    g: &MultiGraph,
    root: usize,
    labels: &[VertexSet],
) -> Result<Option<VertexSet>, HierarchyError> {
    let n = g.vertex_count();
    let tight: Vec<VertexSet> = proper_min_cuts(g)?
        .into_iter()
        .map(|s| if s.contains(root) { s.complement(n) } else { s })
        .collect();
    let uncrossed: Vec<VertexSet> =
        tight.iter().copied().filter(|&s| tight.iter().all(|&t| !s.crosses(t, n))).collect();
    let original = |s: VertexSet| -> Vec<usize> {
        s.iter().fold(VertexSet::EMPTY, |acc, v| acc.union(labels[v])).to_vec()
    };
    Ok(uncrossed
        .iter()
        .copied()
        .filter(|&s| !uncrossed.iter().any(|&t| t != s && t.is_subset(s)))
        .min_by_key(|&s| original(s)))
}

pub type NodeId = usize;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Leaf,
    Cycle,
    Degree,
}

/// The multigraph seen from inside a critical set: children contracted to
/// single vertices and everything outside contracted to vertex 0.
#[derive(Clone, Debug, Serialize)]
pub struct LocalPiece {
    /// Vertex 0 is the outside; vertex `i >= 1` is the `i-1`-th child.
    pub graph: MultiGraph,
    pub internal: Vec<EdgeId>,
    pub external: Vec<EdgeId>,
}

impl LocalPiece {
    /// Wraps a graph whose vertex 0 plays the outside.
    pub fn from_graph(graph: MultiGraph) -> Self {
        let (external, internal) = graph.edges().iter().map(|e| e.id).partition(|&id| {
            let e = graph.find(id).expect("own edge");
            e.touches(0)
        });
        LocalPiece { graph, internal, external }
    }

    pub fn is_k5(&self) -> bool {
        is_k5(&self.graph)
    }

    /// Inside vertices adjacent to the outside.
    pub fn boundary(&self) -> VertexSet {
        self.graph.incident(0).map(|e| e.other(0)).collect()
    }

    pub fn interior_size(&self) -> usize {
        self.graph.vertex_count() - 1
    }

    pub fn is_internal(&self, id: EdgeId) -> bool {
        self.internal.binary_search(&id).is_ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchyNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Original vertices contained in the node.
    pub label: VertexSet,
    pub parent: Option<NodeId>,
    /// Cycle nodes list their children along the cycle.
    pub children: Vec<NodeId>,
    pub piece: Option<LocalPiece>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutHierarchy {
    nodes: Vec<HierarchyNode>,
    root: NodeId,
    vertex_count: usize,
    leaf_of: Vec<Option<NodeId>>,
    settled_at: Vec<Option<NodeId>>,
}

/// Builds the critical-set hierarchy of an instance with a root triple.
pub fn build_hierarchy(instance: &Instance) -> Result<CutHierarchy, HierarchyError> {
    let g = instance.graph();
    let n = g.vertex_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(HierarchyError::SizeLimitExceeded { n, limit: BRUTE_FORCE_LIMIT });
    }
    if n < 3 || g.multiplicity(ROOT, ROOT_LEFT) != 2 || g.multiplicity(ROOT, ROOT_RIGHT) != 2 {
        return Err(HierarchyError::MissingRoot);
    }
    let structure = |msg: String| HierarchyError::Structure(msg);

    let mut nodes: Vec<HierarchyNode> = Vec::new();
    let mut leaf_of = vec![None; n];
    for v in (0..n).filter(|&v| v != ROOT) {
        leaf_of[v] = Some(nodes.len());
        nodes.push(HierarchyNode {
            id: nodes.len(),
            kind: NodeKind::Leaf,
            label: VertexSet::singleton(v),
            parent: None,
            children: Vec::new(),
            piece: None,
        });
    }

    let mut current = g.clone();
    let mut handle: Vec<Option<NodeId>> = leaf_of.clone();
    let mut labels: Vec<VertexSet> = (0..n).map(VertexSet::singleton).collect();
    let mut root_vertex = ROOT;

    while let Some(set) = find_critical_set(&current, root_vertex, &labels)? {
        let mut members = set.to_vec();
        members.sort_by_key(|&v| labels[v].min());
        let mut piece_graph = local_graph(&current, &members);
        let kind = match double_cycle_order(&piece_graph) {
            Some(order) => {
                let mut chain: Vec<usize> = order[1..].iter().map(|&i| members[i - 1]).collect();
                if labels[chain[chain.len() - 1]].min() < labels[chain[0]].min() {
                    chain.reverse();
                }
                members = chain;
                piece_graph = local_graph(&current, &members);
                NodeKind::Cycle
            }
            None => {
                if !proper_min_cuts(&piece_graph)?.is_empty() {
                    return Err(structure(format!("critical set {set:?} is neither a cycle nor a degree set")));
                }
                NodeKind::Degree
            }
        };
        let id = nodes.len();
        let children: Vec<NodeId> = members.iter().map(|&v| handle[v].expect("root never contracted")).collect();
        for &child in &children {
            nodes[child].parent = Some(id);
        }
        let label = members.iter().fold(VertexSet::EMPTY, |acc, &v| acc.union(labels[v]));
        nodes.push(HierarchyNode { id, kind, label, parent: None, children, piece: Some(piece(piece_graph)) });

        // Contract the members into a single new vertex placed last.
        let mut class_of = vec![0; current.vertex_count()];
        let mut next = 0;
        for v in 0..current.vertex_count() {
            if !set.contains(v) {
                class_of[v] = next;
                next += 1;
            }
        }
        for &v in &members {
            class_of[v] = next;
        }
        let mut new_handle = vec![None; next + 1];
        let mut new_labels = vec![VertexSet::EMPTY; next + 1];
        for v in 0..current.vertex_count() {
            if !set.contains(v) {
                new_handle[class_of[v]] = handle[v];
                new_labels[class_of[v]] = labels[v];
            }
        }
        new_handle[next] = Some(id);
        new_labels[next] = label;
        root_vertex = class_of[root_vertex];
        current = current.contract(&class_of, next + 1);
        handle = new_handle;
        labels = new_labels;
    }

    // What remains is the double cycle through the root.
    let order = {
        let mut relabel: Vec<usize> = (0..current.vertex_count()).collect();
        relabel.swap(0, root_vertex);
        let shifted = current.contract(&relabel, current.vertex_count());
        double_cycle_order(&shifted)
            .ok_or_else(|| structure("contracted graph is not a double cycle".into()))?
            .into_iter()
            .map(|v| relabel[v])
            .collect::<Vec<_>>()
    };
    let mut chain: Vec<usize> = order[1..].to_vec();
    if !labels[chain[0]].contains(ROOT_LEFT) {
        chain.reverse();
    }
    let root = nodes.len();
    let children: Vec<NodeId> = chain.iter().map(|&v| handle[v].expect("non-root vertex")).collect();
    for &child in &children {
        nodes[child].parent = Some(root);
    }
    nodes.push(HierarchyNode {
        id: root,
        kind: NodeKind::Cycle,
        label: VertexSet::singleton(ROOT).complement(n),
        parent: None,
        children,
        piece: Some(piece(local_graph(&current, &chain))),
    });

    let mut settled_at = vec![None; g.edge_count()];
    for node in &nodes {
        if let Some(piece) = &node.piece {
            for &id in &piece.internal {
                settled_at[id.0] = Some(node.id);
            }
        }
    }
    Ok(CutHierarchy { nodes, root, vertex_count: n, leaf_of, settled_at })
}

/// Contracts `members[i]` to vertex `i + 1` and everything else to vertex 0.
fn local_graph(g: &MultiGraph, members: &[usize]) -> MultiGraph {
    let mut class_of = vec![0; g.vertex_count()];
    for (i, &v) in members.iter().enumerate() {
        class_of[v] = i + 1;
    }
    g.contract(&class_of, members.len() + 1)
}

fn piece(graph: MultiGraph) -> LocalPiece {
    let mut piece = LocalPiece::from_graph(graph);
    piece.internal.sort_unstable();
    piece.external.sort_unstable();
    piece
}

impl CutHierarchy {
    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &HierarchyNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn leaf_of(&self, v: usize) -> Option<NodeId> {
        self.leaf_of[v]
    }

    /// Node whose local piece has `id` as an internal edge. Edges at the root
    /// vertex are internal to no piece.
    pub fn settled_at(&self, id: EdgeId) -> Option<NodeId> {
        self.settled_at[id.0]
    }

    /// Non-leaf nodes in construction order, which lists children first.
    pub fn internal_nodes(&self) -> impl Iterator<Item = &HierarchyNode> + '_ {
        self.nodes.iter().filter(|node| node.kind != NodeKind::Leaf)
    }

    pub fn depth(&self) -> usize {
        fn depth_of(h: &CutHierarchy, id: NodeId) -> usize {
            1 + h.nodes[id].children.iter().map(|&c| depth_of(h, c)).max().unwrap_or(0)
        }
        depth_of(self, self.root)
    }

    /// Original vertices covered by a contiguous run of a cycle node's children.
    pub fn segment_label(&self, id: NodeId, range: std::ops::Range<usize>) -> VertexSet {
        self.nodes[id].children[range]
            .iter()
            .fold(VertexSet::EMPTY, |acc, &c| acc.union(self.nodes[c].label))
    }
}

/// Every minimum cut read off the hierarchy: node cuts plus contiguous runs
/// of children of cycle nodes. Shores avoid vertex 0; sorted, no duplicates.
pub fn min_cuts_via_hierarchy(h: &CutHierarchy) -> Vec<VertexSet> {
    let n = h.vertex_count;
    let mut shores: Vec<VertexSet> = h.nodes.iter().map(|node| node.label.canonical(n)).collect();
    for node in h.nodes.iter().filter(|node| node.kind == NodeKind::Cycle) {
        let k = node.children.len();
        for start in 0..k {
            for end in start + 1..=k {
                shores.push(h.segment_label(node.id, start..end).canonical(n));
            }
        }
    }
    shores.sort_unstable();
    shores.dedup();
    shores
}

/// Cactus representation of the minimum cuts: one node per hierarchy node,
/// a cycle through each cycle node and its children, and a doubled edge from
/// each degree node to each child.
#[derive(Clone, Debug, Serialize)]
pub struct Cactus {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    /// Edge indices of each cycle; doubled edges form cycles of length two.
    pub cycles: Vec<Vec<usize>>,
    /// Cactus node of each original vertex; the root vertex maps to the root.
    pub phi: Vec<usize>,
}

pub fn build_cactus(h: &CutHierarchy) -> Cactus {
    let mut edges = Vec::new();
    let mut cycles = Vec::new();
    for node in h.internal_nodes() {
        match node.kind {
            NodeKind::Cycle => {
                let mut ring = vec![node.id];
                ring.extend(&node.children);
                let start = edges.len();
                for i in 0..ring.len() {
                    edges.push((ring[i], ring[(i + 1) % ring.len()]));
                }
                cycles.push((start..edges.len()).collect());
            }
            _ => {
                for &child in &node.children {
                    let start = edges.len();
                    edges.push((node.id, child));
                    edges.push((node.id, child));
                    cycles.push(vec![start, start + 1]);
                }
            }
        }
    }
    let phi = (0..h.vertex_count).map(|v| h.leaf_of[v].unwrap_or(h.root)).collect();
    Cactus { node_count: h.nodes.len(), edges, cycles, phi }
}

impl Cactus {
    /// Minimum cuts of the cactus (two edges of one cycle) pulled back to
    /// shores of the original graph on `n` vertices.
    pub fn pulled_back_cuts(&self, n: usize) -> Vec<VertexSet> {
        let mut shores = Vec::new();
        for cycle in &self.cycles {
            for (i, &a) in cycle.iter().enumerate() {
                for &b in &cycle[i + 1..] {
                    let side = self.component_without(self.edges[a].0, a, b);
                    let shore: VertexSet = (0..n).filter(|&v| side[self.phi[v]]).collect();
                    if !shore.is_empty() && shore.len() < n {
                        shores.push(shore.canonical(n));
                    }
                }
            }
        }
        shores.sort_unstable();
        shores.dedup();
        shores
    }

    fn component_without(&self, start: usize, skip_a: usize, skip_b: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for (i, &(u, v)) in self.edges.iter().enumerate() {
                if i == skip_a || i == skip_b || (u != x && v != x) {
                    continue;
                }
                let y = if u == x { v } else { u };
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }
}
