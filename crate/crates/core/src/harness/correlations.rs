//! Correlation tables of the degree-piece samplers: pair, quadruple and
//! edge-endpoint events on the interior tree, measured by sampling or by
//! enumerating the tree law.

use super::stats::{proportion, Comparison, StatRow};
use crate::error::SamplerError;
use crate::graph::{EdgeId, MultiGraph, VertexSet};
use crate::hierarchy::LocalPiece;
use crate::pipeline::trial_rng;
use crate::trees::piece::{DegreePieceSampler, SamplerKind};

/// Short sampler label used in report rows.
pub fn sampler_label(kind: SamplerKind) -> &'static str {
    match kind {
        SamplerKind::MatroidIntersection => "mi",
        SamplerKind::MaxEntropy => "maxent",
    }
}

/// An event on the interior tree of one piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeEvent {
    /// Both edges are in the tree.
    Both(EdgeId, EdgeId),
    /// The first edge is in the tree and the second is not.
    OnlyFirst(EdgeId, EdgeId),
    /// Exactly two of the four edges are in the tree.
    TwoOfFour([EdgeId; 4]),
    /// Exactly one edge of each pair is in the tree.
    OneFromEachPair([EdgeId; 2], [EdgeId; 2]),
    /// Both vertices have tree degree two.
    BothDegreeTwo(usize, usize),
    /// Exactly one of the vertices has odd tree degree.
    ExactlyOneOdd(usize, usize),
}

impl TreeEvent {
    pub fn holds(&self, graph: &MultiGraph, tree: &[EdgeId]) -> bool {
        let has = |id: &EdgeId| tree.contains(id);
        let degree = |v: usize| tree.iter().filter(|id| graph.find(**id).is_some_and(|e| e.touches(v))).count();
        match self {
            TreeEvent::Both(f, g) => has(f) && has(g),
            TreeEvent::OnlyFirst(f, g) => has(f) && !has(g),
            TreeEvent::TwoOfFour(edges) => edges.iter().filter(|id| has(id)).count() == 2,
            TreeEvent::OneFromEachPair(a, b) => {
                a.iter().filter(|id| has(id)).count() == 1 && b.iter().filter(|id| has(id)).count() == 1
            }
            TreeEvent::BothDegreeTwo(u, v) => degree(*u) == 2 && degree(*v) == 2,
            TreeEvent::ExactlyOneOdd(u, v) => (degree(*u) % 2 == 1) != (degree(*v) % 2 == 1),
        }
    }
}

/// One table row: an event with its lower bound for each sampler.
#[derive(Clone, Debug)]
pub struct CorrelationRow {
    pub table: &'static str,
    pub label: String,
    pub event: TreeEvent,
    pub matroid_bound: f64,
    pub maxent_bound: f64,
}

impl CorrelationRow {
    pub fn bound(&self, kind: SamplerKind) -> f64 {
        match kind {
            SamplerKind::MatroidIntersection => self.matroid_bound,
            SamplerKind::MaxEntropy => self.maxent_bound,
        }
    }
}

/// Every row the tables assert on `piece`.
pub fn correlation_rows(piece: &LocalPiece) -> Vec<CorrelationRow> {
    let g = &piece.graph;
    let boundary = piece.boundary();
    let mut rows = Vec::new();
    for v in 1..g.vertex_count() {
        let at_v: Vec<EdgeId> = g.incident(v).map(|e| e.id).filter(|id| piece.is_internal(*id)).collect();
        for (i, &f) in at_v.iter().enumerate() {
            for &h in &at_v[i + 1..] {
                rows.push(CorrelationRow {
                    table: "pair_at_vertex",
                    label: format!("v{v} both {f},{h}"),
                    event: TreeEvent::Both(f, h),
                    matroid_bound: 1.0 / 9.0,
                    maxent_bound: 1.0 / 9.0,
                });
                for (a, b) in [(f, h), (h, f)] {
                    rows.push(CorrelationRow {
                        table: "pair_at_vertex",
                        label: format!("v{v} only {a} of {a},{b}"),
                        event: TreeEvent::OnlyFirst(a, b),
                        matroid_bound: 1.0 / 9.0,
                        maxent_bound: 12.0 / 72.0,
                    });
                }
            }
        }
        if at_v.len() == 4 {
            let edges = [at_v[0], at_v[1], at_v[2], at_v[3]];
            rows.push(CorrelationRow {
                table: "four_at_vertex",
                label: format!("v{v} two of four"),
                event: TreeEvent::TwoOfFour(edges),
                matroid_bound: 2.0 / 21.0,
                maxent_bound: 8.0 / 27.0,
            });
            for partner in 1..4 {
                let rest: Vec<EdgeId> = (1..4).filter(|&j| j != partner).map(|j| edges[j]).collect();
                let (a, b) = ([edges[0], edges[partner]], [rest[0], rest[1]]);
                rows.push(CorrelationRow {
                    table: "four_at_vertex",
                    label: format!("v{v} one of {},{} and one of {},{}", a[0], a[1], b[0], b[1]),
                    event: TreeEvent::OneFromEachPair(a, b),
                    matroid_bound: 4.0 / 63.0,
                    maxent_bound: 16.0 / 81.0,
                });
            }
        }
    }
    for &id in &piece.internal {
        let e = g.find(id).expect("internal edge");
        match (boundary.contains(e.u), boundary.contains(e.v)) {
            (false, false) => rows.push(CorrelationRow {
                table: "inner_edge",
                label: format!("{id} both ends degree two"),
                event: TreeEvent::BothDegreeTwo(e.u, e.v),
                matroid_bound: 1.0 / 36.0,
                maxent_bound: 128.0 / 6561.0,
            }),
            (true, true) => rows.push(CorrelationRow {
                table: "boundary_edge",
                label: format!("{id} exactly one end odd"),
                event: TreeEvent::ExactlyOneOdd(e.u, e.v),
                matroid_bound: 1.0 / 9.0,
                maxent_bound: 5.0 / 18.0,
            }),
            _ => {}
        }
    }
    rows
}

/// `C_n(1, 2)` as a piece, vertex 0 outside.
pub fn circulant_piece(n: usize) -> LocalPiece {
    let pairs: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 2) % n)]).collect();
    LocalPiece::from_graph(MultiGraph::from_pairs(n, &pairs))
}

/// `K_{4,4}` as a piece with sides `{0, 2, 4, 6}` and `{1, 3, 5, 7}`.
pub fn complete_bipartite_piece() -> LocalPiece {
    let pairs: Vec<_> = (0..4).flat_map(|i| (0..4).map(move |j| (2 * i, 2 * j + 1))).collect();
    LocalPiece::from_graph(MultiGraph::from_pairs(8, &pairs))
}

/// Degree pieces without proper minimum cuts, two of each parity.
pub fn reference_pieces() -> Vec<(String, LocalPiece)> {
    vec![
        ("circulant-7".into(), circulant_piece(7)),
        ("circulant-8".into(), circulant_piece(8)),
        ("circulant-9".into(), circulant_piece(9)),
        ("k44".into(), complete_bipartite_piece()),
    ]
}

fn row_name(piece: &str, row: &CorrelationRow) -> String {
    format!("{}:{piece}:{}", row.table, row.label)
}

/// Sampled frequencies of every row, one-sided at 3σ.
pub fn sampled_rows(
    name: &str,
    sampler: &DegreePieceSampler,
    kind: SamplerKind,
    trials: u64,
    seed: u64,
) -> Result<Vec<StatRow>, SamplerError> {
    let rows = correlation_rows(sampler.model().piece());
    let graph = &sampler.model().piece().graph;
    let mut hits = vec![0u64; rows.len()];
    for trial in 0..trials {
        let draw = sampler.draw(kind, &mut trial_rng(seed, trial, 0))?;
        for (count, row) in hits.iter_mut().zip(&rows) {
            *count += u64::from(row.event.holds(graph, &draw.tree));
        }
    }
    Ok(rows
        .iter()
        .zip(hits)
        .map(|(row, h)| {
            let (p, se) = proportion(h, trials);
            StatRow::new(row_name(name, row), Comparison::AtLeast, row.bound(kind), p, se)
                .sampler(sampler_label(kind))
                .class(row.table)
        })
        .collect())
}

/// Exact probabilities of every row from the enumerated tree law.
pub fn exact_rows(name: &str, sampler: &DegreePieceSampler, kind: SamplerKind) -> Result<Vec<StatRow>, SamplerError> {
    let rows = correlation_rows(sampler.model().piece());
    let graph = &sampler.model().piece().graph;
    let law = sampler.tree_law(kind)?;
    Ok(rows
        .iter()
        .map(|row| {
            let p: f64 = law.iter().filter(|(t, _)| row.event.holds(graph, t)).map(|(_, w)| w).sum();
            StatRow::new(format!("exact_{}", row_name(name, row)), Comparison::AtLeast, row.bound(kind), p, 0.0)
                .sampler(sampler_label(kind))
                .class(row.table)
        })
        .collect())
}

/// Vertices of a piece that see no outside edge.
pub fn inner_vertices(piece: &LocalPiece) -> VertexSet {
    VertexSet::full(piece.graph.vertex_count()).difference(piece.boundary()).difference(VertexSet::singleton(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pieces_have_the_expected_boundaries() {
        let c8 = circulant_piece(8);
        assert_eq!(c8.boundary().to_vec(), vec![1, 2, 6, 7]);
        assert_eq!(inner_vertices(&c8).to_vec(), vec![3, 4, 5]);
        let k44 = complete_bipartite_piece();
        assert_eq!(k44.boundary().to_vec(), vec![1, 3, 5, 7]);
        assert_eq!(k44.internal.len(), 12);
    }

    #[test]
    fn row_counts_follow_vertex_degrees() {
        // C7(1,2): inner vertices 3 and 4 carry four internal edges; the
        // boundary vertices 1, 2, 5, 6 carry three.
        let rows = correlation_rows(&circulant_piece(7));
        let pairs = rows.iter().filter(|r| r.table == "pair_at_vertex").count();
        assert_eq!(pairs, 3 * (2 * 6 + 4 * 3));
        assert_eq!(rows.iter().filter(|r| r.table == "four_at_vertex").count(), 2 * 4);
        assert_eq!(rows.iter().filter(|r| r.table == "inner_edge").count(), 1);
        assert_eq!(rows.iter().filter(|r| r.table == "boundary_edge").count(), 3);
    }

    #[test]
    fn events_read_degrees_off_the_tree() {
        let piece = circulant_piece(7);
        let g = &piece.graph;
        // Path 1-2-3 in the interior: vertex 2 has degree two, 1 and 3 one.
        let e12 = g.edges().iter().find(|e| (e.u, e.v) == (1, 2)).unwrap().id;
        let e23 = g.edges().iter().find(|e| (e.u, e.v) == (2, 3)).unwrap().id;
        let tree = [e12, e23];
        assert!(TreeEvent::Both(e12, e23).holds(g, &tree));
        assert!(!TreeEvent::OnlyFirst(e12, e23).holds(g, &tree));
        assert!(TreeEvent::ExactlyOneOdd(2, 3).holds(g, &tree));
        assert!(!TreeEvent::ExactlyOneOdd(1, 3).holds(g, &tree));
        assert!(!TreeEvent::BothDegreeTwo(2, 3).holds(g, &tree));
    }
}
