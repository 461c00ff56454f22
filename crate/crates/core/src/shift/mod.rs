//! Perfect-matching shifts of the all-1/2 point inside a degree piece.
//!
//! A piece with an even number of vertices draws a perfect matching `M` that
//! hits each edge with probability 1/4 and moves the interior point to 1 on
//! `M` and 1/3 elsewhere. An induced sub-matching picked from a greedy
//! 7-colouring adds capacity-one parts around its endpoints. Odd pieces first
//! split the outside vertex in two and then repair the interior total with a
//! single local 1/3 adjustment.

pub mod matching;

use crate::error::SamplerError;
use crate::graph::{Edge, EdgeId, MultiGraph};
use crate::hierarchy::LocalPiece;
use crate::rational::{ratio, Rational};
use matching::MatchingDistribution;
use rand::distributions::Distribution;
use rand::Rng;
use serde::Serialize;

/// Ids of the two parallel edges joining the halves of a split outside vertex.
pub const SPLIT_EDGES: [EdgeId; 2] = [EdgeId(usize::MAX - 1), EdgeId(usize::MAX)];

/// Number of colour classes for the contracted matching graph, which has
/// maximum degree six.
pub const COLOURS: usize = 7;

/// Source of the discrete choices a shift draw makes. Implemented by random
/// generators and by the exhaustive enumerator used for exact checks.
pub trait Chooser {
    fn uniform(&mut self, n: usize) -> usize;
    fn matching(&mut self, dist: &MatchingDistribution) -> usize;
}

/// Random choices from a generator.
pub struct RandomChooser<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Chooser for RandomChooser<'_, R> {
    fn uniform(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    fn matching(&mut self, dist: &MatchingDistribution) -> usize {
        dist.index().sample(self.0)
    }
}

/// Replays a fixed choice sequence, extending it with zeros, and tracks the
/// probability of the branch taken.
struct ScriptedChooser<'a> {
    script: &'a [usize],
    taken: Vec<(usize, usize)>,
    probability: Rational,
}

impl ScriptedChooser<'_> {
    fn next(&mut self, arity: usize) -> usize {
        let choice = self.script.get(self.taken.len()).copied().unwrap_or(0);
        self.taken.push((choice, arity));
        choice
    }
}

impl Chooser for ScriptedChooser<'_> {
    fn uniform(&mut self, n: usize) -> usize {
        self.probability *= ratio(1, n as i64);
        self.next(n)
    }

    fn matching(&mut self, dist: &MatchingDistribution) -> usize {
        let choice = self.next(dist.len());
        self.probability *= dist.weight(choice);
        choice
    }
}

/// Runs `draw` on every branch of its choice tree and returns each outcome
/// with its exact probability.
pub fn enumerate_branches<T>(mut draw: impl FnMut(&mut dyn Chooser) -> T) -> Vec<(T, Rational)> {
    let mut out = Vec::new();
    let mut script: Vec<usize> = Vec::new();
    loop {
        let mut chooser = ScriptedChooser { script: &script, taken: Vec::new(), probability: ratio(1, 1) };
        let outcome = draw(&mut chooser);
        out.push((outcome, chooser.probability));
        let mut taken = chooser.taken;
        loop {
            match taken.pop() {
                Some((choice, arity)) if choice + 1 < arity => {
                    taken.push((choice + 1, arity));
                    break;
                }
                Some(_) => continue,
                None => return out,
            }
        }
        script = taken.into_iter().map(|(choice, _)| choice).collect();
    }
}

/// Shift value as a multiple of 1/3.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Thirds(pub u8);

impl Thirds {
    pub fn to_rational(self) -> Rational {
        ratio(self.0 as i64, 3)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SurgeryKind {
    Decrease,
    Increase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Surgery {
    pub kind: SurgeryKind,
    /// Boundary edge whose interior endpoint hosts the adjustment.
    pub trigger: EdgeId,
    pub adjusted: EdgeId,
    /// Edge removed from the adjusted edge's part, if that part had three.
    pub dropped: Option<EdgeId>,
}

/// Target point for the interior tree sampler of one degree piece.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShiftedSolution {
    /// Interior edges in increasing id order with their shifted values.
    pub y: Vec<(EdgeId, Thirds)>,
    /// Disjoint capacity-one parts over interior edges.
    pub parts: Vec<Vec<EdgeId>>,
    pub matching: Vec<EdgeId>,
    pub submatching: Vec<EdgeId>,
    /// Which of the three pairings of outside edges was used (odd pieces).
    pub pairing: Option<usize>,
    pub surgery: Option<Surgery>,
}

impl ShiftedSolution {
    pub fn value(&self, id: EdgeId) -> Option<Thirds> {
        self.y.binary_search_by_key(&id, |(e, _)| *e).ok().map(|i| self.y[i].1)
    }

    /// Hashable summary of what the tree samplers consume.
    pub fn key(&self) -> ShiftKey {
        let mut parts: Vec<Vec<EdgeId>> = self.parts.clone();
        parts.iter_mut().for_each(|p| p.sort_unstable());
        parts.sort_unstable();
        ShiftKey { values: self.y.iter().map(|(_, t)| t.0).collect(), parts }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShiftKey {
    pub values: Vec<u8>,
    pub parts: Vec<Vec<EdgeId>>,
}

/// Greedy colouring of the graph obtained by contracting each matching edge,
/// visiting matching edges in increasing id order and assigning the least
/// free colour. Returns the matching edges of each of the seven classes.
pub fn colour_classes(g: &MultiGraph, matching: &[EdgeId]) -> Result<Vec<Vec<EdgeId>>, SamplerError> {
    let mut order: Vec<&Edge> = matching.iter().map(|&id| g.find(id).expect("matching edge")).collect();
    order.sort_by_key(|e| e.id);
    let mut owner = vec![usize::MAX; g.vertex_count()];
    for (i, e) in order.iter().enumerate() {
        owner[e.u] = i;
        owner[e.v] = i;
    }
    let mut adjacent = vec![Vec::new(); order.len()];
    for e in g.edges() {
        let (a, b) = (owner[e.u], owner[e.v]);
        if a != b {
            adjacent[a].push(b);
            adjacent[b].push(a);
        }
    }
    let mut colour = vec![usize::MAX; order.len()];
    let mut classes = vec![Vec::new(); COLOURS];
    for i in 0..order.len() {
        let c = (0..)
            .find(|c| adjacent[i].iter().all(|&j| colour[j] != *c))
            .expect("some colour is free");
        if c >= COLOURS {
            return Err(SamplerError::ColoringOverflow(COLOURS));
        }
        colour[i] = c;
        classes[c].push(order[i].id);
    }
    Ok(classes)
}

/// The parts around an induced sub-matching: for each matching edge `uv`, the
/// other edges at `u` and the other edges at `v`, restricted to `keep`.
pub fn partition_parts(g: &MultiGraph, submatching: &[EdgeId], keep: impl Fn(EdgeId) -> bool) -> Vec<Vec<EdgeId>> {
    let mut parts = Vec::new();
    for &id in submatching {
        let e = g.find(id).expect("matching edge");
        for end in [e.u, e.v] {
            let mut part: Vec<EdgeId> = g.incident(end).map(|f| f.id).filter(|&f| f != id && keep(f)).collect();
            part.sort_unstable();
            if !part.is_empty() {
                parts.push(part);
            }
        }
    }
    parts
}

/// Splits vertex 0 into vertices 0 and `n`, each keeping two of its four
/// edges, and joins the halves by two parallel edges. `pairing` selects which
/// outside edge (in id order) shares a half with the first one.
pub fn split_outside(g: &MultiGraph, pairing: usize) -> MultiGraph {
    let mut outside: Vec<EdgeId> = g.incident(0).map(|e| e.id).collect();
    outside.sort_unstable();
    assert_eq!(outside.len(), 4, "outside vertex must have degree four");
    let partner = outside[1 + pairing];
    let n = g.vertex_count();
    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .map(|e| {
            if !e.touches(0) || e.id == outside[0] || e.id == partner {
                *e
            } else {
                Edge::new(e.id, e.other(0), n)
            }
        })
        .collect();
    edges.extend(SPLIT_EDGES.iter().map(|&id| Edge::new(id, 0, n)));
    MultiGraph::new(n + 1, edges)
}

/// Per-piece data needed to draw shifted solutions.
#[derive(Clone, Debug)]
pub struct ShiftModel {
    piece: LocalPiece,
    /// One entry for even pieces; one per pairing for odd pieces.
    matchings: Vec<(MultiGraph, MatchingDistribution)>,
}

impl ShiftModel {
    pub fn new(piece: &LocalPiece) -> Result<Self, SamplerError> {
        let g = &piece.graph;
        let matchings = if g.vertex_count().is_multiple_of(2) {
            vec![(g.clone(), MatchingDistribution::quarter_point(g)?)]
        } else {
            (0..3)
                .map(|pairing| {
                    let split = split_outside(g, pairing);
                    MatchingDistribution::quarter_point(&split).map(|d| (split, d))
                })
                .collect::<Result<_, _>>()?
        };
        Ok(ShiftModel { piece: piece.clone(), matchings })
    }

    pub fn piece(&self) -> &LocalPiece {
        &self.piece
    }

    pub fn is_odd(&self) -> bool {
        self.piece.graph.vertex_count() % 2 == 1
    }

    pub fn matching_distribution(&self, pairing: usize) -> &MatchingDistribution {
        &self.matchings[pairing].1
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ShiftedSolution, SamplerError> {
        self.draw_with(&mut RandomChooser(rng))
    }

    /// Every shifted solution the draw can produce, with exact probabilities.
    pub fn branches(&self) -> Result<Vec<(ShiftedSolution, Rational)>, SamplerError> {
        enumerate_branches(|chooser| self.draw_with(chooser))
            .into_iter()
            .map(|(outcome, p)| outcome.map(|s| (s, p)))
            .collect()
    }

    pub fn draw_with(&self, chooser: &mut dyn Chooser) -> Result<ShiftedSolution, SamplerError> {
        let pairing = self.is_odd().then(|| chooser.uniform(3));
        let (graph, dist) = &self.matchings[pairing.unwrap_or(0)];
        let matching = dist.matching(chooser.matching(dist)).to_vec();
        let classes = colour_classes(graph, &matching)?;
        let submatching = classes[chooser.uniform(COLOURS)].clone();
        let internal = |id: EdgeId| self.piece.is_internal(id);
        let mut parts = partition_parts(graph, &submatching, internal);
        let mut y: Vec<(EdgeId, Thirds)> = self
            .piece
            .internal
            .iter()
            .map(|&id| (id, Thirds(if matching.contains(&id) { 3 } else { 1 })))
            .collect();
        let surgery = match pairing {
            Some(_) => Some(self.surgery(chooser, &matching, &mut y, &mut parts)?),
            None => None,
        };
        Ok(ShiftedSolution { y, parts, matching, submatching, pairing, surgery })
    }

    /// Restores the interior total to `|I| - 1` after the split: a matching
    /// missing the boundary lowers one interior edge by 1/3, a matching using
    /// two boundary edges raises one by 1/3 and trims its part.
    fn surgery(
        &self,
        chooser: &mut dyn Chooser,
        matching: &[EdgeId],
        y: &mut [(EdgeId, Thirds)],
        parts: &mut [Vec<EdgeId>],
    ) -> Result<Surgery, SamplerError> {
        let g = &self.piece.graph;
        let boundary: Vec<EdgeId> = self.piece.external.iter().copied().filter(|id| matching.contains(id)).collect();
        let (kind, trigger) = match boundary.len() {
            0 => (SurgeryKind::Decrease, self.piece.external[chooser.uniform(self.piece.external.len())]),
            2 => (SurgeryKind::Increase, boundary[chooser.uniform(2)]),
            k => return Err(SamplerError::InfeasibleShift(format!("matching uses {k} boundary edges"))),
        };
        let end = g.find(trigger).expect("boundary edge").other(0);
        let mut local: Vec<EdgeId> = g.incident(end).map(|e| e.id).filter(|&id| self.piece.is_internal(id)).collect();
        local.sort_unstable();
        let adjusted = local[chooser.uniform(local.len())];
        let slot = y.iter_mut().find(|(id, _)| *id == adjusted).expect("interior edge");
        let mut dropped = None;
        match kind {
            SurgeryKind::Decrease => slot.1 = Thirds(slot.1 .0 - 1),
            SurgeryKind::Increase => {
                slot.1 = Thirds(slot.1 .0 + 1);
                if let Some(part) = parts.iter_mut().find(|p| p.contains(&adjusted)) {
                    if part.len() == 3 {
                        let others: Vec<EdgeId> = part.iter().copied().filter(|&id| id != adjusted).collect();
                        let gone = others[chooser.uniform(2)];
                        part.retain(|&id| id != gone);
                        dropped = Some(gone);
                    }
                }
            }
        }
        Ok(Surgery { kind, trigger, adjusted, dropped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Circulant C_n(1, 2) seen from vertex 0.
    fn circulant_piece(n: usize) -> LocalPiece {
        let pairs: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 2) % n)]).collect();
        LocalPiece::from_graph(MultiGraph::from_pairs(n, &pairs))
    }

    #[test]
    fn colouring_fits_seven_classes() {
        let piece = circulant_piece(8);
        let model = ShiftModel::new(&piece).unwrap();
        for (m, _) in model.matching_distribution(0).support() {
            let classes = colour_classes(&piece.graph, m).unwrap();
            assert_eq!(classes.iter().map(Vec::len).sum::<usize>(), m.len());
            for class in &classes {
                for (i, a) in class.iter().enumerate() {
                    for b in &class[i + 1..] {
                        let (a, b) = (piece.graph.find(*a).unwrap(), piece.graph.find(*b).unwrap());
                        let joined = piece.graph.edges().iter().any(|f| {
                            (f.touches(a.u) || f.touches(a.v)) && (f.touches(b.u) || f.touches(b.v))
                        });
                        assert!(!joined, "class is not induced");
                    }
                }
            }
        }
    }

    #[test]
    fn split_keeps_degrees_four() {
        let piece = circulant_piece(7);
        for pairing in 0..3 {
            let split = split_outside(&piece.graph, pairing);
            assert!((0..split.vertex_count()).all(|v| split.degree(v) == 4));
            assert_eq!(split.multiplicity(0, 7), 2);
        }
    }

    #[test]
    fn even_shift_values_and_parts() {
        let piece = circulant_piece(8);
        let model = ShiftModel::new(&piece).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = model.draw(&mut rng).unwrap();
            let total: u32 = s.y.iter().map(|(_, t)| t.0 as u32).sum();
            // Interior has 7 vertices, so the values sum to 6 = 18 thirds.
            assert_eq!(total, 18);
            for part in &s.parts {
                let mass: u32 = part.iter().map(|&id| s.value(id).unwrap().0 as u32).sum();
                assert!(mass <= 3);
            }
            assert!(s.surgery.is_none());
        }
    }

    #[test]
    fn odd_branches_preserve_the_half_point_in_expectation() {
        let piece = circulant_piece(7);
        let model = ShiftModel::new(&piece).unwrap();
        let branches = model.branches().unwrap();
        let total: Rational = branches.iter().map(|(_, p)| p.clone()).sum();
        assert_eq!(total, ratio(1, 1));
        for &id in &piece.internal {
            let mean: Rational = branches
                .iter()
                .map(|(s, p)| s.value(id).unwrap().to_rational() * p)
                .fold(Rational::zero(), |a, b| a + b);
            assert_eq!(mean, ratio(1, 2), "edge {id}");
        }
        for (s, _) in &branches {
            let total: u32 = s.y.iter().map(|(_, t)| t.0 as u32).sum();
            assert_eq!(total, 15, "interior of six vertices needs five");
        }
    }

    #[test]
    fn enumeration_covers_each_branch_once() {
        let outcomes = enumerate_branches(|c| {
            let a = c.uniform(2);
            if a == 0 {
                (a, c.uniform(3))
            } else {
                (a, 9)
            }
        });
        let labels: Vec<_> = outcomes.iter().map(|(o, p)| (*o, p.clone())).collect();
        assert_eq!(
            labels,
            vec![((0, 0), ratio(1, 6)), ((0, 1), ratio(1, 6)), ((0, 2), ratio(1, 6)), ((1, 9), ratio(1, 2))]
        );
    }
}
