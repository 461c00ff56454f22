//! Samplers for the interior of one hierarchy piece.

use super::decomposition::{decompose_target, TreeDistribution, TreeTarget};
use super::maxent::MaxEntTree;
use crate::error::SamplerError;
use crate::graph::{Edge, EdgeId, MultiGraph};
use crate::hierarchy::LocalPiece;
use crate::rational::{to_f64, Rational};
use crate::shift::{ShiftKey, ShiftModel, ShiftedSolution};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Which tree law a degree piece uses for its shifted point.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerKind {
    /// Exact decomposition into trees respecting the capacity-one parts.
    MatroidIntersection,
    /// Maximum-entropy law with the shifted marginals; parts are ignored.
    MaxEntropy,
}

/// The interior of a piece as its own graph: piece vertex `i` becomes `i - 1`
/// and the edges are the internal edges in increasing id order.
pub fn interior_graph(piece: &LocalPiece) -> MultiGraph {
    let edges = piece
        .internal
        .iter()
        .map(|&id| {
            let e = piece.graph.find(id).expect("internal edge");
            Edge::new(id, e.u - 1, e.v - 1)
        })
        .collect();
    MultiGraph::new(piece.interior_size(), edges)
}

/// One draw on a degree piece: the shifted point and the tree sampled for it.
#[derive(Clone, Debug)]
pub struct PieceDraw {
    pub shift: ShiftedSolution,
    pub tree: Vec<EdgeId>,
    pub kind: SamplerKind,
}

/// Sampler for a degree piece that is not a K5. Tree laws are computed on
/// first use for each shifted point and shared afterwards.
pub struct DegreePieceSampler {
    model: ShiftModel,
    interior: MultiGraph,
    exact: Mutex<HashMap<ShiftKey, Arc<TreeDistribution>>>,
    maxent: Mutex<HashMap<Vec<u8>, Arc<MaxEntTree>>>,
}

impl DegreePieceSampler {
    pub fn new(piece: &LocalPiece) -> Result<Self, SamplerError> {
        Ok(DegreePieceSampler {
            model: ShiftModel::new(piece)?,
            interior: interior_graph(piece),
            exact: Mutex::new(HashMap::new()),
            maxent: Mutex::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &ShiftModel {
        &self.model
    }

    pub fn interior(&self) -> &MultiGraph {
        &self.interior
    }

    pub fn draw<R: Rng + ?Sized>(&self, kind: SamplerKind, rng: &mut R) -> Result<PieceDraw, SamplerError> {
        let shift = self.model.draw(rng)?;
        let tree = match kind {
            SamplerKind::MatroidIntersection => self.exact_law(&shift)?.sample(rng).to_vec(),
            SamplerKind::MaxEntropy => self.maxent_law(&shift)?.sample(rng)?,
        };
        Ok(PieceDraw { shift, tree, kind })
    }

    /// Exact decomposition for the shifted point, cached by its key.
    pub fn exact_law(&self, shift: &ShiftedSolution) -> Result<Arc<TreeDistribution>, SamplerError> {
        let key = shift.key();
        if let Some(found) = self.exact.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(found));
        }
        let values: Vec<_> = shift.y.iter().map(|&(_, t)| t).collect();
        let parts: Vec<Vec<usize>> = shift
            .parts
            .iter()
            .map(|part| part.iter().map(|id| self.position(*id)).collect())
            .collect();
        let target = TreeTarget { graph: &self.interior, values: &values, parts: &parts };
        let law = Arc::new(decompose_target(&target)?);
        self.exact.lock().expect("cache lock").insert(key, Arc::clone(&law));
        Ok(law)
    }

    /// Maximum-entropy fit for the shifted values, cached by the values.
    pub fn maxent_law(&self, shift: &ShiftedSolution) -> Result<Arc<MaxEntTree>, SamplerError> {
        let key: Vec<u8> = shift.y.iter().map(|&(_, t)| t.0).collect();
        if let Some(found) = self.maxent.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(found));
        }
        let values: Vec<_> = shift.y.iter().map(|&(_, t)| t).collect();
        let law = Arc::new(MaxEntTree::fit_thirds(&self.interior, &values)?);
        self.maxent.lock().expect("cache lock").insert(key, Arc::clone(&law));
        Ok(law)
    }

    /// Every interior tree with its probability under `kind`, obtained by
    /// enumerating all shift branches instead of sampling.
    pub fn tree_law(&self, kind: SamplerKind) -> Result<Vec<(Vec<EdgeId>, f64)>, SamplerError> {
        let mut mass: HashMap<Vec<EdgeId>, f64> = HashMap::new();
        for (shift, p) in self.model.branches()? {
            let p = to_f64(&p);
            match kind {
                SamplerKind::MatroidIntersection => {
                    for (tree, w) in self.exact_law(&shift)?.support() {
                        *mass.entry(tree.to_vec()).or_default() += p * to_f64(w);
                    }
                }
                SamplerKind::MaxEntropy => {
                    for (tree, w) in self.maxent_law(&shift)?.support() {
                        *mass.entry(tree).or_default() += p * w;
                    }
                }
            }
        }
        let mut out: Vec<_> = mass.into_iter().collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Exact edge marginals of the matroid-intersection sampler.
    pub fn exact_marginals(&self) -> Result<Vec<(EdgeId, Rational)>, SamplerError> {
        let mut mass: Vec<Rational> = vec![Rational::default(); self.interior.edge_count()];
        for (shift, p) in self.model.branches()? {
            for (tree, w) in self.exact_law(&shift)?.support() {
                for id in tree {
                    mass[self.position(*id)] += &p * w;
                }
            }
        }
        Ok(self.interior.edge_ids().zip(mass).collect())
    }

    fn position(&self, id: EdgeId) -> usize {
        self.model.piece().internal.binary_search(&id).expect("internal edge")
    }
}

/// The twelve Hamiltonian paths of the K4 inside a K5 piece.
pub fn k5_paths(piece: &LocalPiece) -> Vec<Vec<EdgeId>> {
    let edge_between = |a: usize, b: usize| {
        piece.graph.edges().iter().find(|e| (e.u, e.v) == (a, b) || (e.u, e.v) == (b, a)).expect("K4 edge").id
    };
    let mut paths = Vec::new();
    let mut order = [1, 2, 3, 4];
    permutations(&mut order, 0, &mut |p| {
        if p[0] < p[3] {
            let mut path: Vec<EdgeId> = p.windows(2).map(|w| edge_between(w[0], w[1])).collect();
            path.sort_unstable();
            paths.push(path);
        }
    });
    paths.sort();
    paths
}

fn permutations(items: &mut [usize; 4], k: usize, visit: &mut impl FnMut(&[usize; 4])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Partner pairs of a cycle piece's interior chain, in chain order. For the
/// root piece the two pairs at the outside vertex come first and last.
pub fn cycle_pairs(piece: &LocalPiece, include_outside: bool) -> Vec<[EdgeId; 2]> {
    let k = piece.interior_size();
    let pair = |a: usize, b: usize| -> [EdgeId; 2] {
        let mut ids: Vec<EdgeId> =
            piece.graph.edges().iter().filter(|e| (e.u, e.v) == (a, b) || (e.u, e.v) == (b, a)).map(|e| e.id).collect();
        ids.sort_unstable();
        [ids[0], ids[1]]
    };
    let mut pairs: Vec<[EdgeId; 2]> = (1..k).map(|i| pair(i, i + 1)).collect();
    if include_outside {
        pairs.insert(0, pair(0, 1));
        pairs.push(pair(k, 0));
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn circulant_piece(n: usize) -> LocalPiece {
        let pairs: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 2) % n)]).collect();
        let mut piece = LocalPiece::from_graph(MultiGraph::from_pairs(n, &pairs));
        piece.internal.sort_unstable();
        piece.external.sort_unstable();
        piece
    }

    #[test]
    fn exact_marginals_are_one_half_even_and_odd() {
        for n in [8, 7] {
            let sampler = DegreePieceSampler::new(&circulant_piece(n)).unwrap();
            for (id, m) in sampler.exact_marginals().unwrap() {
                assert_eq!(m, ratio(1, 2), "C{n}(1,2) edge {id}");
            }
        }
    }

    #[test]
    fn maxent_law_has_half_marginals() {
        let sampler = DegreePieceSampler::new(&circulant_piece(8)).unwrap();
        let law = sampler.tree_law(SamplerKind::MaxEntropy).unwrap();
        let total: f64 = law.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for id in sampler.interior().edge_ids() {
            let m: f64 = law.iter().filter(|(t, _)| t.contains(&id)).map(|(_, p)| p).sum();
            assert!((m - 0.5).abs() < 1e-5, "edge {id}: {m}");
        }
    }

    #[test]
    fn k5_paths_cover_each_edge_half_the_time() {
        let pairs: Vec<_> = (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v))).collect();
        let piece = LocalPiece::from_graph(MultiGraph::from_pairs(5, &pairs));
        let paths = k5_paths(&piece);
        assert_eq!(paths.len(), 12);
        for &id in &piece.internal {
            assert_eq!(paths.iter().filter(|p| p.contains(&id)).count(), 6);
        }
    }

    #[test]
    fn cycle_pairs_follow_the_chain() {
        let pairs: Vec<_> = (0..4).flat_map(|i| [(i, (i + 1) % 4); 2]).collect();
        let piece = LocalPiece::from_graph(MultiGraph::from_pairs(4, &pairs));
        let inner = cycle_pairs(&piece, false);
        assert_eq!(inner, vec![[EdgeId(2), EdgeId(3)], [EdgeId(4), EdgeId(5)]]);
        let all = cycle_pairs(&piece, true);
        assert_eq!(all.first(), Some(&[EdgeId(0), EdgeId(1)]));
        assert_eq!(all.last(), Some(&[EdgeId(6), EdgeId(7)]));
    }
}
