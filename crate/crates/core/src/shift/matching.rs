use crate::convex::{decompose, FaceOracle, Frac, ScaledPoint};
use crate::error::SamplerError;
use crate::graph::{EdgeId, MultiGraph};
use crate::rational::{to_f64, Rational};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// A distribution over perfect matchings in which every edge appears with
/// probability exactly 1/4.
#[derive(Clone, Debug)]
pub struct MatchingDistribution {
    matchings: Vec<Vec<EdgeId>>,
    weights: Vec<Rational>,
    index: WeightedIndex<f64>,
}

impl MatchingDistribution {
    /// Decomposes the all-1/4 point of a 4-regular, 4-edge-connected graph
    /// into perfect matchings with exact rational weights.
    pub fn quarter_point(g: &MultiGraph) -> Result<Self, SamplerError> {
        let all = perfect_matchings(g);
        if all.is_empty() {
            return Err(SamplerError::NoPerfectMatching);
        }
        let oracle = MatchingPolytope::new(g, all);
        let point = ScaledPoint::new(vec![1; g.edge_count()], 4);
        let parts = decompose(&oracle, point)?;
        let ids: Vec<EdgeId> = g.edge_ids().collect();
        let (matchings, weights): (Vec<_>, Vec<_>) = parts
            .into_iter()
            .map(|(positions, w)| {
                let mut m: Vec<EdgeId> = positions.into_iter().map(|p| ids[p]).collect();
                m.sort_unstable();
                (m, w)
            })
            .unzip();
        let index = WeightedIndex::new(weights.iter().map(to_f64)).expect("positive weights");
        Ok(MatchingDistribution { matchings, weights, index })
    }

    pub fn support(&self) -> impl Iterator<Item = (&[EdgeId], &Rational)> + '_ {
        self.matchings.iter().map(Vec::as_slice).zip(&self.weights)
    }

    pub fn matching(&self, i: usize) -> &[EdgeId] {
        &self.matchings[i]
    }

    pub fn weight(&self, i: usize) -> &Rational {
        &self.weights[i]
    }

    pub fn index(&self) -> &WeightedIndex<f64> {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.matchings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchings.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[EdgeId] {
        &self.matchings[self.index.sample(rng)]
    }
}

/// Every perfect matching, as sorted edge positions. Parallel edges give
/// distinct matchings.
pub fn perfect_matchings(g: &MultiGraph) -> Vec<Vec<usize>> {
    fn extend(pos_of: &[Vec<(usize, usize)>], matched: &mut Vec<bool>, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let Some(u) = matched.iter().position(|&m| !m) else {
            let mut m = chosen.clone();
            m.sort_unstable();
            out.push(m);
            return;
        };
        matched[u] = true;
        for &(pos, v) in &pos_of[u] {
            if !matched[v] {
                matched[v] = true;
                chosen.push(pos);
                extend(pos_of, matched, chosen, out);
                chosen.pop();
                matched[v] = false;
            }
        }
        matched[u] = false;
    }
    let n = g.vertex_count();
    if n % 2 == 1 {
        return Vec::new();
    }
    let mut pos_of = vec![Vec::new(); n];
    for (pos, e) in g.edges().iter().enumerate() {
        pos_of[e.u].push((pos, e.v));
        pos_of[e.v].push((pos, e.u));
    }
    let mut out = Vec::new();
    extend(&pos_of, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}

/// The perfect matching polytope: degree equalities, odd-set cut
/// inequalities, nonnegativity.
struct MatchingPolytope {
    matchings: Vec<Vec<usize>>,
    /// Edge positions crossing each odd set with at least three vertices on
    /// both sides.
    odd_cuts: Vec<Vec<usize>>,
}

impl MatchingPolytope {
    fn new(g: &MultiGraph, matchings: Vec<Vec<usize>>) -> Self {
        let n = g.vertex_count();
        let mut odd_cuts = Vec::new();
        // Shores avoid vertex 0; complements give the same cut.
        for bits in 1u64..(1u64 << (n - 1)) {
            let size = bits.count_ones() as usize;
            if size % 2 == 1 && size >= 3 && size + 3 <= n {
                let shore = crate::graph::VertexSet(bits << 1);
                odd_cuts.push(g.edges().iter().enumerate().filter(|(_, e)| e.crosses(shore)).map(|(p, _)| p).collect());
            }
        }
        MatchingPolytope { matchings, odd_cuts }
    }
}

impl FaceOracle for MatchingPolytope {
    fn face_vertex(&self, x: &ScaledPoint) -> Result<Vec<usize>, SamplerError> {
        let tight: Vec<&Vec<usize>> = self.odd_cuts.iter().filter(|cut| x.sum(cut.iter().copied()) == x.den).collect();
        self.matchings
            .iter()
            .find(|m| {
                m.iter().all(|&p| x.num[p] > 0)
                    && tight.iter().all(|cut| m.iter().filter(|p| cut.contains(p)).count() == 1)
            })
            .cloned()
            .ok_or(SamplerError::NoPerfectMatching)
    }

    fn step_limit(&self, x: &ScaledPoint, vertex: &[usize]) -> Option<Frac> {
        self.odd_cuts
            .iter()
            .filter_map(|cut| {
                let hits = vertex.iter().filter(|p| cut.contains(p)).count() as i128;
                // x(cut) >= 1 survives the step while alpha * (hits - 1) <= x(cut) - 1.
                (hits > 1).then(|| Frac::new(x.sum(cut.iter().copied()) - x.den, x.den * (hits - 1)))
            })
            .min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use num_traits::Zero;

    fn marginals(d: &MatchingDistribution, g: &MultiGraph) -> Vec<Rational> {
        let mut mass = vec![Rational::zero(); g.edge_count()];
        for (m, w) in d.support() {
            for id in m {
                mass[id.0] += w;
            }
        }
        mass
    }

    #[test]
    fn four_parallel_edges_split_uniformly() {
        let g = MultiGraph::from_pairs(2, &[(0, 1); 4]);
        let d = MatchingDistribution::quarter_point(&g).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.support().all(|(_, w)| *w == ratio(1, 4)));
    }

    #[test]
    fn octahedron_quarter_point() {
        // K_{2,2,2}: vertex i is opposite i + 3.
        let pairs: Vec<_> = (0..6).flat_map(|u| (u + 1..6).filter(move |&v| v != u + 3).map(move |v| (u, v))).collect();
        let g = MultiGraph::from_pairs(6, &pairs);
        let d = MatchingDistribution::quarter_point(&g).unwrap();
        assert!(marginals(&d, &g).iter().all(|m| *m == ratio(1, 4)));
        let total: Rational = d.support().map(|(_, w)| w.clone()).sum();
        assert_eq!(total, ratio(1, 1));
        assert!(d.len() <= g.edge_count() + 1);
    }

    #[test]
    fn odd_graph_has_no_matching() {
        let pairs: Vec<_> = (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v))).collect();
        let g = MultiGraph::from_pairs(5, &pairs);
        assert_eq!(MatchingDistribution::quarter_point(&g).unwrap_err(), SamplerError::NoPerfectMatching);
    }
}
