//! Exact decomposition of a point of the spanning-tree polytope, optionally
//! intersected with capacity-one parts, into spanning trees.

use super::matroid::Intersection;
use crate::convex::{decompose, FaceOracle, Frac, ScaledPoint};
use crate::error::SamplerError;
use crate::graph::{EdgeId, MultiGraph, UnionFind};
use crate::rational::{to_f64, Rational};
use crate::shift::Thirds;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Largest interior handled by the subset enumeration behind the polytope
/// description.
pub const MAX_INTERIOR: usize = 20;

/// A point `values / 3` on the edges of `graph` with capacity-one `parts`
/// given as edge positions.
pub struct TreeTarget<'a> {
    pub graph: &'a MultiGraph,
    pub values: &'a [Thirds],
    pub parts: &'a [Vec<usize>],
}

impl TreeTarget<'_> {
    fn point(&self) -> ScaledPoint {
        ScaledPoint::new(self.values.iter().map(|t| t.0 as i128).collect(), 3)
    }

    fn ends(&self) -> Vec<(usize, usize)> {
        self.graph.edges().iter().map(|e| (e.u, e.v)).collect()
    }
}

/// Rank inequalities `x(E(S)) <= |S| - 1`, one per vertex set with at least
/// one inside edge, as edge-position bitmasks.
struct RankSystem {
    sets: Vec<(u64, i128)>,
    everything: u64,
    rank: i128,
}

impl RankSystem {
    fn new(g: &MultiGraph) -> Result<Self, SamplerError> {
        let n = g.vertex_count();
        if n > MAX_INTERIOR || g.edge_count() > 64 {
            return Err(SamplerError::InfeasibleShift(format!("interior of {n} vertices is too large")));
        }
        let mut sets = Vec::new();
        for bits in 1u64..(1u64 << n) {
            if bits.count_ones() < 2 {
                continue;
            }
            let mask = g
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, e)| bits >> e.u & 1 == 1 && bits >> e.v & 1 == 1)
                .fold(0u64, |m, (p, _)| m | 1 << p);
            if mask != 0 {
                sets.push((mask, bits.count_ones() as i128 - 1));
            }
        }
        let everything = if g.edge_count() == 64 { u64::MAX } else { (1u64 << g.edge_count()) - 1 };
        Ok(RankSystem { sets, everything, rank: n as i128 - 1 })
    }

    fn mass(x: &ScaledPoint, mask: u64) -> i128 {
        bits(mask).map(|p| x.num[p]).sum()
    }

    /// Checks membership of `x` in the polytope intersected with `parts`.
    fn check(&self, x: &ScaledPoint, parts: &[Vec<usize>]) -> Result<(), SamplerError> {
        if x.num.iter().any(|&v| v < 0) {
            return Err(SamplerError::InfeasibleShift("negative coordinate".into()));
        }
        if Self::mass(x, self.everything) != self.rank * x.den {
            return Err(SamplerError::InfeasibleShift("total differs from |V| - 1".into()));
        }
        if let Some((mask, _)) = self.sets.iter().find(|&&(mask, rank)| Self::mass(x, mask) > rank * x.den) {
            return Err(SamplerError::InfeasibleShift(format!("rank inequality violated on edges {mask:#x}")));
        }
        if parts.iter().any(|p| x.sum(p.iter().copied()) > x.den) {
            return Err(SamplerError::InfeasibleShift("part exceeds one".into()));
        }
        Ok(())
    }
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    crate::graph::VertexSet(mask).iter()
}

/// Face vertices found by weighted matroid intersection: weighting each edge
/// by the number of tight constraints containing it makes the maximum-weight
/// common base exactly the trees tight wherever `x` is.
struct IntersectionFace<'a> {
    target: &'a TreeTarget<'a>,
    system: RankSystem,
    ends: Vec<(usize, usize)>,
    part_of: Vec<Option<usize>>,
}

impl FaceOracle for IntersectionFace<'_> {
    fn face_vertex(&self, x: &ScaledPoint) -> Result<Vec<usize>, SamplerError> {
        let m = self.ends.len();
        let mut weight = vec![0i64; m];
        let mut bound = 0i64;
        for &(mask, rank) in &self.system.sets {
            if RankSystem::mass(x, mask) == rank * x.den {
                bits(mask).for_each(|p| weight[p] += 1);
                bound += rank as i64;
            }
        }
        for part in self.target.parts {
            if x.sum(part.iter().copied()) == x.den {
                part.iter().for_each(|&p| weight[p] += 1);
                bound += 1;
            }
        }
        let allowed: Vec<bool> = x.num.iter().map(|&v| v > 0).collect();
        let problem = Intersection { vertex_count: self.target.graph.vertex_count(), ends: &self.ends, part_of: &self.part_of };
        let tree = problem
            .max_weight_of_size(&allowed, &weight, self.system.rank as usize)
            .ok_or_else(|| SamplerError::InfeasibleShift("no common base in the support".into()))?;
        let achieved: i64 = tree.iter().map(|&p| weight[p]).sum();
        if achieved != bound {
            return Err(SamplerError::InfeasibleShift("minimal face has no tree".into()));
        }
        Ok(tree)
    }

    fn step_limit(&self, x: &ScaledPoint, vertex: &[usize]) -> Option<Frac> {
        step_limit(&self.system, self.target.parts, x, vertex)
    }
}

fn step_limit(system: &RankSystem, parts: &[Vec<usize>], x: &ScaledPoint, vertex: &[usize]) -> Option<Frac> {
    let tree_mask = vertex.iter().fold(0u64, |m, &p| m | 1 << p);
    let sets = system.sets.iter().filter_map(|&(mask, rank)| {
        let used = (mask & tree_mask).count_ones() as i128;
        (used < rank).then(|| Frac::new(rank * x.den - RankSystem::mass(x, mask), x.den * (rank - used)))
    });
    let caps = parts.iter().filter_map(|part| {
        let used = part.iter().filter(|p| vertex.contains(p)).count();
        (used == 0).then(|| Frac::new(x.den - x.sum(part.iter().copied()), x.den))
    });
    sets.chain(caps).min()
}

/// Face vertices found by scanning an explicit list of constrained trees.
/// Exponential; kept as an independent check of the intersection path.
struct ListedFace<'a> {
    target: &'a TreeTarget<'a>,
    system: RankSystem,
    trees: Vec<Vec<usize>>,
}

impl FaceOracle for ListedFace<'_> {
    fn face_vertex(&self, x: &ScaledPoint) -> Result<Vec<usize>, SamplerError> {
        let tight_sets: Vec<(u64, i128)> =
            self.system.sets.iter().copied().filter(|&(mask, rank)| RankSystem::mass(x, mask) == rank * x.den).collect();
        let tight_parts: Vec<&Vec<usize>> =
            self.target.parts.iter().filter(|p| x.sum(p.iter().copied()) == x.den).collect();
        self.trees
            .iter()
            .find(|tree| {
                let mask = tree.iter().fold(0u64, |m, &p| m | 1 << p);
                tree.iter().all(|&p| x.num[p] > 0)
                    && tight_sets.iter().all(|&(set, rank)| (set & mask).count_ones() as i128 == rank)
                    && tight_parts.iter().all(|part| part.iter().any(|p| tree.contains(p)))
            })
            .cloned()
            .ok_or_else(|| SamplerError::InfeasibleShift("minimal face has no listed tree".into()))
    }

    fn step_limit(&self, x: &ScaledPoint, vertex: &[usize]) -> Option<Frac> {
        step_limit(&self.system, self.target.parts, x, vertex)
    }
}

/// Every spanning tree that uses at most one edge of each part, as sorted
/// edge positions.
pub fn constrained_trees(g: &MultiGraph, parts: &[Vec<usize>], allowed: &[bool]) -> Vec<Vec<usize>> {
    fn grow(
        g: &MultiGraph,
        part_of: &[Option<usize>],
        allowed: &[bool],
        next: usize,
        chosen: &mut Vec<usize>,
        part_used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let need = g.vertex_count() - 1;
        if chosen.len() == need {
            out.push(chosen.clone());
            return;
        }
        if g.edge_count() - next < need - chosen.len() {
            return;
        }
        let e = &g.edges()[next];
        let free_part = part_of[next].is_none_or(|p| !part_used[p]);
        if allowed[next] && free_part {
            let mut uf = UnionFind::new(g.vertex_count());
            let acyclic = chosen.iter().all(|&p| uf.union(g.edges()[p].u, g.edges()[p].v)) && uf.union(e.u, e.v);
            if acyclic {
                chosen.push(next);
                if let Some(p) = part_of[next] {
                    part_used[p] = true;
                }
                grow(g, part_of, allowed, next + 1, chosen, part_used, out);
                if let Some(p) = part_of[next] {
                    part_used[p] = false;
                }
                chosen.pop();
            }
        }
        grow(g, part_of, allowed, next + 1, chosen, part_used, out);
    }
    let part_of = part_index(g.edge_count(), parts);
    let mut out = Vec::new();
    grow(g, &part_of, allowed, 0, &mut Vec::new(), &mut vec![false; parts.len()], &mut out);
    out
}

fn part_index(m: usize, parts: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut part_of = vec![None; m];
    for (i, part) in parts.iter().enumerate() {
        for &p in part {
            part_of[p] = Some(i);
        }
    }
    part_of
}

/// A finite distribution over spanning trees with exact weights.
#[derive(Clone, Debug)]
pub struct TreeDistribution {
    trees: Vec<Vec<EdgeId>>,
    weights: Vec<Rational>,
    index: WeightedIndex<f64>,
}

impl TreeDistribution {
    fn from_parts(g: &MultiGraph, parts: Vec<(Vec<usize>, Rational)>) -> Self {
        let (trees, weights): (Vec<_>, Vec<_>) = parts
            .into_iter()
            .map(|(positions, w)| (positions.into_iter().map(|p| g.edges()[p].id).collect::<Vec<_>>(), w))
            .unzip();
        let index = WeightedIndex::new(weights.iter().map(to_f64)).expect("positive weights");
        TreeDistribution { trees, weights, index }
    }

    pub fn support(&self) -> impl Iterator<Item = (&[EdgeId], &Rational)> + '_ {
        self.trees.iter().map(Vec::as_slice).zip(&self.weights)
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[EdgeId] {
        &self.trees[self.index.sample(rng)]
    }
}

/// Decomposes the target into spanning trees respecting its parts, finding
/// face vertices by matroid intersection.
pub fn decompose_target(target: &TreeTarget) -> Result<TreeDistribution, SamplerError> {
    let system = RankSystem::new(target.graph)?;
    let x = target.point();
    system.check(&x, target.parts)?;
    let face = IntersectionFace {
        target,
        system,
        ends: target.ends(),
        part_of: part_index(target.graph.edge_count(), target.parts),
    };
    Ok(TreeDistribution::from_parts(target.graph, decompose(&face, x)?))
}

/// Same decomposition, with face vertices taken from the explicit list of
/// constrained trees.
pub fn decompose_target_by_listing(target: &TreeTarget) -> Result<TreeDistribution, SamplerError> {
    let system = RankSystem::new(target.graph)?;
    let x = target.point();
    system.check(&x, target.parts)?;
    let allowed: Vec<bool> = target.values.iter().map(|t| t.0 > 0).collect();
    let trees = constrained_trees(target.graph, target.parts, &allowed);
    let face = ListedFace { target, system, trees };
    Ok(TreeDistribution::from_parts(target.graph, decompose(&face, x)?))
}

/// Whether `values / 3` lies in the spanning-tree polytope of `g`.
pub fn in_spanning_tree_polytope(g: &MultiGraph, values: &[Thirds]) -> bool {
    let target = TreeTarget { graph: g, values, parts: &[] };
    RankSystem::new(g).and_then(|system| system.check(&target.point(), &[])).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use num_traits::Zero;

    fn marginals(d: &TreeDistribution, g: &MultiGraph) -> Vec<Rational> {
        let mut mass = vec![Rational::zero(); g.edge_count()];
        for (tree, w) in d.support() {
            for id in tree {
                mass[id.0] += w;
            }
        }
        mass
    }

    #[test]
    fn two_thirds_on_a_triangle() {
        let g = MultiGraph::from_pairs(3, &[(0, 1), (1, 2), (0, 2)]);
        let values = [Thirds(2); 3];
        let target = TreeTarget { graph: &g, values: &values, parts: &[] };
        let d = decompose_target(&target).unwrap();
        assert_eq!(d.len(), 3);
        assert!(marginals(&d, &g).iter().all(|m| *m == ratio(2, 3)));
    }

    #[test]
    fn parts_are_respected() {
        // K4 with the outer cycle at 2/3 except one edge, which shares a part
        // with a diagonal.
        let g = MultiGraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]);
        let values = [Thirds(2), Thirds(2), Thirds(2), Thirds(1), Thirds(1), Thirds(1)];
        let parts = vec![vec![3, 4]];
        let target = TreeTarget { graph: &g, values: &values, parts: &parts };
        let d = decompose_target(&target).unwrap();
        for (tree, _) in d.support() {
            assert!(!(tree.contains(&EdgeId(3)) && tree.contains(&EdgeId(4))));
        }
        let expect: Vec<_> = values.iter().map(|t| t.to_rational()).collect();
        assert_eq!(marginals(&d, &g), expect);
        let listed = decompose_target_by_listing(&target).unwrap();
        assert_eq!(marginals(&listed, &g), expect);
    }

    #[test]
    fn infeasible_points_are_rejected() {
        let g = MultiGraph::from_pairs(3, &[(0, 1), (0, 1), (1, 2)]);
        let values = [Thirds(2), Thirds(2), Thirds(2)];
        let target = TreeTarget { graph: &g, values: &values, parts: &[] };
        assert!(matches!(decompose_target(&target), Err(SamplerError::InfeasibleShift(_))));
    }
}
