//! Maximum-entropy spanning-tree distributions: weights `w` such that the
//! law `P(T) ∝ Π_{e∈T} w_e` has prescribed edge marginals.
//!
//! Edges at value 1 are contracted and edges at value 0 deleted before
//! fitting. A target on a face of the spanning-tree polytope is split along
//! its minimal tight sets into blocks, each of which is fitted in the
//! interior and sampled independently.

use super::decomposition::constrained_trees;
use crate::error::SamplerError;
use crate::graph::{EdgeId, MultiGraph, UnionFind, VertexSet};
use crate::shift::Thirds;
use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

pub const FIT_TOLERANCE: f64 = 1e-6;
pub const MAX_ROUNDS: usize = 10_000;
/// Conditional marginals may stray this far outside `[0, 1]` before a draw
/// is abandoned.
pub const MARGINAL_SLACK: f64 = 1e-9;
/// Blocks with at most this many spanning trees are sampled from an explicit
/// table; larger ones by sequential conditioning.
pub const TABLE_LIMIT: usize = 50_000;

const SUM_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Block {
    vertex_count: usize,
    ends: Vec<(usize, usize)>,
    ids: Vec<EdgeId>,
    targets: Vec<f64>,
    weights: Vec<f64>,
    table: Option<TreeTable>,
}

#[derive(Clone, Debug)]
struct TreeTable {
    trees: Vec<Vec<usize>>,
    probabilities: Vec<f64>,
    index: WeightedIndex<f64>,
}

/// A fitted maximum-entropy distribution over spanning trees.
#[derive(Clone, Debug)]
pub struct MaxEntTree {
    forced: Vec<EdgeId>,
    blocks: Vec<Block>,
    fit_error: f64,
    rounds: usize,
}

impl MaxEntTree {
    /// Fits targets given in thirds, aligned with `g.edges()`.
    pub fn fit_thirds(g: &MultiGraph, values: &[Thirds]) -> Result<Self, SamplerError> {
        let targets: Vec<f64> = values.iter().map(|t| t.0 as f64 / 3.0).collect();
        Self::fit(g, &targets)
    }

    /// Fits targets aligned with `g.edges()`. Targets must lie in the
    /// spanning-tree polytope; exact zeros and ones are handled by deletion
    /// and contraction.
    pub fn fit(g: &MultiGraph, targets: &[f64]) -> Result<Self, SamplerError> {
        let n = g.vertex_count();
        let boundary = |msg: String| SamplerError::BoundaryTarget(msg);
        if targets.iter().any(|&t| !(-SUM_SLACK..=1.0 + SUM_SLACK).contains(&t)) {
            return Err(boundary("target outside [0, 1]".into()));
        }
        let total: f64 = targets.iter().sum();
        if (total - (n as f64 - 1.0)).abs() > SUM_SLACK {
            return Err(boundary(format!("targets sum to {total}, expected {}", n - 1)));
        }

        let mut classes = UnionFind::new(n);
        let mut forced = Vec::new();
        for (e, &t) in g.edges().iter().zip(targets) {
            if t >= 1.0 - SUM_SLACK {
                if !classes.union(e.u, e.v) {
                    return Err(boundary(format!("edges at value one close a cycle at {}", e.id)));
                }
                forced.push(e.id);
            }
        }
        let mut class_index = vec![usize::MAX; n];
        let mut count = 0;
        for v in 0..n {
            let r = classes.find(v);
            if class_index[r] == usize::MAX {
                class_index[r] = count;
                count += 1;
            }
        }
        let mut working: Vec<(usize, usize, usize)> = Vec::new();
        for (pos, (e, &t)) in g.edges().iter().zip(targets).enumerate() {
            if t <= SUM_SLACK || t >= 1.0 - SUM_SLACK {
                continue;
            }
            let (a, b) = (class_index[classes.find(e.u)], class_index[classes.find(e.v)]);
            if a == b {
                return Err(boundary(format!("{} joins vertices already tied by value-one edges", e.id)));
            }
            working.push((a, b, pos));
        }

        let mut blocks = Vec::new();
        let mut vertex_count = count;
        loop {
            let tight = minimal_tight_set(vertex_count, &working, targets)?;
            let members = tight.unwrap_or_else(|| VertexSet::full(vertex_count));
            let local: Vec<usize> = {
                let mut map = vec![usize::MAX; vertex_count];
                for (i, v) in members.iter().enumerate() {
                    map[v] = i;
                }
                map
            };
            let inside: Vec<&(usize, usize, usize)> =
                working.iter().filter(|(a, b, _)| members.contains(*a) && members.contains(*b)).collect();
            if members.len() > 1 {
                blocks.push(Block::new(
                    members.len(),
                    inside.iter().map(|&&(a, b, _)| (local[a], local[b])).collect(),
                    inside.iter().map(|&&(_, _, pos)| g.edges()[pos].id).collect(),
                    inside.iter().map(|&&(_, _, pos)| targets[pos]).collect(),
                ));
            }
            if tight.is_none() {
                break;
            }
            // Contract the block to its smallest member.
            let keep = members.min().expect("nonempty");
            let mut relabel = vec![0; vertex_count];
            let mut next = 0;
            for v in 0..vertex_count {
                if !members.contains(v) || v == keep {
                    relabel[v] = next;
                    next += 1;
                }
            }
            for v in members.iter() {
                relabel[v] = relabel[keep];
            }
            working = working
                .into_iter()
                .filter(|(a, b, _)| !(members.contains(*a) && members.contains(*b)))
                .map(|(a, b, pos)| (relabel[a], relabel[b], pos))
                .collect();
            vertex_count = next;
        }

        let mut fit_error: f64 = 0.0;
        let mut rounds = 0;
        for block in &mut blocks {
            let (error, used) = block.fit()?;
            fit_error = fit_error.max(error);
            rounds = rounds.max(used);
            block.build_table();
        }
        forced.sort_unstable();
        Ok(MaxEntTree { forced, blocks, fit_error, rounds })
    }

    /// Largest relative deviation of the fitted marginals from the targets.
    pub fn fit_error(&self) -> f64 {
        self.fit_error
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn forced(&self) -> &[EdgeId] {
        &self.forced
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Fitted weights of the fractional edges.
    pub fn weights(&self) -> Vec<(EdgeId, f64)> {
        let mut out: Vec<(EdgeId, f64)> =
            self.blocks.iter().flat_map(|b| b.ids.iter().copied().zip(b.weights.iter().copied())).collect();
        out.sort_unstable_by_key(|&(id, _)| id);
        out
    }

    /// Edge marginals of the fitted law; value-one edges report 1.
    pub fn marginals(&self) -> Result<Vec<(EdgeId, f64)>, SamplerError> {
        let mut out: Vec<(EdgeId, f64)> = self.forced.iter().map(|&id| (id, 1.0)).collect();
        for block in &self.blocks {
            let q = block.marginals(&block.weights)?;
            out.extend(block.ids.iter().copied().zip(q));
        }
        out.sort_unstable_by_key(|&(id, _)| id);
        Ok(out)
    }

    /// Draws a tree, using tables where available.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<EdgeId>, SamplerError> {
        let mut tree = self.forced.clone();
        for block in &self.blocks {
            match &block.table {
                Some(table) => tree.extend(table.trees[table.index.sample(rng)].iter().map(|&p| block.ids[p])),
                None => tree.extend(block.sample_sequential(rng)?),
            }
        }
        tree.sort_unstable();
        Ok(tree)
    }

    /// Draws a tree edge by edge, each included with its conditional marginal.
    pub fn sample_sequential<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<EdgeId>, SamplerError> {
        let mut tree = self.forced.clone();
        for block in &self.blocks {
            tree.extend(block.sample_sequential(rng)?);
        }
        tree.sort_unstable();
        Ok(tree)
    }

    /// Every tree in the support with its probability. Exponential in the
    /// number of blocks' trees; meant for small exact checks.
    pub fn support(&self) -> Vec<(Vec<EdgeId>, f64)> {
        let mut out = vec![(self.forced.clone(), 1.0)];
        for block in &self.blocks {
            let (trees, probabilities) = block.enumerate();
            out = out
                .into_iter()
                .flat_map(|(base, p)| {
                    trees.iter().zip(&probabilities).map(move |(tree, q)| {
                        let mut t = base.clone();
                        t.extend(tree.iter().map(|&pos| block.ids[pos]));
                        (t, p * q)
                    })
                })
                .collect();
        }
        for (t, _) in &mut out {
            t.sort_unstable();
        }
        out
    }
}

/// An inclusion-minimal vertex set `S` with `2 <= |S| < n` whose inside
/// targets sum to `|S| - 1`; smallest size first, then lowest bitmask.
fn minimal_tight_set(
    n: usize,
    edges: &[(usize, usize, usize)],
    targets: &[f64],
) -> Result<Option<VertexSet>, SamplerError> {
    if n > 24 {
        return Err(SamplerError::BoundaryTarget(format!("{n} vertices exceed the tight-set search")));
    }
    let mut best: Option<(usize, u64)> = None;
    for bits in 1u64..(1u64 << n) {
        let size = bits.count_ones() as usize;
        if size < 2 || size >= n {
            continue;
        }
        let inside: f64 =
            edges.iter().filter(|(a, b, _)| bits >> a & 1 == 1 && bits >> b & 1 == 1).map(|&(_, _, p)| targets[p]).sum();
        let rank = (size - 1) as f64;
        if inside > rank + SUM_SLACK {
            return Err(SamplerError::BoundaryTarget(format!("set {:?} carries {inside} > {rank}", VertexSet(bits))));
        }
        if inside >= rank - SUM_SLACK && best.is_none_or(|(s, _)| size < s) {
            best = Some((size, bits));
        }
    }
    Ok(best.map(|(_, bits)| VertexSet(bits)))
}

impl Block {
    fn new(vertex_count: usize, ends: Vec<(usize, usize)>, ids: Vec<EdgeId>, targets: Vec<f64>) -> Self {
        let weights = targets.clone();
        Block { vertex_count, ends, ids, targets, weights, table: None }
    }

    /// Multiplicative updates `w <- w * target / marginal` until every
    /// marginal is within the relative tolerance.
    fn fit(&mut self) -> Result<(f64, usize), SamplerError> {
        let mut error = f64::INFINITY;
        for round in 0..MAX_ROUNDS {
            let q = self.marginals(&self.weights)?;
            error = q.iter().zip(&self.targets).map(|(q, t)| (q / t - 1.0).abs()).fold(0.0, f64::max);
            if error <= FIT_TOLERANCE {
                return Ok((error, round));
            }
            for ((w, t), q) in self.weights.iter_mut().zip(&self.targets).zip(&q) {
                *w *= t / q;
            }
            let log_mean = self.weights.iter().map(|w| w.ln()).sum::<f64>() / self.weights.len() as f64;
            let scale = (-log_mean).exp();
            self.weights.iter_mut().for_each(|w| *w *= scale);
        }
        Err(SamplerError::NonConvergence { rounds: MAX_ROUNDS, error })
    }

    /// Marginals `w_e * R_eff(e)` under the given weights.
    fn marginals(&self, weights: &[f64]) -> Result<Vec<f64>, SamplerError> {
        let alive: Vec<(usize, usize, f64)> =
            self.ends.iter().zip(weights).map(|(&(a, b), &w)| (a, b, w)).collect();
        let inverse = reduced_inverse(self.vertex_count, &alive)?;
        Ok(alive.iter().map(|&(a, b, w)| w * resistance(&inverse, a, b)).collect())
    }

    fn enumerate(&self) -> (Vec<Vec<usize>>, Vec<f64>) {
        if let Some(table) = &self.table {
            return (table.trees.clone(), table.probabilities.clone());
        }
        let g = self.as_graph();
        let trees = constrained_trees(&g, &[], &vec![true; self.ends.len()]);
        let raw: Vec<f64> = trees.iter().map(|t| t.iter().map(|&p| self.weights[p]).product()).collect();
        let total: f64 = raw.iter().sum();
        (trees, raw.into_iter().map(|p| p / total).collect())
    }

    fn as_graph(&self) -> MultiGraph {
        MultiGraph::from_pairs(self.vertex_count, &self.ends)
    }

    fn build_table(&mut self) {
        if spanning_tree_count(self.vertex_count, &self.ends) > TABLE_LIMIT as f64 {
            return;
        }
        let (trees, probabilities) = self.enumerate();
        let index = WeightedIndex::new(&probabilities).expect("positive tree weights");
        self.table = Some(TreeTable { trees, probabilities, index });
    }

    fn sample_sequential<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<EdgeId>, SamplerError> {
        let mut merged = UnionFind::new(self.vertex_count);
        let mut deleted = vec![false; self.ends.len()];
        let mut chosen = Vec::new();
        for pos in 0..self.ends.len() {
            let (a, b) = self.ends[pos];
            if merged.find(a) == merged.find(b) {
                deleted[pos] = true;
                continue;
            }
            let q = self.conditional_marginal(pos, &mut merged, &deleted)?;
            if !(-MARGINAL_SLACK..=1.0 + MARGINAL_SLACK).contains(&q) {
                return Err(SamplerError::NumericalBreakdown { edge: self.ids[pos], value: q });
            }
            if rng.gen::<f64>() < q {
                merged.union(a, b);
                chosen.push(self.ids[pos]);
            } else {
                deleted[pos] = true;
            }
        }
        Ok(chosen)
    }

    /// Marginal of edge `pos` with chosen edges contracted and rejected ones
    /// deleted.
    fn conditional_marginal(&self, pos: usize, merged: &mut UnionFind, deleted: &[bool]) -> Result<f64, SamplerError> {
        let mut class = vec![usize::MAX; self.vertex_count];
        let mut count = 0;
        for v in 0..self.vertex_count {
            let r = merged.find(v);
            if class[r] == usize::MAX {
                class[r] = count;
                count += 1;
            }
        }
        let alive: Vec<(usize, usize, f64)> = (0..self.ends.len())
            .filter(|&p| !deleted[p])
            .filter_map(|p| {
                let (a, b) = (class[merged.find(self.ends[p].0)], class[merged.find(self.ends[p].1)]);
                (a != b).then_some((a, b, self.weights[p]))
            })
            .collect();
        let inverse = reduced_inverse(count, &alive)?;
        let (a, b) = (class[merged.find(self.ends[pos].0)], class[merged.find(self.ends[pos].1)]);
        Ok(self.weights[pos] * resistance(&inverse, a, b))
    }
}

/// Inverse of the weighted Laplacian with the row and column of vertex 0
/// removed.
fn reduced_inverse(n: usize, edges: &[(usize, usize, f64)]) -> Result<DMatrix<f64>, SamplerError> {
    let mut laplacian = DMatrix::<f64>::zeros(n, n);
    for &(a, b, w) in edges {
        laplacian[(a, a)] += w;
        laplacian[(b, b)] += w;
        laplacian[(a, b)] -= w;
        laplacian[(b, a)] -= w;
    }
    let reduced = laplacian.remove_row(0).remove_column(0);
    reduced.lu().try_inverse().ok_or(SamplerError::NumericalBreakdown { edge: EdgeId(usize::MAX), value: f64::NAN })
}

/// Effective resistance between `a` and `b` from the reduced inverse.
fn resistance(inverse: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let entry = |i: usize, j: usize| if i == 0 || j == 0 { 0.0 } else { inverse[(i - 1, j - 1)] };
    entry(a, a) + entry(b, b) - 2.0 * entry(a, b)
}

/// Number of spanning trees by the matrix-tree theorem.
pub fn spanning_tree_count(n: usize, ends: &[(usize, usize)]) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let mut laplacian = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in ends {
        laplacian[(a, a)] += 1.0;
        laplacian[(b, b)] += 1.0;
        laplacian[(a, b)] -= 1.0;
        laplacian[(b, a)] -= 1.0;
    }
    laplacian.remove_row(0).remove_column(0).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cycle(n: usize) -> MultiGraph {
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        MultiGraph::from_pairs(n, &pairs)
    }

    #[test]
    fn cycle_targets_give_constant_weights() {
        let g = cycle(4);
        let fit = MaxEntTree::fit(&g, &[0.75; 4]).unwrap();
        let w = fit.weights();
        assert!(w.iter().all(|(_, x)| (x - w[0].1).abs() < 1e-9));
        for (_, q) in fit.marginals().unwrap() {
            assert!((q - 0.75).abs() < 1e-9);
        }
        let support = fit.support();
        assert_eq!(support.len(), 4);
        assert!(support.iter().all(|(_, p)| (p - 0.25).abs() < 1e-9));
    }

    #[test]
    fn uneven_targets_are_matched() {
        // K4 with a heavier perfect matching.
        let g = MultiGraph::from_pairs(4, &[(0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)]);
        let targets = [0.7, 0.7, 0.4, 0.4, 0.4, 0.4];
        let fit = MaxEntTree::fit(&g, &targets).unwrap();
        assert!(fit.fit_error() <= FIT_TOLERANCE);
        let mut mass = [0.0; 6];
        for (tree, p) in fit.support() {
            tree.iter().for_each(|id| mass[id.0] += p);
        }
        for (m, t) in mass.iter().zip(targets) {
            assert!((m - t).abs() < 1e-5, "{m} vs {t}");
        }
    }

    #[test]
    fn tight_sets_split_into_blocks() {
        // Two triangles sharing vertex 2, each carrying two full units.
        let g = MultiGraph::from_pairs(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]);
        let thirds = [Thirds(2); 6];
        let fit = MaxEntTree::fit_thirds(&g, &thirds).unwrap();
        assert_eq!(fit.block_count(), 2);
        assert_eq!(fit.support().len(), 9);
    }

    #[test]
    fn forced_edges_appear_in_every_tree() {
        let g = MultiGraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let thirds = [Thirds(3), Thirds(2), Thirds(2), Thirds(2), Thirds(0)];
        let fit = MaxEntTree::fit_thirds(&g, &thirds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = fit.sample(&mut rng).unwrap();
            assert!(t.contains(&EdgeId(0)) && !t.contains(&EdgeId(4)));
            let s = fit.sample_sequential(&mut rng).unwrap();
            assert_eq!(s.len(), 3);
        }
    }

    #[test]
    fn infeasible_targets_are_rejected() {
        let g = cycle(4);
        assert!(matches!(MaxEntTree::fit(&g, &[0.5; 4]), Err(SamplerError::BoundaryTarget(_))));
        let g = MultiGraph::from_pairs(3, &[(0, 1), (0, 1), (1, 2)]);
        assert!(matches!(MaxEntTree::fit(&g, &[0.9, 0.9, 0.2]), Err(SamplerError::BoundaryTarget(_))));
    }

    #[test]
    fn matrix_tree_counts() {
        let k4: Vec<_> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v))).collect();
        assert!((spanning_tree_count(4, &k4) - 16.0).abs() < 1e-9);
    }
}
