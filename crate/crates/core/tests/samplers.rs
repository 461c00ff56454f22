use htsp::graph::{is_spanning_tree, EdgeId, MultiGraph};
use htsp::harness::correlations::{circulant_piece, complete_bipartite_piece};
use htsp::harness::oracle::polytope_violation;
use htsp::shift::matching::{perfect_matchings, MatchingDistribution};
use htsp::shift::{ShiftModel, Thirds};
use htsp::trees::decomposition::in_spanning_tree_polytope;
use htsp::trees::maxent::MaxEntTree;
use htsp::trees::piece::{interior_graph, DegreePieceSampler, SamplerKind};
use htsp::rational::{ratio, Rational};
use num_traits::Zero;
use proptest::prelude::*;
use std::collections::BTreeMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pieces() -> Vec<htsp::hierarchy::LocalPiece> {
    vec![circulant_piece(7), circulant_piece(8), circulant_piece(9), complete_bipartite_piece()]
}

#[test]
fn quarter_point_decompositions_are_exact() {
    for piece in pieces() {
        let model = ShiftModel::new(&piece).unwrap();
        let pairings = if model.is_odd() { 3 } else { 1 };
        for pairing in 0..pairings {
            let dist = model.matching_distribution(pairing);
            let mut mass: BTreeMap<EdgeId, Rational> = BTreeMap::new();
            let mut total = Rational::zero();
            for (matching, w) in dist.support() {
                total += w;
                for id in matching {
                    *mass.entry(*id).or_default() += w;
                }
            }
            assert_eq!(total, ratio(1, 1));
            assert!(mass.values().all(|m| *m == ratio(1, 4)));
            assert!(piece.internal.iter().all(|id| mass.contains_key(id)));
        }
    }
}

#[test]
fn perfect_matchings_of_k44_number_four_factorial() {
    let pairs: Vec<_> = (0..4).flat_map(|i| (0..4).map(move |j| (2 * i, 2 * j + 1))).collect();
    let k44 = MultiGraph::from_pairs(8, &pairs);
    assert_eq!(perfect_matchings(&k44).len(), 24);
    let dist = MatchingDistribution::quarter_point(&k44).unwrap();
    let total: Rational = dist.support().map(|(_, w)| w.clone()).sum();
    assert_eq!(total, ratio(1, 1));
}

#[test]
fn exhaustive_and_rank_polytope_checks_agree_on_every_branch() {
    for piece in pieces() {
        let model = ShiftModel::new(&piece).unwrap();
        let interior = interior_graph(&piece);
        for (shift, _) in model.branches().unwrap() {
            let values: Vec<Thirds> = shift.y.iter().map(|(_, t)| *t).collect();
            assert_eq!(polytope_violation(&model, &shift.y, &[]), None);
            assert!(in_spanning_tree_polytope(&interior, &values));
            assert_eq!(polytope_violation(&model, &shift.y, &shift.parts), None);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Moving thirds between edges keeps the total; both membership tests
    /// must then agree on whether the point stays inside.
    #[test]
    fn membership_tests_agree_on_perturbed_points(which in 0usize..4, moves in prop::collection::vec((0usize..64, 0usize..64), 1..4), branch in 0usize..10_000) {
        let piece = pieces().swap_remove(which);
        let model = ShiftModel::new(&piece).unwrap();
        let branches = model.branches().unwrap();
        let mut y = branches[branch % branches.len()].0.y.clone();
        let k = y.len();
        for (from, to) in moves {
            let (from, to) = (from % k, to % k);
            if y[from].1 .0 > 0 && y[to].1 .0 < 3 {
                y[from].1 .0 -= 1;
                y[to].1 .0 += 1;
            }
        }
        let values: Vec<Thirds> = y.iter().map(|(_, t)| *t).collect();
        let exhaustive = polytope_violation(&model, &y, &[]).is_none();
        prop_assert_eq!(exhaustive, in_spanning_tree_polytope(&interior_graph(&piece), &values));
    }
}

#[test]
fn tree_laws_are_normalised_and_supported_on_spanning_trees() {
    for piece in pieces() {
        let sampler = DegreePieceSampler::new(&piece).unwrap();
        let interior = sampler.interior();
        let ends = |tree: &[EdgeId]| -> Vec<(usize, usize)> {
            tree.iter().map(|id| { let e = interior.find(*id).unwrap(); (e.u, e.v) }).collect()
        };
        for kind in [SamplerKind::MatroidIntersection, SamplerKind::MaxEntropy] {
            let law = sampler.tree_law(kind).unwrap();
            let total: f64 = law.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-9);
            for (tree, _) in &law {
                assert!(is_spanning_tree(interior.vertex_count(), ends(tree)));
            }
        }
        for (_, m) in sampler.exact_marginals().unwrap() {
            assert_eq!(m, ratio(1, 2));
        }
    }
}

#[test]
fn maxent_fit_reproduces_its_targets() {
    let interior = interior_graph(&circulant_piece(8));
    let m = interior.edge_count();
    let n = interior.vertex_count();
    let targets = vec![(n - 1) as f64 / m as f64; m];
    let fit = MaxEntTree::fit(&interior, &targets).unwrap();
    for (id, p) in fit.marginals().unwrap() {
        let i = interior.edges().iter().position(|e| e.id == id).unwrap();
        assert!((p - targets[i]).abs() < 1e-6);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tree = fit.sample(&mut rng).unwrap();
    let ends: Vec<(usize, usize)> = tree.iter().map(|id| { let e = interior.find(*id).unwrap(); (e.u, e.v) }).collect();
    assert!(is_spanning_tree(n, ends));
}
