use htsp::graph::VertexSet;
use htsp::harness::generate::{generate, Family};
use htsp::hierarchy::{build_cactus, build_hierarchy, enumerate_min_cuts, min_cuts_via_hierarchy, NodeKind};
use htsp::instance::{Instance, ParseMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sorted(mut cuts: Vec<VertexSet>, n: usize) -> Vec<VertexSet> {
    cuts.iter_mut().for_each(|c| *c = c.canonical(n));
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

/// Every shore of size two up to `n - 2` with cut value four, by listing all
/// subsets: independent of the enumeration used by the library.
fn tight_sets(instance: &Instance) -> Vec<VertexSet> {
    let g = instance.graph();
    let n = g.vertex_count();
    let cuts = (1u64..(1 << n))
        .map(VertexSet)
        .filter(|s| !s.contains(0) && s.len() >= 2 && s.len() <= n - 2 && g.cut_value(*s) == 4)
        .collect();
    sorted(cuts, n)
}

fn check_structure(instance: &Instance) {
    let n = instance.vertex_count();
    let h = build_hierarchy(instance).unwrap();
    let brute = sorted(enumerate_min_cuts(instance.graph()).unwrap().into_iter().map(|c| c.shore).collect(), n);
    let listed = sorted(min_cuts_via_hierarchy(&h), n);
    assert_eq!(listed, brute);
    assert_eq!(build_cactus(&h).pulled_back_cuts(n), listed);
    let proper: Vec<VertexSet> = listed.iter().copied().filter(|s| s.len() >= 2 && s.len() <= n - 2).collect();
    assert_eq!(proper, tight_sets(instance));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_instances_match_brute_force(n in 8usize..=14, seed in any::<u64>()) {
        let instance = generate(&Family::Random4Reg(n), true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(instance.graph().is_k_edge_connected(4));
        check_structure(&instance);
    }

    #[test]
    fn double_cycles_list_every_segment(k in 3usize..=12) {
        let instance = generate(&Family::DoubleCycle(k), true, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        check_structure(&instance);
        // A double cycle on k vertices has k(k-3)/2 proper min cuts.
        let proper = tight_sets(&instance).len();
        prop_assert_eq!(proper, k * (k - 3) / 2);
    }

    #[test]
    fn serialization_round_trips(n in 8usize..=16, seed in any::<u64>()) {
        let instance = generate(&Family::Random4Reg(n), false, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let text = instance.serialize();
        let back = Instance::parse(&text, ParseMode::Strict).unwrap();
        prop_assert_eq!(back.serialize(), text);
    }
}

#[test]
fn gadget_families_match_brute_force() {
    for family in [Family::K5Gadget(1), Family::K5Gadget(2), Family::Nested(1), Family::Nested(2), Family::ChainInDegree] {
        let instance = generate(&family, false, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        if instance.vertex_count() <= 16 {
            check_structure(&instance);
        } else {
            let n = instance.vertex_count();
            let h = build_hierarchy(&instance).unwrap();
            let brute = sorted(enumerate_min_cuts(instance.graph()).unwrap().into_iter().map(|c| c.shore).collect(), n);
            assert_eq!(sorted(min_cuts_via_hierarchy(&h), n), brute, "{}", family.name());
        }
    }
}

#[test]
fn generated_instances_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let six = generate(&Family::DoubleCycle(6), false, &mut rng).unwrap();
    assert!(Instance::parse(&six.serialize(), ParseMode::Strict).is_ok());

    let nested = generate(&Family::Nested(2), false, &mut rng).unwrap();
    let internal = build_hierarchy(&nested).unwrap().internal_nodes().count();
    assert!(internal >= 2, "nested-2 has {internal} internal nodes");

    let random = generate(&Family::Random4Reg(12), false, &mut rng).unwrap();
    assert_eq!(random.vertex_count(), 12);
    assert!(random.graph().is_k_edge_connected(4));
    assert!(!random.graph().is_k_edge_connected(5));
}

#[test]
fn hierarchy_roots_are_cycles_and_k4_blocks_become_k5_nodes() {
    let instance = generate(&Family::K5Gadget(2), true, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let h = build_hierarchy(&instance).unwrap();
    assert_eq!(h.node(h.root()).kind, NodeKind::Cycle);
    let k5 = h.internal_nodes().filter(|node| node.kind == NodeKind::Degree).count();
    assert_eq!(k5, 2);
}

#[test]
fn bad_family_parameters_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(generate(&Family::DoubleCycle(2), true, &mut rng).is_err());
    assert!(generate(&Family::Nested(4), true, &mut rng).is_err());
    assert!(generate(&Family::Random4Reg(30), true, &mut rng).is_err());
    assert!(Family::parse("triangle").is_err());
    assert_eq!(Family::parse("nested:1").unwrap(), Family::Nested(1));
}
