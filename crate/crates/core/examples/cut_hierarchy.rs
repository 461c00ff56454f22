//! Builds the cut hierarchy of a nested instance and checks that it lists
//! exactly the minimum cuts found by brute force.

use htsp::harness::generate::{generate, Family};
use htsp::hierarchy::{build_hierarchy, enumerate_min_cuts, min_cuts_via_hierarchy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = generate(&Family::Nested(1), true, &mut ChaCha8Rng::seed_from_u64(1))?;
    let h = build_hierarchy(&instance)?;
    for node in h.internal_nodes() {
        println!("node {:>2} {:?} children {:?} label {:?}", node.id, node.kind, node.children, node.label.to_vec());
    }
    let n = instance.vertex_count();
    let mut brute: Vec<_> = enumerate_min_cuts(instance.graph())?.into_iter().map(|c| c.shore.canonical(n)).collect();
    brute.sort_unstable();
    brute.dedup();
    let mut listed: Vec<_> = min_cuts_via_hierarchy(&h).into_iter().map(|s| s.canonical(n)).collect();
    listed.sort_unstable();
    listed.dedup();
    println!("{} minimum cuts, hierarchy agrees with brute force: {}", brute.len(), brute == listed);
    Ok(())
}
