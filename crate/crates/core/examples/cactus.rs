//! Turns a cut hierarchy into a cactus and pulls its two-edge cuts back to
//! the original vertices.

use htsp::harness::generate::{generate, Family};
use htsp::hierarchy::{build_cactus, build_hierarchy, min_cuts_via_hierarchy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = generate(&Family::K5Gadget(2), true, &mut ChaCha8Rng::seed_from_u64(3))?;
    let h = build_hierarchy(&instance)?;
    let cactus = build_cactus(&h);
    println!("cactus: {} nodes, {} edges, {} cycles", cactus.node_count, cactus.edges.len(), cactus.cycles.len());
    println!("vertex -> cactus node: {:?}", cactus.phi);
    let n = instance.vertex_count();
    let pulled = cactus.pulled_back_cuts(n);
    let mut listed: Vec<_> = min_cuts_via_hierarchy(&h).into_iter().map(|s| s.canonical(n)).collect();
    listed.sort_unstable();
    listed.dedup();
    println!("{} cuts pulled back, same family as the hierarchy: {}", pulled.len(), pulled == listed);
    Ok(())
}
