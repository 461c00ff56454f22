//! Builds one instance of every generator family and prints its shape.

use htsp::harness::generate::{generate, Family};
use htsp::hierarchy::{build_hierarchy, NodeKind};
use htsp::rational::to_f64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for family in Family::defaults() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let instance = generate(&family, false, &mut rng)?;
        let h = build_hierarchy(&instance)?;
        let count = |kind| h.internal_nodes().filter(|n| n.kind == kind).count();
        println!(
            "{:<16} n={:<3} m={:<3} c(x)={:<8.1} degree nodes={} cycle nodes={} depth={}",
            family.name(),
            instance.vertex_count(),
            instance.edge_count(),
            to_f64(&instance.lp_cost()),
            count(NodeKind::Degree),
            count(NodeKind::Cycle),
            h.depth()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    print!("\n{}", generate(&Family::DoubleCycle(5), true, &mut rng)?.serialize());
    Ok(())
}
