//! Compares the two interior tree laws of a degree piece: both keep edge
//! marginals at 1/2 but spread mass differently.

use htsp::harness::correlations::complete_bipartite_piece;
use htsp::rational::to_f64;
use htsp::trees::piece::{DegreePieceSampler, SamplerKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sampler = DegreePieceSampler::new(&complete_bipartite_piece())?;
    let exact = sampler.exact_marginals()?;
    println!("exact sampler marginals: {:?}", exact.iter().map(|(_, m)| m.to_string()).collect::<Vec<_>>());
    for kind in [SamplerKind::MatroidIntersection, SamplerKind::MaxEntropy] {
        let law = sampler.tree_law(kind)?;
        let entropy: f64 = law.iter().filter(|(_, p)| *p > 0.0).map(|(_, p)| -p * p.ln()).sum();
        println!("{kind:?}: {} trees in support, entropy {entropy:.3}", law.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draw = sampler.draw(SamplerKind::MaxEntropy, &mut rng)?;
    let y: Vec<f64> = draw.shift.y.iter().map(|(_, t)| to_f64(&t.to_rational())).collect();
    println!("one draw: shifted values {y:?}");
    println!("          tree {:?}", draw.tree);
    Ok(())
}
