//! Samples root trees piece by piece and checks edge frequencies.

use htsp::harness::generate::{generate, Family};
use htsp::pipeline::{Pipeline, SamplerChoice};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = generate(&Family::Random4Reg(12), false, &mut ChaCha8Rng::seed_from_u64(2))?;
    let pipeline = Pipeline::new(&instance)?;
    let sample = pipeline.sample(SamplerChoice::Mix(0.5), 42, 0)?;
    println!("tree edges: {:?}", sample.edges.iter().map(|e| e.0).collect::<Vec<_>>());
    for piece in &sample.pieces {
        println!("  node {:>2} sampler {:?} contributed {} edges", piece.node, piece.sampler, piece.tree.len());
    }
    let trials = 20_000;
    let mut hits = vec![0u32; instance.edge_count()];
    for trial in 0..trials {
        for id in pipeline.sample(SamplerChoice::Mix(0.5), 42, trial)?.edges {
            hits[id.0] += 1;
        }
    }
    let worst = hits.iter().map(|&h| (h as f64 / trials as f64 - 0.5).abs()).fold(0.0, f64::max);
    println!("largest |frequency - 1/2| over {trials} trees: {worst:.4}");
    Ok(())
}
