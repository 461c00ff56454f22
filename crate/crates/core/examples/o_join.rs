//! Builds the fractional join of one sampled tree and walks its ledger:
//! which edges were reduced and who paid for the cuts they left short.

use htsp::harness::generate::{generate, Family};
use htsp::harness::suites::optimum_for;
use htsp::ojoin::{EalDetector, EalEstimates, JoinPlan};
use htsp::pipeline::{trial_rng, Pipeline, SamplerChoice};
use htsp::rational::to_f64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = generate(&Family::Nested(2), false, &mut ChaCha8Rng::seed_from_u64(1))?;
    let pipeline = Pipeline::new(&instance)?;
    let (choice, optimum) = optimum_for(SamplerChoice::Mix(0.471496));
    let estimates = EalEstimates::calibrate(&EalDetector::new(&pipeline), choice, 50_000, 9);
    let plan = JoinPlan::new(&pipeline, optimum.params, &estimates)?;
    for trial in 0..200 {
        let sample = pipeline.sample(choice, 9, trial)?;
        let join = plan.build_join(&sample, &mut trial_rng(9, trial, u64::MAX))?;
        if join.charges.is_empty() {
            continue;
        }
        plan.verify_join(&join, &sample)?;
        let reduced: Vec<_> = (0..join.z.len()).filter(|&i| join.reduction[i] > 0).collect();
        println!("trial {trial}: reduced edges {reduced:?}");
        for c in &join.charges {
            println!("  {} pays {:.5} to {}", c.source, c.amount as f64 / join.scale as f64, c.target);
        }
        let low = join.values().iter().map(to_f64).fold(f64::INFINITY, f64::min);
        println!("  ledger balances: {}, smallest z = {low:.5}", join.ledger_balances());
        break;
    }
    Ok(())
}
