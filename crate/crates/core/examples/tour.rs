//! Prices tree, fractional join, minimum join and tour over a few trials.

use htsp::harness::generate::{generate, Family};
use htsp::harness::suites::optimum_for;
use htsp::ojoin::{run_trial, CostModel, EalDetector, EalEstimates, JoinPlan, TrialRow};
use htsp::pipeline::{Pipeline, SamplerChoice};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = generate(&Family::ChainInDegree, false, &mut ChaCha8Rng::seed_from_u64(4))?;
    let pipeline = Pipeline::new(&instance)?;
    let (choice, optimum) = optimum_for(SamplerChoice::Mix(0.471496));
    let estimates = EalEstimates::calibrate(&EalDetector::new(&pipeline), choice, 50_000, 1);
    let plan = JoinPlan::new(&pipeline, optimum.params, &estimates)?;
    let costs = CostModel::new(&instance)?;
    println!("{}", TrialRow::HEADER);
    for trial in 0..5 {
        let outcome = run_trial(&plan, &costs, choice, 1, trial, true)?;
        println!("{}", outcome.row.csv());
    }
    Ok(())
}
