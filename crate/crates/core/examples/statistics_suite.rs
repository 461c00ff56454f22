//! Runs the marginal, EAL and symmetry suites on a generated instance and
//! prints the row closest to failing.

use htsp::harness::generate::Family;
use htsp::harness::suites::{run_suite, ExperimentConfig, InstanceSource, Suite};
use htsp::pipeline::SamplerChoice;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = InstanceSource::Family { family: Family::K5Gadget(2), seed: 1 };
    for suite in [Suite::Marginals, Suite::Eal, Suite::Symmetry] {
        let cfg = ExperimentConfig::new(source.clone(), SamplerChoice::MatroidIntersection, 50_000, 3, suite);
        let report = run_suite(&cfg)?.report;
        let tight = report.tightest().expect("rows");
        println!(
            "{suite:?}: {} rows, all pass: {}, tightest {} ({:.4} vs {:.4}, {:.1} se of slack)",
            report.rows.len(),
            report.passed(),
            tight.name,
            tight.estimate,
            tight.bound,
            tight.margin()
        );
    }
    Ok(())
}
