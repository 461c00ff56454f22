//! Finds the reduction amounts that maximise the guaranteed per-edge decrease.

use htsp::params::{optimize, SearchConfig};
use htsp::rational::to_f64;
use std::time::Instant;

fn main() {
    let start = Instant::now();
    let optimum = optimize(SearchConfig::default());
    let elapsed = start.elapsed();
    let p = &optimum.params;
    println!("lambda = {:.6}", to_f64(&p.lambda));
    println!("tau    = {:.6}", to_f64(&p.tau));
    println!("gamma  = {:.6}", to_f64(&p.gamma));
    println!("beta   = {:.6}", to_f64(&p.beta));
    println!("delta  = {:.8}", to_f64(&optimum.delta));
    println!("eps    = {:.8}", to_f64(&optimum.epsilon()));
    let names: Vec<_> = optimum.binding.iter().map(|c| c.name()).collect();
    println!("binding: {}", names.join(", "));
    println!("solved in {elapsed:?}");
}
