//! Enumerates the shifted points of an odd piece with their exact
//! probabilities and confirms every interior edge keeps mean 1/2.

use htsp::harness::correlations::circulant_piece;
use htsp::rational::{ratio, Rational};
use htsp::shift::ShiftModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let piece = circulant_piece(7);
    let model = ShiftModel::new(&piece)?;
    let branches = model.branches()?;
    println!("C7(1,2): {} branches, odd piece: {}", branches.len(), model.is_odd());
    let (first, p) = &branches[0];
    let values: Vec<String> = first.y.iter().map(|(id, t)| format!("{id}={}/3", t.0)).collect();
    println!("first branch (p = {p}): {}", values.join(" "));
    println!("  matching {:?}, parts {:?}, surgery {:?}", first.matching, first.parts, first.surgery);
    let mut mean = vec![Rational::default(); piece.internal.len()];
    for (shift, p) in &branches {
        for (acc, (_, t)) in mean.iter_mut().zip(&shift.y) {
            *acc += p * t.to_rational();
        }
    }
    println!("all means equal 1/2: {}", mean.iter().all(|m| *m == ratio(1, 2)));
    Ok(())
}
