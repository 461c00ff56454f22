//! Reduction parameters: the worst-case expected decreases as linear forms in
//! `(tau, gamma, beta)` and the search that maximises their minimum.

use crate::rational::{ratio, to_f64, Rational};
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

/// Largest reduction any edge may receive, keeping `z_e >= 1/6`.
pub const MAX_REDUCTION: (i64, i64) = (1, 12);

/// Lower bounds on the probability that an edge is even at last, per sampler.
pub mod bounds {
    pub const MI_SPECIAL: (i64, i64) = (1, 36);
    pub const MI_HALF_SPECIAL: (i64, i64) = (1, 21);
    pub const MI_OTHER: (i64, i64) = (1, 18);
    pub const ME_SPECIAL: (i64, i64) = (128, 6561);
    pub const ME_HALF_SPECIAL: (i64, i64) = (4, 27);
    pub const ME_OTHER: (i64, i64) = (1, 12);
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("mixing probability {0} outside [0, 1]")]
    Lambda(String),
    #[error("reduction amounts violate {0}")]
    Constraint(&'static str),
}

/// Which reduction amount a term multiplies.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Amount {
    Tau,
    Gamma,
    Beta,
}

/// Which reduction probability a term carries.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Prob {
    P,
    HalfSpecial,
    Special,
}

/// One worst case of the expected-decrease accounting.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum DecreaseCase {
    /// Cycle edge, charged from one side only.
    CycleOneSide,
    /// Cycle edge, degree-type charge on one side, K5-type on the other.
    CycleMixed,
    /// Cycle edge, both sides charged but only in disjoint events.
    CycleBothSides,
    /// Cycle edge whose charges come from a non-K5 degree child.
    CycleFromDegree,
    DegreeFromDegree,
    DegreeFromK5,
    DegreeFromCycle,
    /// Degree edge with no boundary endpoint: never charged.
    Special,
    K5FromDegree,
    K5FromK5,
    K5FromCycle,
}

impl DecreaseCase {
    pub const ALL: [DecreaseCase; 11] = [
        DecreaseCase::CycleOneSide,
        DecreaseCase::CycleMixed,
        DecreaseCase::CycleBothSides,
        DecreaseCase::CycleFromDegree,
        DecreaseCase::DegreeFromDegree,
        DecreaseCase::DegreeFromK5,
        DecreaseCase::DegreeFromCycle,
        DecreaseCase::Special,
        DecreaseCase::K5FromDegree,
        DecreaseCase::K5FromK5,
        DecreaseCase::K5FromCycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecreaseCase::CycleOneSide => "cycle_one_side",
            DecreaseCase::CycleMixed => "cycle_mixed",
            DecreaseCase::CycleBothSides => "cycle_both_sides",
            DecreaseCase::CycleFromDegree => "cycle_from_degree",
            DecreaseCase::DegreeFromDegree => "degree_from_degree",
            DecreaseCase::DegreeFromK5 => "degree_from_k5",
            DecreaseCase::DegreeFromCycle => "degree_from_cycle",
            DecreaseCase::Special => "special",
            DecreaseCase::K5FromDegree => "k5_from_degree",
            DecreaseCase::K5FromK5 => "k5_from_k5",
            DecreaseCase::K5FromCycle => "k5_from_cycle",
        }
    }

    /// Terms `coefficient * probability * amount` summing to the decrease.
    pub fn terms(self) -> Vec<(i64, i64, Prob, Amount)> {
        use Amount::*;
        use Prob::*;
        match self {
            DecreaseCase::CycleOneSide => vec![(1, 4, P, Beta)],
            DecreaseCase::CycleMixed => vec![(3, 4, P, Beta), (-5, 4, P, Gamma)],
            DecreaseCase::CycleBothSides => vec![(1, 2, P, Beta)],
            DecreaseCase::CycleFromDegree => vec![(1, 1, P, Beta), (-2, 1, P, Tau)],
            DecreaseCase::DegreeFromDegree => vec![(1, 1, HalfSpecial, Tau), (-1, 2, P, Tau)],
            DecreaseCase::DegreeFromK5 => vec![(1, 1, HalfSpecial, Tau), (-1, 2, P, Gamma)],
            DecreaseCase::DegreeFromCycle => vec![(1, 1, HalfSpecial, Tau), (-1, 4, P, Beta)],
            DecreaseCase::Special => vec![(1, 1, Special, Tau)],
            DecreaseCase::K5FromDegree => vec![(1, 1, P, Gamma), (-1, 3, P, Tau)],
            DecreaseCase::K5FromK5 => vec![(1, 1, P, Gamma), (-1, 3, P, Gamma)],
            DecreaseCase::K5FromCycle => vec![(1, 1, P, Gamma), (-1, 3, P, Beta)],
        }
    }

    /// Coefficients of `(tau, gamma, beta)` for the given probabilities.
    pub fn coefficients(self, probs: &Probabilities) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (num, den, prob, amount) in self.terms() {
            out[amount as usize] += num as f64 / den as f64 * probs.get(prob);
        }
        out
    }

    pub fn exact_coefficients(self, probs: &ExactProbabilities) -> [Rational; 3] {
        let mut out = [Rational::zero(), Rational::zero(), Rational::zero()];
        for (num, den, prob, amount) in self.terms() {
            out[amount as usize] += ratio(num, den) * probs.get(prob);
        }
        out
    }
}

/// Reduction probabilities for a mixing probability `lambda`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Probabilities {
    pub p: f64,
    pub p_hs: f64,
    pub p_sp: f64,
}

impl Probabilities {
    pub fn at(lambda: f64) -> Self {
        let mix = |me: (i64, i64), mi: (i64, i64)| {
            lambda * me.0 as f64 / me.1 as f64 + (1.0 - lambda) * mi.0 as f64 / mi.1 as f64
        };
        Probabilities {
            p: mix(bounds::ME_OTHER, bounds::MI_OTHER),
            // The maximum-entropy half-special bound exceeds the generic one,
            // so the generic one is used for both.
            p_hs: mix(bounds::ME_OTHER, bounds::MI_HALF_SPECIAL),
            p_sp: mix(bounds::ME_SPECIAL, bounds::MI_SPECIAL),
        }
    }

    pub fn get(&self, prob: Prob) -> f64 {
        match prob {
            Prob::P => self.p,
            Prob::HalfSpecial => self.p_hs,
            Prob::Special => self.p_sp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactProbabilities {
    #[serde(serialize_with = "crate::rational::serialize")]
    pub p: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub p_hs: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub p_sp: Rational,
}

impl ExactProbabilities {
    pub fn at(lambda: &Rational) -> Self {
        let mix = |me: (i64, i64), mi: (i64, i64)| {
            lambda * ratio(me.0, me.1) + (Rational::from_integer(1.into()) - lambda) * ratio(mi.0, mi.1)
        };
        ExactProbabilities {
            p: mix(bounds::ME_OTHER, bounds::MI_OTHER),
            p_hs: mix(bounds::ME_OTHER, bounds::MI_HALF_SPECIAL),
            p_sp: mix(bounds::ME_SPECIAL, bounds::MI_SPECIAL),
        }
    }

    pub fn get(&self, prob: Prob) -> &Rational {
        match prob {
            Prob::P => &self.p,
            Prob::HalfSpecial => &self.p_hs,
            Prob::Special => &self.p_sp,
        }
    }
}

/// Reduction amounts and the mixing probability they were chosen for.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionParams {
    #[serde(serialize_with = "crate::rational::serialize")]
    pub lambda: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub tau: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub gamma: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub beta: Rational,
}

impl ReductionParams {
    pub fn new(lambda: Rational, tau: Rational, gamma: Rational, beta: Rational) -> Result<Self, ParamsError> {
        if lambda.is_negative() || lambda > ratio(1, 1) {
            return Err(ParamsError::Lambda(lambda.to_string()));
        }
        if tau.is_negative() {
            return Err(ParamsError::Constraint("tau >= 0"));
        }
        if tau > gamma {
            return Err(ParamsError::Constraint("tau <= gamma"));
        }
        if gamma > beta {
            return Err(ParamsError::Constraint("gamma <= beta"));
        }
        if beta > ratio(MAX_REDUCTION.0, MAX_REDUCTION.1) {
            return Err(ParamsError::Constraint("beta <= 1/12"));
        }
        if &tau * ratio(2, 1) > beta || &gamma * ratio(2, 1) > beta {
            return Err(ParamsError::Constraint("beta >= 2 max(tau, gamma)"));
        }
        Ok(ReductionParams { lambda, tau, gamma, beta })
    }

    /// No reductions at all; the join is then `x / 2`.
    pub fn none(lambda: Rational) -> Self {
        ReductionParams { lambda, tau: Rational::zero(), gamma: Rational::zero(), beta: Rational::zero() }
    }

    pub fn probabilities(&self) -> ExactProbabilities {
        ExactProbabilities::at(&self.lambda)
    }

    /// The smallest decrease over all cases.
    pub fn delta(&self) -> Rational {
        let probs = self.probabilities();
        DecreaseCase::ALL.iter().map(|case| self.decrease(*case, &probs)).min().expect("non-empty")
    }

    pub fn decrease(&self, case: DecreaseCase, probs: &ExactProbabilities) -> Rational {
        let [a, b, c] = case.exact_coefficients(probs);
        a * &self.tau + b * &self.gamma + c * &self.beta
    }
}

/// Outcome of the parameter search.
#[derive(Clone, Debug, Serialize)]
pub struct Optimum {
    pub params: ReductionParams,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub delta: Rational,
    /// Cases whose decrease equals `delta`.
    pub binding: Vec<DecreaseCase>,
}

impl Optimum {
    pub fn epsilon(&self) -> Rational {
        &self.delta * ratio(2, 1)
    }
}

/// Constraint rows `a . (tau, gamma, beta, delta) <= b` of the fixed-lambda LP.
fn rows(coefficients: &[[f64; 3]]) -> Vec<([f64; 4], f64)> {
    let cap = MAX_REDUCTION.0 as f64 / MAX_REDUCTION.1 as f64;
    let mut out = vec![
        ([-1.0, 0.0, 0.0, 0.0], 0.0),
        ([1.0, -1.0, 0.0, 0.0], 0.0),
        ([0.0, 1.0, -1.0, 0.0], 0.0),
        ([0.0, 0.0, 1.0, 0.0], cap),
        ([2.0, 0.0, -1.0, 0.0], 0.0),
        ([0.0, 2.0, -1.0, 0.0], 0.0),
        ([0.0, -1.0, 0.0, 0.0], 0.0),
        ([0.0, 0.0, -1.0, 0.0], 0.0),
    ];
    for c in coefficients {
        out.push(([-c[0], -c[1], -c[2], 1.0], 0.0));
    }
    out
}

fn exact_rows(coefficients: &[[Rational; 3]]) -> Vec<([Rational; 4], Rational)> {
    let z = Rational::zero;
    let r = |v: i64| ratio(v, 1);
    let mut out = vec![
        ([r(-1), z(), z(), z()], z()),
        ([r(1), r(-1), z(), z()], z()),
        ([z(), r(1), r(-1), z()], z()),
        ([z(), z(), r(1), z()], ratio(MAX_REDUCTION.0, MAX_REDUCTION.1)),
        ([r(2), z(), r(-1), z()], z()),
        ([z(), r(2), r(-1), z()], z()),
        ([z(), r(-1), z(), z()], z()),
        ([z(), z(), r(-1), z()], z()),
    ];
    for c in coefficients {
        out.push(([-c[0].clone(), -c[1].clone(), -c[2].clone(), r(1)], z()));
    }
    out
}

fn solve4(a: [[f64; 4]; 4], b: [f64; 4]) -> Option<[f64; 4]> {
    let mut m = [[0.0; 5]; 4];
    for i in 0..4 {
        m[i][..4].copy_from_slice(&a[i]);
        m[i][4] = b[i];
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for i in 0..4 {
            if i != col {
                let f = m[i][col] / m[col][col];
                for j in col..5 {
                    m[i][j] -= f * m[col][j];
                }
            }
        }
    }
    Some([m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]])
}

fn solve4_exact(a: [&[Rational; 4]; 4], b: [&Rational; 4]) -> Option<[Rational; 4]> {
    let mut m: Vec<Vec<Rational>> =
        (0..4).map(|i| a[i].iter().cloned().chain(std::iter::once(b[i].clone())).collect()).collect();
    for col in 0..4 {
        let pivot = (col..4).find(|&i| !m[i][col].is_zero())?;
        m.swap(col, pivot);
        for i in 0..4 {
            if i != col && !m[i][col].is_zero() {
                let f = &m[i][col] / &m[col][col];
                for j in col..5 {
                    let delta = &f * &m[col][j];
                    m[i][j] -= delta;
                }
            }
        }
    }
    Some([0, 1, 2, 3].map(|i| &m[i][4] / &m[i][i]))
}

fn for_each_quadruple(count: usize, mut visit: impl FnMut([usize; 4])) {
    for a in 0..count {
        for b in a + 1..count {
            for c in b + 1..count {
                for d in c + 1..count {
                    visit([a, b, c, d]);
                }
            }
        }
    }
}

/// Best `delta` at fixed `lambda` together with the maximising vertices'
/// active sets, by enumerating the vertices of the feasible region.
fn solve_lp(lambda: f64) -> (f64, Vec<[usize; 4]>) {
    let probs = Probabilities::at(lambda);
    let coefficients: Vec<[f64; 3]> = DecreaseCase::ALL.iter().map(|c| c.coefficients(&probs)).collect();
    let rows = rows(&coefficients);
    let mut best = f64::NEG_INFINITY;
    let mut active = Vec::new();
    for_each_quadruple(rows.len(), |idx| {
        let Some(x) = solve4(idx.map(|i| rows[i].0), idx.map(|i| rows[i].1)) else { return };
        let feasible = rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-12);
        if !feasible {
            return;
        }
        if x[3] > best + 1e-12 {
            best = x[3];
            active.clear();
        }
        if x[3] > best - 1e-12 {
            active.push(idx);
        }
    });
    (best, active)
}

/// Largest minimum decrease achievable at a fixed mixing probability.
pub fn delta_at(lambda: f64) -> f64 {
    solve_lp(lambda).0
}

/// Exact LP optimum at a rational `lambda`: the float pass proposes active
/// sets and each is re-solved and re-checked in exact arithmetic.
pub fn solve_exact(lambda: &Rational) -> Optimum {
    let (_, candidates) = solve_lp(to_f64(lambda));
    let probs = ExactProbabilities::at(lambda);
    let coefficients: Vec<[Rational; 3]> = DecreaseCase::ALL.iter().map(|c| c.exact_coefficients(&probs)).collect();
    let rows = exact_rows(&coefficients);
    let feasible = |x: &[Rational; 4]| {
        rows.iter().all(|(a, b)| {
            let lhs: Rational = a.iter().zip(x).map(|(p, q)| p * q).sum();
            lhs <= *b
        })
    };
    let solve = |idx: [usize; 4]| {
        solve4_exact(idx.map(|i| &rows[i].0), idx.map(|i| &rows[i].1)).filter(|x| feasible(x))
    };
    let pick = |best: Option<[Rational; 4]>, x: Option<[Rational; 4]>| match (best, x) {
        (Some(b), Some(x)) => Some(if x[3] > b[3] { x } else { b }),
        (b, x) => b.or(x),
    };
    let mut best = candidates.into_iter().map(solve).fold(None, pick);
    if best.is_none() {
        for_each_quadruple(rows.len(), |idx| best = pick(best.take(), solve(idx)));
    }
    let [tau, gamma, beta, delta] = best.expect("the zero point is a feasible vertex");
    let params = ReductionParams { lambda: lambda.clone(), tau, gamma, beta };
    let binding = DecreaseCase::ALL.iter().copied().filter(|&c| params.decrease(c, &probs) == delta).collect();
    Optimum { params, delta, binding }
}

/// Search settings for [`optimize`].
#[derive(Copy, Clone, Debug)]
pub struct SearchConfig {
    pub grid_points: usize,
    pub tolerance: f64,
    /// Denominator used to make the refined mixing probability rational.
    pub lambda_denominator: i64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { grid_points: 101, tolerance: 1e-5, lambda_denominator: 1_000_000 }
    }
}

/// Maximises the minimum decrease over the mixing probability: a grid scan,
/// golden-section refinement around the best grid point, then an exact
/// solve at the rounded maximiser.
pub fn optimize(config: SearchConfig) -> Optimum {
    let steps = config.grid_points.max(2) - 1;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let best = (0..grid.len()).max_by(|&i, &j| delta_at(grid[i]).total_cmp(&delta_at(grid[j]))).expect("grid");
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(steps)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (delta_at(a), delta_at(b));
    while hi - lo > config.tolerance {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = delta_at(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = delta_at(a);
        }
    }
    let lambda = crate::rational::from_f64_rounded((lo + hi) / 2.0, config.lambda_denominator);
    solve_exact(&lambda)
}
