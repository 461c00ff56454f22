//! Exact convex decomposition of a point of an integral polytope into 0/1
//! vertices by repeatedly peeling off a vertex of the minimal face.

use crate::error::SamplerError;
use crate::rational::Rational;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use std::cmp::Ordering;

/// Nonnegative fraction with fixed-width parts, compared exactly.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

impl Frac {
    pub const ONE: Frac = Frac { num: 1, den: 1 };

    pub fn new(num: i128, den: i128) -> Self {
        let g = num.gcd(&den).max(1);
        Frac { num: num / g, den: den / g }
    }

    pub fn to_rational(self) -> Rational {
        Rational::new(BigInt::from(self.num), BigInt::from(self.den))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A point `num / den` with a shared integer denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScaledPoint {
    pub num: Vec<i128>,
    pub den: i128,
}

impl ScaledPoint {
    pub fn new(num: Vec<i128>, den: i128) -> Self {
        let mut point = ScaledPoint { num, den };
        point.reduce();
        point
    }

    pub fn value(&self, i: usize) -> Frac {
        Frac::new(self.num[i], self.den)
    }

    pub fn sum(&self, coords: impl IntoIterator<Item = usize>) -> i128 {
        coords.into_iter().map(|i| self.num[i]).sum()
    }

    fn reduce(&mut self) {
        let g = self.num.iter().fold(self.den, |g, &x| g.gcd(&x));
        if g > 1 {
            self.num.iter_mut().for_each(|x| *x /= g);
            self.den /= g;
        }
    }

    /// Replaces `x` by `(x - alpha * vertex) / (1 - alpha)` for `alpha < 1`.
    fn peel(&mut self, vertex: &[usize], alpha: Frac) -> Result<(), SamplerError> {
        let (a, b) = (alpha.num, alpha.den);
        let scaled_den = self.den.checked_mul(b - a).ok_or(SamplerError::Overflow)?;
        let shift = a.checked_mul(self.den).ok_or(SamplerError::Overflow)?;
        for x in &mut self.num {
            *x = x.checked_mul(b).ok_or(SamplerError::Overflow)?;
        }
        for &i in vertex {
            self.num[i] -= shift;
        }
        self.den = scaled_den;
        self.reduce();
        Ok(())
    }
}

/// An integral polytope over 0/1 vectors, described by the two operations the
/// peeling loop needs.
pub trait FaceOracle {
    /// A vertex (as its set of coordinates equal to one) lying on the minimal
    /// face that contains `x`.
    fn face_vertex(&self, x: &ScaledPoint) -> Result<Vec<usize>, SamplerError>;

    /// Largest `alpha` such that `(x - alpha * vertex) / (1 - alpha)` still
    /// satisfies every inequality other than nonnegativity; `None` when no
    /// inequality limits the step.
    fn step_limit(&self, x: &ScaledPoint, vertex: &[usize]) -> Option<Frac>;
}

/// Writes `x` as a convex combination of at most `dim + 1` vertices.
pub fn decompose(
    oracle: &impl FaceOracle,
    mut x: ScaledPoint,
) -> Result<Vec<(Vec<usize>, Rational)>, SamplerError> {
    let mut remaining = Rational::one();
    let mut parts = Vec::new();
    for _ in 0..=x.num.len() + 1 {
        let vertex = oracle.face_vertex(&x)?;
        let mut alpha = vertex.iter().map(|&i| x.value(i)).min().unwrap_or(Frac::ONE);
        if let Some(limit) = oracle.step_limit(&x, &vertex) {
            alpha = alpha.min(limit);
        }
        alpha = alpha.min(Frac::ONE);
        if alpha.num <= 0 {
            return Err(SamplerError::InfeasibleShift("peeling step vanished".into()));
        }
        if alpha == Frac::ONE {
            parts.push((vertex, remaining));
            return Ok(parts);
        }
        let alpha_exact = alpha.to_rational();
        parts.push((vertex.clone(), &remaining * &alpha_exact));
        remaining *= Rational::one() - alpha_exact;
        x.peel(&vertex, alpha)?;
        if remaining.is_zero() {
            break;
        }
    }
    Err(SamplerError::InfeasibleShift("peeling did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    /// The simplex {x >= 0, sum x = 1}: vertices are unit vectors.
    struct Simplex;

    impl FaceOracle for Simplex {
        fn face_vertex(&self, x: &ScaledPoint) -> Result<Vec<usize>, SamplerError> {
            Ok(vec![x.num.iter().position(|&v| v > 0).unwrap()])
        }

        fn step_limit(&self, _: &ScaledPoint, _: &[usize]) -> Option<Frac> {
            None
        }
    }

    #[test]
    fn simplex_point_splits_into_its_coordinates() {
        let parts = decompose(&Simplex, ScaledPoint::new(vec![1, 2, 3], 6)).unwrap();
        let weights: Vec<_> = parts.iter().map(|(v, w)| (v[0], w.clone())).collect();
        assert_eq!(weights, vec![(0, ratio(1, 6)), (1, ratio(1, 3)), (2, ratio(1, 2))]);
    }

    #[test]
    fn fractions_compare_exactly() {
        assert!(Frac::new(1, 3) < Frac::new(34, 100));
        assert_eq!(Frac::new(2, 6), Frac::new(1, 3));
    }
}
