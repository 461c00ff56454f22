//! Running moments and the 3σ acceptance rules shared by every suite.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Width of every acceptance band, in standard errors.
pub const SIGMAS: f64 = 3.0;

/// Absolute slack for comparisons whose standard error is zero, so exact
/// values converted to floats do not fail on rounding.
const ROUNDING: f64 = 1e-12;

/// Streaming mean and variance with Chan's pairwise merge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Success frequency and its plug-in standard error.
pub fn proportion(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let p = hits as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Standard error of a frequency under the null value `p0`.
pub fn null_std_error(p0: f64, trials: u64) -> f64 {
    (p0 * (1.0 - p0) / trials as f64).sqrt()
}

/// Standard error of the difference of two cell frequencies of one
/// multinomial sample.
pub fn cell_difference_std_error(a: u64, b: u64, trials: u64) -> f64 {
    let n = trials as f64;
    let (pa, pb) = (a as f64 / n, b as f64 / n);
    ((pa + pb - (pa - pb).powi(2)) / n).sqrt()
}

/// How an estimate is compared with its bound.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Lower bound: pass when `estimate >= bound - 3σ`.
    AtLeast,
    /// Upper bound: pass when `estimate <= bound + 3σ`.
    AtMost,
    /// Equality: pass when `|estimate - bound| <= 3σ`.
    Equal,
}

impl Comparison {
    pub fn holds(self, estimate: f64, bound: f64, std_error: f64) -> bool {
        let band = SIGMAS * std_error + ROUNDING;
        match self {
            Comparison::AtLeast => estimate >= bound - band,
            Comparison::AtMost => estimate <= bound + band,
            Comparison::Equal => (estimate - bound).abs() <= band,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::AtLeast => ">=",
            Comparison::AtMost => "<=",
            Comparison::Equal => "==",
        }
    }
}

/// One assertion of a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub name: String,
    pub bound: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub sampler: String,
    pub class: String,
}

impl StatRow {
    pub fn new(
        name: impl Into<String>,
        comparison: Comparison,
        bound: f64,
        estimate: f64,
        std_error: f64,
    ) -> Self {
        StatRow {
            name: name.into(),
            bound,
            estimate,
            std_error,
            comparison,
            passed: comparison.holds(estimate, bound, std_error),
            sampler: String::new(),
            class: String::new(),
        }
    }

    pub fn sampler(mut self, sampler: impl Into<String>) -> Self {
        self.sampler = sampler.into();
        self
    }

    pub fn class(mut self, class: impl Into<String>) -> Self {
        self.class = class.into();
        self
    }

    /// Distance from failing, in standard errors; infinite for exact rows
    /// that pass.
    pub fn margin(&self) -> f64 {
        let gap = match self.comparison {
            Comparison::AtLeast => self.estimate - self.bound,
            Comparison::AtMost => self.bound - self.estimate,
            Comparison::Equal => SIGMAS * self.std_error - (self.estimate - self.bound).abs(),
        };
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap >= -ROUNDING {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Rows of one or more suites plus the per-trial failure tally.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StatReport {
    pub rows: Vec<StatRow>,
    /// `(reason, count)` for trials that produced no measurement.
    pub failures: Vec<(String, u64)>,
    pub trials: u64,
}

impl StatReport {
    pub const CSV_HEADER: &'static str = "name,sampler,class,comparison,bound,estimate,std_error,passed";

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failing(&self) -> impl Iterator<Item = &StatRow> + '_ {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn failed_trials(&self) -> u64 {
        self.failures.iter().map(|(_, c)| c).sum()
    }

    pub fn extend(&mut self, other: StatReport) {
        self.rows.extend(other.rows);
        for (reason, count) in other.failures {
            match self.failures.iter_mut().find(|(r, _)| *r == reason) {
                Some(entry) => entry.1 += count,
                None => self.failures.push((reason, count)),
            }
        }
        self.trials += other.trials;
    }

    /// The row with the smallest margin, if any.
    pub fn tightest(&self) -> Option<&StatRow> {
        self.rows.iter().min_by(|a, b| a.margin().total_cmp(&b.margin()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.10},{:.10},{:.10},{}",
                r.name,
                r.sampler,
                r.class,
                r.comparison.symbol(),
                r.bound,
                r.estimate,
                r.std_error,
                r.passed
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_moments_match_a_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 101) as f64 / 7.0).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = Welford::default();
        let mut right = Welford::default();
        xs[..313].iter().for_each(|&x| left.push(x));
        xs[313..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-9);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((whole.variance() - var).abs() < 1e-9);
    }

    #[test]
    fn bands_are_three_standard_errors_wide() {
        assert!(Comparison::AtLeast.holds(0.97, 1.0, 0.01));
        assert!(!Comparison::AtLeast.holds(0.969, 1.0, 0.01));
        assert!(Comparison::AtMost.holds(1.03, 1.0, 0.01));
        assert!(Comparison::Equal.holds(0.5, 0.5, 0.0));
        assert!(!Comparison::Equal.holds(0.52, 0.5, 0.005));
    }

    #[test]
    fn cell_difference_error_matches_the_multinomial_formula() {
        // Var(p_a - p_b) = (p_a + p_b - (p_a - p_b)^2) / n.
        let se = cell_difference_std_error(250, 250, 1000);
        assert!((se - (0.5f64 / 1000.0).sqrt()).abs() < 1e-15);
    }
}
