//! Monte Carlo suites over assembled trees and joins.
//!
//! Trials are split into fixed-size chunks that run in parallel; chunk
//! totals are merged in chunk order, so a fixed seed gives identical
//! reports and CSV bytes regardless of the worker count.

use super::correlations::sampled_rows;
use super::generate::{generate, Family, GenerateError};
use super::stats::{cell_difference_std_error, null_std_error, proportion, Comparison, StatReport, StatRow, Welford};
use crate::error::SamplerError;
use crate::graph::EdgeId;
use crate::hierarchy::LocalPiece;
use crate::instance::{Instance, InstanceError, ParseMode};
use crate::ojoin::{
    run_trial, CostModel, EalDetector, EalEstimates, EdgeKind, JoinError, JoinPlan, TrialError, TrialRow,
};
use crate::params::{solve_exact, Optimum};
use crate::pipeline::{trial_rng, Pipeline, PipelineError, SamplerChoice};
use crate::rational::{from_f64_rounded, to_f64};
use crate::shift::ShiftModel;
use crate::trees::piece::SamplerKind;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

/// Trials per parallel work unit.
const CHUNK: u64 = 2048;

/// Mean fractional join cost allowed, as a multiple of `c(x)`.
pub const FRACTIONAL_TARGET: f64 = 0.5 - 0.001695;
/// Mean tree-plus-join cost allowed, as a multiple of `c(x)`.
pub const TOTAL_TARGET: f64 = 1.4983;
/// Edge pairs checked for the symmetry identities.
pub const SYMMETRY_PAIRS: usize = 20;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Join(#[from] JoinError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("unknown suite {0}")]
    UnknownSuite(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Marginals,
    Correlations,
    Eal,
    Reduction,
    Cost,
    Symmetry,
    Surgery,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] =
        [Suite::Marginals, Suite::Correlations, Suite::Eal, Suite::Reduction, Suite::Cost, Suite::Symmetry, Suite::Surgery];

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        Ok(match text {
            "marginals" => Suite::Marginals,
            "correlations" => Suite::Correlations,
            "eal" => Suite::Eal,
            "reduction" => Suite::Reduction,
            "cost" => Suite::Cost,
            "symmetry" => Suite::Symmetry,
            "surgery" => Suite::Surgery,
            "all" => Suite::All,
            _ => return Err(HarnessError::UnknownSuite(text.into())),
        })
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

/// Where the instance of an experiment comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InstanceSource {
    File(PathBuf),
    /// A generated instance; the seed drives the generator only.
    Family { family: Family, seed: u64 },
}

impl InstanceSource {
    pub fn load(&self, unit_costs: bool) -> Result<(String, Instance), HarnessError> {
        match self {
            InstanceSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                Ok((path.display().to_string(), Instance::parse(&text, ParseMode::Strict)?))
            }
            InstanceSource::Family { family, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((family.name(), generate(family, unit_costs, &mut rng)?))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    pub choice: SamplerChoice,
    pub trials: u64,
    pub seed: u64,
    pub suite: Suite,
    /// Trials of the EAL calibration pass that precedes join runs.
    pub calibration_trials: u64,
    pub shortcut: bool,
    pub unit_costs: bool,
    /// Keep one CSV row per join trial.
    pub keep_rows: bool,
}

impl ExperimentConfig {
    pub fn new(source: InstanceSource, choice: SamplerChoice, trials: u64, seed: u64, suite: Suite) -> Self {
        ExperimentConfig {
            source,
            choice,
            trials,
            seed,
            suite,
            calibration_trials: 100_000,
            shortcut: true,
            unit_costs: false,
            keep_rows: false,
        }
    }
}

/// Report rows plus the per-trial CSV of join runs.
pub struct SuiteOutput {
    pub instance: String,
    pub report: StatReport,
    pub trial_csv: Option<String>,
}

/// Label of a sampler choice in report rows.
pub fn choice_label(choice: SamplerChoice) -> String {
    match choice {
        SamplerChoice::MatroidIntersection => "mi".into(),
        SamplerChoice::MaxEntropy => "maxent".into(),
        SamplerChoice::Mix(lambda) => format!("mix({lambda})"),
    }
}

/// Optimal reduction parameters for the choice's mixing probability, with
/// the choice snapped to the rational probability they were solved at.
pub fn optimum_for(choice: SamplerChoice) -> (SamplerChoice, Optimum) {
    let lambda = from_f64_rounded(choice.lambda(), 1_000_000);
    let optimum = solve_exact(&lambda);
    let snapped = match choice {
        SamplerChoice::Mix(_) => SamplerChoice::Mix(to_f64(&lambda)),
        other => other,
    };
    (snapped, optimum)
}

/// Distinct unordered edge pairs drawn from a dedicated stream.
pub fn symmetry_pairs(edge_count: usize, count: usize, seed: u64) -> Vec<(EdgeId, EdgeId)> {
    let total = edge_count * edge_count.saturating_sub(1) / 2;
    let mut rng = trial_rng(seed, 0, u64::MAX - 1);
    let mut picked: Vec<usize> = sample_indices(&mut rng, total, count.min(total)).into_vec();
    picked.sort_unstable();
    let mut pairs = Vec::with_capacity(picked.len());
    let (mut index, mut next) = (0, 0);
    'outer: for a in 0..edge_count {
        for b in a + 1..edge_count {
            if next == picked.len() {
                break 'outer;
            }
            if picked[next] == index {
                pairs.push((EdgeId(a), EdgeId(b)));
                next += 1;
            }
            index += 1;
        }
    }
    pairs
}

pub struct RunOptions {
    pub choice: SamplerChoice,
    pub trials: u64,
    pub seed: u64,
    pub shortcut: bool,
    pub pairs: Vec<(EdgeId, EdgeId)>,
    pub keep_rows: bool,
}

/// What a run needs beyond the sampler: join trials also need a plan and
/// the cost model.
#[derive(Copy, Clone)]
pub enum RunMode<'a, 'p> {
    Trees(&'a EalDetector<'p>),
    Joins(&'a JoinPlan<'p>, &'a CostModel),
}

/// Aggregated counts of one run.
#[derive(Clone, Debug, Default)]
pub struct RunTotals {
    pub attempted: u64,
    pub completed: u64,
    pub failures: BTreeMap<String, u64>,
    /// Joins built but rejected by verification.
    pub infeasible: u64,
    pub ledger_errors: u64,
    /// Trials whose integral join cost exceeded the fractional one.
    pub integral_exceeds: u64,
    pub in_tree: Vec<u64>,
    pub eal: Vec<u64>,
    pub reduced: Vec<u64>,
    /// Per edge `1/4 - z_e`.
    pub decrease: Vec<Welford>,
    /// Sum of charges, row-major by `(source, target)`, as fractions.
    pub charge_sums: Vec<f64>,
    /// `[neither, second only, first only, both]` per symmetry pair.
    pub pair_counts: Vec<[u64; 4]>,
    pub fractional_ratio: Welford,
    pub total_ratio: Welford,
    pub tour_ratio: Welford,
    pub rows: Vec<TrialRow>,
}

impl RunTotals {
    fn new(m: usize, pairs: usize, joins: bool) -> Self {
        RunTotals {
            in_tree: vec![0; m],
            eal: vec![0; m],
            reduced: vec![0; m],
            decrease: if joins { vec![Welford::default(); m] } else { Vec::new() },
            charge_sums: if joins { vec![0.0; m * m] } else { Vec::new() },
            pair_counts: vec![[0; 4]; pairs],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: RunTotals) {
        self.attempted += other.attempted;
        self.completed += other.completed;
        for (reason, count) in other.failures {
            *self.failures.entry(reason).or_default() += count;
        }
        self.infeasible += other.infeasible;
        self.ledger_errors += other.ledger_errors;
        self.integral_exceeds += other.integral_exceeds;
        let add = |a: &mut Vec<u64>, b: Vec<u64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.in_tree, other.in_tree);
        add(&mut self.eal, other.eal);
        add(&mut self.reduced, other.reduced);
        self.decrease.iter_mut().zip(&other.decrease).for_each(|(a, b)| a.merge(b));
        self.charge_sums.iter_mut().zip(other.charge_sums).for_each(|(a, b)| *a += b);
        for (a, b) in self.pair_counts.iter_mut().zip(other.pair_counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.fractional_ratio.merge(&other.fractional_ratio);
        self.total_ratio.merge(&other.total_ratio);
        self.tour_ratio.merge(&other.tour_ratio);
        self.rows.extend(other.rows);
    }

    fn record_tree(&mut self, in_tree: &[bool], eal: &[bool], pairs: &[(EdgeId, EdgeId)]) {
        for (i, (&t, &e)) in in_tree.iter().zip(eal).enumerate() {
            self.in_tree[i] += u64::from(t);
            self.eal[i] += u64::from(e);
        }
        for (counts, (a, b)) in self.pair_counts.iter_mut().zip(pairs) {
            counts[usize::from(in_tree[a.0]) * 2 + usize::from(in_tree[b.0])] += 1;
        }
    }

    fn fail(&mut self, reason: &str) {
        *self.failures.entry(reason.to_string()).or_default() += 1;
    }

    pub fn failed(&self) -> u64 {
        self.failures.values().sum()
    }

    pub fn report_failures(&self) -> Vec<(String, u64)> {
        self.failures.iter().map(|(r, c)| (r.clone(), *c)).collect()
    }

    /// Mean charge paid by `source` to `target` per completed trial.
    pub fn mean_charge(&self, source: EdgeId, target: EdgeId) -> f64 {
        let m = self.in_tree.len();
        self.charge_sums[source.0 * m + target.0] / self.completed.max(1) as f64
    }
}

/// Short name of the reason a trial produced no measurement.
pub fn failure_reason(error: &TrialError) -> &'static str {
    match error {
        TrialError::Pipeline(e) | TrialError::Join(JoinError::Pipeline(e)) => pipeline_reason(e),
        TrialError::Join(e) => match e {
            JoinError::EstimateBelowBound { .. } => "estimate_below_bound",
            JoinError::FlowInfeasible { .. } => "flow_infeasible",
            JoinError::EdgeBelowFloor { .. } => "edge_below_floor",
            JoinError::FeasibilityViolation { .. } => "feasibility_violation",
            JoinError::OddSetTooLarge { .. } => "odd_set_too_large",
            JoinError::ScaleOverflow => "scale_overflow",
            JoinError::CostScale => "cost_scale",
            JoinError::SamplerMismatch { .. } => "sampler_mismatch",
            JoinError::Pipeline(_) => unreachable!("matched above"),
        },
    }
}

fn pipeline_reason(error: &PipelineError) -> &'static str {
    match error {
        PipelineError::Hierarchy(_) => "hierarchy",
        PipelineError::Assembly(_) => "assembly",
        PipelineError::Sampler { source, .. } => match source {
            SamplerError::NumericalBreakdown { .. } => "numerical_breakdown",
            SamplerError::NonConvergence { .. } => "non_convergence",
            _ => "sampler",
        },
    }
}

/// Runs `opts.trials` trials and aggregates everything the suites read.
pub fn run(mode: RunMode, opts: &RunOptions) -> RunTotals {
    let detector = match mode {
        RunMode::Trees(d) => d,
        RunMode::Joins(plan, _) => plan.detector(),
    };
    let m = detector.classes().len();
    let joins = matches!(mode, RunMode::Joins(..));
    let chunks = opts.trials.div_ceil(CHUNK);
    let parts: Vec<RunTotals> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut totals = RunTotals::new(m, opts.pairs.len(), joins);
            let end = ((chunk + 1) * CHUNK).min(opts.trials);
            for trial in chunk * CHUNK..end {
                totals.attempted += 1;
                match mode {
                    RunMode::Trees(detector) => match detector.pipeline().sample(opts.choice, opts.seed, trial) {
                        Ok(sample) => {
                            let odd = detector.odd_sets(&sample);
                            let eal = detector.detect(&sample, &odd);
                            totals.record_tree(&sample.in_tree, &eal, &opts.pairs);
                            totals.completed += 1;
                        }
                        Err(e) => totals.fail(pipeline_reason(&e)),
                    },
                    RunMode::Joins(plan, costs) => {
                        match run_trial(plan, costs, opts.choice, opts.seed, trial, opts.shortcut) {
                            Ok(outcome) => {
                                let join = &outcome.join;
                                totals.record_tree(&outcome.sample.in_tree, &join.eal, &opts.pairs);
                                for i in 0..m {
                                    totals.reduced[i] += u64::from(join.reduced(EdgeId(i)));
                                    totals.decrease[i].push(join.decrease(EdgeId(i)));
                                }
                                for c in &join.charges {
                                    totals.charge_sums[c.source.0 * m + c.target.0] +=
                                        c.amount as f64 / join.scale as f64;
                                }
                                totals.ledger_errors += u64::from(!join.ledger_balances());
                                totals.integral_exceeds += u64::from(!outcome.integral_within_fractional);
                                let cx = costs.to_f64(costs.total()) / 2.0;
                                let row = &outcome.row;
                                totals.fractional_ratio.push(row.fractional_join_cost / cx);
                                totals.total_ratio.push((row.tree_cost + row.integral_join_cost) / cx);
                                totals.tour_ratio.push(row.ratio_to_cx);
                                if opts.keep_rows {
                                    totals.rows.push(outcome.row);
                                }
                                totals.completed += 1;
                            }
                            Err(e) => {
                                let reason = failure_reason(&e);
                                if matches!(reason, "edge_below_floor" | "feasibility_violation") {
                                    totals.infeasible += 1;
                                }
                                totals.fail(reason);
                            }
                        }
                    }
                }
            }
            totals
        })
        .collect();
    let mut totals = RunTotals::new(m, opts.pairs.len(), joins);
    for part in parts {
        totals.merge(part);
    }
    totals
}

fn edge_name(prefix: &str, id: EdgeId) -> String {
    format!("{prefix}:{id}")
}

/// Every edge's tree frequency against 1/2, two-sided.
pub fn marginal_rows(totals: &RunTotals, detector: &EalDetector, label: &str) -> Vec<StatRow> {
    let n = totals.completed;
    detector
        .classes()
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let p = totals.in_tree[i] as f64 / n as f64;
            StatRow::new(edge_name("marginal", EdgeId(i)), Comparison::Equal, 0.5, p, null_std_error(0.5, n))
                .sampler(label)
                .class(class.kind.name())
        })
        .collect()
}

/// EAL frequency of every reducible edge against its table bound.
pub fn eal_rows(totals: &RunTotals, detector: &EalDetector, choice: SamplerChoice) -> Vec<StatRow> {
    let label = choice_label(choice);
    detector
        .classes()
        .iter()
        .enumerate()
        .filter_map(|(i, class)| {
            let bound = class.kind.eal_bound(choice.lambda())?;
            let (p, se) = proportion(totals.eal[i], totals.completed);
            Some(
                StatRow::new(edge_name("eal", EdgeId(i)), Comparison::AtLeast, bound, p, se)
                    .sampler(label.as_str())
                    .class(class.kind.name()),
            )
        })
        .collect()
}

/// Relative variance of each calibrated EAL estimate; the coin probability
/// of an edge is inversely proportional to it.
fn calibration_relative_variance(estimates: &EalEstimates, m: usize) -> Vec<f64> {
    let n = (estimates.trials - estimates.failures).max(1) as f64;
    (0..m)
        .map(|i| {
            let p = estimates.probability(EdgeId(i));
            if p > 0.0 {
                (1.0 - p) / (p * n)
            } else {
                0.0
            }
        })
        .collect()
}

/// Variance that calibration error adds to `sum_e weight_e * E[1/4 - z_e]`,
/// to first order: every term driven by source `s` scales with `1 / p_s`.
pub fn calibration_variance(totals: &RunTotals, plan: &JoinPlan, estimates: &EalEstimates, weights: &[f64]) -> f64 {
    let m = weights.len();
    let relvar = calibration_relative_variance(estimates, m);
    let n = totals.completed.max(1) as f64;
    (0..m)
        .map(|s| {
            let own = to_f64(&plan.classes()[s].kind.reduction(plan.params())) * totals.reduced[s] as f64 / n;
            let mut gradient = weights[s] * own;
            for (t, w) in weights.iter().enumerate() {
                gradient -= w * totals.mean_charge(EdgeId(s), EdgeId(t));
            }
            gradient * gradient * relvar[s]
        })
        .sum()
}

/// Reduction frequency against the flattened probability, two-sided; the
/// error band includes the calibration error of the coin.
pub fn reduction_rows(totals: &RunTotals, plan: &JoinPlan, estimates: &EalEstimates, label: &str) -> Vec<StatRow> {
    let m = plan.classes().len();
    let relvar = calibration_relative_variance(estimates, m);
    plan.classes()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != EdgeKind::Anchor)
        .map(|(i, class)| {
            let bound = plan.reduction_bound(EdgeId(i));
            let (p, se) = proportion(totals.reduced[i], totals.completed);
            let se = (se * se + bound * bound * relvar[i]).sqrt();
            StatRow::new(edge_name("reduction", EdgeId(i)), Comparison::Equal, bound, p, se)
                .sampler(label)
                .class(class.kind.name())
        })
        .collect()
}

/// Mean net decrease of every reducible edge against `delta`.
pub fn decrease_rows(
    totals: &RunTotals,
    plan: &JoinPlan,
    estimates: &EalEstimates,
    delta: f64,
    label: &str,
) -> Vec<StatRow> {
    let m = plan.classes().len();
    plan.classes()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != EdgeKind::Anchor)
        .map(|(i, class)| {
            let mut unit = vec![0.0; m];
            unit[i] = 1.0;
            let w = &totals.decrease[i];
            let se = (w.std_error().powi(2) + calibration_variance(totals, plan, estimates, &unit)).sqrt();
            StatRow::new(edge_name("decrease", EdgeId(i)), Comparison::AtLeast, delta, w.mean(), se)
                .sampler(label)
                .class(class.kind.name())
        })
        .collect()
}

/// Feasibility, ledger and cost rows of a join run.
pub fn cost_rows(
    totals: &RunTotals,
    plan: &JoinPlan,
    costs: &CostModel,
    estimates: &EalEstimates,
    label: &str,
) -> Vec<StatRow> {
    let built = totals.completed + totals.infeasible;
    let feasible = StatRow::new("join_feasible_fraction", Comparison::Equal, 1.0, totals.completed as f64 / built.max(1) as f64, 0.0);
    let ledger = StatRow::new("ledger_balanced_fraction", Comparison::Equal, 1.0, 1.0 - totals.ledger_errors as f64 / totals.completed.max(1) as f64, 0.0);
    let within = StatRow::new(
        "integral_within_fractional_fraction",
        Comparison::Equal,
        1.0,
        1.0 - totals.integral_exceeds as f64 / totals.completed.max(1) as f64,
        0.0,
    );
    // Fractional cost is sum_e c_e (1/4 - decrease_e); in units of c(x)
    // an edge carries weight 2 c_e / sum c.
    let cx2 = costs.to_f64(costs.total());
    let weights: Vec<f64> = (0..plan.classes().len()).map(|i| 2.0 * costs.to_f64(costs.edge_cost(EdgeId(i))) / cx2).collect();
    let cal = calibration_variance(totals, plan, estimates, &weights);
    let f = &totals.fractional_ratio;
    let fractional = StatRow::new(
        "mean_fractional_join_over_cx",
        Comparison::AtMost,
        FRACTIONAL_TARGET,
        f.mean(),
        (f.std_error().powi(2) + cal).sqrt(),
    );
    let t = &totals.total_ratio;
    let total = StatRow::new(
        "mean_tree_plus_join_over_cx",
        Comparison::AtMost,
        TOTAL_TARGET,
        t.mean(),
        (t.std_error().powi(2) + cal).sqrt(),
    );
    let r = &totals.tour_ratio;
    let tour = StatRow::new("mean_tour_over_cx", Comparison::AtMost, TOTAL_TARGET, r.mean(), r.std_error());
    [feasible, ledger, within, fractional, total, tour]
        .into_iter()
        .map(|row| row.sampler(label).class("cost"))
        .collect()
}

/// `p00 = p11` and `p01 = p10` for every tracked pair.
pub fn symmetry_rows(totals: &RunTotals, pairs: &[(EdgeId, EdgeId)], label: &str) -> Vec<StatRow> {
    let n = totals.completed;
    pairs
        .iter()
        .zip(&totals.pair_counts)
        .flat_map(|((a, b), c)| {
            let row = |name: String, x: u64, y: u64| {
                let diff = (x as f64 - y as f64) / n as f64;
                StatRow::new(name, Comparison::Equal, 0.0, diff, cell_difference_std_error(x, y, n))
                    .sampler(label)
                    .class("symmetry")
            };
            [row(format!("p00-p11:{a},{b}"), c[0], c[3]), row(format!("p01-p10:{a},{b}"), c[1], c[2])]
        })
        .collect()
}

/// Label of an interior edge by how many ends touch the boundary.
pub fn boundary_class(piece: &LocalPiece, id: EdgeId) -> &'static str {
    let boundary = piece.boundary();
    let e = piece.graph.find(id).expect("piece edge");
    match usize::from(boundary.contains(e.u)) + usize::from(boundary.contains(e.v)) {
        0 => "special",
        1 => "half_special",
        _ => "other_degree",
    }
}

/// Mean shifted value of every interior edge against 1/2.
pub fn shift_mean_rows(name: &str, model: &ShiftModel, trials: u64, seed: u64) -> Result<Vec<StatRow>, SamplerError> {
    let piece = model.piece();
    let mut moments = vec![Welford::default(); piece.internal.len()];
    for trial in 0..trials {
        let shift = model.draw(&mut trial_rng(seed, trial, 1))?;
        for (w, (_, t)) in moments.iter_mut().zip(&shift.y) {
            w.push(t.0 as f64 / 3.0);
        }
    }
    Ok(piece
        .internal
        .iter()
        .zip(&moments)
        .map(|(id, w)| {
            StatRow::new(format!("shift_mean:{name}:{id}"), Comparison::Equal, 0.5, w.mean(), w.std_error())
                .class(boundary_class(piece, *id))
        })
        .collect())
}

fn kinds_of(choice: SamplerChoice) -> Vec<SamplerKind> {
    match choice {
        SamplerChoice::MatroidIntersection => vec![SamplerKind::MatroidIntersection],
        SamplerChoice::MaxEntropy => vec![SamplerKind::MaxEntropy],
        SamplerChoice::Mix(_) => vec![SamplerKind::MatroidIntersection, SamplerKind::MaxEntropy],
    }
}

/// Runs the configured suites on the configured instance.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let (name, instance) = cfg.source.load(cfg.unit_costs)?;
    let pipeline = Pipeline::new(&instance)?;
    let detector = EalDetector::new(&pipeline);
    let label = choice_label(cfg.choice);
    let mut report = StatReport::default();
    let pairs = symmetry_pairs(instance.edge_count(), SYMMETRY_PAIRS, cfg.seed);

    let tree_suites = [Suite::Marginals, Suite::Eal, Suite::Symmetry];
    if tree_suites.iter().any(|s| cfg.suite.includes(*s)) {
        let opts = RunOptions {
            choice: cfg.choice,
            trials: cfg.trials,
            seed: cfg.seed,
            shortcut: cfg.shortcut,
            pairs: pairs.clone(),
            keep_rows: false,
        };
        let totals = run(RunMode::Trees(&detector), &opts);
        if cfg.suite.includes(Suite::Marginals) {
            report.rows.extend(marginal_rows(&totals, &detector, &label));
        }
        if cfg.suite.includes(Suite::Eal) {
            report.rows.extend(eal_rows(&totals, &detector, cfg.choice));
        }
        if cfg.suite.includes(Suite::Symmetry) {
            report.rows.extend(symmetry_rows(&totals, &pairs, &label));
        }
        report.extend(StatReport { rows: Vec::new(), failures: totals.report_failures(), trials: totals.attempted });
    }

    if cfg.suite.includes(Suite::Correlations) {
        for (node, sampler) in pipeline.degree_samplers() {
            for kind in kinds_of(cfg.choice) {
                report.rows.extend(sampled_rows(&format!("node{node}"), sampler, kind, cfg.trials, cfg.seed)?);
            }
        }
    }

    if cfg.suite.includes(Suite::Surgery) {
        for (node, sampler) in pipeline.degree_samplers().filter(|(_, s)| s.model().is_odd()) {
            report.rows.extend(shift_mean_rows(&format!("node{node}"), sampler.model(), cfg.trials, cfg.seed)?);
        }
    }

    let mut trial_csv = None;
    if cfg.suite.includes(Suite::Reduction) || cfg.suite.includes(Suite::Cost) {
        let (choice, optimum) = optimum_for(cfg.choice);
        let label = choice_label(choice);
        let estimates = EalEstimates::calibrate(&detector, choice, cfg.calibration_trials, cfg.seed);
        let plan = JoinPlan::new(&pipeline, optimum.params.clone(), &estimates)?;
        let costs = CostModel::new(&instance)?;
        let opts = RunOptions {
            choice,
            trials: cfg.trials,
            seed: cfg.seed,
            shortcut: cfg.shortcut,
            pairs: Vec::new(),
            keep_rows: cfg.keep_rows,
        };
        let totals = run(RunMode::Joins(&plan, &costs), &opts);
        if cfg.suite.includes(Suite::Reduction) {
            report.rows.extend(reduction_rows(&totals, &plan, &estimates, &label));
            report.rows.extend(decrease_rows(&totals, &plan, &estimates, to_f64(&optimum.delta), &label));
        }
        if cfg.suite.includes(Suite::Cost) {
            report.rows.extend(cost_rows(&totals, &plan, &costs, &estimates, &label));
        }
        if cfg.keep_rows {
            let mut csv = String::from(TrialRow::HEADER);
            csv.push('\n');
            for row in &totals.rows {
                csv.push_str(&row.csv());
                csv.push('\n');
            }
            trial_csv = Some(csv);
        }
        report.extend(StatReport { rows: Vec::new(), failures: totals.report_failures(), trials: totals.attempted });
    }

    Ok(SuiteOutput { instance: name, report, trial_csv })
}
