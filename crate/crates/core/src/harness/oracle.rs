//! Exact checks on small instances: probabilities come from enumerating the
//! tree laws of every piece instead of sampling.

use super::correlations::exact_rows;
use super::stats::{Comparison, StatReport, StatRow};
use super::suites::{boundary_class, choice_label, optimum_for, HarnessError};
use crate::error::SamplerError;
use crate::graph::EdgeId;
use crate::hierarchy::NodeId;
use crate::ojoin::{EalDetector, EalEstimates, EdgeKind, JoinPlan};
use crate::pipeline::{PiecePlan, Pipeline, SamplerChoice, TreeSample};
use crate::rational::{ratio, to_f64, Rational};
use crate::shift::{ShiftModel, Thirds};
use crate::trees::piece::{DegreePieceSampler, SamplerKind};
use std::collections::BTreeMap;

/// Largest piece interior whose correlation rows are enumerated.
pub const CORRELATION_INTERIOR_LIMIT: usize = 10;
/// Largest piece interior whose shifted points are checked subset by subset.
pub const POLYTOPE_INTERIOR_LIMIT: usize = 12;
/// Largest number of joint piece outcomes enumerated for EAL probabilities.
pub const JOINT_LIMIT: u64 = 2_000_000;

/// Fit tolerance of maximum-entropy marginals.
const MAXENT_TOLERANCE: f64 = 1e-5;

fn exact_row(name: String, passed: bool, estimate: f64, bound: f64) -> StatRow {
    let mut row = StatRow::new(name, Comparison::Equal, bound, estimate, 0.0);
    row.passed = passed;
    row
}

/// Piece-level marginals: rational identities for the exact sampler and the
/// fitted tolerance for maximum entropy.
pub fn marginal_rows(pipeline: &Pipeline) -> Result<Vec<StatRow>, SamplerError> {
    let half = ratio(1, 2);
    let mut rows = Vec::new();
    for node in pipeline.hierarchy().internal_nodes() {
        let mut counts: BTreeMap<EdgeId, (usize, usize)> = BTreeMap::new();
        match pipeline.plan(node.id) {
            PiecePlan::Leaf => continue,
            PiecePlan::Pairs(pairs) => {
                for pair in pairs {
                    for id in pair {
                        counts.insert(*id, (1, 2));
                    }
                }
            }
            PiecePlan::Paths(paths) => {
                for path in paths {
                    for id in path {
                        counts.entry(*id).or_insert((0, paths.len())).0 += 1;
                    }
                }
            }
            PiecePlan::Degree(sampler) => {
                for (id, m) in sampler.exact_marginals()? {
                    let name = format!("exact_marginal:node{}:{id}", node.id);
                    rows.push(exact_row(name, m == half, to_f64(&m), 0.5).sampler("mi"));
                }
                let law = sampler.tree_law(SamplerKind::MaxEntropy)?;
                for &id in &sampler.model().piece().internal {
                    let m: f64 = law.iter().filter(|(t, _)| t.contains(&id)).map(|(_, p)| p).sum();
                    let row = StatRow::new(
                        format!("exact_marginal:node{}:{id}", node.id),
                        Comparison::Equal,
                        0.5,
                        m,
                        MAXENT_TOLERANCE / 3.0,
                    );
                    rows.push(row.sampler("maxent"));
                }
                continue;
            }
        }
        for (id, (hits, total)) in counts {
            let m = ratio(hits as i64, total as i64);
            rows.push(exact_row(format!("exact_marginal:node{}:{id}", node.id), m == half, to_f64(&m), 0.5));
        }
    }
    Ok(rows)
}

/// Correlation rows of every degree piece small enough to enumerate.
pub fn correlation_rows(pipeline: &Pipeline) -> Result<Vec<StatRow>, SamplerError> {
    let mut rows = Vec::new();
    for (node, sampler) in pipeline.degree_samplers() {
        if sampler.model().piece().interior_size() > CORRELATION_INTERIOR_LIMIT {
            continue;
        }
        for kind in [SamplerKind::MatroidIntersection, SamplerKind::MaxEntropy] {
            rows.extend(exact_rows(&format!("node{node}"), sampler, kind)?);
        }
    }
    Ok(rows)
}

fn piece_law(sampler: &DegreePieceSampler, choice: SamplerChoice) -> Result<Vec<(Vec<EdgeId>, f64)>, SamplerError> {
    match choice {
        SamplerChoice::MatroidIntersection => sampler.tree_law(SamplerKind::MatroidIntersection),
        SamplerChoice::MaxEntropy => sampler.tree_law(SamplerKind::MaxEntropy),
        SamplerChoice::Mix(lambda) => {
            let mut mass: BTreeMap<Vec<EdgeId>, f64> = BTreeMap::new();
            for (tree, p) in sampler.tree_law(SamplerKind::MaxEntropy)? {
                *mass.entry(tree).or_default() += lambda * p;
            }
            for (tree, p) in sampler.tree_law(SamplerKind::MatroidIntersection)? {
                *mass.entry(tree).or_default() += (1.0 - lambda) * p;
            }
            Ok(mass.into_iter().collect())
        }
    }
}

/// Trees of one piece with their probabilities.
type TreeLaw = Vec<(Vec<EdgeId>, f64)>;

/// Outcome law of every sampled node, in construction order.
fn node_laws(pipeline: &Pipeline, choice: SamplerChoice) -> Result<Vec<(NodeId, TreeLaw)>, SamplerError> {
    let mut laws = Vec::new();
    for node in pipeline.hierarchy().internal_nodes() {
        let law = match pipeline.plan(node.id) {
            PiecePlan::Leaf => continue,
            PiecePlan::Pairs(pairs) => {
                let p = 0.5f64.powi(pairs.len() as i32);
                (0..1u64 << pairs.len())
                    .map(|bits| {
                        let tree = pairs.iter().enumerate().map(|(i, pair)| pair[(bits >> i & 1) as usize]).collect();
                        (tree, p)
                    })
                    .collect()
            }
            PiecePlan::Paths(paths) => paths.iter().map(|path| (path.clone(), 1.0 / paths.len() as f64)).collect(),
            PiecePlan::Degree(sampler) => piece_law(sampler, choice)?,
        };
        laws.push((node.id, law));
    }
    Ok(laws)
}

/// Exact EAL probability of every edge under `choice`, or `None` when the
/// joint outcome space exceeds [`JOINT_LIMIT`].
pub fn eal_probabilities(detector: &EalDetector, choice: SamplerChoice) -> Result<Option<Vec<f64>>, SamplerError> {
    let pipeline = detector.pipeline();
    let laws = node_laws(pipeline, choice)?;
    let size = laws.iter().try_fold(1u64, |acc, (_, law)| acc.checked_mul(law.len() as u64));
    if size.is_none_or(|s| s > JOINT_LIMIT) {
        return Ok(None);
    }
    let m = pipeline.instance().edge_count();
    let mut probability = vec![0.0; m];
    let mut sample = TreeSample { edges: Vec::new(), in_tree: vec![false; m], pieces: Vec::new() };
    enumerate(&laws, 0, 1.0, &mut sample, &mut |sample, p| {
        let odd = detector.odd_sets(sample);
        for (acc, flag) in probability.iter_mut().zip(detector.detect(sample, &odd)) {
            if flag {
                *acc += p;
            }
        }
    });
    Ok(Some(probability))
}

fn enumerate(
    laws: &[(NodeId, TreeLaw)],
    depth: usize,
    p: f64,
    sample: &mut TreeSample,
    visit: &mut impl FnMut(&TreeSample, f64),
) {
    let Some((_, law)) = laws.get(depth) else {
        visit(sample, p);
        return;
    };
    for (tree, q) in law {
        tree.iter().for_each(|id| sample.in_tree[id.0] = true);
        enumerate(laws, depth + 1, p * q, sample, visit);
        tree.iter().for_each(|id| sample.in_tree[id.0] = false);
    }
}

/// Exact EAL rows against the table, then reduction rows for a plan whose
/// coins use the exact EAL probabilities.
pub fn eal_and_reduction_rows(pipeline: &Pipeline, choice: SamplerChoice) -> Result<Vec<StatRow>, HarnessError> {
    let (choice, optimum) = optimum_for(choice);
    let label = choice_label(choice);
    let detector = EalDetector::new(pipeline);
    let Some(eal) = eal_probabilities(&detector, choice)? else { return Ok(Vec::new()) };
    let mut rows = Vec::new();
    for (i, class) in detector.classes().iter().enumerate() {
        if let Some(bound) = class.kind.eal_bound(choice.lambda()) {
            rows.push(
                StatRow::new(format!("exact_eal:{}", EdgeId(i)), Comparison::AtLeast, bound, eal[i], 0.0)
                    .sampler(label.as_str())
                    .class(class.kind.name()),
            );
        }
    }
    let estimates = EalEstimates::from_probabilities(choice, &eal);
    let plan = JoinPlan::new(pipeline, optimum.params, &estimates)?;
    for (i, class) in plan.classes().iter().enumerate() {
        if class.kind == EdgeKind::Anchor {
            continue;
        }
        let id = EdgeId(i);
        let reduced = eal[i] * plan.coin_probability(id);
        let bound = plan.reduction_bound(id);
        rows.push(
            StatRow::new(format!("exact_reduction:{id}"), Comparison::Equal, bound, reduced, bound * 1e-9)
                .sampler(label.as_str())
                .class(class.kind.name()),
        );
    }
    Ok(rows)
}

/// Checks `y` against the spanning-tree polytope of the piece interior and
/// the capacity-one parts, in thirds. Returns the first violated constraint.
pub fn polytope_violation(model: &ShiftModel, y: &[(EdgeId, Thirds)], parts: &[Vec<EdgeId>]) -> Option<String> {
    let piece = model.piece();
    let k = piece.interior_size();
    let masks: Vec<(u32, u32)> = y
        .iter()
        .map(|&(id, t)| {
            let e = piece.graph.find(id).expect("interior edge");
            ((1 << (e.u - 1)) | (1 << (e.v - 1)), u32::from(t.0))
        })
        .collect();
    let total: u32 = masks.iter().map(|(_, t)| t).sum();
    if total != 3 * (k as u32 - 1) {
        return Some(format!("total {total}/3 for {k} interior vertices"));
    }
    for set in 1u32..(1 << k) {
        let size = set.count_ones();
        if size < 2 {
            continue;
        }
        let inside: u32 = masks.iter().filter(|(m, _)| m & set == *m).map(|(_, t)| t).sum();
        if inside > 3 * (size - 1) {
            return Some(format!("vertex set {set:#b} spans {inside}/3"));
        }
    }
    for part in parts {
        let load: u32 = part.iter().filter_map(|id| y.iter().find(|(e, _)| e == id)).map(|(_, t)| u32::from(t.0)).sum();
        if load > 3 {
            return Some(format!("part {part:?} carries {load}/3"));
        }
    }
    None
}

/// Exhaustive polytope membership and exact shifted means of one piece.
pub fn shift_rows(name: &str, model: &ShiftModel) -> Result<Vec<StatRow>, SamplerError> {
    let piece = model.piece();
    let branches = model.branches()?;
    let mut rows = Vec::new();
    if piece.interior_size() <= POLYTOPE_INTERIOR_LIMIT {
        let violations =
            branches.iter().filter_map(|(s, _)| polytope_violation(model, &s.y, &s.parts)).collect::<Vec<_>>();
        let mut row = exact_row(
            format!("shift_in_polytope:{name}:{}_branches", branches.len()),
            violations.is_empty(),
            (branches.len() - violations.len()) as f64 / branches.len() as f64,
            1.0,
        );
        if let Some(first) = violations.first() {
            row.name = format!("{}:{first}", row.name);
        }
        rows.push(row.class("polytope"));
    }
    let mut mean = vec![Rational::default(); piece.internal.len()];
    for (shift, p) in &branches {
        for (acc, (_, t)) in mean.iter_mut().zip(&shift.y) {
            *acc += p * t.to_rational();
        }
    }
    let half = ratio(1, 2);
    for (id, m) in piece.internal.iter().zip(mean) {
        let row = exact_row(format!("exact_shift_mean:{name}:{id}"), m == half, to_f64(&m), 0.5);
        rows.push(row.class(boundary_class(piece, *id)));
    }
    Ok(rows)
}

/// Every exact check that fits the size limits.
pub fn oracle_check(pipeline: &Pipeline) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::default();
    report.rows.extend(marginal_rows(pipeline)?);
    report.rows.extend(correlation_rows(pipeline)?);
    for (node, sampler) in pipeline.degree_samplers() {
        report.rows.extend(shift_rows(&format!("node{node}"), sampler.model())?);
    }
    let (lambda_choice, _) = optimum_for(SamplerChoice::Mix(0.471496));
    for choice in [SamplerChoice::MatroidIntersection, SamplerChoice::MaxEntropy, lambda_choice] {
        report.rows.extend(eal_and_reduction_rows(pipeline, choice)?);
    }
    Ok(report)
}
