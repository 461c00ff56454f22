//! Parity correction on top of a sampled root tree: which edges are even at
//! last, which of them get reduced, how each reduction is paid for by edges
//! further down the hierarchy, and the resulting fractional and integral
//! joins and tour.

use crate::graph::{EdgeId, VertexSet};
use crate::hierarchy::{min_cuts_via_hierarchy, CutHierarchy, LocalPiece, NodeId, NodeKind};
use crate::instance::Instance;
use crate::params::{ExactProbabilities, ReductionParams};
use crate::pipeline::{trial_rng, Pipeline, PipelineError, SamplerChoice, TreeSample};
use crate::rational::{ratio, to_f64, Rational};
use crate::trees::piece::cycle_pairs;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Largest odd-vertex set the exact matching handles.
pub const ODD_SET_LIMIT: usize = 20;

/// Stream index for coin flips; piece streams use node ids.
const COIN_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum JoinError {
    #[error("estimated EAL probability {estimate} of {edge} is below its bound {bound}")]
    EstimateBelowBound { edge: EdgeId, estimate: f64, bound: f64 },
    #[error("charge routing at node {node} cannot place all demand")]
    FlowInfeasible { node: NodeId },
    #[error("join value {value} on {edge} is below 1/6")]
    EdgeBelowFloor { edge: EdgeId, value: String },
    #[error("odd cut {shore:?} has join value {value} < 1")]
    FeasibilityViolation { shore: VertexSet, value: String },
    #[error("{size} odd vertices exceed the exact matching limit {limit}")]
    OddSetTooLarge { size: usize, limit: usize },
    #[error("the charge ledger needs a denominator wider than 96 bits")]
    ScaleOverflow,
    #[error("edge costs have no common denominator within 64 bits")]
    CostScale,
    #[error("estimates were taken with mixing probability {estimates}, parameters assume {params}")]
    SamplerMismatch { estimates: f64, params: f64 },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Role of an edge in the reduction scheme.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Edge at the root vertex; internal to no piece and never reduced.
    Anchor,
    Cycle,
    /// Degree edge with no endpoint next to the outside.
    Special,
    /// Degree edge with exactly one endpoint next to the outside.
    HalfSpecial,
    OtherDegree,
    K5Degree,
}

impl EdgeKind {
    pub const REDUCIBLE: [EdgeKind; 5] =
        [EdgeKind::Special, EdgeKind::HalfSpecial, EdgeKind::OtherDegree, EdgeKind::K5Degree, EdgeKind::Cycle];

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Anchor => "anchor",
            EdgeKind::Cycle => "cycle",
            EdgeKind::Special => "special",
            EdgeKind::HalfSpecial => "half_special",
            EdgeKind::OtherDegree => "other_degree",
            EdgeKind::K5Degree => "k5_degree",
        }
    }

    pub fn is_degree(self) -> bool {
        matches!(self, EdgeKind::Special | EdgeKind::HalfSpecial | EdgeKind::OtherDegree | EdgeKind::K5Degree)
    }

    /// Amount taken off an edge of this kind when it is reduced.
    pub fn reduction(self, params: &ReductionParams) -> Rational {
        match self {
            EdgeKind::Anchor => Rational::zero(),
            EdgeKind::Cycle => params.beta.clone(),
            EdgeKind::K5Degree => params.gamma.clone(),
            _ => params.tau.clone(),
        }
    }

    /// Demand an external edge of this kind places on a degree piece.
    fn demand(self, params: &ReductionParams) -> Rational {
        match self {
            EdgeKind::Cycle => &params.beta / BigInt::from(2),
            other => other.reduction(params),
        }
    }

    /// Target reduction probability, which is also the EAL lower bound the
    /// coins flatten to.
    pub fn reduction_probability(self, probs: &ExactProbabilities) -> Option<Rational> {
        match self {
            EdgeKind::Anchor => None,
            EdgeKind::Special => Some(probs.p_sp.clone()),
            EdgeKind::HalfSpecial => Some(probs.p_hs.clone()),
            _ => Some(probs.p.clone()),
        }
    }

    /// Proven lower bound on the EAL probability when degree pieces use
    /// maximum entropy with probability `lambda`.
    pub fn eal_bound(self, lambda: f64) -> Option<f64> {
        use crate::params::bounds::*;
        let (mi, me) = match self {
            EdgeKind::Anchor => return None,
            EdgeKind::Special => (MI_SPECIAL, ME_SPECIAL),
            EdgeKind::HalfSpecial => (MI_HALF_SPECIAL, ME_HALF_SPECIAL),
            _ => (MI_OTHER, ME_OTHER),
        };
        let f = |(n, d): (i64, i64)| n as f64 / d as f64;
        Some(lambda * f(me) + (1.0 - lambda) * f(mi))
    }
}

/// Where and how an edge is settled.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeClass {
    pub kind: EdgeKind,
    pub settled_at: Option<NodeId>,
    /// Endpoints in the local piece of `settled_at`.
    pub piece_ends: Option<(usize, usize)>,
    /// For cycle edges, the chain prefix and suffix shores on either side.
    pub canonical_cuts: Option<[VertexSet; 2]>,
}

/// Classifies every edge by the node it is settled at.
pub fn classify(h: &CutHierarchy, edge_count: usize) -> Vec<EdgeClass> {
    let anchor = EdgeClass { kind: EdgeKind::Anchor, settled_at: None, piece_ends: None, canonical_cuts: None };
    let mut out = vec![anchor; edge_count];
    for node in h.internal_nodes() {
        let piece = node.piece.as_ref().expect("internal nodes carry pieces");
        let boundary = piece.boundary();
        let k5 = piece.is_k5();
        let k = piece.interior_size();
        for &id in &piece.internal {
            let e = piece.graph.find(id).expect("internal edge");
            let kind = match node.kind {
                NodeKind::Cycle => EdgeKind::Cycle,
                _ if k5 => EdgeKind::K5Degree,
                _ => match usize::from(boundary.contains(e.u)) + usize::from(boundary.contains(e.v)) {
                    0 => EdgeKind::Special,
                    1 => EdgeKind::HalfSpecial,
                    _ => EdgeKind::OtherDegree,
                },
            };
            let canonical_cuts = (kind == EdgeKind::Cycle).then(|| {
                let i = e.u.min(e.v);
                [h.segment_label(node.id, 0..i), h.segment_label(node.id, i..k)]
            });
            out[id.0] = EdgeClass { kind, settled_at: Some(node.id), piece_ends: Some((e.u, e.v)), canonical_cuts };
        }
    }
    out
}

/// Fractions `x(e, f)` routing each external edge's demand onto internal
/// edges at its inside endpoint.
#[derive(Clone, Debug, Serialize)]
pub struct FlowAssignment {
    #[serde(serialize_with = "crate::rational::serialize")]
    pub capacity: Rational,
    /// `(external, internal, fraction)`; fractions of one external sum to one.
    #[serde(serialize_with = "serialize_fractions")]
    pub fractions: Vec<(EdgeId, EdgeId, Rational)>,
}

fn serialize_fractions<S: serde::Serializer>(
    fractions: &[(EdgeId, EdgeId, Rational)],
    serializer: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = serializer.serialize_seq(Some(fractions.len()))?;
    for (e, f, x) in fractions {
        seq.serialize_element(&(e.0, f.0, crate::rational::format_rational(x)))?;
    }
    seq.end()
}

impl FlowAssignment {
    /// Total demand-weighted load on an internal edge.
    pub fn load(&self, f: EdgeId, demands: &[(EdgeId, Rational)]) -> Rational {
        self.fractions
            .iter()
            .filter(|(_, g, _)| *g == f)
            .map(|(e, _, x)| {
                let b = &demands.iter().find(|(d, _)| d == e).expect("demand").1;
                b * x
            })
            .sum()
    }
}

/// Routes every demand `b_e` of an external edge onto the internal edges at
/// its inside endpoint with at most `capacity` per internal edge, by exact
/// maximum flow. `None` if not all demand fits.
pub fn bipartization_flow(
    piece: &LocalPiece,
    demands: &[(EdgeId, Rational)],
    capacity: &Rational,
) -> Option<FlowAssignment> {
    let demands: Vec<&(EdgeId, Rational)> = demands.iter().filter(|(_, b)| b.is_positive()).collect();
    let inner: Vec<EdgeId> = piece.internal.clone();
    let (source, sink) = (0, 1 + demands.len() + inner.len());
    let size = sink + 1;
    let mut cap = vec![vec![Rational::zero(); size]; size];
    for (i, (e, b)) in demands.iter().enumerate() {
        cap[source][1 + i] = b.clone();
        let inside = piece.graph.find(*e).expect("external edge").other(0);
        for (j, f) in inner.iter().enumerate() {
            if piece.graph.find(*f).expect("internal edge").touches(inside) {
                cap[1 + i][1 + demands.len() + j] = b.clone();
            }
        }
    }
    for j in 0..inner.len() {
        cap[1 + demands.len() + j][sink] = capacity.clone();
    }
    let flow = max_flow(&cap, source, sink);
    let total: Rational = demands.iter().map(|(_, b)| b.clone()).sum();
    let routed: Rational = (0..size).map(|v| flow[source][v].clone()).sum();
    if routed != total {
        return None;
    }
    let mut fractions = Vec::new();
    for (i, (e, b)) in demands.iter().enumerate() {
        for (j, f) in inner.iter().enumerate() {
            let amount = &flow[1 + i][1 + demands.len() + j];
            if amount.is_positive() {
                fractions.push((*e, *f, amount / b));
            }
        }
    }
    Some(FlowAssignment { capacity: capacity.clone(), fractions })
}

/// Edmonds-Karp on a dense capacity matrix; returns the flow on each arc.
fn max_flow(cap: &[Vec<Rational>], source: usize, sink: usize) -> Vec<Vec<Rational>> {
    let n = cap.len();
    let mut flow = vec![vec![Rational::zero(); n]; n];
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && &cap[u][v] - &flow[u][v] + &flow[v][u] > Rational::zero() {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            return flow;
        }
        let mut push: Option<Rational> = None;
        let mut v = sink;
        while v != source {
            let u = prev[v];
            let room = &cap[u][v] - &flow[u][v] + &flow[v][u];
            push = Some(match push {
                Some(p) if p < room => p,
                _ => room,
            });
            v = u;
        }
        let push = push.expect("augmenting path");
        let mut v = sink;
        while v != source {
            let u = prev[v];
            // Cancel reverse flow first.
            let cancel = if flow[v][u] < push { flow[v][u].clone() } else { push.clone() };
            flow[v][u] -= &cancel;
            flow[u][v] += &push - &cancel;
            v = u;
        }
    }
}

/// Even-at-last detection for every edge of a prepared instance.
pub struct EalDetector<'p> {
    pipeline: &'p Pipeline,
    classes: Vec<EdgeClass>,
    /// External partner pairs at the two chain ends of non-root cycle nodes.
    chain_ends: Vec<Option<[[EdgeId; 2]; 2]>>,
}

impl<'p> EalDetector<'p> {
    pub fn new(pipeline: &'p Pipeline) -> Self {
        let h = pipeline.hierarchy();
        let classes = classify(h, pipeline.instance().edge_count());
        let chain_ends = h
            .nodes()
            .iter()
            .map(|node| match (&node.piece, node.kind) {
                (Some(piece), NodeKind::Cycle) if node.id != h.root() => {
                    let pairs = cycle_pairs(piece, true);
                    Some([pairs[0], pairs[pairs.len() - 1]])
                }
                _ => None,
            })
            .collect();
        EalDetector { pipeline, classes, chain_ends }
    }

    pub fn pipeline(&self) -> &'p Pipeline {
        self.pipeline
    }

    pub fn classes(&self) -> &[EdgeClass] {
        &self.classes
    }

    /// Odd piece vertices of the restriction to every node; leaves map to
    /// the empty set.
    pub fn odd_sets(&self, sample: &TreeSample) -> Vec<VertexSet> {
        (0..self.pipeline.hierarchy().nodes().len()).map(|id| self.pipeline.odd_vertices(&sample.in_tree, id)).collect()
    }

    /// Whether a non-root cycle node's chain is crossed once at each end.
    fn chain_even(&self, node: NodeId, in_tree: &[bool]) -> bool {
        match &self.chain_ends[node] {
            None => true,
            Some(ends) => ends.iter().all(|pair| pair.iter().filter(|id| in_tree[id.0]).count() == 1),
        }
    }

    pub fn detect(&self, sample: &TreeSample, odd: &[VertexSet]) -> Vec<bool> {
        self.classes
            .iter()
            .map(|class| match (class.kind, class.settled_at, class.piece_ends) {
                (EdgeKind::Anchor, ..) => false,
                (EdgeKind::Cycle, Some(node), _) => self.chain_even(node, &sample.in_tree),
                (_, Some(node), Some((u, v))) => !odd[node].contains(u) && !odd[node].contains(v),
                _ => false,
            })
            .collect()
    }
}

/// Empirical EAL frequencies used to flatten reduction probabilities.
#[derive(Clone, Debug, Serialize)]
pub struct EalEstimates {
    pub choice: SamplerChoice,
    pub trials: u64,
    pub failures: u64,
    pub counts: Vec<u64>,
}

impl EalEstimates {
    pub fn probability(&self, id: EdgeId) -> f64 {
        self.counts[id.0] as f64 / (self.trials - self.failures).max(1) as f64
    }

    /// Samples `trials` trees on a seed stream disjoint from measured runs.
    pub fn calibrate(detector: &EalDetector, choice: SamplerChoice, trials: u64, seed: u64) -> Self {
        let seed = seed ^ 0xCA1B_0000_0000_0000;
        let m = detector.classes.len();
        let (counts, failures) = (0..trials)
            .into_par_iter()
            .fold(
                || (vec![0u64; m], 0u64),
                |(mut counts, mut failures), trial| {
                    match detector.pipeline.sample(choice, seed, trial) {
                        Ok(sample) => {
                            let odd = detector.odd_sets(&sample);
                            for (c, flag) in counts.iter_mut().zip(detector.detect(&sample, &odd)) {
                                *c += u64::from(flag);
                            }
                        }
                        Err(_) => failures += 1,
                    }
                    (counts, failures)
                },
            )
            .reduce(
                || (vec![0u64; m], 0u64),
                |(mut a, fa), (b, fb)| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    (a, fa + fb)
                },
            );
        EalEstimates { choice, trials, failures, counts }
    }

    /// Estimates equal to the given probabilities, as if known exactly.
    pub fn from_probabilities(choice: SamplerChoice, probabilities: &[f64]) -> Self {
        const RESOLUTION: u64 = 1 << 40;
        let counts = probabilities.iter().map(|p| (p * RESOLUTION as f64).round() as u64).collect();
        EalEstimates { choice, trials: RESOLUTION, failures: 0, counts }
    }
}

/// A charge paid to `target` on behalf of the reduced edge `source`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Charge {
    pub target: EdgeId,
    pub source: EdgeId,
    /// Numerator over the plan's scale.
    pub amount: i128,
}

/// Fractional join of one trial. Values are numerators over `scale`.
#[derive(Clone, Debug, Serialize)]
pub struct JoinSolution {
    pub scale: i128,
    pub z: Vec<i128>,
    pub eal: Vec<bool>,
    pub coin: Vec<Option<bool>>,
    pub reduction: Vec<i128>,
    pub charges: Vec<Charge>,
}

impl JoinSolution {
    pub fn value(&self, id: EdgeId) -> Rational {
        Rational::new(BigInt::from(self.z[id.0]), BigInt::from(self.scale))
    }

    pub fn reduced(&self, id: EdgeId) -> bool {
        self.reduction[id.0] > 0
    }

    /// Net decrease `1/4 - z_e` as a float.
    pub fn decrease(&self, id: EdgeId) -> f64 {
        (self.scale / 4 - self.z[id.0]) as f64 / self.scale as f64
    }

    /// Checks `z_e = 1/4 - reduction + charges` for every edge.
    pub fn ledger_balances(&self) -> bool {
        let mut expected: Vec<i128> = self.reduction.iter().map(|r| self.scale / 4 - r).collect();
        for c in &self.charges {
            expected[c.target.0] += c.amount;
        }
        expected == self.z
    }
}

#[derive(Clone, Debug)]
struct Share {
    external: EdgeId,
    inside: usize,
    /// `(internal edge, charge numerator when the external edge is reduced)`.
    charges: Vec<(EdgeId, i128)>,
}

/// `(external edge, inside vertex, exact charge per internal edge)`.
type RawShare = (EdgeId, usize, Vec<(EdgeId, Rational)>);

#[derive(Clone, Debug)]
enum Charging {
    None,
    /// Degree piece: charge internal edges at the odd inside endpoint.
    Vertex(Vec<Share>),
    /// Non-root cycle piece: external pairs at both chain ends, internal edges.
    Chain { ends: [[EdgeId; 2]; 2], inner: Vec<EdgeId> },
}

/// Everything a trial needs to turn a tree into a join.
pub struct JoinPlan<'p> {
    detector: EalDetector<'p>,
    params: ReductionParams,
    flows: Vec<Option<FlowAssignment>>,
    scale: i128,
    reduction: Vec<i128>,
    coin_probability: Vec<f64>,
    bound: Vec<f64>,
    estimate: Vec<f64>,
    coin_leader: Vec<EdgeId>,
    charging: Vec<Charging>,
    cuts: Vec<(VertexSet, Vec<EdgeId>)>,
}

fn to_scaled(value: &Rational, scale: &BigInt) -> i128 {
    let scaled = value * Rational::from_integer(scale.clone());
    debug_assert!(scaled.is_integer());
    scaled.to_integer().to_i128().expect("scaled value fits")
}

impl<'p> JoinPlan<'p> {
    pub fn new(pipeline: &'p Pipeline, params: ReductionParams, estimates: &EalEstimates) -> Result<Self, JoinError> {
        let lambda = to_f64(&params.lambda);
        if (estimates.choice.lambda() - lambda).abs() > 1e-9 {
            return Err(JoinError::SamplerMismatch { estimates: estimates.choice.lambda(), params: lambda });
        }
        let detector = EalDetector::new(pipeline);
        let h = pipeline.hierarchy();
        let classes = detector.classes.clone();
        let m = classes.len();

        // Exact routing fractions per node, before choosing the scale.
        let mut flows = vec![None; h.nodes().len()];
        let mut raw_shares: Vec<Vec<RawShare>> = vec![Vec::new(); h.nodes().len()];
        for node in h.internal_nodes().filter(|n| n.kind == NodeKind::Degree) {
            let piece = node.piece.as_ref().expect("piece");
            let externals: Vec<EdgeId> =
                piece.external.iter().copied().filter(|id| classes[id.0].kind != EdgeKind::Anchor).collect();
            let inside = |e: EdgeId| piece.graph.find(e).expect("external").other(0);
            if piece.is_k5() {
                for &e in &externals {
                    let u = inside(e);
                    let at_u: Vec<(EdgeId, Rational)> = piece
                        .internal
                        .iter()
                        .filter(|f| piece.graph.find(**f).expect("internal").touches(u))
                        .map(|&f| (f, ratio(1, 3)))
                        .collect();
                    raw_shares[node.id].push((e, u, at_u));
                }
                continue;
            }
            let demands: Vec<(EdgeId, Rational)> =
                externals.iter().map(|&e| (e, classes[e.0].kind.demand(&params))).collect();
            if demands.iter().all(|(_, b)| b.is_zero()) {
                continue;
            }
            let capacity = demands
                .iter()
                .map(|(e, _)| match classes[e.0].kind {
                    EdgeKind::Cycle => &params.beta / BigInt::from(4),
                    kind => kind.reduction(&params) / BigInt::from(2),
                })
                .max()
                .expect("non-empty");
            let flow = bipartization_flow(piece, &demands, &capacity).ok_or(JoinError::FlowInfeasible { node: node.id })?;
            for &e in &externals {
                let at_u: Vec<(EdgeId, Rational)> =
                    flow.fractions.iter().filter(|(d, _, _)| *d == e).map(|(_, f, x)| (*f, x.clone())).collect();
                raw_shares[node.id].push((e, inside(e), at_u));
            }
            flows[node.id] = Some(flow);
        }

        // Common denominator of every quantity the ledger can produce.
        let mut scale = BigInt::from(12);
        let amounts: Vec<Rational> = classes.iter().map(|c| c.kind.reduction(&params)).collect();
        for kind in EdgeKind::REDUCIBLE {
            scale = scale.lcm(&(kind.reduction(&params).denom() * BigInt::from(2)));
        }
        for shares in &raw_shares {
            for (e, _, list) in shares {
                for (_, x) in list {
                    scale = scale.lcm((&amounts[e.0] * x).denom());
                }
            }
        }
        if scale.bits() > 96 {
            return Err(JoinError::ScaleOverflow);
        }
        let scale_i = scale.to_i128().expect("checked width");

        let charging = h
            .nodes()
            .iter()
            .map(|node| match (&node.piece, node.kind) {
                (Some(_), NodeKind::Degree) => Charging::Vertex(
                    raw_shares[node.id]
                        .iter()
                        .map(|(e, u, list)| Share {
                            external: *e,
                            inside: *u,
                            charges: list.iter().map(|(f, x)| (*f, to_scaled(&(&amounts[e.0] * x), &scale))).collect(),
                        })
                        .collect(),
                ),
                (Some(piece), NodeKind::Cycle) => match detector.chain_ends[node.id] {
                    Some(ends) => Charging::Chain { ends, inner: piece.internal.clone() },
                    None => Charging::None,
                },
                _ => Charging::None,
            })
            .collect();

        let probs = params.probabilities();
        let mut coin_leader: Vec<EdgeId> = (0..m).map(EdgeId).collect();
        for node in h.internal_nodes().filter(|n| n.kind == NodeKind::Cycle) {
            for [a, b] in cycle_pairs(node.piece.as_ref().expect("piece"), false) {
                coin_leader[b.0] = a.min(b);
                coin_leader[a.0] = a.min(b);
            }
        }
        let bound: Vec<f64> = classes
            .iter()
            .map(|c| c.kind.reduction_probability(&probs).map_or(0.0, |p| to_f64(&p)))
            .collect();
        let estimate: Vec<f64> = (0..m).map(|i| estimates.probability(EdgeId(i))).collect();
        let coin_probability = bound.iter().zip(&estimate).map(|(b, p)| if *b == 0.0 { 0.0 } else { b / p }).collect();
        let reduction = amounts.iter().map(|a| to_scaled(a, &scale)).collect();

        let n = pipeline.instance().vertex_count();
        let g = pipeline.instance().graph();
        let cuts = min_cuts_via_hierarchy(h)
            .into_iter()
            .filter(|s| !s.is_empty() && s.len() < n)
            .map(|s| (s, g.cut_edges(s)))
            .collect();

        Ok(JoinPlan {
            detector,
            params,
            flows,
            scale: scale_i,
            reduction,
            coin_probability,
            bound,
            estimate,
            coin_leader,
            charging,
            cuts,
        })
    }

    pub fn detector(&self) -> &EalDetector<'p> {
        &self.detector
    }

    pub fn classes(&self) -> &[EdgeClass] {
        &self.detector.classes
    }

    pub fn params(&self) -> &ReductionParams {
        &self.params
    }

    pub fn scale(&self) -> i128 {
        self.scale
    }

    pub fn flow(&self, node: NodeId) -> Option<&FlowAssignment> {
        self.flows[node].as_ref()
    }

    /// Probability that a reducible edge gets reduced when it is EAL.
    pub fn coin_probability(&self, id: EdgeId) -> f64 {
        self.coin_probability[id.0]
    }

    /// Flattened reduction probability of an edge.
    pub fn reduction_bound(&self, id: EdgeId) -> f64 {
        self.bound[id.0]
    }

    pub fn min_cuts(&self) -> &[(VertexSet, Vec<EdgeId>)] {
        &self.cuts
    }

    /// Reduces EAL edges whose coin comes up, then charges every reduction
    /// to the cuts it leaves short.
    pub fn build_join<R: Rng + ?Sized>(&self, sample: &TreeSample, rng: &mut R) -> Result<JoinSolution, JoinError> {
        let odd = self.detector.odd_sets(sample);
        let eal = self.detector.detect(sample, &odd);
        let m = eal.len();
        let mut coin: Vec<Option<bool>> = vec![None; m];
        for i in 0..m {
            if !eal[i] || self.reduction[i] == 0 {
                continue;
            }
            let leader = self.coin_leader[i].0;
            if leader != i {
                coin[i] = coin[leader];
                continue;
            }
            let p = self.coin_probability[i];
            if p > 1.0 {
                return Err(JoinError::EstimateBelowBound {
                    edge: EdgeId(i),
                    estimate: self.estimate[i],
                    bound: self.bound[i],
                });
            }
            coin[i] = Some(rng.gen::<f64>() < p);
        }
        let reduction: Vec<i128> =
            (0..m).map(|i| if coin[i] == Some(true) { self.reduction[i] } else { 0 }).collect();
        let mut z: Vec<i128> = reduction.iter().map(|r| self.scale / 4 - r).collect();
        let mut charges = Vec::new();
        for (node, plan) in self.charging.iter().enumerate() {
            match plan {
                Charging::None => {}
                Charging::Vertex(shares) => {
                    for share in shares {
                        if reduction[share.external.0] == 0 || !odd[node].contains(share.inside) {
                            continue;
                        }
                        for &(target, amount) in &share.charges {
                            z[target.0] += amount;
                            charges.push(Charge { target, source: share.external, amount });
                        }
                    }
                }
                Charging::Chain { ends, inner } => {
                    let deficit = |pair: &[EdgeId; 2]| -> i128 {
                        let crossing = pair.iter().filter(|id| sample.in_tree[id.0]).count();
                        if crossing % 2 == 1 {
                            0
                        } else {
                            pair.iter().map(|id| reduction[id.0]).sum()
                        }
                    };
                    let (front, back) = (deficit(&ends[0]), deficit(&ends[1]));
                    let side = if front >= back { &ends[0] } else { &ends[1] };
                    if front.max(back) == 0 {
                        continue;
                    }
                    for &target in inner {
                        for &source in side.iter().filter(|id| reduction[id.0] > 0) {
                            let amount = reduction[source.0] / 2;
                            z[target.0] += amount;
                            charges.push(Charge { target, source, amount });
                        }
                    }
                }
            }
        }
        Ok(JoinSolution { scale: self.scale, z, eal, coin, reduction, charges })
    }

    /// Checks `z_e >= 1/6` everywhere and `z(cut) >= 1` on every minimum cut
    /// the tree crosses an odd number of times.
    pub fn verify_join(&self, join: &JoinSolution, sample: &TreeSample) -> Result<(), JoinError> {
        let floor = join.scale / 6;
        for (i, &value) in join.z.iter().enumerate() {
            if value < floor {
                return Err(JoinError::EdgeBelowFloor { edge: EdgeId(i), value: join.value(EdgeId(i)).to_string() });
            }
        }
        for (shore, edges) in &self.cuts {
            let crossing = edges.iter().filter(|id| sample.in_tree[id.0]).count();
            if crossing % 2 == 1 {
                let value: i128 = edges.iter().map(|id| join.z[id.0]).sum();
                if value < join.scale {
                    let exact = Rational::new(BigInt::from(value), BigInt::from(join.scale));
                    return Err(JoinError::FeasibilityViolation { shore: *shore, value: exact.to_string() });
                }
            }
        }
        Ok(())
    }
}

/// Integer-scaled costs with their shortest-path closure.
pub struct CostModel {
    denominator: i64,
    cost: Vec<i64>,
    dist: Vec<Vec<i64>>,
    next: Vec<Vec<usize>>,
    cheapest: Vec<Vec<Option<EdgeId>>>,
    ends: Vec<(usize, usize)>,
}

/// An Euler walk of tree plus join, optionally shortcut to a Hamiltonian tour.
#[derive(Clone, Debug, Serialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub cost: f64,
}

impl CostModel {
    pub fn new(instance: &Instance) -> Result<Self, JoinError> {
        let den = crate::rational::common_denominator(instance.costs()).ok_or(JoinError::CostScale)?;
        let cost: Vec<i64> = instance
            .costs()
            .iter()
            .map(|c| (c * Rational::from_integer(den.into())).to_integer().to_i64().ok_or(JoinError::CostScale))
            .collect::<Result<_, _>>()?;
        let n = instance.vertex_count();
        let mut dist = vec![vec![i64::MAX / 4; n]; n];
        let mut next = vec![vec![usize::MAX; n]; n];
        let mut cheapest = vec![vec![None; n]; n];
        for v in 0..n {
            dist[v][v] = 0;
            next[v][v] = v;
        }
        let ends: Vec<(usize, usize)> = instance.graph().edges().iter().map(|e| (e.u, e.v)).collect();
        for (i, &(u, v)) in ends.iter().enumerate() {
            if cost[i] < dist[u][v] {
                dist[u][v] = cost[i];
                dist[v][u] = cost[i];
                next[u][v] = v;
                next[v][u] = u;
                cheapest[u][v] = Some(EdgeId(i));
                cheapest[v][u] = Some(EdgeId(i));
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] + dist[k][j] < dist[i][j] {
                        dist[i][j] = dist[i][k] + dist[k][j];
                        next[i][j] = next[i][k];
                    }
                }
            }
        }
        Ok(CostModel { denominator: den, cost, dist, next, cheapest, ends })
    }

    pub fn denominator(&self) -> i64 {
        self.denominator
    }

    /// Scaled cost of one edge.
    pub fn edge_cost(&self, id: EdgeId) -> i64 {
        self.cost[id.0]
    }

    pub fn to_f64(&self, scaled: i64) -> f64 {
        scaled as f64 / self.denominator as f64
    }

    /// Scaled `c(x)` times two, i.e. the total edge cost.
    pub fn total(&self) -> i64 {
        self.cost.iter().sum()
    }

    pub fn tree_cost(&self, edges: &[EdgeId]) -> i64 {
        edges.iter().map(|id| self.cost[id.0]).sum()
    }

    /// Scaled fractional cost as a numerator over `join.scale`.
    pub fn fractional_cost(&self, join: &JoinSolution) -> i128 {
        join.z.iter().zip(&self.cost).map(|(z, c)| z * *c as i128).sum()
    }

    /// Edges of a cheapest path between two vertices.
    pub fn path(&self, mut u: usize, v: usize) -> Vec<EdgeId> {
        let mut out = Vec::new();
        while u != v {
            let w = self.next[u][v];
            out.push(self.cheapest[u][w].expect("adjacent on a shortest path"));
            u = w;
        }
        out
    }

    /// Cheapest join of `odd`: a minimum perfect matching under path costs,
    /// by dynamic programming over subsets.
    pub fn min_join(&self, odd: &[usize]) -> Result<(i64, Vec<EdgeId>), JoinError> {
        let k = odd.len();
        if k > ODD_SET_LIMIT {
            return Err(JoinError::OddSetTooLarge { size: k, limit: ODD_SET_LIMIT });
        }
        if k == 0 {
            return Ok((0, Vec::new()));
        }
        let full = (1usize << k) - 1;
        let mut best = vec![i64::MAX; 1 << k];
        let mut partner = vec![0u8; 1 << k];
        best[0] = 0;
        for mask in 1..=full {
            if mask.count_ones() % 2 == 1 {
                continue;
            }
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            let mut bits = rest;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let sub = best[rest & !(1 << j)];
                if sub != i64::MAX {
                    let value = sub + self.dist[odd[i]][odd[j]];
                    if value < best[mask] {
                        best[mask] = value;
                        partner[mask] = j as u8;
                    }
                }
            }
        }
        let mut edges = Vec::new();
        let mut mask = full;
        while mask != 0 {
            let i = mask.trailing_zeros() as usize;
            let j = partner[mask] as usize;
            edges.extend(self.path(odd[i], odd[j]));
            mask &= !(1 << i) & !(1 << j);
        }
        Ok((best[full], edges))
    }

    /// Euler walk over `edges` from vertex 0, shortcut to first visits when
    /// asked; the cost of a shortcut step is the path distance.
    pub fn tour(&self, edges: &[EdgeId], shortcut: bool) -> Tour {
        let n = self.dist.len();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (slot, id) in edges.iter().enumerate() {
            let (u, v) = self.ends[id.0];
            adjacency[u].push((v, slot));
            adjacency[v].push((u, slot));
        }
        let mut used = vec![false; edges.len()];
        let mut walk = Vec::with_capacity(edges.len() + 1);
        let mut stack = vec![0usize];
        while let Some(&v) = stack.last() {
            match adjacency[v].pop() {
                Some((w, slot)) if !used[slot] => {
                    used[slot] = true;
                    stack.push(w);
                }
                Some(_) => {}
                None => {
                    walk.push(v);
                    stack.pop();
                }
            }
        }
        if !shortcut {
            let cost = self.to_f64(self.tree_cost(edges));
            return Tour { order: walk, cost };
        }
        let mut seen = vec![false; n];
        let mut order: Vec<usize> = walk.into_iter().filter(|&v| !std::mem::replace(&mut seen[v], true)).collect();
        order.push(order[0]);
        let cost = order.windows(2).map(|w| self.dist[w[0]][w[1]]).sum();
        Tour { order, cost: self.to_f64(cost) }
    }
}

/// Odd-degree vertices of an edge set.
pub fn odd_vertices(instance: &Instance, edges: &[EdgeId]) -> Vec<usize> {
    let mut parity = vec![false; instance.vertex_count()];
    for &id in edges {
        let e = instance.edge(id);
        parity[e.u] ^= true;
        parity[e.v] ^= true;
    }
    (0..parity.len()).filter(|&v| parity[v]).collect()
}

/// One output row of a measured run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub tree_cost: f64,
    pub fractional_join_cost: f64,
    pub integral_join_cost: f64,
    pub tour_cost: f64,
    pub ratio_to_cx: f64,
}

impl TrialRow {
    pub const HEADER: &'static str = "trial,seed,tree_cost,fractional_join_cost,integral_join_cost,tour_cost,ratio_to_cx";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.tree_cost,
            self.fractional_join_cost,
            self.integral_join_cost,
            self.tour_cost,
            self.ratio_to_cx
        )
    }
}

/// Everything one trial produced.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub sample: TreeSample,
    pub join: JoinSolution,
    pub row: TrialRow,
    /// Whether the integral join was no dearer than the fractional one.
    pub integral_within_fractional: bool,
}

/// Why a trial produced no row.
#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Join(#[from] JoinError),
}

/// Samples a tree, builds and verifies its join, and prices the tour.
pub fn run_trial(
    plan: &JoinPlan,
    costs: &CostModel,
    choice: SamplerChoice,
    seed: u64,
    trial: u64,
    shortcut: bool,
) -> Result<TrialOutcome, TrialError> {
    let pipeline = plan.detector.pipeline;
    let sample = pipeline.sample(choice, seed, trial)?;
    let join = plan.build_join(&sample, &mut trial_rng(seed, trial, COIN_STREAM))?;
    plan.verify_join(&join, &sample)?;
    let odd = odd_vertices(pipeline.instance(), &sample.edges);
    let (integral, join_edges) = costs.min_join(&odd)?;
    let tree = costs.tree_cost(&sample.edges);
    let fractional = costs.fractional_cost(&join);
    let walk: Vec<EdgeId> = sample.edges.iter().chain(&join_edges).copied().collect();
    let tour = costs.tour(&walk, shortcut);
    let cx = costs.to_f64(costs.total()) / 2.0;
    let row = TrialRow {
        trial,
        seed,
        tree_cost: costs.to_f64(tree),
        fractional_join_cost: fractional as f64 / join.scale as f64 / costs.denominator as f64,
        integral_join_cost: costs.to_f64(integral),
        tour_cost: tour.cost,
        ratio_to_cx: if cx > 0.0 { tour.cost / cx } else { f64::NAN },
    };
    let integral_within_fractional = integral as i128 * join.scale <= fractional;
    Ok(TrialOutcome { sample, join, row, integral_within_fractional })
}

impl JoinSolution {
    /// Exact `z` values as rationals, for reports.
    pub fn values(&self) -> Vec<Rational> {
        (0..self.z.len()).map(|i| self.value(EdgeId(i))).collect()
    }
}
