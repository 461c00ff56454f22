//! Assembly of a random root tree: every hierarchy piece samples its
//! interior independently and the union is a spanning tree of `V - r0` plus
//! two edges at `r0`.

use crate::error::SamplerError;
use crate::graph::{is_spanning_tree, EdgeId, VertexSet};
use crate::hierarchy::{build_hierarchy, CutHierarchy, HierarchyError, NodeId, NodeKind};
use crate::instance::{Instance, ROOT};
use crate::shift::ShiftedSolution;
use crate::trees::piece::{cycle_pairs, k5_paths, DegreePieceSampler, SamplerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("sampler failed at node {node}: {source}")]
    Sampler { node: NodeId, source: SamplerError },
    #[error("assembled edges do not form a root tree: {0}")]
    Assembly(String),
}

/// How degree pieces pick their tree law.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SamplerChoice {
    MatroidIntersection,
    MaxEntropy,
    /// Maximum entropy with the given probability, otherwise matroid
    /// intersection, drawn independently per piece.
    Mix(f64),
}

impl SamplerChoice {
    /// Probability of using the maximum-entropy law.
    pub fn lambda(self) -> f64 {
        match self {
            SamplerChoice::MatroidIntersection => 0.0,
            SamplerChoice::MaxEntropy => 1.0,
            SamplerChoice::Mix(lambda) => lambda,
        }
    }

    fn pick<R: Rng + ?Sized>(self, rng: &mut R) -> SamplerKind {
        match self {
            SamplerChoice::MatroidIntersection => SamplerKind::MatroidIntersection,
            SamplerChoice::MaxEntropy => SamplerKind::MaxEntropy,
            SamplerChoice::Mix(lambda) => {
                if rng.gen::<f64>() < lambda {
                    SamplerKind::MaxEntropy
                } else {
                    SamplerKind::MatroidIntersection
                }
            }
        }
    }
}

/// Generator for one independent stream of one trial.
pub fn trial_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    // splitmix64 finaliser
    state = (state ^ (state >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    state = (state ^ (state >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    state ^= state >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(state);
    rng.set_stream(stream);
    rng
}

/// Sampling rule of one hierarchy node.
pub enum PiecePlan {
    Leaf,
    /// One uniform edge from each partner pair.
    Pairs(Vec<[EdgeId; 2]>),
    /// A uniform Hamiltonian path of the inner K4.
    Paths(Vec<Vec<EdgeId>>),
    Degree(Box<DegreePieceSampler>),
}

/// Edges of one local piece with their piece endpoints, sorted by id.
#[derive(Clone, Debug)]
pub struct PieceIndex {
    pub edges: Vec<(EdgeId, usize, usize)>,
    pub vertex_count: usize,
}

impl PieceIndex {
    pub fn endpoints(&self, id: EdgeId) -> Option<(usize, usize)> {
        self.edges.binary_search_by_key(&id, |&(e, _, _)| e).ok().map(|i| (self.edges[i].1, self.edges[i].2))
    }
}

/// What one node contributed to a sample.
#[derive(Clone, Debug, Serialize)]
pub struct PieceRecord {
    pub node: NodeId,
    pub tree: Vec<EdgeId>,
    pub sampler: Option<SamplerKind>,
    pub shift: Option<ShiftedSolution>,
}

/// An assembled root tree.
#[derive(Clone, Debug, Serialize)]
pub struct TreeSample {
    pub edges: Vec<EdgeId>,
    #[serde(skip)]
    pub in_tree: Vec<bool>,
    pub pieces: Vec<PieceRecord>,
}

impl TreeSample {
    pub fn contains(&self, id: EdgeId) -> bool {
        self.in_tree[id.0]
    }
}

/// Edges of a sample inside one local piece and the piece vertices of odd
/// degree among them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Restriction {
    pub edges: Vec<EdgeId>,
    pub odd: VertexSet,
}

/// An instance prepared for repeated sampling.
pub struct Pipeline {
    instance: Instance,
    hierarchy: CutHierarchy,
    plans: Vec<PiecePlan>,
    indices: Vec<Option<PieceIndex>>,
}

impl Pipeline {
    pub fn new(instance: &Instance) -> Result<Self, PipelineError> {
        let hierarchy = build_hierarchy(instance)?;
        let mut plans = Vec::with_capacity(hierarchy.nodes().len());
        let mut indices = Vec::with_capacity(hierarchy.nodes().len());
        for node in hierarchy.nodes() {
            let Some(piece) = &node.piece else {
                plans.push(PiecePlan::Leaf);
                indices.push(None);
                continue;
            };
            let plan = match node.kind {
                NodeKind::Cycle => PiecePlan::Pairs(cycle_pairs(piece, node.id == hierarchy.root())),
                NodeKind::Degree if piece.is_k5() => PiecePlan::Paths(k5_paths(piece)),
                NodeKind::Degree => PiecePlan::Degree(Box::new(
                    DegreePieceSampler::new(piece).map_err(|source| PipelineError::Sampler { node: node.id, source })?,
                )),
                NodeKind::Leaf => PiecePlan::Leaf,
            };
            plans.push(plan);
            let mut edges: Vec<(EdgeId, usize, usize)> = piece.graph.edges().iter().map(|e| (e.id, e.u, e.v)).collect();
            edges.sort_unstable();
            indices.push(Some(PieceIndex { edges, vertex_count: piece.graph.vertex_count() }));
        }
        Ok(Pipeline { instance: instance.clone(), hierarchy, plans, indices })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn hierarchy(&self) -> &CutHierarchy {
        &self.hierarchy
    }

    pub fn plan(&self, node: NodeId) -> &PiecePlan {
        &self.plans[node]
    }

    pub fn piece_index(&self, node: NodeId) -> Option<&PieceIndex> {
        self.indices[node].as_ref()
    }

    /// Degree pieces sampled by the shift-based samplers.
    pub fn degree_samplers(&self) -> impl Iterator<Item = (NodeId, &DegreePieceSampler)> + '_ {
        self.plans.iter().enumerate().filter_map(|(id, plan)| match plan {
            PiecePlan::Degree(s) => Some((id, s.as_ref())),
            _ => None,
        })
    }

    /// Samples trial `trial` of the run seeded by `seed`; each node draws from
    /// its own stream.
    pub fn sample(&self, choice: SamplerChoice, seed: u64, trial: u64) -> Result<TreeSample, PipelineError> {
        self.sample_with(choice, |node| trial_rng(seed, trial, node as u64))
    }

    pub fn sample_with(
        &self,
        choice: SamplerChoice,
        mut rng_for: impl FnMut(NodeId) -> ChaCha8Rng,
    ) -> Result<TreeSample, PipelineError> {
        let m = self.instance.edge_count();
        let mut in_tree = vec![false; m];
        let mut pieces = Vec::new();
        // Construction order lists children before parents.
        for node in self.hierarchy.internal_nodes() {
            let mut rng = rng_for(node.id);
            let record = match &self.plans[node.id] {
                PiecePlan::Leaf => continue,
                PiecePlan::Pairs(pairs) => PieceRecord {
                    node: node.id,
                    tree: pairs.iter().map(|pair| pair[rng.gen_range(0..2)]).collect(),
                    sampler: None,
                    shift: None,
                },
                PiecePlan::Paths(paths) => PieceRecord {
                    node: node.id,
                    tree: paths[rng.gen_range(0..paths.len())].clone(),
                    sampler: None,
                    shift: None,
                },
                PiecePlan::Degree(sampler) => {
                    let kind = choice.pick(&mut rng);
                    let draw =
                        sampler.draw(kind, &mut rng).map_err(|source| PipelineError::Sampler { node: node.id, source })?;
                    PieceRecord { node: node.id, tree: draw.tree, sampler: Some(kind), shift: Some(draw.shift) }
                }
            };
            for id in &record.tree {
                in_tree[id.0] = true;
            }
            pieces.push(record);
        }
        let edges: Vec<EdgeId> = (0..m).filter(|&i| in_tree[i]).map(EdgeId).collect();
        let sample = TreeSample { edges, in_tree, pieces };
        self.check_root_tree(&sample)?;
        Ok(sample)
    }

    fn check_root_tree(&self, sample: &TreeSample) -> Result<(), PipelineError> {
        let n = self.instance.vertex_count();
        if sample.edges.len() != n {
            return Err(PipelineError::Assembly(format!("{} edges for {n} vertices", sample.edges.len())));
        }
        let ends: Vec<(usize, usize)> = sample
            .edges
            .iter()
            .map(|&id| {
                let e = self.instance.edge(id);
                (e.u, e.v)
            })
            .collect();
        let at_root = ends.iter().filter(|(u, v)| *u == ROOT || *v == ROOT).count();
        if at_root != 2 {
            return Err(PipelineError::Assembly(format!("root has degree {at_root}")));
        }
        // Relabel V - r0 to 0..n-1 and check the rest is a spanning tree.
        let shift = |v: usize| if v > ROOT { v - 1 } else { v };
        let rest = ends.iter().filter(|(u, v)| *u != ROOT && *v != ROOT).map(|&(u, v)| (shift(u), shift(v)));
        if !is_spanning_tree(n - 1, rest) {
            return Err(PipelineError::Assembly("edges away from the root are not a spanning tree".into()));
        }
        Ok(())
    }

    /// The sample seen inside the local piece of `node`.
    pub fn restrict(&self, sample: &TreeSample, node: NodeId) -> Option<Restriction> {
        let index = self.indices[node].as_ref()?;
        let mut odd = VertexSet::EMPTY;
        let mut edges = Vec::new();
        for &(id, u, v) in &index.edges {
            if sample.in_tree[id.0] {
                edges.push(id);
                odd = VertexSet(odd.0 ^ (1 << u) ^ (1 << v));
            }
        }
        Some(Restriction { edges, odd })
    }

    /// Piece vertices of odd degree in the restriction to `node`.
    pub fn odd_vertices(&self, in_tree: &[bool], node: NodeId) -> VertexSet {
        let Some(index) = &self.indices[node] else { return VertexSet::EMPTY };
        let mut bits = 0u64;
        for &(id, u, v) in &index.edges {
            if in_tree[id.0] {
                bits ^= (1 << u) ^ (1 << v);
            }
        }
        VertexSet(bits)
    }
}
