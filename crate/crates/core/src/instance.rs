//! Half-integral instances: a 4-regular, 4-edge-connected multigraph where
//! every edge carries LP value 1/2, plus exact edge costs.
//!
//! File format (0-based vertices, `#` starts a comment):
//!
//! ```text
//! htsp <n> <m>
//! <u> <v> <cost>     # m lines, duplicates are parallel edges
//! ```

use crate::graph::{Edge, EdgeId, MultiGraph};
use crate::rational::{format_rational, parse_rational, ratio, Rational};
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Vertex 0 is the designated root, joined by two parallel edges to each of
/// vertices 1 and 2.
pub const ROOT: usize = 0;
pub const ROOT_LEFT: usize = 1;
pub const ROOT_RIGHT: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vertex {vertex} has degree {degree}, expected 4")]
    Degree { vertex: usize, degree: usize },
    #[error("support graph is not 4-edge-connected")]
    Connectivity,
    #[error("vertices 0, 1, 2 do not form the root triple: {0}")]
    SpecialTriple(String),
}

/// How strictly `parse` checks the root triple.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ParseMode {
    /// Require vertices 0, 1, 2 to form the root triple.
    Strict,
    /// Accept any 4-regular, 4-edge-connected support.
    Lenient,
}

#[derive(Clone, Debug)]
pub struct Instance {
    graph: MultiGraph,
    costs: Vec<Rational>,
}

impl Instance {
    /// Builds and validates an instance. Edge ids are positions in `edges`.
    pub fn new(n: usize, edges: Vec<(usize, usize, Rational)>, mode: ParseMode) -> Result<Self, InstanceError> {
        let pairs: Vec<_> = edges.iter().map(|(u, v, _)| (*u, *v)).collect();
        let costs = edges.into_iter().map(|(_, _, c)| c).collect();
        let instance = Instance { graph: MultiGraph::from_pairs(n, &pairs), costs };
        instance.validate(mode)?;
        Ok(instance)
    }

    /// Unit-cost instance over the given edge list.
    pub fn with_unit_costs(n: usize, pairs: &[(usize, usize)], mode: ParseMode) -> Result<Self, InstanceError> {
        Self::new(n, pairs.iter().map(|&(u, v)| (u, v, ratio(1, 1))).collect(), mode)
    }

    pub fn parse(text: &str, mode: ParseMode) -> Result<Self, InstanceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, raw)| (i + 1, raw.split('#').next().unwrap_or("").trim()))
            .filter(|(_, body)| !body.is_empty());
        let err = |line: usize, message: &str| InstanceError::Parse { line, message: message.to_string() };

        let (line, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let fields: Vec<_> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "htsp" {
            return Err(err(line, "expected `htsp <n> <m>`"));
        }
        let n: usize = fields[1].parse().map_err(|_| err(line, "bad vertex count"))?;
        let m: usize = fields[2].parse().map_err(|_| err(line, "bad edge count"))?;

        let mut edges = Vec::with_capacity(m);
        for (line, body) in lines.by_ref() {
            if edges.len() == m {
                return Err(err(line, "more edge lines than declared"));
            }
            let fields: Vec<_> = body.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(line, "expected `<u> <v> <cost>`"));
            }
            let u: usize = fields[0].parse().map_err(|_| err(line, "bad endpoint"))?;
            let v: usize = fields[1].parse().map_err(|_| err(line, "bad endpoint"))?;
            if u >= n || v >= n {
                return Err(err(line, "endpoint out of range"));
            }
            if u == v {
                return Err(err(line, "self-loop"));
            }
            let cost = parse_rational(fields[2]).ok_or_else(|| err(line, "bad cost"))?;
            if cost.is_negative() {
                return Err(err(line, "negative cost"));
            }
            edges.push((u, v, cost));
        }
        if edges.len() != m {
            return Err(err(line, "fewer edge lines than declared"));
        }
        Self::new(n, edges, mode)
    }

    /// Canonical text form: header, then one line per edge in id order.
    pub fn serialize(&self) -> String {
        let mut out = format!("htsp {} {}\n", self.vertex_count(), self.edge_count());
        for e in self.graph.edges() {
            out.push_str(&format!("{} {} {}\n", e.u, e.v, format_rational(&self.costs[e.id.0])));
        }
        out
    }

    pub fn validate(&self, mode: ParseMode) -> Result<(), InstanceError> {
        let g = &self.graph;
        for v in 0..g.vertex_count() {
            if g.degree(v) != 4 {
                return Err(InstanceError::Degree { vertex: v, degree: g.degree(v) });
            }
        }
        if !g.is_k_edge_connected(4) {
            return Err(InstanceError::Connectivity);
        }
        if mode == ParseMode::Strict {
            self.check_root_triple()?;
        }
        Ok(())
    }

    fn check_root_triple(&self) -> Result<(), InstanceError> {
        if self.vertex_count() < 3 {
            return Err(InstanceError::SpecialTriple("fewer than three vertices".into()));
        }
        for side in [ROOT_LEFT, ROOT_RIGHT] {
            let k = self.graph.multiplicity(ROOT, side);
            if k != 2 {
                return Err(InstanceError::SpecialTriple(format!("{k} edges join 0 and {side}, expected 2")));
            }
        }
        Ok(())
    }

    /// Relabels some vertex whose edges form two parallel pairs to distinct
    /// neighbours as the root triple (0, 1, 2). Returns `None` when no such
    /// vertex exists.
    pub fn normalized(&self) -> Option<Instance> {
        if self.check_root_triple().is_ok() {
            return Some(self.clone());
        }
        let g = &self.graph;
        let (root, left, right) = (0..g.vertex_count()).find_map(|v| match g.neighbours(v)[..] {
            [(a, 2), (b, 2)] => Some((v, a, b)),
            _ => None,
        })?;
        let mut label: Vec<usize> = (0..g.vertex_count()).collect();
        let targets = [(root, ROOT), (left, ROOT_LEFT), (right, ROOT_RIGHT)];
        for (vertex, target) in targets {
            let current = label.iter().position(|&l| l == target).expect("label present");
            let held = label[vertex];
            label[vertex] = target;
            label[current] = held;
        }
        let edges = g
            .edges()
            .iter()
            .map(|e| (label[e.u], label[e.v], self.costs[e.id.0].clone()))
            .collect();
        Instance::new(g.vertex_count(), edges, ParseMode::Strict).ok()
    }

    pub fn graph(&self) -> &MultiGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.graph.edges()[id.0]
    }

    pub fn cost(&self, id: EdgeId) -> &Rational {
        &self.costs[id.0]
    }

    pub fn costs(&self) -> &[Rational] {
        &self.costs
    }

    /// LP objective `sum_e c_e x_e` with every `x_e = 1/2`.
    pub fn lp_cost(&self) -> Rational {
        self.costs.iter().fold(Rational::zero(), |acc, c| acc + c) / ratio(2, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k5_text() -> String {
        let mut text = String::from("# K5 with unit costs\nhtsp 5 10\n");
        for u in 0..5 {
            for v in u + 1..5 {
                text.push_str(&format!("{u} {v} 1\n"));
            }
        }
        text
    }

    #[test]
    fn k5_is_valid_but_not_strict() {
        let text = k5_text();
        assert!(Instance::parse(&text, ParseMode::Lenient).is_ok());
        assert!(matches!(Instance::parse(&text, ParseMode::Strict), Err(InstanceError::SpecialTriple(_))));
        assert!(Instance::parse(&text, ParseMode::Lenient).unwrap().normalized().is_none());
    }

    #[test]
    fn four_parallel_edges_are_a_degenerate_instance() {
        let text = "htsp 2 4\n0 1 1\n0 1 1\n0 1 2.5\n0 1 0\n";
        let inst = Instance::parse(text, ParseMode::Lenient).unwrap();
        assert_eq!(inst.lp_cost(), ratio(9, 4));
    }

    #[test]
    fn two_edge_bridge_is_rejected() {
        // Two copies of K5 minus an edge, joined through the missing edges.
        let mut pairs = Vec::new();
        for base in [0, 5] {
            for u in 0..5 {
                for v in u + 1..5 {
                    if (u, v) != (0, 1) {
                        pairs.push((base + u, base + v));
                    }
                }
            }
        }
        pairs.push((0, 5));
        pairs.push((1, 6));
        let err = Instance::with_unit_costs(10, &pairs, ParseMode::Lenient).unwrap_err();
        assert_eq!(err, InstanceError::Connectivity);
    }

    #[test]
    fn degree_violation_is_reported() {
        let err = Instance::parse("htsp 3 3\n0 1 1\n1 2 1\n0 2 1\n", ParseMode::Lenient).unwrap_err();
        assert!(matches!(err, InstanceError::Degree { vertex: 0, degree: 2 }));
    }

    #[test]
    fn serialization_is_canonical() {
        let text = "htsp 3 6 # triangle\n0 1 1.50\n0 1 1.5\n0 2 2\n0 2 2\n1 2 0.25\n1 2 1/4\n";
        let inst = Instance::parse(text, ParseMode::Strict).unwrap();
        let canonical = inst.serialize();
        assert_eq!(canonical, "htsp 3 6\n0 1 1.5\n0 1 1.5\n0 2 2\n0 2 2\n1 2 0.25\n1 2 0.25\n");
        assert_eq!(Instance::parse(&canonical, ParseMode::Strict).unwrap().serialize(), canonical);
    }

    #[test]
    fn normalization_relabels_the_triple() {
        // Double cycle 0-1-2-3 with the triple centred at vertex 3.
        let pairs = [(0, 1), (0, 1), (1, 2), (1, 2), (2, 3), (2, 3), (3, 0), (3, 0)];
        let inst = Instance::with_unit_costs(4, &pairs, ParseMode::Lenient).unwrap();
        let fixed = inst.normalized().unwrap();
        assert!(fixed.validate(ParseMode::Strict).is_ok());
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let err = Instance::parse("htsp 2 4\n0 1 1\n0 1 x\n", ParseMode::Lenient).unwrap_err();
        assert_eq!(err, InstanceError::Parse { line: 3, message: "bad cost".into() });
    }
}
