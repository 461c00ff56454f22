//! Instance families built from small gadgets wired into the root cycle.

use crate::instance::{Instance, InstanceError, ParseMode};
use crate::rational::int;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Random draws rejected before giving up on the random family.
pub const RETRY_CAP: usize = 1000;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("no valid instance after {0} attempts")]
    GenerationFailure(usize),
    #[error("invalid family parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A generator family with its size parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// The root cycle alone, on `k` vertices.
    DoubleCycle(usize),
    /// `count` K4 blocks alternating with single vertices on the root cycle.
    K5Gadget(usize),
    /// Circulant degree pieces nested `depth` deep around a K4.
    Nested(usize),
    /// A random 4-regular graph on `n - 2` vertices with one vertex opened
    /// into the root triple.
    Random4Reg(usize),
    /// A circulant degree piece holding a chain and a K4.
    ChainInDegree,
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::DoubleCycle(k) => format!("double-cycle-{k}"),
            Family::K5Gadget(c) => format!("k5-gadget-{c}"),
            Family::Nested(d) => format!("nested-{d}"),
            Family::Random4Reg(n) => format!("random-4reg-{n}"),
            Family::ChainInDegree => "chain-in-degree".into(),
        }
    }

    /// Parses `double-cycle:8`, `k5-gadget:2`, `nested:2`, `random-4reg:16`
    /// or `chain-in-degree`.
    pub fn parse(text: &str) -> Result<Self, GenerateError> {
        let (name, arg) = match text.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (text, None),
        };
        let number = |default: usize| -> Result<usize, GenerateError> {
            arg.map_or(Ok(default), |a| a.parse().map_err(|_| GenerateError::Parameter(text.into())))
        };
        match name {
            "double-cycle" => Ok(Family::DoubleCycle(number(8)?)),
            "k5-gadget" => Ok(Family::K5Gadget(number(2)?)),
            "nested" => Ok(Family::Nested(number(2)?)),
            "random-4reg" => Ok(Family::Random4Reg(number(16)?)),
            "chain-in-degree" => Ok(Family::ChainInDegree),
            _ => Err(GenerateError::Parameter(text.into())),
        }
    }

    /// The five families at their default sizes.
    pub fn defaults() -> Vec<Family> {
        vec![Family::DoubleCycle(8), Family::K5Gadget(2), Family::Nested(2), Family::Random4Reg(16), Family::ChainInDegree]
    }
}

/// Building blocks with four outward edge ends.
#[derive(Clone, Debug)]
pub enum Gadget {
    Vertex,
    K4,
    /// `C_size(1, 2)` minus one vertex; the listed positions (in
    /// `1..size`) hold gadgets instead of vertices.
    Circulant { size: usize, inner: Vec<(usize, Gadget)> },
    /// Doubled path; two ends leave from each end of the path.
    Chain(Vec<Gadget>),
}

/// Free edge ends of a built gadget, consumed in order.
struct Ports {
    ends: Vec<usize>,
    next: usize,
}

impl Ports {
    fn take(&mut self) -> usize {
        let v = self.ends[self.next];
        self.next += 1;
        v
    }
}

#[derive(Default)]
struct Builder {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn vertex(&mut self) -> usize {
        self.n += 1;
        self.n - 1
    }

    fn build(&mut self, gadget: &Gadget) -> Ports {
        match gadget {
            Gadget::Vertex => {
                let v = self.vertex();
                Ports { ends: vec![v; 4], next: 0 }
            }
            Gadget::K4 => {
                let vs: Vec<usize> = (0..4).map(|_| self.vertex()).collect();
                for i in 0..4 {
                    for j in i + 1..4 {
                        self.edges.push((vs[i], vs[j]));
                    }
                }
                Ports { ends: vs, next: 0 }
            }
            Gadget::Circulant { size, inner } => {
                let mut slots: Vec<Option<Ports>> = vec![None];
                for pos in 1..*size {
                    let g = inner.iter().find(|(p, _)| *p == pos).map_or(&Gadget::Vertex, |(_, g)| g);
                    slots.push(Some(self.build(g)));
                }
                let mut outward = Vec::new();
                for a in 0..*size {
                    for step in [1, 2] {
                        let b = (a + step) % size;
                        match (a, b) {
                            (0, _) => outward.push(slots[b].as_mut().expect("slot").take()),
                            (_, 0) => outward.push(slots[a].as_mut().expect("slot").take()),
                            _ => {
                                let u = slots[a].as_mut().expect("slot").take();
                                let v = slots[b].as_mut().expect("slot").take();
                                self.edges.push((u, v));
                            }
                        }
                    }
                }
                Ports { ends: outward, next: 0 }
            }
            Gadget::Chain(parts) => {
                let mut built: Vec<Ports> = parts.iter().map(|g| self.build(g)).collect();
                let first = [built[0].take(), built[0].take()];
                for i in 1..built.len() {
                    for _ in 0..2 {
                        let u = built[i - 1].take();
                        let v = built[i].take();
                        self.edges.push((u, v));
                    }
                }
                let last = built.last_mut().expect("non-empty chain");
                let tail = [last.take(), last.take()];
                Ports { ends: vec![first[0], first[1], tail[0], tail[1]], next: 0 }
            }
        }
    }
}

/// Root triple `0, 1, 2` followed by the slots of the root cycle between
/// vertices 1 and 2.
pub fn root_cycle(slots: &[Gadget]) -> (usize, Vec<(usize, usize)>) {
    let mut b = Builder { n: 3, edges: vec![(0, 1), (0, 1), (0, 2), (0, 2)] };
    let mut left = [1, 1];
    for slot in slots {
        let mut ports = b.build(slot);
        for end in left {
            let v = ports.take();
            b.edges.push((end, v));
        }
        left = [ports.take(), ports.take()];
    }
    for end in left {
        b.edges.push((end, 2));
    }
    (b.n, b.edges)
}

fn nested_gadget(depth: usize) -> Gadget {
    if depth == 0 {
        return Gadget::K4;
    }
    let size = if depth % 2 == 1 { 7 } else { 8 };
    Gadget::Circulant { size, inner: vec![(3, nested_gadget(depth - 1))] }
}

/// Random 4-regular multigraph without loops by pairing half-edges.
fn random_pairing<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v; 4]).collect();
    stubs.shuffle(rng);
    let edges: Vec<(usize, usize)> = stubs.chunks(2).map(|p| (p[0].min(p[1]), p[0].max(p[1]))).collect();
    edges.iter().all(|(u, v)| u != v).then_some(edges)
}

/// Opens vertex `0` of `host` into the root triple: its four neighbours are
/// split between two new vertices that hang off a new root.
fn open_root(host_n: usize, host: &[(usize, usize)]) -> (usize, Vec<(usize, usize)>) {
    // Host vertex 0 becomes vertices 1 and 2; host vertex v > 0 becomes v + 2.
    let mut edges = vec![(0, 1), (0, 1), (0, 2), (0, 2)];
    let mut at_zero = 0;
    for &(u, v) in host {
        let map = |w: usize| w + 2;
        match (u, v) {
            (0, w) | (w, 0) => {
                edges.push((if at_zero < 2 { 1 } else { 2 }, map(w)));
                at_zero += 1;
            }
            _ => edges.push((map(u), map(v))),
        }
    }
    (host_n + 2, edges)
}

/// Edge costs: rectilinear distances between random grid points, with the
/// root triple sharing one point. Unit costs when asked.
fn with_costs<R: Rng + ?Sized>(
    n: usize,
    edges: &[(usize, usize)],
    unit_costs: bool,
    rng: &mut R,
) -> Result<Instance, InstanceError> {
    if unit_costs {
        return Instance::with_unit_costs(n, edges, ParseMode::Strict);
    }
    let mut points: Vec<(i64, i64)> = (0..n).map(|_| (rng.gen_range(0..=100), rng.gen_range(0..=100))).collect();
    points[1] = points[0];
    points[2] = points[0];
    let costed = edges
        .iter()
        .map(|&(u, v)| {
            let d = (points[u].0 - points[v].0).abs() + (points[u].1 - points[v].1).abs();
            (u, v, int(d))
        })
        .collect();
    Instance::new(n, costed, ParseMode::Strict)
}

/// Draws an instance of the family. Only the random family and the costs
/// consume randomness.
pub fn generate<R: Rng + ?Sized>(family: &Family, unit_costs: bool, rng: &mut R) -> Result<Instance, GenerateError> {
    let (n, edges) = match family {
        Family::DoubleCycle(k) => {
            if *k < 3 {
                return Err(GenerateError::Parameter(format!("double cycle needs k >= 3, got {k}")));
            }
            root_cycle(&vec![Gadget::Vertex; k - 3])
        }
        Family::K5Gadget(count) => {
            if *count == 0 {
                return Err(GenerateError::Parameter("k5 gadget count must be positive".into()));
            }
            let slots: Vec<Gadget> = (0..*count).flat_map(|_| [Gadget::K4, Gadget::Vertex]).collect();
            root_cycle(&slots)
        }
        Family::Nested(depth) => {
            if *depth == 0 || *depth > 3 {
                return Err(GenerateError::Parameter(format!("nesting depth must be 1..=3, got {depth}")));
            }
            root_cycle(&[nested_gadget(*depth), Gadget::Vertex])
        }
        Family::ChainInDegree => root_cycle(&[
            Gadget::Circulant {
                size: 8,
                inner: vec![(3, Gadget::Chain(vec![Gadget::Vertex; 3])), (6, Gadget::K4)],
            },
            Gadget::Vertex,
        ]),
        Family::Random4Reg(n) => {
            if *n < 8 || *n > crate::hierarchy::BRUTE_FORCE_LIMIT {
                return Err(GenerateError::Parameter(format!("random family needs 8 <= n <= 24, got {n}")));
            }
            for _ in 0..RETRY_CAP {
                let Some(host) = random_pairing(n - 2, rng) else { continue };
                let (n, edges) = open_root(n - 2, &host);
                if let Ok(instance) = with_costs(n, &edges, unit_costs, rng) {
                    return Ok(instance);
                }
            }
            return Err(GenerateError::GenerationFailure(RETRY_CAP));
        }
    };
    Ok(with_costs(n, &edges, unit_costs, rng)?)
}

/// `C_n(1, 2)` as a lenient instance with unit costs.
pub fn circulant(n: usize) -> Instance {
    let pairs: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 2) % n)]).collect();
    Instance::with_unit_costs(n, &pairs, ParseMode::Lenient).expect("circulant is 4-regular and 4EC")
}

