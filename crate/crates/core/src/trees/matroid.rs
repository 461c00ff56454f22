//! Weighted matroid intersection of a graphic matroid with a partition
//! matroid whose parts have capacity one, by successive shortest augmenting
//! paths in the exchange graph.

use crate::graph::UnionFind;

/// Ground set for the intersection: edges of a graph on `vertex_count`
/// vertices, each in at most one capacity-one part.
pub struct Intersection<'a> {
    pub vertex_count: usize,
    pub ends: &'a [(usize, usize)],
    pub part_of: &'a [Option<usize>],
}

impl Intersection<'_> {
    /// A maximum-weight common independent set of exactly `size` elements
    /// drawn from `allowed`, or `None` if no common independent set that
    /// large exists.
    pub fn max_weight_of_size(&self, allowed: &[bool], weight: &[i64], size: usize) -> Option<Vec<usize>> {
        let m = self.ends.len();
        let mut chosen = vec![false; m];
        for _ in 0..size {
            let path = self.shortest_augmenting_path(allowed, weight, &chosen)?;
            for x in path {
                chosen[x] = !chosen[x];
            }
        }
        Some((0..m).filter(|&x| chosen[x]).collect())
    }

    fn shortest_augmenting_path(&self, allowed: &[bool], weight: &[i64], chosen: &[bool]) -> Option<Vec<usize>> {
        let m = self.ends.len();
        let inside: Vec<usize> = (0..m).filter(|&x| chosen[x]).collect();
        let outside: Vec<usize> = (0..m).filter(|&x| !chosen[x] && allowed[x]).collect();

        let mut forest = UnionFind::new(self.vertex_count);
        for &y in &inside {
            forest.union(self.ends[y].0, self.ends[y].1);
        }
        let mut part_used: Vec<Vec<usize>> = Vec::new();
        for &y in &inside {
            if let Some(p) = self.part_of[y] {
                if part_used.len() <= p {
                    part_used.resize(p + 1, Vec::new());
                }
                part_used[p].push(y);
            }
        }
        let used = |p: usize| part_used.get(p).map(Vec::as_slice).unwrap_or(&[]);

        let mut arcs: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut source = vec![false; m];
        let mut sink = vec![false; m];
        for &x in &outside {
            let (a, b) = self.ends[x];
            if forest.find(a) != forest.find(b) {
                source[x] = true;
                // Every swap keeps a forest when x alone already does.
                for &y in &inside {
                    arcs[y].push(x);
                }
            } else {
                for y in self.cycle_through(&inside, a, b) {
                    arcs[y].push(x);
                }
            }
            match self.part_of[x] {
                None => {
                    sink[x] = true;
                    for &y in &inside {
                        arcs[x].push(y);
                    }
                }
                Some(p) => match used(p) {
                    [] => {
                        sink[x] = true;
                        for &y in &inside {
                            arcs[x].push(y);
                        }
                    }
                    [only] => arcs[x].push(*only),
                    _ => {}
                },
            }
        }

        // Bellman-Ford on vertex lengths, ties broken by fewer arcs.
        let length = |x: usize| if chosen[x] { weight[x] } else { -weight[x] };
        let mut best: Vec<Option<(i64, usize)>> = vec![None; m];
        let mut via = vec![usize::MAX; m];
        for &x in &outside {
            if source[x] {
                best[x] = Some((length(x), 0));
            }
        }
        for _ in 0..m {
            let mut changed = false;
            for u in 0..m {
                let Some((d, hops)) = best[u] else { continue };
                for &v in &arcs[u] {
                    let candidate = (d + length(v), hops + 1);
                    if best[v].is_none_or(|current| candidate < current) {
                        best[v] = Some(candidate);
                        via[v] = u;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let end = (0..m).filter(|&x| sink[x] && best[x].is_some()).min_by_key(|&x| best[x])?;
        let mut path = vec![end];
        let mut cur = end;
        while !source[cur] || best[cur] != Some((length(cur), 0)) {
            cur = via[cur];
            path.push(cur);
        }
        Some(path)
    }

    /// Elements of the forest `inside` on the path between `a` and `b`.
    fn cycle_through(&self, inside: &[usize], a: usize, b: usize) -> Vec<usize> {
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        seen[a] = true;
        let mut stack = vec![a];
        while let Some(x) = stack.pop() {
            for &y in inside {
                let (p, q) = self.ends[y];
                let next = if p == x { q } else if q == x { p } else { continue };
                if !seen[next] {
                    seen[next] = true;
                    via[next] = Some((x, y));
                    stack.push(next);
                }
            }
        }
        let mut elements = Vec::new();
        let mut cur = b;
        while let Some((prev, y)) = via[cur] {
            elements.push(y);
            cur = prev;
        }
        elements
    }
}
