//! Graphlet orbit counts for connected graphlets on up to 4 nodes.
//!
//! Orbits (by in-graphlet degree, smallest graphlet first):
//! 0 edge; 1/2 path-3 end/mid; 3 triangle; 4/5 path-4 end/mid;
//! 6/7 claw leaf/center; 8 cycle-4; 9/10/11 tailed-triangle tail /
//! far pair / articulation; 12/13 diamond rim/hub; 14 clique-4.
//!
//! Counting enumerates each connected subgraph exactly once (ESU-style
//! extension rooted at the minimum node id) and credits every member
//! with its orbit, so a node's vector is the number of (subgraph,
//! position) incidences. A node's ≤3-hop neighborhood contains all its
//! graphlets on ≤4 nodes, so counts are a local structure fingerprint.

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const ORBITS: usize = 15;

struct Esu<'a, F: FnMut(&[usize])> {
    g: &'a Graph,
    k: usize,
    root: usize,
    sub: Vec<usize>,
    /// V_sub plus all of its neighbors; extension candidates must be new.
    blocked: Vec<bool>,
    visit: F,
}

impl<F: FnMut(&[usize])> Esu<'_, F> {
    fn extend(&mut self, ext: Vec<usize>) {
        if self.sub.len() == self.k {
            (self.visit)(&self.sub);
            return;
        }
        let mut ext = ext;
        while let Some(w) = ext.pop() {
            let mut next_ext = ext.clone();
            let mut newly_blocked = Vec::new();
            for &u in self.g.neighbors(w) {
                let u = u as usize;
                if !self.blocked[u] {
                    self.blocked[u] = true;
                    newly_blocked.push(u);
                    if u > self.root {
                        next_ext.push(u);
                    }
                }
            }
            self.sub.push(w);
            self.extend(next_ext);
            self.sub.pop();
            for u in newly_blocked {
                self.blocked[u] = false;
            }
        }
    }
}

/// Enumerate every connected subgraph of exactly `k` nodes once.
fn enumerate_connected(g: &Graph, k: usize, mut visit: impl FnMut(&[usize])) {
    let n = g.node_count();
    for v in 0..n {
        let mut blocked = vec![false; n];
        blocked[v] = true;
        let mut ext = Vec::new();
        for &u in g.neighbors(v) {
            let u = u as usize;
            blocked[u] = true;
            if u > v {
                ext.push(u);
            }
        }
        let mut esu = Esu {
            g,
            k,
            root: v,
            sub: vec![v],
            blocked,
            visit: &mut visit,
        };
        esu.extend(ext);
    }
}

fn degree_within(g: &Graph, sub: &[usize], node: usize) -> usize {
    sub.iter()
        .filter(|&&other| other != node && g.has_edge(node, other))
        .count()
}

fn edges_within(g: &Graph, sub: &[usize]) -> usize {
    let mut e = 0;
    for (i, &a) in sub.iter().enumerate() {
        for &b in &sub[i + 1..] {
            if g.has_edge(a, b) {
                e += 1;
            }
        }
    }
    e
}

/// Orbit-count vectors for every node.
pub fn orbit_counts(g: &Graph) -> Vec<[u64; ORBITS]> {
    let mut counts = vec![[0u64; ORBITS]; g.node_count()];

    for u in 0..g.node_count() {
        counts[u][0] = g.degree(u) as u64;
    }

    enumerate_connected(g, 3, |sub| {
        let e = edges_within(g, sub);
        for &node in sub {
            let d = degree_within(g, sub, node);
            let orbit = match (e, d) {
                (2, 1) => 1,
                (2, 2) => 2,
                (3, _) => 3,
                _ => unreachable!("connected 3-subgraph"),
            };
            counts[node][orbit] += 1;
        }
    });

    enumerate_connected(g, 4, |sub| {
        let e = edges_within(g, sub);
        for &node in sub {
            let d = degree_within(g, sub, node);
            let max_d = sub
                .iter()
                .map(|&m| degree_within(g, sub, m))
                .max()
                .unwrap();
            let orbit = match (e, d) {
                // three edges: path-4 or claw
                (3, 1) if max_d == 3 => 6,
                (3, 3) => 7,
                (3, 1) => 4,
                (3, 2) => 5,
                // four edges: cycle-4 or tailed triangle
                (4, 2) if max_d == 2 => 8,
                (4, 1) => 9,
                (4, 2) => 10,
                (4, 3) => 11,
                // five edges: diamond
                (5, 2) => 12,
                (5, 3) => 13,
                (6, _) => 14,
                _ => unreachable!("connected 4-subgraph with {e} edges, degree {d}"),
            };
            counts[node][orbit] += 1;
        }
    });

    counts
}

/// Orbit-count vector for one node, as reals.
pub fn graphlet_vector(g: &Graph, u: usize) -> Result<Vec<f64>> {
    if u >= g.node_count() {
        return Err(Error::NodeOutOfRange(u, g.node_count()));
    }
    Ok(orbit_counts(g)[u].iter().map(|&c| c as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: enumerate all node subsets of sizes 2-4,
    /// keep the connected ones, classify by edge count and
    /// degree-within, and credit members.
    fn brute_force(g: &Graph) -> Vec<[u64; ORBITS]> {
        let n = g.node_count();
        let mut counts = vec![[0u64; ORBITS]; n];
        let connected = |sub: &[usize]| -> bool {
            let mut seen = vec![false; sub.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut reached = 1;
            while let Some(i) = stack.pop() {
                for (j, &b) in sub.iter().enumerate() {
                    if !seen[j] && g.has_edge(sub[i], b) {
                        seen[j] = true;
                        reached += 1;
                        stack.push(j);
                    }
                }
            }
            reached == sub.len()
        };
        let mut credit = |sub: &[usize]| {
            if !connected(sub) {
                return;
            }
            let e = edges_within(g, sub);
            for &node in sub {
                let d = degree_within(g, sub, node);
                let max_d = sub.iter().map(|&m| degree_within(g, sub, m)).max().unwrap();
                let orbit = match (sub.len(), e, d) {
                    (2, 1, _) => 0,
                    (3, 2, 1) => 1,
                    (3, 2, 2) => 2,
                    (3, 3, _) => 3,
                    (4, 3, 1) if max_d == 3 => 6,
                    (4, 3, 3) => 7,
                    (4, 3, 1) => 4,
                    (4, 3, 2) => 5,
                    (4, 4, 2) if max_d == 2 => 8,
                    (4, 4, 1) => 9,
                    (4, 4, 2) => 10,
                    (4, 4, 3) => 11,
                    (4, 5, 2) => 12,
                    (4, 5, 3) => 13,
                    (4, 6, _) => 14,
                    _ => unreachable!(),
                };
                counts[node][orbit] += 1;
            }
        };
        for a in 0..n {
            for b in a + 1..n {
                credit(&[a, b]);
                for c in b + 1..n {
                    credit(&[a, b, c]);
                    for d in c + 1..n {
                        credit(&[a, b, c, d]);
                    }
                }
            }
        }
        counts
    }

    #[test]
    fn isolated_node_has_zero_vector() {
        let g = Graph::from_edges(3, &[(1, 2)]).unwrap();
        assert_eq!(graphlet_vector(&g, 0).unwrap(), vec![0.0; ORBITS]);
    }

    #[test]
    fn triangle_node_orbits() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let v = graphlet_vector(&g, 0).unwrap();
        assert_eq!(v[3], 1.0, "one triangle");
        assert_eq!(v[0], 2.0, "two edges");
        assert_eq!(v[1] + v[2], 0.0, "no induced... (non-induced count counts paths)");
    }

    #[test]
    fn claw_center_counts_three_path_mids() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let v = graphlet_vector(&g, 0).unwrap();
        assert_eq!(v[2], 3.0, "C(3,2) paths centered at the hub");
        assert_eq!(v[7], 1.0, "one claw center");
        let leaf = graphlet_vector(&g, 1).unwrap();
        assert_eq!(leaf[6], 1.0);
        assert_eq!(leaf[1], 2.0);
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..8 {
            let n = rng.gen_range(5..12);
            let mut edges = Vec::new();
            for a in 0..n as u32 {
                for b in a + 1..n as u32 {
                    if rng.gen_bool(0.35) {
                        edges.push((a, b));
                    }
                }
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            let fast = orbit_counts(&g);
            let slow = brute_force(&g);
            assert_eq!(fast, slow, "trial {trial}");
        }
    }
}
