//! Immutable undirected graphs and neighborhood queries.

mod files;
mod subgraph;

pub use files::{read_edge_list, read_features, read_labels, write_edge_list, write_labels};
pub use subgraph::{extract_pair_subgraph, extract_subgraph, Subgraph};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use rand::Rng;
use std::collections::{HashSet, VecDeque};

/// Shortest-path distance result; disconnected pairs are `Unreachable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dist {
    Hops(usize),
    Unreachable,
}

impl Dist {
    pub fn hops(self) -> Option<usize> {
        match self {
            Dist::Hops(h) => Some(h),
            Dist::Unreachable => None,
        }
    }
}

/// An undirected, unweighted graph with optional node features and
/// optional per-node labels. Immutable after construction and safe to
/// share across workers.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    edge_count: usize,
    features: Option<Tensor>,
    labels: Vec<Option<u32>>,
}

impl Graph {
    /// Build from an edge list, validating range, self-loops and
    /// duplicates.
    pub fn from_edges(node_count: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); node_count];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= node_count {
                return Err(Error::NodeOutOfRange(u as usize, node_count));
            }
            if v as usize >= node_count {
                return Err(Error::NodeOutOfRange(v as usize, node_count));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Ok(Self {
            adj,
            edge_count: seen.len(),
            features: None,
            labels: vec![None; node_count],
        })
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.node_count() {
            return Err(Error::InvalidGraph(format!(
                "feature rows {} != node count {}",
                features.rows(),
                self.node_count()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<Option<u32>>) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(Error::InvalidGraph(format!(
                "label entries {} != node count {}",
                labels.len(),
                self.node_count()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&(v as u32)).is_ok()
    }

    /// Edges as (u, v) with u < v, in ascending order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for u in 0..self.node_count() {
            for &v in &self.adj[u] {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    pub fn features(&self) -> Option<&Tensor> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> &[Option<u32>] {
        &self.labels
    }

    pub fn label(&self, u: usize) -> Option<u32> {
        self.labels[u]
    }

    /// Distinct labels present, ascending.
    pub fn label_set(&self) -> Vec<u32> {
        let mut set: Vec<u32> = self.labels.iter().flatten().copied().collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    /// BFS distances from `u`; `None` marks unreachable nodes.
    pub fn bfs_distances(&self, u: usize) -> Result<Vec<Option<usize>>> {
        if u >= self.node_count() {
            return Err(Error::NodeOutOfRange(u, self.node_count()));
        }
        let mut dist = vec![None; self.node_count()];
        dist[u] = Some(0);
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap();
            for &y in &self.adj[x] {
                let y = y as usize;
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        Ok(dist)
    }

    /// BFS limited to `max_hops`; returns nodes within range, ascending.
    pub fn ball(&self, u: usize, max_hops: usize) -> Result<Vec<usize>> {
        if u >= self.node_count() {
            return Err(Error::NodeOutOfRange(u, self.node_count()));
        }
        let mut dist = vec![usize::MAX; self.node_count()];
        dist[u] = 0;
        let mut queue = VecDeque::from([u]);
        let mut members = vec![u];
        while let Some(x) = queue.pop_front() {
            if dist[x] == max_hops {
                continue;
            }
            for &y in &self.adj[x] {
                let y = y as usize;
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    members.push(y);
                    queue.push_back(y);
                }
            }
        }
        members.sort_unstable();
        Ok(members)
    }

    pub fn shortest_path_dist(&self, u: usize, v: usize) -> Result<Dist> {
        if v >= self.node_count() {
            return Err(Error::NodeOutOfRange(v, self.node_count()));
        }
        let dist = self.bfs_distances(u)?;
        Ok(match dist[v] {
            Some(h) => Dist::Hops(h),
            None => Dist::Unreachable,
        })
    }

    /// Eccentricity of `u` within its component.
    pub fn eccentricity(&self, u: usize) -> Result<usize> {
        Ok(self.bfs_distances(u)?.iter().flatten().copied().max().unwrap_or(0))
    }

    /// Largest eccentricity over all nodes (per component).
    pub fn diameter(&self) -> usize {
        (0..self.node_count())
            .map(|u| self.eccentricity(u).expect("valid node"))
            .max()
            .unwrap_or(0)
    }

    /// Per-node saturating one-hot degree encoding:
    /// bucket `min(degree, dim - 1)` is set.
    pub fn degree_features(&self, dim: usize) -> Result<Tensor> {
        if dim == 0 {
            return Err(Error::Config("degree feature dim must be >= 1".into()));
        }
        let mut t = Tensor::zeros(self.node_count(), dim);
        for u in 0..self.node_count() {
            t.set(u, self.degree(u).min(dim - 1), 1.0);
        }
        Ok(t)
    }

    /// Uniformly sample `count` distinct non-adjacent, non-equal pairs.
    pub fn sample_negative_edges<R: Rng>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<(u32, u32)>> {
        let n = self.node_count();
        let total_pairs = n * n.saturating_sub(1) / 2;
        let non_edges = total_pairs - self.edge_count;
        if count > non_edges {
            return Err(Error::Sampling(format!(
                "requested {count} negative edges but only {non_edges} non-edges exist"
            )));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        // Rejection sampling is fine while non-edges are plentiful;
        // otherwise enumerate and take a random subset.
        if count * 3 < non_edges {
            let mut chosen = HashSet::new();
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let u = rng.gen_range(0..n as u32);
                let v = rng.gen_range(0..n as u32);
                if u == v {
                    continue;
                }
                let key = (u.min(v), u.max(v));
                if self.has_edge(key.0 as usize, key.1 as usize) {
                    continue;
                }
                if chosen.insert(key) {
                    out.push(key);
                }
            }
            Ok(out)
        } else {
            let mut all = Vec::with_capacity(non_edges);
            for u in 0..n as u32 {
                for v in u + 1..n as u32 {
                    if !self.has_edge(u as usize, v as usize) {
                        all.push((u, v));
                    }
                }
            }
            // Partial Fisher-Yates for the first `count` positions.
            for i in 0..count {
                let j = rng.gen_range(i..all.len());
                all.swap(i, j);
            }
            all.truncate(count);
            Ok(all)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn distance_examples() {
        let g = path(4);
        assert_eq!(g.shortest_path_dist(0, 0).unwrap(), Dist::Hops(0));
        assert_eq!(g.shortest_path_dist(0, 3).unwrap(), Dist::Hops(3));
        let two = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(two.shortest_path_dist(0, 3).unwrap(), Dist::Unreachable);
        assert!(two.shortest_path_dist(0, 9).is_err());
    }

    #[test]
    fn construction_rejects_bad_edges() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 5)]).is_err());
    }

    #[test]
    fn degree_feature_buckets() {
        let mut edges = vec![];
        // node 0 isolated; node 1 degree 2; node 4 degree 9 (saturates).
        edges.push((1, 2));
        edges.push((1, 3));
        for i in 5..14 {
            edges.push((4, i));
        }
        let g = Graph::from_edges(14, &edges).unwrap();
        let f = g.degree_features(4).unwrap();
        assert_eq!(f.row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.row(1), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(f.row(4), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn negative_edges_on_a_four_cycle_are_the_diagonals() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut neg = g.sample_negative_edges(2, &mut rng).unwrap();
        neg.sort_unstable();
        assert_eq!(neg, vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn negative_edges_respect_bounds() {
        let triangle = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(triangle.sample_negative_edges(0, &mut rng).unwrap().is_empty());
        assert!(triangle.sample_negative_edges(1, &mut rng).is_err());
    }

    #[test]
    fn sampled_negatives_are_nonedges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Graph::from_edges(12, &[(0, 1), (1, 2), (2, 3), (4, 5), (6, 7)]).unwrap();
        for _ in 0..20 {
            for (u, v) in g.sample_negative_edges(10, &mut rng).unwrap() {
                assert_ne!(u, v);
                assert!(!g.has_edge(u as usize, v as usize));
            }
        }
    }
}
