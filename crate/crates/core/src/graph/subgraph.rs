//! h-hop local subgraph extraction.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use rand::Rng;

/// A node-induced subgraph around a centroid node (or a node pair for
/// link prediction), carrying the local-to-global id map.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: Graph,
    pub centroid_local: usize,
    pub global_ids: Vec<u32>,
    pub hop: usize,
    pub pair_local: Option<(usize, usize)>,
}

impl Subgraph {
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }
}

fn induce(
    g: &Graph,
    members: &[usize],
    drop_edge: Option<(usize, usize)>,
) -> Result<(Graph, Vec<u32>)> {
    let mut local_of = vec![usize::MAX; g.node_count()];
    for (local, &global) in members.iter().enumerate() {
        local_of[global] = local;
    }
    let mut edges = Vec::new();
    for (local, &global) in members.iter().enumerate() {
        for &nbr in g.neighbors(global) {
            let nbr = nbr as usize;
            if nbr <= global {
                continue;
            }
            let nbr_local = local_of[nbr];
            if nbr_local == usize::MAX {
                continue;
            }
            if let Some((a, b)) = drop_edge {
                if (global == a && nbr == b) || (global == b && nbr == a) {
                    continue;
                }
            }
            edges.push((local as u32, nbr_local as u32));
        }
    }
    let mut sub = Graph::from_edges(members.len(), &edges)?;
    if let Some(feat) = g.features() {
        let mut rows = Tensor::zeros(members.len(), feat.cols());
        for (local, &global) in members.iter().enumerate() {
            for c in 0..feat.cols() {
                rows.set(local, c, feat.at(global, c));
            }
        }
        sub = sub.with_features(rows)?;
    }
    let labels: Vec<Option<u32>> = members.iter().map(|&m| g.label(m)).collect();
    sub = sub.with_labels(labels)?;
    Ok((sub, members.iter().map(|&m| m as u32).collect()))
}

/// Keep `keep` node ids and all of `cap` total members: uniformly
/// subsample the rest down to `cap - keep.len()`.
fn subsample(members: Vec<usize>, keep: &[usize], cap: usize, rng: &mut impl Rng) -> Vec<usize> {
    if members.len() <= cap {
        return members;
    }
    let mut rest: Vec<usize> = members.iter().copied().filter(|m| !keep.contains(m)).collect();
    let want = cap - keep.len();
    for i in 0..want {
        let j = rng.gen_range(i..rest.len());
        rest.swap(i, j);
    }
    rest.truncate(want);
    let mut out = keep.to_vec();
    out.extend(rest);
    out.sort_unstable();
    out
}

/// Extract the subgraph induced by all nodes within `hop` BFS steps of
/// `u`. Subgraphs larger than `cap` nodes are uniformly subsampled (the
/// centroid is always retained) and edges re-induced.
pub fn extract_subgraph(
    g: &Graph,
    u: usize,
    hop: usize,
    cap: usize,
    rng: &mut impl Rng,
) -> Result<Subgraph> {
    if u >= g.node_count() {
        return Err(Error::NodeOutOfRange(u, g.node_count()));
    }
    if cap == 0 {
        return Err(Error::Config("subgraph cap must be >= 1".into()));
    }
    let members = subsample(g.ball(u, hop)?, &[u], cap, rng);
    let (sub, global_ids) = induce(g, &members, None)?;
    let centroid_local = members.binary_search(&u).expect("centroid retained");
    Ok(Subgraph {
        graph: sub,
        centroid_local,
        global_ids,
        hop,
        pair_local: None,
    })
}

/// Extract the subgraph induced by the union of `u`'s and `v`'s
/// `hop`-neighborhoods, marking both as the pair. When
/// `remove_pair_edge` is set, the (u, v) edge, if present, is dropped
/// from the induced structure so link prediction cannot read its own
/// target.
pub fn extract_pair_subgraph(
    g: &Graph,
    u: usize,
    v: usize,
    hop: usize,
    cap: usize,
    remove_pair_edge: bool,
    rng: &mut impl Rng,
) -> Result<Subgraph> {
    if u == v {
        return Err(Error::Sampling(format!("pair subgraph needs u != v, got {u}")));
    }
    if u >= g.node_count() {
        return Err(Error::NodeOutOfRange(u, g.node_count()));
    }
    if v >= g.node_count() {
        return Err(Error::NodeOutOfRange(v, g.node_count()));
    }
    if cap < 2 {
        return Err(Error::Config("pair subgraph cap must be >= 2".into()));
    }
    let mut members = g.ball(u, hop)?;
    members.extend(g.ball(v, hop)?);
    members.sort_unstable();
    members.dedup();
    let members = subsample(members, &[u.min(v), u.max(v)], cap, rng);
    let drop = remove_pair_edge.then_some((u, v));
    let (sub, global_ids) = induce(g, &members, drop)?;
    let u_local = members.binary_search(&u).expect("pair node retained");
    let v_local = members.binary_search(&v).expect("pair node retained");
    Ok(Subgraph {
        graph: sub,
        centroid_local: u_local,
        global_ids,
        hop,
        pair_local: Some((u_local, v_local)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn one_hop_on_a_path() {
        let g = path(5);
        let s = extract_subgraph(&g, 2, 1, 1000, &mut rng()).unwrap();
        assert_eq!(s.global_ids, vec![1, 2, 3]);
        assert_eq!(s.graph.node_count(), 3);
        assert_eq!(s.graph.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(s.global_ids[s.centroid_local], 2);
    }

    #[test]
    fn zero_hops_is_the_single_node() {
        let g = path(5);
        let s = extract_subgraph(&g, 3, 0, 1000, &mut rng()).unwrap();
        assert_eq!(s.graph.node_count(), 1);
        assert_eq!(s.graph.edge_count(), 0);
        assert_eq!(s.global_ids, vec![3]);
    }

    #[test]
    fn cap_subsamples_but_keeps_the_centroid() {
        let edges: Vec<(u32, u32)> = (1..=1500).map(|i| (0, i)).collect();
        let g = Graph::from_edges(1501, &edges).unwrap();
        let s = extract_subgraph(&g, 0, 1, 1000, &mut rng()).unwrap();
        assert_eq!(s.graph.node_count(), 1000);
        assert_eq!(s.global_ids[s.centroid_local], 0);
        // re-induced edges all touch the centroid
        assert_eq!(s.graph.edge_count(), 999);
    }

    #[test]
    fn invalid_node_is_an_error() {
        let g = path(3);
        assert!(extract_subgraph(&g, 9, 1, 10, &mut rng()).is_err());
    }

    #[test]
    fn pair_subgraph_on_a_path() {
        let g = path(3);
        let s = extract_pair_subgraph(&g, 0, 2, 1, 1000, false, &mut rng()).unwrap();
        assert_eq!(s.global_ids, vec![0, 1, 2]);
        assert_eq!(s.graph.edges(), vec![(0, 1), (1, 2)]);
        let (a, b) = s.pair_local.unwrap();
        assert_eq!(s.global_ids[a], 0);
        assert_eq!(s.global_ids[b], 2);
    }

    #[test]
    fn pair_edge_removal_flag() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let with = extract_pair_subgraph(&g, 0, 2, 1, 1000, false, &mut rng()).unwrap();
        assert!(with.graph.has_edge(0, 2));
        let without = extract_pair_subgraph(&g, 0, 2, 1, 1000, true, &mut rng()).unwrap();
        let (a, b) = without.pair_local.unwrap();
        assert!(!without.graph.has_edge(a, b));
        // only the target edge is dropped
        assert_eq!(without.graph.edge_count(), 2);
    }

    #[test]
    fn pair_with_equal_nodes_is_an_error() {
        let g = path(3);
        assert!(extract_pair_subgraph(&g, 1, 1, 1, 10, false, &mut rng()).is_err());
    }

    #[test]
    fn disjoint_pair_balls_give_two_components() {
        let g = Graph::from_edges(6, &[(0, 1), (4, 5)]).unwrap();
        let s = extract_pair_subgraph(&g, 0, 5, 1, 1000, false, &mut rng()).unwrap();
        assert_eq!(s.global_ids, vec![0, 1, 4, 5]);
        assert_eq!(s.graph.edge_count(), 2);
        let (a, b) = s.pair_local.unwrap();
        assert_eq!(
            s.graph.shortest_path_dist(a, b).unwrap(),
            crate::graph::Dist::Unreachable
        );
    }

    #[test]
    fn features_and_labels_are_sliced() {
        let g = path(4)
            .with_features(
                Tensor::new(4, 2, vec![0.0, 0.1, 1.0, 1.1, 2.0, 2.1, 3.0, 3.1]).unwrap(),
            )
            .unwrap()
            .with_labels(vec![Some(0), Some(1), Some(2), Some(3)])
            .unwrap();
        let s = extract_subgraph(&g, 2, 1, 1000, &mut rng()).unwrap();
        assert_eq!(s.graph.features().unwrap().row(0), &[1.0, 1.1]);
        assert_eq!(s.graph.label(1), Some(2));
    }
}
