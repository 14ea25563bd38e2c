//! Meta-split construction and episode sampling.

use crate::error::{Error, Result};
use crate::graph::{extract_pair_subgraph, extract_subgraph, Graph};
use crate::meta::{MetaConfig, Problem, Task};
use rand::Rng;
use std::collections::BTreeMap;

/// Which portion of the meta-split to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Fixed per-graph partition of edges into a support pool and a query
/// pool (link prediction).
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub support: Vec<(u32, u32)>,
    pub query: Vec<(u32, u32)>,
}

/// A dataset partitioned for one meta-learning problem: disjoint label
/// pools, held-out graphs, or both, plus edge pools for link tasks.
#[derive(Debug, Clone)]
pub struct MetaSplit {
    pub problem: Problem,
    pub graphs: Vec<Graph>,
    pub train_labels: Vec<u32>,
    pub val_labels: Vec<u32>,
    pub test_labels: Vec<u32>,
    pub train_graphs: Vec<usize>,
    pub val_graphs: Vec<usize>,
    pub test_graphs: Vec<usize>,
    pub edge_splits: Vec<EdgeSplit>,
}

impl MetaSplit {
    pub fn labels_for(&self, split: Split) -> &[u32] {
        match split {
            Split::Train => &self.train_labels,
            Split::Val => &self.val_labels,
            Split::Test => &self.test_labels,
        }
    }

    pub fn graphs_for(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train_graphs,
            Split::Val => &self.val_graphs,
            Split::Test => &self.test_graphs,
        }
    }
}

/// Labeled nodes per label, restricted to the given graph indices.
fn label_pools(graphs: &[Graph], indices: &[usize]) -> BTreeMap<u32, Vec<(usize, u32)>> {
    let mut pools: BTreeMap<u32, Vec<(usize, u32)>> = BTreeMap::new();
    for &gi in indices {
        for (node, label) in graphs[gi].labels().iter().enumerate() {
            if let Some(l) = label {
                pools.entry(*l).or_default().push((gi, node as u32));
            }
        }
    }
    pools
}

fn shuffled<T: Clone>(items: &[T], rng: &mut impl Rng) -> Vec<T> {
    let mut out = items.to_vec();
    for i in (1..out.len()).rev() {
        let j = rng.gen_range(0..=i);
        out.swap(i, j);
    }
    out
}

/// Partition a dataset for `problem`.
///
/// Disjoint-label problems hold out `cfg.test_labels` labels for
/// meta-testing and `cfg.val_labels` for meta-validation, drawn from the
/// labels with at least `k_support + 1` labeled nodes. Graph-holdout
/// problems reserve 10% of graphs (at least one) for each of testing
/// and validation. Link problems additionally split each graph's edges
/// 30/70 into fixed support and query pools.
pub fn build_split(
    problem: Problem,
    graphs: Vec<Graph>,
    cfg: &MetaConfig,
    rng: &mut impl Rng,
) -> Result<MetaSplit> {
    if graphs.is_empty() {
        return Err(Error::Config("dataset has no graphs".into()));
    }
    let all_graphs: Vec<usize> = (0..graphs.len()).collect();
    let mut split = MetaSplit {
        problem,
        train_labels: vec![],
        val_labels: vec![],
        test_labels: vec![],
        train_graphs: all_graphs.clone(),
        val_graphs: all_graphs.clone(),
        test_graphs: all_graphs.clone(),
        edge_splits: vec![],
        graphs,
    };
    match problem {
        Problem::SingleDisjoint | Problem::MultiDisjoint => {
            if problem == Problem::SingleDisjoint && split.graphs.len() != 1 {
                return Err(Error::Config(format!(
                    "single-graph problem got {} graphs",
                    split.graphs.len()
                )));
            }
            let pools = label_pools(&split.graphs, &all_graphs);
            let eligible: Vec<u32> = pools
                .iter()
                .filter(|(_, nodes)| nodes.len() >= cfg.k_support + 1)
                .map(|(&l, _)| l)
                .collect();
            let need = cfg.test_labels + cfg.val_labels + cfg.n_way;
            if eligible.len() < need {
                return Err(Error::Config(format!(
                    "{} eligible labels cannot fill {} test + {} val + {}-way train",
                    eligible.len(),
                    cfg.test_labels,
                    cfg.val_labels,
                    cfg.n_way
                )));
            }
            let order = shuffled(&eligible, rng);
            split.test_labels = order[..cfg.test_labels].to_vec();
            split.val_labels = order[cfg.test_labels..cfg.test_labels + cfg.val_labels].to_vec();
            split.train_labels = order[cfg.test_labels + cfg.val_labels..].to_vec();
            split.test_labels.sort_unstable();
            split.val_labels.sort_unstable();
            split.train_labels.sort_unstable();
        }
        Problem::MultiShared | Problem::Link => {
            let n = split.graphs.len();
            let hold = (n / 10).max(1);
            if n < 2 * hold + 1 {
                return Err(Error::Config(format!(
                    "{n} graphs are too few to hold out {hold} for test and {hold} for val"
                )));
            }
            let order = shuffled(&all_graphs, rng);
            split.test_graphs = order[..hold].to_vec();
            split.val_graphs = order[hold..2 * hold].to_vec();
            split.train_graphs = order[2 * hold..].to_vec();
            split.test_graphs.sort_unstable();
            split.val_graphs.sort_unstable();
            split.train_graphs.sort_unstable();
            if problem == Problem::Link {
                for g in &split.graphs {
                    let edges = shuffled(&g.edges(), rng);
                    let support_n = ((edges.len() * 3) / 10).max(1);
                    split.edge_splits.push(EdgeSplit {
                        support: edges[..support_n].to_vec(),
                        query: edges[support_n..].to_vec(),
                    });
                }
            }
        }
    }
    Ok(split)
}

/// Pick `n_way` labels with enough labeled nodes, then sample
/// `k_support + k_query_eff` distinct nodes per label, where
/// `k_query_eff` shrinks `cfg.k_query` to the scarcest chosen label so
/// query counts stay equal per class.
fn node_classification_task(
    pools: &BTreeMap<u32, Vec<(usize, u32)>>,
    label_pool: &[u32],
    graphs: &[Graph],
    cfg: &MetaConfig,
    rng: &mut impl Rng,
) -> Result<Task> {
    let mut chosen: Vec<u32> = Vec::with_capacity(cfg.n_way);
    for &label in shuffled(label_pool, rng).iter() {
        if chosen.len() == cfg.n_way {
            break;
        }
        let have = pools.get(&label).map_or(0, |p| p.len());
        if have >= cfg.k_support + 1 {
            chosen.push(label);
        } else {
            return Err(Error::InsufficientNodes {
                label,
                need: cfg.k_support + 1,
                have,
            });
        }
    }
    if chosen.len() < cfg.n_way {
        return Err(Error::Sampling(format!(
            "only {} of {} labels are usable",
            chosen.len(),
            cfg.n_way
        )));
    }
    let k_query = chosen
        .iter()
        .map(|l| pools[l].len() - cfg.k_support)
        .min()
        .unwrap()
        .min(cfg.k_query);
    let mut support = Vec::with_capacity(cfg.n_way * cfg.k_support);
    let mut query = Vec::with_capacity(cfg.n_way * k_query);
    for (local, label) in chosen.iter().enumerate() {
        let picks = shuffled(&pools[label], rng);
        for (i, &(gi, node)) in picks.iter().take(cfg.k_support + k_query).enumerate() {
            let sub = extract_subgraph(&graphs[gi], node as usize, cfg.hop, cfg.subgraph_cap, rng)?;
            if i < cfg.k_support {
                support.push((sub, local));
            } else {
                query.push((sub, local));
            }
        }
    }
    let task = Task {
        support,
        query,
        label_set: chosen,
    };
    task.validate(cfg.k_support)?;
    Ok(task)
}

/// All-ways episode within one graph (shared-label problems): every
/// global label participates; graphs lacking coverage are resampled.
fn shared_label_task(
    split: &MetaSplit,
    which: Split,
    cfg: &MetaConfig,
    rng: &mut impl Rng,
) -> Result<Task> {
    let all_labels: Vec<u32> = {
        let mut set = std::collections::BTreeSet::new();
        for g in &split.graphs {
            set.extend(g.label_set());
        }
        set.into_iter().collect()
    };
    let graph_choices = split.graphs_for(which);
    let mut last_err = None;
    for _ in 0..50 {
        let gi = graph_choices[rng.gen_range(0..graph_choices.len())];
        let pools = label_pools(&split.graphs, &[gi]);
        let feasible = all_labels
            .iter()
            .all(|l| pools.get(l).map_or(0, |p| p.len()) >= cfg.k_support + 1);
        if !feasible {
            last_err = Some(Error::Sampling(format!(
                "graph {gi} lacks {} nodes of some label",
                cfg.k_support + 1
            )));
            continue;
        }
        let k_query = all_labels
            .iter()
            .map(|l| pools[l].len() - cfg.k_support)
            .min()
            .unwrap()
            .min(cfg.k_query);
        let mut support = Vec::new();
        let mut query = Vec::new();
        for (local, label) in all_labels.iter().enumerate() {
            let picks = shuffled(&pools[label], rng);
            for (i, &(gidx, node)) in picks.iter().take(cfg.k_support + k_query).enumerate() {
                let sub =
                    extract_subgraph(&split.graphs[gidx], node as usize, cfg.hop, cfg.subgraph_cap, rng)?;
                if i < cfg.k_support {
                    support.push((sub, local));
                } else {
                    query.push((sub, local));
                }
            }
        }
        let task = Task {
            support,
            query,
            label_set: all_labels,
        };
        task.validate(cfg.k_support)?;
        return Ok(task);
    }
    Err(last_err.unwrap_or_else(|| Error::Sampling("no feasible graph".into())))
}

/// Binary link-prediction episode: `k_support` positive pairs from the
/// graph's support-edge pool plus matched negatives, queries from the
/// query pool likewise. Pair subgraphs drop the target edge.
fn link_task(
    split: &MetaSplit,
    which: Split,
    cfg: &MetaConfig,
    rng: &mut impl Rng,
) -> Result<Task> {
    let graph_choices = split.graphs_for(which);
    let gi = graph_choices[rng.gen_range(0..graph_choices.len())];
    let g = &split.graphs[gi];
    let pools = &split.edge_splits[gi];
    if pools.support.len() < cfg.k_support {
        return Err(Error::Sampling(format!(
            "graph {gi} has {} support edges, need {}",
            pools.support.len(),
            cfg.k_support
        )));
    }
    if pools.query.is_empty() {
        return Err(Error::Sampling(format!("graph {gi} has no query edges")));
    }
    let k_query = cfg.k_query.min(pools.query.len());
    let pos_support = shuffled(&pools.support, rng);
    let pos_query = shuffled(&pools.query, rng);
    let negatives = g.sample_negative_edges(cfg.k_support + k_query, rng)?;

    // local label 1 = link, 0 = no link
    let mut support = Vec::new();
    let mut query = Vec::new();
    for &(u, v) in pos_support.iter().take(cfg.k_support) {
        let sub = extract_pair_subgraph(g, u as usize, v as usize, cfg.hop, cfg.subgraph_cap, true, rng)?;
        support.push((sub, 1));
    }
    for &(u, v) in negatives.iter().take(cfg.k_support) {
        let sub = extract_pair_subgraph(g, u as usize, v as usize, cfg.hop, cfg.subgraph_cap, true, rng)?;
        support.push((sub, 0));
    }
    for &(u, v) in pos_query.iter().take(k_query) {
        let sub = extract_pair_subgraph(g, u as usize, v as usize, cfg.hop, cfg.subgraph_cap, true, rng)?;
        query.push((sub, 1));
    }
    for &(u, v) in negatives.iter().skip(cfg.k_support).take(k_query) {
        let sub = extract_pair_subgraph(g, u as usize, v as usize, cfg.hop, cfg.subgraph_cap, true, rng)?;
        query.push((sub, 0));
    }
    let task = Task {
        support,
        query,
        label_set: vec![0, 1],
    };
    task.validate(cfg.k_support)?;
    Ok(task)
}

/// Sample one episode from the requested portion of the split.
pub fn sample_task(
    split: &MetaSplit,
    which: Split,
    cfg: &MetaConfig,
    rng: &mut impl Rng,
) -> Result<Task> {
    match split.problem {
        Problem::SingleDisjoint | Problem::MultiDisjoint => {
            let graph_indices: Vec<usize> = (0..split.graphs.len()).collect();
            let pools = label_pools(&split.graphs, &graph_indices);
            node_classification_task(&pools, split.labels_for(which), &split.graphs, cfg, rng)
        }
        Problem::MultiShared => shared_label_task(split, which, cfg, rng),
        Problem::Link => link_task(split, which, cfg, rng),
    }
}
