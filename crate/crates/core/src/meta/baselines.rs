//! Subgraph-level baselines and the method dispatcher.
//!
//! All baselines consume the same episodes as the main method, so any
//! accuracy difference comes from the learner, not the data:
//! - `knn`: supervised encoder on the meta-training pool, majority vote
//!   of the k-nearest support embeddings (k = k_support);
//! - `no_finetune`: a fresh model trained on each test task's support
//!   set only;
//! - `finetune`: supervised pretraining, then per-task fine-tuning;
//! - `protonet`: episodic prototype loss without inner-loop adaptation;
//! - `maml`: the meta-learner with a linear head instead of prototypes.

use crate::autodiff::{adapt, ParamSet};
use crate::error::{Error, Result};
use crate::gnn::{centroid_embedding, encode_with_nodes, gcn_weights, init_params, GcnConfig};
use crate::graph::Subgraph;
use crate::meta::proto::{push_head_params, EpisodeTask, Head};
use crate::meta::sample::{MetaSplit, Split};
use crate::meta::train::{meta_test, meta_train, sample_tasks, task_accuracy, LogRecord};
use crate::meta::{derive_seed, MetaConfig, Problem, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Learners runnable on a meta-split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Prototype head with MAML adaptation (the main method).
    ProtoMaml,
    Knn,
    NoFinetune,
    Finetune,
    ProtoNet,
    Maml,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ProtoMaml,
        Method::Knn,
        Method::NoFinetune,
        Method::Finetune,
        Method::ProtoNet,
        Method::Maml,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::ProtoMaml => "proto_maml",
            Method::Knn => "knn",
            Method::NoFinetune => "no_finetune",
            Method::Finetune => "finetune",
            Method::ProtoNet => "protonet",
            Method::Maml => "maml",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proto_maml" => Ok(Method::ProtoMaml),
            "knn" => Ok(Method::Knn),
            "no_finetune" => Ok(Method::NoFinetune),
            "finetune" => Ok(Method::Finetune),
            "protonet" => Ok(Method::ProtoNet),
            "maml" => Ok(Method::Maml),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Result of running one method on one split.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub per_task: Vec<f64>,
    pub train_log: Vec<LogRecord>,
    pub theta: Option<ParamSet>,
}

/// Deterministic initial parameters: GCN weights, plus a linear head
/// with `classes` outputs when requested. The same seed always yields
/// the same tensors.
pub fn init_theta(cfg: &MetaConfig, gcn: &GcnConfig, head_classes: Option<usize>) -> Result<ParamSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init"));
    let mut theta = init_params(gcn, &mut rng)?;
    if let Some(classes) = head_classes {
        push_head_params(&mut theta, gcn.out_dim, classes, &mut rng)?;
    }
    Ok(theta)
}

/// One supervised training example for the pretraining pool.
enum PoolItem {
    Node { graph: usize, node: u32 },
    Pair { graph: usize, u: u32, v: u32 },
}

fn pretrain_pool(
    split: &MetaSplit,
    rng: &mut impl Rng,
) -> Result<(Vec<(PoolItem, usize)>, usize)> {
    let mut items = Vec::new();
    let classes;
    match split.problem {
        Problem::SingleDisjoint | Problem::MultiDisjoint => {
            let keep: BTreeSet<u32> = split.train_labels.iter().copied().collect();
            let relabel: Vec<u32> = keep.iter().copied().collect();
            classes = relabel.len();
            for (gi, g) in split.graphs.iter().enumerate() {
                for (node, label) in g.labels().iter().enumerate() {
                    if let Some(l) = label {
                        if let Ok(local) = relabel.binary_search(l) {
                            items.push((
                                PoolItem::Node {
                                    graph: gi,
                                    node: node as u32,
                                },
                                local,
                            ));
                        }
                    }
                }
            }
        }
        Problem::MultiShared => {
            let mut labels: BTreeSet<u32> = BTreeSet::new();
            for g in &split.graphs {
                labels.extend(g.label_set());
            }
            let relabel: Vec<u32> = labels.into_iter().collect();
            classes = relabel.len();
            for &gi in &split.train_graphs {
                for (node, label) in split.graphs[gi].labels().iter().enumerate() {
                    if let Some(l) = label {
                        let local = relabel.binary_search(l).expect("label in union");
                        items.push((
                            PoolItem::Node {
                                graph: gi,
                                node: node as u32,
                            },
                            local,
                        ));
                    }
                }
            }
        }
        Problem::Link => {
            classes = 2;
            for &gi in &split.train_graphs {
                let pool = &split.edge_splits[gi];
                let negatives = split.graphs[gi].sample_negative_edges(pool.support.len(), rng)?;
                for &(u, v) in &pool.support {
                    items.push((PoolItem::Pair { graph: gi, u, v }, 1));
                }
                for &(u, v) in &negatives {
                    items.push((PoolItem::Pair { graph: gi, u, v }, 0));
                }
            }
        }
    }
    if items.is_empty() {
        return Err(Error::Sampling("empty pretraining pool".into()));
    }
    Ok((items, classes))
}

fn extract_item(
    split: &MetaSplit,
    item: &PoolItem,
    cfg: &MetaConfig,
    rng: &mut impl Rng,
) -> Result<Subgraph> {
    match *item {
        PoolItem::Node { graph, node } => crate::graph::extract_subgraph(
            &split.graphs[graph],
            node as usize,
            cfg.hop,
            cfg.subgraph_cap,
            rng,
        ),
        PoolItem::Pair { graph, u, v } => crate::graph::extract_pair_subgraph(
            &split.graphs[graph],
            u as usize,
            v as usize,
            cfg.hop,
            cfg.subgraph_cap,
            true,
            rng,
        ),
    }
}

/// Plain supervised training of encoder plus linear head over the whole
/// meta-training pool (the embedding function for KNN and Finetune).
pub fn supervised_pretrain(
    split: &MetaSplit,
    cfg: &MetaConfig,
    gcn: &GcnConfig,
) -> Result<ParamSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "pretrain"));
    let (pool, classes) = pretrain_pool(split, &mut rng)?;
    let mut theta = init_params(gcn, &mut rng)?;
    push_head_params(&mut theta, gcn.out_dim, classes, &mut rng)?;
    for _ in 0..cfg.pretrain_steps {
        // one mini-batch as a throwaway episode with only a support set
        let mut batch = Vec::with_capacity(cfg.pretrain_batch);
        for _ in 0..cfg.pretrain_batch {
            let (item, label) = &pool[rng.gen_range(0..pool.len())];
            batch.push((extract_item(split, item, cfg, &mut rng)?, *label));
        }
        let task = Task {
            support: batch,
            query: Vec::new(),
            label_set: (0..classes as u32).collect(),
        };
        let episode = EpisodeTask {
            task: &task,
            gcn,
            head: Head::Linear,
        };
        let (next, _) = adapt(&episode, &theta, cfg.pretrain_lr, 1)?;
        theta = next;
    }
    Ok(theta)
}

fn embed_items(
    items: &[(Subgraph, usize)],
    theta: &ParamSet,
    gcn: &GcnConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut tape = crate::autodiff::Tape::new();
    let nodes = theta.insert_as_params(&mut tape);
    let weights = gcn_weights(&nodes, gcn.layers)?;
    items
        .iter()
        .map(|(sub, _)| {
            let emb = encode_with_nodes(&mut tape, sub, &weights, gcn)?;
            let row = centroid_embedding(&mut tape, emb, sub)?;
            Ok(tape.value(row).data().to_vec())
        })
        .collect()
}

/// Majority vote over the `k` nearest support embeddings; ties break to
/// the smaller summed distance, then the lower label.
fn knn_task_accuracy(task: &Task, theta: &ParamSet, gcn: &GcnConfig, k: usize) -> Result<f64> {
    let support = embed_items(&task.support, theta, gcn)?;
    let query = embed_items(&task.query, theta, gcn)?;
    let mut correct = 0usize;
    for ((_, y), q) in task.query.iter().zip(&query) {
        let mut dists: Vec<(f64, usize)> = support
            .iter()
            .zip(task.support.iter())
            .map(|(s, (_, label))| {
                let d: f64 = s.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, *label)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut votes = vec![(0usize, 0.0f64); task.n_way()];
        for &(d, label) in dists.iter().take(k.max(1)) {
            votes[label].0 += 1;
            votes[label].1 += d;
        }
        let mut best = 0usize;
        for label in 1..votes.len() {
            let (c, d) = votes[label];
            let (bc, bd) = votes[best];
            if c > bc || (c == bc && d < bd) {
                best = label;
            }
        }
        if best == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / task.query.len().max(1) as f64)
}

fn summarize(per_task: Vec<f64>, train_log: Vec<LogRecord>, theta: Option<ParamSet>) -> MethodOutcome {
    let mean = per_task.iter().sum::<f64>() / per_task.len().max(1) as f64;
    let var = per_task.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
        / per_task.len().max(1) as f64;
    MethodOutcome {
        accuracy_mean: mean,
        accuracy_std: var.sqrt(),
        per_task,
        train_log,
        theta,
    }
}

/// Run a method end to end on a split: train it as it requires, then
/// evaluate on `cfg.test_tasks` episodes sampled from the test portion.
/// The same `cfg.seed` reproduces the exact test episodes for every
/// method, so methods are comparable on shared seeds.
pub fn run_method(method: Method, split: &MetaSplit, cfg: &MetaConfig) -> Result<MethodOutcome> {
    cfg.validate()?;
    let in_dim = split
        .graphs
        .first()
        .and_then(|g| g.features())
        .map(|f| f.cols())
        .ok_or_else(|| Error::Config("dataset graphs have no features".into()))?;
    let gcn = cfg.gcn_config(in_dim);
    let test_tasks = sample_tasks(
        split,
        Split::Test,
        cfg,
        cfg.test_tasks,
        derive_seed(cfg.seed, "test-tasks"),
    )?;

    match method {
        Method::ProtoMaml => {
            let theta0 = init_theta(cfg, &gcn, None)?;
            let trained = meta_train(split, cfg, &gcn, Head::Prototype, &theta0)?;
            let out = meta_test(&trained.theta, &test_tasks, cfg, &gcn, Head::Prototype)?;
            Ok(summarize(out.per_task, trained.log, Some(trained.theta)))
        }
        Method::ProtoNet => {
            let mut c = cfg.clone();
            c.inner_steps_train = 0;
            c.inner_steps_test = 0;
            let theta0 = init_theta(&c, &gcn, None)?;
            let trained = meta_train(split, &c, &gcn, Head::Prototype, &theta0)?;
            let out = meta_test(&trained.theta, &test_tasks, &c, &gcn, Head::Prototype)?;
            Ok(summarize(out.per_task, trained.log, Some(trained.theta)))
        }
        Method::Maml => {
            let theta0 = init_theta(cfg, &gcn, Some(cfg.n_way))?;
            let trained = meta_train(split, cfg, &gcn, Head::Linear, &theta0)?;
            let out = meta_test(&trained.theta, &test_tasks, cfg, &gcn, Head::Linear)?;
            Ok(summarize(out.per_task, trained.log, Some(trained.theta)))
        }
        Method::Knn => {
            let theta = supervised_pretrain(split, cfg, &gcn)?;
            let per_task: Result<Vec<f64>> = test_tasks
                .iter()
                .map(|t| knn_task_accuracy(t, &theta, &gcn, cfg.k_support))
                .collect();
            Ok(summarize(per_task?, Vec::new(), Some(theta)))
        }
        Method::NoFinetune => {
            let mut per_task = Vec::with_capacity(test_tasks.len());
            for (i, task) in test_tasks.iter().enumerate() {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("scratch-{i}")));
                let mut theta = init_params(&gcn, &mut rng)?;
                push_head_params(&mut theta, gcn.out_dim, task.n_way(), &mut rng)?;
                per_task.push(task_accuracy(
                    &theta,
                    task,
                    cfg,
                    &gcn,
                    Head::Linear,
                    cfg.inner_steps_test,
                )?);
            }
            Ok(summarize(per_task, Vec::new(), None))
        }
        Method::Finetune => {
            let pretrained = supervised_pretrain(split, cfg, &gcn)?;
            let encoder: Vec<(String, crate::autodiff::Tensor)> = (0..gcn.layers)
                .map(|l| {
                    let name = format!("w{l}");
                    (name.clone(), pretrained.get(&name).unwrap().clone())
                })
                .collect();
            let mut per_task = Vec::with_capacity(test_tasks.len());
            for (i, task) in test_tasks.iter().enumerate() {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("finetune-{i}")));
                let mut theta = ParamSet::new();
                for (name, tensor) in &encoder {
                    theta.insert(name, tensor.clone())?;
                }
                push_head_params(&mut theta, gcn.out_dim, task.n_way(), &mut rng)?;
                per_task.push(task_accuracy(
                    &theta,
                    task,
                    cfg,
                    &gcn,
                    Head::Linear,
                    cfg.inner_steps_test,
                )?);
            }
            Ok(summarize(per_task, Vec::new(), Some(pretrained)))
        }
    }
}
