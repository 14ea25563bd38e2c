//! Episodic meta-learning over local subgraphs: task sampling for the
//! three node-classification problems and link prediction, prototype
//! heads, the meta-training loop, and the subgraph-level baselines.

pub mod baselines;
pub mod proto;
pub mod sample;
pub mod train;

pub use baselines::{run_method, supervised_pretrain, Method, MethodOutcome};
pub use proto::{class_distribution, class_log_distribution, proto_loss, prototypes, EpisodeTask, Head};
pub use sample::{build_split, sample_task, EdgeSplit, MetaSplit, Split};
pub use train::{meta_test, meta_train, LogRecord, TestOutcome, TrainResult};

use crate::autodiff::MamlMode;
use crate::error::{Error, Result};
use crate::gnn::{Activation, GcnConfig};
use crate::graph::Subgraph;
use serde::{Deserialize, Serialize};

/// The four graph meta-learning problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// One graph, disjoint label sets across meta-splits.
    SingleDisjoint,
    /// Many graphs, one shared label set; whole graphs are held out.
    MultiShared,
    /// Many graphs, disjoint label sets; episodes may span graphs.
    MultiDisjoint,
    /// Few-shot link prediction across graphs.
    Link,
}

/// One episode: a support set for adaptation and a query set for
/// evaluation, with labels locally renumbered to `0..n_way`.
#[derive(Debug, Clone)]
pub struct Task {
    pub support: Vec<(Subgraph, usize)>,
    pub query: Vec<(Subgraph, usize)>,
    /// Global label of each local class id.
    pub label_set: Vec<u32>,
}

impl Task {
    pub fn n_way(&self) -> usize {
        self.label_set.len()
    }

    /// Check the episode shape: `k_support` per class in the support
    /// set, equal per-class query counts, and in-range labels.
    pub fn validate(&self, k_support: usize) -> Result<()> {
        let n = self.n_way();
        let mut sup = vec![0usize; n];
        for (_, y) in &self.support {
            if *y >= n {
                return Err(Error::Sampling(format!("support label {y} out of range")));
            }
            sup[*y] += 1;
        }
        if sup.iter().any(|&c| c != k_support) {
            return Err(Error::Sampling(format!(
                "support counts {sup:?} != {k_support} per class"
            )));
        }
        let mut qry = vec![0usize; n];
        for (_, y) in &self.query {
            if *y >= n {
                return Err(Error::Sampling(format!("query label {y} out of range")));
            }
            qry[*y] += 1;
        }
        if qry.iter().any(|&c| c != qry[0]) || qry[0] == 0 {
            return Err(Error::Sampling(format!(
                "query counts {qry:?} must be equal and positive"
            )));
        }
        Ok(())
    }
}

/// Hyperparameters for episode construction and the two optimization
/// loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaConfig {
    pub n_way: usize,
    pub k_support: usize,
    /// Per-class query budget; shrunk to availability, equal per class.
    pub k_query: usize,
    pub hop: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_steps_train: usize,
    pub inner_steps_test: usize,
    pub tasks_per_batch: usize,
    /// Outer-loop step budget.
    pub epochs: usize,
    /// Outer steps without a meta-validation improvement before stopping.
    pub patience: usize,
    pub val_tasks: usize,
    pub test_tasks: usize,
    pub seed: u64,
    pub maml_mode: MamlMode,
    pub subgraph_cap: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Degree-feature width substituted when a dataset has no features.
    pub feature_dim: usize,
    /// Disjoint-label split sizes.
    pub test_labels: usize,
    pub val_labels: usize,
    /// Supervised pretraining budget (KNN / Finetune baselines).
    pub pretrain_steps: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self::synthetic_node(0)
    }
}

impl MetaConfig {
    /// Defaults for the synthetic node-classification benchmarks:
    /// 2-way 1-shot, hop-2 subgraphs, 5 inner steps in training and 10
    /// in testing.
    pub fn synthetic_node(seed: u64) -> Self {
        Self {
            n_way: 2,
            k_support: 1,
            k_query: 16,
            hop: 2,
            inner_lr: 1e-2,
            outer_lr: 5e-3,
            inner_steps_train: 5,
            inner_steps_test: 10,
            tasks_per_batch: 8,
            epochs: 120,
            patience: 10,
            val_tasks: 16,
            test_tasks: 40,
            seed,
            maml_mode: MamlMode::Full,
            subgraph_cap: 1000,
            hidden_dim: 64,
            out_dim: 64,
            feature_dim: 16,
            test_labels: 2,
            val_labels: 2,
            pretrain_steps: 300,
            pretrain_batch: 32,
            pretrain_lr: 1e-2,
        }
    }

    /// Defaults for few-shot link prediction: binary, 16-shot, hop-2
    /// pair subgraphs, 10/20 inner steps.
    pub fn link(seed: u64) -> Self {
        Self {
            n_way: 2,
            k_support: 16,
            k_query: 16,
            hop: 2,
            inner_lr: 1e-2,
            outer_lr: 1e-3,
            inner_steps_train: 10,
            inner_steps_test: 20,
            tasks_per_batch: 4,
            epochs: 80,
            patience: 10,
            val_tasks: 8,
            test_tasks: 20,
            seed,
            maml_mode: MamlMode::Full,
            subgraph_cap: 1000,
            hidden_dim: 64,
            out_dim: 64,
            feature_dim: 16,
            test_labels: 0,
            val_labels: 0,
            pretrain_steps: 300,
            pretrain_batch: 32,
            pretrain_lr: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 {
            return Err(Error::Config("n_way must be >= 2".into()));
        }
        if self.k_support == 0 || self.k_query == 0 {
            return Err(Error::Config("shot counts must be >= 1".into()));
        }
        if self.hop == 0 || self.subgraph_cap == 0 {
            return Err(Error::Config("hop and subgraph cap must be >= 1".into()));
        }
        if !(self.inner_lr > 0.0) || !(self.outer_lr >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.tasks_per_batch == 0 {
            return Err(Error::Config("tasks_per_batch must be >= 1".into()));
        }
        Ok(())
    }

    /// Encoder configuration for a dataset with `in_dim`-wide features.
    pub fn gcn_config(&self, in_dim: usize) -> GcnConfig {
        GcnConfig {
            layers: self.hop,
            in_dim,
            hidden_dim: self.hidden_dim,
            out_dim: self.out_dim,
            activation: Activation::Relu,
            self_loops: true,
        }
    }
}

/// Deterministic sub-stream derivation from a root seed.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the root (splitmix64 finalizer).
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = root ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
