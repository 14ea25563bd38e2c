//! The meta-training outer loop and episodic evaluation.

use crate::autodiff::{adapt, grad_through_updates, query_loss_at, ParamSet};
use crate::error::Result;
use crate::gnn::GcnConfig;
use crate::meta::proto::{EpisodeTask, Head};
use crate::meta::sample::{sample_task, MetaSplit, Split};
use crate::meta::{derive_seed, MetaConfig, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One outer-step record of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub mean_query_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub theta: ParamSet,
    pub log: Vec<LogRecord>,
    pub best_val_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub mean: f64,
    pub std: f64,
    pub per_task: Vec<f64>,
}

/// Accuracy of one episode: adapt on the support set for `inner_steps`,
/// then classify each query by its maximum class log-probability
/// (prototypes taken at the parameters of the last support evaluation).
pub fn task_accuracy(
    theta: &ParamSet,
    task: &Task,
    cfg: &MetaConfig,
    gcn: &GcnConfig,
    head: Head,
    inner_steps: usize,
) -> Result<f64> {
    let episode = EpisodeTask { task, gcn, head };
    let (adapted, proto_params) = adapt(&episode, theta, cfg.inner_lr, inner_steps)?;
    let mut tape = crate::autodiff::Tape::new();
    let a_nodes = adapted.insert_as_params(&mut tape);
    let p_nodes = proto_params.insert_as_params(&mut tape);
    let logps = episode.query_log_distributions(&mut tape, &a_nodes, &p_nodes)?;
    let mut correct = 0usize;
    for ((_, y), logp) in task.query.iter().zip(&logps) {
        let row = tape.value(*logp);
        let mut best = 0usize;
        for j in 1..row.cols() {
            if row.at(0, j) > row.at(0, best) {
                best = j;
            }
        }
        if best == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / task.query.len() as f64)
}

/// Adapt-and-classify each task, reporting mean and population standard
/// deviation of per-task accuracy.
pub fn meta_test(
    theta: &ParamSet,
    tasks: &[Task],
    cfg: &MetaConfig,
    gcn: &GcnConfig,
    head: Head,
) -> Result<TestOutcome> {
    let mut per_task = Vec::with_capacity(tasks.len());
    for task in tasks {
        per_task.push(task_accuracy(theta, task, cfg, gcn, head, cfg.inner_steps_test)?);
    }
    let mean = per_task.iter().sum::<f64>() / per_task.len().max(1) as f64;
    let var = per_task.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
        / per_task.len().max(1) as f64;
    Ok(TestOutcome {
        mean,
        std: var.sqrt(),
        per_task,
    })
}

/// Episodic meta-training. Per outer step, a batch of tasks adapts from
/// the shared parameters; the final-step query losses are summed and
/// their gradient (through the inner updates, in full mode) drives one
/// outer SGD step. Early stopping watches accuracy on a fixed set of
/// meta-validation tasks, with the configured patience in outer steps,
/// and the best-validation parameters are returned.
pub fn meta_train(
    split: &MetaSplit,
    cfg: &MetaConfig,
    gcn: &GcnConfig,
    head: Head,
    theta0: &ParamSet,
) -> Result<TrainResult> {
    cfg.validate()?;
    let mut task_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "train-tasks"));
    let mut val_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "val-tasks"));

    // fixed validation task set; absent when the split has no val pool
    let val_tasks: Vec<Task> = if cfg.val_tasks > 0 {
        let mut tasks = Vec::new();
        for _ in 0..cfg.val_tasks {
            match sample_task(split, Split::Val, cfg, &mut val_rng) {
                Ok(t) => tasks.push(t),
                Err(_) => {
                    tasks.clear();
                    break;
                }
            }
        }
        tasks
    } else {
        Vec::new()
    };

    let mut theta = theta0.clone();
    let mut best_theta = theta.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut have_val = !val_tasks.is_empty();
    let mut stale = 0usize;
    let mut log = Vec::new();

    for step in 0..cfg.epochs {
        let mut grad_sum = theta0.zeros_like();
        let mut loss_sum = 0.0;
        for _ in 0..cfg.tasks_per_batch {
            let task = sample_task(split, Split::Train, cfg, &mut task_rng)?;
            let episode = EpisodeTask {
                task: &task,
                gcn,
                head,
            };
            let (q, grad) = if cfg.inner_steps_train == 0 {
                query_loss_at(&episode, &theta)?
            } else {
                grad_through_updates(
                    &episode,
                    &theta,
                    cfg.inner_lr,
                    cfg.inner_steps_train,
                    cfg.maml_mode,
                )?
            };
            loss_sum += q;
            grad_sum.axpy(1.0, &grad)?;
        }
        theta.axpy(-cfg.outer_lr, &grad_sum)?;

        let val_acc = if have_val {
            let out = meta_test(&theta, &val_tasks, cfg, gcn, head)?;
            Some(out.mean)
        } else {
            None
        };
        log.push(LogRecord {
            step,
            mean_query_loss: loss_sum / cfg.tasks_per_batch as f64,
            val_acc,
        });
        if let Some(acc) = val_acc {
            if acc > best_val + 1e-12 {
                best_val = acc;
                best_theta = theta.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    if !have_val {
        best_theta = theta;
        have_val = false;
    }
    Ok(TrainResult {
        theta: best_theta,
        log,
        best_val_acc: if have_val { Some(best_val) } else { None },
    })
}

/// Sample a fixed set of evaluation tasks from a split portion.
pub fn sample_tasks(
    split: &MetaSplit,
    which: Split,
    cfg: &MetaConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Task>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample_task(split, which, cfg, &mut rng))
        .collect()
}
