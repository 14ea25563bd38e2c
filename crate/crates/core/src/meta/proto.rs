//! Prototype classification head and episode loss builders.

use crate::autodiff::{InnerLoopTask, NodeId, ParamNodes, ParamSet, Tape, Tensor};
use crate::error::{Error, Result};
use crate::gnn::{centroid_embedding, encode_with_nodes, gcn_weights, GcnConfig};
use crate::meta::Task;

const PROB_FLOOR: f64 = 1e-12;

/// Class-mean prototypes: row k is the mean of the support embeddings
/// with label k. Differentiable via a constant averaging matrix.
pub fn prototypes(
    tape: &mut Tape,
    support_embeddings: NodeId,
    support_labels: &[usize],
    n_way: usize,
) -> Result<NodeId> {
    let n = support_labels.len();
    if tape.value(support_embeddings).rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} embeddings vs {} labels",
            tape.value(support_embeddings).rows(),
            n
        )));
    }
    let mut counts = vec![0usize; n_way];
    for &y in support_labels {
        if y >= n_way {
            return Err(Error::Sampling(format!("label {y} out of {n_way}-way range")));
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Sampling(format!("class {empty} has no support items")));
    }
    let mut avg = Tensor::zeros(n_way, n);
    for (i, &y) in support_labels.iter().enumerate() {
        avg.set(y, i, 1.0 / counts[y] as f64);
    }
    let avg = tape.constant(avg);
    tape.matmul(avg, support_embeddings)
}

/// Log class distribution of one embedding row against the prototype
/// matrix: log softmax over negative Euclidean distances.
pub fn class_log_distribution(tape: &mut Tape, h: NodeId, protos: NodeId) -> Result<NodeId> {
    let n_way = tape.value(protos).rows();
    let sq = tape.squared_distance(h, protos)?;
    let dist = tape.pow(sq, 0.5)?;
    let neg = tape.lincomb(&[(-1.0, dist)])?;
    let lse = tape.log_sum_exp_row(neg)?;
    let lse_row = tape.broadcast_scalar(lse, 1, n_way)?;
    tape.lincomb(&[(1.0, neg), (-1.0, lse_row)])
}

/// Class distribution (probabilities summing to one).
pub fn class_distribution(tape: &mut Tape, h: NodeId, protos: NodeId) -> Result<NodeId> {
    let logp = class_log_distribution(tape, h, protos)?;
    tape.exp(logp)
}

/// Negative log-likelihood of label `y` under distribution `p`, with
/// the probability floored at 1e-12.
pub fn proto_loss(tape: &mut Tape, p: NodeId, y: usize) -> Result<NodeId> {
    let n = tape.value(p).cols();
    if y >= n {
        return Err(Error::Sampling(format!("label {y} out of range {n}")));
    }
    let mut onehot = Tensor::zeros(1, n);
    onehot.set(0, y, 1.0);
    let onehot = tape.constant(onehot);
    let picked = tape.mul(p, onehot)?;
    let py = tape.sum_all(picked)?;
    // max(py, floor) = relu(py - floor) + floor
    let neg_floor = tape.constant(Tensor::scalar(-PROB_FLOOR));
    let floor = tape.constant(Tensor::scalar(PROB_FLOOR));
    let shifted = tape.add(py, neg_floor)?;
    let clipped = tape.relu(shifted)?;
    let clamped = tape.add(clipped, floor)?;
    let logp = tape.log(clamped)?;
    tape.lincomb(&[(-1.0, logp)])
}

/// Cross-entropy of a logits row (softmax + NLL, computed in log space).
fn linear_nll(tape: &mut Tape, logits: NodeId, y: usize) -> Result<NodeId> {
    let n = tape.value(logits).cols();
    let lse = tape.log_sum_exp_row(logits)?;
    let lse_row = tape.broadcast_scalar(lse, 1, n)?;
    let logp = tape.lincomb(&[(1.0, logits), (-1.0, lse_row)])?;
    let mut onehot = Tensor::zeros(1, n);
    onehot.set(0, y, 1.0);
    let onehot = tape.constant(onehot);
    let picked = tape.mul(logp, onehot)?;
    let picked_sum = tape.sum_all(picked)?;
    tape.lincomb(&[(-1.0, picked_sum)])
}

/// Classification head: prototype distances or a learned linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Prototype,
    Linear,
}

/// Parameter names of the linear head.
pub const HEAD_WEIGHT: &str = "head_w";
pub const HEAD_BIAS: &str = "head_b";

/// A sampled episode bound to an encoder configuration, exposing the
/// support/query losses the inner-loop machinery needs.
pub struct EpisodeTask<'a> {
    pub task: &'a Task,
    pub gcn: &'a GcnConfig,
    pub head: Head,
}

impl EpisodeTask<'_> {
    fn readout_rows(
        &self,
        tape: &mut Tape,
        items: &[(crate::graph::Subgraph, usize)],
        params: &ParamNodes,
    ) -> Result<Vec<NodeId>> {
        let weights = gcn_weights(params, self.gcn.layers)?;
        items
            .iter()
            .map(|(sub, _)| {
                let emb = encode_with_nodes(tape, sub, &weights, self.gcn)?;
                centroid_embedding(tape, emb, sub)
            })
            .collect()
    }

    fn stack_rows(&self, tape: &mut Tape, rows: &[NodeId]) -> Result<NodeId> {
        let n = rows.len();
        let mut terms = Vec::with_capacity(n);
        for (i, &r) in rows.iter().enumerate() {
            terms.push((1.0, tape.scatter_rows(r, &[i], n)?));
        }
        tape.lincomb(&terms)
    }

    /// Support prototypes at the given parameters.
    fn support_prototypes(&self, tape: &mut Tape, params: &ParamNodes) -> Result<NodeId> {
        let rows = self.readout_rows(tape, &self.task.support, params)?;
        let matrix = self.stack_rows(tape, &rows)?;
        let labels: Vec<usize> = self.task.support.iter().map(|(_, y)| *y).collect();
        prototypes(tape, matrix, &labels, self.task.n_way())
    }

    fn head_nodes(&self, params: &ParamNodes) -> Result<(NodeId, NodeId)> {
        let w = params
            .get(HEAD_WEIGHT)
            .ok_or_else(|| Error::Config(format!("missing parameter {HEAD_WEIGHT}")))?;
        let b = params
            .get(HEAD_BIAS)
            .ok_or_else(|| Error::Config(format!("missing parameter {HEAD_BIAS}")))?;
        Ok((w, b))
    }

    fn mean_loss(
        &self,
        tape: &mut Tape,
        items: &[(crate::graph::Subgraph, usize)],
        rows: &[NodeId],
        protos: Option<NodeId>,
        params: &ParamNodes,
    ) -> Result<NodeId> {
        let mut losses = Vec::with_capacity(rows.len());
        for ((_, y), &row) in items.iter().zip(rows) {
            let loss = match (self.head, protos) {
                (Head::Prototype, Some(c)) => {
                    let p = class_distribution(tape, row, c)?;
                    proto_loss(tape, p, *y)?
                }
                (Head::Linear, _) => {
                    let (w, b) = self.head_nodes(params)?;
                    let proj = tape.matmul(row, w)?;
                    let logits = tape.add(proj, b)?;
                    linear_nll(tape, logits, *y)?
                }
                (Head::Prototype, None) => unreachable!("prototype head needs prototypes"),
            };
            losses.push(loss);
        }
        let w = 1.0 / losses.len() as f64;
        let terms: Vec<(f64, NodeId)> = losses.into_iter().map(|l| (w, l)).collect();
        tape.lincomb(&terms)
    }

    /// Per-query log-distributions (for prediction), with prototypes
    /// taken at `proto_params` and query encodings at `params`.
    pub fn query_log_distributions(
        &self,
        tape: &mut Tape,
        params: &ParamNodes,
        proto_params: &ParamNodes,
    ) -> Result<Vec<NodeId>> {
        let rows = self.readout_rows(tape, &self.task.query, params)?;
        match self.head {
            Head::Prototype => {
                let protos = self.support_prototypes(tape, proto_params)?;
                rows.iter()
                    .map(|&row| class_log_distribution(tape, row, protos))
                    .collect()
            }
            Head::Linear => {
                let (w, b) = self.head_nodes(params)?;
                rows.iter()
                    .map(|&row| {
                        let proj = tape.matmul(row, w)?;
                        let logits = tape.add(proj, b)?;
                        let n = tape.value(logits).cols();
                        let lse = tape.log_sum_exp_row(logits)?;
                        let lse_row = tape.broadcast_scalar(lse, 1, n)?;
                        tape.lincomb(&[(1.0, logits), (-1.0, lse_row)])
                    })
                    .collect()
            }
        }
    }
}

impl InnerLoopTask for EpisodeTask<'_> {
    fn support_loss(&self, tape: &mut Tape, params: &ParamNodes) -> Result<NodeId> {
        let rows = self.readout_rows(tape, &self.task.support, params)?;
        let protos = match self.head {
            Head::Prototype => {
                let matrix = self.stack_rows(tape, &rows)?;
                let labels: Vec<usize> = self.task.support.iter().map(|(_, y)| *y).collect();
                Some(prototypes(tape, matrix, &labels, self.task.n_way())?)
            }
            Head::Linear => None,
        };
        self.mean_loss(tape, &self.task.support, &rows, protos, params)
    }

    fn query_loss(
        &self,
        tape: &mut Tape,
        params: &ParamNodes,
        support_params: &ParamNodes,
    ) -> Result<NodeId> {
        let rows = self.readout_rows(tape, &self.task.query, params)?;
        let protos = match self.head {
            Head::Prototype => Some(self.support_prototypes(tape, support_params)?),
            Head::Linear => None,
        };
        self.mean_loss(tape, &self.task.query, &rows, protos, params)
    }
}

/// Initialize linear-head parameters (Glorot weight, zero bias) and
/// append them to a parameter set.
pub fn push_head_params(
    params: &mut ParamSet,
    out_dim: usize,
    n_way: usize,
    rng: &mut impl rand::Rng,
) -> Result<()> {
    let limit = (6.0 / (out_dim + n_way) as f64).sqrt();
    let data: Vec<f64> = (0..out_dim * n_way)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    params.insert(HEAD_WEIGHT, Tensor::new(out_dim, n_way, data)?)?;
    params.insert(HEAD_BIAS, Tensor::zeros(1, n_way))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototype_rows_are_class_means() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let c = prototypes(&mut tape, h, &[0, 0], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[0.5, 0.5]);

        let h2 = tape.constant(Tensor::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 4.0, 4.0]).unwrap());
        let c2 = prototypes(&mut tape, h2, &[0, 0, 1], 2).unwrap();
        assert_eq!(tape.value(c2).data(), &[0.5, 0.5, 4.0, 4.0]);
    }

    #[test]
    fn singleton_class_prototype_is_the_embedding() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::new(1, 3, vec![2.0, -1.0, 0.5]).unwrap());
        let c = prototypes(&mut tape, h, &[0], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[2.0, -1.0, 0.5]);
    }

    #[test]
    fn duplicated_support_point_does_not_move_its_prototype() {
        let mut tape = Tape::new();
        let once = tape.constant(Tensor::new(2, 2, vec![3.0, 1.0, 9.0, 9.0]).unwrap());
        let c1 = prototypes(&mut tape, once, &[0, 1], 2).unwrap();
        let twice =
            tape.constant(Tensor::new(3, 2, vec![3.0, 1.0, 3.0, 1.0, 9.0, 9.0]).unwrap());
        let c2 = prototypes(&mut tape, twice, &[0, 0, 1], 2).unwrap();
        assert_eq!(tape.value(c1).data(), tape.value(c2).data());
    }

    #[test]
    fn empty_class_is_an_error() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::new(2, 2, vec![0.0; 4]).unwrap());
        assert!(prototypes(&mut tape, h, &[0, 0], 2).is_err());
    }

    #[test]
    fn equidistant_distribution_is_uniform() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::new(1, 2, vec![0.0, 0.0]).unwrap());
        let c = tape.constant(Tensor::new(3, 2, vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0]).unwrap());
        let p = class_distribution(&mut tape, h, c).unwrap();
        for v in tape.value(p).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_prototype_closed_form() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::new(1, 2, vec![0.0, 0.0]).unwrap());
        let c = tape.constant(Tensor::new(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap());
        let p = class_distribution(&mut tape, h, c).unwrap();
        let expect = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((tape.value(p).data()[0] - expect).abs() < 1e-5);
        assert!((tape.value(p).data()[0] - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn distribution_sums_to_one_and_translation_invariance() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::new(1, 3, vec![0.2, -0.4, 1.0]).unwrap());
        let c = tape.constant(Tensor::new(2, 3, vec![0.9, 0.0, 0.1, -0.3, 0.5, 0.7]).unwrap());
        let p = class_distribution(&mut tape, h, c).unwrap();
        let sum: f64 = tape.value(p).data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);

        let shift = [10.0, -5.0, 3.0];
        let h2 = tape.constant(
            Tensor::new(1, 3, vec![0.2 + shift[0], -0.4 + shift[1], 1.0 + shift[2]]).unwrap(),
        );
        let c2 = tape.constant(
            Tensor::new(
                2,
                3,
                vec![
                    0.9 + shift[0],
                    0.0 + shift[1],
                    0.1 + shift[2],
                    -0.3 + shift[0],
                    0.5 + shift[1],
                    0.7 + shift[2],
                ],
            )
            .unwrap(),
        );
        let p2 = class_distribution(&mut tape, h2, c2).unwrap();
        for (a, b) in tape.value(p).data().iter().zip(tape.value(p2).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_of_a_one_hot_distribution_is_zero() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::new(1, 3, vec![0.0, 1.0, 0.0]).unwrap());
        let l = proto_loss(&mut tape, p, 1).unwrap();
        assert!(tape.value(l).scalar_value().abs() < 1e-9);
    }

    #[test]
    fn loss_of_a_uniform_distribution_is_log_n() {
        let mut tape = Tape::new();
        let n = 5;
        let p = tape.constant(Tensor::filled(1, n, 1.0 / n as f64));
        let l = proto_loss(&mut tape, p, 3).unwrap();
        assert!((tape.value(l).scalar_value() - (n as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_probability_is_floored() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::new(1, 2, vec![1.0, 0.0]).unwrap());
        let l = proto_loss(&mut tape, p, 1).unwrap();
        assert!((tape.value(l).scalar_value() - (-(1e-12f64).ln())).abs() < 1e-6);
    }
}
