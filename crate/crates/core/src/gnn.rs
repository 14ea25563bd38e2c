//! GCN encoding of local subgraphs.
//!
//! Layer rule: `H' = act(rownorm(A) * H * W)` where A is the subgraph
//! adjacency, optionally with self-loops added before normalization.
//! The centroid node's final-layer row represents the subgraph; pair
//! subgraphs are read out as the elementwise product of the two
//! endpoint rows.

use crate::autodiff::{NodeId, ParamNodes, ParamSet, Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::Subgraph;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Encoder hyperparameters. `layers` normally equals the subgraph hop.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GcnConfig {
    pub layers: usize,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub self_loops: bool,
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config(
                "gcn layers and dimensions must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Weight shapes per layer: in -> hidden -> ... -> out.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.layers);
        for l in 0..self.layers {
            let rows = if l == 0 { self.in_dim } else { self.hidden_dim };
            let cols = if l + 1 == self.layers {
                self.out_dim
            } else {
                self.hidden_dim
            };
            dims.push((rows, cols));
        }
        dims
    }
}

/// Glorot-uniform initialization, deterministic given the RNG state.
/// Weights are named `w0..w{L-1}`.
pub fn init_params(cfg: &GcnConfig, rng: &mut impl Rng) -> Result<ParamSet> {
    cfg.validate()?;
    let mut params = ParamSet::new();
    for (l, (rows, cols)) in cfg.layer_dims().into_iter().enumerate() {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        params.insert(&format!("w{l}"), Tensor::new(rows, cols, data)?)?;
    }
    Ok(params)
}

/// Row-normalized adjacency of a subgraph as a constant tape node.
fn normalized_adjacency(tape: &mut Tape, sub: &Subgraph, self_loops: bool) -> Result<NodeId> {
    let n = sub.graph.node_count();
    let mut adj = Tensor::zeros(n, n);
    for (u, v) in sub.graph.edges() {
        adj.set(u as usize, v as usize, 1.0);
        adj.set(v as usize, u as usize, 1.0);
    }
    if self_loops {
        for i in 0..n {
            adj.set(i, i, 1.0);
        }
    }
    let a = tape.constant(adj);
    tape.row_normalize(a)
}

/// Record the GCN forward pass over a subgraph, with weights already on
/// the tape. Returns the node-embedding matrix node.
pub fn encode_with_nodes(
    tape: &mut Tape,
    sub: &Subgraph,
    weights: &[NodeId],
    cfg: &GcnConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    if weights.len() != cfg.layers {
        return Err(Error::Config(format!(
            "expected {} weight tensors, got {}",
            cfg.layers,
            weights.len()
        )));
    }
    let features = sub
        .graph
        .features()
        .ok_or_else(|| Error::Config("subgraph has no features".into()))?;
    if features.cols() != cfg.in_dim {
        return Err(Error::ShapeMismatch(format!(
            "feature width {} != configured in_dim {}",
            features.cols(),
            cfg.in_dim
        )));
    }
    let a_hat = normalized_adjacency(tape, sub, cfg.self_loops)?;
    let mut h = tape.constant(features.clone());
    for &w in weights {
        let hw = tape.matmul(h, w)?;
        let agg = tape.matmul(a_hat, hw)?;
        h = match cfg.activation {
            Activation::Relu => tape.relu(agg)?,
            Activation::Identity => agg,
        };
    }
    Ok(h)
}

/// Convenience wrapper inserting `params` as differentiable leaves.
pub fn encode(sub: &Subgraph, params: &ParamSet, cfg: &GcnConfig, tape: &mut Tape) -> Result<NodeId> {
    let nodes = params.insert_as_params(tape);
    let weights = gcn_weights(&nodes, cfg.layers)?;
    encode_with_nodes(tape, sub, &weights, cfg)
}

/// Pull the `w0..w{L-1}` node ids out of a parameter node set.
pub fn gcn_weights(params: &ParamNodes, layers: usize) -> Result<Vec<NodeId>> {
    (0..layers)
        .map(|l| {
            params
                .get(&format!("w{l}"))
                .ok_or_else(|| Error::Config(format!("missing parameter w{l}")))
        })
        .collect()
}

/// The subgraph representation: centroid row for node subgraphs, or the
/// elementwise product of the two endpoint rows for pair subgraphs.
pub fn centroid_embedding(tape: &mut Tape, embeddings: NodeId, sub: &Subgraph) -> Result<NodeId> {
    if sub.pair_local.is_some() {
        return pair_embedding(tape, embeddings, sub);
    }
    validate_rows(tape, embeddings, sub)?;
    tape.gather_rows(embeddings, &[sub.centroid_local])
}

/// Pair readout; errors when the subgraph carries no pair marker.
pub fn pair_embedding(tape: &mut Tape, embeddings: NodeId, sub: &Subgraph) -> Result<NodeId> {
    let (a, b) = sub
        .pair_local
        .ok_or_else(|| Error::Config("pair readout requested but pair_local unset".into()))?;
    validate_rows(tape, embeddings, sub)?;
    let ra = tape.gather_rows(embeddings, &[a])?;
    let rb = tape.gather_rows(embeddings, &[b])?;
    tape.mul(ra, rb)
}

fn validate_rows(tape: &Tape, embeddings: NodeId, sub: &Subgraph) -> Result<()> {
    let rows = tape.value(embeddings).rows();
    if rows != sub.graph.node_count() {
        return Err(Error::ShapeMismatch(format!(
            "embedding rows {} != subgraph nodes {}",
            rows,
            sub.graph.node_count()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{extract_subgraph, Graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_cfg(layers: usize) -> GcnConfig {
        GcnConfig {
            layers,
            in_dim: 1,
            hidden_dim: 1,
            out_dim: 1,
            activation: Activation::Identity,
            self_loops: false,
        }
    }

    fn path3_subgraph() -> Subgraph {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)])
            .unwrap()
            .with_features(Tensor::new(3, 1, vec![1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        extract_subgraph(&g, 1, 1, 1000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn identity_weights(tape: &mut Tape, layers: usize) -> Vec<NodeId> {
        (0..layers).map(|_| tape.param(Tensor::identity(1))).collect()
    }

    #[test]
    fn one_layer_identity_weights_is_one_averaging_step() {
        let sub = path3_subgraph();
        let mut tape = Tape::new();
        let w = identity_weights(&mut tape, 1);
        let h = encode_with_nodes(&mut tape, &sub, &w, &identity_cfg(1)).unwrap();
        let out: Vec<f64> = tape.value(h).data().to_vec();
        assert_eq!(out, vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn two_layers_identity_weights_is_the_squared_propagation() {
        let sub = path3_subgraph();
        let mut tape = Tape::new();
        let w = identity_weights(&mut tape, 2);
        let h = encode_with_nodes(&mut tape, &sub, &w, &identity_cfg(2)).unwrap();
        let out: Vec<f64> = tape.value(h).data().to_vec();
        assert_eq!(out, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn matrix_power_oracle_for_identity_regime() {
        // Random graph: encode with identity act/weights == A_hat^L * X.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut edges = Vec::new();
        for u in 0..12u32 {
            for v in (u + 1)..12 {
                if rng.gen_bool(0.3) {
                    edges.push((u, v));
                }
            }
        }
        let n = 12;
        let feats: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = Graph::from_edges(n, &edges)
            .unwrap()
            .with_features(Tensor::new(n, 2, feats).unwrap())
            .unwrap();
        let sub = extract_subgraph(&g, 0, 3, 1000, &mut rng).unwrap();

        let layers = 3;
        let cfg = GcnConfig {
            layers,
            in_dim: 2,
            hidden_dim: 2,
            out_dim: 2,
            activation: Activation::Identity,
            self_loops: false,
        };
        let mut tape = Tape::new();
        let w: Vec<NodeId> = (0..layers).map(|_| tape.param(Tensor::identity(2))).collect();
        let h = encode_with_nodes(&mut tape, &sub, &w, &cfg).unwrap();

        // independent dense oracle
        let sn = sub.graph.node_count();
        let mut ahat = Tensor::zeros(sn, sn);
        for (u, v) in sub.graph.edges() {
            ahat.set(u as usize, v as usize, 1.0);
            ahat.set(v as usize, u as usize, 1.0);
        }
        for r in 0..sn {
            let s: f64 = ahat.row(r).iter().sum();
            if s > 0.0 {
                for c in 0..sn {
                    ahat.set(r, c, ahat.at(r, c) / s);
                }
            }
        }
        let mut expect = sub.graph.features().unwrap().clone();
        for _ in 0..layers {
            expect = ahat.matmul(&expect).unwrap();
        }
        for (a, b) in tape.value(h).data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_node_subgraph_with_self_loop_passes_features_through_weights() {
        let g = Graph::from_edges(1, &[])
            .unwrap()
            .with_features(Tensor::new(1, 2, vec![3.0, -4.0]).unwrap())
            .unwrap();
        let sub = extract_subgraph(&g, 0, 0, 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let cfg = GcnConfig {
            layers: 1,
            in_dim: 2,
            hidden_dim: 2,
            out_dim: 2,
            activation: Activation::Relu,
            self_loops: true,
        };
        let mut tape = Tape::new();
        let w = tape.param(Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let h = encode_with_nodes(&mut tape, &sub, &[w], &cfg).unwrap();
        assert_eq!(tape.value(h).data(), &[3.0, 0.0]);
    }

    #[test]
    fn init_params_shapes_bounds_and_determinism() {
        let cfg = GcnConfig {
            layers: 2,
            in_dim: 5,
            hidden_dim: 128,
            out_dim: 128,
            activation: Activation::Relu,
            self_loops: true,
        };
        let p1 = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let p2 = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.get("w0").unwrap().shape(), (5, 128));
        assert_eq!(p1.get("w1").unwrap().shape(), (128, 128));
        let limit0 = (6.0f64 / (5 + 128) as f64).sqrt();
        assert!(p1.get("w0").unwrap().data().iter().all(|v| v.abs() <= limit0));
    }

    #[test]
    fn feature_width_mismatch_errors() {
        let sub = path3_subgraph();
        let cfg = GcnConfig {
            layers: 1,
            in_dim: 7,
            hidden_dim: 4,
            out_dim: 4,
            activation: Activation::Relu,
            self_loops: true,
        };
        let mut tape = Tape::new();
        let w = tape.param(Tensor::zeros(7, 4));
        assert!(encode_with_nodes(&mut tape, &sub, &[w], &cfg).is_err());
    }

    #[test]
    fn centroid_row_and_pair_product() {
        let sub = path3_subgraph();
        let mut tape = Tape::new();
        let emb = tape.constant(Tensor::identity(3));
        let c = centroid_embedding(&mut tape, emb, &sub).unwrap();
        assert_eq!(tape.value(c).data(), &[0.0, 1.0, 0.0]);

        let g = Graph::from_edges(2, &[(0, 1)])
            .unwrap()
            .with_features(Tensor::new(2, 2, vec![0.0, 0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let pair =
            crate::graph::extract_pair_subgraph(&g, 0, 1, 1, 10, false, &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
        let emb2 = tape.constant(Tensor::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let p = centroid_embedding(&mut tape, emb2, &pair).unwrap();
        assert_eq!(tape.value(p).data(), &[3.0, 8.0]);

        // pair readout on a plain subgraph is an error
        assert!(pair_embedding(&mut tape, emb, &sub).is_err());
    }

    #[test]
    fn permuting_node_order_permutes_rows_and_keeps_centroid() {
        // Same structure entered with different node numbering.
        let feats = vec![0.3, 0.9, -0.4, 0.2, 0.8, -0.1];
        let g1 = Graph::from_edges(3, &[(0, 1), (1, 2)])
            .unwrap()
            .with_features(Tensor::new(3, 2, feats.clone()).unwrap())
            .unwrap();
        // permutation: 0->2, 1->0, 2->1 of g1
        let g2 = Graph::from_edges(3, &[(2, 0), (0, 1)])
            .unwrap()
            .with_features(
                Tensor::new(3, 2, vec![feats[2], feats[3], feats[4], feats[5], feats[0], feats[1]])
                    .unwrap(),
            )
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s1 = extract_subgraph(&g1, 1, 1, 100, &mut rng).unwrap();
        let s2 = extract_subgraph(&g2, 0, 1, 100, &mut rng).unwrap();
        let cfg = GcnConfig {
            layers: 1,
            in_dim: 2,
            hidden_dim: 2,
            out_dim: 2,
            activation: Activation::Relu,
            self_loops: true,
        };
        let w = Tensor::new(2, 2, vec![0.5, -0.2, 0.1, 0.7]).unwrap();
        let mut params = ParamSet::new();
        params.insert("w0", w).unwrap();
        let mut t1 = Tape::new();
        let h1 = encode(&s1, &params, &cfg, &mut t1).unwrap();
        let c1 = centroid_embedding(&mut t1, h1, &s1).unwrap();
        let mut t2 = Tape::new();
        let h2 = encode(&s2, &params, &cfg, &mut t2).unwrap();
        let c2 = centroid_embedding(&mut t2, h2, &s2).unwrap();
        for (a, b) in t1.value(c1).data().iter().zip(t2.value(c2).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
