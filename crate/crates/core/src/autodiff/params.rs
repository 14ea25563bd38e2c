//! Named parameter collections.

use crate::autodiff::tape::{NodeId, Tape};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A flat, ordered collection of named tensors (model weights).
/// Iteration order is insertion order and is part of the determinism
/// contract: gradient accumulation and serialization both follow it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        self.entries.push((name.to_string(), value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Total scalar count across all tensors.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// `self + c * other`, matched by name and shape.
    pub fn axpy(&mut self, c: f64, other: &ParamSet) -> Result<()> {
        if other.entries.len() != self.entries.len() {
            return Err(Error::ShapeMismatch("param set size mismatch".into()));
        }
        for ((name, t), (oname, ot)) in self.entries.iter_mut().zip(&other.entries) {
            if name != oname || t.shape() != ot.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "param mismatch: {name} vs {oname}"
                )));
            }
            t.axpy(c, ot);
        }
        Ok(())
    }

    /// Zero tensors with the same names and shapes.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.rows(), t.cols())))
                .collect(),
        }
    }

    /// Concatenation of all values, in insertion order (for gradient
    /// checks and norm reporting).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.numel());
        for (_, t) in &self.entries {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Rebuild from a flat vector laid out like [`ParamSet::flatten`].
    pub fn unflatten(&self, flat: &[f64]) -> Result<ParamSet> {
        if flat.len() != self.numel() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                self.numel(),
                flat.len()
            )));
        }
        let mut out = ParamSet::new();
        let mut offset = 0;
        for (name, t) in &self.entries {
            let take = t.len();
            let tensor = Tensor::new(t.rows(), t.cols(), flat[offset..offset + take].to_vec())?;
            out.insert(name, tensor)?;
            offset += take;
        }
        Ok(out)
    }

    /// Insert every tensor as a differentiable leaf on a tape.
    pub fn insert_as_params(&self, tape: &mut Tape) -> ParamNodes {
        ParamNodes {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), tape.param(t.clone())))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("param set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad param set json: {e}")))
    }
}

/// Tape node ids for a parameter set, in the set's order.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    entries: Vec<(String, NodeId)>,
}

impl ParamNodes {
    pub fn from_pairs(entries: Vec<(String, NodeId)>) -> Self {
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.entries.iter().map(|(_, id)| *id).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.entries.iter().map(|(n, id)| (n.as_str(), *id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Current tape values as a ParamSet.
    pub fn values(&self, tape: &Tape) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, id)| (n.clone(), tape.value(*id).clone()))
                .collect(),
        }
    }
}
