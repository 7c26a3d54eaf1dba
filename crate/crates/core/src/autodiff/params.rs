use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::array::NumArray;
use crate::error::{Error, Result};

/// Index of a tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named collection of learnable tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<NumArray>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: NumArray) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &NumArray {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut NumArray {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &NumArray)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(NumArray::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(NumArray::is_finite)
    }
}

/// Gradients keyed by parameter; only parameters that took part in a
/// recorded graph are present.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<ParamId, NumArray>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: ParamId) -> Result<&NumArray> {
        self.grads
            .get(&id)
            .ok_or_else(|| Error::Lookup(format!("no gradient recorded for parameter {}", id.0)))
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.grads.contains_key(&id)
    }

    pub fn insert_or_add(&mut self, id: ParamId, g: NumArray) {
        match self.grads.get_mut(&id) {
            Some(existing) => existing.add_assign(&g),
            None => {
                self.grads.insert(id, g);
            }
        }
    }

    /// `self += scale * other`.
    pub fn accumulate_scaled(&mut self, other: &Gradients, scale: f64) {
        for (id, g) in &other.grads {
            match self.grads.get_mut(id) {
                Some(existing) => existing.add_scaled(g, scale),
                None => {
                    let mut g = g.clone();
                    g.scale_in_place(scale);
                    self.grads.insert(*id, g);
                }
            }
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        self.accumulate_scaled(other, 1.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.grads.values_mut().for_each(|g| g.scale_in_place(s));
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.values().map(NumArray::sum_squares).sum::<f64>().sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.grads.values().all(NumArray::is_finite)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &NumArray)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
