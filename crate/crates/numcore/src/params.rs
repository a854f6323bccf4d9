use std::collections::HashMap;

use crate::{AnyTensor, NumError, Scalar, Tape, Tensor, Var};

/// Ordered collection of named parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts (or replaces) a tensor and returns its slot.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> usize {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            self.entries[i].1 = t;
            return i;
        }
        self.entries.push((name.clone(), t));
        self.index.insert(name, self.entries.len() - 1);
        self.entries.len() - 1
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.slot(name).map(|i| &self.entries[i].1)
    }

    pub fn at(&self, slot: usize) -> &Tensor<T> {
        &self.entries[slot].1
    }

    pub fn at_mut(&mut self, slot: usize) -> &mut Tensor<T> {
        &mut self.entries[slot].1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    /// Records every tensor on the tape, in slot order.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Vec<Var> {
        self.entries.iter().map(|(_, t)| tape.leaf(t.clone(), requires_grad)).collect()
    }

    /// Shapes must match slot for slot.
    pub fn same_layout(&self, other: &ParamStore<T>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, a), (nb, b))| na == nb && a.shape() == b.shape())
    }

    pub fn to_named(&self) -> Vec<(String, AnyTensor)> {
        self.entries.iter().map(|(n, t)| (n.clone(), AnyTensor::from_typed(t))).collect()
    }

    /// Builds a store holding exactly the tensors named in `layout`, converting
    /// precision where needed.
    pub fn from_named(named: &[(String, AnyTensor)], layout: &ParamStore<T>) -> Result<Self, NumError> {
        let lookup: HashMap<&str, &AnyTensor> = named.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let mut out = ParamStore::new();
        for (name, t) in layout.iter() {
            let src = lookup
                .get(name)
                .ok_or_else(|| NumError::Format(format!("missing tensor `{name}`")))?;
            let typed: Tensor<T> = src.to_typed();
            if typed.shape() != t.shape() {
                return Err(NumError::Format(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    typed.shape(),
                    t.shape()
                )));
            }
            out.insert(name, typed);
        }
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for (n, t) in self.iter() {
            out.insert(n, t.cast());
        }
        out
    }
}
