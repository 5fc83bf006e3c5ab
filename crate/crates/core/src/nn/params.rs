use indexmap::IndexMap;

use super::real::Real;
use crate::error::{Error, Result};

/// A learnable buffer with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub dims: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn new(dims: Vec<usize>, value: Vec<T>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), value.len());
        let grad = vec![T::zero(); value.len()];
        Param { dims, value, grad }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Param::new(dims, vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named parameters in insertion order. Names are dotted paths such as
/// `ccb2.conv.weight`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: IndexMap<String, Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, param: Param<T>) -> Result<ParamId> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::validation(format!("duplicate parameter `{name}`")));
        }
        let (idx, _) = self.params.insert_full(name, param);
        Ok(ParamId(idx))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(name)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.params
            .get_index(id.0)
            .map(|(k, _)| k.as_str())
            .unwrap_or("")
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.values().map(Param::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Every parameter value, flattened in store order.
    pub fn flat_values(&self) -> Vec<T> {
        self.params
            .values()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<T> {
        self.params
            .values()
            .flat_map(|p| p.grad.iter().copied())
            .collect()
    }

    pub fn set_flat_values(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.numel(), "flat parameter vector length");
        let mut offset = 0;
        for p in self.params.values_mut() {
            let n = p.value.len();
            p.value.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }
}
