//! Dense multi-index arrays and the index signatures of d-tensors.

use serde::Serialize;

use crate::{Dims, Error, Result};

/// Dense row-major array with an arbitrary number of axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor { shape, data }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let data = MultiIndex::new(&shape).map(|idx| f(&idx)).collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| {
            debug_assert!(i < s, "index {i} out of extent {s}");
            acc * s + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut T {
        let o = self.offset(idx);
        &mut self.data[o]
    }

    pub fn indices(&self) -> MultiIndex {
        MultiIndex::new(&self.shape)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Tensor<T> {
    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; len],
        }
    }
}

/// Row-major iterator over all multi-indices of a shape.
#[derive(Clone, Debug)]
pub struct MultiIndex {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MultiIndex {
    pub fn new(shape: &[usize]) -> Self {
        let next = if shape.contains(&0) {
            None
        } else {
            Some(vec![0; shape.len()])
        };
        MultiIndex {
            shape: shape.to_vec(),
            next,
        }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = succ.len();
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            succ[axis] += 1;
            if succ[axis] < self.shape[axis] {
                self.next = Some(succ);
                break;
            }
            succ[axis] = 0;
        }
        Some(current)
    }
}

/// One index slot of a d-tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    TemporalUp,
    TemporalDown,
    SpatialUp,
    SpatialDown,
}

impl Slot {
    pub fn is_temporal(self) -> bool {
        matches!(self, Slot::TemporalUp | Slot::TemporalDown)
    }

    pub fn extent(self, dims: Dims) -> usize {
        if self.is_temporal() {
            dims.m
        } else {
            dims.n
        }
    }
}

/// Ordered slots plus the jet pairs that behave like a single index:
/// `(spatial-up, temporal-down)` or `(spatial-down, temporal-up)`.
///
/// Pairing does not change the transformation law (each member carries its
/// own Jacobian factor); it records which slots belong together.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexSignature {
    slots: Vec<Slot>,
    pairs: Vec<(usize, usize)>,
}

impl IndexSignature {
    pub fn new(slots: Vec<Slot>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut used = vec![false; slots.len()];
        for &(a, b) in &pairs {
            if a >= slots.len() || b >= slots.len() || a == b {
                return Err(Error::invalid(format!("jet pair ({a}, {b}) out of range")));
            }
            let ok = matches!(
                (slots[a], slots[b]),
                (Slot::SpatialUp, Slot::TemporalDown) | (Slot::SpatialDown, Slot::TemporalUp)
            );
            if !ok {
                return Err(Error::invalid(format!(
                    "jet pair ({a}, {b}) must be spatial-up/temporal-down or spatial-down/temporal-up"
                )));
            }
            for s in [a, b] {
                if std::mem::replace(&mut used[s], true) {
                    return Err(Error::invalid(format!("slot {s} is in more than one jet pair")));
                }
            }
        }
        Ok(IndexSignature { slots, pairs })
    }

    pub fn scalar() -> Self {
        IndexSignature {
            slots: Vec::new(),
            pairs: Vec::new(),
        }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn shape(&self, dims: Dims) -> Vec<usize> {
        self.slots.iter().map(|s| s.extent(dims)).collect()
    }

    /// `C^(i)_(α)`: one jet pair.
    pub fn liouville() -> Self {
        Self::new(vec![Slot::SpatialUp, Slot::TemporalDown], vec![(0, 1)]).unwrap()
    }

    /// `ε^(i)_(α)β` and `J^(i)_(α)β` without the trailing spatial slot.
    pub fn first_invariant() -> Self {
        Self::new(
            vec![Slot::SpatialUp, Slot::TemporalDown, Slot::TemporalDown],
            vec![(0, 1)],
        )
        .unwrap()
    }

    /// `J^(i)_(α)βj`.
    pub fn normalization() -> Self {
        Self::new(
            vec![Slot::SpatialUp, Slot::TemporalDown, Slot::TemporalDown, Slot::SpatialDown],
            vec![(0, 1)],
        )
        .unwrap()
    }

    /// `P^i_j`.
    pub fn deviation() -> Self {
        Self::new(vec![Slot::SpatialUp, Slot::SpatialDown], vec![]).unwrap()
    }

    /// `R^{iα}_{jk}` laid out as `[i, α, j, k]`; `(k, α)` is the jet pair.
    pub fn third_invariant() -> Self {
        Self::new(
            vec![Slot::SpatialUp, Slot::TemporalUp, Slot::SpatialDown, Slot::SpatialDown],
            vec![(3, 1)],
        )
        .unwrap()
    }

    /// `B^{iα(β)}_{jk(l)}` laid out as `[i, α, j, k, l, β]`.
    pub fn fourth_invariant() -> Self {
        Self::new(
            vec![
                Slot::SpatialUp,
                Slot::TemporalUp,
                Slot::SpatialDown,
                Slot::SpatialDown,
                Slot::SpatialDown,
                Slot::TemporalUp,
            ],
            vec![(3, 1), (4, 5)],
        )
        .unwrap()
    }

    /// `D^(i)(γ)(ε)(μ)_(α)β(j)(k)(l)` laid out as `[i, α, β, j, γ, k, ε, l, μ]`.
    pub fn fifth_invariant() -> Self {
        Self::new(
            vec![
                Slot::SpatialUp,
                Slot::TemporalDown,
                Slot::TemporalDown,
                Slot::SpatialDown,
                Slot::TemporalUp,
                Slot::SpatialDown,
                Slot::TemporalUp,
                Slot::SpatialDown,
                Slot::TemporalUp,
            ],
            vec![(0, 1), (3, 4), (5, 6), (7, 8)],
        )
        .unwrap()
    }
}

/// Numeric components of a d-tensor at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct DTensorValue {
    pub signature: IndexSignature,
    pub values: Tensor<f64>,
}

impl DTensorValue {
    pub fn new(signature: IndexSignature, dims: Dims, values: Vec<f64>) -> Result<Self> {
        let shape = signature.shape(dims);
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "d-tensor needs {expected} components for shape {shape:?}, got {}",
                values.len()
            )));
        }
        Ok(DTensorValue {
            signature,
            values: Tensor::from_vec(shape, values),
        })
    }

    pub fn scalar(value: f64) -> Self {
        DTensorValue {
            signature: IndexSignature::scalar(),
            values: Tensor::from_vec(vec![], vec![value]),
        }
    }

    /// Max over components of `|a - b| / max(|a|, |b|, floor)`.
    pub fn max_relative_deviation(&self, other: &DTensorValue, floor: f64) -> f64 {
        assert_eq!(self.values.shape(), other.values.shape());
        self.values
            .data()
            .iter()
            .zip(other.values.data())
            .map(|(&a, &b)| relative_deviation(a, b, floor))
            .fold(0.0, f64::max)
    }
}

pub fn relative_deviation(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
