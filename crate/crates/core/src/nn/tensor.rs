use std::fmt;

use serde::{Deserialize, Serialize};

/// Shape of an activation: a `(length, channels)` sequence or a flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Seq { len: usize, channels: usize },
    Flat(usize),
}

impl Shape {
    pub fn size(self) -> usize {
        match self {
            Shape::Seq { len, channels } => len * channels,
            Shape::Flat(n) => n,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Seq { len, channels } => write!(f, "{len}x{channels}"),
            Shape::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// Dense row-major `f64` tensor. Sequence data is stored time-major:
/// element `(t, c)` lives at `t * channels + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    /// Panics if `data.len()` disagrees with the shape.
    pub fn new(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(shape.size(), data.len(), "tensor data does not match shape {shape}");
        Self { shape, data }
    }

    pub fn seq(len: usize, channels: usize, data: Vec<f64>) -> Self {
        Self::new(Shape::Seq { len, channels }, data)
    }

    pub fn flat(data: Vec<f64>) -> Self {
        Self::new(Shape::Flat(data.len()), data)
    }

    pub fn zeros(shape: Shape) -> Self {
        Self { shape, data: vec![0.0; shape.size()] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn reshape(self, shape: Shape) -> Self {
        Self::new(shape, self.data)
    }
}
