//! Stacks of coefficient maps, one M x N map per dictionary filter.

use crate::error::{Error, Result};
use ndarray::{Array3, ArrayView2, ArrayViewMut2, Axis};

/// K stacked M x N real maps. The same container serves the primal maps,
/// the auxiliary splitting variables, and the scaled multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMapSet {
    data: Array3<f64>, // (K, M, N)
}

impl CoeffMapSet {
    pub fn zeros(filters: usize, height: usize, width: usize) -> Result<Self> {
        if filters == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "coefficient maps must be nonempty, got {filters}x{height}x{width}"
            )));
        }
        Ok(CoeffMapSet { data: Array3::zeros((filters, height, width)) })
    }

    /// Wraps a (K, M, N) array, rejecting non-finite entries.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (k, m, n) = data.dim();
        if k == 0 || m == 0 || n == 0 {
            return Err(Error::Dimension(format!(
                "coefficient maps must be nonempty, got {k}x{m}x{n}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("coefficient maps contain NaN or Inf".into()));
        }
        Ok(CoeffMapSet { data })
    }

    pub fn filters(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn height(&self) -> usize {
        self.data.len_of(Axis(1))
    }

    pub fn width(&self) -> usize {
        self.data.len_of(Axis(2))
    }

    pub fn shape_tuple(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn map(&self, k: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), k)
    }

    pub fn map_mut(&mut self, k: usize) -> ArrayViewMut2<'_, f64> {
        self.data.index_axis_mut(Axis(0), k)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn same_shape(&self, other: &CoeffMapSet) -> bool {
        self.data.dim() == other.data.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}
