//! 2D FFT on row-major arrays, built from 1D rustfft plans.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Cached forward/inverse plans for one (rows, cols) shape.
///
/// Transforms are unnormalized in the forward direction; the inverse
/// applies the 1/(rows*cols) factor so `inverse(forward(x)) == x`.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn transform(&self, data: &mut Array2<Complex64>, forward: bool) {
        assert_eq!(data.dim(), (self.rows, self.cols), "fft shape mismatch");
        let (row_plan, col_plan) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };

        let buf = data.as_slice_mut().expect("array must be contiguous");
        let mut scratch = vec![Complex64::default(); row_plan.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(self.cols) {
            row_plan.process_with_scratch(row, &mut scratch);
        }

        // Columns: transpose, FFT rows of the transpose, transpose back.
        let mut tr = vec![Complex64::default(); self.rows * self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                tr[c * self.rows + r] = buf[r * self.cols + c];
            }
        }
        scratch.resize(col_plan.get_inplace_scratch_len(), Complex64::default());
        for col in tr.chunks_exact_mut(self.rows) {
            col_plan.process_with_scratch(col, &mut scratch);
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                buf[r * self.cols + c] = tr[c * self.rows + r];
            }
        }
    }

    /// Forward transform of a real array.
    pub fn forward_real(&self, data: &ndarray::ArrayView2<f64>) -> Array2<Complex64> {
        let mut out = data.map(|&v| Complex64::new(v, 0.0));
        self.transform(&mut out, true);
        out
    }

    /// In-place forward transform.
    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.transform(data, true);
    }

    /// In-place inverse transform, normalized by 1/(rows*cols).
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        self.transform(data, false);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        data.mapv_inplace(|v| v * scale);
    }

    /// Inverse transform returning the real part; the caller is responsible
    /// for the input being (numerically) the spectrum of a real signal.
    pub fn inverse_real(&self, mut data: Array2<Complex64>) -> Array2<f64> {
        self.inverse(&mut data);
        data.map(|v| v.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn roundtrip_identity() {
        let fft = Fft2::new(5, 7);
        let data = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 * 0.37 - 3.0);
        let spec = fft.forward_real(&data.view());
        let back = fft.inverse_real(spec);
        for (a, b) in data.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_sum() {
        let fft = Fft2::new(4, 4);
        let data = Array2::from_elem((4, 4), 2.5);
        let spec = fft.forward_real(&data.view());
        assert!((spec[[0, 0]].re - 40.0).abs() < 1e-12);
        assert!(spec[[0, 0]].im.abs() < 1e-12);
        assert!(spec[[1, 2]].norm() < 1e-12);
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let fft = Fft2::new(8, 8);
        let mut data = Array2::zeros((8, 8));
        data[[0, 0]] = 1.0;
        let spec = fft.forward_real(&data.view());
        for v in spec.iter() {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }
}
