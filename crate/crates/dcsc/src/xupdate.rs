//! Frequency-domain solution of the coefficient-map subproblem.
//!
//! The subproblem minimizes
//!   1/2 ||sum_k d_k * x_k - s||^2 + rho/2 sum_k ||x_k - y_k + u_k||^2.
//! In the frequency domain each bin decouples into an independent
//! K-dimensional system (D^H D + rho I) x = D^H s + rho (y - u) where D is
//! the 1 x K row of filter transforms at that bin. D^H D is rank one, so
//! the Sherman-Morrison identity solves each bin in O(K).

use crate::coeffs::CoeffMapSet;
use crate::dictionary::{Dictionary, DictionaryFreq};
use crate::error::{Error, Result};
use crate::fft2::Fft2;
use crate::image::ImageGrid;
use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

/// Transformed target signal, dictionary spectra, and penalty for the
/// coefficient update.
pub struct XUpdateWorkspace {
    dict_freq: DictionaryFreq,
    s_hat: Array2<Complex64>,
    rho: f64,
    fft: Fft2,
}

impl XUpdateWorkspace {
    /// `target` is the (highpass) signal the convolution sum should fit.
    pub fn new(dict: &Dictionary, target: &ImageGrid, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Parameter(format!("penalty rho must be positive, got {rho}")));
        }
        let (m, n) = (target.height(), target.width());
        let dict_freq = dict.to_frequency(m, n)?;
        let fft = Fft2::new(m, n);
        let s_hat = fft.forward_real(&target.data().view());
        Ok(XUpdateWorkspace { dict_freq, s_hat, rho, fft })
    }

    pub fn from_frequency(dict_freq: DictionaryFreq, target: &ImageGrid, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Parameter(format!("penalty rho must be positive, got {rho}")));
        }
        if dict_freq.height() != target.height() || dict_freq.width() != target.width() {
            return Err(Error::Dimension("dictionary spectra do not match target".into()));
        }
        let fft = Fft2::new(target.height(), target.width());
        let s_hat = fft.forward_real(&target.data().view());
        Ok(XUpdateWorkspace { dict_freq, s_hat, rho, fft })
    }

    pub fn dict_freq(&self) -> &DictionaryFreq {
        &self.dict_freq
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Solves the coefficient subproblem for fixed splitting variable `y`
    /// and multiplier `u`.
    pub fn x_update(&self, y: &CoeffMapSet, u: &CoeffMapSet) -> Result<CoeffMapSet> {
        if !y.same_shape(u) {
            return Err(Error::Dimension("y and u shapes differ".into()));
        }
        if !self.dict_freq.matches(y) {
            return Err(Error::Dimension(format!(
                "workspace is {}x{}x{} but maps are {:?}",
                self.dict_freq.filter_count(),
                self.dict_freq.height(),
                self.dict_freq.width(),
                y.shape_tuple()
            )));
        }
        let k = y.filters();
        let (m, n) = (y.height(), y.width());

        // rhs_k = conj(d_k) s + rho (y_k - u_k) in frequency
        let mut rhs: Vec<Array2<Complex64>> = (0..k)
            .into_par_iter()
            .map(|kk| {
                let mut b = Array2::from_shape_fn((m, n), |idx| {
                    Complex64::new(y.map(kk)[idx] - u.map(kk)[idx], 0.0)
                });
                self.fft.forward(&mut b);
                ndarray::Zip::from(&mut b)
                    .and(&self.s_hat)
                    .and(self.dict_freq.filter(kk))
                    .for_each(|r, &s, &d| *r = d.conj() * s + self.rho * *r);
                b
            })
            .collect();

        // t = sum_k d_k rhs_k == v^H rhs with v = conj(d); then the
        // Sherman-Morrison solve x_k = (rhs_k - conj(d_k) t / (rho + c)) / rho
        let mut t: Array2<Complex64> = Array2::zeros((m, n));
        for kk in 0..k {
            ndarray::Zip::from(&mut t)
                .and(&rhs[kk])
                .and(self.dict_freq.filter(kk))
                .for_each(|acc, &r, &d| *acc += d * r);
        }
        ndarray::Zip::from(&mut t).and(self.dict_freq.cross_energy()).for_each(|acc, &c| {
            *acc /= self.rho + c;
        });

        let inv_rho = 1.0 / self.rho;
        let maps: Vec<Array2<f64>> = rhs
            .par_iter_mut()
            .enumerate()
            .map(|(kk, b)| {
                ndarray::Zip::from(&mut *b)
                    .and(&t)
                    .and(self.dict_freq.filter(kk))
                    .for_each(|r, &tv, &d| *r = (*r - d.conj() * tv) * inv_rho);
                self.fft.inverse_real(b.clone())
            })
            .collect();

        let mut out = CoeffMapSet::zeros(k, m, n)?;
        for (kk, map) in maps.into_iter().enumerate() {
            out.map_mut(kk).assign(&map);
        }
        Ok(out)
    }
}
