//! Convolutional dictionaries: storage, file format, frequency transforms,
//! and a deterministic fallback when no trained dictionary is available.
//!
//! File layout (`CSCD` format): magic bytes `CSCD`, version `u8` (1),
//! `K: u32` little-endian, `p: u32` little-endian, then `K*p*p` `f64`
//! little-endian values, filter-major, row-major within each filter.

use crate::coeffs::CoeffMapSet;
use crate::error::{Error, Result};
use crate::fft2::Fft2;
use ndarray::{Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CSCD";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;

/// K square filters of size p x p.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    filters: Array3<f64>, // (K, p, p)
}

impl Dictionary {
    /// Wraps a (K, p, p) filter stack; values must be finite.
    pub fn from_filters(filters: Array3<f64>) -> Result<Self> {
        let (k, p, q) = filters.dim();
        if k == 0 || p == 0 {
            return Err(Error::Dimension(format!("dictionary must be nonempty, got {k}x{p}x{q}")));
        }
        if p != q {
            return Err(Error::Dimension(format!("filters must be square, got {p}x{q}")));
        }
        if !filters.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dictionary contains NaN or Inf".into()));
        }
        Ok(Dictionary { filters })
    }

    pub fn filter_count(&self) -> usize {
        self.filters.len_of(Axis(0))
    }

    pub fn filter_size(&self) -> usize {
        self.filters.len_of(Axis(1))
    }

    pub fn filter(&self, k: usize) -> ArrayView2<'_, f64> {
        self.filters.index_axis(Axis(0), k)
    }

    pub fn filters(&self) -> &Array3<f64> {
        &self.filters
    }

    /// Writes the CSCD file; a save/load round trip is bit-exact for
    /// filters already inside the unit ball.
    pub fn save(&self, path: &Path) -> Result<()> {
        let k = self.filter_count();
        let p = self.filter_size();
        let mut bytes = Vec::with_capacity(HEADER_LEN + k * p * p * 8);
        bytes.extend_from_slice(MAGIC);
        bytes.push(VERSION);
        bytes.extend_from_slice(&(k as u32).to_le_bytes());
        bytes.extend_from_slice(&(p as u32).to_le_bytes());
        for v in self.filters.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes)?;
        Ok(())
    }

    /// Loads a CSCD file. Filters with ℓ2 norm above 1 are projected onto
    /// the unit ball, removing the scale ambiguity between filters and
    /// coefficient maps.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let fail = |offset: usize, message: String| Error::Format { offset: offset as u64, message };

        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), format!("truncated header, {} bytes total", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fail(0, format!("bad magic {:?}, expected \"CSCD\"", &bytes[0..4])));
        }
        if bytes[4] != VERSION {
            return Err(fail(4, format!("unsupported version {}, expected {VERSION}", bytes[4])));
        }
        let k = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let p = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if k == 0 {
            return Err(fail(5, "filter count K must be >= 1".into()));
        }
        if p == 0 {
            return Err(fail(9, "filter size p must be >= 1".into()));
        }
        let expected = k * p * p * 8;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            let offset = HEADER_LEN + payload.len().min(expected);
            return Err(fail(
                offset,
                format!(
                    "payload is {} bytes but K={k}, p={p} requires {expected}",
                    payload.len()
                ),
            ));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(fail(HEADER_LEN + i * 8, "non-finite filter value".into()));
        }
        let mut filters = Array3::from_shape_vec((k, p, p), values).unwrap();
        // Project to the unit ball. The threshold leaves already-projected
        // filters untouched so a save/load cycle is bit-exact.
        for mut f in filters.axis_iter_mut(Axis(0)) {
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-12 {
                f.mapv_inplace(|v| v / norm);
            }
        }
        Dictionary::from_filters(filters)
    }

    /// Deterministic dictionary for running without a trained one: 2-D
    /// DCT-II basis atoms (DC excluded, ordered by increasing frequency)
    /// for the first min(K, p^2 - 1) filters, then seeded zero-mean
    /// unit-norm Gaussian filters.
    pub fn fallback(filter_count: usize, filter_size: usize, seed: u64) -> Result<Self> {
        if filter_count < 1 {
            return Err(Error::Parameter("fallback dictionary needs K >= 1".into()));
        }
        if filter_size < 2 {
            return Err(Error::Parameter("fallback dictionary needs p >= 2".into()));
        }
        let p = filter_size;
        let mut order: Vec<(usize, usize)> =
            (0..p).flat_map(|u| (0..p).map(move |v| (u, v))).filter(|&uv| uv != (0, 0)).collect();
        order.sort_by_key(|&(u, v)| (u + v, u.max(v), u));

        let mut filters = Array3::zeros((filter_count, p, p));
        let n_dct = filter_count.min(order.len());
        for (k, &(u, v)) in order[..n_dct].iter().enumerate() {
            let atom = dct_atom(p, u, v);
            let norm = atom.iter().map(|x| x * x).sum::<f64>().sqrt();
            filters.index_axis_mut(Axis(0), k).assign(&atom.map(|x| x / norm));
        }

        let rng = crate::rng::CounterRng::new(seed);
        let mut counter = 0u64;
        for k in n_dct..filter_count {
            loop {
                let mut g = Array2::from_shape_fn((p, p), |_| {
                    let v = rng.gaussian(counter);
                    counter += 1;
                    v
                });
                let mean = g.sum() / (p * p) as f64;
                g.mapv_inplace(|x| x - mean);
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    filters.index_axis_mut(Axis(0), k).assign(&g.map(|x| x / norm));
                    break;
                }
            }
        }
        Dictionary::from_filters(filters)
    }

    /// Zero-padded M x N frequency transforms of all filters.
    pub fn to_frequency(&self, height: usize, width: usize) -> Result<DictionaryFreq> {
        let p = self.filter_size();
        if p > height || p > width {
            return Err(Error::Dimension(format!(
                "filter size {p} exceeds image size {height}x{width}"
            )));
        }
        let fft = Fft2::new(height, width);
        let freq: Vec<Array2<Complex64>> = (0..self.filter_count())
            .into_par_iter()
            .map(|k| {
                let mut padded = Array2::zeros((height, width));
                padded.slice_mut(ndarray::s![..p, ..p]).assign(&self.filter(k));
                fft.forward_real(&padded.view())
            })
            .collect();
        let mut cross_energy = Array2::zeros((height, width));
        for f in &freq {
            ndarray::Zip::from(&mut cross_energy).and(f).for_each(|c, v| *c += v.norm_sqr());
        }
        Ok(DictionaryFreq { freq, cross_energy, height, width })
    }
}

fn dct_atom(p: usize, u: usize, v: usize) -> Array2<f64> {
    let scale = |k: usize| if k == 0 { (1.0 / p as f64).sqrt() } else { (2.0 / p as f64).sqrt() };
    Array2::from_shape_fn((p, p), |(i, j)| {
        scale(u)
            * ((std::f64::consts::PI * (2 * i + 1) as f64 * u as f64) / (2.0 * p as f64)).cos()
            * scale(v)
            * ((std::f64::consts::PI * (2 * j + 1) as f64 * v as f64) / (2.0 * p as f64)).cos()
    })
}

/// Frequency-domain dictionary for one image shape, with the cached
/// cross-energy sum_k |d_hat_k|^2 used by the rank-one coefficient solve.
pub struct DictionaryFreq {
    freq: Vec<Array2<Complex64>>,
    cross_energy: Array2<f64>,
    height: usize,
    width: usize,
}

impl DictionaryFreq {
    pub fn filter_count(&self) -> usize {
        self.freq.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn filter(&self, k: usize) -> &Array2<Complex64> {
        &self.freq[k]
    }

    pub fn cross_energy(&self) -> &Array2<f64> {
        &self.cross_energy
    }

    pub fn matches(&self, coeffs: &CoeffMapSet) -> bool {
        coeffs.filters() == self.filter_count()
            && coeffs.height() == self.height
            && coeffs.width() == self.width
    }
}
