//! Circular convolution sums, their adjoint, and the Tikhonov lowpass
//! split used to remove the DC/smooth component before sparse coding.
//!
//! All operators assume periodic boundary conditions, which makes the
//! frequency-domain solvers exact.

use crate::coeffs::CoeffMapSet;
use crate::dictionary::{Dictionary, DictionaryFreq};
use crate::error::{Error, Result};
use crate::fft2::Fft2;
use crate::image::ImageGrid;
use ndarray::{Array2, Zip};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

/// sum_k d_k * x_k with circular boundary, computed in the frequency domain.
pub fn circular_convolve_sum(dict: &Dictionary, coeffs: &CoeffMapSet) -> Result<ImageGrid> {
    if dict.filter_count() != coeffs.filters() {
        return Err(Error::Dimension(format!(
            "dictionary has {} filters, coefficient set has {}",
            dict.filter_count(),
            coeffs.filters()
        )));
    }
    let df = dict.to_frequency(coeffs.height(), coeffs.width())?;
    convolve_sum_freq(&df, coeffs)
}

/// Convolution sum against a pre-transformed dictionary.
pub fn convolve_sum_freq(df: &DictionaryFreq, coeffs: &CoeffMapSet) -> Result<ImageGrid> {
    if !df.matches(coeffs) {
        return Err(Error::Dimension(format!(
            "frequency dictionary is {}x{}x{}, coefficient set is {:?}",
            df.filter_count(),
            df.height(),
            df.width(),
            coeffs.shape_tuple()
        )));
    }
    if !coeffs.is_finite() {
        return Err(Error::NonFinite("coefficient maps contain NaN or Inf".into()));
    }
    let fft = Fft2::new(df.height(), df.width());
    let spectra: Vec<Array2<Complex64>> = (0..coeffs.filters())
        .into_par_iter()
        .map(|k| fft.forward_real(&coeffs.map(k)))
        .collect();
    let mut acc: Array2<Complex64> = Array2::zeros((df.height(), df.width()));
    for (k, spec) in spectra.iter().enumerate() {
        Zip::from(&mut acc).and(spec).and(df.filter(k)).for_each(|a, &x, &d| *a += d * x);
    }
    ImageGrid::new(fft.inverse_real(acc))
}

/// Adjoint of the convolution sum: circular correlation of `image` with
/// every filter (conjugate multiplication in frequency).
pub fn circular_correlate_sum(dict: &Dictionary, image: &ImageGrid) -> Result<CoeffMapSet> {
    let df = dict.to_frequency(image.height(), image.width())?;
    correlate_freq(&df, image)
}

pub fn correlate_freq(df: &DictionaryFreq, image: &ImageGrid) -> Result<CoeffMapSet> {
    if df.height() != image.height() || df.width() != image.width() {
        return Err(Error::Dimension(format!(
            "frequency dictionary is {}x{}, image is {}x{}",
            df.height(),
            df.width(),
            image.height(),
            image.width()
        )));
    }
    let fft = Fft2::new(df.height(), df.width());
    let spec = fft.forward_real(&image.data().view());
    let maps: Vec<Array2<f64>> = (0..df.filter_count())
        .into_par_iter()
        .map(|k| {
            let mut prod = Array2::zeros(spec.dim());
            Zip::from(&mut prod).and(&spec).and(df.filter(k)).for_each(|o, &s, &d| {
                *o = d.conj() * s;
            });
            fft.inverse_real(prod)
        })
        .collect();
    let mut out = CoeffMapSet::zeros(df.filter_count(), df.height(), df.width())?;
    for (k, m) in maps.into_iter().enumerate() {
        out.map_mut(k).assign(&m);
    }
    Ok(out)
}

/// Splits an image into a Tikhonov-smoothed lowpass component and the
/// residual highpass, solving (I + strength * (Dx'Dx + Dy'Dy)) low = image
/// in the frequency domain with circular boundary. `low + high == image`
/// up to rounding.
pub fn lowpass_split(image: &ImageGrid, strength: f64) -> Result<(ImageGrid, ImageGrid)> {
    if !(strength > 0.0) {
        return Err(Error::Parameter(format!("lowpass strength must be positive, got {strength}")));
    }
    let (m, n) = (image.height(), image.width());
    let fft = Fft2::new(m, n);
    let mut spec = fft.forward_real(&image.data().view());
    for r in 0..m {
        let fr = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * r as f64 / m as f64).cos();
        for c in 0..n {
            let fc = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * c as f64 / n as f64).cos();
            spec[[r, c]] /= 1.0 + strength * (fr + fc);
        }
    }
    let low = fft.inverse_real(spec);
    let high = image.data() - &low;
    Ok((ImageGrid::new(low)?, ImageGrid::new(high)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    /// Naive quadruple-loop spatial circular convolution oracle.
    fn naive_conv_sum(dict: &Dictionary, coeffs: &CoeffMapSet) -> Array2<f64> {
        let (m, n) = (coeffs.height(), coeffs.width());
        let p = dict.filter_size();
        let mut out = Array2::zeros((m, n));
        for k in 0..dict.filter_count() {
            for r in 0..m {
                for c in 0..n {
                    let mut acc = 0.0;
                    for i in 0..p {
                        for j in 0..p {
                            let rr = (r + m - i % m) % m;
                            let cc = (c + n - j % n) % n;
                            acc += dict.filter(k)[[i, j]] * coeffs.map(k)[[rr, cc]];
                        }
                    }
                    out[[r, c]] += acc;
                }
            }
        }
        out
    }

    fn seeded_coeffs(k: usize, m: usize, n: usize, seed: u64) -> CoeffMapSet {
        let rng = crate::rng::CounterRng::new(seed);
        let mut i = 0u64;
        CoeffMapSet::new(Array3::from_shape_fn((k, m, n), |_| {
            i += 1;
            rng.uniform(i) * 2.0 - 1.0
        }))
        .unwrap()
    }

    #[test]
    fn identity_filter_passes_through() {
        let dict = Dictionary::from_filters(Array3::from_elem((1, 1, 1), 1.0)).unwrap();
        let coeffs = seeded_coeffs(1, 6, 5, 9);
        let out = circular_convolve_sum(&dict, &coeffs).unwrap();
        for (a, b) in out.data().iter().zip(coeffs.map(0).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let dict = Dictionary::fallback(4, 3, 0).unwrap();
        let coeffs = CoeffMapSet::zeros(4, 8, 8).unwrap();
        let out = circular_convolve_sum(&dict, &coeffs).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn matches_naive_spatial_oracle() {
        let rng = crate::rng::CounterRng::new(11);
        let mut i = 1000u64;
        let filters = Array3::from_shape_fn((2, 2, 2), |_| {
            i += 1;
            rng.uniform(i) - 0.5
        });
        let dict = Dictionary::from_filters(filters).unwrap();
        let coeffs = seeded_coeffs(2, 4, 4, 5);
        let fast = circular_convolve_sum(&dict, &coeffs).unwrap();
        let slow = naive_conv_sum(&dict, &coeffs);
        for (a, b) in fast.data().iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn filter_count_mismatch_rejected() {
        let dict = Dictionary::fallback(3, 2, 0).unwrap();
        let coeffs = CoeffMapSet::zeros(2, 8, 8).unwrap();
        assert!(matches!(circular_convolve_sum(&dict, &coeffs), Err(Error::Dimension(_))));
    }

    #[test]
    fn correlate_is_adjoint_of_convolve() {
        // <D x, e> == <x, D' e> for random x, e.
        let dict = Dictionary::fallback(3, 3, 2).unwrap();
        let x = seeded_coeffs(3, 6, 7, 1);
        let e = ImageGrid::from_fn(6, 7, |r, c| ((r * 13 + c * 7) % 11) as f64 - 5.0).unwrap();
        let dx = circular_convolve_sum(&dict, &x).unwrap();
        let dte = circular_correlate_sum(&dict, &e).unwrap();
        let lhs: f64 = dx.data().iter().zip(e.data().iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(dte.data().iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lowpass_constant_is_untouched() {
        let img = ImageGrid::from_fn(6, 6, |_, _| 42.0).unwrap();
        let (low, high) = lowpass_split(&img, 5.0).unwrap();
        for v in low.data().iter() {
            assert!((v - 42.0).abs() < 1e-10);
        }
        for v in high.data().iter() {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn lowpass_identity_limit() {
        let img = ImageGrid::from_fn(8, 8, |r, c| ((r * 8 + c) % 17) as f64).unwrap();
        let (low, high) = lowpass_split(&img, 1e-12).unwrap();
        for (a, b) in low.data().iter().zip(img.data().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(high.data().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn lowpass_matches_dense_solve() {
        // Dense oracle: materialize A = I + s (Dr'Dr + Dc'Dc) with circular
        // forward differences and solve by Gaussian elimination.
        let (m, n, s) = (8, 8, 5.0);
        let img = ImageGrid::from_fn(m, n, |r, c| if (r + c) % 2 == 0 { 255.0 } else { 0.0 }).unwrap();
        let mn = m * n;
        let idx = |r: usize, c: usize| r * n + c;
        let mut a = vec![vec![0.0f64; mn]; mn];
        for r in 0..m {
            for c in 0..n {
                a[idx(r, c)][idx(r, c)] += 1.0;
                // row-direction difference: f(r+1,c) - f(r,c)
                let pairs =
                    [(idx((r + 1) % m, c), idx(r, c)), (idx(r, (c + 1) % n), idx(r, c))];
                for (hi, lo) in pairs {
                    a[hi][hi] += s;
                    a[lo][lo] += s;
                    a[hi][lo] -= s;
                    a[lo][hi] -= s;
                }
            }
        }
        let mut b: Vec<f64> = img.data().iter().cloned().collect();
        // gaussian elimination with partial pivoting
        for col in 0..mn {
            let piv = (col..mn).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            for row in col + 1..mn {
                let f = a[row][col] / d;
                if f != 0.0 {
                    for k in col..mn {
                        a[row][k] -= f * a[col][k];
                    }
                    b[row] -= f * b[col];
                }
            }
        }
        for col in (0..mn).rev() {
            let mut acc = b[col];
            for k in col + 1..mn {
                acc -= a[col][k] * b[k];
            }
            b[col] = acc / a[col][col];
        }
        let (low, high) = lowpass_split(&img, s).unwrap();
        for r in 0..m {
            for c in 0..n {
                assert!((low.data()[[r, c]] - b[idx(r, c)]).abs() < 1e-8);
                assert!((high.data()[[r, c]] - (img.data()[[r, c]] - b[idx(r, c)])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lowpass_rejects_nonpositive_strength() {
        let img = ImageGrid::zeros(4, 4).unwrap();
        assert!(lowpass_split(&img, 0.0).is_err());
        assert!(lowpass_split(&img, -1.0).is_err());
    }
}
