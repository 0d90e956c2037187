//! Deterministic synthetic test images in [0, 255].
//!
//! `feature_card` carries strong axis-aligned bars on a smooth base and
//! exercises solver dynamics with high-contrast structure; `texture_card`
//! is smooth with gentle mid-frequency ridges and measures denoising
//! fidelity where graph smoothing assumptions hold.

use crate::error::Result;
use crate::image::ImageGrid;

/// Smooth base: two Gaussian blobs over a slow full-field wave.
fn smooth_base(m: usize, n: usize) -> impl Fn(usize, usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    move |r, c| {
        let (y, x) = (r as f64, c as f64);
        let blob1 = 70.0
            * (-((y - 0.3 * mf).powi(2) + (x - 0.65 * nf).powi(2)) / (2.0 * (0.18 * mf).powi(2)))
                .exp();
        let blob2 = 65.0
            * (-((y - 0.7 * mf).powi(2) + (x - 0.3 * nf).powi(2)) / (2.0 * (0.22 * mf).powi(2)))
                .exp();
        let wave = 30.0
            * (2.0 * std::f64::consts::PI * y / mf).sin()
            * (2.0 * std::f64::consts::PI * x / nf).cos();
        (120.0 + blob1 - blob2 + wave).clamp(0.0, 255.0)
    }
}

/// Smooth background plus one horizontal and one vertical high-contrast bar.
pub fn feature_card(m: usize, n: usize) -> Result<ImageGrid> {
    let base = smooth_base(m, n);
    let r0 = m / 4;
    let c0 = (7 * n) / 10;
    let bar_h = (m / 16).max(2);
    let bar_w = (n / 16).max(2);
    ImageGrid::from_fn(m, n, move |r, c| {
        if r >= r0 && r < r0 + bar_h {
            255.0
        } else if c >= c0 && c < c0 + bar_w {
            0.0
        } else {
            base(r, c)
        }
    })
}

/// Smooth blobs with a band of gentle diagonal ridges.
pub fn texture_card(m: usize, n: usize) -> Result<ImageGrid> {
    let base = smooth_base(m, n);
    let mf = m as f64;
    ImageGrid::from_fn(m, n, move |r, c| {
        let (y, x) = (r as f64, c as f64);
        let envelope = (-(y - 0.5 * mf).powi(2) / (2.0 * (0.3 * mf).powi(2))).exp();
        let ridges =
            18.0 * (2.0 * std::f64::consts::PI * (x + 0.4 * y) / 24.0).sin() * envelope;
        (base(r, c) + ridges).clamp(0.0, 255.0)
    })
}
