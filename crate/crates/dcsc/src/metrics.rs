//! Noise synthesis and fidelity metrics on the [0, 255] intensity scale.

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::rng::CounterRng;

/// Gaussian noise level and stream seed. Sigma lives on the [0, 255]
/// scale.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Adds i.i.d. Gaussian noise and clamps to [0, 255]. The stream comes
/// from the counter-based SplitMix64 generator (one Box-Muller draw per
/// pixel index), so the output depends only on the image contents,
/// dimensions, and seed.
pub fn add_gaussian_noise(image: &ImageGrid, spec: &NoiseSpec) -> Result<ImageGrid> {
    spec.validate()?;
    let rng = CounterRng::new(spec.seed);
    let n = image.width();
    ImageGrid::from_fn(image.height(), image.width(), |r, c| {
        let noise = spec.sigma * rng.gaussian((r * n + c) as u64);
        (image.data()[[r, c]] + noise).clamp(0.0, 255.0)
    })
}

/// Mean squared difference.
pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Dimension(format!(
            "images differ in shape: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let sum: f64 = a.data().iter().zip(b.data().iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / (a.height() * a.width()) as f64)
}

/// Peak signal-to-noise ratio in dB with peak 255:
/// 10 log10(255^2 / MSE); +inf when the images are identical.
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / err).log10())
}
