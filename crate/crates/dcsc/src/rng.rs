//! Counter-based deterministic random number generation.
//!
//! The generator is the SplitMix64 finalizer applied to a 64-bit counter
//! offset by the seed: `value(i) = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)`
//! where `mix64` is the xor-shift/multiply finalizer from Vigna's SplitMix64.
//! Every draw is a pure function of `(seed, counter)`, so streams are
//! reproducible across platforms and independent of evaluation order.
//! Gaussian variates use the Box-Muller transform on two consecutive
//! counters.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Stateless counter-keyed generator.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    fn bits(&self, counter: u64) -> u64 {
        mix64(self.seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in [0, 1) from the top 53 bits at `counter`.
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; safe as a log argument.
    fn uniform_open(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Pair of independent standard Gaussians from counters `2i` and `2i+1`.
    pub fn gaussian_pair(&self, index: u64) -> (f64, f64) {
        let u1 = self.uniform_open(2 * index);
        let u2 = self.uniform(2 * index + 1);
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// Single standard Gaussian at `index` (first of the Box-Muller pair).
    pub fn gaussian(&self, index: u64) -> f64 {
        self.gaussian_pair(index).0
    }
}
