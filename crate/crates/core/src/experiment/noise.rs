use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::NodalField;

/// Amplitude convention for additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// `level * max |field|` at every node.
    Max,
    /// `level * |field_i|` at node `i`.
    Relative,
}

/// `field + level A xi` with i.i.d. standard normal `xi` from a seeded stream.
pub fn add_noise(field: &NodalField, level: f64, seed: u64, mode: NoiseMode) -> Result<NodalField> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("noise level must lie in [0, 1), got {level}")));
    }
    if level == 0.0 {
        return Ok(field.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amax = field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let values = field
        .values()
        .iter()
        .map(|&v| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let a = match mode {
                NoiseMode::Max => amax,
                NoiseMode::Relative => v.abs(),
            };
            v + level * a * xi
        })
        .collect();
    Ok(field.with_values(values))
}
