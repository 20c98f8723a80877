use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ChannelData;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Uniform on `[-a, a]`, so the added noise never exceeds `a`.
    #[default]
    Uniform,
    /// Zero-mean Gaussian with standard deviation `a`.
    Gaussian,
}

/// Adds white noise with amplitude `percent · max|M|` (global maximum).
pub fn add_noise(cd: &ChannelData, percent: f64, rng_seed: u64) -> Result<ChannelData> {
    add_noise_with(cd, percent, rng_seed, NoiseKind::Uniform)
}

pub fn add_noise_with(
    cd: &ChannelData,
    percent: f64,
    rng_seed: u64,
    kind: NoiseKind,
) -> Result<ChannelData> {
    if !(percent >= 0.0 && percent.is_finite()) {
        return Err(Error::invalid("percent", format!("must be non-negative, got {percent}")));
    }
    let amplitude = percent * cd.max_abs();
    if amplitude == 0.0 {
        return Ok(cd.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let values = match kind {
        NoiseKind::Uniform => cd
            .values
            .mapv(|v| v + rng.random_range(-amplitude..=amplitude)),
        NoiseKind::Gaussian => {
            let normal = Normal::new(0.0, amplitude).expect("positive std");
            cd.values.mapv(|v| v + normal.sample(&mut rng))
        }
    };
    Ok(cd.with_values(values))
}
