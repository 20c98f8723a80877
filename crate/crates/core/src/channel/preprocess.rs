use ndarray::{s, Array3};

use super::{cd_stats, ButterworthLowpass, CdStats, ChannelData, FilterMode};
use crate::error::{Error, Result};

/// Settings for bringing measured channel data into the simulated domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessParams {
    /// Leading time samples to drop from every trace.
    pub cut_samples: usize,
    pub cutoff: f64,
    pub order: usize,
    /// Background sound speed used to convert the cut into a depth offset.
    pub c_background: f64,
    pub dx: f64,
    pub mode: FilterMode,
}

/// Depth, in pixels, covered by the discarded leading samples.
pub fn z_shift_pixels(cut_samples: usize, dt: f64, c_background: f64, dx: f64) -> usize {
    (c_background * cut_samples as f64 * dt / dx).round() as usize
}

/// Drops the leading `cut_samples` rows, low-pass filters every trace, then
/// maps amplitudes affinely onto `target` statistics. Returns the processed
/// data and the z realignment in pixels.
pub fn preprocess_real(
    cd: &ChannelData,
    params: &PreprocessParams,
    target: &CdStats,
) -> Result<(ChannelData, usize)> {
    let (n_p, n_t, n_c) = cd.shape();
    if params.cut_samples >= n_t {
        return Err(Error::invalid(
            "cut_samples",
            format!("{} must be below n_t = {n_t}", params.cut_samples),
        ));
    }
    if !(params.dx > 0.0 && params.c_background > 0.0) {
        return Err(Error::invalid("dx", "dx and c_background must be positive"));
    }
    let lp = ButterworthLowpass::new(params.order, params.cutoff, 1.0 / cd.dt)?;
    let kept = n_t - params.cut_samples;
    let mut out = Array3::zeros((n_p, kept, n_c));
    for p in 0..n_p {
        for c in 0..n_c {
            let trace: Vec<f64> = cd
                .values
                .slice(s![p, params.cut_samples.., c])
                .iter()
                .copied()
                .collect();
            let filtered = lp.filter_with(&trace, params.mode);
            for (t, v) in filtered.into_iter().enumerate() {
                out[[p, t, c]] = v;
            }
        }
    }
    let filtered = cd.with_values(out);
    let own = cd_stats(std::slice::from_ref(&filtered))?;
    let gain = target.std / own.std;
    let matched = filtered.values.mapv(|v| (v - own.mean) * gain + target.mean);
    let shift = z_shift_pixels(params.cut_samples, cd.dt, params.c_background, params.dx);
    Ok((filtered.with_values(matched), shift))
}
