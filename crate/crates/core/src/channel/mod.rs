//! Channel data: receiver sampling, the multi-transmission forward map,
//! normalization, noise and the measured-data preprocessing chain.

mod filter;
mod noise;
mod preprocess;

pub use filter::{butterworth_lpf, ButterworthLowpass, FilterMode};
pub use noise::{add_noise, add_noise_with, NoiseKind};
pub use preprocess::{preprocess_real, z_shift_pixels, PreprocessParams};

use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdtd::{flat_index, march, validate_run, FieldHistory, WaveOperator};
use crate::grid::{Medium, Modality, UnitSystem};
use crate::parallel::map_indices;
use crate::sources::{ElementArray, TransmissionSetup};

/// Received signals `M[p, t, c]`: transmission, time sample, receive channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelData {
    pub values: Array3<f64>,
    pub dt: f64,
    pub modality: Modality,
    pub unit_system: UnitSystem,
    /// Receiver ordering: channel `c` records at `element_positions[c]`.
    pub element_positions: Vec<(usize, usize)>,
}

impl ChannelData {
    pub fn new(
        values: Array3<f64>,
        dt: f64,
        modality: Modality,
        unit_system: UnitSystem,
        element_positions: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if values.dim().2 != element_positions.len() {
            return Err(Error::Shape(format!(
                "{} receive channels but {} element positions",
                values.dim().2,
                element_positions.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("channel data", "contains non-finite values"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(ChannelData {
            values,
            dt,
            modality,
            unit_system,
            element_positions,
        })
    }

    /// `(n_p, n_t, n_c)`
    pub fn shape(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn n_t(&self) -> usize {
        self.values.dim().1
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn with_values(&self, values: Array3<f64>) -> Self {
        ChannelData {
            values,
            ..self.clone()
        }
    }
}

/// Receiver sampling `R̃`: picks each element's pixel out of every frame.
pub fn sample_cd(history: &FieldHistory, array: &ElementArray) -> Result<Array2<f64>> {
    let (n_t, n_x, n_z) = history.frames.dim();
    let positions = array.positions();
    for &(ix, iz) in positions {
        if ix >= n_x || iz >= n_z {
            return Err(Error::Shape(format!(
                "element ({ix}, {iz}) outside the {n_x}x{n_z} field"
            )));
        }
    }
    Ok(Array2::from_shape_fn((n_t, positions.len()), |(t, c)| {
        let (ix, iz) = positions[c];
        history.frames[[t, ix, iz]]
    }))
}

/// Simulated channel data: every element fires in turn, all elements record.
pub fn forward(medium: &Medium, setup: &TransmissionSetup) -> Result<ChannelData> {
    validate_run(medium, setup, 0)?;
    let op = WaveOperator::new(medium, setup.dt())?;
    let n_z = medium.grid().n_z;
    let receivers: Vec<usize> = setup
        .array
        .positions()
        .iter()
        .map(|&p| flat_index(n_z, p))
        .collect();
    let (n_p, n_t, n_c) = (setup.n_p(), setup.n_t(), setup.n_c());
    let traces = map_indices(n_p, |p| transmit(&op, &receivers, p, &setup.waveform.samples));
    let mut values = Array3::zeros((n_p, n_t, n_c));
    for (p, trace) in traces.into_iter().enumerate() {
        values.slice_mut(s![p, .., ..]).assign(&trace?);
    }
    ChannelData::new(
        values,
        setup.dt(),
        setup.modality,
        setup.unit_system,
        setup.array.positions().to_vec(),
    )
}

pub(crate) fn transmit(
    op: &WaveOperator,
    receivers: &[usize],
    p: usize,
    samples: &[f64],
) -> Result<Array2<f64>> {
    let mut trace = Array2::zeros((samples.len(), receivers.len()));
    march(op, receivers[p], samples, |t, u| {
        for (c, &r) in receivers.iter().enumerate() {
            trace[[t, c]] = u[r];
        }
    })
    .map_err(|e| e.in_transmission(p))?;
    Ok(trace)
}

/// Mean and standard deviation of a pooled, flattened training set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdStats {
    pub mean: f64,
    pub std: f64,
}

impl CdStats {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::invalid("std", format!("must be positive, got {std}")));
        }
        Ok(CdStats { mean, std })
    }
}

/// Pools every entry of every tensor; population standard deviation.
pub fn cd_stats(set: &[ChannelData]) -> Result<CdStats> {
    let count: usize = set.iter().map(|cd| cd.values.len()).sum();
    if count == 0 {
        return Err(Error::invalid("training set", "is empty"));
    }
    let n = count as f64;
    let mean = set.iter().flat_map(|cd| cd.values.iter()).sum::<f64>() / n;
    let var = set
        .iter()
        .flat_map(|cd| cd.values.iter())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    if var <= 0.0 {
        return Err(Error::invalid("std", "training data is constant"));
    }
    CdStats::new(mean, var.sqrt())
}

pub fn normalize_cd(cd: &ChannelData, stats: &CdStats) -> Result<ChannelData> {
    if !(stats.std > 0.0) {
        return Err(Error::invalid("std", "must be positive"));
    }
    Ok(cd.with_values(cd.values.mapv(|v| (v - stats.mean) / stats.std)))
}
