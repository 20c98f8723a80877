//! Explicit time marching for the discrete acoustic and electromagnetic wave
//! equations.
//!
//! Both schemes are two-step recursions `U[t] = W U[t-1] + B U[t-2] + w·S[t]`
//! on a flattened `[ix * n_z + iz]` raster. `U[0] = U[1] = 0` and the source
//! acts from `t = 2` onward.

mod acoustic;
mod em;

pub use acoustic::{acoustic_step, simulate_acoustic};
pub use em::{em_step, simulate_em};

pub(crate) use acoustic::AcousticOperator;
pub(crate) use em::EmOperator;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::grid::{check_cfl, Medium, Modality, Physics};
use crate::sources::TransmissionSetup;

/// Full time history of the field for one transmission, indexed `[t, ix, iz]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHistory {
    pub frames: Array3<f64>,
    pub dt: f64,
}

impl FieldHistory {
    pub fn n_t(&self) -> usize {
        self.frames.dim().0
    }

    pub fn frame(&self, t: usize) -> Array2<f64> {
        self.frames.index_axis(ndarray::Axis(0), t).to_owned()
    }

    /// Sum of squares of frame `t`.
    pub fn energy(&self, t: usize) -> f64 {
        self.frames
            .index_axis(ndarray::Axis(0), t)
            .iter()
            .map(|v| v * v)
            .sum()
    }
}

/// Scratch buffers reused across steps.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub(crate) lap: Vec<f64>,
    pub(crate) gx: Vec<f64>,
    pub(crate) gz: Vec<f64>,
}

impl Workspace {
    pub fn new(len: usize) -> Self {
        Workspace {
            lap: vec![0.0; len],
            gx: vec![0.0; len],
            gz: vec![0.0; len],
        }
    }
}

/// Precomputed update coefficients for one medium and time step.
#[derive(Clone, Debug)]
pub enum WaveOperator {
    Acoustic(AcousticOperator),
    Em(EmOperator),
}

impl WaveOperator {
    pub fn new(medium: &Medium, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(match medium.physics() {
            Physics::Acoustic => WaveOperator::Acoustic(AcousticOperator::new(medium, dt)),
            Physics::Em { c0, mu0 } => WaveOperator::Em(EmOperator::new(medium, dt, c0, mu0)),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            WaveOperator::Acoustic(op) => (op.n_x, op.n_z),
            WaveOperator::Em(op) => (op.n_x, op.n_z),
        }
    }

    pub fn len(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Homogeneous part of the update: `out = W u1 + B u2`.
    pub fn step(&self, u1: &[f64], u2: &[f64], out: &mut [f64], ws: &mut Workspace) {
        match self {
            WaveOperator::Acoustic(op) => op.step(u1, u2, out, ws),
            WaveOperator::Em(op) => op.step(u1, u2, out, ws),
        }
    }

    /// Factor multiplying the source value at pixel `i` in the update.
    pub fn source_weight(&self, i: usize) -> f64 {
        match self {
            WaveOperator::Acoustic(op) => op.dt2,
            WaveOperator::Em(op) => -op.alpha[i],
        }
    }
}

/// Steps a single point source through `n_t` frames, handing each frame to
/// the visitor. Frames 0 and 1 are zero.
pub(crate) fn march(
    op: &WaveOperator,
    source_index: usize,
    samples: &[f64],
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let n = op.len();
    let n_t = samples.len();
    let mut u2 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut ws = Workspace::new(n);
    for t in 0..n_t.min(2) {
        visit(t, &u1);
    }
    let w = op.source_weight(source_index);
    for (t, &s) in samples.iter().enumerate().skip(2) {
        op.step(&u1, &u2, &mut next, &mut ws);
        next[source_index] += w * s;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                time_index: t,
                transmit: None,
            });
        }
        visit(t, &next);
        std::mem::swap(&mut u2, &mut u1);
        std::mem::swap(&mut u1, &mut next);
    }
    Ok(())
}

pub(crate) fn flat_index(n_z: usize, (ix, iz): (usize, usize)) -> usize {
    ix * n_z + iz
}

pub(crate) fn validate_run(
    medium: &Medium,
    setup: &TransmissionSetup,
    transmit_index: usize,
) -> Result<()> {
    if medium.modality() != setup.modality {
        return Err(Error::invalid(
            "modality",
            format!("medium is {:?} but setup is {:?}", medium.modality(), setup.modality),
        ));
    }
    if transmit_index >= setup.n_p() {
        return Err(Error::invalid(
            "transmit_index",
            format!("{transmit_index} out of range for {} transmissions", setup.n_p()),
        ));
    }
    let grid = medium.grid();
    for &(ix, iz) in setup.array.positions() {
        if ix >= grid.n_x || iz >= grid.n_z {
            return Err(Error::Shape(format!(
                "element ({ix}, {iz}) outside the {}x{} grid",
                grid.n_x, grid.n_z
            )));
        }
    }
    let report = check_cfl(medium, setup.dt());
    if !report.passed {
        return Err(Error::Cfl(report));
    }
    Ok(())
}

/// Runs one transmission with the stepper matching the medium.
pub fn simulate(
    medium: &Medium,
    setup: &TransmissionSetup,
    transmit_index: usize,
) -> Result<FieldHistory> {
    validate_run(medium, setup, transmit_index)?;
    let op = WaveOperator::new(medium, setup.dt())?;
    let grid = medium.grid();
    let n_t = setup.n_t();
    let mut frames = Array3::zeros((n_t, grid.n_x, grid.n_z));
    let src = flat_index(grid.n_z, setup.array.positions()[transmit_index]);
    let data = frames
        .as_slice_mut()
        .expect("fresh array is contiguous");
    let n = grid.len();
    march(&op, src, &setup.waveform.samples, |t, u| {
        data[t * n..(t + 1) * n].copy_from_slice(u);
    })?;
    Ok(FieldHistory {
        frames,
        dt: setup.dt(),
    })
}

pub(crate) fn require_modality(medium: &Medium, modality: Modality) -> Result<()> {
    if medium.modality() != modality {
        return Err(Error::invalid(
            "medium",
            format!("expected a {modality:?} medium, got {:?}", medium.modality()),
        ));
    }
    Ok(())
}

/// Shared body of the single-step public entry points.
pub(crate) fn single_step(
    op: &WaveOperator,
    u_prev: &Array2<f64>,
    u_prev2: &Array2<f64>,
    s_t: &Array2<f64>,
) -> Result<Array2<f64>> {
    let shape = op.shape();
    for (name, a) in [("u_prev", u_prev), ("u_prev2", u_prev2), ("s_t", s_t)] {
        if a.dim() != shape {
            return Err(Error::Shape(format!("{name} is {:?}, grid is {shape:?}", a.dim())));
        }
    }
    let u1 = u_prev.as_standard_layout();
    let u2 = u_prev2.as_standard_layout();
    let s = s_t.as_standard_layout();
    let (u1, u2, s) = (
        u1.as_slice().expect("standard layout"),
        u2.as_slice().expect("standard layout"),
        s.as_slice().expect("standard layout"),
    );
    let mut out = vec![0.0; op.len()];
    let mut ws = Workspace::new(op.len());
    op.step(u1, u2, &mut out, &mut ws);
    for (i, (o, &si)) in out.iter_mut().zip(s).enumerate() {
        if si != 0.0 {
            *o += op.source_weight(i) * si;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            time_index: 0,
            transmit: None,
        });
    }
    Ok(Array2::from_shape_vec(shape, out).expect("shape matches"))
}
