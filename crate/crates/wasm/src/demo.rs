//! Plain-Rust demo state behind the browser bindings.

use ndarray::Array2;

use quantwave::channel::forward;
use quantwave::config::{ArraySpec, PulseSpec, RunConfig};
use quantwave::fdtd::simulate;
use quantwave::fwi::{FwiConfig, FwiSession, StepSize};
use quantwave::grid::{check_cfl, Grid, Modality};
use quantwave::metrics::nrmse;

pub type DemoResult<T> = Result<T, String>;

fn err(e: quantwave::Error) -> String {
    e.to_string()
}

/// Medium with one circular inclusion (centre and radius in pixels).
fn inclusion(run: &RunConfig, background: [f64; 2], object: [f64; 2], centre: (f64, f64), radius: f64) -> [Array2<f64>; 2] {
    let inside = |x: usize, z: usize| {
        let (dx, dz) = (x as f64 - centre.0, z as f64 - centre.1);
        dx * dx + dz * dz <= radius * radius
    };
    [0, 1].map(|j| {
        Array2::from_shape_fn(run.grid.shape(), |(x, z)| if inside(x, z) { object[j] } else { background[j] })
    })
}

fn to_f32(values: impl IntoIterator<Item = f64>) -> Vec<f32> {
    values.into_iter().map(|v| v as f32).collect()
}

pub fn demo_run(modality: Modality) -> RunConfig {
    match modality {
        Modality::Acoustic => {
            let mut run = RunConfig::preset("us-ring").expect("preset");
            run.grid = Grid {
                n_x: 80,
                n_z: 80,
                dx: 5e-4,
                pml_width: 10,
            };
            run.n_t = 320;
            run.array = ArraySpec::Ring {
                n_c: 8,
                semi_axis_x: 26.0,
                semi_axis_z: 26.0,
            };
            run
        }
        Modality::Em => RunConfig::preset("radar").expect("preset"),
    }
}

/// Object values used by the demo for each modality.
fn materials(modality: Modality) -> ([f64; 2], [f64; 2]) {
    match modality {
        Modality::Acoustic => ([1480.0, 1000.0], [1570.0, 1060.0]),
        Modality::Em => ([0.025, 1.0006], [1.5829, 61.065]),
    }
}

/// One transmission's full wavefield and the matching channel data.
pub struct WaveDemo {
    pub n_t: usize,
    pub n_x: usize,
    pub n_z: usize,
    pub n_c: usize,
    frames: Vec<f32>,
    channel: Vec<f32>,
    pub elements: Vec<(usize, usize)>,
    pub peak: f32,
    pub cfl: String,
}

impl WaveDemo {
    pub fn new(modality: Modality, centre: (f64, f64), radius: f64, transmit: usize) -> DemoResult<Self> {
        let run = demo_run(modality);
        let (bg, obj) = materials(modality);
        let medium = run.medium(inclusion(&run, bg, obj, centre, radius)).map_err(err)?;
        let setup = run.setup().map_err(err)?;
        if transmit >= setup.n_p() {
            return Err(format!("transmitter {transmit} out of range 0..{}", setup.n_p()));
        }
        let cfl = check_cfl(&medium, run.dt).to_string();
        let history = simulate(&medium, &setup, transmit).map_err(err)?;
        let elements = setup.array.positions().to_vec();
        let n_c = elements.len();
        let channel = to_f32((0..run.n_t).flat_map(|t| {
            let h = &history;
            elements.iter().map(move |&(x, z)| h.frames[[t, x, z]])
        }));
        let frames = to_f32(history.frames.iter().copied());
        let peak = frames.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        Ok(WaveDemo {
            n_t: run.n_t,
            n_x: run.grid.n_x,
            n_z: run.grid.n_z,
            n_c,
            frames,
            channel,
            elements,
            peak,
            cfl,
        })
    }

    /// Frame `t`, row-major with x as the slow axis.
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.n_x * self.n_z;
        let t = t.min(self.n_t - 1);
        &self.frames[t * n..(t + 1) * n]
    }

    /// Received traces, `[t][c]`.
    pub fn channel_data(&self) -> &[f32] {
        &self.channel
    }
}

/// Ring-array FWI on a 40x40 grid, one iteration at a time.
pub struct InversionDemo {
    session: FwiSession,
    truth: Array2<f64>,
    bounds: (f64, f64),
    pub n_x: usize,
    pub n_z: usize,
}

pub const FWI_BACKGROUND: f64 = 1480.0;

pub fn fwi_run() -> RunConfig {
    let mut run = RunConfig::preset("us-ring").expect("preset");
    run.grid = Grid {
        n_x: 40,
        n_z: 40,
        dx: 5e-4,
        pml_width: 8,
    };
    run.dt = 1e-7;
    run.n_t = 150;
    run.pulse = PulseSpec::Us { f: 1.5e6, t_c: 20 };
    run.array = ArraySpec::Ring {
        n_c: 8,
        semi_axis_x: 11.0,
        semi_axis_z: 11.0,
    };
    run
}

impl InversionDemo {
    /// Truth has a sound-speed inclusion of `contrast` (relative) at `centre`.
    pub fn new(centre: (f64, f64), radius: f64, contrast: f64, iterations: usize) -> DemoResult<Self> {
        let run = fwi_run();
        let object = FWI_BACKGROUND * (1.0 + contrast);
        let truth = run
            .medium(inclusion(&run, [FWI_BACKGROUND, 1000.0], [object, 1000.0], centre, radius))
            .map_err(err)?;
        let setup = run.setup().map_err(err)?;
        let measured = forward(&truth, &setup).map_err(err)?;
        let lo = FWI_BACKGROUND.min(object);
        let hi = FWI_BACKGROUND.max(object);
        let bounds = (lo - 0.05 * FWI_BACKGROUND, hi + 0.05 * FWI_BACKGROUND);
        let mut config = FwiConfig::new(
            run.uniform_medium([FWI_BACKGROUND, 1000.0]).map_err(err)?,
            iterations,
            [bounds, (900.0, 1100.0)],
        );
        config.steps = [StepSize::Auto, StepSize::Frozen];
        let session = FwiSession::new(measured, setup, config).map_err(err)?;
        Ok(InversionDemo {
            session,
            truth: truth.property(0).values().clone(),
            bounds,
            n_x: run.grid.n_x,
            n_z: run.grid.n_z,
        })
    }

    /// One gradient step; returns the new loss.
    pub fn step(&mut self) -> DemoResult<f64> {
        Ok(self.session.step().map_err(err)?.loss)
    }

    pub fn loss(&self) -> f64 {
        self.session.loss().total()
    }

    pub fn iteration(&self) -> usize {
        self.session.iterations_done()
    }

    pub fn finished(&self) -> bool {
        self.session.is_finished()
    }

    pub fn sound_speed(&self) -> Vec<f32> {
        to_f32(self.session.medium().property(0).values().iter().copied())
    }

    pub fn truth(&self) -> Vec<f32> {
        to_f32(self.truth.iter().copied())
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Sound-speed NRMSE of the current estimate.
    pub fn nrmse(&self) -> f64 {
        nrmse(self.session.medium().property(0).values(), &self.truth, self.bounds.0, self.bounds.1)
            .expect("shapes match")
    }
}
