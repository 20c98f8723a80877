//! Source waveforms and transmit/receive element layouts.

use std::collections::HashSet;
use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Modality, UnitSystem};

/// Sampled source time function.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub center_frequency: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, dt: f64, center_frequency: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "waveform needs at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("samples", "waveform contains non-finite values"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(Waveform {
            samples,
            dt,
            center_frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scaled(&self, a: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| a * s).collect(),
            ..self.clone()
        }
    }
}

/// Envelope constant of the radar pulse, in the configuration's time unit.
pub const RADAR_ENVELOPE: f64 = 0.3;

fn radar_shape(f: f64, t: f64, envelope: f64) -> f64 {
    (2.0 * PI * f * t).sin() * (-2.0 * PI * t * t / (envelope * envelope)).exp()
}

/// Gaussian-modulated sine `sin(2πft)·exp(−2πt²/0.3²)` starting `offset`
/// samples in, scaled to unit peak amplitude.
pub fn radar_pulse(f: f64, n_t: usize, dt: f64, offset: usize) -> Result<Waveform> {
    radar_pulse_with_envelope(f, n_t, dt, offset, RADAR_ENVELOPE)
}

pub fn radar_pulse_with_envelope(
    f: f64,
    n_t: usize,
    dt: f64,
    offset: usize,
    envelope: f64,
) -> Result<Waveform> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::invalid("f", format!("must be positive, got {f}")));
    }
    if offset >= n_t {
        return Err(Error::invalid(
            "offset",
            format!("offset {offset} must be below n_t = {n_t}"),
        ));
    }
    if !(envelope > 0.0) {
        return Err(Error::invalid("envelope", "must be positive"));
    }
    let raw: Vec<f64> = (0..n_t)
        .map(|k| {
            if k < offset {
                0.0
            } else {
                radar_shape(f, (k - offset) as f64 * dt, envelope)
            }
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    Waveform::new(raw.into_iter().map(|v| norm * v).collect(), dt, f)
}

/// Gaussian `exp(−f²((k − t_c)dt)²)` centred on sample `t_c`, scaled by `1/dt²`.
pub fn us_pulse(f: f64, n_t: usize, dt: f64, t_c: usize) -> Result<Waveform> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::invalid("f", format!("must be positive, got {f}")));
    }
    if t_c >= n_t {
        return Err(Error::invalid(
            "t_c",
            format!("centre sample {t_c} must be below n_t = {n_t}"),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    // the unnormalized peak is exactly 1 at k = t_c
    let norm = 1.0 / (dt * dt);
    let samples = (0..n_t)
        .map(|k| {
            let tau = (k as f64 - t_c as f64) * dt;
            norm * (-(f * f) * tau * tau).exp()
        })
        .collect();
    Waveform::new(samples, dt, f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    EllipseRing,
    LinearProbe,
    Explicit,
}

/// Element positions as `(ix, iz)` pixel pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementArray {
    positions: Vec<(usize, usize)>,
    layout: Layout,
}

impl ElementArray {
    pub fn new(positions: Vec<(usize, usize)>, layout: Layout, grid: &Grid) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("positions", "need at least one element"));
        }
        let mut seen = HashSet::new();
        for &(ix, iz) in &positions {
            if !grid.is_interior(ix, iz) {
                return Err(Error::invalid(
                    "positions",
                    format!(
                        "element ({ix}, {iz}) is outside the grid interior \
                         ({}x{} with PML {})",
                        grid.n_x, grid.n_z, grid.pml_width
                    ),
                ));
            }
            if !seen.insert((ix, iz)) {
                return Err(Error::invalid(
                    "positions",
                    format!("element ({ix}, {iz}) appears twice"),
                ));
            }
        }
        Ok(ElementArray { positions, layout })
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn grid_center(grid: &Grid) -> (f64, f64) {
    ((grid.n_x / 2) as f64, (grid.n_z / 2) as f64)
}

/// `n_c` elements equally spaced in angle on an axis-aligned ellipse around
/// the grid centre, snapped to the nearest pixel.
pub fn ring_array(
    n_c: usize,
    grid: &Grid,
    semi_axis_x: f64,
    semi_axis_z: f64,
) -> Result<ElementArray> {
    if n_c == 0 {
        return Err(Error::invalid("n_c", "need at least one element"));
    }
    if !(semi_axis_x >= 0.0 && semi_axis_z >= 0.0) {
        return Err(Error::invalid("semi_axis", "semi-axes must be non-negative"));
    }
    let (cx, cz) = grid_center(grid);
    let lo = grid.pml_width as f64;
    let hi_x = (grid.n_x - 1 - grid.pml_width) as f64;
    let hi_z = (grid.n_z - 1 - grid.pml_width) as f64;
    if cx - semi_axis_x < lo || cx + semi_axis_x > hi_x || cz - semi_axis_z < lo || cz + semi_axis_z > hi_z
    {
        return Err(Error::invalid(
            "semi_axis",
            format!(
                "ellipse ({semi_axis_x}, {semi_axis_z}) around ({cx}, {cz}) leaves the region outside the PML"
            ),
        ));
    }
    let positions = (0..n_c)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n_c as f64;
            let x = (cx + semi_axis_x * phi.cos()).round();
            let z = (cz + semi_axis_z * phi.sin()).round();
            (x as usize, z as usize)
        })
        .collect();
    ElementArray::new(positions, Layout::EllipseRing, grid)
}

/// `n_c` elements along row `row`, `pitch` pixels apart, centred on the grid's
/// middle column.
pub fn linear_probe(n_c: usize, grid: &Grid, pitch: usize, row: usize) -> Result<ElementArray> {
    if n_c == 0 {
        return Err(Error::invalid("n_c", "need at least one element"));
    }
    if n_c > 1 && pitch == 0 {
        return Err(Error::invalid("pitch", "must be at least 1"));
    }
    let span = (n_c - 1) * pitch;
    let center = grid.n_x / 2;
    let half = span / 2;
    if half > center || center - half < grid.pml_width || center - half + span + grid.pml_width >= grid.n_x {
        return Err(Error::invalid(
            "pitch",
            format!("probe span {span} px does not fit in the {} px interior", grid.n_x.saturating_sub(2 * grid.pml_width)),
        ));
    }
    if row < grid.pml_width || row + grid.pml_width >= grid.n_z {
        return Err(Error::invalid("row", format!("row {row} lies in the PML band")));
    }
    let start = center - half;
    let positions = (0..n_c).map(|i| (start + i * pitch, row)).collect();
    ElementArray::new(positions, Layout::LinearProbe, grid)
}

/// Single-pixel source: `S[t]` is zero except at `position`, which carries
/// `samples[t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTensor {
    pub position: (usize, usize),
    pub samples: Vec<f64>,
    shape: (usize, usize),
}

impl SourceTensor {
    pub fn n_t(&self) -> usize {
        self.samples.len()
    }

    pub fn value(&self, t: usize, ix: usize, iz: usize) -> f64 {
        if (ix, iz) == self.position {
            self.samples[t]
        } else {
            0.0
        }
    }

    pub fn frame(&self, t: usize) -> Array2<f64> {
        let mut f = Array2::zeros(self.shape);
        f[self.position] = self.samples[t];
        f
    }
}

pub fn inject_source(waveform: &Waveform, position: (usize, usize), grid: &Grid) -> Result<SourceTensor> {
    if position.0 >= grid.n_x || position.1 >= grid.n_z {
        return Err(Error::invalid(
            "position",
            format!("{position:?} is outside the {}x{} grid", grid.n_x, grid.n_z),
        ));
    }
    Ok(SourceTensor {
        position,
        samples: waveform.samples.clone(),
        shape: grid.shape(),
    })
}

/// Geometry, pulse and timing of one acquisition: every element fires once
/// while all elements record.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionSetup {
    pub array: ElementArray,
    pub waveform: Waveform,
    pub modality: Modality,
    pub unit_system: UnitSystem,
}

impl TransmissionSetup {
    pub fn new(array: ElementArray, waveform: Waveform, modality: Modality) -> Self {
        TransmissionSetup {
            array,
            waveform,
            modality,
            unit_system: UnitSystem::Si,
        }
    }

    pub fn in_units(mut self, unit_system: UnitSystem) -> Self {
        self.unit_system = unit_system;
        self
    }

    /// Transmission count; one per element.
    pub fn n_p(&self) -> usize {
        self.array.len()
    }

    pub fn n_c(&self) -> usize {
        self.array.len()
    }

    pub fn n_t(&self) -> usize {
        self.waveform.len()
    }

    pub fn dt(&self) -> f64 {
        self.waveform.dt
    }

    /// Inter-pulse interval `T = n_t · dt`.
    pub fn interval(&self) -> f64 {
        self.n_t() as f64 * self.dt()
    }

    pub fn with_waveform(&self, waveform: Waveform) -> Self {
        TransmissionSetup {
            waveform,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn radar_pulse_matches_closed_form() {
        let (f, dt, n_t, offset) = (1.0, 0.005, 800, 10);
        let w = radar_pulse(f, n_t, dt, offset).unwrap();
        assert_eq!(w.len(), 800);
        assert!(w.samples[..offset].iter().all(|&s| s == 0.0));
        assert_eq!(w.samples[offset], 0.0);

        // dense scan of the analytic expression for the peak
        let mut best = (0usize, 0.0f64);
        for k in offset..n_t {
            let v = radar_shape(f, (k - offset) as f64 * dt, 0.3);
            if v.abs() > best.1.abs() {
                best = (k, v);
            }
        }
        let (k_peak, _) = w
            .samples
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (k, &v)| if v.abs() > acc.1.abs() { (k, v) } else { acc });
        assert_eq!(k_peak, best.0);
        assert!((w.samples[k_peak].abs() - 1.0).abs() < 1e-15);
        assert_eq!(best.0, 10 + 16);
        assert!(radar_pulse(f, 10, dt, 10).is_err());
    }

    #[test]
    fn us_pulse_peak_and_symmetry() {
        let dt = 1.4077e-7;
        let w = us_pulse(3e6, 240, dt, 30).unwrap();
        assert_eq!(w.samples[30], 1.0 / (dt * dt));
        assert!(w.samples.iter().all(|&s| s <= w.samples[30]));
        for m in 1..=30 {
            assert_eq!(w.samples[30 + m], w.samples[30 - m]);
        }
        assert!(us_pulse(3e6, 30, dt, 30).is_err());
    }

    proptest! {
        #[test]
        fn pulses_extend_with_the_closed_form(n in 40usize..120, extra in 1usize..60) {
            let a = us_pulse(3e6, n, 1.4077e-7, 30).unwrap();
            let b = us_pulse(3e6, n + extra, 1.4077e-7, 30).unwrap();
            prop_assert_eq!(&a.samples[..], &b.samples[..n]);
            // the radar peak is inside the first 40 samples
            let a = radar_pulse(1.0, n, 0.005, 10).unwrap();
            let b = radar_pulse(1.0, n + extra, 0.005, 10).unwrap();
            prop_assert_eq!(&a.samples[..], &b.samples[..n]);
        }
    }

    #[test]
    fn ring_layouts() {
        let g = make_grid(100, 100, 5e-4, 10).unwrap();
        let ring = ring_array(8, &g, 35.0, 35.0).unwrap();
        assert_eq!(ring.len(), 8);
        assert_eq!(ring.positions()[0], (85, 50));
        assert_eq!(ring.positions()[2], (50, 85));
        assert_eq!(ring.positions()[1], (75, 75));

        let four = ring_array(4, &g, 30.0, 20.0).unwrap();
        assert_eq!(four.positions(), &[(80, 50), (50, 70), (20, 50), (50, 30)]);

        // radar grid with an elongated ellipse
        let radar = make_grid(50, 50, 0.006, 9).unwrap();
        let r = ring_array(8, &radar, 15.0, 12.0).unwrap();
        for &(x, z) in r.positions() {
            assert!(radar.is_interior(x, z));
        }
        assert!(ring_array(8, &radar, 17.0, 12.0).is_err());
        assert!(ring_array(8, &g, 40.0, 10.0).is_err());
    }

    #[test]
    fn linear_probe_layouts() {
        let g = make_grid(100, 100, 5e-4, 10).unwrap();
        let p = linear_probe(8, &g, 4, 12).unwrap();
        let xs: Vec<usize> = p.positions().iter().map(|p| p.0).collect();
        assert_eq!(xs, vec![36, 40, 44, 48, 52, 56, 60, 64]);
        assert!(p.positions().iter().all(|p| p.1 == 12));
        assert_eq!(linear_probe(1, &g, 4, 12).unwrap().positions(), &[(50, 12)]);
        assert!(linear_probe(8, &g, 12, 12).is_err());
        assert!(linear_probe(8, &g, 4, 5).is_err());

        let vera = make_grid(200, 100, 1e-4, 10).unwrap();
        let p = linear_probe(8, &vera, 3, 11).unwrap();
        assert_eq!(p.positions().first(), Some(&(90, 11)));
        assert_eq!(p.positions().last(), Some(&(111, 11)));
    }

    #[test]
    fn explicit_arrays_reject_duplicates_and_pml() {
        let g = make_grid(20, 20, 1.0, 3).unwrap();
        assert!(ElementArray::new(vec![(5, 5), (5, 5)], Layout::Explicit, &g).is_err());
        assert!(ElementArray::new(vec![(2, 5)], Layout::Explicit, &g).is_err());
        assert!(ElementArray::new(vec![(5, 17)], Layout::Explicit, &g).is_err());
        ElementArray::new(vec![(3, 16)], Layout::Explicit, &g).unwrap();
    }

    #[test]
    fn source_tensor_support() {
        let g = make_grid(9, 9, 1.0, 0).unwrap();
        let w = us_pulse(0.2, 20, 1.0, 5).unwrap();
        let s = inject_source(&w, (3, 4), &g).unwrap();
        for t in 0..20 {
            let f = s.frame(t);
            assert_eq!(f.sum(), w.samples[t]);
            assert_eq!(f.iter().filter(|v| **v != 0.0).count(), 1);
        }
        let zero = Waveform::new(vec![0.0; 20], 1.0, 0.2).unwrap();
        let z = inject_source(&zero, (3, 4), &g).unwrap();
        assert!((0..20).all(|t| z.frame(t).iter().all(|&v| v == 0.0)));

        // translation between two positions
        let s2 = inject_source(&w, (5, 6), &g).unwrap();
        for t in 0..20 {
            let (a, b) = (s.frame(t), s2.frame(t));
            for ix in 0..7 {
                for iz in 0..7 {
                    assert_eq!(a[[ix, iz]], b[[ix + 2, iz + 2]]);
                }
            }
        }
        assert!(inject_source(&w, (9, 0), &g).is_err());
    }
}
