//! Run configuration: one JSON document describing grid, timing, pulse,
//! element layout and PML, with shipped presets.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{damping_profile, Grid, Medium, Modality, Physics, PropertyMap, UnitSystem, PML_STRENGTH};
use crate::sources::{linear_probe, radar_pulse, ring_array, us_pulse, ElementArray, Layout, TransmissionSetup, Waveform};

/// Source time function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseSpec {
    Radar { f: f64, offset: usize },
    Us { f: f64, t_c: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum ArraySpec {
    Ring { n_c: usize, semi_axis_x: f64, semi_axis_z: f64 },
    Linear { n_c: usize, pitch: usize, row: usize },
    Explicit { positions: Vec<(usize, usize)> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConstants {
    pub c0: f64,
    pub mu0: f64,
}

/// `d_max = strength · c_ref / (pml_width · dx)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmlSpec {
    #[serde(default = "default_strength")]
    pub strength: f64,
    /// Reference wave speed, normally the background speed.
    pub c_ref: f64,
}

fn default_strength() -> f64 {
    PML_STRENGTH
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub unit_system: UnitSystem,
    pub modality: Modality,
    pub grid: Grid,
    pub dt: f64,
    pub n_t: usize,
    pub pulse: PulseSpec,
    /// Source scale; 0 gives an all-zero run.
    #[serde(default = "one")]
    pub amplitude: f64,
    pub array: ArraySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<EmConstants>,
    pub pml: PmlSpec,
}

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 4] = ["radar", "us-ring", "us-linear", "verasonics"];

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let us = |grid: Grid, dt: f64, n_t: usize, pulse: PulseSpec, array: ArraySpec, c_ref: f64| RunConfig {
            unit_system: UnitSystem::Si,
            modality: Modality::Acoustic,
            grid,
            dt,
            n_t,
            pulse,
            amplitude: 1.0,
            array,
            em: None,
            pml: PmlSpec {
                strength: PML_STRENGTH,
                c_ref,
            },
        };
        let us_grid = Grid {
            n_x: 100,
            n_z: 100,
            dx: 5e-4,
            pml_width: 10,
        };
        let us_pulse_spec = PulseSpec::Us { f: 3e6, t_c: 30 };
        let cfg = match name {
            // time in ns, length in cm
            "radar" => RunConfig {
                unit_system: UnitSystem::Normalized,
                modality: Modality::Em,
                grid: Grid {
                    n_x: 50,
                    n_z: 50,
                    dx: 0.6,
                    pml_width: 9,
                },
                dt: 0.005,
                n_t: 800,
                pulse: PulseSpec::Radar { f: 1.0, offset: 10 },
                amplitude: 1.0,
                array: ArraySpec::Ring {
                    n_c: 8,
                    semi_axis_x: 15.0,
                    semi_axis_z: 12.0,
                },
                em: Some(EmConstants { c0: 30.0, mu0: 0.1255 }),
                pml: PmlSpec {
                    strength: PML_STRENGTH,
                    c_ref: 30.0,
                },
            },
            "us-ring" => us(
                us_grid,
                1.4077e-7,
                240,
                us_pulse_spec,
                ArraySpec::Ring {
                    n_c: 8,
                    semi_axis_x: 30.0,
                    semi_axis_z: 30.0,
                },
                1480.0,
            ),
            "us-linear" => us(
                us_grid,
                1.4077e-7,
                240,
                us_pulse_spec,
                ArraySpec::Linear { n_c: 8, pitch: 4, row: 15 },
                1480.0,
            ),
            "verasonics" => us(
                Grid {
                    n_x: 200,
                    n_z: 100,
                    dx: 1e-4,
                    pml_width: 10,
                },
                2.2978e-8,
                520,
                PulseSpec::Us { f: 2.72e6, t_c: 30 },
                ArraySpec::Linear { n_c: 8, pitch: 3, row: 10 },
                1540.0,
            ),
            other => {
                return Err(Error::invalid(
                    "preset",
                    format!("unknown preset {other:?}; expected one of {PRESETS:?}"),
                ))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.n_t == 0 {
            return Err(Error::invalid("n_t", "must be at least 1"));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        if !(self.pml.strength >= 0.0 && self.pml.c_ref > 0.0) {
            return Err(Error::invalid("pml", "strength must be >= 0 and c_ref > 0"));
        }
        match (self.modality, self.em) {
            (Modality::Em, None) => return Err(Error::invalid("em", "EM runs need c0 and mu0")),
            (Modality::Acoustic, Some(_)) => {
                return Err(Error::invalid("em", "acoustic runs take no EM constants"))
            }
            _ => {}
        }
        self.setup().map(|_| ())
    }

    pub fn physics(&self) -> Result<Physics> {
        match (self.modality, self.em) {
            (Modality::Acoustic, _) => Ok(Physics::Acoustic),
            (Modality::Em, Some(EmConstants { c0, mu0 })) => Ok(Physics::Em { c0, mu0 }),
            (Modality::Em, None) => Err(Error::invalid("em", "EM runs need c0 and mu0")),
        }
    }

    pub fn waveform(&self) -> Result<Waveform> {
        let w = match self.pulse {
            PulseSpec::Radar { f, offset } => radar_pulse(f, self.n_t, self.dt, offset)?,
            PulseSpec::Us { f, t_c } => us_pulse(f, self.n_t, self.dt, t_c)?,
        };
        Ok(if self.amplitude == 1.0 { w } else { w.scaled(self.amplitude) })
    }

    pub fn elements(&self) -> Result<ElementArray> {
        match &self.array {
            ArraySpec::Ring {
                n_c,
                semi_axis_x,
                semi_axis_z,
            } => ring_array(*n_c, &self.grid, *semi_axis_x, *semi_axis_z),
            ArraySpec::Linear { n_c, pitch, row } => linear_probe(*n_c, &self.grid, *pitch, *row),
            ArraySpec::Explicit { positions } => ElementArray::new(positions.clone(), Layout::Explicit, &self.grid),
        }
    }

    pub fn setup(&self) -> Result<TransmissionSetup> {
        Ok(TransmissionSetup::new(self.elements()?, self.waveform()?, self.modality).in_units(self.unit_system))
    }

    pub fn d_max(&self) -> f64 {
        if self.grid.pml_width == 0 {
            return 0.0;
        }
        self.pml.strength * self.pml.c_ref / (self.grid.pml_width as f64 * self.grid.dx)
    }

    pub fn damping(&self) -> Result<Array2<f64>> {
        damping_profile(&self.grid, self.d_max())
    }

    /// Medium on this configuration's grid with the given property rasters.
    pub fn medium(&self, values: [Array2<f64>; 2]) -> Result<Medium> {
        let kinds = self.modality.property_kinds();
        let [a, b] = values;
        Medium::new(
            self.grid,
            self.physics()?,
            [PropertyMap::new(kinds[0], a)?, PropertyMap::new(kinds[1], b)?],
            self.damping()?,
        )
    }

    /// Homogeneous medium with one value per property.
    pub fn uniform_medium(&self, values: [f64; 2]) -> Result<Medium> {
        let shape = self.grid.shape();
        self.medium([Array2::from_elem(shape, values[0]), Array2::from_elem(shape, values[1])])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid("run config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::check_cfl;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn preset_shapes_and_stability() {
        let radar = RunConfig::preset("radar").unwrap();
        let s = radar.setup().unwrap();
        assert_eq!((s.n_p(), s.n_t(), s.n_c()), (8, 800, 8));
        let air = radar.uniform_medium([0.025, 1.0006]).unwrap();
        assert!(check_cfl(&air, radar.dt).passed);

        let us = RunConfig::preset("us-ring").unwrap();
        let s = us.setup().unwrap();
        assert_eq!((s.n_p(), s.n_t(), s.n_c()), (8, 240, 8));
        let liver = us.uniform_medium([1570.0, 1060.0]).unwrap();
        assert!(check_cfl(&liver, us.dt).passed);

        let v = RunConfig::preset("verasonics").unwrap();
        let s = v.setup().unwrap();
        assert_eq!(s.n_t(), 520);
        let xs: Vec<usize> = s.array.positions().iter().map(|p| p.0).collect();
        // eight middle elements straddle the centre column
        assert!(xs.iter().all(|&x| (90..=111).contains(&x)));
        let pins = v.uniform_medium([1540.0, 1030.0]).unwrap();
        assert!(check_cfl(&pins, v.dt).passed);
    }

    #[test]
    fn em_needs_constants() {
        let mut cfg = RunConfig::preset("radar").unwrap();
        cfg.em = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_amplitude_scales_waveform() {
        let mut cfg = RunConfig::preset("us-linear").unwrap();
        cfg.amplitude = 0.0;
        assert!(cfg.waveform().unwrap().samples.iter().all(|&v| v == 0.0));
    }
}
