//! Browser bindings: a wavefield animation, the channel data it produces and
//! an incremental FWI run.

pub mod demo;

use wasm_bindgen::prelude::*;

use demo::{InversionDemo, WaveDemo};
use quantwave::grid::Modality;

fn modality(name: &str) -> Result<Modality, JsError> {
    match name {
        "acoustic" | "us" => Ok(Modality::Acoustic),
        "em" | "radar" => Ok(Modality::Em),
        other => Err(JsError::new(&format!("unknown modality {other:?}"))),
    }
}

/// Simulated transmission with one circular inclusion.
#[wasm_bindgen]
pub struct Wavefield(WaveDemo);

#[wasm_bindgen]
impl Wavefield {
    #[wasm_bindgen(constructor)]
    pub fn new(modality_name: &str, centre_x: f64, centre_z: f64, radius: f64, transmit: usize) -> Result<Wavefield, JsError> {
        let m = modality(modality_name)?;
        WaveDemo::new(m, (centre_x, centre_z), radius, transmit)
            .map(Wavefield)
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn n_t(&self) -> usize {
        self.0.n_t
    }

    #[wasm_bindgen(getter)]
    pub fn n_x(&self) -> usize {
        self.0.n_x
    }

    #[wasm_bindgen(getter)]
    pub fn n_z(&self) -> usize {
        self.0.n_z
    }

    #[wasm_bindgen(getter)]
    pub fn n_c(&self) -> usize {
        self.0.n_c
    }

    #[wasm_bindgen(getter)]
    pub fn peak(&self) -> f32 {
        self.0.peak
    }

    #[wasm_bindgen(getter)]
    pub fn cfl(&self) -> String {
        self.0.cfl.clone()
    }

    /// Field at time step `t`, x-major.
    pub fn frame(&self, t: usize) -> Vec<f32> {
        self.0.frame(t).to_vec()
    }

    /// Traces of every element, `[t][c]`.
    pub fn channel_data(&self) -> Vec<f32> {
        self.0.channel_data().to_vec()
    }

    /// Element positions as `x0, z0, x1, z1, ...`.
    pub fn elements(&self) -> Vec<u32> {
        self.0.elements.iter().flat_map(|&(x, z)| [x as u32, z as u32]).collect()
    }
}

/// FWI on a small grid, advanced one iteration per call.
#[wasm_bindgen]
pub struct Inversion(InversionDemo);

#[wasm_bindgen]
impl Inversion {
    #[wasm_bindgen(constructor)]
    pub fn new(centre_x: f64, centre_z: f64, radius: f64, contrast: f64, iterations: usize) -> Result<Inversion, JsError> {
        InversionDemo::new((centre_x, centre_z), radius, contrast, iterations)
            .map(Inversion)
            .map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self) -> Result<f64, JsError> {
        self.0.step().map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn loss(&self) -> f64 {
        self.0.loss()
    }

    #[wasm_bindgen(getter)]
    pub fn iteration(&self) -> usize {
        self.0.iteration()
    }

    #[wasm_bindgen(getter)]
    pub fn finished(&self) -> bool {
        self.0.finished()
    }

    #[wasm_bindgen(getter)]
    pub fn nrmse(&self) -> f64 {
        self.0.nrmse()
    }

    #[wasm_bindgen(getter)]
    pub fn n_x(&self) -> usize {
        self.0.n_x
    }

    #[wasm_bindgen(getter)]
    pub fn n_z(&self) -> usize {
        self.0.n_z
    }

    #[wasm_bindgen(getter)]
    pub fn min_value(&self) -> f64 {
        self.0.bounds().0
    }

    #[wasm_bindgen(getter)]
    pub fn max_value(&self) -> f64 {
        self.0.bounds().1
    }

    pub fn sound_speed(&self) -> Vec<f32> {
        self.0.sound_speed()
    }

    pub fn truth(&self) -> Vec<f32> {
        self.0.truth()
    }
}
