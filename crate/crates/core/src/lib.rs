//! Forward wave modelling, channel-data processing and full waveform
//! inversion for quantitative ultrasound and microwave imaging.

pub mod channel;
pub mod config;
pub mod error;
pub mod fdtd;
pub mod fwi;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod phantoms;
pub mod service;
pub mod sources;
mod parallel;
mod stencil;

pub use error::{Error, Result};
