use ndarray::Array2;

use super::{require_modality, simulate, single_step, FieldHistory, WaveOperator, Workspace};
use crate::error::Result;
use crate::grid::{Medium, Modality};
use crate::sources::TransmissionSetup;
use crate::stencil::laplacian;

/// Coefficients of the lossy scalar EM update
///
/// `U[t] = α⊙∇²U[t-1] + (2 − β)⊙U[t-1] + (β − 1)⊙U[t-2] − α⊙S[t]`
///
/// with `α = (dt·c0)²/εr` and `β = σμ0·dt·c0²/εr`. The PML enters as an extra
/// conductivity `σ_pml = 2Dεr/(μ0c0²)`, i.e. `β` gains `2D·dt`.
#[derive(Clone, Debug)]
pub struct EmOperator {
    pub(crate) n_x: usize,
    pub(crate) n_z: usize,
    pub(crate) inv_dx2: f64,
    pub(crate) dt: f64,
    pub(crate) c0: f64,
    pub(crate) mu0: f64,
    pub(crate) alpha: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) conductivity: Vec<f64>,
    pub(crate) permittivity: Vec<f64>,
}

impl EmOperator {
    pub(crate) fn new(medium: &Medium, dt: f64, c0: f64, mu0: f64) -> Self {
        let grid = medium.grid();
        let (n_x, n_z) = grid.shape();
        let flat = |a: &Array2<f64>| a.as_standard_layout().iter().copied().collect::<Vec<_>>();
        let conductivity = flat(medium.property(0).values());
        let permittivity = flat(medium.property(1).values());
        let damping = flat(medium.damping());
        let c2 = c0 * c0;
        let alpha = permittivity.iter().map(|e| dt * dt * c2 / e).collect();
        let beta = conductivity
            .iter()
            .zip(&permittivity)
            .zip(&damping)
            .map(|((s, e), d)| s * mu0 * dt * c2 / e + 2.0 * d * dt)
            .collect();
        EmOperator {
            n_x,
            n_z,
            inv_dx2: 1.0 / (grid.dx * grid.dx),
            dt,
            c0,
            mu0,
            alpha,
            beta,
            conductivity,
            permittivity,
        }
    }

    pub(crate) fn step(&self, u1: &[f64], u2: &[f64], out: &mut [f64], ws: &mut Workspace) {
        laplacian(u1, self.n_x, self.n_z, self.inv_dx2, &mut ws.lap);
        for i in 0..out.len() {
            let beta = self.beta[i];
            out[i] = self.alpha[i] * ws.lap[i] + (2.0 - beta) * u1[i] + (beta - 1.0) * u2[i];
        }
    }
}

/// One update of the discrete EM wave equation; the source enters as `−α⊙S[t]`.
pub fn em_step(
    u_prev: &Array2<f64>,
    u_prev2: &Array2<f64>,
    medium: &Medium,
    s_t: &Array2<f64>,
    dt: f64,
) -> Result<Array2<f64>> {
    require_modality(medium, Modality::Em)?;
    let op = WaveOperator::new(medium, dt)?;
    single_step(&op, u_prev, u_prev2, s_t)
}

pub fn simulate_em(
    medium: &Medium,
    setup: &TransmissionSetup,
    transmit_index: usize,
) -> Result<FieldHistory> {
    require_modality(medium, Modality::Em)?;
    simulate(medium, setup, transmit_index)
}
