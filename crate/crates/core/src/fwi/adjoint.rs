//! Adjoint-state gradients of the channel-data misfit.
//!
//! The forward recursion is `U[t] = W U[t-1] + B U[t-2] + w s[t] e_src` for
//! `t >= 2`. With the residual `r[t] = Rᵀ(M̂[t] − M[t])` the adjoint runs
//! backwards as `λ[t] = r[t] + Wᵀ λ[t+1] + B λ[t+2]`, and the derivative with
//! respect to a property is `Σ_t λ[t]ᵀ ∂(step t)/∂θ`.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelData;
use crate::error::{Error, Result};
use crate::fdtd::{flat_index, validate_run, AcousticOperator, EmOperator, WaveOperator, Workspace};
use crate::grid::Medium;
use crate::parallel::map_indices;
use crate::sources::TransmissionSetup;
use crate::stencil::{grad_edge_adjoint_add, grad_x, grad_z, laplacian};

/// How forward frames are kept for the backward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    /// Every frame stays in memory.
    #[default]
    Full,
    /// Keep a pair of frames every `interval` steps and recompute the rest.
    Checkpoint { interval: usize },
}

/// Misfit value and its derivative for every property map.
#[derive(Clone, Debug, PartialEq)]
pub struct DataGradient {
    /// `½‖M̂ − M‖²`
    pub data_term: f64,
    pub grads: [Array2<f64>; 2],
}

/// `½‖M̂ − M‖²` summed over transmissions, samples and channels.
pub fn data_misfit(measured: &ChannelData, predicted: &ChannelData) -> Result<f64> {
    if measured.shape() != predicted.shape() {
        return Err(Error::Shape(format!(
            "measured {:?} vs predicted {:?}",
            measured.shape(),
            predicted.shape()
        )));
    }
    Ok(0.5
        * measured
            .values
            .iter()
            .zip(&predicted.values)
            .map(|(m, p)| (p - m) * (p - m))
            .sum::<f64>())
}

pub(crate) fn check_measured(measured: &ChannelData, setup: &TransmissionSetup) -> Result<()> {
    let want = (setup.n_p(), setup.n_t(), setup.n_c());
    if measured.shape() != want {
        return Err(Error::Shape(format!(
            "measured data is {:?}, setup expects {want:?}",
            measured.shape()
        )));
    }
    Ok(())
}

/// Adjoint-state gradient of the data term for every property.
pub fn data_gradient(
    medium: &Medium,
    measured: &ChannelData,
    setup: &TransmissionSetup,
    storage: Storage,
) -> Result<DataGradient> {
    validate_run(medium, setup, 0)?;
    check_measured(measured, setup)?;
    if let Storage::Checkpoint { interval: 0 } = storage {
        return Err(Error::invalid("checkpoint interval", "must be at least 1"));
    }
    let op = WaveOperator::new(medium, setup.dt())?;
    let n_z = medium.grid().n_z;
    let receivers: Vec<usize> = setup
        .array
        .positions()
        .iter()
        .map(|&p| flat_index(n_z, p))
        .collect();
    let samples = &setup.waveform.samples;
    let parts = map_indices(setup.n_p(), |p| {
        let observed = measured.values.slice(s![p, .., ..]);
        transmission_gradient(&op, &receivers, p, samples, observed, storage)
            .map_err(|e| e.in_transmission(p))
    });
    let n = op.len();
    let mut data_term = 0.0;
    let mut acc = [vec![0.0; n], vec![0.0; n]];
    for part in parts {
        let (d, g) = part?;
        data_term += d;
        for (a, g) in acc.iter_mut().zip(&g) {
            for (x, y) in a.iter_mut().zip(g) {
                *x += y;
            }
        }
    }
    let shape = op.shape();
    let [g0, g1] = acc;
    Ok(DataGradient {
        data_term,
        grads: [
            Array2::from_shape_vec(shape, g0).expect("shape matches"),
            Array2::from_shape_vec(shape, g1).expect("shape matches"),
        ],
    })
}

/// Forward frames for the backward sweep.
enum Frames<'a> {
    Full(Vec<f64>),
    Checkpointed {
        op: &'a WaveOperator,
        source: usize,
        samples: &'a [f64],
        interval: usize,
        /// `(U[c-2], U[c-1])` for segment starts `c = 2 + m·interval`.
        pairs: Vec<(Vec<f64>, Vec<f64>)>,
        /// Frames `c-2 ..= c+interval-2` of the loaded segment.
        buffer: Vec<f64>,
        loaded: Option<usize>,
    },
}

impl Frames<'_> {
    /// Frame `t` (`t >= 0`), valid while the sweep stays in one segment.
    fn get(&mut self, t: usize, n: usize, for_step: usize) -> &[f64] {
        match self {
            Frames::Full(all) => &all[t * n..(t + 1) * n],
            Frames::Checkpointed {
                op,
                source,
                samples,
                interval,
                pairs,
                buffer,
                loaded,
            } => {
                let m = (for_step - 2) / *interval;
                let start = 2 + m * *interval;
                if *loaded != Some(m) {
                    let len = *interval + 1;
                    buffer.resize(len * n, 0.0);
                    buffer[..n].copy_from_slice(&pairs[m].0);
                    buffer[n..2 * n].copy_from_slice(&pairs[m].1);
                    let mut ws = Workspace::new(n);
                    let w = op.source_weight(*source);
                    let last = (start + *interval - 2).min(samples.len() - 1);
                    for f in start..=last {
                        let i = f + 2 - start;
                        let (head, tail) = buffer.split_at_mut(i * n);
                        op.step(&head[(i - 1) * n..], &head[(i - 2) * n..(i - 1) * n], &mut tail[..n], &mut ws);
                        tail[*source] += w * samples[f];
                    }
                    *loaded = Some(m);
                }
                let i = t + 2 - start;
                &buffer[i * n..(i + 1) * n]
            }
        }
    }
}

/// Data term and per-property gradient contribution of one transmission.
pub(crate) fn transmission_gradient(
    op: &WaveOperator,
    receivers: &[usize],
    p: usize,
    samples: &[f64],
    observed: ArrayView2<f64>,
    storage: Storage,
) -> Result<(f64, [Vec<f64>; 2])> {
    let n = op.len();
    let n_t = samples.len();
    let source = receivers[p];
    let mut residual = Array2::<f64>::zeros((n_t, receivers.len()));
    let mut frames = match storage {
        Storage::Full => Frames::Full(vec![0.0; n_t * n]),
        Storage::Checkpoint { interval } => Frames::Checkpointed {
            op,
            source,
            samples,
            interval,
            pairs: Vec::new(),
            buffer: Vec::new(),
            loaded: None,
        },
    };
    let mut prev = vec![0.0; n];
    let mut data_term = 0.0;
    crate::fdtd::march(op, source, samples, |t, u| {
        for (c, &r) in receivers.iter().enumerate() {
            let d = u[r] - observed[[t, c]];
            residual[[t, c]] = d;
            data_term += 0.5 * d * d;
        }
        match &mut frames {
            Frames::Full(all) => all[t * n..(t + 1) * n].copy_from_slice(u),
            Frames::Checkpointed { interval, pairs, .. } => {
                // u is U[t]; a segment starting at c needs U[c-2], U[c-1]
                if t >= 1 && (t - 1) % *interval == 0 && t + 1 < n_t {
                    pairs.push((prev.clone(), u.to_vec()));
                }
                prev.copy_from_slice(u);
            }
        }
    })?;
    if let Frames::Checkpointed { interval, pairs, .. } = &frames {
        debug_assert_eq!(pairs.len(), n_t.saturating_sub(2).div_ceil(*interval));
    }

    let mut acc = Accumulator::new(op);
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let mut scratch = AdjointScratch::new(n);
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    for t in (2..n_t).rev() {
        adjoint_step(op, &l1, &l2, &mut cur, &mut scratch);
        for (c, &r) in receivers.iter().enumerate() {
            cur[r] += residual[[t, c]];
        }
        u1.copy_from_slice(frames.get(t - 1, n, t));
        u2.copy_from_slice(frames.get(t - 2, n, t));
        let s_t = samples[t];
        acc.add(op, &cur, &u1, &u2, source, s_t, &mut scratch);
        std::mem::swap(&mut l2, &mut l1);
        std::mem::swap(&mut l1, &mut cur);
    }
    Ok((data_term, acc.finish(op)))
}

struct AdjointScratch {
    y: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
}

impl AdjointScratch {
    fn new(n: usize) -> Self {
        AdjointScratch {
            y: vec![0.0; n],
            t1: vec![0.0; n],
            t2: vec![0.0; n],
        }
    }
}

/// `out = Wᵀ l1 + B l2`.
fn adjoint_step(op: &WaveOperator, l1: &[f64], l2: &[f64], out: &mut [f64], s: &mut AdjointScratch) {
    match op {
        WaveOperator::Acoustic(op) => acoustic_adjoint(op, l1, l2, out, s),
        WaveOperator::Em(op) => em_adjoint(op, l1, l2, out, s),
    }
}

/// `Wᵀ v = a⊙v + Hᵀ(k⊙v)` with `Hᵀ y = ∇²y − G_x(q_x⊙y) − G_z(q_z⊙y)`; the
/// zero-padded Laplacian is symmetric and the central differences are
/// antisymmetric.
fn acoustic_adjoint(op: &AcousticOperator, l1: &[f64], l2: &[f64], out: &mut [f64], s: &mut AdjointScratch) {
    let (nx, nz) = (op.n_x, op.n_z);
    for ((y, k), v) in s.y.iter_mut().zip(&op.k).zip(l1) {
        *y = k * v;
    }
    laplacian(&s.y, nx, nz, op.inv_dx2, out);
    if op.heterogeneous {
        for i in 0..out.len() {
            s.t1[i] = op.qgx[i] * s.y[i];
        }
        grad_x(&s.t1, nx, nz, op.inv_2dx, &mut s.t2);
        for i in 0..out.len() {
            out[i] -= s.t2[i];
            s.t1[i] = op.qgz[i] * s.y[i];
        }
        grad_z(&s.t1, nx, nz, op.inv_2dx, &mut s.t2);
        for i in 0..out.len() {
            out[i] -= s.t2[i];
        }
    }
    for i in 0..out.len() {
        out[i] += op.a[i] * l1[i] + op.b[i] * l2[i];
    }
}

/// `Wᵀ v = ∇²(α⊙v) + (2 − β)⊙v`, `B = β − 1`.
fn em_adjoint(op: &EmOperator, l1: &[f64], l2: &[f64], out: &mut [f64], s: &mut AdjointScratch) {
    for ((y, a), v) in s.y.iter_mut().zip(&op.alpha).zip(l1) {
        *y = a * v;
    }
    laplacian(&s.y, op.n_x, op.n_z, op.inv_dx2, out);
    for i in 0..out.len() {
        let beta = op.beta[i];
        out[i] += (2.0 - beta) * l1[i] + (beta - 1.0) * l2[i];
    }
}

/// Time sums of `λ[t]` against forward-field expressions; the
/// time-independent coefficients are applied once in `finish`.
struct Accumulator {
    /// acoustic: `Σ λ⊙H(U[t-1])`; EM: `Σ λ⊙(∇²U[t-1] − S[t])`
    first: Vec<f64>,
    /// acoustic: `Σ λ⊙G_x U[t-1]`; EM: `Σ λ⊙(U[t-2] − U[t-1])`
    second: Vec<f64>,
    /// acoustic: `Σ λ⊙G_z U[t-1]`
    third: Vec<f64>,
}

impl Accumulator {
    fn new(op: &WaveOperator) -> Self {
        let n = op.len();
        Accumulator {
            first: vec![0.0; n],
            second: vec![0.0; n],
            third: vec![0.0; n],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        op: &WaveOperator,
        lambda: &[f64],
        u1: &[f64],
        u2: &[f64],
        source: usize,
        s_t: f64,
        s: &mut AdjointScratch,
    ) {
        match op {
            WaveOperator::Acoustic(op) => {
                let (nx, nz) = (op.n_x, op.n_z);
                laplacian(u1, nx, nz, op.inv_dx2, &mut s.y);
                grad_x(u1, nx, nz, op.inv_2dx, &mut s.t1);
                grad_z(u1, nx, nz, op.inv_2dx, &mut s.t2);
                for i in 0..lambda.len() {
                    let l = lambda[i];
                    let h = s.y[i] + op.qgx[i] * s.t1[i] + op.qgz[i] * s.t2[i];
                    self.first[i] += l * h;
                    self.second[i] += l * s.t1[i];
                    self.third[i] += l * s.t2[i];
                }
            }
            WaveOperator::Em(op) => {
                laplacian(u1, op.n_x, op.n_z, op.inv_dx2, &mut s.y);
                s.y[source] -= s_t;
                for i in 0..lambda.len() {
                    let l = lambda[i];
                    self.first[i] += l * s.y[i];
                    self.second[i] += l * (u2[i] - u1[i]);
                }
            }
        }
    }

    fn finish(self, op: &WaveOperator) -> [Vec<f64>; 2] {
        match op {
            WaveOperator::Acoustic(op) => {
                let n = self.first.len();
                // ∂k/∂C = 2dt²C
                let g_c: Vec<f64> = (0..n).map(|i| 2.0 * op.dt2 * op.sos[i] * self.first[i]).collect();
                // the update uses Q⊙G_e(1/Q) per axis, G_e edge-replicated
                let px: Vec<f64> = (0..n).map(|i| op.k[i] * self.second[i]).collect();
                let pz: Vec<f64> = (0..n).map(|i| op.k[i] * self.third[i]).collect();
                let mut back = vec![0.0; n];
                let qpx: Vec<f64> = (0..n).map(|i| op.density[i] * px[i]).collect();
                let qpz: Vec<f64> = (0..n).map(|i| op.density[i] * pz[i]).collect();
                grad_edge_adjoint_add(&qpx, op.n_x, op.n_z, 0, op.inv_2dx, &mut back);
                grad_edge_adjoint_add(&qpz, op.n_x, op.n_z, 1, op.inv_2dx, &mut back);
                let g_q = (0..n)
                    .map(|i| {
                        let q = op.density[i];
                        px[i] * op.gx_inv_q[i] + pz[i] * op.gz_inv_q[i] - back[i] / (q * q)
                    })
                    .collect();
                [g_c, g_q]
            }
            WaveOperator::Em(op) => {
                let c2 = op.c0 * op.c0;
                let n = self.first.len();
                let mut g_sigma = vec![0.0; n];
                let mut g_eps = vec![0.0; n];
                for i in 0..n {
                    let eps = op.permittivity[i];
                    let dbeta_dsigma = op.mu0 * op.dt * c2 / eps;
                    g_sigma[i] = dbeta_dsigma * self.second[i];
                    g_eps[i] = -op.alpha[i] / eps * self.first[i]
                        - op.conductivity[i] * dbeta_dsigma / eps * self.second[i];
                }
                [g_sigma, g_eps]
            }
        }
    }
}
