//! Gradient-descent full waveform inversion.

mod adjoint;
mod sobel;

pub use adjoint::{data_gradient, data_misfit, DataGradient, Storage};
pub use sobel::{
    sobel_reg, sobel_reg_gradient, sobel_reg_gradient_values, sobel_reg_values, SOBEL_X, SOBEL_Z,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::{forward, ChannelData};
use crate::error::{Error, Result};
use crate::grid::{Medium, PropertyMap};
use crate::sources::TransmissionSetup;

/// `½‖M − M̂‖² + λ Σ_j sobel_reg(θ_j)`
pub fn fwi_loss(
    measured: &ChannelData,
    predicted: &ChannelData,
    maps: &[PropertyMap],
    lambda: f64,
) -> Result<f64> {
    let data = data_misfit(measured, predicted)?;
    if lambda == 0.0 {
        return Ok(data);
    }
    Ok(data + lambda * maps.iter().map(sobel_reg).sum::<f64>())
}

/// Loss split into its two terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub data_term: f64,
    pub reg_term: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.data_term + self.reg_term
    }
}

fn reg_term(medium: &Medium, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda * medium.properties().iter().map(sobel_reg).sum::<f64>()
}

/// Loss of `medium` against `measured` (one forward run per transmission).
pub fn evaluate_loss(
    medium: &Medium,
    measured: &ChannelData,
    setup: &TransmissionSetup,
    lambda: f64,
) -> Result<LossTerms> {
    adjoint::check_measured(measured, setup)?;
    let predicted = forward(medium, setup)?;
    Ok(LossTerms {
        data_term: data_misfit(measured, &predicted)?,
        reg_term: reg_term(medium, lambda),
    })
}

/// Central difference of the data term with respect to one pixel of
/// property `j`: `(L(θ + h e) − L(θ − h e)) / 2h`.
pub fn fd_gradient(
    medium: &Medium,
    measured: &ChannelData,
    setup: &TransmissionSetup,
    pixel: (usize, usize),
    j: usize,
    h: f64,
) -> Result<f64> {
    if j > 1 {
        return Err(Error::invalid("property_index", format!("{j} is not 0 or 1")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    let (n_x, n_z) = medium.grid().shape();
    if pixel.0 >= n_x || pixel.1 >= n_z {
        return Err(Error::Shape(format!("pixel {pixel:?} outside the {n_x}x{n_z} grid")));
    }
    let shifted = |delta: f64| -> Result<f64> {
        let mut values = [
            medium.property(0).values().clone(),
            medium.property(1).values().clone(),
        ];
        values[j][pixel] += delta;
        let m = medium.with_values(values)?;
        Ok(evaluate_loss(&m, measured, setup, 0.0)?.data_term)
    };
    Ok((shifted(h)? - shifted(-h)?) / (2.0 * h))
}

/// Loss and gradient with respect to both property maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FwiGradient {
    pub loss: LossTerms,
    pub grads: [Array2<f64>; 2],
}

/// Adjoint-state gradient of the regularized loss.
pub fn fwi_gradient(
    medium: &Medium,
    measured: &ChannelData,
    setup: &TransmissionSetup,
    lambda: f64,
) -> Result<FwiGradient> {
    fwi_gradient_with(medium, measured, setup, lambda, Storage::Full)
}

pub fn fwi_gradient_with(
    medium: &Medium,
    measured: &ChannelData,
    setup: &TransmissionSetup,
    lambda: f64,
    storage: Storage,
) -> Result<FwiGradient> {
    let DataGradient { data_term, mut grads } = data_gradient(medium, measured, setup, storage)?;
    if lambda != 0.0 {
        for (g, map) in grads.iter_mut().zip(medium.properties()) {
            g.scaled_add(lambda, &sobel_reg_gradient(map));
        }
    }
    Ok(FwiGradient {
        loss: LossTerms {
            data_term,
            reg_term: reg_term(medium, lambda),
        },
        grads,
    })
}

/// Per-property step policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Fixed(f64),
    /// Chosen on the first iteration so the largest update is 1% of the
    /// clamp range.
    Auto,
    /// Property is held at its initial map.
    Frozen,
}

#[derive(Clone, Debug)]
pub struct FwiConfig {
    /// Starting medium; also supplies grid, physics and PML.
    pub initial: Medium,
    pub iterations: usize,
    pub steps: [StepSize; 2],
    pub lambda: f64,
    /// Clamp range `[min, max]` per property.
    pub bounds: [(f64, f64); 2],
    pub max_halvings: usize,
    pub storage: Storage,
}

impl FwiConfig {
    /// Defaults: auto steps, no regularization, up to 5 halvings.
    pub fn new(initial: Medium, iterations: usize, bounds: [(f64, f64); 2]) -> Self {
        FwiConfig {
            initial,
            iterations,
            steps: [StepSize::Auto; 2],
            lambda: 0.0,
            bounds,
            max_halvings: 5,
            storage: Storage::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        for step in &self.steps {
            if let StepSize::Fixed(s) = step {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::invalid("step size", format!("must be positive, got {s}")));
                }
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be non-negative, got {}", self.lambda)));
        }
        let kinds = self.initial.modality().property_kinds();
        for ((lo, hi), kind) in self.bounds.iter().zip(kinds) {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::invalid("bounds", format!("need min < max, got [{lo}, {hi}]")));
            }
            if *lo < 0.0 || (*lo == 0.0 && kind.strictly_positive()) {
                return Err(Error::invalid(
                    "bounds",
                    format!("{} lower bound {lo} is not physical", kind.name()),
                ));
            }
        }
        if let Storage::Checkpoint { interval: 0 } = self.storage {
            return Err(Error::invalid("checkpoint interval", "must be at least 1"));
        }
        Ok(())
    }
}

/// One line of the iteration log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub loss: f64,
    pub data_term: f64,
    pub reg_term: f64,
    /// Backtracking factor applied to each property's step (0 when frozen or
    /// when no trial step reduced the loss).
    pub step_scale: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// No backtracked step lowered the loss.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct FwiResult {
    pub medium: Medium,
    pub log: Vec<IterationLog>,
    pub termination: Termination,
    /// Resolved per-property step sizes (0 for frozen).
    pub steps: [f64; 2],
}

impl FwiResult {
    pub fn maps(&self) -> &[PropertyMap; 2] {
        self.medium.properties()
    }
}

/// Incremental inversion state; one call to [`FwiSession::step`] is one
/// gradient-descent iteration.
#[derive(Clone, Debug)]
pub struct FwiSession {
    measured: ChannelData,
    setup: TransmissionSetup,
    config: FwiConfig,
    medium: Medium,
    loss: LossTerms,
    steps: Option<[f64; 2]>,
    log: Vec<IterationLog>,
    stalled: bool,
}

impl FwiSession {
    /// Evaluates the initial loss, logged as iteration 0.
    pub fn new(measured: ChannelData, setup: TransmissionSetup, config: FwiConfig) -> Result<Self> {
        config.validate()?;
        let medium = config.initial.clone();
        let loss = evaluate_loss(&medium, &measured, &setup, config.lambda)?;
        let log = vec![IterationLog {
            iter: 0,
            loss: loss.total(),
            data_term: loss.data_term,
            reg_term: loss.reg_term,
            step_scale: [0.0; 2],
        }];
        Ok(FwiSession {
            measured,
            setup,
            config,
            medium,
            loss,
            steps: None,
            log,
            stalled: false,
        })
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn log(&self) -> &[IterationLog] {
        &self.log
    }

    pub fn loss(&self) -> LossTerms {
        self.loss
    }

    pub fn iterations_done(&self) -> usize {
        self.log.len() - 1
    }

    pub fn is_finished(&self) -> bool {
        self.stalled || self.iterations_done() >= self.config.iterations
    }

    fn resolve_steps(&self, grads: &[Array2<f64>; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for j in 0..2 {
            out[j] = match self.config.steps[j] {
                StepSize::Fixed(s) => s,
                StepSize::Frozen => 0.0,
                StepSize::Auto => {
                    let (lo, hi) = self.config.bounds[j];
                    let g_max = grads[j].iter().fold(0.0f64, |m, g| m.max(g.abs()));
                    if g_max > 0.0 {
                        0.01 * (hi - lo) / g_max
                    } else {
                        0.0
                    }
                }
            };
        }
        out
    }

    fn trial(&self, grads: &[Array2<f64>; 2], steps: [f64; 2], scale: f64) -> Result<Medium> {
        let mut values = [
            self.medium.property(0).values().clone(),
            self.medium.property(1).values().clone(),
        ];
        for j in 0..2 {
            let (lo, hi) = self.config.bounds[j];
            let s = steps[j] * scale;
            if s == 0.0 {
                continue;
            }
            values[j].zip_mut_with(&grads[j], |v, g| *v = (*v - s * g).clamp(lo, hi));
        }
        self.medium.with_values(values)
    }

    /// One iteration: gradient, then backtracking from the full step with up
    /// to `max_halvings` halvings. Returns the new log entry.
    pub fn step(&mut self) -> Result<IterationLog> {
        if self.is_finished() {
            return Err(Error::invalid("session", "no iterations left"));
        }
        let g = fwi_gradient_with(
            &self.medium,
            &self.measured,
            &self.setup,
            self.config.lambda,
            self.config.storage,
        )?;
        let steps = match self.steps {
            Some(s) => s,
            None => {
                let s = self.resolve_steps(&g.grads);
                self.steps = Some(s);
                s
            }
        };
        let current = self.loss.total();
        let mut scale = 1.0;
        let mut accepted = None;
        if steps.iter().any(|&s| s > 0.0) {
            for _ in 0..=self.config.max_halvings {
                let candidate = self.trial(&g.grads, steps, scale)?;
                match evaluate_loss(&candidate, &self.measured, &self.setup, self.config.lambda) {
                    Ok(l) if l.total() <= current => {
                        accepted = Some((candidate, l));
                        break;
                    }
                    // an oversized step may break stability; treat it as a
                    // loss increase
                    Ok(_) | Err(Error::Cfl(_)) | Err(Error::Divergence { .. }) => scale *= 0.5,
                    Err(e) => return Err(e),
                }
            }
        }
        let scale_of = |s: f64, scale: f64| if s > 0.0 { scale } else { 0.0 };
        let entry = match accepted {
            Some((medium, loss)) => {
                self.medium = medium;
                self.loss = loss;
                IterationLog {
                    iter: self.log.len(),
                    loss: loss.total(),
                    data_term: loss.data_term,
                    reg_term: loss.reg_term,
                    step_scale: [scale_of(steps[0], scale), scale_of(steps[1], scale)],
                }
            }
            None => {
                self.stalled = true;
                IterationLog {
                    iter: self.log.len(),
                    loss: current,
                    data_term: self.loss.data_term,
                    reg_term: self.loss.reg_term,
                    step_scale: [0.0; 2],
                }
            }
        };
        self.log.push(entry.clone());
        Ok(entry)
    }

    pub fn into_result(self) -> FwiResult {
        FwiResult {
            termination: if self.stalled {
                Termination::Stalled
            } else {
                Termination::Completed
            },
            steps: self.steps.unwrap_or([0.0; 2]),
            medium: self.medium,
            log: self.log,
        }
    }
}

/// Runs the configured number of iterations.
pub fn fwi_invert(
    measured: &ChannelData,
    setup: &TransmissionSetup,
    config: &FwiConfig,
) -> Result<FwiResult> {
    fwi_invert_with(measured, setup, config, |_| {})
}

/// Same as [`fwi_invert`], handing every log entry to `on_entry` as soon as
/// it exists, so a divergence still leaves the partial log behind.
pub fn fwi_invert_with(
    measured: &ChannelData,
    setup: &TransmissionSetup,
    config: &FwiConfig,
    mut on_entry: impl FnMut(&IterationLog),
) -> Result<FwiResult> {
    let mut session = FwiSession::new(measured.clone(), setup.clone(), config.clone())?;
    on_entry(&session.log()[0]);
    while !session.is_finished() {
        let entry = session.step()?;
        on_entry(&entry);
    }
    Ok(session.into_result())
}
