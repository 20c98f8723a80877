use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Single causal pass.
    #[default]
    Forward,
    /// Forward then time-reversed pass; zero phase, squared magnitude.
    ZeroPhase,
}

/// Second-order section, normalized so `a0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 3],
}

impl Section {
    fn run(&self, x: &mut [f64]) {
        // transposed direct form II
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[1] * y + s2;
            s2 = self.b[2] * input - self.a[2] * y;
            *v = y;
        }
    }

    fn response(&self, omega: f64) -> (f64, f64) {
        // H(e^{jω}) = B(z)/A(z) at z = e^{jω}
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * omega.cos() + c[2] * (2.0 * omega).cos();
            let im = -(c[1] * omega.sin() + c[2] * (2.0 * omega).sin());
            (re, im)
        };
        let (br, bi) = eval(&self.b);
        let (ar, ai) = eval(&self.a);
        let den = ar * ar + ai * ai;
        ((br * ar + bi * ai) / den, (bi * ar - br * ai) / den)
    }
}

/// Digital Butterworth low-pass from the analog prototype via the bilinear
/// transform with frequency prewarping, realized as cascaded biquads.
#[derive(Clone, Debug, PartialEq)]
pub struct ButterworthLowpass {
    sections: Vec<Section>,
    pub order: usize,
    pub cutoff: f64,
    pub fs: f64,
}

impl ButterworthLowpass {
    pub fn new(order: usize, cutoff: f64, fs: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("order", "must be at least 1"));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid("fs", format!("must be positive, got {fs}")));
        }
        if !(cutoff > 0.0 && cutoff < fs / 2.0) {
            return Err(Error::invalid(
                "cutoff",
                format!("{cutoff} Hz must lie strictly between 0 and Nyquist ({} Hz)", fs / 2.0),
            ));
        }
        let w = (PI * cutoff / fs).tan();
        let w2 = w * w;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for k in 0..order / 2 {
            let zeta = (PI * (2 * k + 1) as f64 / (2 * order) as f64).sin();
            let a0 = 1.0 + 2.0 * zeta * w + w2;
            sections.push(Section {
                b: [w2 / a0, 2.0 * w2 / a0, w2 / a0],
                a: [1.0, (2.0 * w2 - 2.0) / a0, (1.0 - 2.0 * zeta * w + w2) / a0],
            });
        }
        if order % 2 == 1 {
            let a0 = 1.0 + w;
            sections.push(Section {
                b: [w / a0, w / a0, 0.0],
                a: [1.0, (w - 1.0) / a0, 0.0],
            });
        }
        Ok(ButterworthLowpass {
            sections,
            order,
            cutoff,
            fs,
        })
    }

    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let mut y = signal.to_vec();
        for s in &self.sections {
            s.run(&mut y);
        }
        y
    }

    pub fn filter_with(&self, signal: &[f64], mode: FilterMode) -> Vec<f64> {
        match mode {
            FilterMode::Forward => self.filter(signal),
            FilterMode::ZeroPhase => {
                let mut y = self.filter(signal);
                y.reverse();
                let mut y = self.filter(&y);
                y.reverse();
                y
            }
        }
    }

    /// Magnitude of the frequency response at `f` Hz.
    pub fn gain(&self, f: f64) -> f64 {
        let omega = 2.0 * PI * f / self.fs;
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(omega);
                (re * re + im * im).sqrt()
            })
            .product()
    }
}

/// Order-`order` Butterworth low-pass, single forward pass.
pub fn butterworth_lpf(signal: &[f64], cutoff: f64, order: usize, fs: f64) -> Result<Vec<f64>> {
    Ok(ButterworthLowpass::new(order, cutoff, fs)?.filter(signal))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 1.0 / 2.2978e-8;

    fn steady_amplitude(f: f64, cutoff: f64, order: usize) -> f64 {
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * f * k as f64 / FS).sin()).collect();
        let y = butterworth_lpf(&x, cutoff, order, FS).unwrap();
        y[n / 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn dc_gain_is_one() {
        for order in [1, 2, 5, 6] {
            let y = butterworth_lpf(&[3.25; 4000], 3.8e6, order, FS).unwrap();
            assert!((y[3999] - 3.25).abs() < 1e-6 * 3.25, "order {order}: {}", y[3999]);
        }
    }

    #[test]
    fn minus_three_db_at_cutoff() {
        let a = steady_amplitude(3.8e6, 3.8e6, 6);
        assert!((a / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.05, "{a}");
        let lp = ButterworthLowpass::new(6, 3.8e6, FS).unwrap();
        assert!((lp.gain(3.8e6) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((lp.gain(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attenuation_is_monotone_above_cutoff() {
        let mut last = f64::INFINITY;
        for f in [4.0e6, 5.0e6, 6.5e6, 9.0e6, 13.0e6] {
            let a = steady_amplitude(f, 3.8e6, 6);
            assert!(a <= last, "{f}: {a} > {last}");
            last = a;
        }
    }

    #[test]
    fn zero_phase_squares_the_magnitude() {
        let lp = ButterworthLowpass::new(4, 1e6, 1e7).unwrap();
        let n = 8000;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * 1e6 * k as f64 / 1e7).cos()).collect();
        let y = lp.filter_with(&x, FilterMode::ZeroPhase);
        let a = y[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((a - 0.5).abs() < 0.01);
        // no phase shift at the centre of the record
        let k = n / 2;
        assert!((y[k] - 0.5 * x[k]).abs() < 0.01);
    }

    #[test]
    fn rejects_cutoff_at_or_above_nyquist() {
        assert!(butterworth_lpf(&[1.0], FS / 2.0, 6, FS).is_err());
        assert!(butterworth_lpf(&[1.0], 0.0, 6, FS).is_err());
        assert!(butterworth_lpf(&[1.0], 1e6, 0, FS).is_err());
    }
}
