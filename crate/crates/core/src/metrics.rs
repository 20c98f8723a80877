//! Reconstruction quality: NRMSE, PSNR and SSIM.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::PropertyMap;

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::invalid("map", "is empty"));
    }
    Ok(())
}

fn sq_error(est: &Array2<f64>, gt: &Array2<f64>) -> f64 {
    est.iter().zip(gt).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `sqrt(‖est − gt‖² / (n_x n_z)) / (θ_max − θ_min)`
pub fn nrmse(est: &Array2<f64>, gt: &Array2<f64>, theta_min: f64, theta_max: f64) -> Result<f64> {
    same_shape(est, gt)?;
    if !(theta_max > theta_min) {
        return Err(Error::invalid(
            "bounds",
            format!("need theta_max > theta_min, got [{theta_min}, {theta_max}]"),
        ));
    }
    Ok((sq_error(est, gt) / est.len() as f64).sqrt() / (theta_max - theta_min))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsnrForm {
    /// `20 log10(max gt) − log10(‖e‖²)`, the form used for comparisons.
    #[default]
    Verbatim,
    /// `20 log10(max gt) − 10 log10(‖e‖² / n)`
    Standard,
}

/// Verbatim PSNR; `+∞` when the maps are identical.
pub fn psnr(est: &Array2<f64>, gt: &Array2<f64>) -> Result<f64> {
    psnr_with(est, gt, PsnrForm::Verbatim)
}

pub fn psnr_with(est: &Array2<f64>, gt: &Array2<f64>, form: PsnrForm) -> Result<f64> {
    same_shape(est, gt)?;
    let peak = gt.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !(peak > 0.0) {
        return Err(Error::invalid("gt", format!("maximum must be positive, got {peak}")));
    }
    let e2 = sq_error(est, gt);
    if e2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(match form {
        PsnrForm::Verbatim => 20.0 * peak.log10() - e2.log10(),
        PsnrForm::Standard => 20.0 * peak.log10() - 10.0 * (e2 / est.len() as f64).log10(),
    })
}

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_WINDOW: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimMode {
    /// One window covering the whole image.
    #[default]
    Global,
    /// Mean over all 8x8 windows (stride 1).
    Sliding,
}

fn ssim_window(x: ArrayView2<f64>, y: ArrayView2<f64>, c1: f64, c2: f64) -> f64 {
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Global SSIM with `c1 = (k1 L)²`, `c2 = (k2 L)²`.
pub fn ssim(x: &Array2<f64>, y: &Array2<f64>, dynamic_range: f64) -> Result<f64> {
    ssim_with(x, y, dynamic_range, SsimMode::Global)
}

/// Images smaller than the window fall back to the global form.
pub fn ssim_with(x: &Array2<f64>, y: &Array2<f64>, dynamic_range: f64, mode: SsimMode) -> Result<f64> {
    same_shape(x, y)?;
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(Error::invalid("dynamic range", format!("must be positive, got {dynamic_range}")));
    }
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let (nx, nz) = x.dim();
    let w = SSIM_WINDOW;
    if mode == SsimMode::Global || nx < w || nz < w {
        return Ok(ssim_window(x.view(), y.view(), c1, c2));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=nx - w {
        for j in 0..=nz - w {
            let win = s![i..i + w, j..j + w];
            total += ssim_window(x.slice(win), y.slice(win), c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Scores of one property map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyScores {
    pub property: String,
    pub nrmse: f64,
    /// `"inf"` in JSON for a perfect reconstruction.
    #[serde(serialize_with = "ser_psnr", deserialize_with = "de_psnr")]
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub properties: Vec<PropertyScores>,
    pub runtime_seconds: f64,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn ser_psnr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_psnr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad psnr value {t:?}"))),
    }
}

/// Options shared by every property in a report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub psnr: PsnrForm,
    pub ssim: SsimMode,
}

/// Scores every estimated map against its ground truth. `bounds` are the
/// scenario's `[θ_min, θ_max]` and also set the SSIM dynamic range.
pub fn evaluate(
    est: &[PropertyMap],
    gt: &[PropertyMap],
    bounds: &[(f64, f64)],
    options: MetricOptions,
    runtime_seconds: f64,
) -> Result<MetricReport> {
    if est.len() != gt.len() || est.len() != bounds.len() {
        return Err(Error::Shape(format!(
            "{} estimates, {} ground truths, {} bounds",
            est.len(),
            gt.len(),
            bounds.len()
        )));
    }
    let mut properties = Vec::with_capacity(est.len());
    for ((e, g), &(lo, hi)) in est.iter().zip(gt).zip(bounds) {
        if e.kind() != g.kind() {
            return Err(Error::invalid(
                "maps",
                format!("{} estimate against {} ground truth", e.kind().name(), g.kind().name()),
            ));
        }
        properties.push(PropertyScores {
            property: e.kind().name().to_string(),
            nrmse: nrmse(e.values(), g.values(), lo, hi)?,
            psnr: psnr_with(e.values(), g.values(), options.psnr)?,
            ssim: ssim_with(e.values(), g.values(), hi - lo, options.ssim)?,
        });
    }
    Ok(MetricReport {
        properties,
        runtime_seconds,
    })
}
