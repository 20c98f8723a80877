//! Synthetic media: random ovals, raster masks, smoothed object values and
//! dataset generation.

mod dataset;
mod digits;
mod pgm;

pub use dataset::{generate_dataset, generate_sample, sample_seed, DatasetManifest, SampleEntry, DATASET_MANIFEST};
pub use digits::{digit_mask, DIGIT_COUNT};
pub use pgm::{encode_pgm, parse_pgm, read_pgm};

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, Medium, Modality};

/// Object geometry of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// `count` ellipses with semi-axes drawn uniformly from `semi_axis`
    /// (pixels) and rotation uniform on `[0, π)`.
    Ovals { count: usize, semi_axis: (f64, f64) },
    /// One bundled digit, rescaled to `size` pixels tall.
    Digits { size: usize },
    /// One of the given PGM masks, rescaled to `size` or to the whole legal
    /// region when absent.
    Masks {
        files: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<(usize, usize)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub modality: Modality,
    pub background: [f64; 2],
    pub object: [f64; 2],
    /// `[θ_min, θ_max]` per property; generated values are clamped into it.
    pub bounds: [(f64, f64); 2],
    pub shape: ShapeSpec,
    /// Extra pixels kept free inside the PML on every side.
    #[serde(default = "default_margin")]
    pub margin: usize,
    /// Gaussian sigma per property in pixels; 0 keeps objects homogeneous.
    #[serde(default)]
    pub smoothing: [f64; 2],
    /// Standard deviation of whole-grid Gaussian noise as a fraction of the
    /// background value of each property.
    #[serde(default)]
    pub grid_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_margin() -> usize {
    5
}

pub const SCENARIOS: [&str; 5] = [
    "liver-ovals",
    "liver-digits",
    "liver-changing",
    "blood-digits",
    "verasonics-pins",
];

const WATER: [f64; 2] = [1480.0, 1000.0];
const LIVER: [f64; 2] = [1570.0, 1060.0];
const AIR: [f64; 2] = [0.025, 1.0006];
const BLOOD: [f64; 2] = [1.5829, 61.065];

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let liver = |shape, smoothing| ScenarioConfig {
            modality: Modality::Acoustic,
            background: WATER,
            object: LIVER,
            bounds: [(WATER[0], LIVER[0]), (WATER[1], LIVER[1])],
            shape,
            margin: 5,
            smoothing,
            grid_noise: 0.0,
            seed: 0,
        };
        let ovals = ShapeSpec::Ovals {
            count: 1,
            semi_axis: (6.0, 16.0),
        };
        Ok(match name {
            "liver-ovals" => liver(ovals, [0.0; 2]),
            "liver-digits" => liver(ShapeSpec::Digits { size: 28 }, [0.0; 2]),
            "liver-changing" => liver(ovals, [1.5, 1.8]),
            "blood-digits" => ScenarioConfig {
                modality: Modality::Em,
                background: AIR,
                object: BLOOD,
                bounds: [(AIR[0], BLOOD[0]), (AIR[1], BLOOD[1])],
                shape: ShapeSpec::Digits { size: 16 },
                margin: 5,
                smoothing: [0.0; 2],
                grid_noise: 0.0,
                seed: 0,
            },
            "verasonics-pins" => ScenarioConfig {
                modality: Modality::Acoustic,
                background: [1540.0, 1030.0],
                object: [1070.0, 1150.0],
                bounds: [(1070.0, 1540.0), (1030.0, 1150.0)],
                shape: ShapeSpec::Ovals {
                    count: 4,
                    semi_axis: (2.0, 2.0),
                },
                margin: 5,
                smoothing: [0.0; 2],
                grid_noise: 0.0,
                seed: 0,
            },
            other => {
                return Err(Error::invalid(
                    "scenario",
                    format!("unknown preset {other:?}; expected one of {SCENARIOS:?}"),
                ))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..2 {
            let (lo, hi) = self.bounds[j];
            if !(lo < hi) {
                return Err(Error::invalid("bounds", format!("need min < max, got [{lo}, {hi}]")));
            }
            for v in [self.background[j], self.object[j]] {
                if !(lo..=hi).contains(&v) {
                    return Err(Error::invalid("values", format!("{v} outside [{lo}, {hi}]")));
                }
            }
            if !(self.smoothing[j] >= 0.0 && self.smoothing[j].is_finite()) {
                return Err(Error::invalid("smoothing", "sigma must be >= 0"));
            }
        }
        if !(self.grid_noise >= 0.0 && self.grid_noise.is_finite()) {
            return Err(Error::invalid("grid_noise", "must be >= 0"));
        }
        match &self.shape {
            ShapeSpec::Ovals { semi_axis: (a, b), .. } if !(*a > 0.0 && a <= b) => {
                Err(Error::invalid("semi_axis", format!("need 0 < min <= max, got ({a}, {b})")))
            }
            ShapeSpec::Digits { size: 0 } => Err(Error::invalid("size", "must be positive")),
            ShapeSpec::Masks { files, .. } if files.is_empty() => Err(Error::invalid("files", "no masks given")),
            _ => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid("scenario config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn check_run(&self, run: &RunConfig) -> Result<()> {
        if run.modality != self.modality {
            return Err(Error::invalid(
                "modality",
                format!("scenario is {:?} but run is {:?}", self.modality, run.modality),
            ));
        }
        self.validate()
    }

    fn paint(&self, mask: &Array2<bool>) -> [Array2<f64>; 2] {
        [0, 1].map(|j| mask.mapv(|m| if m { self.object[j] } else { self.background[j] }))
    }
}

/// Pixel range `[lo, hi)` per axis that objects may occupy.
pub fn legal_region(grid: &Grid, margin: usize) -> Result<((usize, usize), (usize, usize))> {
    let pad = grid.pml_width + margin;
    if 2 * pad >= grid.n_x || 2 * pad >= grid.n_z {
        return Err(Error::invalid(
            "margin",
            format!("PML plus margin ({pad}) leaves no room on a {}x{} grid", grid.n_x, grid.n_z),
        ));
    }
    Ok(((pad, grid.n_x - pad), (pad, grid.n_z - pad)))
}

fn oval_mask(shape: (usize, usize), center: (f64, f64), axes: (f64, f64), phi: f64) -> Array2<bool> {
    let (c, s) = (phi.cos(), phi.sin());
    Array2::from_shape_fn(shape, |(x, z)| {
        let (dx, dz) = (x as f64 - center.0, z as f64 - center.1);
        let u = (dx * c + dz * s) / axes.0;
        let v = (-dx * s + dz * c) / axes.1;
        u * u + v * v <= 1.0
    })
}

const MAX_TRIES: usize = 100;

/// Union of `count` random ovals inside the legal region.
pub fn random_oval_mask(
    grid: &Grid,
    margin: usize,
    count: usize,
    semi_axis: (f64, f64),
    rng: &mut impl Rng,
) -> Result<Array2<bool>> {
    let ((x0, x1), (z0, z1)) = legal_region(grid, margin)?;
    let mut mask = Array2::from_elem(grid.shape(), false);
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let a = rng.random_range(semi_axis.0..=semi_axis.1);
            let b = rng.random_range(semi_axis.0..=semi_axis.1);
            let phi = rng.random_range(0.0..PI);
            // half extents of the rotated ellipse's bounding box
            let hx = (a * a * phi.cos().powi(2) + b * b * phi.sin().powi(2)).sqrt();
            let hz = (a * a * phi.sin().powi(2) + b * b * phi.cos().powi(2)).sqrt();
            let (lo_x, hi_x) = (x0 as f64 + hx, (x1 - 1) as f64 - hx);
            let (lo_z, hi_z) = (z0 as f64 + hz, (z1 - 1) as f64 - hz);
            if lo_x > hi_x || lo_z > hi_z {
                continue;
            }
            let cx = rng.random_range(lo_x..=hi_x);
            let cz = rng.random_range(lo_z..=hi_z);
            let oval = oval_mask(grid.shape(), (cx, cz), (a, b), phi);
            mask.zip_mut_with(&oval, |m, &o| *m |= o);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::invalid(
                "semi_axis",
                format!("could not place an oval with semi-axes in {semi_axis:?} after {MAX_TRIES} tries"),
            ));
        }
    }
    Ok(mask)
}

/// Ovals medium on the run's grid, deterministic in `config.seed`.
pub fn random_oval_medium(run: &RunConfig, config: &ScenarioConfig) -> Result<Medium> {
    config.check_run(run)?;
    let ShapeSpec::Ovals { count, semi_axis } = config.shape else {
        return Err(Error::invalid("shape", "scenario does not describe ovals"));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mask = random_oval_mask(&run.grid, config.margin, count, semi_axis, &mut rng)?;
    run.medium(config.paint(&mask))
}

/// Nearest-neighbour resampling to `(n_x, n_z)`.
pub fn resize_nearest(mask: &Array2<bool>, size: (usize, usize)) -> Array2<bool> {
    let (sx, sz) = mask.dim();
    Array2::from_shape_fn(size, |(x, z)| mask[[x * sx / size.0, z * sz / size.1]])
}

/// Where a mask goes on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Top-left corner of the mask in grid pixels.
    Offset(usize, usize),
    /// Uniform over legal offsets.
    Random { seed: u64 },
}

/// Pastes `mask` (optionally rescaled) into the legal region.
pub fn place_mask(
    grid: &Grid,
    margin: usize,
    mask: &Array2<bool>,
    size: Option<(usize, usize)>,
    placement: Placement,
) -> Result<Array2<bool>> {
    let ((x0, x1), (z0, z1)) = legal_region(grid, margin)?;
    let mask = match size {
        Some(s) if s != mask.dim() => {
            if s.0 == 0 || s.1 == 0 {
                return Err(Error::invalid("size", "mask size must be positive"));
            }
            resize_nearest(mask, s)
        }
        _ => mask.clone(),
    };
    let (mx, mz) = mask.dim();
    if mx > x1 - x0 || mz > z1 - z0 {
        return Err(Error::Shape(format!(
            "mask {mx}x{mz} does not fit the {}x{} region inside PML and margin",
            x1 - x0,
            z1 - z0
        )));
    }
    let (ox, oz) = match placement {
        Placement::Offset(ox, oz) => {
            if ox < x0 || oz < z0 || ox + mx > x1 || oz + mz > z1 {
                return Err(Error::invalid(
                    "offset",
                    format!("mask at ({ox}, {oz}) leaves the region [{x0}, {x1}) x [{z0}, {z1})"),
                ));
            }
            (ox, oz)
        }
        Placement::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (rng.random_range(x0..=x1 - mx), rng.random_range(z0..=z1 - mz))
        }
    };
    let mut out = Array2::from_elem(grid.shape(), false);
    for ((x, z), &m) in mask.indexed_iter() {
        out[[ox + x, oz + z]] = m;
    }
    Ok(out)
}

/// Mask pixels get the object values, everything else the background.
pub fn mask_to_medium(
    mask: &Array2<bool>,
    run: &RunConfig,
    config: &ScenarioConfig,
    size: Option<(usize, usize)>,
    placement: Placement,
) -> Result<Medium> {
    config.check_run(run)?;
    let placed = place_mask(&run.grid, config.margin, mask, size, placement)?;
    run.medium(config.paint(&placed))
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_filter(a: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma == 0.0 {
        return a.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let blur = |line: ndarray::ArrayView1<f64>| -> Array1<f64> {
        let n = line.len() as isize;
        Array1::from_shape_fn(line.len(), |i| {
            k.iter()
                .enumerate()
                .map(|(j, w)| w * line[(i as isize + j as isize - r).clamp(0, n - 1) as usize])
                .sum()
        })
    };
    let mut out = a.clone();
    for axis in [Axis(0), Axis(1)] {
        let src = out.clone();
        for (mut dst, line) in out.lanes_mut(axis).into_iter().zip(src.lanes(axis)) {
            dst.assign(&blur(line));
        }
    }
    out
}

/// Whole-grid additive noise for [`smooth_object_values`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridNoise {
    /// Standard deviation as a fraction of `reference`.
    pub fraction: f64,
    /// Per-property reference value, normally the background.
    pub reference: [f64; 2],
}

/// Gaussian-filters each property map, then optionally adds whole-grid
/// Gaussian noise. Values are clamped to `bounds`.
pub fn smooth_object_values(
    medium: &Medium,
    sigma: [f64; 2],
    noise: Option<GridNoise>,
    bounds: [(f64, f64); 2],
    seed: u64,
) -> Result<Medium> {
    if sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::invalid("sigma", "must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = [0, 1].map(|j| {
        let mut v = gaussian_filter(medium.property(j).values(), sigma[j]);
        if let Some(GridNoise { fraction, reference }) = noise {
            let std = fraction * reference[j];
            if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("positive std");
                v.mapv_inplace(|x| x + normal.sample(&mut rng));
            }
        }
        let (lo, hi) = bounds[j];
        v.mapv_inplace(|x| x.clamp(lo, hi));
        v
    });
    medium.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run() -> RunConfig {
        RunConfig::preset("us-ring").unwrap()
    }

    #[test]
    fn presets_validate() {
        for name in SCENARIOS {
            let s = ScenarioConfig::preset(name).unwrap();
            s.validate().unwrap();
            assert_eq!(ScenarioConfig::from_json(&s.to_json()).unwrap(), s);
        }
    }

    #[test]
    fn ovals_use_only_two_values_and_are_reproducible() {
        let mut cfg = ScenarioConfig::preset("liver-ovals").unwrap();
        cfg.seed = 7;
        let a = random_oval_medium(&run(), &cfg).unwrap();
        let b = random_oval_medium(&run(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.property(0).values().iter().all(|&v| v == 1480.0 || v == 1570.0));
        assert!(a.property(1).values().iter().all(|&v| v == 1000.0 || v == 1060.0));
        assert!(a.property(0).values().iter().any(|&v| v == 1570.0));
        // nothing inside PML + margin
        let g = run().grid;
        for ((x, z), &v) in a.property(0).values().indexed_iter() {
            if x < 15 || z < 15 || x >= g.n_x - 15 || z >= g.n_z - 15 {
                assert_eq!(v, 1480.0);
            }
        }
        cfg.seed = 8;
        assert_ne!(random_oval_medium(&run(), &cfg).unwrap(), a);
    }

    #[test]
    fn zero_ovals_is_homogeneous() {
        let mut cfg = ScenarioConfig::preset("liver-ovals").unwrap();
        cfg.shape = ShapeSpec::Ovals {
            count: 0,
            semi_axis: (6.0, 16.0),
        };
        let m = random_oval_medium(&run(), &cfg).unwrap();
        assert!(m.property(0).values().iter().all(|&v| v == 1480.0));
    }

    #[test]
    fn oversized_ovals_fail() {
        let mut cfg = ScenarioConfig::preset("liver-ovals").unwrap();
        cfg.shape = ShapeSpec::Ovals {
            count: 1,
            semi_axis: (40.0, 40.0),
        };
        assert!(random_oval_medium(&run(), &cfg).is_err());
    }

    #[test]
    fn nearest_neighbour_block_expansion() {
        let m = ndarray::array![[true, false], [false, true]];
        let big = resize_nearest(&m, (4, 4));
        for ((x, z), &v) in big.indexed_iter() {
            assert_eq!(v, m[[x / 2, z / 2]]);
        }
    }

    #[test]
    fn digit_on_air() {
        let radar = RunConfig::preset("radar").unwrap();
        let cfg = ScenarioConfig::preset("blood-digits").unwrap();
        let m = mask_to_medium(&digit_mask(3), &radar, &cfg, Some((12, 16)), Placement::Random { seed: 1 }).unwrap();
        assert!(m.property(0).values().iter().all(|&v| v == 0.025 || v == 1.5829));
        assert!(m.property(1).values().iter().all(|&v| v == 1.0006 || v == 61.065));
        let empty = Array2::from_elem((4, 4), false);
        let h = mask_to_medium(&empty, &radar, &cfg, None, Placement::Offset(14, 14)).unwrap();
        assert!(h.property(1).values().iter().all(|&v| v == 1.0006));
        // 50 - 2 * (9 + 5) = 22 pixels of room
        assert!(mask_to_medium(&digit_mask(0), &radar, &cfg, Some((10, 23)), Placement::Random { seed: 0 }).is_err());
        assert!(mask_to_medium(&empty, &radar, &cfg, None, Placement::Offset(13, 20)).is_err());
    }

    #[test]
    fn smoothing_preserves_object_mean() {
        let mut cfg = ScenarioConfig::preset("liver-ovals").unwrap();
        cfg.shape = ShapeSpec::Ovals {
            count: 1,
            semi_axis: (16.0, 16.0),
        };
        let m = random_oval_medium(&run(), &cfg).unwrap();
        assert_eq!(
            smooth_object_values(&m, [0.0; 2], None, cfg.bounds, 0).unwrap(),
            m
        );
        let s = smooth_object_values(&m, [1.5, 1.8], None, cfg.bounds, 0).unwrap();
        // Mean over the object grown by the kernel radius keeps its mass.
        let obj = m.property(0).values().mapv(|v| v > 1480.0);
        let grown = gaussian_filter(&obj.mapv(|b| if b { 1.0 } else { 0.0 }), 3.0).mapv(|v| v > 1e-9);
        let n = grown.iter().filter(|&&b| b).count() as f64;
        for j in 0..2 {
            let excess = |a: &Array2<f64>| {
                a.iter()
                    .zip(&grown)
                    .filter(|(_, &g)| g)
                    .map(|(v, _)| v - cfg.background[j])
                    .sum::<f64>()
                    / n
            };
            let (before, after) = (excess(m.property(j).values()), excess(s.property(j).values()));
            assert!((after - before).abs() < 5e-3 * cfg.object[j], "{before} {after}");
        }
        let noisy = smooth_object_values(
            &m,
            [3.0, 3.0],
            Some(GridNoise {
                fraction: 0.01,
                reference: cfg.background,
            }),
            cfg.bounds,
            4,
        )
        .unwrap();
        for j in 0..2 {
            let (lo, hi) = cfg.bounds[j];
            assert!(noisy.property(j).values().iter().all(|&v| v >= lo && v <= hi));
        }
    }

    #[test]
    fn gaussian_kernel_is_normalized() {
        for s in [0.5, 1.5, 1.8, 3.0] {
            let k = gaussian_kernel(s);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert_eq!(k.len(), 2 * (3.0 * s).ceil() as usize + 1);
        }
    }
}
