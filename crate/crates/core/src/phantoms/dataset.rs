//! Dataset production: `n` media with their simulated channel data plus a
//! manifest carrying the pooled normalization statistics.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{digit_mask, mask_to_medium, random_oval_mask, read_pgm, smooth_object_values, GridNoise};
use super::{Placement, ScenarioConfig, ShapeSpec, DIGIT_COUNT};
use crate::channel::{forward, CdStats, ChannelData};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{check_cfl, Medium};
use crate::io::{round_to_f32, write_channel_data, write_medium};

pub const DATASET_MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    /// Medium directory, relative to the dataset root.
    pub medium: String,
    /// Channel-data manifest, relative to the dataset root.
    pub channel_data: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub master_seed: u64,
    pub scenario: ScenarioConfig,
    pub run: RunConfig,
    /// Pooled over every stored channel-data value of the set.
    pub stats: CdStats,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }
}

/// Seed of sample `index`: first output of stream `index` of the master
/// generator.
pub fn sample_seed(master_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// One medium drawn from the scenario with the given seed. Values are
/// rounded to `f32`, the precision stored on disk.
pub fn generate_sample(run: &RunConfig, scenario: &ScenarioConfig, seed: u64) -> Result<Medium> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medium = match &scenario.shape {
        ShapeSpec::Ovals { count, semi_axis } => {
            scenario.check_run(run)?;
            let mask = random_oval_mask(&run.grid, scenario.margin, *count, *semi_axis, &mut rng)?;
            run.medium(scenario.paint(&mask))?
        }
        ShapeSpec::Digits { size } => {
            let digit = digit_mask(rng.random_range(0..DIGIT_COUNT));
            let (w, h) = digit.dim();
            let width = ((size * w) as f64 / h as f64).round().max(1.0) as usize;
            let placement = Placement::Random { seed: rng.next_u64() };
            mask_to_medium(&digit, run, scenario, Some((width, *size)), placement)?
        }
        ShapeSpec::Masks { files, size } => {
            let file = &files[rng.random_range(0..files.len())];
            let mask = read_pgm(Path::new(file))?;
            let size = match size {
                Some(s) => *s,
                None => {
                    let ((x0, x1), (z0, z1)) = super::legal_region(&run.grid, scenario.margin)?;
                    (x1 - x0, z1 - z0)
                }
            };
            let placement = Placement::Random { seed: rng.next_u64() };
            mask_to_medium(&mask, run, scenario, Some(size), placement)?
        }
    };
    let smooth = scenario.smoothing.iter().any(|&s| s > 0.0);
    if smooth || scenario.grid_noise > 0.0 {
        let noise = (scenario.grid_noise > 0.0).then_some(GridNoise {
            fraction: scenario.grid_noise,
            reference: scenario.background,
        });
        medium = smooth_object_values(&medium, scenario.smoothing, noise, scenario.bounds, rng.next_u64())?;
    }
    let values = medium.properties().clone().map(|m| round_to_f32(m.values()));
    medium = medium.with_values(values)?;
    let cfl = check_cfl(&medium, run.dt);
    if !cfl.passed {
        return Err(Error::Cfl(cfl));
    }
    Ok(medium)
}

/// Running count, mean and sum of squared deviations.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (n, sum) = values.clone().fold((0.0, 0.0), |(n, s), v| (n + 1.0, s + v));
        let mean = if n > 0.0 { sum / n } else { 0.0 };
        let m2 = values.map(|v| (v - mean) * (v - mean)).sum();
        Moments { n, mean, m2 }
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }
}

/// Stored precision of a channel-data tensor.
fn stored(cd: &ChannelData) -> ChannelData {
    cd.with_values(cd.values.mapv(|v| v as f32 as f64))
}

/// Writes `sample_NNNNN/` directories (medium plus `cd.json`/`cd.bin`) and
/// `manifest.json` under `out_dir`. `on_sample` sees each finished index.
pub fn generate_dataset(
    n: usize,
    run: &RunConfig,
    scenario: &ScenarioConfig,
    out_dir: &Path,
    master_seed: u64,
    mut on_sample: impl FnMut(usize),
) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    run.validate()?;
    scenario.check_run(run)?;
    let setup = run.setup()?;
    let mut moments = Moments::default();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let seed = sample_seed(master_seed, i);
        let medium = generate_sample(run, scenario, seed)?;
        let cd = stored(&forward(&medium, &setup)?);
        moments = moments.merge(Moments::of(cd.values.iter().copied()));

        let name = format!("sample_{i:05}");
        let dir = out_dir.join(&name);
        write_medium(&dir, &medium, scenario.bounds)?;
        write_channel_data(&dir.join("cd.json"), &cd)?;
        samples.push(SampleEntry {
            medium: name.clone(),
            channel_data: format!("{name}/cd.json"),
            seed,
        });
        on_sample(i);
    }
    let stats = CdStats::new(moments.mean, (moments.m2 / moments.n).sqrt())?;
    let manifest = DatasetManifest {
        n,
        master_seed,
        scenario: scenario.clone(),
        run: run.clone(),
        stats,
        samples,
    };
    let path: PathBuf = out_dir.join(DATASET_MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
