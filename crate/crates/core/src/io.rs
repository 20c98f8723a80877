//! On-disk containers: a JSON manifest next to a raw little-endian `f32`
//! raster. Values pass through `f32`, so a write-read cycle is exact for any
//! data already representable in single precision.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelData;
use crate::error::{Error, Result};
use crate::grid::{damping_profile, Grid, Medium, Modality, Physics, PropertyKind, PropertyMap, UnitSystem};

pub const ENDIANNESS: &str = "little";

/// Encodes values as little-endian `f32`.
pub fn encode_f32(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|v| (v as f32).to_le_bytes())
        .collect()
}

pub fn decode_f32(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 4 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    )
}

/// Reads exactly `count` little-endian `f32` values.
pub fn read_f32s(reader: &mut impl Read, count: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 4];
    reader.read_exact(&mut buf)?;
    Ok(decode_f32(&buf).expect("length is a multiple of 4"))
}

pub fn write_f32s(writer: &mut impl Write, values: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    writer.write_all(&encode_f32(values))
}

/// Rounds every entry to the nearest `f32`, the precision files carry.
pub fn round_to_f32(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v as f32 as f64)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Raw file belonging to a manifest: same stem, `.bin` extension.
pub fn data_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn sibling(manifest: &Path, name: &str) -> PathBuf {
    manifest.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyMapManifest {
    /// `[n_x, n_z]`, row-major with `x` as the slow axis.
    pub shape: [usize; 2],
    pub kind: PropertyKind,
    pub units: String,
    pub theta_min: f64,
    pub theta_max: f64,
    pub endianness: String,
    pub data: String,
}

/// Writes `<stem>.json` and `<stem>.bin`. `bounds` are the scenario's
/// `[θ_min, θ_max]`.
pub fn write_property_map(manifest: &Path, map: &PropertyMap, bounds: (f64, f64)) -> Result<()> {
    let (nx, nz) = map.values().dim();
    let raw = data_path(manifest);
    let m = PropertyMapManifest {
        shape: [nx, nz],
        kind: map.kind(),
        units: map.kind().units().to_string(),
        theta_min: bounds.0,
        theta_max: bounds.1,
        endianness: ENDIANNESS.into(),
        data: file_name(&raw),
    };
    write_file(&raw, &encode_f32(map.values().as_standard_layout().iter().copied()))?;
    write_json(manifest, &m)
}

/// Returns the map and its `[θ_min, θ_max]`.
pub fn read_property_map(manifest: &Path) -> Result<(PropertyMap, (f64, f64))> {
    let m: PropertyMapManifest = read_json(manifest)?;
    if m.endianness != ENDIANNESS {
        return Err(Error::format(manifest, format!("unsupported endianness {:?}", m.endianness)));
    }
    let raw = sibling(manifest, &m.data);
    let values = decode_f32(&read_file(&raw)?).ok_or_else(|| Error::format(&raw, "length is not a multiple of 4"))?;
    let [nx, nz] = m.shape;
    if values.len() != nx * nz {
        return Err(Error::format(
            &raw,
            format!("holds {} values, manifest shape {:?} needs {}", values.len(), m.shape, nx * nz),
        ));
    }
    let arr = Array2::from_shape_vec((nx, nz), values).expect("length checked");
    let map = PropertyMap::new(m.kind, arr).map_err(|e| Error::format(&raw, e.to_string()))?;
    Ok((map, (m.theta_min, m.theta_max)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDataManifest {
    /// `[n_p, n_t, n_c]`
    pub shape: [usize; 3],
    pub dt: f64,
    pub modality: Modality,
    pub element_positions: Vec<(usize, usize)>,
    pub unit_system: UnitSystem,
    pub endianness: String,
    pub data: String,
}

/// Writes `<stem>.json` plus `<stem>.bin` in `[p][t][c]` order.
pub fn write_channel_data(manifest: &Path, cd: &ChannelData) -> Result<()> {
    let (p, t, c) = cd.shape();
    let raw = data_path(manifest);
    let m = ChannelDataManifest {
        shape: [p, t, c],
        dt: cd.dt,
        modality: cd.modality,
        element_positions: cd.element_positions.clone(),
        unit_system: cd.unit_system,
        endianness: ENDIANNESS.into(),
        data: file_name(&raw),
    };
    write_file(&raw, &encode_f32(cd.values.as_standard_layout().iter().copied()))?;
    write_json(manifest, &m)
}

pub fn read_channel_data(manifest: &Path) -> Result<ChannelData> {
    let m: ChannelDataManifest = read_json(manifest)?;
    if m.endianness != ENDIANNESS {
        return Err(Error::format(manifest, format!("unsupported endianness {:?}", m.endianness)));
    }
    let raw = sibling(manifest, &m.data);
    let values = decode_f32(&read_file(&raw)?).ok_or_else(|| Error::format(&raw, "length is not a multiple of 4"))?;
    let [p, t, c] = m.shape;
    if values.len() != p * t * c {
        return Err(Error::format(
            &raw,
            format!("holds {} values, manifest shape {:?} needs {}", values.len(), m.shape, p * t * c),
        ));
    }
    let arr = Array3::from_shape_vec((p, t, c), values).expect("length checked");
    ChannelData::new(arr, m.dt, m.modality, m.unit_system, m.element_positions)
        .map_err(|e| Error::format(manifest, e.to_string()))
}

/// Contents of `medium.json` inside a medium directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumManifest {
    pub grid: Grid,
    pub physics: Physics,
    /// Peak of the quadratic PML ramp.
    pub d_max: f64,
    /// Property map manifests, relative to the directory.
    pub properties: [String; 2],
}

pub const MEDIUM_MANIFEST: &str = "medium.json";

/// Writes `medium.json` plus one property-map container per property. The
/// damping map is stored by its peak value and must be a quadratic ramp.
pub fn write_medium(dir: &Path, medium: &Medium, bounds: [(f64, f64); 2]) -> Result<()> {
    let d_max = medium.damping().iter().fold(0.0f64, |m, &d| m.max(d));
    if damping_profile(medium.grid(), d_max)? != *medium.damping() {
        return Err(Error::invalid("damping", "only quadratic PML ramps can be stored"));
    }
    let names = medium.properties().clone().map(|m| format!("{}.json", m.kind().name()));
    for ((map, name), b) in medium.properties().iter().zip(&names).zip(bounds) {
        write_property_map(&dir.join(name), map, b)?;
    }
    write_json(
        &dir.join(MEDIUM_MANIFEST),
        &MediumManifest {
            grid: *medium.grid(),
            physics: medium.physics(),
            d_max,
            properties: names,
        },
    )
}

/// Reads a medium directory; returns the medium and per-property bounds.
pub fn read_medium(dir: &Path) -> Result<(Medium, [(f64, f64); 2])> {
    let path = dir.join(MEDIUM_MANIFEST);
    let m: MediumManifest = read_json(&path)?;
    let (a, ba) = read_property_map(&dir.join(&m.properties[0]))?;
    let (b, bb) = read_property_map(&dir.join(&m.properties[1]))?;
    let damping = damping_profile(&m.grid, m.d_max).map_err(|e| Error::format(&path, e.to_string()))?;
    let medium = Medium::new(m.grid, m.physics, [a, b], damping).map_err(|e| Error::format(&path, e.to_string()))?;
    Ok((medium, [ba, bb]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{default_d_max, make_grid};

    #[test]
    fn f32_codec() {
        let bytes = encode_f32([1.0, -2.5, 0.1]);
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        let back = decode_f32(&bytes).unwrap();
        assert_eq!(back, vec![1.0, -2.5, 0.1f32 as f64]);
        assert!(decode_f32(&bytes[..5]).is_none());
    }

    #[test]
    fn property_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let values = Array2::from_shape_fn((3, 4), |(x, z)| 1480.0 + (x * 4 + z) as f64 * 0.37);
        let map = PropertyMap::new(PropertyKind::SpeedOfSound, round_to_f32(&values)).unwrap();
        let path = dir.path().join("sos.json");
        write_property_map(&path, &map, (1400.0, 1600.0)).unwrap();
        let (back, b) = read_property_map(&path).unwrap();
        assert_eq!(back, map);
        assert_eq!(b, (1400.0, 1600.0));
        let raw = fs::read(dir.path().join("sos.bin")).unwrap();
        assert_eq!(raw.len(), 12 * 4);
        // x is the slow axis
        assert_eq!(&raw[4..8], &(map.values()[[0, 1]] as f32).to_le_bytes());
    }

    #[test]
    fn medium_round_trip_and_bad_damping() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(12, 10, 5e-4, 2).unwrap();
        let sos = Array2::from_shape_fn(g.shape(), |(x, _)| 1480.0 + x as f64);
        let m = Medium::acoustic(
            g,
            PropertyMap::new(PropertyKind::SpeedOfSound, sos).unwrap(),
            PropertyMap::uniform(PropertyKind::Density, &g, 1000.0).unwrap(),
            damping_profile(&g, default_d_max(&g, 1480.0)).unwrap(),
        )
        .unwrap();
        write_medium(dir.path(), &m, [(1400.0, 1600.0), (900.0, 1100.0)]).unwrap();
        let (back, bounds) = read_medium(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(bounds[1], (900.0, 1100.0));

        let odd = Medium::acoustic(
            g,
            m.property(0).clone(),
            m.property(1).clone(),
            Array2::from_elem(g.shape(), 1.0),
        )
        .unwrap();
        assert!(write_medium(dir.path(), &odd, [(0.0, 1.0); 2]).is_err());
    }

    #[test]
    fn truncated_raster_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cd.json");
        let cd = ChannelData::new(
            Array3::from_shape_fn((2, 3, 2), |(p, t, c)| (p * 6 + t * 2 + c) as f64),
            1e-7,
            Modality::Acoustic,
            UnitSystem::Si,
            vec![(1, 1), (2, 2)],
        )
        .unwrap();
        write_channel_data(&path, &cd).unwrap();
        assert_eq!(read_channel_data(&path).unwrap(), cd);
        let raw = dir.path().join("cd.bin");
        let bytes = fs::read(&raw).unwrap();
        fs::write(&raw, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_channel_data(&path), Err(Error::Format { .. })));
    }
}
