//! Grid geometry, property maps, media and the stability/damping helpers
//! shared by both modalities.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square-pixel simulation grid. `dx` applies to both axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_x: usize,
    pub n_z: usize,
    pub dx: f64,
    pub pml_width: usize,
}

impl Grid {
    pub fn new(n_x: usize, n_z: usize, dx: f64, pml_width: usize) -> Result<Self> {
        let grid = Grid {
            n_x,
            n_z,
            dx,
            pml_width,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 {
            return Err(Error::invalid("n_x", "must be at least 1"));
        }
        if self.n_z == 0 {
            return Err(Error::invalid("n_z", "must be at least 1"));
        }
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(Error::invalid("dx", format!("must be positive, got {}", self.dx)));
        }
        if 2 * self.pml_width >= self.n_x.min(self.n_z) && self.pml_width > 0 {
            return Err(Error::invalid(
                "pml_width",
                format!(
                    "{} leaves no interior on a {}x{} grid",
                    self.pml_width, self.n_x, self.n_z
                ),
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_x, self.n_z)
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// How many pixels deep `(ix, iz)` sits inside the PML band; 0 in the interior
    /// and `pml_width` on the outermost ring.
    pub fn pml_depth(&self, ix: usize, iz: usize) -> usize {
        let w = self.pml_width;
        let axis = |i: usize, n: usize| {
            if i < w {
                w - i
            } else if i + w >= n {
                i + w + 1 - n
            } else {
                0
            }
        };
        axis(ix, self.n_x).max(axis(iz, self.n_z))
    }

    /// Inside the grid and outside the PML band.
    pub fn is_interior(&self, ix: usize, iz: usize) -> bool {
        ix < self.n_x && iz < self.n_z && self.pml_depth(ix, iz) == 0
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros(self.shape())
    }
}

pub fn make_grid(n_x: usize, n_z: usize, dx: f64, pml_width: usize) -> Result<Grid> {
    Grid::new(n_x, n_z, dx, pml_width)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    SpeedOfSound,
    Density,
    Conductivity,
    RelativePermittivity,
}

impl PropertyKind {
    pub fn units(self) -> &'static str {
        match self {
            PropertyKind::SpeedOfSound => "m/s",
            PropertyKind::Density => "kg/m^3",
            PropertyKind::Conductivity => "S/m",
            PropertyKind::RelativePermittivity => "1",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::SpeedOfSound => "sos",
            PropertyKind::Density => "density",
            PropertyKind::Conductivity => "conductivity",
            PropertyKind::RelativePermittivity => "permittivity",
        }
    }

    pub fn strictly_positive(self) -> bool {
        matches!(
            self,
            PropertyKind::SpeedOfSound | PropertyKind::Density | PropertyKind::RelativePermittivity
        )
    }
}

/// One physical property sampled on the grid, indexed `[ix, iz]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyMap {
    kind: PropertyKind,
    values: Array2<f64>,
}

impl PropertyMap {
    pub fn new(kind: PropertyKind, values: Array2<f64>) -> Result<Self> {
        for &v in values.iter() {
            if !v.is_finite() || v < 0.0 || (kind.strictly_positive() && v == 0.0) {
                return Err(Error::invalid(
                    "property values",
                    format!("{} map contains illegal value {v}", kind.name()),
                ));
            }
        }
        Ok(PropertyMap { kind, values })
    }

    pub fn uniform(kind: PropertyKind, grid: &Grid, value: f64) -> Result<Self> {
        Self::new(kind, Array2::from_elem(grid.shape(), value))
    }

    pub fn kind(&self) -> PropertyKind {
        self.kind
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Acoustic,
    Em,
}

impl Modality {
    pub fn property_kinds(self) -> [PropertyKind; 2] {
        match self {
            Modality::Acoustic => [PropertyKind::SpeedOfSound, PropertyKind::Density],
            Modality::Em => [PropertyKind::Conductivity, PropertyKind::RelativePermittivity],
        }
    }
}

/// Unit convention a configuration is expressed in. `Normalized` is used by
/// the radar presets: time in nanoseconds, length in centimeters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    #[default]
    Si,
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Physics {
    Acoustic,
    /// Speed of light and permeability, constant over the grid.
    Em { c0: f64, mu0: f64 },
}

impl Physics {
    pub fn modality(&self) -> Modality {
        match self {
            Physics::Acoustic => Modality::Acoustic,
            Physics::Em { .. } => Modality::Em,
        }
    }
}

/// All property maps of one scan scenario plus the PML damping map.
///
/// Acoustic media hold `[sos, density]`, EM media `[conductivity, permittivity]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Medium {
    grid: Grid,
    physics: Physics,
    properties: [PropertyMap; 2],
    damping: Array2<f64>,
}

impl Medium {
    pub fn acoustic(
        grid: Grid,
        sos: PropertyMap,
        density: PropertyMap,
        damping: Array2<f64>,
    ) -> Result<Self> {
        Self::new(grid, Physics::Acoustic, [sos, density], damping)
    }

    pub fn em(
        grid: Grid,
        conductivity: PropertyMap,
        permittivity: PropertyMap,
        damping: Array2<f64>,
        c0: f64,
        mu0: f64,
    ) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::invalid("c0", format!("must be positive, got {c0}")));
        }
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid("mu0", format!("must be positive, got {mu0}")));
        }
        Self::new(grid, Physics::Em { c0, mu0 }, [conductivity, permittivity], damping)
    }

    pub fn new(
        grid: Grid,
        physics: Physics,
        properties: [PropertyMap; 2],
        damping: Array2<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        let expected = physics.modality().property_kinds();
        for (map, kind) in properties.iter().zip(expected) {
            if map.kind() != kind {
                return Err(Error::invalid(
                    "properties",
                    format!("expected {} map, got {}", kind.name(), map.kind().name()),
                ));
            }
            if map.values().dim() != grid.shape() {
                return Err(Error::Shape(format!(
                    "{} map is {:?}, grid is {:?}",
                    kind.name(),
                    map.values().dim(),
                    grid.shape()
                )));
            }
        }
        if damping.dim() != grid.shape() {
            return Err(Error::Shape(format!(
                "damping map is {:?}, grid is {:?}",
                damping.dim(),
                grid.shape()
            )));
        }
        if damping.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("damping", "must be finite and non-negative"));
        }
        Ok(Medium {
            grid,
            physics,
            properties,
            damping,
        })
    }

    /// Same medium with the property rasters replaced.
    pub fn with_values(&self, values: [Array2<f64>; 2]) -> Result<Self> {
        let [a, b] = values;
        let kinds = self.modality().property_kinds();
        Self::new(
            self.grid,
            self.physics,
            [PropertyMap::new(kinds[0], a)?, PropertyMap::new(kinds[1], b)?],
            self.damping.clone(),
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn modality(&self) -> Modality {
        self.physics.modality()
    }

    pub fn properties(&self) -> &[PropertyMap; 2] {
        &self.properties
    }

    pub fn property(&self, j: usize) -> &PropertyMap {
        &self.properties[j]
    }

    pub fn damping(&self) -> &Array2<f64> {
        &self.damping
    }

    /// Fastest wave speed anywhere on the grid.
    pub fn max_speed(&self) -> f64 {
        match self.physics {
            Physics::Acoustic => self.properties[0].max(),
            Physics::Em { c0, .. } => c0 / self.properties[1].min().sqrt(),
        }
    }
}

/// Quadratic PML damping ramp: zero in the interior, `d_max` on the outer ring.
pub fn damping_profile(grid: &Grid, d_max: f64) -> Result<Array2<f64>> {
    grid.validate()?;
    if !(d_max >= 0.0 && d_max.is_finite()) {
        return Err(Error::invalid("d_max", format!("must be non-negative, got {d_max}")));
    }
    let w = grid.pml_width;
    Ok(Array2::from_shape_fn(grid.shape(), |(ix, iz)| {
        if w == 0 {
            return 0.0;
        }
        let r = grid.pml_depth(ix, iz) as f64 / w as f64;
        d_max * r * r
    }))
}

/// Dimensionless PML strength: `d_max = PML_STRENGTH * c / (pml_width * dx)`.
///
/// Picked on a 60x60 water run against a windowed 400x400 reference: a
/// zero-mean 1.5 MHz pulse returns least energy (about -19 dB) near 3, and the
/// monopolar 3 MHz pulse leaves the least residual energy between 2 and 3.
/// Stronger ramps reflect more off the damping gradient.
pub const PML_STRENGTH: f64 = 3.0;

/// Calibrated peak damping for waves travelling at `c_ref`.
pub fn default_d_max(grid: &Grid, c_ref: f64) -> f64 {
    if grid.pml_width == 0 {
        return 0.0;
    }
    PML_STRENGTH * c_ref / (grid.pml_width as f64 * grid.dx)
}

/// Courant number bound for the 5-point Laplacian leapfrog scheme in 2D.
pub const CFL_BOUND: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CflReport {
    pub c_max: f64,
    pub dt: f64,
    pub dx: f64,
    pub courant: f64,
    pub bound: f64,
    pub passed: bool,
}

impl fmt::Display for CflReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "c_max*dt/dx = {:.6} * {:.6e} / {:.6e} = {:.6} {} {:.6}",
            self.c_max,
            self.dt,
            self.dx,
            self.courant,
            if self.passed { "<=" } else { ">" },
            self.bound
        )
    }
}

pub fn cfl_report(c_max: f64, dt: f64, dx: f64) -> CflReport {
    let courant = c_max * dt / dx;
    CflReport {
        c_max,
        dt,
        dx,
        courant,
        bound: CFL_BOUND,
        passed: courant <= CFL_BOUND,
    }
}

pub fn check_cfl(medium: &Medium, dt: f64) -> CflReport {
    cfl_report(medium.max_speed(), dt, medium.grid().dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grids_validate() {
        let radar = make_grid(50, 50, 0.006, 9).unwrap();
        assert_eq!(radar.len(), 2500);
        make_grid(100, 100, 0.0005, 10).unwrap();
        make_grid(1, 1, 0.001, 0).unwrap();
    }

    #[test]
    fn grid_errors_name_the_field() {
        let field = |r: Result<Grid>| match r {
            Err(Error::Validation { field, .. }) => field,
            other => panic!("expected validation error, got {other:?}"),
        };
        assert_eq!(field(make_grid(0, 5, 1.0, 0)), "n_x");
        assert_eq!(field(make_grid(5, 0, 1.0, 0)), "n_z");
        assert_eq!(field(make_grid(5, 5, 0.0, 0)), "dx");
        assert_eq!(field(make_grid(5, 5, -1.0, 0)), "dx");
        assert_eq!(field(make_grid(10, 20, 1.0, 5)), "pml_width");
        make_grid(11, 20, 1.0, 5).unwrap();
    }

    #[test]
    fn damping_profile_shape() {
        let g = make_grid(21, 21, 1.0, 5).unwrap();
        assert!(damping_profile(&make_grid(8, 8, 1.0, 0).unwrap(), 3.0)
            .unwrap()
            .iter()
            .all(|&d| d == 0.0));
        let d = damping_profile(&g, 7.5).unwrap();
        assert_eq!(d[[10, 10]], 0.0);
        assert_eq!(d[[0, 0]], 7.5);
        assert_eq!(d[[20, 20]], 7.5);
        assert_eq!(d[[0, 10]], 7.5);
        // first band pixel next to the interior: depth 1 of 5
        assert!((d[[4, 10]] - 7.5 / 25.0).abs() < 1e-15);
        assert_eq!(d[[5, 10]], 0.0);
        // monotone towards the edge
        for ix in 0..5 {
            assert!(d[[ix, 10]] > d[[ix + 1, 10]]);
        }
        // square-grid symmetries
        for ix in 0..21 {
            for iz in 0..21 {
                assert_eq!(d[[ix, iz]], d[[iz, ix]]);
                assert_eq!(d[[ix, iz]], d[[20 - ix, iz]]);
                assert_eq!(d[[ix, iz]], d[[ix, 20 - iz]]);
            }
        }
    }

    fn water(grid: Grid, c: f64) -> Medium {
        Medium::acoustic(
            grid,
            PropertyMap::uniform(PropertyKind::SpeedOfSound, &grid, c).unwrap(),
            PropertyMap::uniform(PropertyKind::Density, &grid, 1000.0).unwrap(),
            grid.zeros(),
        )
        .unwrap()
    }

    #[test]
    fn cfl_gate() {
        let g = make_grid(100, 100, 5e-4, 10).unwrap();
        let m = water(g, 1570.0);
        let ok = check_cfl(&m, 1.4077e-7);
        assert!(ok.passed);
        assert!((ok.courant - 0.4420178).abs() < 1e-6);
        assert!(!check_cfl(&m, 2.0 * 1.4077e-7 * 2.0).passed);

        // boundary is inclusive
        let dt_edge = CFL_BOUND * 5e-4 / 1570.0;
        let r = cfl_report(1570.0, dt_edge, 5e-4);
        assert!(r.courant <= CFL_BOUND + 1e-16);
        assert!(cfl_report(1.0, CFL_BOUND, 1.0).passed);
    }

    #[test]
    fn cfl_uses_slowest_permittivity_for_em() {
        let g = make_grid(10, 10, 0.6, 0).unwrap();
        let mut eps = Array2::from_elem(g.shape(), 61.065);
        eps[[3, 3]] = 1.0006;
        let m = Medium::em(
            g,
            PropertyMap::uniform(PropertyKind::Conductivity, &g, 0.025).unwrap(),
            PropertyMap::new(PropertyKind::RelativePermittivity, eps).unwrap(),
            g.zeros(),
            30.0,
            0.1255,
        )
        .unwrap();
        assert!((m.max_speed() - 30.0 / 1.0006f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn property_and_medium_validation() {
        let g = make_grid(4, 4, 1.0, 0).unwrap();
        let mut bad = Array2::from_elem((4, 4), 1.0);
        bad[[1, 2]] = -1.0;
        assert!(PropertyMap::new(PropertyKind::Conductivity, bad).is_err());
        assert!(PropertyMap::new(PropertyKind::Density, Array2::zeros((4, 4))).is_err());
        PropertyMap::new(PropertyKind::Conductivity, Array2::zeros((4, 4))).unwrap();
        // vacuum permittivity is permitted
        PropertyMap::uniform(PropertyKind::RelativePermittivity, &g, 1.0).unwrap();

        let sos = PropertyMap::uniform(PropertyKind::SpeedOfSound, &g, 1500.0).unwrap();
        let small = PropertyMap::new(PropertyKind::Density, Array2::from_elem((3, 4), 1.0)).unwrap();
        assert!(matches!(
            Medium::acoustic(g, sos.clone(), small, g.zeros()),
            Err(Error::Shape(_))
        ));
        let rho = PropertyMap::uniform(PropertyKind::Density, &g, 1000.0).unwrap();
        assert!(Medium::acoustic(g, rho.clone(), sos.clone(), g.zeros()).is_err());
        assert!(Medium::acoustic(g, sos, rho, Array2::zeros((4, 5))).is_err());
    }

    #[test]
    fn cfl_is_monotone_in_dt() {
        let base = cfl_report(1500.0, 2e-7, 5e-4);
        assert!(base.passed);
        for k in 1..50 {
            assert!(cfl_report(1500.0, 2e-7 * (1.0 - k as f64 / 50.0), 5e-4).passed);
        }
    }
}
