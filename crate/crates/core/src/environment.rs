//! Vertical stratification of the water column.
//!
//! A [`StratificationProfile`] maps depth (metres, positive downward) to
//! sea-water density and its vertical gradient. Profiles are immutable once
//! built and can be shared freely between threads.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, RangeBound, Result};

/// Reference density at which the buoy is neutral with a half-full chamber.
pub const DEFAULT_RHO_REF: f64 = 1022.0;
/// Deepest point of the default depth range.
pub const DEFAULT_Z_MAX: f64 = 2000.0;

/// One `(depth, density)` sample of a tabulated profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub depth: f64,
    pub density: f64,
}

impl From<(f64, f64)> for Knot {
    fn from((depth, density): (f64, f64)) -> Self {
        Knot { depth, density }
    }
}

/// Shape of the density curve.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    Constant {
        rho: f64,
    },
    LinearRamp {
        rho_surface: f64,
        slope: f64,
    },
    /// Smooth transition between two mixed layers:
    /// `rho(z) = mid + (rho_bottom - rho_top)/2 * tanh((z - z_center)/thickness)`.
    TanhPycnocline {
        rho_top: f64,
        rho_bottom: f64,
        z_center: f64,
        thickness: f64,
    },
    PiecewiseLinear {
        knots: Vec<Knot>,
    },
    TableLookup {
        knots: Vec<Knot>,
    },
}

/// Horizontal-plane water motion is out of scope; this is the vertical
/// component of the local water velocity, `v_l(z) = surface + shear * z`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WaterVelocity {
    pub surface: f64,
    pub shear: f64,
}

impl WaterVelocity {
    pub fn at(&self, z: f64) -> f64 {
        self.surface + self.shear * z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratificationProfile {
    kind: ProfileKind,
    rho_ref: f64,
    z_max: f64,
    water_velocity: WaterVelocity,
}

impl StratificationProfile {
    pub fn new(kind: ProfileKind, rho_ref: f64, z_max: f64) -> Result<Self> {
        if !(rho_ref > 0.0 && rho_ref.is_finite()) {
            return Err(Error::Invalid(format!("rho_ref must be > 0, got {rho_ref}")));
        }
        if !(z_max > 0.0 && z_max.is_finite()) {
            return Err(Error::Invalid(format!("z_max must be > 0, got {z_max}")));
        }
        check_kind(&kind, z_max)?;
        Ok(StratificationProfile {
            kind,
            rho_ref,
            z_max,
            water_velocity: WaterVelocity::default(),
        })
    }

    pub fn constant(rho: f64) -> Result<Self> {
        Self::new(ProfileKind::Constant { rho }, DEFAULT_RHO_REF, DEFAULT_Z_MAX)
    }

    pub fn with_water_velocity(mut self, water_velocity: WaterVelocity) -> Self {
        self.water_velocity = water_velocity;
        self
    }

    pub fn with_rho_ref(mut self, rho_ref: f64) -> Result<Self> {
        if !(rho_ref > 0.0 && rho_ref.is_finite()) {
            return Err(Error::Invalid(format!("rho_ref must be > 0, got {rho_ref}")));
        }
        self.rho_ref = rho_ref;
        Ok(self)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn rho_ref(&self) -> f64 {
        self.rho_ref
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn water_velocity(&self, z: f64) -> f64 {
        self.water_velocity.at(z)
    }

    fn check_range(&self, z: f64) -> Result<()> {
        if z.is_nan() {
            return Err(Error::NumericalFailure { signal: "z" });
        }
        if z < 0.0 {
            return Err(Error::OutOfRange {
                z,
                bound: RangeBound::Surface,
                limit: 0.0,
            });
        }
        if z > self.z_max {
            return Err(Error::OutOfRange {
                z,
                bound: RangeBound::Bottom,
                limit: self.z_max,
            });
        }
        Ok(())
    }

    pub fn density_at(&self, z: f64) -> Result<f64> {
        self.check_range(z)?;
        Ok(match &self.kind {
            ProfileKind::Constant { rho } => *rho,
            ProfileKind::LinearRamp { rho_surface, slope } => rho_surface + slope * z,
            ProfileKind::TanhPycnocline {
                rho_top,
                rho_bottom,
                z_center,
                thickness,
            } => {
                let mid = 0.5 * (rho_top + rho_bottom);
                let half_jump = 0.5 * (rho_bottom - rho_top);
                mid + half_jump * ((z - z_center) / thickness).tanh()
            }
            ProfileKind::PiecewiseLinear { knots } | ProfileKind::TableLookup { knots } => {
                interpolate(knots, z)
            }
        })
    }

    /// Vertical density gradient in kg/m⁴. Piecewise kinds return the slope
    /// of the segment to the right of `z` (so a knot reports its outgoing slope).
    pub fn density_gradient(&self, z: f64) -> Result<f64> {
        self.check_range(z)?;
        Ok(match &self.kind {
            ProfileKind::Constant { .. } => 0.0,
            ProfileKind::LinearRamp { slope, .. } => *slope,
            ProfileKind::TanhPycnocline {
                rho_top,
                rho_bottom,
                z_center,
                thickness,
            } => {
                let half_jump = 0.5 * (rho_bottom - rho_top);
                let sech = 1.0 / ((z - z_center) / thickness).cosh();
                half_jump / thickness * sech * sech
            }
            ProfileKind::PiecewiseLinear { knots } | ProfileKind::TableLookup { knots } => {
                segment_slope(knots, z)
            }
        })
    }
}

fn check_kind(kind: &ProfileKind, z_max: f64) -> Result<()> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Invalid(format!("{name} must be > 0, got {v}")))
        }
    };
    match kind {
        ProfileKind::Constant { rho } => positive("rho", *rho),
        ProfileKind::LinearRamp { rho_surface, slope } => {
            positive("rho_surface", *rho_surface)?;
            if !slope.is_finite() {
                return Err(Error::Invalid("slope must be finite".into()));
            }
            positive("density at z_max", rho_surface + slope * z_max)
        }
        ProfileKind::TanhPycnocline {
            rho_top,
            rho_bottom,
            z_center,
            thickness,
        } => {
            positive("rho_top", *rho_top)?;
            positive("rho_bottom", *rho_bottom)?;
            positive("thickness", *thickness)?;
            if !z_center.is_finite() {
                return Err(Error::Invalid("z_center must be finite".into()));
            }
            Ok(())
        }
        ProfileKind::PiecewiseLinear { knots } | ProfileKind::TableLookup { knots } => {
            check_knots(knots)
        }
    }
}

fn check_knots(knots: &[Knot]) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::Invalid("profile needs at least one knot".into()));
    }
    for k in knots {
        if !k.depth.is_finite() || !(k.density > 0.0 && k.density.is_finite()) {
            return Err(Error::Invalid(format!(
                "knot ({}, {}) must have finite depth and positive density",
                k.depth, k.density
            )));
        }
    }
    if let Some(w) = knots.windows(2).find(|w| w[1].depth <= w[0].depth) {
        return Err(Error::Invalid(format!(
            "knot depths must be strictly increasing ({} then {})",
            w[0].depth, w[1].depth
        )));
    }
    Ok(())
}

/// Linear interpolation, holding the end values outside the knot span.
fn interpolate(knots: &[Knot], z: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if z <= first.depth {
        return first.density;
    }
    if z >= last.depth {
        return last.density;
    }
    let i = knots.partition_point(|k| k.depth <= z);
    let (lo, hi) = (knots[i - 1], knots[i]);
    let w = (z - lo.depth) / (hi.depth - lo.depth);
    lo.density + w * (hi.density - lo.density)
}

fn segment_slope(knots: &[Knot], z: f64) -> f64 {
    if z < knots[0].depth || z >= knots[knots.len() - 1].depth {
        return 0.0;
    }
    let i = knots.partition_point(|k| k.depth <= z);
    let (lo, hi) = (knots[i - 1], knots[i]);
    (hi.density - lo.density) / (hi.depth - lo.depth)
}

/// `(rho - rho_ref) / rho_ref`.
pub fn relative_density_change(rho: f64, rho_ref: f64) -> Result<f64> {
    if !(rho > 0.0) || !(rho_ref > 0.0) {
        return Err(Error::Domain(format!(
            "densities must be positive (rho = {rho}, rho_ref = {rho_ref})"
        )));
    }
    Ok((rho - rho_ref) / rho_ref)
}

/// Reads a two-column `depth_m,density_kg_m3` table. A header row is required.
pub fn load_table_csv(path: &Path) -> Result<Vec<Knot>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() != 2 || headers.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::Invalid(format!(
            "{}: expected a header row `depth_m,density_kg_m3`",
            path.display()
        )));
    }
    let mut knots = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Invalid(format!(
                        "{}: row {} column {} is not a number",
                        path.display(),
                        row + 2,
                        i + 1
                    ))
                })
        };
        knots.push(Knot {
            depth: field(0)?,
            density: field(1)?,
        });
    }
    check_knots(&knots)?;
    Ok(knots)
}

/// Serializable description of a profile, as it appears in scenario files.
/// Table profiles keep the CSV path; the knots are read on [`ProfileSpec::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileShape {
    Constant {
        #[serde(default = "default_rho")]
        rho: f64,
    },
    LinearRamp {
        #[serde(default = "default_rho")]
        rho_surface: f64,
        #[serde(default)]
        slope: f64,
    },
    TanhPycnocline {
        rho_top: f64,
        rho_bottom: f64,
        z_center: f64,
        thickness: f64,
    },
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    TableLookup {
        path: PathBuf,
    },
}

fn default_rho() -> f64 {
    DEFAULT_RHO_REF
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub shape: ProfileShape,
    pub rho_ref: f64,
    pub z_max: f64,
    pub water_velocity: WaterVelocity,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec {
            shape: ProfileShape::Constant {
                rho: DEFAULT_RHO_REF,
            },
            rho_ref: DEFAULT_RHO_REF,
            z_max: DEFAULT_Z_MAX,
            water_velocity: WaterVelocity::default(),
        }
    }
}

impl ProfileSpec {
    pub fn build(&self) -> Result<StratificationProfile> {
        let to_knots = |pairs: &[(f64, f64)]| pairs.iter().copied().map(Knot::from).collect();
        let kind = match &self.shape {
            ProfileShape::Constant { rho } => ProfileKind::Constant { rho: *rho },
            ProfileShape::LinearRamp { rho_surface, slope } => ProfileKind::LinearRamp {
                rho_surface: *rho_surface,
                slope: *slope,
            },
            ProfileShape::TanhPycnocline {
                rho_top,
                rho_bottom,
                z_center,
                thickness,
            } => ProfileKind::TanhPycnocline {
                rho_top: *rho_top,
                rho_bottom: *rho_bottom,
                z_center: *z_center,
                thickness: *thickness,
            },
            ProfileShape::PiecewiseLinear { knots } => ProfileKind::PiecewiseLinear {
                knots: to_knots(knots),
            },
            ProfileShape::TableLookup { path } => ProfileKind::TableLookup {
                knots: load_table_csv(path)?,
            },
        };
        Ok(StratificationProfile::new(kind, self.rho_ref, self.z_max)?
            .with_water_velocity(self.water_velocity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_profile() -> StratificationProfile {
        StratificationProfile::new(
            ProfileKind::TanhPycnocline {
                rho_top: 1022.0,
                rho_bottom: 1028.0,
                z_center: 200.0,
                thickness: 40.0,
            },
            DEFAULT_RHO_REF,
            DEFAULT_Z_MAX,
        )
        .unwrap()
    }

    fn piecewise() -> StratificationProfile {
        StratificationProfile::new(
            ProfileKind::PiecewiseLinear {
                knots: vec![(0.0, 1022.0).into(), (100.0, 1022.0).into(), (150.0, 1027.0).into()],
            },
            DEFAULT_RHO_REF,
            DEFAULT_Z_MAX,
        )
        .unwrap()
    }

    #[test]
    fn constant_density() {
        let p = StratificationProfile::constant(1022.0).unwrap();
        assert_eq!(p.density_at(500.0).unwrap(), 1022.0);
        assert_eq!(p.density_gradient(500.0).unwrap(), 0.0);
    }

    #[test]
    fn tanh_midpoint_is_mean() {
        let p = tanh_profile();
        assert!((p.density_at(200.0).unwrap() - 1025.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_peak_gradient() {
        let p = tanh_profile();
        let g = p.density_gradient(200.0).unwrap();
        assert!((g - 0.075).abs() < 1e-15, "{g}");
        let h = 1e-4;
        let fd = (p.density_at(200.0 + h).unwrap() - p.density_at(200.0 - h).unwrap()) / (2.0 * h);
        assert!((fd - g).abs() < 1e-6 * g.abs() + 1e-9);
    }

    #[test]
    fn piecewise_interpolates() {
        let p = piecewise();
        assert!((p.density_at(125.0).unwrap() - 1024.5).abs() < 1e-12);
        // past the last knot the end value holds
        assert_eq!(p.density_at(400.0).unwrap(), 1027.0);
    }

    #[test]
    fn piecewise_gradient_uses_right_hand_slope() {
        let p = piecewise();
        assert_eq!(p.density_gradient(50.0).unwrap(), 0.0);
        assert_eq!(p.density_gradient(100.0).unwrap(), 0.1);
        assert_eq!(p.density_gradient(150.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_ramp_gradient() {
        let p = StratificationProfile::new(
            ProfileKind::LinearRamp {
                rho_surface: 1022.0,
                slope: 0.05,
            },
            DEFAULT_RHO_REF,
            DEFAULT_Z_MAX,
        )
        .unwrap();
        for z in [0.0, 13.0, 1999.0] {
            assert_eq!(p.density_gradient(z).unwrap(), 0.05);
        }
    }

    #[test]
    fn out_of_range_names_bound() {
        let p = tanh_profile();
        match p.density_at(-1.0) {
            Err(Error::OutOfRange { bound, .. }) => assert_eq!(bound, RangeBound::Surface),
            other => panic!("{other:?}"),
        }
        match p.density_gradient(2000.5) {
            Err(Error::OutOfRange { bound, limit, .. }) => {
                assert_eq!(bound, RangeBound::Bottom);
                assert_eq!(limit, 2000.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relative_change() {
        assert_eq!(relative_density_change(1022.0, 1022.0).unwrap(), 0.0);
        let up = relative_density_change(1027.0, 1022.0).unwrap();
        let down = relative_density_change(1017.0, 1022.0).unwrap();
        assert!((up - 5.0 / 1022.0).abs() < 1e-15);
        assert!((up - 0.004892).abs() < 1e-6);
        assert_eq!(down, -up);
        assert!(matches!(relative_density_change(0.0, 1022.0), Err(Error::Domain(_))));
        assert!(matches!(relative_density_change(1022.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_unsorted_knots() {
        let err = StratificationProfile::new(
            ProfileKind::PiecewiseLinear {
                knots: vec![(0.0, 1022.0).into(), (0.0, 1023.0).into()],
            },
            DEFAULT_RHO_REF,
            DEFAULT_Z_MAX,
        )
        .unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
    }

    #[test]
    fn rejects_nonpositive_ramp_density() {
        let err = StratificationProfile::new(
            ProfileKind::LinearRamp {
                rho_surface: 10.0,
                slope: -1.0,
            },
            DEFAULT_RHO_REF,
            DEFAULT_Z_MAX,
        );
        assert!(err.is_err());
    }

    #[test]
    fn table_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        std::fs::write(&path, "depth_m,density_kg_m3\n0,1022\n100,1022\n150,1027\n").unwrap();
        let knots = load_table_csv(&path).unwrap();
        assert_eq!(knots.len(), 3);
        let p = StratificationProfile::new(
            ProfileKind::TableLookup { knots },
            DEFAULT_RHO_REF,
            DEFAULT_Z_MAX,
        )
        .unwrap();
        assert!((p.density_at(125.0).unwrap() - 1024.5).abs() < 1e-12);
    }

    #[test]
    fn table_csv_requires_header_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let no_header = dir.path().join("a.csv");
        std::fs::write(&no_header, "0,1022\n100,1023\n").unwrap();
        assert!(load_table_csv(&no_header).is_err());
        let unsorted = dir.path().join("b.csv");
        std::fs::write(&unsorted, "depth_m,density_kg_m3\n10,1022\n5,1023\n").unwrap();
        assert!(load_table_csv(&unsorted).is_err());
    }

    #[test]
    fn water_velocity_defaults_to_zero() {
        let p = tanh_profile();
        assert_eq!(p.water_velocity(300.0), 0.0);
        let p = p.with_water_velocity(WaterVelocity {
            surface: 0.1,
            shear: -0.001,
        });
        assert!((p.water_velocity(100.0) - 0.0).abs() < 1e-15);
    }
}
