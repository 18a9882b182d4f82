//! Attractor geometries. All lengths in metres, densities in kg/m³.
//!
//! `distance` is always measured from the sphere centre to the nearest
//! source surface, so it must exceed the sphere radius.

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::sensor::Sphere;

/// Infinite slab below the sphere. `thickness` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSlab {
    #[serde(with = "crate::quantities::extended")]
    pub thickness: f64,
    pub density_contrast: f64,
    pub distance: f64,
}

/// Alternating fingers of materials A and B, each `finger_width` wide and
/// `finger_height` deep, infinitely long in y and repeating in x. The
/// array moves laterally as x₀ + a·sin(2πft); x = 0 puts the sphere over
/// the centre of an A finger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerArray {
    pub finger_width: f64,
    pub finger_height: f64,
    pub density_a: f64,
    pub density_b: f64,
    pub distance: f64,
    pub drive_amplitude: f64,
    pub drive_frequency: f64,
    #[serde(default)]
    pub lateral_offset: f64,
    /// Thickness of a shield membrane; when set, signals are attenuated
    /// by e^{−t/λ}.
    #[serde(default)]
    pub shield_thickness: Option<f64>,
}

/// Capillary along x filled with alternating droplets of fluids A and B,
/// each `droplet_length` long, flowing past the sphere so that one A–B
/// pair passes per modulation period. `distance` is to the inner wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidCapillary {
    pub inner_diameter: f64,
    pub droplet_length: f64,
    pub density_a: f64,
    pub density_b: f64,
    pub distance: f64,
    pub modulation_frequency: f64,
    #[serde(default)]
    pub shield_thickness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum AttractorGeometry {
    PlaneSlab(PlaneSlab),
    FingerArray(FingerArray),
    FluidCapillary(FluidCapillary),
}

fn clear_of(sphere: &Sphere, distance: f64) -> Result<()> {
    positive("distance", distance)?;
    if distance <= sphere.radius() {
        return Err(Error::GeometryOverlap(format!(
            "sphere of radius {:e} m reaches the attractor at distance {distance:e} m",
            sphere.radius()
        )));
    }
    Ok(())
}

fn shield(t: Option<f64>) -> Result<()> {
    if let Some(t) = t {
        non_negative("shield thickness", t)?;
    }
    Ok(())
}

impl PlaneSlab {
    pub fn validate(&self, sphere: &Sphere) -> Result<()> {
        if !(self.thickness > 0.0) {
            return Err(Error::domain(
                "slab thickness",
                format!("must be > 0, got {:e}", self.thickness),
            ));
        }
        finite("density contrast", self.density_contrast)?;
        clear_of(sphere, self.distance)
    }
}

impl FingerArray {
    pub fn validate(&self, sphere: &Sphere) -> Result<()> {
        positive("finger width", self.finger_width)?;
        positive("finger height", self.finger_height)?;
        non_negative("density A", self.density_a)?;
        non_negative("density B", self.density_b)?;
        non_negative("drive amplitude", self.drive_amplitude)?;
        positive("drive frequency", self.drive_frequency)?;
        finite("lateral offset", self.lateral_offset)?;
        shield(self.shield_thickness)?;
        clear_of(sphere, self.distance)
    }

    pub fn period(&self) -> f64 {
        2.0 * self.finger_width
    }

    /// Lateral array position at drive phase φ (radians).
    pub fn position(&self, phase: f64) -> f64 {
        self.lateral_offset + self.drive_amplitude * phase.sin()
    }
}

impl FluidCapillary {
    pub fn validate(&self, sphere: &Sphere) -> Result<()> {
        positive("inner diameter", self.inner_diameter)?;
        positive("droplet length", self.droplet_length)?;
        non_negative("density A", self.density_a)?;
        non_negative("density B", self.density_b)?;
        positive("modulation frequency", self.modulation_frequency)?;
        shield(self.shield_thickness)?;
        clear_of(sphere, self.distance)
    }

    pub fn inner_radius(&self) -> f64 {
        0.5 * self.inner_diameter
    }

    /// Sphere centre to capillary axis.
    pub fn axis_distance(&self) -> f64 {
        self.distance + self.inner_radius()
    }

    /// Position of the droplet train at phase φ; one A–B pair per cycle.
    pub fn position(&self, phase: f64) -> f64 {
        self.droplet_length * phase / std::f64::consts::PI
    }
}

impl AttractorGeometry {
    pub fn validate(&self, sphere: &Sphere) -> Result<()> {
        match self {
            AttractorGeometry::PlaneSlab(g) => g.validate(sphere),
            AttractorGeometry::FingerArray(g) => g.validate(sphere),
            AttractorGeometry::FluidCapillary(g) => g.validate(sphere),
        }
    }

    pub fn drive_frequency(&self) -> Option<f64> {
        match self {
            AttractorGeometry::PlaneSlab(_) => None,
            AttractorGeometry::FingerArray(g) => Some(g.drive_frequency),
            AttractorGeometry::FluidCapillary(g) => Some(g.modulation_frequency),
        }
    }
}
