//! Analytical external-load model of an underwater ring section.
//!
//! Pressures are in kN/m², unit weights in kN/m³, lengths in meters. The load
//! model never touches the stress observations directly: it only produces the
//! dimensionless adjacency weights used by the factorization loss.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TunnelGrid;

/// Suggested unit weight of water. Not a measured value; configs should set it.
pub const DEFAULT_WATER_UNIT_WEIGHT: f64 = 9.81;

/// Below this magnitude a tangential resultant counts as zero when forming Q.
const ZERO_FORCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundLayer {
    pub name: String,
    /// Layer thickness, m.
    pub thickness: f64,
    /// Unit weight, kN/m³.
    pub unit_weight: f64,
    /// Lateral pressure coefficient.
    pub lateral_coefficient: f64,
}

impl GroundLayer {
    pub fn new(
        name: impl Into<String>,
        thickness: f64,
        unit_weight: f64,
        lateral_coefficient: f64,
    ) -> Self {
        Self {
            name: name.into(),
            thickness,
            unit_weight,
            lateral_coefficient,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::Domain(format!(
                "ground layer `{}`: {what} (got {v})",
                self.name
            )))
        };
        if !(self.thickness.is_finite() && self.thickness > 0.0) {
            return bad("thickness must be > 0", self.thickness);
        }
        if !(self.unit_weight.is_finite() && self.unit_weight > 0.0) {
            return bad("unit_weight must be > 0", self.unit_weight);
        }
        if !(0.0..=1.0).contains(&self.lateral_coefficient) {
            return bad(
                "lateral_coefficient must be in [0, 1]",
                self.lateral_coefficient,
            );
        }
        Ok(())
    }
}

/// Ground, water and lining loads acting on one monitoring section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionProfile {
    /// Water head above the crown, m.
    pub water_head: f64,
    pub water_unit_weight: f64,
    pub external_diameter: f64,
    /// Lining self-weight G, kN.
    pub ring_gravity: f64,
    /// Buoyancy F, kN.
    pub ring_floatage: f64,
    /// Strata above the tunnel, surface first.
    pub overburden: Vec<GroundLayer>,
    /// Stratum the tunnel sits in.
    pub host_layer: GroundLayer,
}

impl SectionProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.water_head.is_finite() && self.water_head >= 0.0) {
            return Err(Error::Domain(format!(
                "water_head must be >= 0 (got {})",
                self.water_head
            )));
        }
        if !(self.water_unit_weight.is_finite() && self.water_unit_weight > 0.0) {
            return Err(Error::Domain(format!(
                "water_unit_weight must be > 0 (got {})",
                self.water_unit_weight
            )));
        }
        if !(self.external_diameter.is_finite() && self.external_diameter > 0.0) {
            return Err(Error::Domain(format!(
                "external_diameter must be > 0 (got {})",
                self.external_diameter
            )));
        }
        for (name, v) in [
            ("ring_gravity", self.ring_gravity),
            ("ring_floatage", self.ring_floatage),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be >= 0 (got {v})")));
            }
        }
        if self.overburden.is_empty() {
            return Err(Error::Domain("overburden needs at least one layer".into()));
        }
        for layer in &self.overburden {
            layer.validate()?;
        }
        self.host_layer.validate()
    }
}

/// Lining gravity and floatage of one ring from its geometry.
///
/// `G = gamma_c * pi * (r^2 - (r - t)^2) * w` and `F = gamma_w * pi * r^2 * w`
/// with `r = d / 2`.
pub fn ring_gravity_and_floatage(
    external_diameter: f64,
    lining_thickness: f64,
    ring_width: f64,
    concrete_unit_weight: f64,
    water_unit_weight: f64,
) -> Result<(f64, f64)> {
    let r = external_diameter / 2.0;
    if !(r > 0.0 && lining_thickness > 0.0 && lining_thickness < r && ring_width > 0.0) {
        return Err(Error::Domain(format!(
            "invalid ring geometry d={external_diameter}, t={lining_thickness}, w={ring_width}"
        )));
    }
    if !(concrete_unit_weight > 0.0 && water_unit_weight > 0.0) {
        return Err(Error::Domain("unit weights must be > 0".into()));
    }
    let inner = r - lining_thickness;
    let gravity = concrete_unit_weight * PI * (r * r - inner * inner) * ring_width;
    let floatage = water_unit_weight * PI * r * r * ring_width;
    Ok((gravity, floatage))
}

pub fn water_pressure(profile: &SectionProfile) -> Result<f64> {
    if profile.water_head < 0.0 || profile.water_unit_weight < 0.0 {
        return Err(Error::Domain(format!(
            "negative water head or unit weight (h={}, gamma_w={})",
            profile.water_head, profile.water_unit_weight
        )));
    }
    Ok(profile.water_unit_weight * profile.water_head)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoilPressures {
    /// Effective overburden pressure `F_u`.
    pub overburden: f64,
    /// Bottom resistance `F_b`.
    pub bottom: f64,
    /// Lateral pressure `F_s` at the requested height.
    pub lateral: f64,
    /// Names of layers whose unit weight does not exceed water's.
    pub buoyant_layers: Vec<String>,
}

/// Overburden, bottom and lateral soil pressures at height `y` above the
/// section center.
pub fn soil_pressures(profile: &SectionProfile, y: f64) -> Result<SoilPressures> {
    let d = profile.external_diameter;
    let half = d / 2.0;
    if y.is_nan() || y.abs() > half * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "height {y} outside the section (|y| <= {half})"
        )));
    }
    let gw = profile.water_unit_weight;
    let buoyant_layers = profile
        .overburden
        .iter()
        .chain(std::iter::once(&profile.host_layer))
        .filter(|l| l.unit_weight <= gw)
        .map(|l| l.name.clone())
        .collect();

    let overburden: f64 = profile
        .overburden
        .iter()
        .map(|l| l.thickness * (l.unit_weight - gw))
        .sum();
    let bottom = overburden + (profile.ring_gravity - profile.ring_floatage) / d;
    let host = &profile.host_layer;
    let lateral = host.lateral_coefficient * (overburden + (half - y) * (host.unit_weight - gw));

    Ok(SoilPressures {
        overburden,
        bottom,
        lateral,
        buoyant_layers,
    })
}

/// Radial and tangential resultants at angle `psi` in `[0, pi]` from the crown.
///
/// The upper half (`psi <= pi/2`, springline included) uses overburden and
/// lining weight, the lower half uses bottom resistance and lining weight.
pub fn resultant_at(profile: &SectionProfile, psi: f64) -> Result<(f64, f64)> {
    if !(0.0..=PI).contains(&psi) {
        return Err(Error::Domain(format!("angle {psi} outside [0, pi]")));
    }
    let pw = water_pressure(profile)?;
    let y = profile.external_diameter / 2.0 * psi.cos();
    let soil = soil_pressures(profile, y)?;
    let g = profile.ring_gravity;
    let fs = soil.lateral;

    let (radial, tangential) = if psi <= FRAC_PI_2 {
        let theta = FRAC_PI_2 - psi;
        let (s, c) = theta.sin_cos();
        let vertical = g + soil.overburden;
        (pw + vertical * s + fs * c, fs * s - vertical * c)
    } else {
        let theta = psi - FRAC_PI_2;
        let (s, c) = theta.sin_cos();
        let fb = soil.bottom;
        (pw + (fb - g) * s + fs * c, fs * s - (g - fb) * c)
    };
    Ok((radial, tangential))
}

/// Per-part load resultants and the weights coupling adjacent parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadField {
    pub radial: Vec<f64>,
    pub tangential: Vec<f64>,
    /// `q_weights[i]` couples parts `i + 1` and `i + 2`.
    pub q_weights: Vec<f64>,
}

/// Evaluates the load model at every part center of `grid`.
pub fn resultants(profile: &SectionProfile, grid: &TunnelGrid) -> Result<LoadField> {
    profile.validate()?;
    let n = grid.parts();
    let mut radial = Vec::with_capacity(n);
    let mut tangential = Vec::with_capacity(n);
    for part in 1..=n {
        let (r, t) = resultant_at(profile, grid.crown_offset(part)?)?;
        radial.push(r);
        tangential.push(t);
    }
    let q_weights = adjacency_weights(&tangential);
    Ok(LoadField {
        radial,
        tangential,
        q_weights,
    })
}

/// Similarity of two tangential force magnitudes, `min / max`, or 1 when both vanish.
pub fn similarity(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    let hi = a.max(b);
    if hi < ZERO_FORCE {
        return 1.0;
    }
    1.0 - (hi - a.min(b)) / hi
}

pub fn adjacency_weights(tangential: &[f64]) -> Vec<f64> {
    tangential
        .windows(2)
        .map(|w| similarity(w[0], w[1]))
        .collect()
}
