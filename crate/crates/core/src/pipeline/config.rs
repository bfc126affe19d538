//! Section configuration file (TOML).
//!
//! Units: lengths in m, unit weights in kN/m³, ring loads in kN, stresses and
//! the warning threshold in kN.
//!
//! ```toml
//! section_id = "S9"
//! warning_threshold = 60.0      # optional
//!
//! [grid]
//! layers = 3
//! parts = 50
//!
//! [profile]
//! water_head = 20.0
//! water_unit_weight = 9.81
//! external_diameter = 14.5
//! ring_gravity = 1290.0         # or give [profile.ring] instead
//! ring_floatage = 3240.0
//!
//! [[profile.overburden]]
//! name = "Silt"
//! thickness = 6.0
//! unit_weight = 19.4
//! lateral_coefficient = 0.43
//!
//! [profile.host_layer]
//! name = "Silt clay"
//! thickness = 15.0
//! unit_weight = 18.6
//! lateral_coefficient = 0.65
//!
//! [[sensors]]
//! id = "S9-B7-inner"
//! layer = 1
//! part = 4
//!
//! [train]
//! lambda1 = 0.1
//!
//! [search]
//! folds = 7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::factorization::TrainConfig;
use crate::geometry::{CellIndex, SensorEntry, SensorLayout, TunnelGrid};
use crate::mechanics::{ring_gravity_and_floatage, GroundLayer, SectionProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub layers: usize,
    pub parts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingGeometry {
    pub lining_thickness: f64,
    pub ring_width: f64,
    pub concrete_unit_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub water_head: f64,
    pub water_unit_weight: f64,
    pub external_diameter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_gravity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_floatage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingGeometry>,
    pub overburden: Vec<GroundLayer>,
    pub host_layer: GroundLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub id: String,
    pub layer: usize,
    pub part: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub folds: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            lambda1: crate::evaluation::default_lambda_grid(),
            lambda2: crate::evaluation::default_lambda_grid(),
            folds: 7,
        }
    }
}

/// On-disk shape of a section config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub section_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning_threshold: Option<f64>,
    pub grid: GridSection,
    pub profile: ProfileSection,
    pub sensors: Vec<Spanned<SensorSection>>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub search: SearchSettings,
}

/// Fully validated configuration of one monitoring section.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionConfig {
    pub section_id: String,
    pub grid: TunnelGrid,
    pub profile: SectionProfile,
    pub layout: SensorLayout,
    pub train: TrainConfig,
    pub search: SearchSettings,
    pub warning_threshold: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl SectionConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file_repr(raw, Some(text))
    }

    fn from_file_repr(raw: ConfigFile, text: Option<&str>) -> Result<Self> {
        let at = |span: std::ops::Range<usize>| match text {
            Some(t) => format!("line {}: ", line_of(t, span.start)),
            None => String::new(),
        };
        let p = raw.profile;
        let grid = TunnelGrid::new(raw.grid.layers, raw.grid.parts, p.external_diameter)
            .map_err(|e| Error::Config(format!("[grid] {e}")))?;

        let (ring_gravity, ring_floatage) = match (p.ring_gravity, p.ring_floatage, &p.ring) {
            (Some(g), Some(f), None) => (g, f),
            (None, None, Some(r)) => ring_gravity_and_floatage(
                p.external_diameter,
                r.lining_thickness,
                r.ring_width,
                r.concrete_unit_weight,
                p.water_unit_weight,
            )
            .map_err(|e| Error::Config(format!("[profile.ring] {e}")))?,
            _ => return Err(Error::Config(
                "[profile] give either ring_gravity and ring_floatage, or a [profile.ring] table"
                    .into(),
            )),
        };
        let profile = SectionProfile {
            water_head: p.water_head,
            water_unit_weight: p.water_unit_weight,
            external_diameter: p.external_diameter,
            ring_gravity,
            ring_floatage,
            overburden: p.overburden,
            host_layer: p.host_layer,
        };
        profile
            .validate()
            .map_err(|e| Error::Config(format!("[profile] {e}")))?;

        let mut entries = Vec::with_capacity(raw.sensors.len());
        for s in &raw.sensors {
            let span = s.span();
            let s = s.get_ref();
            let cell = CellIndex::new(s.layer, s.part);
            grid.check_cell(cell).map_err(|e| {
                Error::Config(format!("{}sensor `{}`: {e}", at(span.clone()), s.id))
            })?;
            if let Some(prev) = entries
                .iter()
                .find(|e: &&SensorEntry| e.cell == cell || e.sensor_id == s.id)
            {
                return Err(Error::Config(format!(
                    "{}sensor `{}` collides with `{}` (same id or cell {cell})",
                    at(span),
                    s.id,
                    prev.sensor_id
                )));
            }
            entries.push(SensorEntry {
                sensor_id: s.id.clone(),
                cell,
            });
        }
        if entries.is_empty() {
            return Err(Error::Config(
                "at least one [[sensors]] entry is required".into(),
            ));
        }
        let layout = SensorLayout::new(raw.section_id.clone(), entries, &grid)?;

        raw.train.validate()?;
        if raw.train.rank > grid.layers().min(grid.parts()) {
            return Err(Error::Config(format!(
                "train.rank {} exceeds min(layers, parts) = {}",
                raw.train.rank,
                grid.layers().min(grid.parts())
            )));
        }
        if raw.search.lambda1.is_empty() || raw.search.lambda2.is_empty() {
            return Err(Error::Config(
                "[search] lambda grids must be non-empty".into(),
            ));
        }
        if raw
            .search
            .lambda1
            .iter()
            .chain(&raw.search.lambda2)
            .any(|l| l.is_nan() || *l < 0.0)
        {
            return Err(Error::Config("[search] lambda values must be >= 0".into()));
        }
        if raw.search.folds < 2 {
            return Err(Error::Config("[search] folds must be >= 2".into()));
        }
        if let Some(t) = raw.warning_threshold {
            if !t.is_finite() {
                return Err(Error::Config("warning_threshold must be finite".into()));
            }
        }

        Ok(Self {
            section_id: raw.section_id,
            grid,
            profile,
            layout,
            train: raw.train,
            search: raw.search,
            warning_threshold: raw.warning_threshold,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let sensors = self
            .layout
            .entries
            .iter()
            .map(|e| {
                Spanned::new(
                    0..0,
                    SensorSection {
                        id: e.sensor_id.clone(),
                        layer: e.cell.layer,
                        part: e.cell.part,
                    },
                )
            })
            .collect();
        let raw = ConfigFile {
            section_id: self.section_id.clone(),
            warning_threshold: self.warning_threshold,
            grid: GridSection {
                layers: self.grid.layers(),
                parts: self.grid.parts(),
            },
            profile: ProfileSection {
                water_head: self.profile.water_head,
                water_unit_weight: self.profile.water_unit_weight,
                external_diameter: self.profile.external_diameter,
                ring_gravity: Some(self.profile.ring_gravity),
                ring_floatage: Some(self.profile.ring_floatage),
                ring: None,
                overburden: self.profile.overburden.clone(),
                host_layer: self.profile.host_layer.clone(),
            },
            sensors,
            train: self.train.clone(),
            search: self.search.clone(),
        };
        toml::to_string(&raw).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SectionConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SectionConfig::from_toml_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
