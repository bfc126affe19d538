//! Built-in sensor layouts and example profiles for the S2, S4 and S9
//! monitoring sections of a 3-layer, 50-part ring.
//!
//! Sensor ids are `<section>-<segment>-<layer>`. Columns whose segment name is
//! not known are labelled `C<part>`.

use crate::error::{Error, Result};
use crate::factorization::TrainConfig;
use crate::geometry::{CellIndex, SensorEntry, SensorLayout, TunnelGrid};
use crate::mechanics::{ring_gravity_and_floatage, GroundLayer, SectionProfile};

use super::config::{SearchSettings, SectionConfig};

pub const SECTIONS: [&str; 3] = ["S2", "S4", "S9"];

pub const EXTERNAL_DIAMETER: f64 = 14.5;
pub const LINING_THICKNESS: f64 = 0.6;
pub const RING_WIDTH: f64 = 2.0;
/// Assumed reinforced-concrete unit weight, kN/m³.
pub const CONCRETE_UNIT_WEIGHT: f64 = 25.0;

const S2_CELLS: [(usize, usize); 13] = [
    (1, 2),
    (1, 8),
    (1, 14),
    (1, 42),
    (1, 48),
    (2, 2),
    (2, 8),
    (2, 42),
    (2, 48),
    (3, 2),
    (3, 8),
    (3, 42),
    (3, 48),
];

const S4_CELLS: [(usize, usize); 22] = [
    (1, 2),
    (1, 8),
    (1, 23),
    (1, 28),
    (1, 37),
    (1, 33),
    (1, 42),
    (1, 46),
    (2, 2),
    (2, 8),
    (2, 23),
    (2, 37),
    (2, 33),
    (2, 42),
    (2, 46),
    (3, 2),
    (3, 8),
    (3, 23),
    (3, 37),
    (3, 33),
    (3, 42),
    (3, 46),
];

const S9_CELLS: [(usize, usize); 8] = [
    (1, 4),
    (1, 13),
    (2, 4),
    (2, 13),
    (3, 4),
    (3, 13),
    (3, 19),
    (3, 33),
];

fn segment(section: &str, part: usize) -> Option<&'static str> {
    match (section, part) {
        ("S2", 8) => Some("B2"),
        ("S2", 42) => Some("F"),
        ("S2", 48) => Some("L1"),
        ("S4", 8) => Some("B3"),
        ("S4", 37) => Some("F"),
        ("S4", 46) => Some("B1"),
        ("S9", 4) => Some("B7"),
        ("S9", 13) => Some("F"),
        ("S9", 19) => Some("L1"),
        ("S9", 33) => Some("B3"),
        _ => None,
    }
}

fn layer_name(layer: usize) -> String {
    match layer {
        1 => "inner".into(),
        2 => "middle".into(),
        3 => "outer".into(),
        m => format!("layer{m}"),
    }
}

pub fn sensor_id(section: &str, cell: CellIndex) -> String {
    let seg = segment(section, cell.part)
        .map(str::to_string)
        .unwrap_or_else(|| format!("C{:02}", cell.part));
    format!("{section}-{seg}-{}", layer_name(cell.layer))
}

pub fn builtin_grid() -> TunnelGrid {
    TunnelGrid::new(3, 50, EXTERNAL_DIAMETER).expect("valid built-in grid")
}

fn cells(section: &str) -> Result<&'static [(usize, usize)]> {
    match section {
        "S2" => Ok(&S2_CELLS),
        "S4" => Ok(&S4_CELLS),
        "S9" => Ok(&S9_CELLS),
        other => Err(Error::Config(format!(
            "unknown section `{other}` (expected one of S2, S4, S9)"
        ))),
    }
}

pub fn builtin_layout(section: &str) -> Result<SensorLayout> {
    let entries = cells(section)?
        .iter()
        .map(|&(m, n)| {
            let cell = CellIndex::new(m, n);
            SensorEntry {
                sensor_id: sensor_id(section, cell),
                cell,
            }
        })
        .collect();
    SensorLayout::new(section, entries, &builtin_grid())
}

/// Ground types with their lateral pressure coefficient and unit weight.
pub fn ground(name: &str, thickness: f64) -> Result<GroundLayer> {
    let (lambda, gamma) = match name {
        "Silt" => (0.43, 19.4),
        "Fine sand" => (0.40, 19.3),
        "Silt clay" => (0.65, 18.6),
        "Gravel" => (0.25, 20.6),
        "Gravel sand" => (0.30, 20.3),
        "Weather siltstone" => (0.14, 19.2),
        other => return Err(Error::Config(format!("unknown ground type `{other}`"))),
    };
    Ok(GroundLayer::new(name, thickness, gamma, lambda))
}

/// Illustrative strata for each section. Thicknesses and heads are examples,
/// not survey values.
pub fn builtin_profile(section: &str) -> Result<SectionProfile> {
    let (head, strata, host): (f64, &[(&str, f64)], (&str, f64)) = match section {
        "S2" => (
            4.0,
            &[("Silt", 3.0), ("Fine sand", 5.0)],
            ("Silt clay", 16.0),
        ),
        "S4" => (
            18.0,
            &[("Silt", 2.0), ("Silt clay", 4.0), ("Gravel sand", 4.0)],
            ("Gravel", 18.0),
        ),
        "S9" => (
            24.0,
            &[("Weather siltstone", 9.0)],
            ("Weather siltstone", 20.0),
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown section `{other}` (expected one of S2, S4, S9)"
            )))
        }
    };
    let water_unit_weight = crate::mechanics::DEFAULT_WATER_UNIT_WEIGHT;
    let (ring_gravity, ring_floatage) = ring_gravity_and_floatage(
        EXTERNAL_DIAMETER,
        LINING_THICKNESS,
        RING_WIDTH,
        CONCRETE_UNIT_WEIGHT,
        water_unit_weight,
    )?;
    Ok(SectionProfile {
        water_head: head,
        water_unit_weight,
        external_diameter: EXTERNAL_DIAMETER,
        ring_gravity,
        ring_floatage,
        overburden: strata
            .iter()
            .map(|&(name, h)| ground(name, h))
            .collect::<Result<_>>()?,
        host_layer: ground(host.0, host.1)?,
    })
}

pub fn builtin_config(section: &str) -> Result<SectionConfig> {
    let folds = if section == "S2" { 6 } else { 7 };
    Ok(SectionConfig {
        section_id: section.to_string(),
        grid: builtin_grid(),
        profile: builtin_profile(section)?,
        layout: builtin_layout(section)?,
        train: TrainConfig::default(),
        search: SearchSettings {
            folds,
            ..SearchSettings::default()
        },
        warning_threshold: None,
    })
}
