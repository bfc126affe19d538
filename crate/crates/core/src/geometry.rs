//! Discretization of a ring section into an `M x N` grid.
//!
//! Layers are numbered from the inside out (layer 1 is the intrados). Parts
//! are numbered clockwise starting just right of the crown, and each part's
//! center sits half a part away from its edge so that part `n` and part
//! `N + 1 - n` are exact mirror images about the vertical axis.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelGrid {
    layers: usize,
    parts: usize,
    external_diameter: f64,
}

impl TunnelGrid {
    pub fn new(layers: usize, parts: usize, external_diameter: f64) -> Result<Self> {
        if layers < 1 {
            return Err(Error::Config(format!("layers must be >= 1, got {layers}")));
        }
        if parts < 2 || !parts.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "parts must be even and >= 2, got {parts}"
            )));
        }
        if !(external_diameter.is_finite() && external_diameter > 0.0) {
            return Err(Error::Config(format!(
                "external_diameter must be positive, got {external_diameter}"
            )));
        }
        Ok(Self {
            layers,
            parts,
            external_diameter,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn external_diameter(&self) -> f64 {
        self.external_diameter
    }

    pub fn cell_count(&self) -> usize {
        self.layers * self.parts
    }

    fn check_part(&self, n: usize) -> Result<()> {
        if n < 1 || n > self.parts {
            return Err(Error::Index(format!("part {n} outside 1..={}", self.parts)));
        }
        Ok(())
    }

    pub fn check_cell(&self, cell: CellIndex) -> Result<()> {
        if cell.layer < 1 || cell.layer > self.layers {
            return Err(Error::Index(format!(
                "layer {} outside 1..={} at {cell}",
                cell.layer, self.layers
            )));
        }
        self.check_part(cell.part)
    }

    /// Clockwise angle from the crown to the center of part `n`, in `[0, 2pi)`.
    pub fn cell_angle(&self, n: usize) -> Result<f64> {
        self.check_part(n)?;
        Ok(2.0 * PI * (n as f64 - 0.5) / self.parts as f64)
    }

    /// Angle between the crown and the center of part `n`, folded into `[0, pi]`.
    ///
    /// Computed from the part nearer the crown so that mirrored parts get
    /// bit-identical values.
    pub fn crown_offset(&self, n: usize) -> Result<f64> {
        self.check_part(n)?;
        let k = n.min(self.parts + 1 - n);
        Ok(2.0 * PI * (k as f64 - 0.5) / self.parts as f64)
    }

    pub fn mirror(&self, n: usize) -> Result<usize> {
        self.check_part(n)?;
        Ok(self.parts + 1 - n)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (1..=self.layers).flat_map(move |m| (1..=self.parts).map(move |n| CellIndex::new(m, n)))
    }
}

/// One-based `(layer, part)` address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub layer: usize,
    pub part: usize,
}

impl CellIndex {
    pub const fn new(layer: usize, part: usize) -> Self {
        Self { layer, part }
    }

    /// Zero-based `(row, column)` for array access.
    pub fn offset(self) -> (usize, usize) {
        (self.layer - 1, self.part - 1)
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.part)
    }
}

impl std::str::FromStr for CellIndex {
    type Err = Error;

    /// Parses `layer:part`, e.g. `3:19`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected `layer:part`, got `{s}`"));
        let (m, n) = s.split_once(':').ok_or_else(bad)?;
        let layer = m.trim().parse().map_err(|_| bad())?;
        let part = n.trim().parse().map_err(|_| bad())?;
        Ok(CellIndex::new(layer, part))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub sensor_id: String,
    pub cell: CellIndex,
}

/// Placement of the sensors of one monitoring section on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub section_id: String,
    pub entries: Vec<SensorEntry>,
}

impl SensorLayout {
    pub fn new(
        section_id: impl Into<String>,
        entries: Vec<SensorEntry>,
        grid: &TunnelGrid,
    ) -> Result<Self> {
        let layout = Self {
            section_id: section_id.into(),
            entries,
        };
        layout.validate(grid)?;
        Ok(layout)
    }

    pub fn validate(&self, grid: &TunnelGrid) -> Result<()> {
        let mut cells = HashSet::new();
        let mut ids = HashSet::new();
        for e in &self.entries {
            grid.check_cell(e.cell)
                .map_err(|err| Error::Config(format!("sensor `{}`: {err}", e.sensor_id)))?;
            if !cells.insert(e.cell) {
                return Err(Error::Config(format!(
                    "sensor `{}` shares cell {} with another sensor",
                    e.sensor_id, e.cell
                )));
            }
            if !ids.insert(e.sensor_id.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate sensor id `{}`",
                    e.sensor_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cell_of(&self, sensor_id: &str) -> Option<CellIndex> {
        self.entries
            .iter()
            .find(|e| e.sensor_id == sensor_id)
            .map(|e| e.cell)
    }

    pub fn sensor_at(&self, cell: CellIndex) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.cell == cell)
            .map(|e| e.sensor_id.as_str())
    }
}

/// Sparse `M x N` matrix of observed values. Cells without a value are empty,
/// not zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMatrix {
    grid: TunnelGrid,
    values: BTreeMap<CellIndex, f64>,
}

impl ObservationMatrix {
    pub fn new(grid: TunnelGrid) -> Self {
        Self {
            grid,
            values: BTreeMap::new(),
        }
    }

    pub fn from_cells(
        grid: TunnelGrid,
        cells: impl IntoIterator<Item = (CellIndex, f64)>,
    ) -> Result<Self> {
        let mut x = Self::new(grid);
        for (cell, value) in cells {
            x.insert(cell, value)?;
        }
        Ok(x)
    }

    pub fn insert(&mut self, cell: CellIndex, value: f64) -> Result<()> {
        self.grid.check_cell(cell)?;
        if !value.is_finite() {
            return Err(Error::Data(format!("non-finite value {value} at {cell}")));
        }
        self.values.insert(cell, value);
        Ok(())
    }

    pub fn grid(&self) -> &TunnelGrid {
        &self.grid
    }

    pub fn get(&self, cell: CellIndex) -> Option<f64> {
        self.values.get(&cell).copied()
    }

    pub fn is_observed(&self, cell: CellIndex) -> bool {
        self.values.contains_key(&cell)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observed cells and values in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, f64)> + '_ {
        self.values.iter().map(|(&c, &v)| (c, v))
    }

    pub fn observed(&self) -> BTreeSet<CellIndex> {
        self.values.keys().copied().collect()
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.values().copied().reduce(f64::min)
    }

    /// Copy with the given cells removed.
    pub fn without<'a>(&self, cells: impl IntoIterator<Item = &'a CellIndex>) -> Self {
        let mut out = self.clone();
        for c in cells {
            out.values.remove(c);
        }
        out
    }

    /// Copy keeping only the given cells.
    pub fn restricted_to<'a>(&self, cells: impl IntoIterator<Item = &'a CellIndex>) -> Self {
        let values = cells
            .into_iter()
            .filter_map(|c| self.values.get(c).map(|&v| (*c, v)))
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Copy with `offset` added to every observed value.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|(&c, &v)| (c, v + offset)).collect(),
        }
    }
}

/// Places one day's readings on the grid.
///
/// Sensors of the layout that have no reading leave their cell empty.
pub fn assemble_observation(
    grid: &TunnelGrid,
    layout: &SensorLayout,
    readings: &BTreeMap<String, f64>,
) -> Result<ObservationMatrix> {
    let mut x = ObservationMatrix::new(*grid);
    for (id, &value) in readings {
        let cell = layout
            .cell_of(id)
            .ok_or_else(|| Error::UnknownSensor(id.clone()))?;
        if !value.is_finite() {
            return Err(Error::Data(format!(
                "sensor `{id}` has non-finite value {value}"
            )));
        }
        x.insert(cell, value)?;
    }
    if x.is_empty() {
        return Err(Error::Data(format!(
            "no readings for section `{}`",
            layout.section_id
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid50() -> TunnelGrid {
        TunnelGrid::new(3, 50, 14.5).unwrap()
    }

    #[test]
    fn cell_angle_examples() {
        let g = grid50();
        assert!((g.cell_angle(1).unwrap() - PI / 50.0).abs() < 1e-15);
        assert!((g.cell_angle(1).unwrap() - 0.06283).abs() < 1e-5);
        let s = g.cell_angle(25).unwrap() + g.cell_angle(26).unwrap();
        assert!((s - 2.0 * PI).abs() < 1e-12);
        let two = TunnelGrid::new(1, 2, 1.0).unwrap();
        assert!((two.cell_angle(1).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cell_angle_out_of_range() {
        let g = grid50();
        assert!(matches!(g.cell_angle(0), Err(Error::Index(_))));
        assert!(matches!(g.cell_angle(51), Err(Error::Index(_))));
        assert!(matches!(g.mirror(51), Err(Error::Index(_))));
    }

    #[test]
    fn mirror_examples() {
        let g = grid50();
        assert_eq!(g.mirror(1).unwrap(), 50);
        assert_eq!(g.mirror(25).unwrap(), 26);
        for n in 1..=50 {
            let m = g.mirror(n).unwrap();
            assert_ne!(m, n);
            assert_eq!(g.mirror(m).unwrap(), n);
        }
    }

    #[test]
    fn grid_rejects_odd_parts() {
        assert!(TunnelGrid::new(3, 49, 14.5).is_err());
        assert!(TunnelGrid::new(0, 50, 14.5).is_err());
        assert!(TunnelGrid::new(3, 50, 0.0).is_err());
    }

    #[test]
    fn crown_offset_is_mirror_exact() {
        let g = grid50();
        for n in 1..=50 {
            let a = g.crown_offset(n).unwrap();
            let b = g.crown_offset(g.mirror(n).unwrap()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            let phi = g.cell_angle(n).unwrap();
            assert!((a - phi.min(2.0 * PI - phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_rejects_shared_cell_and_out_of_bounds() {
        let g = grid50();
        let e = |id: &str, m, n| SensorEntry {
            sensor_id: id.into(),
            cell: CellIndex::new(m, n),
        };
        assert!(SensorLayout::new("S", vec![e("a", 1, 1), e("b", 1, 1)], &g).is_err());
        assert!(SensorLayout::new("S", vec![e("a", 4, 10)], &g).is_err());
        assert!(SensorLayout::new("S", vec![e("a", 1, 1), e("a", 1, 2)], &g).is_err());
    }

    #[test]
    fn assemble_errors() {
        let g = grid50();
        let layout = SensorLayout::new(
            "S",
            vec![SensorEntry {
                sensor_id: "a".into(),
                cell: CellIndex::new(1, 1),
            }],
            &g,
        )
        .unwrap();
        let empty = BTreeMap::new();
        assert!(matches!(
            assemble_observation(&g, &layout, &empty),
            Err(Error::Data(_))
        ));
        let unknown = BTreeMap::from([("zz".to_string(), 1.0)]);
        match assemble_observation(&g, &layout, &unknown) {
            Err(Error::UnknownSensor(id)) => assert_eq!(id, "zz"),
            other => panic!("unexpected {other:?}"),
        }
        let nan = BTreeMap::from([("a".to_string(), f64::NAN)]);
        assert!(matches!(
            assemble_observation(&g, &layout, &nan),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn parse_cell_index() {
        assert_eq!("3:19".parse::<CellIndex>().unwrap(), CellIndex::new(3, 19));
        assert!("3-19".parse::<CellIndex>().is_err());
    }

    proptest! {
        #[test]
        fn cell_angle_strictly_increasing_uniform(half in 1usize..60) {
            let g = TunnelGrid::new(1, 2 * half, 1.0).unwrap();
            let step = 2.0 * PI / g.parts() as f64;
            let mut prev = -1.0;
            for n in 1..=g.parts() {
                let a = g.cell_angle(n).unwrap();
                prop_assert!((0.0..2.0 * PI).contains(&a));
                prop_assert!(a > prev);
                if n > 1 {
                    prop_assert!((a - prev - step).abs() < 1e-12);
                }
                prev = a;
            }
        }

        #[test]
        fn assemble_never_fills_unsensed_cells(
            picks in proptest::collection::btree_set((1usize..=3, 1usize..=50), 1..20),
            keep in proptest::collection::vec(any::<bool>(), 20),
        ) {
            let g = grid50();
            let entries: Vec<_> = picks
                .iter()
                .enumerate()
                .map(|(i, &(m, n))| SensorEntry { sensor_id: format!("s{i}"), cell: CellIndex::new(m, n) })
                .collect();
            let layout = SensorLayout::new("S", entries.clone(), &g).unwrap();
            let readings: BTreeMap<String, f64> = entries
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(e, _)| (e.sensor_id.clone(), e.cell.part as f64))
                .collect();
            match assemble_observation(&g, &layout, &readings) {
                Ok(x) => {
                    let expected: BTreeSet<CellIndex> = entries
                        .iter()
                        .filter(|e| readings.contains_key(&e.sensor_id))
                        .map(|e| e.cell)
                        .collect();
                    prop_assert_eq!(x.observed(), expected);
                    for cell in g.cells() {
                        if layout.sensor_at(cell).is_none() {
                            prop_assert!(!x.is_observed(cell));
                        }
                    }
                }
                Err(_) => prop_assert!(readings.is_empty()),
            }
        }
    }
}
