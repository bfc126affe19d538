//! Full-face deduction for a single day and over a reading history.

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SectionConfig;
use super::readings::{DayReadings, Readings};
use crate::error::{Error, Result};
use crate::factorization::{factorize, reconstruct, LossBreakdown, TrainConfig};
use crate::geometry::{assemble_observation, CellIndex, ObservationMatrix};
use crate::mechanics::{resultants, LoadField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedCell {
    pub cell: CellIndex,
    pub sensor_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeductionResult {
    pub section_id: String,
    pub date: NaiveDate,
    /// Deduced values, one row per layer (inner first), kN.
    pub dense: Vec<Vec<f64>>,
    pub observed: Vec<ObservedCell>,
    pub loss: LossBreakdown,
    pub offset: f64,
    pub epochs_run: usize,
    pub max_cell: CellIndex,
    pub max_value: f64,
}

impl DeductionResult {
    pub fn layers(&self) -> usize {
        self.dense.len()
    }

    pub fn parts(&self) -> usize {
        self.dense.first().map_or(0, Vec::len)
    }

    pub fn value(&self, cell: CellIndex) -> f64 {
        let (i, j) = cell.offset();
        self.dense[i][j]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("bad result file: {e}")))?;
        let n = r.parts();
        if r.dense.is_empty() || n == 0 || r.dense.iter().any(|row| row.len() != n) {
            return Err(Error::Data("result matrix is empty or ragged".into()));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Dense matrix as CSV, one row per layer.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("layer");
        for n in 1..=self.parts() {
            out.push_str(&format!(",p{n}"));
        }
        out.push('\n');
        for (i, row) in self.dense.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Load field of the configured section on its grid.
pub fn load_field(cfg: &SectionConfig) -> Result<LoadField> {
    resultants(&cfg.profile, &cfg.grid)
}

fn deduce_with(
    cfg: &SectionConfig,
    load: &LoadField,
    train: &TrainConfig,
    date: NaiveDate,
    day: &DayReadings,
) -> Result<DeductionResult> {
    let x: ObservationMatrix = assemble_observation(&cfg.grid, &cfg.layout, day)?;
    let (factors, report) = factorize(&x, &load.q_weights, train)?;
    let dense = reconstruct(&factors, report.offset);

    let mut max_cell = CellIndex::new(1, 1);
    let mut max_value = f64::NEG_INFINITY;
    for ((i, j), &v) in dense.indexed_iter() {
        if v > max_value {
            max_value = v;
            max_cell = CellIndex::new(i + 1, j + 1);
        }
    }
    let observed = x
        .iter()
        .map(|(cell, value)| ObservedCell {
            cell,
            sensor_id: cfg.layout.sensor_at(cell).unwrap_or_default().to_string(),
            value,
        })
        .collect();

    Ok(DeductionResult {
        section_id: cfg.section_id.clone(),
        date,
        dense: dense.rows().into_iter().map(|r| r.to_vec()).collect(),
        observed,
        loss: report.loss,
        offset: report.offset,
        epochs_run: report.epochs_run,
        max_cell,
        max_value,
    })
}

/// Every sensor takes part in training, so early stopping is switched off and
/// the run lasts `max_epochs`.
fn all_cells(train: &TrainConfig) -> TrainConfig {
    TrainConfig {
        patience: 0,
        ..train.clone()
    }
}

/// Trains on every sensor present on `date` and fills in the rest of the section.
pub fn deduce_current(
    cfg: &SectionConfig,
    date: NaiveDate,
    day: &DayReadings,
) -> Result<DeductionResult> {
    let load = load_field(cfg)?;
    deduce_with(cfg, &load, &all_cells(&cfg.train), date, day)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub date: NaiveDate,
    /// One value per requested cell, in request order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayFailure {
    pub date: NaiveDate,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub date: NaiveDate,
    pub cell: CellIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub section_id: String,
    /// Over every cell of every successfully deduced day.
    pub max: Extremum,
    pub min: Extremum,
    pub warning_threshold: Option<f64>,
    /// `Some(true)` when the maximum exceeds the threshold.
    pub exceeds_warning: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryReport {
    pub cells: Vec<CellIndex>,
    pub rows: Vec<HistoryRow>,
    pub failures: Vec<DayFailure>,
    pub extrema: ExtremaReport,
}

impl HistoryReport {
    /// Series of the `k`-th requested cell.
    pub fn series(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[k]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for c in &self.cells {
            out.push_str(&format!(",{}:{}", c.layer, c.part));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.date.to_string());
            for v in &row.values {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Deduces every day independently and extracts the series of `cells`.
///
/// A day whose deduction fails is recorded in `failures` and skipped.
pub fn deduce_history(
    cfg: &SectionConfig,
    readings: &Readings,
    cells: &[CellIndex],
) -> Result<HistoryReport> {
    if readings.is_empty() {
        return Err(Error::Data(
            "history needs at least one day of readings".into(),
        ));
    }
    for &c in cells {
        cfg.grid.check_cell(c)?;
    }
    let load = load_field(cfg)?;
    let train = all_cells(&cfg.train);
    let days: Vec<(&NaiveDate, &DayReadings)> = readings.days.iter().collect();
    let outcomes: Vec<(NaiveDate, Result<DeductionResult>)> = days
        .par_iter()
        .map(|&(date, day)| (*date, deduce_with(cfg, &load, &train, *date, day)))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut max: Option<Extremum> = None;
    let mut min: Option<Extremum> = None;
    for (date, outcome) in outcomes {
        match outcome {
            Ok(result) => {
                rows.push(HistoryRow {
                    date,
                    values: cells.iter().map(|&c| result.value(c)).collect(),
                });
                for (i, row) in result.dense.iter().enumerate() {
                    for (j, &value) in row.iter().enumerate() {
                        let here = Extremum {
                            value,
                            date,
                            cell: CellIndex::new(i + 1, j + 1),
                        };
                        if max.as_ref().is_none_or(|m| value > m.value) {
                            max = Some(here.clone());
                        }
                        if min.as_ref().is_none_or(|m| value < m.value) {
                            min = Some(here);
                        }
                    }
                }
            }
            Err(e) => failures.push(DayFailure {
                date,
                error: e.to_string(),
            }),
        }
    }
    let (Some(max), Some(min)) = (max, min) else {
        return Err(Error::Training(format!(
            "every day failed; first error: {}",
            failures.first().map(|f| f.error.as_str()).unwrap_or("")
        )));
    };
    let exceeds_warning = cfg.warning_threshold.map(|t| max.value > t);
    Ok(HistoryReport {
        cells: cells.to_vec(),
        rows,
        failures,
        extrema: ExtremaReport {
            section_id: cfg.section_id.clone(),
            max,
            min,
            warning_threshold: cfg.warning_threshold,
            exceeds_warning,
        },
    })
}
