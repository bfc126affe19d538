//! Configuration, ingestion, orchestration and output of section deductions.

pub mod config;
pub mod deduce;
pub mod readings;
pub mod render;
pub mod sections;
pub mod synth;

pub use config::{load_config, SearchSettings, SectionConfig};
pub use deduce::{
    deduce_current, deduce_history, load_field, DeductionResult, ExtremaReport, HistoryReport,
};
pub use readings::{ingest_readings, write_readings, DayReadings, Readings};
pub use render::{render_heatmap, render_svg};
pub use synth::{synthesize, SynthOptions, SyntheticSeries};
