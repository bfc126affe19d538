//! Long-form daily readings: `date,sensor_id,value` with ISO-8601 dates.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub type DayReadings = BTreeMap<String, f64>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Readings {
    pub days: BTreeMap<NaiveDate, DayReadings>,
    /// Non-fatal issues found while reading, e.g. duplicate rows.
    pub warnings: Vec<String>,
}

impl Readings {
    pub fn day(&self, date: NaiveDate) -> Result<&DayReadings> {
        self.days
            .get(&date)
            .ok_or_else(|| Error::Data(format!("no readings for {date}")))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

const HEADER: [&str; 3] = ["date", "sensor_id", "value"];

pub fn parse_readings(input: impl Read, source: &Path) -> Result<Readings> {
    let parse_err = |message: String| Error::Parse {
        path: source.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(Error::Data(format!(
            "{}: empty readings file",
            source.display()
        )));
    }
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(format!(
            "expected header `date,sensor_id,value`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut out = Readings::default();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
            .map_err(|e| parse_err(format!("row {row}: bad date `{}`: {e}", field(0))))?;
        let sensor = field(1);
        if sensor.is_empty() {
            return Err(parse_err(format!("row {row}: empty sensor_id")));
        }
        let value: f64 = field(2)
            .parse()
            .map_err(|_| parse_err(format!("row {row}: bad value `{}`", field(2))))?;
        if !value.is_finite() {
            return Err(parse_err(format!(
                "row {row}: non-finite value `{}`",
                field(2)
            )));
        }
        let day = out.days.entry(date).or_default();
        if day.insert(sensor.to_string(), value).is_some() {
            out.warnings.push(format!(
                "row {row}: duplicate reading for {sensor} on {date}; keeping the later row"
            ));
        }
    }
    if out.days.is_empty() {
        return Err(Error::Data(format!("{}: no readings", source.display())));
    }
    Ok(out)
}

pub fn ingest_readings(path: impl AsRef<Path>) -> Result<Readings> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_readings(file, path)
}

pub fn write_readings(
    out: impl Write,
    days: &BTreeMap<NaiveDate, DayReadings>,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (date, day) in days {
        for (sensor, value) in day {
            w.write_record([date.to_string(), sensor.clone(), value.to_string()])?;
        }
    }
    w.flush()
}
