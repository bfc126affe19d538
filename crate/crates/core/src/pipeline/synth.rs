//! Synthetic axisymmetric rank-2 stress fields and sampled sensor readings.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::NaiveDate;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::readings::{DayReadings, Readings};
use crate::error::{Error, Result};
use crate::geometry::{SensorLayout, TunnelGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub days: usize,
    /// Standard deviation of additive Gaussian sensor noise, kN.
    pub noise: f64,
    /// Probability that a sensor misses a given day.
    pub dropout: f64,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            days: 60,
            noise: 0.0,
            dropout: 0.0,
            seed: 0,
            start: NaiveDate::from_ymd_opt(2016, 7, 1).expect("valid date"),
        }
    }
}

/// Ground-truth daily fields. Every field is axisymmetric and has rank two.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub dates: Vec<NaiveDate>,
    pub fields: Vec<Array2<f64>>,
}

/// Daily fields `U(t) V` where the columns of `V` are smooth, mirror-symmetric
/// functions of the angle from the crown and `U(t)` follows a seasonal cycle.
pub fn axisymmetric_series(grid: &TunnelGrid, days: usize, seed: u64) -> SyntheticSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = (grid.layers(), grid.parts());
    let c = [rng.random_range(-0.4..0.4), rng.random_range(-0.3..0.3)];
    let d = [rng.random_range(-0.4..0.4), rng.random_range(-0.3..0.3)];
    let v = Array2::from_shape_fn((2, n), |(h, j)| {
        let psi = grid.crown_offset(j + 1).expect("in range");
        if h == 0 {
            1.0 + c[0] * psi.cos() + c[1] * (2.0 * psi).cos()
        } else {
            1.0 + d[0] * (2.0 * psi).cos() + d[1] * (3.0 * psi).cos()
        }
    });
    let base = Array2::from_shape_fn((m, 2), |_| rng.random_range(1.0..4.0));
    let amplitude = [rng.random_range(0.2..0.5), rng.random_range(0.2..0.5)];
    let phase = [
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(0.0..2.0 * PI),
    ];

    let start = NaiveDate::from_ymd_opt(2016, 7, 1).expect("valid date");
    let mut dates = Vec::with_capacity(days);
    let mut fields = Vec::with_capacity(days);
    for t in 0..days {
        let season =
            |h: usize| 1.0 + amplitude[h] * (2.0 * PI * t as f64 / 365.0 * 4.0 + phase[h]).sin();
        let u = Array2::from_shape_fn((m, 2), |(i, h)| base[[i, h]] * season(h));
        fields.push(u.dot(&v));
        dates.push(start + chrono::Days::new(t as u64));
    }
    SyntheticSeries { dates, fields }
}

/// Reads the sensors of `layout` off `field`, with noise and dropout.
pub fn sample_day(
    layout: &SensorLayout,
    field: &Array2<f64>,
    noise: f64,
    dropout: f64,
    rng: &mut impl Rng,
) -> DayReadings {
    let normal = Normal::new(0.0, noise.max(0.0)).expect("non-negative sigma");
    let mut day = BTreeMap::new();
    for e in &layout.entries {
        if dropout > 0.0 && rng.random::<f64>() < dropout {
            continue;
        }
        let (i, j) = e.cell.offset();
        let eps = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
        day.insert(e.sensor_id.clone(), field[[i, j]] + eps);
    }
    day
}

/// Synthetic truth plus the readings the layout's sensors would record.
pub fn synthesize(
    grid: &TunnelGrid,
    layout: &SensorLayout,
    opts: &SynthOptions,
) -> Result<(SyntheticSeries, Readings)> {
    if opts.days == 0 {
        return Err(Error::Config("synth needs at least one day".into()));
    }
    if opts.noise.is_nan() || opts.noise < 0.0 || !(0.0..1.0).contains(&opts.dropout) {
        return Err(Error::Config(
            "noise must be >= 0 and dropout in [0, 1)".into(),
        ));
    }
    layout.validate(grid)?;
    let mut series = axisymmetric_series(grid, opts.days, opts.seed);
    series.dates = (0..opts.days)
        .map(|t| opts.start + chrono::Days::new(t as u64))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut readings = Readings::default();
    for (date, field) in series.dates.iter().zip(&series.fields) {
        let mut day = sample_day(layout, field, opts.noise, opts.dropout, &mut rng);
        if day.is_empty() {
            // keep every day non-empty
            let e = &layout.entries[0];
            let (i, j) = e.cell.offset();
            day.insert(e.sensor_id.clone(), field[[i, j]]);
        }
        readings.days.insert(*date, day);
    }
    Ok((series, readings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::sections::{builtin_grid, builtin_layout};

    #[test]
    fn fields_are_axisymmetric_and_positive() {
        let grid = builtin_grid();
        let s = axisymmetric_series(&grid, 5, 3);
        for f in &s.fields {
            for i in 0..3 {
                for j in 0..50 {
                    assert_eq!(f[[i, j]], f[[i, 49 - j]]);
                    assert!(f[[i, j]] > 0.0);
                }
            }
        }
    }

    #[test]
    fn synthesize_is_deterministic() {
        let grid = builtin_grid();
        let layout = builtin_layout("S9").unwrap();
        let opts = SynthOptions {
            days: 10,
            noise: 0.05,
            dropout: 0.2,
            seed: 4,
            ..SynthOptions::default()
        };
        let a = synthesize(&grid, &layout, &opts).unwrap();
        let b = synthesize(&grid, &layout, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 10);
        assert!(a.1.days.values().all(|d| !d.is_empty() && d.len() <= 8));
    }
}
