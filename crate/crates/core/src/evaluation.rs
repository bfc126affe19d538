//! Error metrics, K-fold hyper-parameter search and leave-one-sensor-out
//! cross tests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{factorize, reconstruct, TrainConfig};
use crate::geometry::{CellIndex, ObservationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when either series has zero variance or fewer than two samples.
    pub pcc: Option<f64>,
    pub n: usize,
}

pub fn metrics(truth: &[f64], pred: &[f64]) -> Result<MetricReport> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "truth has {} values, prediction {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Data("metrics need at least one sample".into()));
    }
    if truth.iter().chain(pred).any(|v| !v.is_finite()) {
        return Err(Error::Data("metrics inputs must be finite".into()));
    }
    let n = truth.len() as f64;
    let (sse, sae) = truth.iter().zip(pred).fold((0.0, 0.0), |(s, a), (y, p)| {
        (s + (y - p).powi(2), a + (y - p).abs())
    });
    Ok(MetricReport {
        rmse: (sse / n).sqrt(),
        mae: sae / n,
        pcc: pearson(truth, pred),
        n: truth.len(),
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Splits `cells` into `k` disjoint folds whose sizes differ by at most one.
pub fn kfold_split(cells: &[CellIndex], k: usize, seed: u64) -> Result<Vec<Vec<CellIndex>>> {
    if k < 2 {
        return Err(Error::Config(format!("K must be >= 2, got {k}")));
    }
    if k > cells.len() {
        return Err(Error::Config(format!(
            "K = {k} exceeds the {} observed cells",
            cells.len()
        )));
    }
    let mut order = cells.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, c) in order.into_iter().enumerate() {
        folds[i % k].push(c);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Mean validation RMSE over the folds; `None` when training failed.
    pub mean_val_rmse: Option<f64>,
    pub fold_rmse: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_lambda1: f64,
    pub best_lambda2: f64,
    pub best_val_rmse: f64,
    pub folds: usize,
    pub cv_table: Vec<CvRow>,
}

/// `{0.1, 0.2, ..., 1.0}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

fn evaluate_candidate(
    x: &ObservationMatrix,
    q: &[f64],
    folds: &[Vec<CellIndex>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    folds
        .iter()
        .map(|fold| {
            let train = x.without(fold);
            let (f, report) = factorize(&train, q, cfg)?;
            let r = reconstruct(&f, report.offset);
            let sse: f64 = fold
                .iter()
                .map(|&c| {
                    let (i, j) = c.offset();
                    let truth = x.get(c).expect("fold cells are observed");
                    (truth - r[[i, j]]).powi(2)
                })
                .sum();
            Ok((sse / fold.len() as f64).sqrt())
        })
        .collect()
}

/// Picks `(lambda1, lambda2)` by mean K-fold validation RMSE.
///
/// Ties go to the smaller `lambda1`, then the smaller `lambda2`. Candidates
/// whose training fails are kept in the table but never selected.
pub fn grid_search(
    x: &ObservationMatrix,
    q: &[f64],
    grid1: &[f64],
    grid2: &[f64],
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SearchResult> {
    if grid1.is_empty() || grid2.is_empty() {
        return Err(Error::Config("lambda grids must be non-empty".into()));
    }
    cfg.validate()?;
    let cells: Vec<CellIndex> = x.observed().into_iter().collect();
    let folds = kfold_split(&cells, k, seed)?;

    let candidates: Vec<(f64, f64)> = grid1
        .iter()
        .flat_map(|&a| grid2.iter().map(move |&b| (a, b)))
        .collect();
    let cv_table: Vec<CvRow> = candidates
        .par_iter()
        .map(|&(lambda1, lambda2)| {
            match evaluate_candidate(x, q, &folds, &cfg.with_lambdas(lambda1, lambda2)) {
                Ok(fold_rmse) => CvRow {
                    lambda1,
                    lambda2,
                    mean_val_rmse: Some(fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64),
                    fold_rmse,
                    error: None,
                },
                Err(e) => CvRow {
                    lambda1,
                    lambda2,
                    mean_val_rmse: None,
                    fold_rmse: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let best = cv_table
        .iter()
        .filter_map(|row| row.mean_val_rmse.map(|s| (s, row)))
        .min_by(|(sa, a), (sb, b)| {
            sa.total_cmp(sb)
                .then(a.lambda1.total_cmp(&b.lambda1))
                .then(a.lambda2.total_cmp(&b.lambda2))
        })
        .ok_or_else(|| {
            Error::Training(format!(
                "every candidate failed; first error: {}",
                cv_table
                    .first()
                    .and_then(|r| r.error.clone())
                    .unwrap_or_default()
            ))
        })?;
    let (best_val_rmse, row) = best;
    Ok(SearchResult {
        best_lambda1: row.lambda1,
        best_lambda2: row.lambda2,
        best_val_rmse,
        folds: k,
        cv_table,
    })
}

/// Seed used for the snapshot at position `index` of a series.
pub fn snapshot_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPrediction {
    pub index: usize,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTestResult {
    pub cell: CellIndex,
    pub with_constraints: bool,
    pub report: MetricReport,
    pub predictions: Vec<SnapshotPrediction>,
}

/// Hides `test_cell` from each snapshot, trains on the rest and scores the
/// predictions for the hidden cell across the whole series.
///
/// Without constraints both penalty weights are forced to zero, which is
/// plain projected-SGD NMF.
pub fn cross_test(
    snapshots: &[ObservationMatrix],
    q: &[f64],
    test_cell: CellIndex,
    cfg: &TrainConfig,
    with_constraints: bool,
) -> Result<CrossTestResult> {
    if snapshots.is_empty() {
        return Err(Error::Data("cross test needs at least one snapshot".into()));
    }
    for (i, x) in snapshots.iter().enumerate() {
        if !x.is_observed(test_cell) {
            return Err(Error::Config(format!(
                "test cell {test_cell} is not observed in snapshot {i}"
            )));
        }
    }
    let base = if with_constraints {
        cfg.clone()
    } else {
        cfg.with_lambdas(0.0, 0.0)
    };
    let predictions = snapshots
        .par_iter()
        .enumerate()
        .map(|(index, x)| {
            let train = x.without([&test_cell]);
            let day_cfg = TrainConfig {
                seed: snapshot_seed(base.seed, index),
                ..base.clone()
            };
            let (f, report) = factorize(&train, q, &day_cfg)?;
            let (i, j) = test_cell.offset();
            Ok(SnapshotPrediction {
                index,
                truth: x.get(test_cell).expect("checked above"),
                prediction: reconstruct(&f, report.offset)[[i, j]],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<f64> = predictions.iter().map(|p| p.truth).collect();
    let pred: Vec<f64> = predictions.iter().map(|p| p.prediction).collect();
    Ok(CrossTestResult {
        cell: test_cell,
        with_constraints,
        report: metrics(&truth, &pred)?,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identical_series() {
        let m = metrics(&[1.0, 5.0, 9.0], &[1.0, 5.0, 9.0]).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.mae, 0.0);
        assert_relative_eq!(m.pcc.unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn anti_linear_series() {
        let m = metrics(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_relative_eq!(m.pcc.unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn hand_evaluated_errors() {
        let m = metrics(&[0.0, 0.0, 4.0], &[0.0, 0.0, 2.0]).unwrap();
        assert_relative_eq!(m.rmse, 2.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.mae, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_pcc_is_null() {
        let m = metrics(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.pcc, None);
        assert_eq!(metrics(&[2.0], &[1.0]).unwrap().pcc, None);
    }

    #[test]
    fn metric_input_errors() {
        assert!(metrics(&[], &[]).is_err());
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(metrics(&[f64::NAN], &[1.0]).is_err());
    }

    fn cells(n: usize) -> Vec<CellIndex> {
        (1..=n).map(|p| CellIndex::new(1, p)).collect()
    }

    #[test]
    fn kfold_examples() {
        let folds = kfold_split(&cells(12), 6, 1).unwrap();
        assert_eq!(folds.len(), 6);
        assert!(folds.iter().all(|f| f.len() == 2));
        let loo = kfold_split(&cells(7), 7, 1).unwrap();
        assert!(loo.iter().all(|f| f.len() == 1));
        assert!(kfold_split(&cells(5), 6, 1).is_err());
        assert_eq!(
            kfold_split(&cells(12), 6, 9).unwrap(),
            kfold_split(&cells(12), 6, 9).unwrap()
        );
    }

    proptest! {
        #[test]
        fn kfold_partitions(n in 2usize..40, k_raw in 2usize..40, seed in any::<u64>()) {
            let k = 2 + k_raw % (n - 1);
            let all = cells(n);
            let folds = kfold_split(&all, k, seed).unwrap();
            let mut union: Vec<_> = folds.iter().flatten().copied().collect();
            union.sort();
            prop_assert_eq!(union, all);
            let sizes: Vec<_> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn rmse_at_least_mae(pairs in proptest::collection::vec((-100f64..100.0, -100f64..100.0), 1..50)) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = metrics(&t, &p).unwrap();
            prop_assert!(m.rmse >= m.mae - 1e-12);
            if let Some(r) = m.pcc {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
