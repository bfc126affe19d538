//! Non-negative completion `X ~ U V` of a sparse observation matrix.
//!
//! The objective is the squared error on observed cells plus two smoothness
//! penalties on the reconstruction `R = U V`:
//!
//! * adjacency: `lambda1 * sum_m sum_{n<N} Q_n (R[m,n] - R[m,n+1])^2`
//! * symmetry:  `lambda2 * sum_m sum_{n<=N} (R[m,n] - R[m,N+1-n])^2`
//!
//! Training runs per-cell projected SGD on the data term and one full-gradient
//! projected step on the two penalties per epoch.

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellIndex, ObservationMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    /// `M x H`, non-negative.
    pub u: Array2<f64>,
    /// `H x N`, non-negative.
    pub v: Array2<f64>,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn product(&self) -> Array2<f64> {
        self.u.dot(&self.v)
    }

    fn predict(&self, cell: CellIndex) -> f64 {
        let (m, n) = cell.offset();
        self.u.row(m).dot(&self.v.column(n))
    }

    fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

/// How to make observed values non-negative before factorizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// Add `-min(X) + margin` when any observed value is negative.
    Auto,
    Off,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rank: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping and trains on every observed cell.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub shift: ShiftPolicy,
    /// Margin added above `-min(X)` by [`ShiftPolicy::Auto`].
    pub shift_margin: f64,
    /// Visit observed cells in a fresh random order each epoch. When false the
    /// sweep is row-major.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rank: 2,
            lambda1: 0.1,
            lambda2: 0.1,
            learning_rate: 0.01,
            max_epochs: 5000,
            patience: 50,
            val_fraction: 0.2,
            seed: 0,
            shift: ShiftPolicy::Auto,
            shift_margin: 1.0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.rank < 1 {
            return err("train.rank must be >= 1".into());
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("train.{name} must be >= 0 (got {v})"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err(format!(
                "train.learning_rate must be > 0 (got {})",
                self.learning_rate
            ));
        }
        if self.max_epochs < 1 {
            return err("train.max_epochs must be >= 1".into());
        }
        if self.patience > 0 && !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return err(format!(
                "train.val_fraction must be in (0, 1) when patience > 0 (got {})",
                self.val_fraction
            ));
        }
        if !(self.shift_margin.is_finite() && self.shift_margin >= 0.0) {
            return err("train.shift_margin must be >= 0".into());
        }
        if let ShiftPolicy::Fixed(c) = self.shift {
            if !c.is_finite() {
                return err("train.shift fixed offset must be finite".into());
            }
        }
        Ok(())
    }

    /// Copy with both penalty weights replaced.
    pub fn with_lambdas(&self, lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data_term: f64,
    /// Already multiplied by `lambda1`.
    pub adjacency_term: f64,
    /// Already multiplied by `lambda2`.
    pub symmetry_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_rmse: Option<f64>,
    pub stopped_early: bool,
    /// Constant added to the observations before training.
    pub offset: f64,
    /// Loss of the returned factors on all observed (shifted) cells.
    pub loss: LossBreakdown,
}

/// Random factors with entries uniform in `(0, 1]`.
pub fn init_factors(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<FactorPair> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!("empty matrix {rows}x{cols}")));
    }
    if rank < 1 || rank > rows.min(cols) {
        return Err(Error::Config(format!(
            "rank {rank} outside 1..={} for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || 1.0 - rng.random::<f64>();
    let u = Array2::from_shape_simple_fn((rows, rank), &mut draw);
    let v = Array2::from_shape_simple_fn((rank, cols), &mut draw);
    Ok(FactorPair { u, v })
}

fn check_shapes(x: &ObservationMatrix, f: &FactorPair, q: &[f64]) -> Result<()> {
    let (m, n) = (x.grid().layers(), x.grid().parts());
    let h = f.u.ncols();
    if f.u.nrows() != m || f.v.dim() != (h, n) {
        return Err(Error::Shape(format!(
            "factors {:?} x {:?} do not match a {m}x{n} grid",
            f.u.dim(),
            f.v.dim()
        )));
    }
    if q.len() + 1 != n {
        return Err(Error::Shape(format!(
            "expected {} adjacency weights, got {}",
            n - 1,
            q.len()
        )));
    }
    Ok(())
}

/// Objective value split into its three weighted terms.
pub fn loss(
    x: &ObservationMatrix,
    f: &FactorPair,
    q: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<LossBreakdown> {
    check_shapes(x, f, q)?;
    let r = f.product();
    let data_term: f64 = x
        .iter()
        .map(|(cell, value)| {
            let (i, j) = cell.offset();
            (value - r[[i, j]]).powi(2)
        })
        .sum();
    let (adjacency, symmetry) = penalty_sums(&r, q);
    let adjacency_term = lambda1 * adjacency;
    let symmetry_term = lambda2 * symmetry;
    Ok(LossBreakdown {
        data_term,
        adjacency_term,
        symmetry_term,
        total: data_term + adjacency_term + symmetry_term,
    })
}

fn penalty_sums(r: &Array2<f64>, q: &[f64]) -> (f64, f64) {
    let n = r.ncols();
    let mut adjacency = 0.0;
    let mut symmetry = 0.0;
    for row in r.rows() {
        for j in 0..n - 1 {
            adjacency += q[j] * (row[j] - row[j + 1]).powi(2);
        }
        for j in 0..n {
            symmetry += (row[j] - row[n - 1 - j]).powi(2);
        }
    }
    (adjacency, symmetry)
}

/// Adds the derivative of the two penalties with respect to `R` into `g`.
fn add_penalty_grad(g: &mut Array2<f64>, r: &Array2<f64>, q: &[f64], lambda1: f64, lambda2: f64) {
    let n = r.ncols();
    for i in 0..r.nrows() {
        if lambda1 != 0.0 {
            for j in 0..n - 1 {
                let d = 2.0 * lambda1 * q[j] * (r[[i, j]] - r[[i, j + 1]]);
                g[[i, j]] += d;
                g[[i, j + 1]] -= d;
            }
        }
        if lambda2 != 0.0 {
            for j in 0..n {
                let k = n - 1 - j;
                let d = 2.0 * lambda2 * (r[[i, j]] - r[[i, k]]);
                g[[i, j]] += d;
                g[[i, k]] -= d;
            }
        }
    }
}

/// Exact gradient `(dE/dU, dE/dV)` of the full objective.
pub fn gradient(
    x: &ObservationMatrix,
    f: &FactorPair,
    q: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_shapes(x, f, q)?;
    let r = f.product();
    let mut g = Array2::zeros(r.dim());
    for (cell, value) in x.iter() {
        let (i, j) = cell.offset();
        g[[i, j]] -= 2.0 * (value - r[[i, j]]);
    }
    add_penalty_grad(&mut g, &r, q, lambda1, lambda2);
    Ok((g.dot(&f.v.t()), f.u.t().dot(&g)))
}

/// `U V - offset`.
pub fn reconstruct(f: &FactorPair, offset: f64) -> Array2<f64> {
    f.product() - offset
}

fn resolve_offset(x: &ObservationMatrix, cfg: &TrainConfig) -> f64 {
    match cfg.shift {
        ShiftPolicy::Off => 0.0,
        ShiftPolicy::Fixed(c) => c,
        ShiftPolicy::Auto => match x.min_value() {
            Some(min) if min < 0.0 => -min + cfg.shift_margin,
            _ => 0.0,
        },
    }
}

fn rmse_on(f: &FactorPair, cells: &[(CellIndex, f64)]) -> f64 {
    let sse: f64 = cells.iter().map(|&(c, v)| (v - f.predict(c)).powi(2)).sum();
    (sse / cells.len() as f64).sqrt()
}

/// One projected SGD update on a single observed cell, U before V.
fn sgd_cell_update(f: &mut FactorPair, cell: CellIndex, value: f64, alpha: f64) {
    let (m, n) = cell.offset();
    let err = value - f.predict(cell);
    for h in 0..f.rank() {
        let u = (f.u[[m, h]] + alpha * 2.0 * err * f.v[[h, n]]).max(0.0);
        f.u[[m, h]] = u;
        f.v[[h, n]] = (f.v[[h, n]] + alpha * 2.0 * err * u).max(0.0);
    }
}

fn penalty_step(f: &mut FactorPair, q: &[f64], cfg: &TrainConfig) {
    if cfg.lambda1 == 0.0 && cfg.lambda2 == 0.0 {
        return;
    }
    let r = f.product();
    let mut g = Array2::zeros(r.dim());
    add_penalty_grad(&mut g, &r, q, cfg.lambda1, cfg.lambda2);
    let grad_u = g.dot(&f.v.t());
    let grad_v = f.u.t().dot(&g);
    let alpha = cfg.learning_rate;
    Zip::from(&mut f.u)
        .and(&grad_u)
        .for_each(|w, &d| *w = (*w - alpha * d).max(0.0));
    Zip::from(&mut f.v)
        .and(&grad_v)
        .for_each(|w, &d| *w = (*w - alpha * d).max(0.0));
}

/// Trains non-negative factors for `x` under the adjacency weights `q`.
///
/// With `patience > 0` a seeded `val_fraction` of the observed cells is held
/// out and the factors with the best validation RMSE are returned.
pub fn factorize(
    x: &ObservationMatrix,
    q: &[f64],
    cfg: &TrainConfig,
) -> Result<(FactorPair, TrainReport)> {
    cfg.validate()?;
    let grid = x.grid();
    if q.len() + 1 != grid.parts() {
        return Err(Error::Shape(format!(
            "expected {} adjacency weights, got {}",
            grid.parts() - 1,
            q.len()
        )));
    }
    if x.len() < cfg.rank {
        return Err(Error::Config(format!(
            "{} observed cells cannot identify a rank-{} factorization",
            x.len(),
            cfg.rank
        )));
    }

    let offset = resolve_offset(x, cfg);
    let shifted = x.shifted(offset);
    let mut f = init_factors(grid.layers(), grid.parts(), cfg.rank, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5DEE_CE66_D1CE_4E5B);

    let mut train: Vec<(CellIndex, f64)> = shifted.iter().collect();
    let mut val = Vec::new();
    if cfg.patience > 0 && train.len() >= 2 {
        let n_val =
            ((cfg.val_fraction * train.len() as f64).round() as usize).clamp(1, train.len() - 1);
        train.shuffle(&mut rng);
        val = train.split_off(train.len() - n_val);
        train.sort_by_key(|&(c, _)| c);
    }

    let alpha = cfg.learning_rate;
    let mut best: Option<(f64, FactorPair, usize)> = None;
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        if cfg.shuffle {
            train.shuffle(&mut rng);
        }
        for &(cell, value) in &train {
            sgd_cell_update(&mut f, cell, value, alpha);
        }
        penalty_step(&mut f, q, cfg);
        debug_assert!(f.u.iter().chain(f.v.iter()).all(|&w| w >= 0.0));

        if !f.is_finite() {
            return Err(Error::Training(format!(
                "factors became non-finite at epoch {epoch}; try a smaller learning_rate (now {alpha})"
            )));
        }

        if !val.is_empty() {
            let score = rmse_on(&f, &val);
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, f.clone(), epoch));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (best_val_rmse, factors, best_epoch) = match best {
        Some((score, factors, epoch)) => (Some(score), factors, epoch),
        None => (None, f, epochs_run),
    };
    let loss = loss(&shifted, &factors, q, cfg.lambda1, cfg.lambda2)?;
    if !loss.total.is_finite() {
        return Err(Error::Training(format!(
            "loss is non-finite; try a smaller learning_rate (now {alpha})"
        )));
    }
    Ok((
        factors,
        TrainReport {
            epochs_run,
            best_epoch,
            best_val_rmse,
            stopped_early,
            offset,
            loss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TunnelGrid;
    use ndarray::array;

    fn grid(m: usize, n: usize) -> TunnelGrid {
        TunnelGrid::new(m, n, 1.0).unwrap()
    }

    fn full(values: &Array2<f64>) -> ObservationMatrix {
        let g = grid(values.nrows(), values.ncols());
        ObservationMatrix::from_cells(
            g,
            values
                .indexed_iter()
                .map(|((i, j), &v)| (CellIndex::new(i + 1, j + 1), v)),
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic_and_positive() {
        let a = init_factors(3, 50, 2, 7).unwrap();
        let b = init_factors(3, 50, 2, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.u.len() + a.v.len(), 106);
        assert!(a.u.iter().chain(a.v.iter()).all(|&w| w > 0.0 && w <= 1.0));
        assert!(matches!(init_factors(3, 50, 4, 7), Err(Error::Config(_))));
    }

    #[test]
    fn loss_one_by_two_instance() {
        let x = ObservationMatrix::from_cells(grid(1, 2), [(CellIndex::new(1, 1), 2.0)]).unwrap();
        let mut f = FactorPair {
            u: array![[1.0]],
            v: array![[2.0, 2.0]],
        };
        let l = loss(&x, &f, &[1.0], 1.0, 1.0).unwrap();
        assert_eq!(l.total, 0.0);
        f.v = array![[2.0, 1.0]];
        let l = loss(&x, &f, &[1.0], 1.0, 1.0).unwrap();
        assert_eq!(l.data_term, 0.0);
        assert_eq!(l.adjacency_term, 1.0);
        assert_eq!(l.symmetry_term, 2.0);
        assert_eq!(l.total, 3.0);
    }

    #[test]
    fn loss_zero_on_exact_fit_and_symmetric_reconstruction() {
        let f = FactorPair {
            u: array![[1.0], [2.0]],
            v: array![[1.0, 3.0, 3.0, 1.0]],
        };
        let x = full(&f.product());
        let l = loss(&x, &f, &[0.5; 3], 0.0, 0.0).unwrap();
        assert_eq!(l.total, 0.0);
        let l = loss(&x, &f, &[0.5; 3], 1.0, 1.0).unwrap();
        assert_eq!(l.symmetry_term, 0.0);
        assert!(l.adjacency_term > 0.0);
    }

    #[test]
    fn loss_shape_errors() {
        let x = full(&array![[1.0, 2.0]]);
        let f = init_factors(1, 2, 1, 0).unwrap();
        assert!(matches!(
            loss(&x, &f, &[1.0, 1.0], 0.0, 0.0),
            Err(Error::Shape(_))
        ));
        let g = init_factors(2, 2, 1, 0).unwrap();
        assert!(matches!(
            loss(&x, &g, &[1.0], 0.0, 0.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        let f = FactorPair {
            u: array![[1.0], [2.0]],
            v: array![[1.0, 2.0]],
        };
        let x = full(&f.product());
        let (gu, gv) = gradient(&x, &f, &[1.0], 0.0, 0.0).unwrap();
        assert!(gu.iter().chain(gv.iter()).all(|g| g.abs() < 1e-10));
    }

    #[test]
    fn reconstruct_examples() {
        let f = FactorPair {
            u: array![[1.0], [2.0]],
            v: array![[3.0, 4.0]],
        };
        assert_eq!(reconstruct(&f, 0.0), array![[3.0, 4.0], [6.0, 8.0]]);
        let g = FactorPair {
            u: array![[3.0]],
            v: array![[4.0, 1.0]],
        };
        assert_eq!(reconstruct(&g, 10.0)[[0, 0]], 2.0);
    }

    #[test]
    fn exact_rank_one_recovery() {
        let x = full(&array![[1.0, 2.0], [2.0, 4.0]]);
        let cfg = TrainConfig {
            rank: 1,
            lambda1: 0.0,
            lambda2: 0.0,
            patience: 0,
            max_epochs: 20000,
            seed: 3,
            ..TrainConfig::default()
        };
        let (f, report) = factorize(&x, &[1.0], &cfg).unwrap();
        let r = reconstruct(&f, report.offset);
        let rmse = (x
            .iter()
            .map(|(c, v)| {
                let (i, j) = c.offset();
                (v - r[[i, j]]).powi(2)
            })
            .sum::<f64>()
            / 4.0)
            .sqrt();
        assert!(rmse <= 1e-3, "rmse {rmse}");
    }

    #[test]
    fn single_cell_fit() {
        let x = ObservationMatrix::from_cells(grid(2, 4), [(CellIndex::new(2, 3), 5.0)]).unwrap();
        let cfg = TrainConfig {
            rank: 1,
            lambda1: 0.0,
            lambda2: 0.0,
            patience: 0,
            max_epochs: 5000,
            ..TrainConfig::default()
        };
        let (f, report) = factorize(&x, &[1.0; 3], &cfg).unwrap();
        let r = reconstruct(&f, report.offset);
        assert!((r[[1, 2]] - 5.0).abs() < 1e-3);
    }

    #[test]
    fn identifiability_floor() {
        let x = ObservationMatrix::from_cells(grid(3, 4), [(CellIndex::new(1, 1), 1.0)]).unwrap();
        let cfg = TrainConfig::default();
        assert!(matches!(
            factorize(&x, &[1.0; 3], &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn divergence_is_a_training_error() {
        let x = full(&array![[1e3, 2e3], [2e3, 4e3]]);
        let cfg = TrainConfig {
            rank: 1,
            learning_rate: 1.0,
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            factorize(&x, &[1.0], &cfg),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn auto_shift_applies_to_negative_data() {
        let x = full(&array![[-2.0, 1.0], [0.5, 3.0]]);
        let cfg = TrainConfig {
            rank: 1,
            patience: 0,
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let (f, report) = factorize(&x, &[1.0], &cfg).unwrap();
        assert_eq!(report.offset, 3.0);
        assert!(f.product().iter().all(|&w| w >= 0.0));
        let off = TrainConfig {
            shift: ShiftPolicy::Off,
            ..cfg
        };
        assert_eq!(factorize(&x, &[1.0], &off).unwrap().1.offset, 0.0);
    }

    #[test]
    fn early_stopping_returns_best_validation_factors() {
        let truth = array![
            [1.0, 2.0, 3.0, 2.0],
            [2.0, 4.0, 6.0, 4.0],
            [1.5, 3.0, 4.5, 3.0]
        ];
        let x = full(&truth);
        let cfg = TrainConfig {
            rank: 1,
            patience: 5,
            max_epochs: 3000,
            ..TrainConfig::default()
        };
        let (_, report) = factorize(&x, &[1.0; 3], &cfg).unwrap();
        assert!(report.best_val_rmse.is_some());
        assert!(report.best_epoch <= report.epochs_run);
    }

    #[test]
    fn training_is_reproducible() {
        let x = full(&array![[1.0, 2.0, 3.0, 2.0], [2.0, 4.0, 6.0, 4.0]]);
        let cfg = TrainConfig {
            rank: 2,
            max_epochs: 500,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = factorize(&x, &[1.0; 3], &cfg).unwrap();
        let b = factorize(&x, &[1.0; 3], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            val_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shift_policy_toml_forms() {
        #[derive(Deserialize)]
        struct W {
            shift: ShiftPolicy,
        }
        let a: W = toml::from_str("shift = \"auto\"").unwrap();
        assert_eq!(a.shift, ShiftPolicy::Auto);
        let f: W = toml::from_str("shift = { fixed = 2.5 }").unwrap();
        assert_eq!(f.shift, ShiftPolicy::Fixed(2.5));
    }
}
