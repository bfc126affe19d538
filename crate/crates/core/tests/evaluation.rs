use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tunnel_deduce::evaluation::snapshot_seed;
use tunnel_deduce::{
    cross_test, factorize, grid_search, kfold_split, reconstruct, CellIndex, ObservationMatrix,
    TrainConfig, TunnelGrid,
};

fn snapshot(seed: u64) -> ObservationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TunnelGrid::new(3, 8, 1.0).unwrap();
    let mut x = ObservationMatrix::new(grid);
    for cell in grid.cells() {
        if rng.random::<f64>() < 0.6 || cell == CellIndex::new(2, 3) {
            x.insert(cell, rng.random_range(1.0..3.0)).unwrap();
        }
    }
    x
}

fn quick() -> TrainConfig {
    TrainConfig {
        max_epochs: 150,
        patience: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn grid_search_ignores_candidate_order() {
    let x = snapshot(1);
    let q = vec![0.8; 7];
    let g1 = [0.1, 0.5, 1.0];
    let g2 = [0.2, 0.7];
    let a = grid_search(&x, &q, &g1, &g2, 3, &quick(), 5).unwrap();
    let b = grid_search(&x, &q, &[1.0, 0.1, 0.5], &[0.7, 0.2], 3, &quick(), 5).unwrap();
    assert_eq!(
        (a.best_lambda1, a.best_lambda2),
        (b.best_lambda1, b.best_lambda2)
    );
    assert_eq!(a.best_val_rmse, b.best_val_rmse);
    let key = |r: &tunnel_deduce::evaluation::CvRow| (r.lambda1.to_bits(), r.lambda2.to_bits());
    let mut ra = a.cv_table.clone();
    let mut rb = b.cv_table.clone();
    ra.sort_by_key(key);
    rb.sort_by_key(key);
    assert_eq!(ra, rb);
}

#[test]
fn grid_search_reports_every_candidate() {
    let x = snapshot(2);
    let r = grid_search(&x, &[1.0; 7], &[0.1, 0.2], &[0.3, 0.4, 0.5], 2, &quick(), 0).unwrap();
    assert_eq!(r.cv_table.len(), 6);
    assert_eq!(r.folds, 2);
    assert!(r.cv_table.iter().all(|row| row.fold_rmse.len() == 2));
}

#[test]
fn folds_partition_the_cells() {
    let cells: Vec<CellIndex> = snapshot(3).observed().into_iter().collect();
    let folds = kfold_split(&cells, 4, 17).unwrap();
    let mut all: Vec<CellIndex> = folds.concat();
    all.sort();
    assert_eq!(all, cells);
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}

#[test]
fn baseline_cross_test_is_plain_nmf_per_snapshot() {
    let snaps: Vec<ObservationMatrix> = (0..4).map(snapshot).collect();
    let test = CellIndex::new(2, 3);
    let cfg = TrainConfig {
        lambda1: 0.7,
        lambda2: 0.4,
        patience: 0,
        max_epochs: 200,
        shuffle: false,
        seed: 21,
        ..TrainConfig::default()
    };
    let q = vec![0.5; 7];
    let result = cross_test(&snaps, &q, test, &cfg, false).unwrap();
    for (i, x) in snaps.iter().enumerate() {
        let plain = TrainConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            seed: snapshot_seed(21, i),
            ..cfg.clone()
        };
        let (f, report) = factorize(&x.without([&test]), &q, &plain).unwrap();
        let (r, c) = test.offset();
        assert_eq!(
            result.predictions[i].prediction,
            reconstruct(&f, report.offset)[[r, c]]
        );
        assert_eq!(result.predictions[i].truth, x.get(test).unwrap());
    }
}

#[test]
fn cross_test_requires_the_cell_everywhere() {
    let mut snaps: Vec<ObservationMatrix> = (0..3).map(snapshot).collect();
    let test = CellIndex::new(2, 3);
    snaps[1] = snaps[1].without([&test]);
    assert!(cross_test(&snaps, &[1.0; 7], test, &quick(), true).is_err());
}
