use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, r_squared, Dataset, Model, Penalty};
use crate::error::{Error, Result};

/// Lasso lambda range and point count.
pub const LASSO_GRID: (f64, f64, usize) = (1e-1, 1e3, 20);
/// Ridge lambda range and point count.
pub const RIDGE_GRID: (f64, f64, usize) = (1e2, 1e8, 20);
pub const ELASTIC_NET_ALPHAS: [f64; 3] = [0.2, 0.5, 0.8];

/// Points below this mean absolute coefficient are treated as the all-zero model.
const DEGENERATE_COEF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub alpha: f64,
}

/// `n` log-uniformly spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub alpha: f64,
    /// Out-of-sample R² per fold.
    pub r2: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std: f64,
    pub in_ci1: usize,
    pub in_ci2: usize,
    /// Mean over folds of the mean absolute covariate coefficient.
    pub mean_abs_coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: Model,
    pub k: usize,
    pub seed: u64,
    pub points: Vec<CvPoint>,
}

/// Fold index for each row: a seeded shuffle cut into `k` contiguous blocks
/// whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            fold[i] = f;
        }
        pos += size;
    }
    fold
}

fn interval_counts(values: &[f64], mean: f64, std: f64, k: usize) -> (usize, usize) {
    let slack = 1e-12 * (1.0 + mean.abs());
    let inside = |half: f64| values.iter().filter(|v| (**v - mean).abs() <= half + slack).count();
    (inside(std / (k as f64).sqrt()), inside(std))
}

pub(crate) fn summarize(lambda: f64, alpha: f64, r2: Vec<f64>, mean_abs_coef: f64) -> CvPoint {
    let k = r2.len();
    let mean = r2.iter().sum::<f64>() / k as f64;
    let std = if k > 1 {
        (r2.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (in_ci1, in_ci2) = interval_counts(&r2, mean, std, k);
    CvPoint {
        lambda,
        alpha,
        r2,
        mean,
        std,
        in_ci1,
        in_ci2,
        mean_abs_coef,
    }
}

/// K-fold cross-validation of `model` over `grid`. Every (point, fold) fit runs
/// in parallel; results are gathered in grid-then-fold order, so the report
/// depends only on the inputs.
pub fn k_fold_cv(
    data: &Dataset,
    model: Model,
    grid: &[GridPoint],
    k: usize,
    seed: u64,
    penalty: &Penalty,
) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold cross-validation needs k >= 2, got {k}")));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let n = data.n();
    if n < k {
        return Err(Error::InsufficientData(format!("{n} rows cannot fill {k} folds")));
    }
    let folds = fold_assignment(n, k, seed);
    let split: Vec<(Dataset, Dataset)> = (0..k)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            (data.rows(&train), data.rows(&test))
        })
        .collect();
    if model.needs_full_rank() {
        let w = data.p() + 1;
        if let Some(small) = split.iter().map(|(tr, _)| tr.n()).find(|&m| m <= w) {
            return Err(Error::InsufficientData(format!(
                "training folds of {small} rows cannot identify {w} parameters; use more data or a smaller k"
            )));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &split[f];
            let fitted = fit(model, train, grid[g].lambda, grid[g].alpha, penalty)?;
            let r2 = r_squared(&test.y, &fitted.predict(test), train.y.mean());
            Ok((r2, fitted.mean_abs_coefficient()))
        })
        .collect::<Result<_>>()?;

    let points = grid
        .iter()
        .enumerate()
        .map(|(g, gp)| {
            let chunk = &results[g * k..(g + 1) * k];
            let coef = chunk.iter().map(|r| r.1).sum::<f64>() / k as f64;
            summarize(gp.lambda, gp.alpha, chunk.iter().map(|r| r.0).collect(), coef)
        })
        .collect();
    Ok(CvReport { model, k, seed, points })
}

/// Index of the chosen grid point: most fold R² values inside the narrow
/// interval, then inside the wide one, then the larger lambda. Points whose
/// coefficients are all numerically zero are skipped.
pub fn select_by_ci(report: &CvReport) -> Result<usize> {
    report
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.mean_abs_coef >= DEGENERATE_COEF)
        .max_by(|(_, a), (_, b)| {
            a.in_ci1
                .cmp(&b.in_ci1)
                .then(a.in_ci2.cmp(&b.in_ci2))
                .then(a.lambda.total_cmp(&b.lambda))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InsufficientData("every grid point shrinks all coefficients to zero".into()))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    use super::*;

    fn point(lambda: f64, c1: usize, c2: usize, coef: f64) -> CvPoint {
        CvPoint {
            lambda,
            alpha: 1.0,
            r2: vec![],
            mean: 0.0,
            std: 0.0,
            in_ci1: c1,
            in_ci2: c2,
            mean_abs_coef: coef,
        }
    }

    fn report(points: Vec<CvPoint>) -> CvReport {
        CvReport {
            model: Model::Lasso,
            k: 10,
            seed: 0,
            points,
        }
    }

    #[test]
    fn hand_built_intervals() {
        let p = summarize(1.0, 1.0, vec![0.5, 0.5, 0.5, 0.5, 1.0], 1.0);
        assert_relative_eq!(p.mean, 0.6, epsilon = 1e-15);
        assert_relative_eq!(p.std, 0.05f64.sqrt(), epsilon = 1e-15);
        assert_eq!(p.in_ci1, 4);
        assert_eq!(p.in_ci2, 4);
        let flat = summarize(1.0, 1.0, vec![0.3; 6], 1.0);
        assert_eq!(flat.std, 0.0);
        assert_eq!((flat.in_ci1, flat.in_ci2), (6, 6));
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select_by_ci(&report(vec![point(1.0, 3, 5, 1.0)])).unwrap(), 0);
        assert_eq!(
            select_by_ci(&report(vec![point(1.0, 16, 18, 1.0), point(2.0, 18, 18, 1.0)])).unwrap(),
            1
        );
        assert_eq!(
            select_by_ci(&report(vec![point(1.0, 7, 9, 1.0), point(2.0, 7, 8, 1.0)])).unwrap(),
            0
        );
        assert_eq!(
            select_by_ci(&report(vec![point(1.0, 7, 9, 1.0), point(2.0, 7, 9, 1.0)])).unwrap(),
            1
        );
        assert_eq!(
            select_by_ci(&report(vec![point(1.0, 5, 9, 1.0), point(2.0, 9, 9, 0.0)])).unwrap(),
            0
        );
        assert!(select_by_ci(&report(vec![point(1.0, 5, 9, 0.0)])).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-1, 1e3, 20);
        assert_eq!(g.len(), 20);
        assert_relative_eq!(g[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(g[19], 1000.0, epsilon = 1e-9);
        assert_relative_eq!(g[1] / g[0], g[2] / g[1], epsilon = 1e-12);
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(23, 5, 9);
        let mut counts = [0; 5];
        for x in &f {
            counts[*x] += 1;
        }
        assert_eq!(counts, [5, 5, 5, 4, 4]);
        assert_eq!(f, fold_assignment(23, 5, 9));
        assert_ne!(f, fold_assignment(23, 5, 10));
    }

    fn synthetic(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 2.0 * r[0] - r[2] + 0.3 * rng.random_range(-1.0..1.0))
            .collect();
        Dataset::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows, &y).unwrap()
    }

    #[test]
    fn cv_is_reproducible_and_penalty_extremes_behave() {
        let d = synthetic(120, 4);
        let grid: Vec<GridPoint> = log_grid(1e-3, 1e2, 6)
            .into_iter()
            .map(|lambda| GridPoint { lambda, alpha: 1.0 })
            .collect();
        let a = k_fold_cv(&d, Model::Lasso, &grid, 10, 11, &Penalty::default()).unwrap();
        let b = k_fold_cv(&d, Model::Lasso, &grid, 10, 11, &Penalty::default()).unwrap();
        assert_eq!(a, b);
        for p in &a.points {
            assert!(p.in_ci1 <= p.in_ci2 && p.in_ci2 <= 10);
        }
        let huge = a.points.last().unwrap();
        assert_eq!(huge.mean_abs_coef, 0.0);
        assert!(huge.mean.abs() < 0.1);
        assert!(a.points[0].mean > 0.8);
        let chosen = select_by_ci(&a).unwrap();
        assert!(a.points[chosen].mean_abs_coef > 0.0);
    }

    #[test]
    fn ols_folds_must_identify_parameters() {
        let d = synthetic(12, 1);
        let grid = [GridPoint {
            lambda: 0.0,
            alpha: 1.0,
        }];
        let err = k_fold_cv(&d, Model::Ols, &grid, 3, 0, &Penalty::default());
        assert!(err.is_ok());
        let err = k_fold_cv(
            &d.rows(&[0, 1, 2, 3, 4, 5]),
            Model::Ols,
            &grid,
            3,
            0,
            &Penalty::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(m) if m.contains("smaller k")));
    }
}
