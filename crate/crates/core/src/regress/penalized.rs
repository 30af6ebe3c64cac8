use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{r_squared, Dataset, FitResult, Model};

/// Solver settings shared by the penalized fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Penalty {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Scale covariates to unit variance before penalizing.
    pub standardize: bool,
}

impl Default for Penalty {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100_000,
            standardize: true,
        }
    }
}

/// The centered (and optionally scaled) problem the solvers work on.
struct Standardized {
    x_mean: Vec<f64>,
    scale: Vec<f64>,
    y_mean: f64,
    /// Covariates with nonzero variance.
    active: Vec<usize>,
    /// `Z^T Z / N` over active columns.
    gram: DMatrix<f64>,
    /// `Z^T (y - ybar) / N` over active columns.
    corr: DVector<f64>,
}

impl Standardized {
    fn new(data: &Dataset, standardize: bool) -> Self {
        let n = data.n() as f64;
        let p = data.p();
        let x_mean: Vec<f64> = (0..p).map(|j| data.x.column(j).mean()).collect();
        let sd: Vec<f64> = (0..p)
            .map(|j| (data.x.column(j).iter().map(|v| (v - x_mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        let active: Vec<usize> = (0..p).filter(|&j| sd[j] > 1e-12 * (1.0 + x_mean[j].abs())).collect();
        let scale: Vec<f64> = sd
            .iter()
            .map(|s| if standardize && *s > 0.0 { *s } else { 1.0 })
            .collect();
        let y_mean = data.y.mean();

        let m = active.len();
        let z = DMatrix::from_fn(data.n(), m, |i, a| {
            let j = active[a];
            (data.x[(i, j)] - x_mean[j]) / scale[j]
        });
        let yc = data.y.add_scalar(-y_mean);
        let gram = z.tr_mul(&z) / n;
        let corr = z.tr_mul(&yc) / n;
        Self {
            x_mean,
            scale,
            y_mean,
            active,
            gram,
            corr,
        }
    }

    /// Maps active-column coefficients back to the original scale.
    fn back_transform(&self, b: &DVector<f64>, p: usize) -> (f64, Vec<f64>) {
        let mut theta = vec![0.0; p];
        for (a, &j) in self.active.iter().enumerate() {
            theta[j] = b[a] / self.scale[j];
        }
        let intercept = self.y_mean - theta.iter().zip(&self.x_mean).map(|(t, m)| t * m).sum::<f64>();
        (intercept, theta)
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn finish(
    model: Model,
    data: &Dataset,
    st: &Standardized,
    b: &DVector<f64>,
    lambda: f64,
    alpha: Option<f64>,
    converged: bool,
    iterations: usize,
) -> FitResult {
    let (intercept, coefficients) = st.back_transform(b, data.p());
    let support = coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, _)| j)
        .collect();
    let mut fit = FitResult {
        model,
        lambda: Some(lambda),
        alpha,
        names: data.names.clone(),
        intercept,
        coefficients,
        support,
        r2: 0.0,
        std_errors: None,
        p_values: None,
        converged,
        iterations,
    };
    fit.r2 = r_squared(&data.y, &fit.predict(data), data.y.mean());
    fit
}

/// Ridge: minimizes `(1/N)|y - X theta|^2 + lambda sum theta_j^2` in closed form.
pub fn fit_ridge(data: &Dataset, lambda: f64, standardize: bool) -> FitResult {
    let st = Standardized::new(data, standardize);
    let m = st.active.len();
    let a = &st.gram + DMatrix::identity(m, m) * lambda;
    let b = match a.clone().cholesky() {
        Some(ch) => ch.solve(&st.corr),
        None => a
            .svd(true, true)
            .solve(&st.corr, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(m)),
    };
    finish(Model::Ridge, data, &st, &b, lambda, None, true, 0)
}

/// Cyclic coordinate descent for
/// `(1/(2N))|y - X theta|^2 + alpha lambda sum|theta_j| + (1-alpha) lambda / 2 sum theta_j^2`
/// on the centered, optionally standardized problem. Works on the Gram matrix,
/// so each sweep costs O(p^2) regardless of N.
fn coordinate_descent(st: &Standardized, lambda: f64, alpha: f64, penalty: &Penalty) -> (DVector<f64>, bool, usize) {
    let m = st.active.len();
    let mut b = DVector::zeros(m);
    let mut gb = DVector::<f64>::zeros(m);
    let l1 = alpha * lambda;
    let l2 = (1.0 - alpha) * lambda;
    for sweep in 1..=penalty.max_iter {
        let mut max_delta: f64 = 0.0;
        for j in 0..m {
            let gjj = st.gram[(j, j)];
            let rho = st.corr[j] - gb[j] + gjj * b[j];
            let new = soft_threshold(rho, l1) / (gjj + l2);
            let delta = new - b[j];
            if delta != 0.0 {
                b[j] = new;
                gb.axpy(delta, &st.gram.column(j), 1.0);
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < penalty.tol {
            return (b, true, sweep);
        }
    }
    (b, false, penalty.max_iter)
}

/// Elastic net with mixing `alpha` in [0, 1]; `alpha = 1` is the lasso and
/// `alpha = 0` has the ridge minimizer.
pub fn fit_elastic_net(data: &Dataset, lambda: f64, alpha: f64, penalty: &Penalty) -> FitResult {
    let st = Standardized::new(data, penalty.standardize);
    let (b, converged, iterations) = coordinate_descent(&st, lambda, alpha.clamp(0.0, 1.0), penalty);
    if !converged {
        warn!(lambda, alpha, iterations, "coordinate descent hit max_iter");
    }
    finish(
        Model::ElasticNet,
        data,
        &st,
        &b,
        lambda,
        Some(alpha),
        converged,
        iterations,
    )
}

/// Lasso: `(1/(2N))|y - X theta|^2 + lambda sum|theta_j|`.
pub fn fit_lasso(data: &Dataset, lambda: f64, penalty: &Penalty) -> FitResult {
    let mut fit = fit_elastic_net(data, lambda, 1.0, penalty);
    fit.model = Model::Lasso;
    fit.alpha = None;
    fit
}

/// Smallest lambda at which the lasso support is empty: `max_j |z_j^T y| / N`.
pub fn lambda_max(data: &Dataset, standardize: bool) -> f64 {
    Standardized::new(data, standardize).corr.amax()
}

/// Objective of the problem solved by [`fit_elastic_net`], evaluated at a fit.
pub fn elastic_net_objective(data: &Dataset, fit: &FitResult, lambda: f64, alpha: f64, standardize: bool) -> f64 {
    let st = Standardized::new(data, standardize);
    let resid = &data.y - fit.predict(data);
    let loss = resid.norm_squared() / (2.0 * data.n() as f64);
    let (mut l1, mut l2) = (0.0, 0.0);
    for &j in &st.active {
        let b = fit.coefficients[j] * st.scale[j];
        l1 += b.abs();
        l2 += b * b;
    }
    loss + alpha * lambda * l1 + 0.5 * (1.0 - alpha) * lambda * l2
}

/// Largest violation of the elastic-net optimality conditions at `fit`.
pub fn kkt_violation(data: &Dataset, fit: &FitResult, lambda: f64, alpha: f64, standardize: bool) -> f64 {
    let st = Standardized::new(data, standardize);
    let n = data.n() as f64;
    let resid = &data.y - fit.predict(data);
    let mut worst: f64 = 0.0;
    for &j in &st.active {
        let zj = data.x.column(j).add_scalar(-st.x_mean[j]) / st.scale[j];
        let b = fit.coefficients[j] * st.scale[j];
        let grad = -zj.dot(&resid) / n + (1.0 - alpha) * lambda * b;
        let bound = alpha * lambda;
        let v = if b != 0.0 {
            (grad + bound * b.signum()).abs()
        } else {
            (grad.abs() - bound).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::regress::fit_ols;

    fn raw() -> Penalty {
        Penalty {
            standardize: false,
            ..Default::default()
        }
    }

    fn one_d() -> Dataset {
        Dataset::from_rows(vec!["x".into()], &[vec![-1.0], vec![0.0], vec![1.0]], &[-1.0, 0.0, 1.0]).unwrap()
    }

    fn random_data(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|j| rng.random_range(-1.0..1.0) * (1.0 + j as f64)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                3.0 + r.iter().enumerate().map(|(j, v)| v * (j as f64 - 1.5)).sum::<f64>() + rng.random_range(-0.5..0.5)
            })
            .collect();
        Dataset::from_rows((0..p).map(|j| format!("x{j}")).collect(), &rows, &y).unwrap()
    }

    #[test]
    fn one_dimensional_closed_forms() {
        let d = one_d();
        assert_relative_eq!(
            fit_ridge(&d, 1.0 / 3.0, false).coefficients[0],
            2.0 / 3.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(fit_lasso(&d, 1.0 / 3.0, &raw()).coefficients[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(lambda_max(&d, false), 2.0 / 3.0, epsilon = 1e-12);
        assert!(fit_lasso(&d, 2.0 / 3.0, &raw()).support.is_empty());
    }

    #[test]
    fn zero_penalty_is_ols() {
        let d = random_data(1, 60, 4);
        let ols = fit_ols(&d).unwrap();
        for standardize in [false, true] {
            let pen = Penalty {
                standardize,
                ..Default::default()
            };
            let r = fit_ridge(&d, 0.0, standardize);
            let l = fit_lasso(&d, 0.0, &pen);
            let e = fit_elastic_net(&d, 0.0, 0.5, &pen);
            for j in 0..4 {
                assert_relative_eq!(r.coefficients[j], ols.coefficients[j], epsilon = 1e-8);
                assert_relative_eq!(l.coefficients[j], ols.coefficients[j], epsilon = 1e-6);
                assert_relative_eq!(e.coefficients[j], ols.coefficients[j], epsilon = 1e-6);
            }
            assert_relative_eq!(l.intercept, ols.intercept, epsilon = 1e-6);
        }
    }

    #[test]
    fn elastic_net_limits() {
        let d = random_data(2, 80, 5);
        let pen = Penalty::default();
        for lambda in [0.01, 0.1, 0.5] {
            let en1 = fit_elastic_net(&d, lambda, 1.0, &pen);
            let lasso = fit_lasso(&d, lambda, &pen);
            let en0 = fit_elastic_net(&d, lambda, 0.0, &pen);
            let ridge = fit_ridge(&d, lambda, true);
            for j in 0..5 {
                assert_relative_eq!(en1.coefficients[j], lasso.coefficients[j], epsilon = 1e-6);
                assert_relative_eq!(en0.coefficients[j], ridge.coefficients[j], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn huge_penalty_shrinks_to_mean() {
        let d = random_data(3, 40, 3);
        let r = fit_ridge(&d, 1e8, true);
        assert!(r.coefficients.iter().all(|b| b.abs() < 1e-6));
        assert_relative_eq!(r.intercept, d.y.mean(), epsilon = 1e-5);
        let l = fit_lasso(&d, lambda_max(&d, true) * 1.0001, &Penalty::default());
        assert!(l.support.is_empty());
        assert_relative_eq!(l.intercept, d.y.mean(), epsilon = 1e-12);
    }

    #[test]
    fn constant_column_gets_zero() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let d = Dataset::from_rows(vec!["t".into(), "c".into()], &rows, &y).unwrap();
        let f = fit_lasso(&d, 0.01, &Penalty::default());
        assert_eq!(f.coefficients[1], 0.0);
        assert!(f.converged);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let d = random_data(4, 50, 6);
        let f = fit_lasso(
            &d,
            1e-4,
            &Penalty {
                max_iter: 1,
                ..Default::default()
            },
        );
        assert!(!f.converged);
        assert_eq!(f.iterations, 1);
    }

    #[test]
    fn standardization_round_trip_predictions() {
        let d = random_data(5, 70, 4);
        let f = fit_lasso(&d, 0.05, &Penalty::default());
        // Prediction on the original scale against one assembled from the
        // standardized problem.
        let st = Standardized::new(&d, true);
        for i in 0..d.n() {
            let orig = f.predict_row(&d.x.row(i).iter().copied().collect::<Vec<_>>());
            let mut z_pred = st.y_mean;
            for &j in &st.active {
                let z = (d.x[(i, j)] - st.x_mean[j]) / st.scale[j];
                z_pred += f.coefficients[j] * st.scale[j] * z;
            }
            assert!((orig - z_pred).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn objective_monotone_and_kkt(seed in 0..1000u64, lambda in 0.001..1.0f64, alpha in 0.0..=1.0f64) {
            let d = random_data(seed, 40, 5);
            let mut prev = f64::INFINITY;
            for sweeps in 1..15 {
                let f = fit_elastic_net(&d, lambda, alpha, &Penalty { max_iter: sweeps, tol: 0.0, ..Default::default() });
                let obj = elastic_net_objective(&d, &f, lambda, alpha, true);
                prop_assert!(obj <= prev + 1e-12, "sweep {} rose from {} to {}", sweeps, prev, obj);
                prev = obj;
            }
            let f = fit_elastic_net(&d, lambda, alpha, &Penalty { tol: 1e-10, ..Default::default() });
            prop_assert!(f.converged);
            prop_assert!(kkt_violation(&d, &f, lambda, alpha, true) < 1e-6);
        }
    }
}
