use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{r_squared, Dataset, FitResult, Model};
use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as a linear combination
/// of the columns before it.
const DEPENDENCE_TOL: f64 = 1e-9;

fn design(data: &Dataset) -> DMatrix<f64> {
    let n = data.n();
    let mut a = DMatrix::from_element(n, data.p() + 1, 1.0);
    a.columns_mut(1, data.p()).copy_from(&data.x);
    a
}

/// Names of columns (intercept first) that lie in the span of the columns
/// preceding them, by modified Gram-Schmidt in the given order.
fn dependent_columns(a: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..a.ncols() {
        let mut v: DVector<f64> = a.column(j).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= DEPENDENCE_TOL * norm0 {
            dependent.push(if j == 0 {
                "intercept".to_string()
            } else {
                names[j - 1].clone()
            });
        } else {
            basis.push(v / norm);
        }
    }
    dependent
}

/// Ordinary least squares through a Householder QR of `[1 | X]`.
pub fn fit_ols(data: &Dataset) -> Result<FitResult> {
    let (n, w) = (data.n(), data.p() + 1);
    if n <= w {
        return Err(Error::InsufficientData(format!(
            "OLS needs more observations than parameters ({n} rows, {w} parameters)"
        )));
    }
    let a = design(data);
    let dependent = dependent_columns(&a, &data.names);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }

    let qr = a.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let theta = r
        .solve_upper_triangular(&(q.transpose() * &data.y))
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let fitted = &a * &theta;
    let sse: f64 = (&data.y - &fitted).norm_squared();
    let sigma2 = sse / (n - w) as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(w, w))
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let cov_diag: Vec<f64> = (0..w).map(|i| r_inv.row(i).norm_squared()).collect();
    let std_errors: Vec<f64> = cov_diag.iter().map(|c| (sigma2 * c).sqrt()).collect();
    let normal = Normal::standard();
    let p_values = theta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| {
            if *se > 0.0 {
                2.0 * (1.0 - normal.cdf((b / se).abs()))
            } else if *b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    let coefficients: Vec<f64> = theta.iter().skip(1).copied().collect();
    let support = coefficients
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(FitResult {
        model: Model::Ols,
        lambda: None,
        alpha: None,
        names: data.names.clone(),
        intercept: theta[0],
        coefficients,
        support,
        r2: r_squared(&data.y, &fitted, data.y.mean()),
        std_errors: Some(std_errors),
        p_values: Some(p_values),
        converged: true,
        iterations: 0,
    })
}

/// OLS restricted to the first-stage support. Coefficients outside the
/// support are exactly zero; their standard errors and p-values are NaN.
pub fn post_refit(data: &Dataset, first_stage: &FitResult) -> Result<FitResult> {
    let support = first_stage.support.clone();
    let restricted = fit_ols(&data.columns(&support))?;
    let p = data.p();
    let mut coefficients = vec![0.0; p];
    let mut se = vec![f64::NAN; p + 1];
    let mut pv = vec![f64::NAN; p + 1];
    let (rse, rpv) = (
        restricted.std_errors.as_ref().unwrap(),
        restricted.p_values.as_ref().unwrap(),
    );
    se[0] = rse[0];
    pv[0] = rpv[0];
    for (i, &j) in support.iter().enumerate() {
        coefficients[j] = restricted.coefficients[i];
        se[j + 1] = rse[i + 1];
        pv[j + 1] = rpv[i + 1];
    }
    Ok(FitResult {
        model: Model::Ols,
        lambda: first_stage.lambda,
        alpha: first_stage.alpha,
        names: data.names.clone(),
        intercept: restricted.intercept,
        coefficients,
        support,
        r2: restricted.r2,
        std_errors: Some(se),
        p_values: Some(pv),
        converged: true,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn data(names: &[&str], rows: &[Vec<f64>], y: &[f64]) -> Dataset {
        Dataset::from_rows(names.iter().map(|s| s.to_string()).collect(), rows, y).unwrap()
    }

    #[test]
    fn exact_line() {
        let d = data(&["x"], &[vec![1.0], vec![2.0], vec![3.0]], &[1.0, 2.0, 3.0]);
        let f = fit_ols(&d).unwrap();
        assert!(f.intercept.abs() < 1e-12);
        assert_relative_eq!(f.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_response() {
        let d = data(&["x"], &[vec![1.0], vec![5.0], vec![2.0], vec![7.0]], &[3.0; 4]);
        let f = fit_ols(&d).unwrap();
        assert_relative_eq!(f.intercept, 3.0, epsilon = 1e-12);
        assert!(f.coefficients[0].abs() < 1e-12);
        assert_eq!(f.r2, 0.0);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.5 + 2.0 * r[0] - r[1] + 0.5 * r[2] + rng.random_range(-0.3..0.3))
            .collect();
        let d = data(&["a", "b", "c"], &rows, &y);
        let f = fit_ols(&d).unwrap();

        // Oracle: solve (A^T A) theta = A^T y by Gaussian elimination.
        let a: Vec<[f64; 4]> = rows.iter().map(|r| [1.0, r[0], r[1], r[2]]).collect();
        let mut m = [[0.0f64; 5]; 4];
        for (row, yi) in a.iter().zip(&y) {
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += row[i] * row[j];
                }
                m[i][4] += row[i] * yi;
            }
        }
        for c in 0..4 {
            let piv = m[c][c];
            for j in c..5 {
                m[c][j] /= piv;
            }
            for r in 0..4 {
                if r != c {
                    let f = m[r][c];
                    for j in c..5 {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
        assert_relative_eq!(f.intercept, m[0][4], epsilon = 1e-8);
        for j in 0..3 {
            assert_relative_eq!(f.coefficients[j], m[j + 1][4], epsilon = 1e-8);
        }
        let se = f.std_errors.unwrap();
        assert!(se.iter().all(|s| *s > 0.0));
        assert!(f.p_values.unwrap()[1] < 1e-6);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64, 2.0 * i as f64, 4.0, (i * i) as f64])
            .collect();
        let d = data(&["a", "twice_a", "four", "sq"], &rows, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        match fit_ols(&d) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["twice_a", "four"]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let d = data(&["x"], &[vec![1.0], vec![2.0]], &[1.0, 2.0]);
        assert!(matches!(fit_ols(&d), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn refit_keeps_support() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                vec![t, (t * 0.7).sin(), (t * 1.3).cos(), t.sqrt()]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[1] - 3.0 * r[3]).collect();
        let d = data(&["a", "b", "c", "e"], &rows, &y);
        let mut first = fit_ols(&d).unwrap();
        first.support = vec![1, 3];
        let refit = post_refit(&d, &first).unwrap();
        assert_eq!(refit.support, vec![1, 3]);
        assert_eq!(refit.coefficients[0], 0.0);
        assert_eq!(refit.coefficients[2], 0.0);
        assert_relative_eq!(refit.coefficients[1], 2.0, epsilon = 1e-9);
        assert_relative_eq!(refit.coefficients[3], -3.0, epsilon = 1e-9);

        first.support = vec![0, 1, 2, 3];
        let full = post_refit(&d, &first).unwrap();
        let ols = fit_ols(&d).unwrap();
        for (a, b) in full.coefficients.iter().zip(&ols.coefficients) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }

        first.support = vec![];
        let empty = post_refit(&d, &first).unwrap();
        assert_relative_eq!(empty.intercept, d.y.mean(), epsilon = 1e-12);
        assert!(empty.coefficients.iter().all(|b| *b == 0.0));
    }
}
