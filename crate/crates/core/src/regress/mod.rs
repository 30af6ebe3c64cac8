//! Linear cost models: OLS, Ridge, Lasso, two-step Lasso and Elastic Net,
//! with K-fold cross-validation and interval-count hyperparameter selection.

mod cv;
mod linear;
mod penalized;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{
    fold_assignment, k_fold_cv, log_grid, select_by_ci, CvPoint, CvReport, GridPoint, ELASTIC_NET_ALPHAS, LASSO_GRID,
    RIDGE_GRID,
};
pub use linear::{fit_ols, post_refit};
pub use penalized::{elastic_net_objective, fit_elastic_net, fit_lasso, fit_ridge, kkt_violation, lambda_max, Penalty};

/// Response vector and covariates. The intercept column is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.ncols() != names.len() {
            return Err(Error::InvalidInput(format!(
                "{} covariate names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(bad) = (0..x.ncols()).find(|&j| x.column(j).iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput(format!("column {} has missing values", names[bad])));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("response has missing values".into()));
        }
        Ok(Self { names, x, y })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = names.len();
        if let Some(r) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "row {r} has {} values, expected {p}",
                rows[r].len()
            )));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(names, x, DVector::from_column_slice(y))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates, excluding the intercept.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            x: self.x.select_rows(idx),
            y: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i])),
        }
    }

    pub fn columns(&self, idx: &[usize]) -> Dataset {
        Dataset {
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            x: self.x.select_columns(idx),
            y: self.y.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ols,
    Ridge,
    Lasso,
    /// Lasso selection followed by OLS on the selected covariates.
    LsLasso,
    #[serde(rename = "en")]
    ElasticNet,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Ols => "ols",
            Model::Ridge => "ridge",
            Model::Lasso => "lasso",
            Model::LsLasso => "lslasso",
            Model::ElasticNet => "en",
        }
    }

    /// Whether fitting solves an unpenalized least-squares problem at some stage.
    pub fn needs_full_rank(self) -> bool {
        matches!(self, Model::Ols | Model::LsLasso)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ols" => Model::Ols,
            "ridge" => Model::Ridge,
            "lasso" => Model::Lasso,
            "lslasso" => Model::LsLasso,
            "en" | "elastic_net" => Model::ElasticNet,
            other => return Err(Error::Config(format!("unknown model {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub names: Vec<String>,
    pub intercept: f64,
    /// Original-scale covariate coefficients, aligned with `names`.
    pub coefficients: Vec<f64>,
    /// Covariate indices (into `names`) with nonzero coefficients.
    pub support: Vec<usize>,
    pub r2: f64,
    /// Intercept first, then one per covariate. OLS-type fits only.
    pub std_errors: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, data: &Dataset) -> DVector<f64> {
        let mut out = &data.x * DVector::from_column_slice(&self.coefficients);
        out.add_scalar_mut(self.intercept);
        out
    }

    /// Prediction from named feature values; every nonzero covariate must be present.
    pub fn predict_named(&self, value_of: impl Fn(&str) -> Option<f64>) -> Result<f64> {
        let mut acc = self.intercept;
        for (name, &b) in self.names.iter().zip(&self.coefficients) {
            if b == 0.0 {
                continue;
            }
            let v = value_of(name).ok_or_else(|| Error::InvalidInput(format!("feature {name:?} missing")))?;
            acc += b * v;
        }
        Ok(acc)
    }

    pub fn mean_abs_coefficient(&self) -> f64 {
        if self.coefficients.is_empty() {
            0.0
        } else {
            self.coefficients.iter().map(|b| b.abs()).sum::<f64>() / self.coefficients.len() as f64
        }
    }

    /// JSON layout with coefficients keyed by name.
    pub fn to_json(&self) -> serde_json::Value {
        let mut coefficients = serde_json::Map::new();
        coefficients.insert("intercept".into(), self.intercept.into());
        for (n, b) in self.names.iter().zip(&self.coefficients) {
            coefficients.insert(n.clone(), (*b).into());
        }
        let named = |v: &Option<Vec<f64>>| {
            v.as_ref().map(|v| {
                let mut m = serde_json::Map::new();
                for (n, x) in std::iter::once("intercept")
                    .chain(self.names.iter().map(String::as_str))
                    .zip(v)
                {
                    m.insert(n.to_string(), (*x).into());
                }
                serde_json::Value::Object(m)
            })
        };
        let mut out = serde_json::json!({
            "model": self.model.as_str(),
            "lambda": self.lambda,
            "alpha": self.alpha,
            "coefficients": coefficients,
            "support": self.support.iter().map(|&j| self.names[j].clone()).collect::<Vec<_>>(),
            "r2": self.r2,
            "converged": self.converged,
        });
        if let Some(se) = named(&self.std_errors) {
            out["std_errors"] = se;
        }
        if let Some(p) = named(&self.p_values) {
            out["p_values"] = p;
        }
        out
    }
}

/// Fits `model` at one hyperparameter point. `lambda`/`alpha` are ignored for OLS.
pub fn fit(model: Model, data: &Dataset, lambda: f64, alpha: f64, penalty: &Penalty) -> Result<FitResult> {
    match model {
        Model::Ols => fit_ols(data),
        Model::Ridge => Ok(fit_ridge(data, lambda, penalty.standardize)),
        Model::Lasso => Ok(fit_lasso(data, lambda, penalty)),
        Model::LsLasso => {
            let first = fit_lasso(data, lambda, penalty);
            let mut refit = post_refit(data, &first)?;
            refit.model = Model::LsLasso;
            refit.lambda = Some(lambda);
            refit.converged = first.converged;
            refit.iterations = first.iterations;
            Ok(refit)
        }
        Model::ElasticNet => Ok(fit_elastic_net(data, lambda, alpha, penalty)),
    }
}

/// In-sample style R²: `1 - SSE/SST` with SST about `center`; 0 when SST is 0.
pub fn r_squared(y: &DVector<f64>, pred: &DVector<f64>, center: f64) -> f64 {
    let sse: f64 = y.iter().zip(pred.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let sst: f64 = y.iter().map(|a| (a - center).powi(2)).sum();
    if sst == 0.0 {
        0.0
    } else {
        1.0 - sse / sst
    }
}

/// Mean absolute relative error `(1/m) sum |truth - pred| / |truth|`.
pub fn relative_error(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} truths for {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("relative error of an empty sample".into()));
    }
    if let Some(i) = truth.iter().position(|t| *t == 0.0) {
        return Err(Error::InvalidInput(format!("zero truth value at index {i}")));
    }
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t - p).abs() / t.abs())
        .sum::<f64>()
        / truth.len() as f64)
}
