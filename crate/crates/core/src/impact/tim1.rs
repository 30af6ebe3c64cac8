//! Single-event transient impact model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::estimate::{estimate_correlation, estimate_g0, estimate_response};
use super::{KernelSet, SignSeries};
use crate::error::{Error, Result};

/// Largest condition number accepted before a kernel solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Response and correlation statistics of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCorrelation {
    pub alpha: f64,
    pub n: usize,
    pub l: usize,
    /// `S(l)` for `l = 1..=L`.
    pub s: Vec<f64>,
    /// `C(n)` for `n = -N..=L`, stored at offset `N`.
    pub c: Vec<f64>,
    pub g0: f64,
}

impl ResponseCorrelation {
    pub fn estimate(series: &SignSeries, alpha: f64, n: usize, l: usize) -> Result<Self> {
        let returns = series.returns_bp();
        let lags: Vec<i64> = (-(n as i64)..=l as i64).collect();
        Ok(ResponseCorrelation {
            alpha,
            n,
            l,
            s: estimate_response(&series.eps, &returns, l)?,
            c: estimate_correlation(series, alpha, &lags)?,
            g0: estimate_g0(series, &returns, alpha)?,
        })
    }

    pub fn c_at(&self, lag: i64) -> f64 {
        self.c[(lag + self.n as i64) as usize]
    }

    /// The `L x N` matrix with entries `C(l - 1 - j)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.l, self.n, |r, j| self.c_at(r as i64 - j as i64))
    }

    /// `S(l) - G0 C(l)`.
    pub fn reduced_response(&self) -> DVector<f64> {
        DVector::from_fn(self.l, |r, _| self.s[r] - self.g0 * self.c_at(r as i64 + 1))
    }
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn check_condition(cond: f64, n: usize) -> Result<()> {
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::IllConditioned {
            condition: cond,
            hint: format!("reduce the kernel length N (currently {n}) or supply more events"),
        });
    }
    Ok(())
}

/// Solves `C ΔG = S - G0 C(1..L)`: LU for the square system, least squares when `L > N`.
/// Returns the kernel and the condition number of the correlation matrix.
pub fn solve_tim1(rc: &ResponseCorrelation) -> Result<(KernelSet, f64)> {
    if rc.n == 0 || rc.l < rc.n {
        return Err(Error::Config(format!(
            "kernel solve needs 1 <= N <= L (N = {}, L = {})",
            rc.n, rc.l
        )));
    }
    let a = rc.matrix();
    let b = rc.reduced_response();
    let cond = condition_number(&a);
    check_condition(cond, rc.n)?;
    let delta = if rc.l == rc.n {
        a.lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("singular correlation matrix".into()))?
    } else {
        a.svd(true, true)
            .solve(&b, 0.0)
            .map_err(|e| Error::Numerical(format!("least-squares kernel solve: {e}")))?
    };
    Ok((KernelSet::accumulate(rc.g0, delta.as_slice()), cond))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn rc_from(c: impl Fn(i64) -> f64, s: Vec<f64>, g0: f64, n: usize) -> ResponseCorrelation {
        let l = s.len();
        ResponseCorrelation {
            alpha: 0.0,
            n,
            l,
            s,
            c: (-(n as i64)..=l as i64).map(c).collect(),
            g0,
        }
    }

    #[test]
    fn identity_correlation_reduces_to_division() {
        let c0 = 1.7;
        let s = vec![3.4, -1.7, 0.85];
        let rc = rc_from(|n| if n == 0 { c0 } else { 0.0 }, s.clone(), 5.0, 3);
        let (k, cond) = solve_tim1(&rc).unwrap();
        assert_relative_eq!(cond, 1.0, epsilon = 1e-12);
        for j in 0..3 {
            assert_relative_eq!(k.delta_g[j], s[j] / c0, epsilon = 1e-12);
        }
        assert_eq!(k.g[0], 5.0);
        for j in 0..3 {
            assert_eq!(k.g[j + 1], k.g[j] + k.delta_g[j]);
        }
    }

    #[test]
    fn permanent_impact_fixed_point() {
        let rc = rc_from(|n| if n == 0 { 1.0 } else { 0.0 }, vec![0.0; 4], 12.0, 4);
        let (k, _) = solve_tim1(&rc).unwrap();
        assert!(k.delta_g.iter().all(|d| *d == 0.0));
        assert!(k.g.iter().all(|g| *g == 12.0));
    }

    #[test]
    fn markov_correlation_system_matches_oracle() {
        // With C(n) = rho^|n| and a known kernel, build S from the model
        // equation and check the solver returns the kernel.
        let rho: f64 = 0.6;
        let (n, l) = (4usize, 6usize);
        let g0 = 10.0;
        let dg = [-3.0, -1.5, -0.7, -0.2];
        let c = |k: i64| rho.powi(k.unsigned_abs() as i32);
        let s: Vec<f64> = (1..=l as i64)
            .map(|li| {
                g0 * c(li)
                    + dg.iter()
                        .enumerate()
                        .map(|(j, d)| d * c(li - 1 - j as i64))
                        .sum::<f64>()
            })
            .collect();
        let rc = rc_from(c, s, g0, n);
        let (k, _) = solve_tim1(&rc).unwrap();
        for j in 0..n {
            assert_relative_eq!(k.delta_g[j], dg[j], epsilon = 1e-10);
        }
        let square = rc_from(c, rc.s[..n].to_vec(), g0, n);
        let (k2, _) = solve_tim1(&square).unwrap();
        for j in 0..n {
            assert_relative_eq!(k2.delta_g[j], dg[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_system_is_refused() {
        let rc = rc_from(|_| 1.0, vec![1.0; 3], 1.0, 3);
        assert!(matches!(solve_tim1(&rc), Err(Error::IllConditioned { .. })));
        let rc = rc_from(|n| f64::from(n == 0), vec![1.0; 2], 1.0, 3);
        assert!(matches!(solve_tim1(&rc), Err(Error::Config(_))));
    }
}
