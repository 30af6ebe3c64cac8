//! Two-event transient impact model with buy/sell event types.

use nalgebra::{DMatrix, DVector};

use super::estimate::{estimate_typed, TypedMoments};
use super::tim1::check_condition;
use super::{KernelSet, SignSeries};
use crate::error::{Error, Result};

/// Block system with rows `(pi, l)` and columns `(pi', j)`; entry `Ct_{pi,pi'}(l-1-j)`.
pub fn block_matrix(m: &TypedMoments, n: usize, l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * l, 2 * n, |r, c| {
        let (a, li) = (r / l, r % l);
        let (b, j) = (c / n, c % n);
        m.c_tilde_at(a, b, li as i64 - j as i64)
    })
}

/// `S_pi(l) - sum_pi' G0_pi' Ct_{pi,pi'}(l)`, stacked by type.
pub fn block_response(m: &TypedMoments, l: usize) -> DVector<f64> {
    DVector::from_fn(2 * l, |r, _| {
        let (a, li) = (r / l, r % l);
        m.s[a][li] - (0..2).map(|b| m.g0[b] * m.c_tilde_at(a, b, li as i64 + 1)).sum::<f64>()
    })
}

/// Result of the two-event solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Tim2Solution {
    /// Kernels for `pi = +1` and `pi = -1`.
    pub kernels: [KernelSet; 2],
    pub condition_number: f64,
    pub rank: usize,
    pub moments: TypedMoments,
}

/// Singular values below this fraction of the largest span the null space.
const RANK_TOL: f64 = 1e-10;

pub fn solve_tim2(series: &SignSeries, alpha: f64, n: usize, l: usize, max_d: usize) -> Result<Tim2Solution> {
    if n == 0 || l < n {
        return Err(Error::Config(format!(
            "kernel solve needs 1 <= N <= L (N = {n}, L = {l})"
        )));
    }
    let returns = series.returns_bp();
    let moments = estimate_typed(series, &returns, alpha, n, l, max_d)?;
    solve_typed(moments, n, l)
}

/// Minimum-norm least-squares solve of the block system. When the event type
/// is the trade sign, each type's transition probabilities sum to one and
/// every `(v, -v)` with `sum v = 0` is a null vector, so the system has rank
/// at most `N + 1`; the condition number is taken over the retained singular
/// values and the rank is reported.
pub fn solve_typed(moments: TypedMoments, n: usize, l: usize) -> Result<Tim2Solution> {
    let a = block_matrix(&moments, n, l);
    let b = block_response(&moments, l);
    let svd = a.svd(true, true);
    let max = svd.singular_values.max();
    let cutoff = RANK_TOL * max;
    let retained: Vec<f64> = svd.singular_values.iter().copied().filter(|s| *s > cutoff).collect();
    let rank = retained.len();
    let cond = match retained.iter().copied().reduce(f64::min) {
        Some(min) => max / min,
        None => f64::INFINITY,
    };
    check_condition(cond, n)?;
    if rank < 2 * n {
        tracing::warn!(
            rank,
            full = 2 * n,
            "two-event system is rank deficient; returning the minimum-norm solution"
        );
    }
    let x = svd
        .solve(&b, cutoff)
        .map_err(|e| Error::Numerical(format!("block kernel solve: {e}")))?;
    let kernels = [
        KernelSet::accumulate(moments.g0[0], &x.as_slice()[..n]),
        KernelSet::accumulate(moments.g0[1], &x.as_slice()[n..]),
    ];
    Ok(Tim2Solution {
        kernels,
        condition_number: cond,
        rank,
        moments,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::impact::tim1::{solve_tim1, ResponseCorrelation};

    /// Moments for two types whose cross-type correlations vanish.
    fn decoupled(n: usize, l: usize, c: [fn(i64) -> f64; 2], s: [Vec<f64>; 2], g0: [f64; 2]) -> TypedMoments {
        let span = n + l + 1;
        let lags: Vec<i64> = (-(n as i64)..=l as i64).collect();
        let block = |a: usize, b: usize| -> Vec<f64> {
            if a == b {
                lags.iter().map(|k| c[a](*k)).collect()
            } else {
                vec![0.0; span]
            }
        };
        TypedMoments {
            prob: [0.5, 0.5],
            s,
            c_tilde: [[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]],
            g0,
            offset: n,
            joint: [[vec![], vec![]], [vec![], vec![]]],
        }
    }

    #[test]
    fn decoupled_blocks_match_single_type_solves() {
        let (n, l) = (3, 5);
        let c: [fn(i64) -> f64; 2] = [
            |k| 0.5f64.powi(k.unsigned_abs() as i32),
            |k| 0.3f64.powi(k.unsigned_abs() as i32),
        ];
        let s = [vec![1.0, 0.4, -0.2, 0.1, 0.05], vec![-0.5, 0.7, 0.3, -0.1, 0.0]];
        let g0 = [4.0, 2.0];
        let sol = solve_typed(decoupled(n, l, c, s.clone(), g0), n, l).unwrap();
        assert_eq!(sol.rank, 2 * n);
        for t in 0..2 {
            let rc = ResponseCorrelation {
                alpha: 0.0,
                n,
                l,
                s: s[t].clone(),
                c: (-(n as i64)..=l as i64).map(c[t]).collect(),
                g0: g0[t],
            };
            let (k, _) = solve_tim1(&rc).unwrap();
            for j in 0..=n {
                assert_relative_eq!(sol.kernels[t].g[j], k.g[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cross_blocks_use_negative_lags() {
        // The lower-right block's first row is Ct(0), Ct(-1), ..., Ct(1-N).
        let (n, l) = (3, 3);
        let m = decoupled(
            n,
            l,
            [|k| k as f64, |k| 10.0 + k as f64],
            [vec![0.0; 3], vec![0.0; 3]],
            [0.0; 2],
        );
        let a = block_matrix(&m, n, l);
        assert_eq!(a[(3, 3)], 10.0);
        assert_eq!(a[(3, 4)], 9.0);
        assert_eq!(a[(3, 5)], 8.0);
        assert_eq!(a[(5, 3)], 12.0);
        assert_eq!(a[(0, 1)], -1.0);
    }
}
