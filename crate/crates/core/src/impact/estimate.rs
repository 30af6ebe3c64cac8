//! Sample moments of a signed event series: sign-volume correlations C(n),
//! responses S(l), the instantaneous impact G(0), and the conditional
//! variants used by the two-event model.

use serde::{Deserialize, Serialize};

use super::SignSeries;
use crate::error::{Error, Result};

fn weights(series: &SignSeries, alpha: f64) -> Vec<f64> {
    series
        .volume
        .iter()
        .map(|v| if alpha == 0.0 { 1.0 } else { v.powf(alpha) })
        .collect()
}

fn ensure_len(t: usize, span: usize) -> Result<()> {
    if t <= span + 10 {
        return Err(Error::InsufficientData(format!(
            "{t} events; at least {} needed for lags up to {span}",
            span + 11
        )));
    }
    Ok(())
}

/// `C(n) = mean_t V_{t+n}^alpha eps_{t+n} eps_t` for each `n` in `lags`.
pub fn estimate_correlation(series: &SignSeries, alpha: f64, lags: &[i64]) -> Result<Vec<f64>> {
    let t = series.len();
    ensure_len(t, lags.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0))?;
    let w = weights(series, alpha);
    let eps = &series.eps;
    Ok(lags
        .iter()
        .map(|&n| {
            let (lo, hi) = (0i64.max(-n) as usize, (t as i64 - n.max(0)) as usize);
            let sum: f64 = (lo..hi)
                .map(|i| {
                    let j = (i as i64 + n) as usize;
                    w[j] * f64::from(eps[j]) * f64::from(eps[i])
                })
                .sum();
            sum / (hi - lo) as f64
        })
        .collect())
}

/// `S(l) = mean_k R_k eps_{k-l+1}` for `l = 1..=max_l`, where `returns[k] = M_{k+1} - M_k`.
pub fn estimate_response(eps: &[i8], returns: &[f64], max_l: usize) -> Result<Vec<f64>> {
    ensure_len(eps.len(), max_l)?;
    Ok((1..=max_l)
        .map(|l| {
            let ks = (l - 1)..returns.len();
            let n = ks.len();
            ks.map(|k| returns[k] * f64::from(eps[k + 1 - l])).sum::<f64>() / n as f64
        })
        .collect())
}

/// Projection of the one-step return on the contemporaneous signed volume:
/// `mean(R_k eps_{k+1} V_{k+1}^a) / mean(V_{k+1}^{2a})`.
pub fn estimate_g0(series: &SignSeries, returns: &[f64], alpha: f64) -> Result<f64> {
    ensure_len(series.len(), 0)?;
    let w = weights(series, alpha);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, r) in returns.iter().enumerate() {
        num += r * f64::from(series.eps[k + 1]) * w[k + 1];
        den += w[k + 1] * w[k + 1];
    }
    if den == 0.0 {
        return Err(Error::Numerical(
            "zero signed-volume variance in G(0) projection".into(),
        ));
    }
    Ok(num / den)
}

/// Second moment of the signed volume process,
/// `Q(d) = mean_t eps_t V_t^a eps_{t+d} V_{t+d}^a` for `d = 0..=max_d`.
/// Equals `C(d)` when `alpha = 0`.
pub fn signed_volume_autocov(series: &SignSeries, alpha: f64, max_d: usize) -> Vec<f64> {
    let w = weights(series, alpha);
    let x: Vec<f64> = series.eps.iter().zip(&w).map(|(e, w)| f64::from(*e) * w).collect();
    (0..=max_d)
        .map(|d| {
            let n = x.len().saturating_sub(d);
            if n == 0 {
                return 0.0;
            }
            (0..n).map(|i| x[i] * x[i + d]).sum::<f64>() / n as f64
        })
        .collect()
}

/// Event-type statistics for the two-event model. Types are indexed 0 for
/// `pi = +1` and 1 for `pi = -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedMoments {
    /// Frequency of each type.
    pub prob: [f64; 2],
    /// `S_pi(l) = E[R_k eps_{k-l+1} | pi_{k-l+1} = pi]`, `l = 1..=L`.
    pub s: [Vec<f64>; 2],
    /// `Ct_{pi,pi'}(n) = E[eps_t 1(pi_t=pi) V_{t+n}^a eps_{t+n} 1(pi_{t+n}=pi')] / P(pi)`,
    /// stored for `n = -N..=L` at offset `N`.
    pub c_tilde: [[Vec<f64>; 2]; 2],
    pub g0: [f64; 2],
    pub offset: usize,
    /// Joint weights `W_{pi,pi'}(d) = E[1(pi_t=pi) 1(pi_{t+d}=pi') eps_t V_t^a eps_{t+d} V_{t+d}^a]`,
    /// `d = 0..=max_d`.
    pub joint: [[Vec<f64>; 2]; 2],
}

impl TypedMoments {
    pub fn c_tilde_at(&self, a: usize, b: usize, n: i64) -> f64 {
        self.c_tilde[a][b][(n + self.offset as i64) as usize]
    }
}

fn type_index(pi: i8) -> usize {
    usize::from(pi < 0)
}

pub fn estimate_typed(
    series: &SignSeries,
    returns: &[f64],
    alpha: f64,
    n: usize,
    l: usize,
    max_d: usize,
) -> Result<TypedMoments> {
    let t = series.len();
    ensure_len(t, n.max(l).max(max_d))?;
    let w = weights(series, alpha);
    let eps: Vec<f64> = series.eps.iter().map(|e| f64::from(*e)).collect();
    let ty: Vec<usize> = series.pi.iter().map(|p| type_index(*p)).collect();

    let mut count = [0usize; 2];
    for &k in &ty {
        count[k] += 1;
    }
    for (k, c) in count.iter().enumerate() {
        if *c < 100 {
            return Err(Error::InsufficientData(format!(
                "event type {} occurs {c} times; at least 100 needed",
                if k == 0 { "+1" } else { "-1" }
            )));
        }
    }
    let prob = [count[0] as f64 / t as f64, count[1] as f64 / t as f64];

    let mut s = [vec![0.0; l], vec![0.0; l]];
    for li in 1..=l {
        let mut acc = [0.0; 2];
        let mut cnt = [0usize; 2];
        for k in (li - 1)..returns.len() {
            let i = k + 1 - li;
            acc[ty[i]] += returns[k] * eps[i];
            cnt[ty[i]] += 1;
        }
        for p in 0..2 {
            s[p][li - 1] = if cnt[p] > 0 { acc[p] / cnt[p] as f64 } else { 0.0 };
        }
    }

    let span = n + l + 1;
    let mut c_tilde = [[vec![0.0; span], vec![0.0; span]], [vec![0.0; span], vec![0.0; span]]];
    for (idx, lag) in (-(n as i64)..=l as i64).enumerate() {
        let (lo, hi) = (0i64.max(-lag) as usize, (t as i64 - lag.max(0)) as usize);
        let mut acc = [[0.0; 2]; 2];
        let mut cnt = [0usize; 2];
        for i in lo..hi {
            let j = (i as i64 + lag) as usize;
            acc[ty[i]][ty[j]] += eps[i] * w[j] * eps[j];
            cnt[ty[i]] += 1;
        }
        for a in 0..2 {
            for b in 0..2 {
                c_tilde[a][b][idx] = if cnt[a] > 0 { acc[a][b] / cnt[a] as f64 } else { 0.0 };
            }
        }
    }

    let mut g0 = [0.0; 2];
    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    for (k, r) in returns.iter().enumerate() {
        let p = ty[k + 1];
        num[p] += r * eps[k + 1] * w[k + 1];
        den[p] += w[k + 1] * w[k + 1];
    }
    for p in 0..2 {
        if den[p] == 0.0 {
            return Err(Error::Numerical(
                "zero signed-volume variance in typed G(0) projection".into(),
            ));
        }
        g0[p] = num[p] / den[p];
    }

    let x: Vec<f64> = eps.iter().zip(&w).map(|(e, w)| e * w).collect();
    let mut joint = [
        [vec![0.0; max_d + 1], vec![0.0; max_d + 1]],
        [vec![0.0; max_d + 1], vec![0.0; max_d + 1]],
    ];
    for d in 0..=max_d {
        let m = t - d;
        let mut acc = [[0.0; 2]; 2];
        for i in 0..m {
            acc[ty[i]][ty[i + d]] += x[i] * x[i + d];
        }
        for a in 0..2 {
            for b in 0..2 {
                joint[a][b][d] = acc[a][b] / m as f64;
            }
        }
    }

    Ok(TypedMoments {
        prob,
        s,
        c_tilde,
        g0,
        offset: n,
        joint,
    })
}
