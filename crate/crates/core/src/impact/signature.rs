//! Signature plots: `D(l) = E[(M_{t+l} - M_t)^2] / l`.

use serde::{Deserialize, Serialize};

use super::KernelSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignaturePlot {
    pub lags: Vec<usize>,
    pub d_emp: Vec<f64>,
    /// Batch-means standard error of each empirical value.
    pub d_emp_se: Vec<f64>,
    pub d_model: Vec<f64>,
    pub d_const: f64,
}

impl SignaturePlot {
    /// Lags where the model lies outside `d_emp ± width · se`.
    pub fn violations(&self, width: f64) -> Vec<usize> {
        self.lags
            .iter()
            .enumerate()
            .filter(|(i, _)| (self.d_model[*i] - self.d_emp[*i]).abs() > width * self.d_emp_se[*i])
            .map(|(_, l)| *l)
            .collect()
    }

    pub fn sum_squared_deviation(&self) -> f64 {
        self.d_emp.iter().zip(&self.d_model).map(|(e, m)| (e - m).powi(2)).sum()
    }
}

/// `D(l) = mean_t (M_{t+l} - M_t)^2 / l` for `l = 1..=l_max`.
pub fn empirical_signature(mids: &[f64], l_max: usize) -> Result<Vec<f64>> {
    Ok(empirical_signature_se(mids, l_max, 1)?.0)
}

/// Empirical signature with standard errors from `batches` contiguous batch means.
pub fn empirical_signature_se(mids: &[f64], l_max: usize, batches: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if mids.len() <= l_max + 1 {
        return Err(Error::InsufficientData(format!(
            "{} mid-prices; signature to lag {l_max} needs at least {}",
            mids.len(),
            l_max + 2
        )));
    }
    let batches = batches.max(1);
    let mut d = Vec::with_capacity(l_max);
    let mut se = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let sq: Vec<f64> = mids.windows(l + 1).map(|w| (w[l] - w[0]).powi(2)).collect();
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        d.push(mean / l as f64);
        if batches < 2 || sq.len() < batches {
            se.push(f64::NAN);
            continue;
        }
        let size = sq.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| sq[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
            .collect();
        let m = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
        se.push((var / batches as f64).sqrt() / l as f64);
    }
    Ok((d, se))
}

/// Weights of the trades after `t` and at or before `t` in `M_{t+l} - M_t`:
/// `A(u) = G(l-u)` for `u = 1..=l`, `B(v) = G(l+v) - G(v)` for `v = 0..N`,
/// with the kernel held at `G(N)` beyond lag `N`.
fn weights(g: &KernelSet, l: usize) -> (Vec<f64>, Vec<f64>) {
    let a = (1..=l).map(|u| g.at(l - u)).collect();
    let b = (0..g.n()).map(|v| g.at(l + v) - g.at(v)).collect();
    (a, b)
}

fn required_lags(n: usize, l_max: usize) -> usize {
    l_max + n
}

/// Model signature of the single-event kernel without the constant:
/// `l D(l) = Q(0)(sum A^2 + sum B^2) + 2 sum_{pairs} w w' Q(gap)`, where
/// `q[d] = E[eps_t V_t^a eps_{t+d} V_{t+d}^a]`.
pub fn model_signature_tim1(g: &KernelSet, q: &[f64], d_const: f64, l_max: usize) -> Result<Vec<f64>> {
    let need = required_lags(g.n(), l_max);
    if q.len() < need {
        return Err(Error::InvalidInput(format!(
            "signature to lag {l_max} with N = {} needs correlations up to lag {}",
            g.n(),
            need - 1
        )));
    }
    Ok((1..=l_max)
        .map(|l| {
            let (a, b) = weights(g, l);
            let mut total = q[0] * (a.iter().map(|x| x * x).sum::<f64>() + b.iter().map(|x| x * x).sum::<f64>());
            let mut cross = 0.0;
            for u in 0..a.len() {
                for u2 in (u + 1)..a.len() {
                    cross += a[u] * a[u2] * q[u2 - u];
                }
            }
            for v in 0..b.len() {
                for v2 in (v + 1)..b.len() {
                    cross += b[v] * b[v2] * q[v2 - v];
                }
            }
            for (u, au) in a.iter().enumerate() {
                for (v, bv) in b.iter().enumerate() {
                    cross += au * bv * q[u + 1 + v];
                }
            }
            total += 2.0 * cross;
            total / l as f64 + d_const
        })
        .collect())
}

/// Two-event analogue: `joint[a][b][d]` weights a pair whose earlier event has
/// type `a` and later event (gap `d`) type `b`.
pub fn model_signature_tim2(
    kernels: &[KernelSet; 2],
    joint: &[[Vec<f64>; 2]; 2],
    d_const: f64,
    l_max: usize,
) -> Result<Vec<f64>> {
    let n = kernels[0].n();
    if kernels[1].n() != n {
        return Err(Error::InvalidInput("event-type kernels differ in length".into()));
    }
    let need = required_lags(n, l_max);
    if joint.iter().flatten().any(|w| w.len() < need) {
        return Err(Error::InvalidInput(format!(
            "signature to lag {l_max} with N = {n} needs joint weights up to lag {}",
            need - 1
        )));
    }
    Ok((1..=l_max)
        .map(|l| {
            let w = [weights(&kernels[0], l), weights(&kernels[1], l)];
            let mut total = 0.0;
            for t in 0..2 {
                let (a, b) = &w[t];
                total += joint[t][t][0] * (a.iter().map(|x| x * x).sum::<f64>() + b.iter().map(|x| x * x).sum::<f64>());
            }
            let mut cross = 0.0;
            for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let jw = &joint[p][q];
                let (ap, bp) = &w[p];
                let (aq, bq) = &w[q];
                // Future trades: u earlier than u2.
                for u in 0..ap.len() {
                    for u2 in (u + 1)..aq.len() {
                        cross += ap[u] * aq[u2] * jw[u2 - u];
                    }
                }
                // Past trades: v2 > v is earlier.
                for v in 0..bq.len() {
                    for v2 in (v + 1)..bp.len() {
                        cross += bp[v2] * bq[v] * jw[v2 - v];
                    }
                }
                // A past trade is always earlier than a future one.
                for (v, bv) in bp.iter().enumerate() {
                    for (u, au) in aq.iter().enumerate() {
                        cross += bv * au * jw[u + 1 + v];
                    }
                }
            }
            total += 2.0 * cross;
            total / l as f64 + d_const
        })
        .collect())
}

/// Least-squares constant offset between the empirical plot and a model plot without constant.
pub fn fit_d_const(d_emp: &[f64], d_model0: &[f64]) -> f64 {
    let n = d_emp.len().min(d_model0.len());
    if n == 0 {
        return 0.0;
    }
    d_emp.iter().zip(d_model0).map(|(e, m)| e - m).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn kernel(g: Vec<f64>) -> KernelSet {
        let delta: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
        KernelSet::accumulate(g[0], &delta)
    }

    fn delta_q(len: usize) -> Vec<f64> {
        (0..len).map(|d| f64::from(d == 0)).collect()
    }

    #[test]
    fn alternating_and_constant_mids() {
        let m: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let d = empirical_signature(&m, 2).unwrap();
        assert_eq!(d, vec![1.0, 0.0]);
        assert!(empirical_signature(&[5.0; 50], 5).unwrap().iter().all(|v| *v == 0.0));
        assert!(empirical_signature(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn random_walk_is_flat() {
        let sigma = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut m = vec![0.0];
        for _ in 0..200_000 {
            let step = if rng.random_bool(0.5) { sigma } else { -sigma };
            m.push(m.last().unwrap() + step);
        }
        let (d, se) = empirical_signature_se(&m, 10, 50).unwrap();
        for (v, s) in d.iter().zip(&se) {
            assert!((v - sigma * sigma).abs() <= 4.0 * s + 1e-12, "{v} +- {s}");
        }
    }

    #[test]
    fn model_examples() {
        let zero = kernel(vec![0.0; 11]);
        let d = model_signature_tim1(&zero, &delta_q(30), 0.7, 10).unwrap();
        assert!(d.iter().all(|v| *v == 0.7));
        let flat = kernel(vec![3.0; 11]);
        let d = model_signature_tim1(&flat, &delta_q(30), 0.5, 10).unwrap();
        assert!(d.iter().all(|v| (v - 9.5).abs() < 1e-12));
        assert!(model_signature_tim1(&flat, &delta_q(5), 0.0, 10).is_err());
    }

    /// Oracle: simulate the propagator with i.i.d. signs and compare moments
    /// exactly by enumerating the variance of a linear form of independent signs.
    #[test]
    fn iid_model_matches_direct_variance() {
        let g = vec![5.0, 4.0, 3.5, 3.2, 3.0];
        let k = kernel(g.clone());
        let gat = |j: usize| g[j.min(4)];
        let d = model_signature_tim1(&k, &delta_q(20), 0.0, 6).unwrap();
        for l in 1..=6usize {
            // M_{t+l} - M_t = sum over trades s of coefficient c_s eps_s; variance = sum c_s^2.
            let mut var = 0.0;
            for s in -40i64..=l as i64 {
                let c = if s >= 1 {
                    gat((l as i64 - s) as usize)
                } else {
                    gat((l as i64 - s) as usize) - gat((-s) as usize)
                };
                var += c * c;
            }
            assert_relative_eq!(d[l - 1], var / l as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn correlated_model_matches_simulation() {
        // AR sign process with Q(d) = rho^d; compare against a long simulation.
        let rho: f64 = 0.5;
        let p_flip = (1.0 - rho) / 2.0;
        let g = vec![4.0, 2.5, 1.8, 1.5, 1.4];
        let k = kernel(g.clone());
        let q: Vec<f64> = (0..20).map(|d| rho.powi(d)).collect();
        let d = model_signature_tim1(&k, &q, 0.0, 5).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 400_000;
        let mut e = 1.0;
        let eps: Vec<f64> = (0..t)
            .map(|_| {
                if rng.random_bool(p_flip) {
                    e = -e;
                }
                e
            })
            .collect();
        let gat = |j: usize| g[j.min(4)];
        // M_k = sum_{k' <= k} G(k - k') eps_k', with the permanent part as a running sum.
        let mut m = vec![0.0; t];
        let mut run = 0.0;
        for i in 0..t {
            run += eps[i];
            let mut v = gat(4) * run;
            for j in 0..4 {
                if i >= j {
                    v += (gat(j) - gat(4)) * eps[i - j];
                }
            }
            m[i] = v;
        }
        let (emp, se) = empirical_signature_se(&m[100..], 5, 40).unwrap();
        for l in 0..5 {
            assert!(
                (emp[l] - d[l]).abs() < 4.0 * se[l],
                "lag {}: {} vs {} (se {})",
                l + 1,
                emp[l],
                d[l],
                se[l]
            );
        }
    }

    #[test]
    fn two_event_reduces_to_single() {
        let g = kernel(vec![6.0, 4.0, 3.0, 2.6, 2.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let joint: [[Vec<f64>; 2]; 2] =
            std::array::from_fn(|_| std::array::from_fn(|_| (0..20).map(|_| rng.random_range(-0.2..0.5)).collect()));
        let q: Vec<f64> = (0..20)
            .map(|d| {
                (0..2)
                    .flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, b)| joint[a][b][d])
                    .sum()
            })
            .collect();
        let mut joint = joint;
        joint[0][1][0] = 0.0;
        joint[1][0][0] = 0.0;
        let q0 = joint[0][0][0] + joint[1][1][0];
        let mut q = q;
        q[0] = q0;
        let one = model_signature_tim1(&g, &q, 0.3, 10).unwrap();
        let two = model_signature_tim2(&[g.clone(), g.clone()], &joint, 0.3, 10).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!((a - b).abs() < 1e-9);
        }
        let zero = kernel(vec![0.0; 5]);
        let d = model_signature_tim2(&[zero.clone(), zero], &joint, 1.25, 4).unwrap();
        assert!(d.iter().all(|v| *v == 1.25));
    }

    proptest! {
        #[test]
        fn d_const_fit_centres_residuals(e in prop::collection::vec(0.0f64..100.0, 1..12), shift in -5.0f64..5.0) {
            let m: Vec<f64> = e.iter().map(|v| v * 0.9 + 1.0).collect();
            let c = fit_d_const(&e, &m);
            let resid: f64 = e.iter().zip(&m).map(|(a, b)| a - b - c).sum();
            prop_assert!(resid.abs() < 1e-9);
            let shifted: Vec<f64> = e.iter().map(|v| v + shift).collect();
            prop_assert!((fit_d_const(&shifted, &m) - c - shift).abs() < 1e-9);
        }

        #[test]
        fn empirical_signature_is_nonnegative(m in prop::collection::vec(-1e3f64..1e3, 12..60)) {
            let d = empirical_signature(&m, 10).unwrap();
            prop_assert!(d.iter().all(|v| *v >= 0.0));
        }
    }
}
