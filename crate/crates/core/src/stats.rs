//! Hypothesis tests: one-way ANOVA, Kruskal-Wallis, two-sample
//! Kolmogorov-Smirnov, Welch's t, and the adjacent-period stationarity report.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};
use crate::output::{csv_writer, fmt_f64, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom where the reference distribution has them.
    pub df: Option<(f64, f64)>,
    pub sizes: Vec<usize>,
    /// Set when the statistic is undefined or infinite because of zero variance.
    pub degenerate: bool,
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn check_groups(groups: &[Vec<f64>], min_size: usize) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < min_size) {
        return Err(Error::InvalidInput(format!(
            "group {i} has {} observations; at least {min_size} required",
            g.len()
        )));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    Ok(())
}

/// One-way ANOVA with degrees of freedom `(W - 1, n - W)`.
pub fn anova_f(groups: &[Vec<f64>]) -> Result<TestResult> {
    check_groups(groups, 2)?;
    let w = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ss_b: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ss_w: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    let (d1, d2) = ((w - 1) as f64, (n - w) as f64);
    let (ms_b, ms_w) = (ss_b / d1, ss_w / d2);
    let sizes = groups.iter().map(Vec::len).collect();
    let scale = 1e-14 * (1.0 + grand.abs()).powi(2);
    if ms_w <= scale {
        let between = ms_b > scale;
        return Ok(TestResult {
            statistic: if between { f64::INFINITY } else { 0.0 },
            p_value: if between { 0.0 } else { 1.0 },
            df: Some((d1, d2)),
            sizes,
            degenerate: true,
        });
    }
    let f = ms_b / ms_w;
    let dist = FisherSnedecor::new(d1, d2).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TestResult {
        statistic: f,
        p_value: clamp_p(dist.sf(f)),
        df: Some((d1, d2)),
        sizes,
        degenerate: false,
    })
}

/// Mid-ranks (1-based) of `values`, plus the tie sum `sum (t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H with mid-ranks and the standard tie correction; p from chi-square(W - 1).
pub fn kruskal_h(groups: &[Vec<f64>]) -> Result<TestResult> {
    check_groups(groups, 1)?;
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "Kruskal-Wallis needs at least 3 observations, got {n}"
        )));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let nf = n as f64;
    let df = (groups.len() - 1) as f64;
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            df: Some((df, 0.0)),
            sizes,
            degenerate: true,
        });
    }
    let mut start = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[start..start + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        start += g.len();
    }
    let h = ((12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0)) / correction).max(0.0);
    let dist = ChiSquared::new(df).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TestResult {
        statistic: h,
        p_value: clamp_p(dist.sf(h)),
        df: Some((df, 0.0)),
        sizes,
        degenerate: false,
    })
}

/// Asymptotic Kolmogorov distribution tail `2 sum (-1)^(i-1) exp(-2 i^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for i in 1..=100_000u32 {
        let term = (-2.0 * f64::from(i).powi(2) * x * x).exp();
        sum += if i % 2 == 1 { term } else { -term };
        if term < 1e-10 {
            break;
        }
    }
    clamp_p(2.0 * sum)
}

/// Two-sample KS: statistic `sqrt(mn/(m+n)) sup|F_m - G_n|`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("KS test needs non-empty samples".into()));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (m, n) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < m && j < n {
        let v = a[i].min(b[j]);
        while i < m && a[i] <= v {
            i += 1;
        }
        while j < n && b[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let scale = ((m * n) as f64 / (m + n) as f64).sqrt();
    let d = scale * sup;
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(d),
        df: None,
        sizes: vec![m, n],
        degenerate: false,
    })
}

/// Welch's unequal-variance t-test with Satterthwaite degrees of freedom; two-tailed p.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidInput(
            "Welch t-test needs at least 2 observations per sample".into(),
        ));
    }
    let (m, n) = (x.len() as f64, y.len() as f64);
    let (a, b) = (sample_var(x) / m, sample_var(y) / n);
    let diff = mean(x) - mean(y);
    let sizes = vec![x.len(), y.len()];
    if a + b == 0.0 {
        return Ok(TestResult {
            statistic: if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            },
            p_value: if diff == 0.0 { 1.0 } else { 0.0 },
            df: None,
            sizes,
            degenerate: true,
        });
    }
    let t = diff / (a + b).sqrt();
    let df = (a + b).powi(2) / (a * a / (m - 1.0) + b * b / (n - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TestResult {
        statistic: t,
        p_value: clamp_p(2.0 * dist.sf(t.abs())),
        df: Some((df, 0.0)),
        sizes,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodPairTest {
    pub period_pair: String,
    pub anova: TestResult,
    pub kruskal: TestResult,
}

/// ANOVA and Kruskal-Wallis on each pair of adjacent periods. Pairs where a
/// period has fewer than 2 observations are skipped with a warning.
pub fn stationarity_by_period<P: Ord + Display + Clone>(obs: &[(String, P, f64)]) -> Result<Vec<PeriodPairTest>> {
    let mut by_period: BTreeMap<P, Vec<f64>> = BTreeMap::new();
    for (_, p, v) in obs {
        by_period.entry(p.clone()).or_default().push(*v);
    }
    if by_period.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "stationarity test needs at least 2 periods, got {}",
            by_period.len()
        )));
    }
    let periods: Vec<(&P, &Vec<f64>)> = by_period.iter().collect();
    let mut out = Vec::new();
    for pair in periods.windows(2) {
        let ((p1, a), (p2, b)) = (pair[0], pair[1]);
        let label = format!("{p1}/{p2}");
        if a.len() < 2 || b.len() < 2 {
            tracing::warn!(pair = %label, "period pair skipped: fewer than 2 observations");
            continue;
        }
        let groups = [a.clone(), b.clone()];
        out.push(PeriodPairTest {
            period_pair: label,
            anova: anova_f(&groups)?,
            kruskal: kruskal_h(&groups)?,
        });
    }
    Ok(out)
}

pub fn write_stationarity<W: Write>(sink: W, rows: &[PeriodPairTest], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(["period_pair", "anova_F", "anova_p", "H", "H_p"])?;
    for r in rows {
        w.write_record([
            r.period_pair.clone(),
            fmt_f64(r.anova.statistic),
            fmt_f64(r.anova.p_value),
            fmt_f64(r.kruskal.statistic),
            fmt_f64(r.kruskal.p_value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("stationarity", e))?;
    Ok(())
}
