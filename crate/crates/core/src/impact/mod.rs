//! Transient impact kernels estimated from signed trade sequences, and the
//! signature plots that test them.

pub mod estimate;
pub mod signature;
pub mod tim1;
pub mod tim2;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use estimate::{estimate_correlation, estimate_g0, estimate_response, signed_volume_autocov, TypedMoments};
pub use signature::{
    empirical_signature, empirical_signature_se, fit_d_const, model_signature_tim1, model_signature_tim2, SignaturePlot,
};
pub use tim1::{solve_tim1, ResponseCorrelation, MAX_CONDITION};
pub use tim2::{solve_tim2, Tim2Solution};

use crate::classify::{by_cusip, SignedTrade};
use crate::error::{Error, Result};
use crate::output::{csv_writer, fmt_f64, Provenance};
use crate::spread::SpreadObservation;

/// Where the mid-prices of a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MidSource {
    /// Trade price shifted by half the bond's mean realized spread against the trade sign.
    SpreadAdjusted,
    /// Raw trade prices; the bond had no spread observations.
    TradePrice,
    /// Supplied directly (simulation or tests).
    Synthetic,
}

/// Ordered, signed events of one bond.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSeries {
    pub cusip: String,
    pub eps: Vec<i8>,
    pub volume: Vec<f64>,
    /// Event type; equal to the sign for the buy/sell typing.
    pub pi: Vec<i8>,
    pub mid: Vec<f64>,
    pub mid_source: MidSource,
}

impl SignSeries {
    pub fn new(cusip: impl Into<String>, eps: Vec<i8>, volume: Vec<f64>, mid: Vec<f64>) -> Result<Self> {
        let cusip = cusip.into();
        if eps.len() != volume.len() || eps.len() != mid.len() {
            return Err(Error::InvalidInput(format!(
                "series {cusip}: sign, volume and mid lengths differ"
            )));
        }
        if let Some(k) = eps.iter().position(|e| *e != 1 && *e != -1) {
            return Err(Error::InvalidInput(format!(
                "series {cusip}: event {k} has sign {}",
                eps[k]
            )));
        }
        if let Some(k) = mid.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "series {cusip}: event {k} has non-positive mid {}",
                mid[k]
            )));
        }
        Ok(SignSeries {
            cusip,
            pi: eps.clone(),
            eps,
            volume,
            mid,
            mid_source: MidSource::Synthetic,
        })
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Mid-price path in log basis points relative to the first event.
    pub fn log_mid_bp(&self) -> Vec<f64> {
        let Some(first) = self.mid.first() else {
            return Vec::new();
        };
        let base = first.ln();
        self.mid.iter().map(|m| 1e4 * (m.ln() - base)).collect()
    }

    /// `R_k = 1e4 ln(M_{k+1} / M_k)`, one entry per consecutive pair.
    pub fn returns_bp(&self) -> Vec<f64> {
        self.mid.windows(2).map(|w| 1e4 * (w[1] / w[0]).ln()).collect()
    }
}

/// One bond's signed series. Zero-sign trades (dealer and RPT legs) are dropped;
/// mids are trade prices moved half the bond's mean realized spread against the sign.
pub fn build_series(trades: &[SignedTrade], spreads: &[SpreadObservation]) -> Result<SignSeries> {
    let Some(first) = trades.first() else {
        return Err(Error::InsufficientData("empty trade sequence".into()));
    };
    let cusip = first.trade.cusip.clone();
    let half = if spreads.is_empty() {
        None
    } else {
        Some(spreads.iter().map(|o| o.psi).sum::<f64>() / spreads.len() as f64 / 2.0)
    };
    let events: Vec<&SignedTrade> = trades.iter().filter(|t| t.epsilon != 0).collect();
    let eps: Vec<i8> = events.iter().map(|t| t.epsilon).collect();
    let volume = events.iter().map(|t| t.trade.volume).collect();
    let mid = events
        .iter()
        .map(|t| t.trade.price - half.unwrap_or(0.0) * f64::from(t.epsilon))
        .collect();
    let mut series = SignSeries::new(cusip, eps, volume, mid)?;
    series.mid_source = if half.is_some() {
        MidSource::SpreadAdjusted
    } else {
        MidSource::TradePrice
    };
    Ok(series)
}

/// The `k` cusips with the most signed events, ties broken by cusip.
pub fn top_cusips(trades: &[SignedTrade], k: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in trades.iter().filter(|t| t.epsilon != 0) {
        *counts.entry(t.trade.cusip.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(c, _)| c.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpactModel {
    Tim1,
    Tim2,
}

impl ImpactModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ImpactModel::Tim1 => "tim1",
            ImpactModel::Tim2 => "tim2",
        }
    }

    fn type_labels(self) -> &'static [&'static str] {
        match self {
            ImpactModel::Tim1 => &["all"],
            ImpactModel::Tim2 => &["+1", "-1"],
        }
    }
}

impl fmt::Display for ImpactModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImpactModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tim1" => Ok(ImpactModel::Tim1),
            "tim2" => Ok(ImpactModel::Tim2),
            other => Err(Error::Config(format!(
                "unknown impact model `{other}` (expected tim1 or tim2)"
            ))),
        }
    }
}

/// Kernel of one event type: `G(0..=N)` with `G(j+1) = G(j) + ΔG(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub g0: f64,
    pub delta_g: Vec<f64>,
    pub g: Vec<f64>,
}

impl KernelSet {
    pub fn accumulate(g0: f64, delta_g: &[f64]) -> Self {
        let mut g = Vec::with_capacity(delta_g.len() + 1);
        g.push(g0);
        for d in delta_g {
            g.push(g.last().unwrap() + d);
        }
        KernelSet {
            g0,
            delta_g: delta_g.to_vec(),
            g,
        }
    }

    pub fn n(&self) -> usize {
        self.delta_g.len()
    }

    /// `G(j)`, held at `G(N)` beyond the estimated range.
    pub fn at(&self, j: usize) -> f64 {
        self.g[j.min(self.g.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactConfig {
    pub model: ImpactModel,
    pub alpha: f64,
    pub n: usize,
    pub l: usize,
    /// Largest signature-plot lag.
    pub l_max: usize,
    /// Batches for the signature standard errors.
    pub batches: usize,
    /// Bonds analysed, by signed-event count.
    pub top_k: usize,
    /// Events a bond needs to enter the aggregate kernel.
    pub min_events: usize,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        ImpactConfig {
            model: ImpactModel::Tim1,
            alpha: 0.0,
            n: 10,
            l: 10,
            l_max: 10,
            batches: 20,
            top_k: 200,
            min_events: 1000,
        }
    }
}

impl ImpactConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "impact alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.n == 0 || self.l < self.n {
            return Err(Error::Config(format!(
                "impact needs 1 <= N <= L (N = {}, L = {})",
                self.n, self.l
            )));
        }
        if self.l_max == 0 {
            return Err(Error::Config("signature l_max must be positive".into()));
        }
        Ok(())
    }
}

/// Estimated kernels for one bond or an aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactKernel {
    pub cusip: String,
    pub model: ImpactModel,
    pub alpha: f64,
    pub n: usize,
    pub l: usize,
    /// One kernel per event type label (`all`, or `+1` and `-1`).
    pub kernels: BTreeMap<String, KernelSet>,
    pub condition_number: f64,
    pub rank: Option<usize>,
    pub events: usize,
    pub mid_source: MidSource,
}

impl ImpactKernel {
    pub fn kernel(&self, label: &str) -> Option<&KernelSet> {
        self.kernels.get(label)
    }

    pub fn to_json(&self) -> Value {
        let g: serde_json::Map<String, Value> = self.kernels.iter().map(|(k, v)| (k.clone(), json!(v.g))).collect();
        let g0 = match self.model {
            ImpactModel::Tim1 => json!(self.kernels.get("all").map(|k| k.g0)),
            ImpactModel::Tim2 => Value::Object(self.kernels.iter().map(|(k, v)| (k.clone(), json!(v.g0))).collect()),
        };
        let mut out = json!({
            "cusip": self.cusip,
            "model": self.model.as_str(),
            "alpha": self.alpha,
            "N": self.n,
            "L": self.l,
            "g": g,
            "g0": g0,
            "condition_number": self.condition_number,
            "events": self.events,
            "mid_source": self.mid_source,
        });
        if let Some(r) = self.rank {
            out["rank"] = json!(r);
        }
        out
    }
}

/// Kernel and signature plot for one bond.
#[derive(Debug, Clone, PartialEq)]
pub struct BondImpact {
    pub kernel: ImpactKernel,
    pub signature: SignaturePlot,
}

fn fitted_plot(d_emp: Vec<f64>, se: Vec<f64>, model0: Vec<f64>) -> SignaturePlot {
    let d_const = fit_d_const(&d_emp, &model0);
    SignaturePlot {
        lags: (1..=d_emp.len()).collect(),
        d_model: model0.iter().map(|m| m + d_const).collect(),
        d_emp,
        d_emp_se: se,
        d_const,
    }
}

/// Fits the configured model to one series and evaluates its signature plot.
pub fn estimate_bond(series: &SignSeries, config: &ImpactConfig) -> Result<BondImpact> {
    config.validate()?;
    let max_d = config.l_max + config.n;
    let (d_emp, se) = empirical_signature_se(&series.log_mid_bp(), config.l_max, config.batches)?;
    let mut kernels = BTreeMap::new();
    let (kernel, signature) = match config.model {
        ImpactModel::Tim1 => {
            let rc = ResponseCorrelation::estimate(series, config.alpha, config.n, config.l)?;
            let (k, cond) = solve_tim1(&rc)?;
            let q = signed_volume_autocov(series, config.alpha, max_d);
            let model0 = model_signature_tim1(&k, &q, 0.0, config.l_max)?;
            kernels.insert("all".to_string(), k);
            ((cond, None), fitted_plot(d_emp, se, model0))
        }
        ImpactModel::Tim2 => {
            let sol = solve_tim2(series, config.alpha, config.n, config.l, max_d)?;
            let model0 = model_signature_tim2(&sol.kernels, &sol.moments.joint, 0.0, config.l_max)?;
            let [plus, minus] = sol.kernels;
            kernels.insert("+1".to_string(), plus);
            kernels.insert("-1".to_string(), minus);
            ((sol.condition_number, Some(sol.rank)), fitted_plot(d_emp, se, model0))
        }
    };
    Ok(BondImpact {
        kernel: ImpactKernel {
            cusip: series.cusip.clone(),
            model: config.model,
            alpha: config.alpha,
            n: config.n,
            l: config.l,
            kernels,
            condition_number: kernel.0,
            rank: kernel.1,
            events: series.len(),
            mid_source: series.mid_source,
        },
        signature,
    })
}

/// Per-bond estimation over the top cusips; bonds that fail are logged and skipped.
pub fn estimate_bonds(
    trades: &[SignedTrade],
    spreads: &[SpreadObservation],
    config: &ImpactConfig,
) -> Result<Vec<BondImpact>> {
    config.validate()?;
    let chosen = top_cusips(trades, config.top_k);
    let mut spread_map: HashMap<&str, Vec<SpreadObservation>> = HashMap::new();
    for o in spreads {
        spread_map.entry(o.cusip.as_str()).or_default().push(o.clone());
    }
    let groups: HashMap<&str, &[SignedTrade]> = by_cusip(trades, |t| t.trade.cusip.as_str())
        .into_iter()
        .map(|g| (g[0].trade.cusip.as_str(), g))
        .collect();
    let results: Vec<Option<BondImpact>> = chosen
        .par_iter()
        .map(|cusip| {
            let empty = Vec::new();
            let obs = spread_map.get(cusip.as_str()).unwrap_or(&empty);
            let outcome = groups
                .get(cusip.as_str())
                .ok_or_else(|| Error::InsufficientData(format!("no trades for {cusip}")))
                .and_then(|g| build_series(g, obs))
                .and_then(|s| estimate_bond(&s, config));
            match outcome {
                Ok(b) => Some(b),
                Err(e) => {
                    tracing::warn!(cusip = %cusip, error = %e, "impact estimation skipped");
                    None
                }
            }
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

/// Equal-weight mean of the kernels of every bond with at least `min_events` events.
pub fn aggregate(kernels: &[ImpactKernel], min_events: usize) -> Result<ImpactKernel> {
    let eligible: Vec<&ImpactKernel> = kernels.iter().filter(|k| k.events >= min_events).collect();
    let Some(first) = eligible.first() else {
        return Err(Error::InsufficientData(format!(
            "no bond has at least {min_events} events"
        )));
    };
    if eligible
        .iter()
        .any(|k| k.model != first.model || k.n != first.n || k.l != first.l || k.alpha != first.alpha)
    {
        return Err(Error::InvalidInput(
            "cannot aggregate kernels with different model settings".into(),
        ));
    }
    let m = eligible.len() as f64;
    let mut out = BTreeMap::new();
    for label in first.model.type_labels() {
        let mut g0 = 0.0;
        let mut delta = vec![0.0; first.n];
        for k in &eligible {
            let ks = &k.kernels[*label];
            g0 += ks.g0 / m;
            for (d, v) in delta.iter_mut().zip(&ks.delta_g) {
                *d += v / m;
            }
        }
        out.insert(label.to_string(), KernelSet::accumulate(g0, &delta));
    }
    let same_source = eligible.iter().all(|k| k.mid_source == first.mid_source);
    Ok(ImpactKernel {
        cusip: "aggregate".into(),
        model: first.model,
        alpha: first.alpha,
        n: first.n,
        l: first.l,
        kernels: out,
        condition_number: eligible.iter().map(|k| k.condition_number).fold(0.0, f64::max),
        rank: None,
        events: eligible.iter().map(|k| k.events).sum(),
        mid_source: if same_source {
            first.mid_source
        } else {
            MidSource::TradePrice
        },
    })
}

pub fn write_signature<W: Write>(sink: W, plot: &SignaturePlot, meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(["lag", "d_emp", "d_model"])?;
    for (i, l) in plot.lags.iter().enumerate() {
        w.write_record([l.to_string(), fmt_f64(plot.d_emp[i]), fmt_f64(plot.d_model[i])])?;
    }
    w.flush().map_err(|e| Error::io("signature", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::tape::{CleanTrade, Leg};

    fn signed(cusip: &str, k: usize, price: f64, eps: i8) -> SignedTrade {
        SignedTrade {
            trade: CleanTrade {
                record_id: format!("{cusip}-{k}"),
                cusip: cusip.into(),
                k,
                time: NaiveDate::from_ymd_opt(2015, 3, 2)
                    .unwrap()
                    .and_hms_opt(9, 0, k as u32)
                    .unwrap(),
                price,
                volume: 10_000.0,
                leg: match eps {
                    1 => Leg::CustomerBuy,
                    -1 => Leg::CustomerSell,
                    _ => Leg::DealerDealer,
                },
            },
            epsilon: eps,
            is_rpt: false,
        }
    }

    #[test]
    fn series_drops_zero_signs_and_flags_source() {
        let trades = vec![
            signed("A", 0, 100.0, 1),
            signed("A", 1, 99.0, 0),
            signed("A", 2, 99.5, -1),
        ];
        let s = build_series(&trades, &[]).unwrap();
        assert_eq!(s.eps, vec![1, -1]);
        assert_eq!(s.mid, vec![100.0, 99.5]);
        assert_eq!(s.mid_source, MidSource::TradePrice);
        let obs = SpreadObservation {
            cusip: "A".into(),
            k: 2,
            t: trades[2].trade.time,
            psi: 0.5,
            mid: 100.0,
            s_bp: 50.0,
        };
        let s = build_series(&trades, &[obs]).unwrap();
        assert_eq!(s.mid, vec![99.75, 99.75]);
        assert_eq!(s.mid_source, MidSource::SpreadAdjusted);
    }

    #[test]
    fn top_cusips_by_event_count() {
        let mut t = vec![signed("B", 0, 100.0, 1), signed("B", 1, 100.0, -1)];
        t.extend([
            signed("A", 0, 100.0, 1),
            signed("A", 1, 100.0, 1),
            signed("A", 2, 100.0, 0),
        ]);
        t.extend([
            signed("C", 0, 100.0, 1),
            signed("C", 1, 100.0, 0),
            signed("C", 2, 100.0, 0),
        ]);
        assert_eq!(top_cusips(&t, 2), vec!["A", "B"]);
        assert_eq!(top_cusips(&t, 5), vec!["A", "B", "C"]);
    }

    #[test]
    fn returns_are_scale_free() {
        let s = SignSeries::new("X", vec![1, -1, 1], vec![1.0; 3], vec![100.0, 101.0, 99.0]).unwrap();
        let scaled = SignSeries::new("X", vec![1, -1, 1], vec![1.0; 3], vec![250.0, 252.5, 247.5]).unwrap();
        for (a, b) in s.returns_bp().iter().zip(scaled.returns_bp()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((s.returns_bp()[0] - 1e4 * (1.01f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn invalid_series() {
        assert!(SignSeries::new("X", vec![1, 0], vec![1.0; 2], vec![1.0; 2]).is_err());
        assert!(SignSeries::new("X", vec![1, 1], vec![1.0; 2], vec![1.0, -1.0]).is_err());
        assert!(SignSeries::new("X", vec![1], vec![1.0; 2], vec![1.0; 2]).is_err());
    }

    fn kernel(cusip: &str, g0: f64, delta: &[f64], events: usize) -> ImpactKernel {
        ImpactKernel {
            cusip: cusip.into(),
            model: ImpactModel::Tim1,
            alpha: 0.0,
            n: delta.len(),
            l: delta.len(),
            kernels: BTreeMap::from([("all".to_string(), KernelSet::accumulate(g0, delta))]),
            condition_number: 2.0,
            rank: None,
            events,
            mid_source: MidSource::Synthetic,
        }
    }

    #[test]
    fn aggregation_is_equal_weight_over_eligible_bonds() {
        let ks = vec![
            kernel("A", 10.0, &[-2.0, -1.0], 5000),
            kernel("B", 20.0, &[-4.0, 0.0], 1000),
            kernel("C", 99.0, &[9.0, 9.0], 999),
        ];
        let agg = aggregate(&ks, 1000).unwrap();
        let all = agg.kernel("all").unwrap();
        assert_eq!(all.g, vec![15.0, 12.0, 11.5]);
        assert_eq!(agg.events, 6000);
        assert_eq!(agg.to_json()["cusip"], "aggregate");
        assert!(aggregate(&ks, 10_000).is_err());
    }

    #[test]
    fn kernel_json_shape() {
        let k = kernel("A", 10.0, &[-2.0], 1500);
        let j = k.to_json();
        assert_eq!(j["model"], "tim1");
        assert_eq!(j["N"], 1);
        assert_eq!(j["g"]["all"], json!([10.0, 8.0]));
        assert_eq!(j["g0"], 10.0);
        assert_eq!(j["mid_source"], "synthetic");
    }

    #[test]
    fn plateau_extension() {
        let k = KernelSet::accumulate(5.0, &[-1.0, -0.5]);
        assert_eq!(k.at(0), 5.0);
        assert_eq!(k.at(2), 3.5);
        assert_eq!(k.at(100), 3.5);
    }
}
