//! Vanilla bid-ask spreads from opposite-sign trade pairs, weekly spread
//! aggregation and one-sided spreads against an inter-dealer reference price.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::classify::{by_cusip, SignedTrade};
use crate::error::{Error, Result};
use crate::output::{csv_reader, csv_writer, fmt_f64, header_indices, parse_f64, record_line, Provenance};
use crate::tape::{IsoWeek, Leg};

pub const SPREAD_COLUMNS: [&str; 6] = ["cusip", "k", "t", "psi", "mid", "s_bp"];
pub const WEEKLY_COLUMNS: [&str; 4] = ["cusip", "iso_week", "mean_s_bp", "n_obs"];
pub const ONE_SIDED_COLUMNS: [&str; 5] = ["cusip", "date", "spread_b", "spread_s", "reference_price"];

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Reference-price inputs: inter-dealer trades above this size...
pub const REFERENCE_MIN_VOLUME: f64 = 100_000.0;
/// ...that are not within this many seconds of a customer trade.
pub const REFERENCE_EXCLUSION_SECS: i64 = 15 * 60;

/// Sign applied to the half-spread when locating the mid-price.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MidConvention {
    /// `M = P_k - eps_{k+1} psi / 2`, as printed.
    #[default]
    Paper,
    /// `M = P_k + eps_{k+1} psi / 2`, which lands between bid and ask when a
    /// sell is followed by a buy.
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpreadConfig {
    pub window_secs: i64,
    pub mid_convention: MidConvention,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        Self {
            window_secs: 300,
            mid_convention: MidConvention::Paper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadObservation {
    pub cusip: String,
    /// Index of the later trade of the pair.
    pub k: usize,
    pub t: NaiveDateTime,
    pub psi: f64,
    pub mid: f64,
    pub s_bp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySpread {
    pub cusip: String,
    pub week: IsoWeek,
    pub mean_s: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedSpread {
    pub cusip: String,
    pub day: NaiveDate,
    pub spread_b: Option<f64>,
    pub spread_s: Option<f64>,
    pub reference_price: f64,
}

/// Spread observations from one cusip's chronological signed trades.
///
/// Every consecutive pair `(k, k+1)` with `eps_{k+1} = -eps_k != 0` and a time
/// gap strictly under the window yields `psi = (P_{k+1} - P_k) eps_{k+1}`.
pub fn estimate_spreads(trades: &[SignedTrade], config: &SpreadConfig) -> Vec<SpreadObservation> {
    let mut out = Vec::new();
    for pair in trades.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.epsilon == 0 || b.epsilon != -a.epsilon {
            continue;
        }
        let gap = (b.trade.time - a.trade.time).num_seconds().abs();
        if gap >= config.window_secs {
            continue;
        }
        let eps = f64::from(b.epsilon);
        let psi = (b.trade.price - a.trade.price) * eps;
        let mid = match config.mid_convention {
            MidConvention::Paper => a.trade.price - eps * psi / 2.0,
            MidConvention::Corrected => a.trade.price + eps * psi / 2.0,
        };
        if !(mid > 0.0) {
            debug!(cusip = %b.trade.cusip, k = b.trade.k, mid, "non-positive mid dropped");
            continue;
        }
        out.push(SpreadObservation {
            cusip: b.trade.cusip.clone(),
            k: b.trade.k,
            t: b.trade.time,
            psi,
            mid,
            s_bp: psi / mid * 1e4,
        });
    }
    out
}

/// Runs [`estimate_spreads`] over a tape grouped by cusip.
pub fn estimate_all_spreads(trades: &[SignedTrade], config: &SpreadConfig) -> Vec<SpreadObservation> {
    by_cusip(trades, |t| t.trade.cusip.as_str())
        .into_par_iter()
        .map(|g| estimate_spreads(g, config))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Unweighted mean of `s` per (cusip, ISO week), ordered by cusip then week.
pub fn aggregate_weekly(obs: &[SpreadObservation]) -> Vec<WeeklySpread> {
    let mut acc: BTreeMap<(&str, IsoWeek), (f64, usize)> = BTreeMap::new();
    for o in obs {
        let e = acc.entry((o.cusip.as_str(), IsoWeek::of(o.t.date()))).or_default();
        e.0 += o.s_bp;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((cusip, week), (sum, n))| WeeklySpread {
            cusip: cusip.to_string(),
            week,
            mean_s: sum / n as f64,
            n_obs: n,
        })
        .collect()
}

/// VWAP of inter-dealer trades larger than $100,000, skipping any executed
/// within 15 minutes (inclusive) of one of `customer_times`.
pub fn reference_price(day: &[SignedTrade], customer_times: &[NaiveDateTime]) -> Option<f64> {
    let (mut pv, mut v) = (0.0, 0.0);
    for t in day {
        let t = &t.trade;
        if t.leg != Leg::DealerDealer || !(t.volume > REFERENCE_MIN_VOLUME) {
            continue;
        }
        let near = customer_times
            .iter()
            .any(|c| (t.time - *c).num_seconds().abs() <= REFERENCE_EXCLUSION_SECS);
        if near {
            continue;
        }
        pv += t.price * t.volume;
        v += t.volume;
    }
    (v > 0.0).then(|| pv / v)
}

fn vw_mean(items: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, w) in items {
        num += x * w;
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// Volume-weighted one-sided spreads of a bond-day's signed customer trades.
/// Returns `None` when the day has no signed customer trade.
pub fn one_sided_spreads(day: &[SignedTrade], reference: f64) -> Option<OneSidedSpread> {
    let first = day.iter().find(|t| t.epsilon != 0)?;
    let spread_b = vw_mean(
        day.iter()
            .filter(|t| t.epsilon == 1)
            .map(|t| ((t.trade.price - reference) / reference, t.trade.volume)),
    );
    let spread_s = vw_mean(
        day.iter()
            .filter(|t| t.epsilon == -1)
            .map(|t| ((reference - t.trade.price) / reference, t.trade.volume)),
    );
    Some(OneSidedSpread {
        cusip: first.trade.cusip.clone(),
        day: first.trade.time.date(),
        spread_b,
        spread_s,
        reference_price: reference,
    })
}

/// One-sided spreads for every bond-day that has both signed customer trades
/// and a reference price. The reference excludes inter-dealer trades near any
/// of the day's customer trades.
pub fn daily_one_sided_spreads(trades: &[SignedTrade]) -> Vec<OneSidedSpread> {
    by_cusip(trades, |t| t.trade.cusip.as_str())
        .into_par_iter()
        .map(|g| {
            let mut out = Vec::new();
            for day in by_cusip_day(g) {
                let customer: Vec<NaiveDateTime> =
                    day.iter().filter(|t| t.epsilon != 0).map(|t| t.trade.time).collect();
                if customer.is_empty() {
                    continue;
                }
                if let Some(r) = reference_price(day, &customer) {
                    out.extend(one_sided_spreads(day, r));
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn by_cusip_day(trades: &[SignedTrade]) -> Vec<&[SignedTrade]> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=trades.len() {
        if i == trades.len() || trades[i].trade.time.date() != trades[start].trade.time.date() {
            if i > start {
                groups.push(&trades[start..i]);
            }
            start = i;
        }
    }
    groups
}

pub fn write_spreads<W: Write>(sink: W, obs: &[SpreadObservation], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(SPREAD_COLUMNS)?;
    for o in obs {
        w.write_record([
            o.cusip.clone(),
            o.k.to_string(),
            o.t.format(TIME_FORMAT).to_string(),
            fmt_f64(o.psi),
            fmt_f64(o.mid),
            fmt_f64(o.s_bp),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn read_spreads<R: Read>(source: R) -> Result<Vec<SpreadObservation>> {
    let mut reader = csv_reader(source);
    let idx = header_indices(&reader.headers()?.clone(), &SPREAD_COLUMNS)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        out.push(SpreadObservation {
            cusip: get(0).to_string(),
            k: get(1)
                .parse()
                .map_err(|_| Error::parse(line, "k", "expected an integer"))?,
            t: NaiveDateTime::parse_from_str(get(2), TIME_FORMAT)
                .map_err(|_| Error::parse(line, "t", "expected YYYY-MM-DDTHH:MM:SS"))?,
            psi: parse_f64(get(3), line, "psi")?,
            mid: parse_f64(get(4), line, "mid")?,
            s_bp: parse_f64(get(5), line, "s_bp")?,
        });
    }
    Ok(out)
}

pub fn write_weekly<W: Write>(sink: W, weekly: &[WeeklySpread], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(WEEKLY_COLUMNS)?;
    for r in weekly {
        w.write_record([
            r.cusip.clone(),
            r.week.to_string(),
            fmt_f64(r.mean_s),
            r.n_obs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn read_weekly<R: Read>(source: R) -> Result<Vec<WeeklySpread>> {
    let mut reader = csv_reader(source);
    let idx = header_indices(&reader.headers()?.clone(), &WEEKLY_COLUMNS)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        out.push(WeeklySpread {
            cusip: get(0).to_string(),
            week: IsoWeek::parse(get(1)).ok_or_else(|| Error::parse(line, "iso_week", "expected YYYY-Www"))?,
            mean_s: parse_f64(get(2), line, "mean_s_bp")?,
            n_obs: get(3)
                .parse()
                .map_err(|_| Error::parse(line, "n_obs", "expected an integer"))?,
        });
    }
    Ok(out)
}

pub fn write_one_sided<W: Write>(sink: W, rows: &[OneSidedSpread], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(ONE_SIDED_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.cusip.clone(),
            r.day.to_string(),
            opt(r.spread_b),
            opt(r.spread_s),
            fmt_f64(r.reference_price),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}
