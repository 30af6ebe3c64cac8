//! Initiator signs and riskless-principal trade (RPT) detection.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{csv_reader, csv_writer, header_indices, record_line, Provenance};
use crate::tape::{clean_trade_fields, parse_clean_fields, CleanTrade, Leg, CLEAN_COLUMNS};

/// A maximal block of consecutive equal-volume trades within one cusip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRun {
    /// Index of the first member within the per-cusip slice.
    pub start: usize,
    pub len: usize,
    pub volume: f64,
}

impl SizeRun {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedTrade {
    pub trade: CleanTrade,
    pub epsilon: i8,
    pub is_rpt: bool,
}

/// All maximal runs of two or more consecutive trades with the same volume.
pub fn find_size_runs(trades: &[CleanTrade]) -> Vec<SizeRun> {
    let mut runs = Vec::new();
    let mut start = 0;
    while start < trades.len() {
        let volume = trades[start].volume;
        let mut end = start + 1;
        while end < trades.len() && trades[end].volume == volume {
            end += 1;
        }
        if end - start >= 2 {
            runs.push(SizeRun {
                start,
                len: end - start,
                volume,
            });
        }
        start = end;
    }
    runs
}

/// Whether two adjacent same-size trades can be the two legs of an RPT: a
/// customer leg against a dealer leg, or two customer legs on which the dealer
/// both buys and sells.
pub fn is_rpt_pair(a: Leg, b: Leg) -> bool {
    match (a, b) {
        (Leg::CustomerBuy, Leg::CustomerSell) | (Leg::CustomerSell, Leg::CustomerBuy) => true,
        (x, y) => x.is_customer() != y.is_customer(),
    }
}

/// Greedy left-to-right pairing inside one run; returns index pairs relative
/// to `legs`.
pub fn mark_rpts(legs: &[Leg]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut i = 0;
    while i + 1 < legs.len() {
        if is_rpt_pair(legs[i], legs[i + 1]) {
            pairs.push((i, i + 1));
            i += 2;
        } else {
            i += 1;
        }
    }
    pairs
}

pub fn sign_of(leg: Leg, is_rpt: bool) -> i8 {
    match (leg, is_rpt) {
        (_, true) | (Leg::DealerDealer, _) => 0,
        (Leg::CustomerBuy, false) => 1,
        (Leg::CustomerSell, false) => -1,
    }
}

pub fn assign_signs(trades: &[CleanTrade], rpt_flags: &[bool]) -> Vec<SignedTrade> {
    trades
        .iter()
        .zip(rpt_flags)
        .map(|(t, &is_rpt)| SignedTrade {
            trade: t.clone(),
            epsilon: sign_of(t.leg, is_rpt),
            is_rpt,
        })
        .collect()
}

/// RPT flags for one cusip's chronological trades.
pub fn rpt_flags(trades: &[CleanTrade]) -> Vec<bool> {
    let mut flags = vec![false; trades.len()];
    for run in find_size_runs(trades) {
        let legs: Vec<Leg> = trades[run.range()].iter().map(|t| t.leg).collect();
        for (a, b) in mark_rpts(&legs) {
            flags[run.start + a] = true;
            flags[run.start + b] = true;
        }
    }
    flags
}

/// Splits trades sorted by (cusip, k) into per-cusip slices.
pub fn by_cusip<T>(items: &[T], cusip: impl Fn(&T) -> &str) -> Vec<&[T]> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || cusip(&items[i]) != cusip(&items[start]) {
            if i > start {
                groups.push(&items[start..i]);
            }
            start = i;
        }
    }
    groups
}

/// Signs every trade. Input must be grouped by cusip and chronological within
/// each cusip, as produced by the tape cleaner.
pub fn classify(trades: &[CleanTrade]) -> Vec<SignedTrade> {
    by_cusip(trades, |t| t.cusip.as_str())
        .into_par_iter()
        .map(|group| assign_signs(group, &rpt_flags(group)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn write_signed_trades<W: Write>(sink: W, trades: &[SignedTrade], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    let mut header: Vec<&str> = CLEAN_COLUMNS.to_vec();
    header.extend(["epsilon", "is_rpt"]);
    w.write_record(&header)?;
    for s in trades {
        let mut row = clean_trade_fields(&s.trade).to_vec();
        row.push(s.epsilon.to_string());
        row.push(u8::from(s.is_rpt).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn read_signed_trades<R: Read>(source: R) -> Result<Vec<SignedTrade>> {
    let mut reader = csv_reader(source);
    let mut expected: Vec<&str> = CLEAN_COLUMNS.to_vec();
    expected.extend(["epsilon", "is_rpt"]);
    let idx = header_indices(&reader.headers()?.clone(), &expected)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let trade = parse_clean_fields(&rec, &idx[..8], line)?;
        let epsilon: i8 = rec
            .get(idx[8])
            .unwrap_or("")
            .parse()
            .ok()
            .filter(|e: &i8| (-1..=1).contains(e))
            .ok_or_else(|| Error::parse(line, "epsilon", "expected -1, 0 or 1"))?;
        let is_rpt = match rec.get(idx[9]).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(line, "is_rpt", format!("expected 0 or 1, got {other:?}"))),
        };
        if epsilon != sign_of(trade.leg, is_rpt) {
            return Err(Error::parse(line, "epsilon", "sign inconsistent with leg and RPT flag"));
        }
        out.push(SignedTrade { trade, epsilon, is_rpt });
    }
    Ok(out)
}
