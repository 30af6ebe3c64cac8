use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use super::{
    reconcile_lifecycle, Calendar, Capacity, CleanTrade, ContraParty, LifecycleStats, RawTradeReport, SubProduct,
};
use crate::error::{Error, Result};
use crate::reference::Grade;

pub const HY_VOLUME_CAP: f64 = 1_000_000.0;
pub const IG_VOLUME_CAP: f64 = 5_000_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Sale-condition codes treated as irregular (late, late after hours,
    /// weighted-average price, special price).
    pub irregular_codes: BTreeSet<String>,
    pub min_price: f64,
    pub session_start: NaiveTime,
    pub session_end: NaiveTime,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            irregular_codes: ["Z", "U", "W", "S"].into_iter().map(String::from).collect(),
            min_price: 10.0,
            session_start: NaiveTime::from_hms_opt(8, 0, 0).unwrap(),
            session_end: NaiveTime::from_hms_opt(17, 15, 0).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStep {
    pub step: u8,
    pub removed: usize,
    pub removed_pct: f64,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub steps: Vec<FilterStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifecycle: Option<LifecycleStats>,
}

impl FilterReport {
    pub fn step(&self, id: u8) -> Option<&FilterStep> {
        self.steps.iter().find(|s| s.step == id)
    }

    pub fn remaining(&self) -> usize {
        self.steps.last().map(|s| s.remaining).unwrap_or(self.input)
    }

    pub fn total_removed(&self) -> usize {
        self.steps.iter().map(|s| s.removed).sum()
    }
}

fn record_step(steps: &mut Vec<FilterStep>, step: u8, before: usize, after: usize) {
    let removed = before - after;
    let removed_pct = if before == 0 {
        0.0
    } else {
        removed as f64 / before as f64 * 100.0
    };
    steps.push(FilterStep {
        step,
        removed,
        removed_pct,
        remaining: after,
    });
}

/// Cleaning steps 2 through 7 on already reconciled trades.
pub fn filter_reports(
    trades: &[RawTradeReport],
    calendar: &Calendar,
    config: &FilterConfig,
) -> (Vec<RawTradeReport>, FilterReport) {
    type Keep<'a> = Box<dyn Fn(&RawTradeReport) -> bool + 'a>;
    let predicates: [(u8, Keep); 6] = [
        (
            2,
            Box::new(|r| !(r.capacity == Capacity::Agent && r.contra_party == ContraParty::Dealer)),
        ),
        (3, Box::new(|r| calendar.is_business_day(r.exec_time.date()))),
        (
            4,
            Box::new(|r| {
                let t = r.exec_time.time();
                t >= config.session_start && t <= config.session_end
            }),
        ),
        (5, Box::new(|r| r.sale_condition.is_disjoint(&config.irregular_codes))),
        (6, Box::new(|r| r.price >= config.min_price)),
        (7, Box::new(|r| r.sub_product == SubProduct::CorporateBond)),
    ];

    let mut current: Vec<RawTradeReport> = trades.to_vec();
    let mut steps = Vec::with_capacity(6);
    for (step, keep) in predicates.iter() {
        let before = current.len();
        current.retain(|r| keep(r));
        record_step(&mut steps, *step, before, current.len());
    }
    let report = FilterReport {
        input: trades.len(),
        steps,
        lifecycle: None,
    };
    (current, report)
}

/// Orders trades per cusip by execution time (file order breaks ties) and
/// assigns the per-bond index `k`.
pub fn to_clean_trades(trades: &[RawTradeReport]) -> Vec<CleanTrade> {
    let mut by_cusip: BTreeMap<&str, Vec<&RawTradeReport>> = BTreeMap::new();
    for r in trades {
        by_cusip.entry(r.cusip.as_str()).or_default().push(r);
    }
    let mut out = Vec::with_capacity(trades.len());
    for (_, mut rs) in by_cusip {
        rs.sort_by_key(|r| r.exec_time);
        out.extend(rs.into_iter().enumerate().map(|(k, r)| CleanTrade {
            record_id: r.record_id.clone(),
            cusip: r.cusip.clone(),
            k,
            time: r.exec_time,
            price: r.price,
            volume: r.volume,
            leg: r.leg(),
        }));
    }
    out
}

/// Steps 2 through 7 followed by conversion to [`CleanTrade`]s.
pub fn filter_pipeline(
    trades: &[RawTradeReport],
    calendar: &Calendar,
    config: &FilterConfig,
) -> (Vec<CleanTrade>, FilterReport) {
    let (kept, report) = filter_reports(trades, calendar, config);
    (to_clean_trades(&kept), report)
}

/// Full cleaning: lifecycle reconciliation (step 1) then steps 2 through 7.
pub fn ingest(
    reports: &[RawTradeReport],
    calendar: &Calendar,
    config: &FilterConfig,
) -> (Vec<CleanTrade>, FilterReport) {
    let reconciled = reconcile_lifecycle(reports);
    let (clean, mut report) = filter_pipeline(&reconciled.trades, calendar, config);
    let mut steps = Vec::with_capacity(7);
    record_step(&mut steps, 1, reports.len(), reconciled.trades.len());
    steps.append(&mut report.steps);
    report.steps = steps;
    report.input = reports.len();
    report.lifecycle = Some(reconciled.stats);
    (clean, report)
}

/// Emulates Standard-tape reporting: high-yield volumes capped at 1MM and
/// investment-grade volumes at 5MM. Volumes equal to the cap are unchanged.
pub fn cap_volumes(trades: &[CleanTrade], grade_of: &HashMap<String, Grade>) -> Result<Vec<CleanTrade>> {
    trades
        .iter()
        .map(|t| {
            let grade = grade_of
                .get(&t.cusip)
                .ok_or_else(|| Error::UnknownGrade(t.cusip.clone()))?;
            let cap = match grade {
                Grade::HighYield => HY_VOLUME_CAP,
                Grade::InvestmentGrade => IG_VOLUME_CAP,
            };
            let mut capped = t.clone();
            if capped.volume > cap {
                capped.volume = cap;
            }
            Ok(capped)
        })
        .collect()
}
