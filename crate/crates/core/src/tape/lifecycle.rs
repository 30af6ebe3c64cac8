use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{RawTradeReport, ReportKind};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleStats {
    pub records_in: usize,
    pub trades_in: usize,
    pub cancels_applied: usize,
    pub corrections_applied: usize,
    pub reversals_applied: usize,
    pub dangling_references: usize,
    pub settled: usize,
}

#[derive(Debug, Clone)]
pub struct Reconciled {
    pub trades: Vec<RawTradeReport>,
    pub stats: LifecycleStats,
}

/// Applies cancels, corrections and reversals to the trades they reference.
///
/// Trades are indexed first, then lifecycle records are applied in file order,
/// so the latest correction wins. A correction keeps the original record id and
/// its own id becomes an alias, so later records may reference either. Reversals
/// behave like cancels. References that resolve to nothing (unknown id, or a
/// family already removed) are logged and skipped.
pub fn reconcile_lifecycle(reports: &[RawTradeReport]) -> Reconciled {
    let mut stats = LifecycleStats {
        records_in: reports.len(),
        ..Default::default()
    };
    let mut families: Vec<Option<RawTradeReport>> = Vec::new();
    let mut alias: HashMap<&str, usize> = HashMap::new();

    for r in reports.iter().filter(|r| r.kind == ReportKind::Trade) {
        stats.trades_in += 1;
        if alias.contains_key(r.record_id.as_str()) {
            warn!(record_id = %r.record_id, row = r.row, "duplicate trade record id; later row kept separately");
        } else {
            alias.insert(r.record_id.as_str(), families.len());
        }
        families.push(Some(r.clone()));
    }

    for r in reports.iter().filter(|r| r.kind != ReportKind::Trade) {
        let target = r
            .references_record
            .as_deref()
            .and_then(|id| alias.get(id).copied())
            .filter(|&i| families[i].is_some());
        let Some(i) = target else {
            warn!(record_id = %r.record_id, row = r.row, references = ?r.references_record, "dangling lifecycle reference skipped");
            stats.dangling_references += 1;
            continue;
        };
        match r.kind {
            ReportKind::Cancel => {
                families[i] = None;
                stats.cancels_applied += 1;
            }
            ReportKind::Reversal => {
                families[i] = None;
                stats.reversals_applied += 1;
            }
            ReportKind::Correction => {
                let original = families[i].as_ref().expect("checked above");
                let mut corrected = r.clone();
                corrected.kind = ReportKind::Trade;
                corrected.references_record = None;
                corrected.record_id = original.record_id.clone();
                corrected.row = original.row;
                families[i] = Some(corrected);
                alias.entry(r.record_id.as_str()).or_insert(i);
                stats.corrections_applied += 1;
            }
            ReportKind::Trade => unreachable!(),
        }
    }

    let trades: Vec<RawTradeReport> = families.into_iter().flatten().collect();
    stats.settled = trades.len();
    Reconciled { trades, stats }
}
