//! Trade-tape ingestion: parsing, lifecycle reconciliation, the seven-step
//! cleaning filter and Standard-tape volume capping.

mod calendar;
mod filter;
mod lifecycle;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

pub use calendar::{Calendar, IsoWeek};
pub use filter::{
    cap_volumes, filter_pipeline, filter_reports, ingest, to_clean_trades, FilterConfig, FilterReport, FilterStep,
    HY_VOLUME_CAP, IG_VOLUME_CAP,
};
pub use lifecycle::{reconcile_lifecycle, LifecycleStats, Reconciled};
pub(crate) use parse::{clean_trade_fields, parse_clean_fields, CLEAN_COLUMNS};
pub use parse::{parse_trace_csv, read_clean_trades, write_clean_trades, write_trace_csv, ColumnMap, TAPE_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Trade,
    Cancel,
    Correction,
    Reversal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Principal,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContraParty {
    Customer,
    Dealer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomerSide {
    CustomerBuy,
    CustomerSell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubProduct {
    CorporateBond,
    Other,
}

/// Which side of the market a cleaned trade sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    CustomerBuy,
    CustomerSell,
    DealerDealer,
}

impl Leg {
    pub fn is_customer(self) -> bool {
        !matches!(self, Leg::DealerDealer)
    }
}

macro_rules! text_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(<$ty>::$variant => $text),+ }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s.trim() {
                    $($text => Some(<$ty>::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

text_enum!(ReportKind { Trade => "trade", Cancel => "cancel", Correction => "correction", Reversal => "reversal" });
text_enum!(Capacity { Principal => "principal", Agent => "agent" });
text_enum!(ContraParty { Customer => "customer", Dealer => "dealer" });
text_enum!(CustomerSide { CustomerBuy => "customer_buy", CustomerSell => "customer_sell" });
text_enum!(SubProduct { CorporateBond => "corporate_bond", Other => "other" });
text_enum!(Leg { CustomerBuy => "customer_buy", CustomerSell => "customer_sell", DealerDealer => "dealer_dealer" });

/// One row of a trade tape, before any reconciliation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTradeReport {
    /// Line number in the source file (header is line 1).
    pub row: usize,
    pub record_id: String,
    pub cusip: String,
    pub exec_time: NaiveDateTime,
    pub price: f64,
    pub volume: f64,
    pub kind: ReportKind,
    pub references_record: Option<String>,
    pub capacity: Capacity,
    pub contra_party: ContraParty,
    pub customer_side: Option<CustomerSide>,
    pub sale_condition: BTreeSet<String>,
    pub sub_product: SubProduct,
}

impl RawTradeReport {
    pub fn leg(&self) -> Leg {
        match (self.contra_party, self.customer_side) {
            (ContraParty::Customer, Some(CustomerSide::CustomerBuy)) => Leg::CustomerBuy,
            (ContraParty::Customer, Some(CustomerSide::CustomerSell)) => Leg::CustomerSell,
            _ => Leg::DealerDealer,
        }
    }
}

/// A settled, filtered trade with its per-bond chronological index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTrade {
    pub record_id: String,
    pub cusip: String,
    pub k: usize,
    pub time: NaiveDateTime,
    pub price: f64,
    pub volume: f64,
    pub leg: Leg,
}
