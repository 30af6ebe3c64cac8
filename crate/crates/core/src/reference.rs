//! Static bond reference data, weekly market context, cash-flow schedules and
//! yield/duration.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{csv_reader, csv_writer, fmt_f64, header_indices, parse_f64, record_line, Provenance};
use crate::tape::IsoWeek;

pub const REFERENCE_COLUMNS: [&str; 8] = [
    "cusip",
    "coupon_rate",
    "issue_date",
    "maturity_date",
    "amount_outstanding",
    "grade",
    "sector",
    "frequency",
];

pub const CONTEXT_COLUMNS: [&str; 2] = ["iso_week", "libor_ois"];

pub const DAYS_PER_YEAR: f64 = 365.25;
pub const SECTOR_COUNT: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Grade {
    #[serde(rename = "IG")]
    InvestmentGrade,
    #[serde(rename = "HY")]
    HighYield,
}

impl Grade {
    pub fn as_str(self) -> &'static str {
        match self {
            Grade::InvestmentGrade => "IG",
            Grade::HighYield => "HY",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "IG" => Some(Grade::InvestmentGrade),
            "HY" => Some(Grade::HighYield),
            _ => None,
        }
    }
}

/// One of the nine industry sectors, `S1` through `S9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Sector(u8);

impl Sector {
    pub fn new(index: u8) -> Option<Self> {
        (1..=SECTOR_COUNT).contains(&index).then_some(Self(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn parse(text: &str) -> Option<Self> {
        text.trim().strip_prefix('S')?.parse().ok().and_then(Self::new)
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondReference {
    pub cusip: String,
    /// Percent per annum.
    pub coupon_rate: f64,
    pub issue_date: NaiveDate,
    pub maturity_date: NaiveDate,
    pub amount_outstanding: f64,
    pub grade: Grade,
    pub sector: Sector,
    /// Coupons per year; 0 for a zero-coupon bond.
    pub frequency: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashFlow {
    pub date: NaiveDate,
    /// Per 100 face.
    pub amount: f64,
}

pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

impl BondReference {
    /// Remaining cash flows strictly after `as_of`, per 100 face. Coupon dates
    /// are rolled back from maturity in steps of `12 / frequency` months.
    pub fn cashflows_after(&self, as_of: NaiveDate) -> Vec<CashFlow> {
        if self.frequency == 0 {
            return if self.maturity_date > as_of {
                vec![CashFlow {
                    date: self.maturity_date,
                    amount: 100.0,
                }]
            } else {
                Vec::new()
            };
        }
        let step = 12 / self.frequency.clamp(1, 12);
        let coupon = self.coupon_rate / self.frequency as f64;
        let mut flows = Vec::new();
        for n in 0.. {
            let Some(date) = self.maturity_date.checked_sub_months(Months::new(n * step)) else {
                break;
            };
            if date <= as_of || date < self.issue_date {
                break;
            }
            let amount = if n == 0 { coupon + 100.0 } else { coupon };
            flows.push(CashFlow { date, amount });
        }
        flows.reverse();
        flows
    }

    fn discount(&self, y: f64, t: f64) -> f64 {
        if self.frequency == 0 {
            (1.0 + y).powf(-t)
        } else {
            let f = self.frequency as f64;
            (1.0 + y / f).powf(-f * t)
        }
    }

    pub fn present_value(&self, as_of: NaiveDate, y: f64) -> f64 {
        self.cashflows_after(as_of)
            .iter()
            .map(|c| c.amount * self.discount(y, year_fraction(as_of, c.date)))
            .sum()
    }

    /// Yield to maturity by bisection on `[-0.5, 2.0]`, stopping once the
    /// priced value is within 1e-8 of `price`.
    pub fn yield_to_maturity(&self, price: f64, as_of: NaiveDate) -> Result<f64> {
        if as_of >= self.maturity_date {
            return Err(Error::InvalidInput(format!(
                "{}: as-of date {as_of} is not before maturity {}",
                self.cusip, self.maturity_date
            )));
        }
        if !(price > 0.0) {
            return Err(Error::InvalidInput(format!("{}: price must be positive", self.cusip)));
        }
        let gap = |y: f64| self.present_value(as_of, y) - price;
        let (mut lo, mut hi) = (-0.5, 2.0);
        let (g_lo, g_hi) = (gap(lo), gap(hi));
        if g_lo < 0.0 || g_hi > 0.0 {
            return Err(Error::Numerical(format!(
                "{}: no yield in [-0.5, 2.0] reprices {price}",
                self.cusip
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let g = gap(mid);
            if g.abs() < 1e-8 {
                return Ok(mid);
            }
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Macaulay duration in years at the yield implied by `price`.
    pub fn duration(&self, price: f64, as_of: NaiveDate) -> Result<f64> {
        let y = self.yield_to_maturity(price, as_of)?;
        let (mut pv, mut weighted) = (0.0, 0.0);
        for c in self.cashflows_after(as_of) {
            let t = year_fraction(as_of, c.date);
            let v = c.amount * self.discount(y, t);
            pv += v;
            weighted += t * v;
        }
        Ok(weighted / pv)
    }
}

pub fn read_references<R: Read>(source: R) -> Result<Vec<BondReference>> {
    let mut reader = csv_reader(source);
    let idx = header_indices(&reader.headers()?.clone(), &REFERENCE_COLUMNS)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let get = |i: usize| rec.get(idx[i]).unwrap_or("").trim();
        let date = |i: usize| {
            NaiveDate::parse_from_str(get(i), "%Y-%m-%d")
                .map_err(|_| Error::parse(line, REFERENCE_COLUMNS[i], "expected YYYY-MM-DD"))
        };
        let bond = BondReference {
            cusip: get(0).to_string(),
            coupon_rate: parse_f64(get(1), line, "coupon_rate")?,
            issue_date: date(2)?,
            maturity_date: date(3)?,
            amount_outstanding: parse_f64(get(4), line, "amount_outstanding")?,
            grade: Grade::parse(get(5))
                .ok_or_else(|| Error::parse(line, "grade", format!("expected IG or HY, got {:?}", get(5))))?,
            sector: Sector::parse(get(6))
                .ok_or_else(|| Error::parse(line, "sector", format!("expected S1..S9, got {:?}", get(6))))?,
            frequency: get(7)
                .parse()
                .map_err(|_| Error::parse(line, "frequency", "expected a non-negative integer"))?,
        };
        if bond.issue_date >= bond.maturity_date {
            return Err(Error::parse(line, "maturity_date", "maturity must follow issue"));
        }
        if !(bond.amount_outstanding > 0.0) {
            return Err(Error::parse(line, "amount_outstanding", "must be positive"));
        }
        out.push(bond);
    }
    Ok(out)
}

pub fn write_references<W: Write>(sink: W, bonds: &[BondReference], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(REFERENCE_COLUMNS)?;
    for b in bonds {
        w.write_record([
            b.cusip.clone(),
            fmt_f64(b.coupon_rate),
            b.issue_date.to_string(),
            b.maturity_date.to_string(),
            fmt_f64(b.amount_outstanding),
            b.grade.as_str().to_string(),
            b.sector.to_string(),
            b.frequency.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn index_references(bonds: &[BondReference]) -> HashMap<String, BondReference> {
    bonds.iter().map(|b| (b.cusip.clone(), b.clone())).collect()
}

/// Weekly 1-month LIBOR-OIS spread.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketContext {
    pub libor_ois: BTreeMap<IsoWeek, f64>,
}

impl MarketContext {
    pub fn get(&self, week: IsoWeek) -> Result<f64> {
        self.libor_ois
            .get(&week)
            .copied()
            .ok_or_else(|| Error::MissingContext(week.to_string()))
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv_reader(source);
        let idx = header_indices(&reader.headers()?.clone(), &CONTEXT_COLUMNS)?;
        let mut libor_ois = BTreeMap::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = record_line(&rec);
            let text = rec.get(idx[0]).unwrap_or("");
            let week = IsoWeek::parse(text)
                .ok_or_else(|| Error::parse(line, "iso_week", format!("expected YYYY-Www, got {text:?}")))?;
            libor_ois.insert(week, parse_f64(rec.get(idx[1]).unwrap_or(""), line, "libor_ois")?);
        }
        Ok(Self { libor_ois })
    }

    pub fn write<W: Write>(&self, sink: W, meta: Option<&Provenance>) -> Result<()> {
        let mut w = csv_writer(sink, meta)?;
        w.write_record(CONTEXT_COLUMNS)?;
        for (week, v) in &self.libor_ois {
            w.write_record([week.to_string(), fmt_f64(*v)])?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }
}
