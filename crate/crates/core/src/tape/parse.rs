use std::collections::BTreeSet;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use super::{Capacity, CleanTrade, ContraParty, CustomerSide, Leg, RawTradeReport, ReportKind, SubProduct};
use crate::error::{Error, Result};
use crate::output::{csv_reader, csv_writer, fmt_f64, header_indices, parse_f64, record_line, Provenance};

/// Documented tape header, in order.
pub const TAPE_COLUMNS: [&str; 13] = [
    "record_id",
    "cusip",
    "exec_date",
    "exec_time",
    "price",
    "volume",
    "report_kind",
    "references_record",
    "capacity",
    "contra_party",
    "customer_side",
    "sale_condition",
    "sub_product",
];

pub(crate) const CLEAN_COLUMNS: [&str; 8] = [
    "record_id",
    "cusip",
    "k",
    "exec_date",
    "exec_time",
    "price",
    "volume",
    "leg",
];

/// Header names for each logical tape field. Defaults to [`TAPE_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub names: [String; 13],
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            names: TAPE_COLUMNS.map(String::from),
        }
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    idx: &'a [usize],
    line: usize,
}

impl Row<'_> {
    fn get(&self, field: usize) -> &str {
        self.record.get(self.idx[field]).unwrap_or("")
    }

    fn required(&self, field: usize) -> Result<&str> {
        let v = self.get(field);
        if v.is_empty() {
            Err(Error::parse(self.line, TAPE_COLUMNS[field], "value required"))
        } else {
            Ok(v)
        }
    }

    fn enum_field<T>(&self, field: usize, parse: fn(&str) -> Option<T>) -> Result<T> {
        let text = self.required(field)?;
        parse(text).ok_or_else(|| Error::parse(self.line, TAPE_COLUMNS[field], format!("unknown value {text:?}")))
    }
}

pub(crate) fn parse_date(text: &str, line: usize, column: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d")
        .map_err(|_| Error::parse(line, column, format!("expected YYYY-MM-DD, got {text:?}")))
}

pub(crate) fn parse_time(text: &str, line: usize, column: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(text.trim(), "%H:%M:%S")
        .map_err(|_| Error::parse(line, column, format!("expected HH:MM:SS, got {text:?}")))
}

fn parse_row(row: &Row<'_>) -> Result<RawTradeReport> {
    let line = row.line;
    let kind = row.enum_field(6, ReportKind::parse)?;
    let date = parse_date(row.required(2)?, line, "exec_date")?;
    let time = parse_time(row.required(3)?, line, "exec_time")?;
    let price = parse_f64(row.required(4)?, line, "price")?;
    let volume = parse_f64(row.required(5)?, line, "volume")?;
    if kind == ReportKind::Trade && !(price > 0.0) {
        return Err(Error::parse(line, "price", "trade price must be positive"));
    }
    if !(volume >= 0.0) {
        return Err(Error::parse(line, "volume", "volume must be non-negative"));
    }

    let references = match row.get(7) {
        "" => None,
        r => Some(r.to_string()),
    };
    if references.is_some() != (kind != ReportKind::Trade) {
        return Err(Error::parse(
            line,
            "references_record",
            "must be present exactly for cancel/correction/reversal rows",
        ));
    }

    let contra_party = row.enum_field(9, ContraParty::parse)?;
    let customer_side = match row.get(10) {
        "" => None,
        s => Some(
            CustomerSide::parse(s)
                .ok_or_else(|| Error::parse(line, "customer_side", format!("unknown value {s:?}")))?,
        ),
    };
    if customer_side.is_some() != (contra_party == ContraParty::Customer) {
        return Err(Error::parse(
            line,
            "customer_side",
            "must be present exactly when contra_party is customer",
        ));
    }

    let cusip = row.required(1)?.to_string();
    if cusip.chars().count() != 9 {
        return Err(Error::parse(
            line,
            "cusip",
            format!("expected 9 characters, got {cusip:?}"),
        ));
    }

    let sale_condition: BTreeSet<String> = row
        .get(11)
        .split('|')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(String::from)
        .collect();

    Ok(RawTradeReport {
        row: line,
        record_id: row.required(0)?.to_string(),
        cusip,
        exec_time: NaiveDateTime::new(date, time),
        price,
        volume,
        kind,
        references_record: references,
        capacity: row.enum_field(8, Capacity::parse)?,
        contra_party,
        customer_side,
        sale_condition,
        sub_product: row.enum_field(12, SubProduct::parse)?,
    })
}

/// Parses a trade tape. Lines starting with `#` are ignored.
pub fn parse_trace_csv<R: Read>(source: R, schema: &ColumnMap) -> Result<Vec<RawTradeReport>> {
    let mut reader = csv_reader(source);
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = schema.names.iter().map(String::as_str).collect();
    let idx = header_indices(&headers, &names)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = Row {
            record: &record,
            idx: &idx,
            line: record_line(&record),
        };
        out.push(parse_row(&row)?);
    }
    Ok(out)
}

pub fn write_trace_csv<W: Write>(sink: W, reports: &[RawTradeReport], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(TAPE_COLUMNS)?;
    for r in reports {
        let conditions = r.sale_condition.iter().cloned().collect::<Vec<_>>().join("|");
        w.write_record([
            r.record_id.as_str(),
            r.cusip.as_str(),
            &r.exec_time.format("%Y-%m-%d").to_string(),
            &r.exec_time.format("%H:%M:%S").to_string(),
            &fmt_f64(r.price),
            &fmt_f64(r.volume),
            r.kind.as_str(),
            r.references_record.as_deref().unwrap_or(""),
            r.capacity.as_str(),
            r.contra_party.as_str(),
            r.customer_side.map(CustomerSide::as_str).unwrap_or(""),
            &conditions,
            r.sub_product.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub(crate) fn clean_trade_fields(t: &CleanTrade) -> [String; 8] {
    [
        t.record_id.clone(),
        t.cusip.clone(),
        t.k.to_string(),
        t.time.format("%Y-%m-%d").to_string(),
        t.time.format("%H:%M:%S").to_string(),
        fmt_f64(t.price),
        fmt_f64(t.volume),
        t.leg.as_str().to_string(),
    ]
}

pub(crate) fn parse_clean_fields(record: &csv::StringRecord, idx: &[usize], line: usize) -> Result<CleanTrade> {
    let get = |i: usize| record.get(idx[i]).unwrap_or("");
    let date = parse_date(get(3), line, "exec_date")?;
    let time = parse_time(get(4), line, "exec_time")?;
    Ok(CleanTrade {
        record_id: get(0).to_string(),
        cusip: get(1).to_string(),
        k: get(2)
            .parse()
            .map_err(|_| Error::parse(line, "k", "expected a non-negative integer"))?,
        time: NaiveDateTime::new(date, time),
        price: parse_f64(get(5), line, "price")?,
        volume: parse_f64(get(6), line, "volume")?,
        leg: Leg::parse(get(7)).ok_or_else(|| Error::parse(line, "leg", format!("unknown value {:?}", get(7))))?,
    })
}

pub fn write_clean_trades<W: Write>(sink: W, trades: &[CleanTrade], meta: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(sink, meta)?;
    w.write_record(CLEAN_COLUMNS)?;
    for t in trades {
        w.write_record(clean_trade_fields(t))?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn read_clean_trades<R: Read>(source: R) -> Result<Vec<CleanTrade>> {
    let mut reader = csv_reader(source);
    let idx = header_indices(&reader.headers()?.clone(), &CLEAN_COLUMNS)?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            parse_clean_fields(&r, &idx, record_line(&r))
        })
        .collect()
}
