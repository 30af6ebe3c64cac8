//! Weekly design matrix: one row per bond-week with a spread observation.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::classify::SignedTrade;
use crate::error::{Error, Result};
use crate::output::{csv_reader, csv_writer, fmt_f64, header_indices, parse_f64, record_line, Provenance};
use crate::reference::{year_fraction, BondReference, Grade, MarketContext};
use crate::regress::Dataset;
use crate::spread::WeeklySpread;
use crate::tape::{Calendar, IsoWeek, Leg};

pub const FEATURE_NAMES: [&str; 27] = [
    "volatility",
    "n_trading_days",
    "log_zero_trade_days",
    "prop_n_buy",
    "prop_n_sell",
    "prop_vol_buy",
    "prop_vol_sell",
    "trading_activity",
    "log_total_volume",
    "avg_price",
    "coupon",
    "duration",
    "years_to_maturity",
    "years_since_issuance",
    "turnover",
    "libor_ois",
    "ind_hy",
    "ind_ig",
    "sector_s1",
    "sector_s2",
    "sector_s3",
    "sector_s4",
    "sector_s5",
    "sector_s6",
    "sector_s7",
    "sector_s8",
    "sector_s9",
];

/// One column from each one-hot group (and the complementary proportions)
/// that the default design leaves out so the intercept stays identifiable.
pub const REFERENCE_CATEGORIES: [&str; 4] = ["prop_n_sell", "prop_vol_sell", "ind_ig", "sector_s9"];

const SECTOR_OFFSET: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub cusip: String,
    pub week: IsoWeek,
    /// Weekly mean spread in basis points.
    pub response: f64,
    pub values: Vec<f64>,
}

impl FeatureRow {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
    /// Bond-weeks dropped because fewer than two returns were available.
    pub dropped_volatility: usize,
}

/// Sample standard deviation of log returns, times 100. `None` with fewer
/// than two returns.
pub fn weekly_volatility(prices: &[f64]) -> Option<f64> {
    if prices.len() < 3 {
        return None;
    }
    let r: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt() * 100.0)
}

fn share(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        part / total
    } else {
        0.0
    }
}

fn bond_week_row(
    weekly: &WeeklySpread,
    trades: &[&SignedTrade],
    bond: &BondReference,
    context: &MarketContext,
    calendar: &Calendar,
) -> Result<Option<FeatureRow>> {
    let prices: Vec<f64> = trades.iter().map(|t| t.trade.price).collect();
    let Some(volatility) = weekly_volatility(&prices) else {
        return Ok(None);
    };

    let trade_days: BTreeSet<NaiveDate> = trades.iter().map(|t| t.trade.time.date()).collect();
    let zero_days = calendar
        .business_days_in_iso_week(weekly.week.monday())
        .into_iter()
        .filter(|d| !trade_days.contains(d))
        .count();

    let (mut n_buy, mut n_sell, mut v_buy, mut v_sell, mut volume) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in trades {
        volume += t.trade.volume;
        match t.trade.leg {
            Leg::CustomerBuy => {
                n_buy += 1.0;
                v_buy += t.trade.volume;
            }
            Leg::CustomerSell => {
                n_sell += 1.0;
                v_sell += t.trade.volume;
            }
            Leg::DealerDealer => {}
        }
    }

    let avg_price = prices.iter().sum::<f64>() / prices.len() as f64;
    let as_of = *trade_days.last().expect("non-empty week");
    let duration = bond.duration(avg_price, as_of)?;
    let libor_ois = context.get(weekly.week)?;

    let mut values = vec![
        volatility,
        trade_days.len() as f64,
        (1.0 + zero_days as f64).log10(),
        share(n_buy, n_buy + n_sell),
        share(n_sell, n_buy + n_sell),
        share(v_buy, v_buy + v_sell),
        share(v_sell, v_buy + v_sell),
        (trades.len() as f64).log10(),
        volume.log10(),
        avg_price,
        bond.coupon_rate,
        duration,
        year_fraction(as_of, bond.maturity_date),
        year_fraction(bond.issue_date, as_of),
        volume / bond.amount_outstanding,
        libor_ois,
        f64::from(u8::from(bond.grade == Grade::HighYield)),
        f64::from(u8::from(bond.grade == Grade::InvestmentGrade)),
    ];
    values.extend((1..=9).map(|s| f64::from(u8::from(bond.sector.index() == s))));
    debug_assert_eq!(values.len(), FEATURE_NAMES.len());
    debug_assert_eq!(values[SECTOR_OFFSET..].iter().sum::<f64>(), 1.0);

    Ok(Some(FeatureRow {
        cusip: weekly.cusip.clone(),
        week: weekly.week,
        response: weekly.mean_s,
        values,
    }))
}

/// Builds one row per weekly spread, using every trade (customer and
/// inter-dealer, RPT legs included) of that bond-week.
pub fn build_feature_matrix(
    weekly: &[WeeklySpread],
    trades: &[SignedTrade],
    references: &HashMap<String, BondReference>,
    context: &MarketContext,
    calendar: &Calendar,
) -> Result<FeatureTable> {
    let mut by_bond_week: HashMap<(&str, IsoWeek), Vec<&SignedTrade>> = HashMap::new();
    for t in trades {
        by_bond_week
            .entry((t.trade.cusip.as_str(), IsoWeek::of(t.trade.time.date())))
            .or_default()
            .push(t);
    }

    let rows: Vec<Option<FeatureRow>> = weekly
        .par_iter()
        .map(|w| {
            let bond = references
                .get(&w.cusip)
                .ok_or_else(|| Error::MissingReference(w.cusip.clone()))?;
            match by_bond_week.get(&(w.cusip.as_str(), w.week)) {
                Some(ts) => bond_week_row(w, ts, bond, context, calendar),
                None => Ok(None),
            }
        })
        .collect::<Result<_>>()?;

    let dropped = rows.iter().filter(|r| r.is_none()).count();
    if dropped > 0 {
        info!(dropped, "bond-weeks without two returns dropped");
    }
    Ok(FeatureTable {
        rows: rows.into_iter().flatten().collect(),
        dropped_volatility: dropped,
    })
}

impl FeatureTable {
    /// Default regression columns: every feature except the reference
    /// categories and any column that is constant over the table.
    pub fn default_columns(&self) -> Vec<String> {
        FEATURE_NAMES
            .iter()
            .enumerate()
            .filter(|(_, name)| !REFERENCE_CATEGORIES.contains(name))
            .filter(|(j, name)| {
                let first = self.rows.first().map(|r| r.values[*j]);
                let constant = self.rows.iter().all(|r| Some(r.values[*j]) == first);
                if constant {
                    debug!(column = *name, "constant column left out of design");
                }
                !constant
            })
            .map(|(_, name)| name.to_string())
            .collect()
    }

    pub fn filter_weeks(&self, from: IsoWeek, to: IsoWeek) -> FeatureTable {
        FeatureTable {
            rows: self
                .rows
                .iter()
                .filter(|r| r.week >= from && r.week <= to)
                .cloned()
                .collect(),
            dropped_volatility: 0,
        }
    }

    pub fn to_dataset(&self, columns: &[String]) -> Result<Dataset> {
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                FEATURE_NAMES
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown feature {c:?}")))
            })
            .collect::<Result<_>>()?;
        let x: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&j| r.values[j]).collect())
            .collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.response).collect();
        Dataset::from_rows(columns.to_vec(), &x, &y)
    }

    pub fn write<W: Write>(&self, sink: W, meta: Option<&Provenance>) -> Result<()> {
        let mut w = csv_writer(sink, meta)?;
        let mut header = vec!["cusip", "iso_week", "mean_s_bp"];
        header.extend(FEATURE_NAMES);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.cusip.clone(), r.week.to_string(), fmt_f64(r.response)];
            rec.extend(r.values.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv_reader(source);
        let mut expected = vec!["cusip", "iso_week", "mean_s_bp"];
        expected.extend(FEATURE_NAMES);
        let idx = header_indices(&reader.headers()?.clone(), &expected)?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = record_line(&rec);
            let get = |i: usize| rec.get(idx[i]).unwrap_or("");
            let values = (0..FEATURE_NAMES.len())
                .map(|j| parse_f64(get(j + 3), line, FEATURE_NAMES[j]))
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureRow {
                cusip: get(0).to_string(),
                week: IsoWeek::parse(get(1)).ok_or_else(|| Error::parse(line, "iso_week", "expected YYYY-Www"))?,
                response: parse_f64(get(2), line, "mean_s_bp")?,
                values,
            });
        }
        Ok(Self {
            rows,
            dropped_volatility: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use chrono::{Duration, NaiveDateTime};
    use proptest::prelude::*;

    use super::*;
    use crate::classify::sign_of;
    use crate::reference::Sector;
    use crate::tape::CleanTrade;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn bond() -> BondReference {
        BondReference {
            cusip: "123456AB7".into(),
            coupon_rate: 5.0,
            issue_date: d("2012-03-01"),
            maturity_date: d("2022-03-01"),
            amount_outstanding: 500_000_000.0,
            grade: Grade::HighYield,
            sector: Sector::new(4).unwrap(),
            frequency: 2,
        }
    }

    fn trade(k: usize, when: NaiveDateTime, price: f64, volume: f64, leg: Leg) -> SignedTrade {
        SignedTrade {
            trade: CleanTrade {
                record_id: format!("r{k}"),
                cusip: "123456AB7".into(),
                k,
                time: when,
                price,
                volume,
                leg,
            },
            epsilon: sign_of(leg, false),
            is_rpt: false,
        }
    }

    fn context() -> MarketContext {
        let mut ctx = MarketContext::default();
        ctx.libor_ois.insert(IsoWeek::of(d("2015-03-02")), 0.1);
        ctx
    }

    fn week_tape(volume_scale: f64) -> Vec<SignedTrade> {
        let mon = d("2015-03-02").and_hms_opt(10, 0, 0).unwrap();
        vec![
            trade(0, mon, 100.0, 1e6 * volume_scale, Leg::CustomerBuy),
            trade(
                1,
                mon + Duration::hours(1),
                101.0,
                2e6 * volume_scale,
                Leg::CustomerSell,
            ),
            trade(2, mon + Duration::days(2), 100.0, 3e6 * volume_scale, Leg::DealerDealer),
            trade(
                3,
                mon + Duration::days(2) + Duration::hours(2),
                100.5,
                2e6 * volume_scale,
                Leg::CustomerBuy,
            ),
        ]
    }

    fn build(trades: &[SignedTrade]) -> FeatureTable {
        let weekly = vec![WeeklySpread {
            cusip: "123456AB7".into(),
            week: IsoWeek::of(d("2015-03-02")),
            mean_s: 42.0,
            n_obs: 1,
        }];
        let refs = [("123456AB7".to_string(), bond())].into_iter().collect();
        let cal = Calendar::new([d("2015-03-06")]);
        build_feature_matrix(&weekly, trades, &refs, &context(), &cal).unwrap()
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(weekly_volatility(&[100.0, 100.0, 100.0]), Some(0.0));
        let r = [(1.01f64).ln(), (100.0f64 / 101.0).ln()];
        let m = (r[0] + r[1]) / 2.0;
        let oracle = (((r[0] - m).powi(2) + (r[1] - m).powi(2)) / 1.0).sqrt() * 100.0;
        assert_relative_eq!(
            weekly_volatility(&[100.0, 101.0, 100.0]).unwrap(),
            oracle,
            epsilon = 1e-12
        );
        // With the n-1 denominator this is sqrt(2) * 100 * ln(1.01); the
        // population (denominator n) figure would be 0.9950.
        assert_relative_eq!(oracle, 1.40719, epsilon = 1e-5);
        assert_eq!(weekly_volatility(&[100.0, 102.0]), None);
    }

    #[test]
    fn hand_built_week() {
        let table = build(&week_tape(1.0));
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.response, 42.0);
        assert_eq!(row.get("n_trading_days"), Some(2.0));
        // Five weekdays, Friday a holiday, trades on Monday and Wednesday.
        assert_relative_eq!(row.get("log_zero_trade_days").unwrap(), 3f64.log10());
        assert_relative_eq!(row.get("prop_n_buy").unwrap(), 2.0 / 3.0);
        assert_relative_eq!(row.get("prop_vol_buy").unwrap(), 3.0 / 5.0);
        assert_relative_eq!(row.get("trading_activity").unwrap(), 4f64.log10());
        assert_relative_eq!(row.get("log_total_volume").unwrap(), 8e6f64.log10());
        assert_relative_eq!(row.get("log_total_volume").unwrap(), 6.903, epsilon = 1e-3);
        assert_relative_eq!(row.get("avg_price").unwrap(), 100.375);
        assert_relative_eq!(row.get("turnover").unwrap(), 8e6 / 5e8);
        assert_eq!(row.get("ind_hy"), Some(1.0));
        assert_eq!(row.get("sector_s4"), Some(1.0));
        let as_of = d("2015-03-04");
        assert_relative_eq!(
            row.get("years_to_maturity").unwrap() + row.get("years_since_issuance").unwrap(),
            year_fraction(bond().issue_date, bond().maturity_date),
            epsilon = 1e-12
        );
        assert_relative_eq!(row.get("duration").unwrap(), bond().duration(100.375, as_of).unwrap());
    }

    #[test]
    fn eighteen_trades_activity() {
        assert_relative_eq!(18f64.log10(), 1.2553, epsilon = 1e-4);
    }

    #[test]
    fn buys_only_and_thin_weeks() {
        let mut tape = week_tape(1.0);
        for t in &mut tape {
            t.trade.leg = Leg::CustomerBuy;
        }
        let row = &build(&tape).rows[0];
        assert_eq!(row.get("prop_n_buy"), Some(1.0));
        assert_eq!(row.get("prop_n_sell"), Some(0.0));

        let thin = build(&week_tape(1.0)[..2]);
        assert!(thin.rows.is_empty());
        assert_eq!(thin.dropped_volatility, 1);
    }

    #[test]
    fn missing_reference_names_cusip() {
        let weekly = vec![WeeklySpread {
            cusip: "NOPE00000".into(),
            week: IsoWeek::of(d("2015-03-02")),
            mean_s: 1.0,
            n_obs: 1,
        }];
        let err = build_feature_matrix(&weekly, &[], &HashMap::new(), &context(), &Calendar::default()).unwrap_err();
        assert!(matches!(err, Error::MissingReference(c) if c == "NOPE00000"));
    }

    #[test]
    fn default_columns_drop_reference_and_constant() {
        let table = build(&week_tape(1.0));
        let cols = table.default_columns();
        assert!(!cols
            .iter()
            .any(|c| c == "ind_ig" || c == "sector_s9" || c == "prop_n_sell"));
        // A single row makes every column constant.
        assert!(cols.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let table = build(&week_tape(1.0));
        let mut buf = Vec::new();
        table.write(&mut buf, None).unwrap();
        assert_eq!(FeatureTable::read(buf.as_slice()).unwrap().rows, table.rows);
    }

    proptest! {
        #[test]
        fn volume_scaling(scale_pow in 0..4i32) {
            let c = 10f64.powi(scale_pow);
            let base = &build(&week_tape(1.0)).rows[0];
            let scaled = &build(&week_tape(c)).rows[0];
            prop_assert!((scaled.get("log_total_volume").unwrap() - base.get("log_total_volume").unwrap() - f64::from(scale_pow)).abs() < 1e-12);
            for name in ["prop_n_buy", "prop_vol_buy", "prop_vol_sell", "trading_activity"] {
                prop_assert!((scaled.get(name).unwrap() - base.get(name).unwrap()).abs() < 1e-12);
            }
            let hot = |prefix: &str| scaled.values.iter().zip(FEATURE_NAMES).filter(|(_, n)| n.starts_with(prefix)).map(|(v, _)| *v).sum::<f64>();
            prop_assert_eq!(hot("ind_"), 1.0);
            prop_assert_eq!(hot("sector_"), 1.0);
        }
    }
}
