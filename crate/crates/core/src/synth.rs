//! Synthetic data with known ground truth: propagator-driven signed event
//! series, and full trade-tape fixtures with planted RPTs, lifecycle records
//! and filter violations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Datelike, Duration, Months, NaiveDate, NaiveDateTime, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::find_size_runs;
use crate::error::{Error, Result};
use crate::impact::{MidSource, SignSeries};
use crate::output::{Provenance, TOOL_NAME, TOOL_VERSION};
use crate::reference::{write_references, BondReference, Grade, MarketContext, Sector};
use crate::tape::{
    write_trace_csv, Calendar, Capacity, CleanTrade, ContraParty, CustomerSide, IsoWeek, Leg, RawTradeReport,
    ReportKind, SubProduct, HY_VOLUME_CAP, IG_VOLUME_CAP,
};

/// Propagator shape, in basis points of log mid-price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `g0 exp(-beta j)`
    Exponential {
        g0: f64,
        beta: f64,
    },
    /// `g0 (1 + j)^(-gamma)`
    PowerLaw {
        g0: f64,
        gamma: f64,
    },
    Constant {
        g0: f64,
    },
}

impl KernelSpec {
    pub fn g0(&self) -> f64 {
        match *self {
            KernelSpec::Exponential { g0, .. } | KernelSpec::PowerLaw { g0, .. } | KernelSpec::Constant { g0 } => g0,
        }
    }

    pub fn at(&self, j: usize) -> f64 {
        let x = j as f64;
        match *self {
            KernelSpec::Exponential { g0, beta } => g0 * (-beta * x).exp(),
            KernelSpec::PowerLaw { g0, gamma } => g0 * (1.0 + x).powf(-gamma),
            KernelSpec::Constant { g0 } => g0,
        }
    }

    /// `G(0..=n)`.
    pub fn table(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.at(j)).collect()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Exponential { g0, beta } => g0 >= 0.0 && beta >= 0.0,
            KernelSpec::PowerLaw { g0, gamma } => g0 >= 0.0 && gamma >= 0.0,
            KernelSpec::Constant { g0 } => g0 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "kernel parameters must be non-negative: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum SignProcess {
    Iid {
        buy_prob: f64,
    },
    /// Each sign repeats the previous one except with probability `flip_prob`.
    Markov {
        flip_prob: f64,
    },
}

impl SignProcess {
    /// `C(n) / C(0)` for the sign process, when it has a closed form.
    pub fn autocorrelation(&self, n: usize) -> f64 {
        match *self {
            SignProcess::Iid { buy_prob } => {
                if n == 0 {
                    1.0
                } else {
                    (2.0 * buy_prob - 1.0).powi(2)
                }
            }
            SignProcess::Markov { flip_prob } => (1.0 - 2.0 * flip_prob).powi(n as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    pub n_bonds: usize,
    pub start_date: NaiveDate,
    pub holidays: Vec<NaiveDate>,
    /// Customer events per bond per business day.
    pub trades_per_day: usize,
    pub dealer_fraction: f64,
    pub rpt_fraction: f64,
    pub cancel_rate: f64,
    pub correction_rate: f64,
    pub reversal_rate: f64,
    /// Records violating each filter step, per bond.
    pub junk_per_step: usize,
    pub ig_fraction: f64,
    /// High-yield half-spread as a multiple of `half_spread_bp`.
    pub hy_spread_multiplier: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            n_bonds: 20,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
            holidays: vec![
                NaiveDate::from_ymd_opt(2015, 1, 19).unwrap(),
                NaiveDate::from_ymd_opt(2015, 2, 16).unwrap(),
                NaiveDate::from_ymd_opt(2015, 4, 3).unwrap(),
                NaiveDate::from_ymd_opt(2015, 5, 25).unwrap(),
            ],
            trades_per_day: 100,
            dealer_fraction: 0.1,
            rpt_fraction: 0.1,
            cancel_rate: 0.01,
            correction_rate: 0.01,
            reversal_rate: 0.002,
            junk_per_step: 1,
            ig_fraction: 0.6,
            hy_spread_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Signed events per series (per bond in a fixture).
    pub n_events: usize,
    /// Kernel of buy events, and of every event unless `sell_kernel` is set.
    pub kernel: KernelSpec,
    pub sell_kernel: Option<KernelSpec>,
    pub signs: SignProcess,
    /// Standard deviation of the i.i.d. Gaussian mid noise, bp.
    pub sigma_eta: f64,
    pub alpha: f64,
    /// Log-normal volume law: `ln V ~ N(volume_mu, volume_sigma^2)`.
    pub volume_mu: f64,
    pub volume_sigma: f64,
    pub initial_mid: f64,
    /// Half-spread of trade prices around the mid, bp.
    pub half_spread_bp: f64,
    /// Kernel lags simulated explicitly; beyond this the kernel stays at `G(horizon)`.
    pub horizon: usize,
    /// Lags tabulated in the manifest.
    pub manifest_lags: usize,
    pub fixture: FixtureConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_events: 5000,
            kernel: KernelSpec::Exponential { g0: 25.0, beta: 0.4 },
            sell_kernel: None,
            signs: SignProcess::Iid { buy_prob: 0.5 },
            sigma_eta: 5.0,
            alpha: 0.0,
            volume_mu: 50_000f64.ln(),
            volume_sigma: 1.0,
            initial_mid: 100.0,
            half_spread_bp: 10.0,
            horizon: 1000,
            manifest_lags: 10,
            fixture: FixtureConfig::default(),
        }
    }
}

fn unit(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(Error::Config("n_events must be at least 1".into()));
        }
        self.kernel.validate()?;
        if let Some(k) = &self.sell_kernel {
            k.validate()?;
        }
        match self.signs {
            SignProcess::Iid { buy_prob } => unit("buy_prob", buy_prob)?,
            SignProcess::Markov { flip_prob } => unit("flip_prob", flip_prob)?,
        }
        for (name, v) in [
            ("sigma_eta", self.sigma_eta),
            ("half_spread_bp", self.half_spread_bp),
            ("alpha", self.alpha),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.volume_sigma >= 0.0 && self.volume_mu.is_finite()) {
            return Err(Error::Config("volume law needs finite mu and sigma >= 0".into()));
        }
        if !(self.initial_mid > 0.0) {
            return Err(Error::Config("initial_mid must be positive".into()));
        }
        let f = &self.fixture;
        for (name, p) in [
            ("dealer_fraction", f.dealer_fraction),
            ("rpt_fraction", f.rpt_fraction),
            ("cancel_rate", f.cancel_rate),
            ("correction_rate", f.correction_rate),
            ("reversal_rate", f.reversal_rate),
            ("ig_fraction", f.ig_fraction),
        ] {
            unit(name, p)?;
        }
        if !(f.hy_spread_multiplier >= 0.0 && f.hy_spread_multiplier.is_finite()) {
            return Err(Error::Config("hy_spread_multiplier must be finite and >= 0".into()));
        }
        if f.trades_per_day == 0 {
            return Err(Error::Config("trades_per_day must be at least 1".into()));
        }
        Ok(())
    }

    fn kernel_for(&self, sign: i8) -> &KernelSpec {
        match (&self.sell_kernel, sign) {
            (Some(k), -1) => k,
            _ => &self.kernel,
        }
    }

    /// `E[V^a]` of the log-normal volume law.
    pub fn volume_moment(&self, a: f64) -> f64 {
        (a * self.volume_mu + 0.5 * a * a * self.volume_sigma * self.volume_sigma).exp()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LifecycleCounts {
    pub cancels: usize,
    pub corrections: usize,
    pub reversals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRpt {
    pub cusip: String,
    pub first: String,
    pub second: String,
    /// The pair sits inside an equal-volume run longer than two trades.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStep {
    pub step: u8,
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: SynthConfig,
    /// Signed events of type +1 and -1.
    pub events_per_type: BTreeMap<String, usize>,
    /// `C(n)` for `n = 0..=manifest_lags` from the sign process and volume law.
    pub analytic_c: Vec<f64>,
    /// Ground-truth `G(0..=manifest_lags)` per event type.
    pub kernels: BTreeMap<String, Vec<f64>>,
    pub records_written: usize,
    pub lifecycle: LifecycleCounts,
    pub rpt_pairs_planted: usize,
    pub rpt_pairs: Vec<PlantedRpt>,
    pub expected_filter: Vec<ExpectedStep>,
}

impl SynthManifest {
    fn new(config: &SynthConfig) -> Self {
        let c0 = config.volume_moment(config.alpha);
        let mut kernels = BTreeMap::new();
        match &config.sell_kernel {
            None => {
                kernels.insert("all".into(), config.kernel.table(config.manifest_lags));
            }
            Some(sell) => {
                kernels.insert("+1".into(), config.kernel.table(config.manifest_lags));
                kernels.insert("-1".into(), sell.table(config.manifest_lags));
            }
        }
        SynthManifest {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed: config.seed,
            config: config.clone(),
            events_per_type: BTreeMap::new(),
            analytic_c: (0..=config.manifest_lags)
                .map(|n| c0 * config.signs.autocorrelation(n))
                .collect(),
            kernels,
            records_written: 0,
            lifecycle: LifecycleCounts::default(),
            rpt_pairs_planted: 0,
            rpt_pairs: Vec::new(),
            expected_filter: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }
}

/// Raw simulated path: signs, volumes and mids.
struct Path3 {
    eps: Vec<i8>,
    volume: Vec<f64>,
    mid: Vec<f64>,
}

/// Last lag at which the kernel differs from its plateau value `G(horizon)`.
fn effective_horizon(k: &KernelSpec, horizon: usize) -> usize {
    let plateau = k.at(horizon);
    let tol = 1e-13 * k.g0().max(1.0);
    (0..horizon)
        .rev()
        .find(|&j| (k.at(j) - plateau).abs() > tol)
        .map_or(0, |j| j + 1)
}

/// Simulates `x_k = sum_{k' <= k} [G_{pi_k'}(k - k') V_k'^a eps_k' + eta_k']` in bp
/// and returns mids `M_k = M0 exp(x_k / 1e4)`.
fn simulate(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Path3> {
    let t = config.n_events;
    let volume_law =
        LogNormal::new(config.volume_mu, config.volume_sigma).map_err(|e| Error::Config(format!("volume law: {e}")))?;
    let noise = Normal::new(0.0, config.sigma_eta).map_err(|e| Error::Config(format!("noise law: {e}")))?;

    let mut eps = Vec::with_capacity(t);
    let mut volume = Vec::with_capacity(t);
    let mut eta = Vec::with_capacity(t);
    let mut prev: i8 = 1;
    for k in 0..t {
        let e = match config.signs {
            SignProcess::Iid { buy_prob } => {
                if rng.random_bool(buy_prob) {
                    1
                } else {
                    -1
                }
            }
            SignProcess::Markov { flip_prob } => {
                if k == 0 {
                    if rng.random_bool(0.5) {
                        1
                    } else {
                        -1
                    }
                } else if rng.random_bool(flip_prob) {
                    -prev
                } else {
                    prev
                }
            }
        };
        prev = e;
        eps.push(e);
        volume.push(volume_law.sample(rng));
        eta.push(if config.sigma_eta > 0.0 { noise.sample(rng) } else { 0.0 });
    }

    let mut x = vec![0.0; t];
    let types: Vec<i8> = if config.sell_kernel.is_some() {
        vec![1, -1]
    } else {
        vec![0]
    };
    for ty in types {
        let kernel = config.kernel_for(ty);
        let h = effective_horizon(kernel, config.horizon);
        let plateau = kernel.at(config.horizon);
        let transient: Vec<f64> = (0..h).map(|j| kernel.at(j) - plateau).collect();
        let a: Vec<f64> = (0..t)
            .map(|k| {
                if ty == 0 || eps[k] == ty {
                    let w = if config.alpha == 0.0 {
                        1.0
                    } else {
                        volume[k].powf(config.alpha)
                    };
                    w * f64::from(eps[k])
                } else {
                    0.0
                }
            })
            .collect();
        let mut cum = 0.0;
        for k in 0..t {
            cum += a[k];
            let mut v = plateau * cum;
            for (j, g) in transient.iter().enumerate().take(k + 1) {
                v += g * a[k - j];
            }
            x[k] += v;
        }
    }
    let mut noise_sum = 0.0;
    let mid = x
        .iter()
        .zip(&eta)
        .map(|(xk, e)| {
            noise_sum += e;
            config.initial_mid * ((xk + noise_sum) * 1e-4).exp()
        })
        .collect();
    Ok(Path3 { eps, volume, mid })
}

fn count_types(eps: &[i8]) -> BTreeMap<String, usize> {
    let buys = eps.iter().filter(|e| **e > 0).count();
    BTreeMap::from([("+1".to_string(), buys), ("-1".to_string(), eps.len() - buys)])
}

/// One propagator-driven series (stream 0 of the configured seed).
pub fn generate_tim_series(config: &SynthConfig) -> Result<(SignSeries, SynthManifest)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let path = simulate(config, &mut rng)?;
    let mut manifest = SynthManifest::new(config);
    manifest.events_per_type = count_types(&path.eps);
    let series = SignSeries {
        cusip: "SYNTH0001".into(),
        pi: path.eps.clone(),
        eps: path.eps,
        volume: path.volume,
        mid: path.mid,
        mid_source: MidSource::Synthetic,
    };
    Ok((series, manifest))
}

/// A synthetic market: tape, reference data, weekly context, calendar and manifest.
#[derive(Debug, Clone)]
pub struct TraceFixture {
    pub reports: Vec<RawTradeReport>,
    pub references: Vec<BondReference>,
    pub context: MarketContext,
    pub calendar: Calendar,
    pub manifest: SynthManifest,
}

pub const FIXTURE_FILES: [&str; 5] = [
    "trace.csv",
    "reference.csv",
    "context.csv",
    "calendar.txt",
    "manifest.json",
];

impl TraceFixture {
    pub fn write(&self, dir: &Path, meta: Option<&Provenance>) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            Ok(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?))
        };
        write_trace_csv(create("trace.csv")?, &self.reports, meta)?;
        write_references(create("reference.csv")?, &self.references, meta)?;
        self.context.write(create("context.csv")?, meta)?;
        let cal = dir.join("calendar.txt");
        std::fs::write(&cal, self.calendar.to_text()).map_err(|e| Error::io(&cal, e))?;
        self.manifest.write(&dir.join("manifest.json"))
    }
}

pub fn cusip_of(bond: usize) -> String {
    format!("SY{bond:07}")
}

fn session_secs() -> (u32, u32) {
    (8 * 3600, 17 * 3600 + 15 * 60)
}

fn base_report(cusip: &str, id: String, time: NaiveDateTime, price: f64, volume: f64, leg: Leg) -> RawTradeReport {
    let (contra_party, customer_side) = match leg {
        Leg::CustomerBuy => (ContraParty::Customer, Some(CustomerSide::CustomerBuy)),
        Leg::CustomerSell => (ContraParty::Customer, Some(CustomerSide::CustomerSell)),
        Leg::DealerDealer => (ContraParty::Dealer, None),
    };
    RawTradeReport {
        row: 0,
        record_id: id,
        cusip: cusip.to_string(),
        exec_time: time,
        price,
        volume,
        kind: ReportKind::Trade,
        references_record: None,
        capacity: Capacity::Principal,
        contra_party,
        customer_side,
        sale_condition: BTreeSet::new(),
        sub_product: SubProduct::CorporateBond,
    }
}

fn leg_of(sign: i8) -> Leg {
    if sign > 0 {
        Leg::CustomerBuy
    } else {
        Leg::CustomerSell
    }
}

fn round_volume(v: f64) -> f64 {
    ((v / 1000.0).round() * 1000.0).max(1000.0)
}

fn business_days(calendar: &Calendar, start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    while !calendar.is_business_day(d) {
        d += Duration::days(1);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(d);
        d = calendar.next_business_day(d);
    }
    out
}

struct BondTape {
    reports: Vec<RawTradeReport>,
    lifecycle: LifecycleCounts,
    planted: Vec<PlantedRpt>,
    eps: Vec<i8>,
}

/// Tape of one bond. Lifecycle noise is added around the true tape so that
/// reconciliation restores it exactly: cancels and reversals remove extra
/// erroneous trades, corrections fix a mispriced original.
fn bond_tape(config: &SynthConfig, bond: usize, grade: Grade, days: &[NaiveDate]) -> Result<BondTape> {
    let f = &config.fixture;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(bond as u64 + 1);
    let path = simulate(config, &mut rng)?;
    let cusip = cusip_of(bond);
    let h = match grade {
        Grade::HighYield => config.half_spread_bp * config.fixture.hy_spread_multiplier,
        Grade::InvestmentGrade => config.half_spread_bp,
    } * 1e-4;
    let volume_law =
        LogNormal::new(config.volume_mu, config.volume_sigma).map_err(|e| Error::Config(format!("volume law: {e}")))?;

    // Groups of trades sharing one timestamp: a customer event (maybe with an
    // RPT partner) or a standalone dealer trade.
    let mut groups: Vec<Vec<(f64, f64, Leg)>> = Vec::new();
    let mut rpt_groups = Vec::new();
    for k in 0..path.eps.len() {
        if rng.random_bool(f.dealer_fraction) {
            let m = if k == 0 { config.initial_mid } else { path.mid[k - 1] };
            groups.push(vec![(m, round_volume(volume_law.sample(&mut rng)), Leg::DealerDealer)]);
        }
        let e = path.eps[k];
        let price = path.mid[k] * (1.0 + h * f64::from(e));
        let vol = round_volume(path.volume[k]);
        let mut g = vec![(price, vol, leg_of(e))];
        if rng.random_bool(f.rpt_fraction) {
            let partner = if rng.random_bool(0.5) {
                Leg::DealerDealer
            } else {
                leg_of(-e)
            };
            g.push((price, vol, partner));
            rpt_groups.push(groups.len());
        }
        groups.push(g);
    }

    let per_day = f.trades_per_day;
    let (open, close) = session_secs();
    let mut times = Vec::with_capacity(groups.len());
    for chunk in 0..groups.len().div_ceil(per_day) {
        let day = *days
            .get(chunk)
            .ok_or_else(|| Error::Config("calendar window too short".into()))?;
        let n = per_day.min(groups.len() - chunk * per_day);
        let mut secs: Vec<u32> = (0..n).map(|_| rng.random_range(open..=close)).collect();
        secs.sort_unstable();
        for s in secs {
            times.push(day.and_time(NaiveTime::from_num_seconds_from_midnight_opt(s, 0).unwrap()));
        }
    }

    let mut reports = Vec::new();
    let mut lifecycle_records = Vec::new();
    let mut counts = LifecycleCounts::default();
    let mut seq = 0usize;
    let next_id = |seq: &mut usize| {
        *seq += 1;
        format!("{cusip}-{:07}", *seq)
    };
    let mut group_ids: Vec<Vec<String>> = Vec::with_capacity(groups.len());
    let mut true_trades: Vec<CleanTrade> = Vec::new();
    for (g, time) in groups.iter().zip(&times) {
        let mut ids = Vec::new();
        for &(price, vol, leg) in g {
            let id = next_id(&mut seq);
            let mut r = base_report(&cusip, id.clone(), *time, price, vol, leg);
            if rng.random_bool(f.correction_rate) {
                let fix_id = next_id(&mut seq);
                let mut fix = r.clone();
                fix.record_id = fix_id;
                fix.kind = ReportKind::Correction;
                fix.references_record = Some(id.clone());
                r.price = price * 1.01;
                lifecycle_records.push(fix);
                counts.corrections += 1;
            }
            true_trades.push(CleanTrade {
                record_id: id.clone(),
                cusip: cusip.clone(),
                k: true_trades.len(),
                time: *time,
                price,
                volume: vol,
                leg,
            });
            reports.push(r);
            ids.push(id);
        }
        // Erroneous extra report, later cancelled or reversed.
        for (rate, kind) in [
            (f.cancel_rate, ReportKind::Cancel),
            (f.reversal_rate, ReportKind::Reversal),
        ] {
            if rng.random_bool(rate) {
                let (price, vol, leg) = g[0];
                let bad_id = next_id(&mut seq);
                reports.push(base_report(
                    &cusip,
                    bad_id.clone(),
                    *time,
                    price * 0.99,
                    vol + 1000.0,
                    leg,
                ));
                let mut rec = base_report(&cusip, next_id(&mut seq), *time, price * 0.99, vol + 1000.0, leg);
                rec.kind = kind;
                rec.references_record = Some(bad_id);
                lifecycle_records.push(rec);
                match kind {
                    ReportKind::Cancel => counts.cancels += 1,
                    _ => counts.reversals += 1,
                }
            }
        }
        group_ids.push(ids);
    }

    // Records that each fail exactly one filter step.
    let day = days[0];
    let at = |h: u32, m: u32| day.and_time(NaiveTime::from_hms_opt(h, m, 0).unwrap());
    let saturday = {
        let mut d = day;
        while d.weekday() != chrono::Weekday::Sat {
            d += Duration::days(1);
        }
        d
    };
    for _ in 0..f.junk_per_step {
        let p = config.initial_mid;
        let mut agent = base_report(&cusip, next_id(&mut seq), at(10, 0), p, 10_000.0, Leg::DealerDealer);
        agent.capacity = Capacity::Agent;
        let weekend = base_report(
            &cusip,
            next_id(&mut seq),
            saturday.and_hms_opt(10, 0, 0).unwrap(),
            p,
            10_000.0,
            Leg::CustomerBuy,
        );
        let early = base_report(&cusip, next_id(&mut seq), at(7, 30), p, 10_000.0, Leg::CustomerBuy);
        let mut irregular = base_report(&cusip, next_id(&mut seq), at(10, 0), p, 10_000.0, Leg::CustomerSell);
        irregular.sale_condition.insert("Z".into());
        let cheap = base_report(&cusip, next_id(&mut seq), at(10, 0), 5.0, 10_000.0, Leg::CustomerBuy);
        let mut other = base_report(&cusip, next_id(&mut seq), at(10, 0), p, 10_000.0, Leg::CustomerSell);
        other.sub_product = SubProduct::Other;
        reports.extend([agent, weekend, early, irregular, cheap, other]);
    }
    reports.extend(lifecycle_records);

    // Ambiguity is judged on the volumes the classifier sees after capping.
    let cap = match grade {
        Grade::HighYield => HY_VOLUME_CAP,
        Grade::InvestmentGrade => IG_VOLUME_CAP,
    };
    for t in &mut true_trades {
        t.volume = t.volume.min(cap);
    }
    let mut run_len: HashMap<&str, usize> = HashMap::new();
    for run in find_size_runs(&true_trades) {
        for t in &true_trades[run.range()] {
            run_len.insert(t.record_id.as_str(), run.len);
        }
    }
    let planted = rpt_groups
        .iter()
        .map(|&g| {
            let ids = &group_ids[g];
            PlantedRpt {
                cusip: cusip.clone(),
                first: ids[0].clone(),
                second: ids[1].clone(),
                ambiguous: run_len.get(ids[0].as_str()).copied().unwrap_or(0) != 2,
            }
        })
        .collect();

    Ok(BondTape {
        reports,
        lifecycle: counts,
        planted,
        eps: path.eps,
    })
}

fn references(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<BondReference> {
    let start = config.fixture.start_date;
    (0..config.fixture.n_bonds)
        .map(|i| {
            let issued_years = rng.random_range(1..=10u32);
            let maturity_years = rng.random_range(2..=25u32);
            let coupon = (rng.random_range(2.0..7.0f64) * 8.0).round() / 8.0;
            BondReference {
                cusip: cusip_of(i),
                coupon_rate: coupon,
                issue_date: start - Months::new(12 * issued_years),
                maturity_date: start + Months::new(12 * maturity_years),
                amount_outstanding: (rng.random_range(1e8..1e9f64) / 1e6).round() * 1e6,
                grade: if rng.random_bool(config.fixture.ig_fraction) {
                    Grade::InvestmentGrade
                } else {
                    Grade::HighYield
                },
                sector: Sector::new((i % 9) as u8 + 1).expect("sector index in range"),
                frequency: 2,
            }
        })
        .collect()
}

/// Full synthetic market. Bond `i` draws from ChaCha8 stream `i + 1` of the
/// configured seed; reference data and context use stream 0.
pub fn generate_trace_fixture(config: &SynthConfig) -> Result<TraceFixture> {
    config.validate()?;
    let f = &config.fixture;
    if f.n_bonds == 0 {
        return Err(Error::Config("fixture needs at least one bond".into()));
    }
    let calendar = Calendar::new(f.holidays.iter().copied());
    let groups_bound = (config.n_events as f64 * (1.0 + f.dealer_fraction)).ceil() as usize + config.n_events;
    let days = business_days(&calendar, f.start_date, groups_bound.div_ceil(f.trades_per_day) + 1);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let references = references(config, &mut rng);
    let tapes: Vec<BondTape> = (0..f.n_bonds)
        .into_par_iter()
        .map(|i| bond_tape(config, i, references[i].grade, &days))
        .collect::<Result<_>>()?;

    let mut manifest = SynthManifest::new(config);
    let mut reports = Vec::new();
    let mut all_eps = Vec::new();
    for tape in tapes {
        manifest.lifecycle.cancels += tape.lifecycle.cancels;
        manifest.lifecycle.corrections += tape.lifecycle.corrections;
        manifest.lifecycle.reversals += tape.lifecycle.reversals;
        manifest.rpt_pairs.extend(tape.planted);
        all_eps.extend(tape.eps);
        reports.extend(tape.reports);
    }
    manifest.events_per_type = count_types(&all_eps);
    manifest.rpt_pairs_planted = manifest.rpt_pairs.len();
    manifest.records_written = reports.len();
    let lc = &manifest.lifecycle;
    let lifecycle_records = lc.cancels + lc.corrections + lc.reversals;
    let junk = f.junk_per_step * f.n_bonds;
    manifest.expected_filter = std::iter::once(ExpectedStep {
        step: 1,
        removed: lifecycle_records + lc.cancels + lc.reversals,
    })
    .chain((2..=7).map(|step| ExpectedStep { step, removed: junk }))
    .collect();

    let last_day = days.last().copied().unwrap_or(f.start_date);
    let mut libor_ois = BTreeMap::new();
    let mut week = IsoWeek::of(f.start_date);
    let context_noise = Normal::new(0.0, 2.0).expect("valid normal");
    while week.monday() <= last_day {
        libor_ois.insert(week, 12.0 + context_noise.sample(&mut rng));
        week = IsoWeek::of(week.monday() + Duration::days(7));
    }

    Ok(TraceFixture {
        reports,
        references,
        context: MarketContext { libor_ois },
        calendar,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::impact::{estimate_correlation, estimate_response};
    use crate::tape::{ingest, reconcile_lifecycle, FilterConfig};

    fn series_config(t: usize) -> SynthConfig {
        SynthConfig {
            n_events: t,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn single_event_jump() {
        let cfg = SynthConfig {
            n_events: 1,
            sigma_eta: 0.0,
            kernel: KernelSpec::Constant { g0: 30.0 },
            ..SynthConfig::default()
        };
        let (s, m) = generate_tim_series(&cfg).unwrap();
        let expected = 100.0 * (30.0e-4 * f64::from(s.eps[0])).exp();
        assert_relative_eq!(s.mid[0], expected, epsilon = 1e-12);
        assert_eq!(m.kernels["all"], vec![30.0; 11]);

        let cfg = SynthConfig { n_events: 5, ..cfg };
        let (s, _) = generate_tim_series(&cfg).unwrap();
        let r = s.returns_bp();
        for k in 0..4 {
            assert_relative_eq!(r[k], 30.0 * f64::from(s.eps[k + 1]), epsilon = 1e-9);
        }
    }

    #[test]
    fn pure_noise_is_a_random_walk() {
        let cfg = SynthConfig {
            kernel: KernelSpec::Constant { g0: 0.0 },
            sigma_eta: 3.0,
            ..series_config(50_000)
        };
        let (s, _) = generate_tim_series(&cfg).unwrap();
        let r = s.returns_bp();
        let var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
        assert!((var - 9.0).abs() < 0.3, "{var}");
    }

    #[test]
    fn exponential_kernel_moments_match_analytic_values() {
        let cfg = series_config(100_000);
        let (s, m) = generate_tim_series(&cfg).unwrap();
        let c = estimate_correlation(&s, 0.0, &[0, 1, 2, 3]).unwrap();
        assert_eq!(c[0], m.analytic_c[0]);
        let t = s.len() as f64;
        for n in 1..4 {
            assert!((c[n] - m.analytic_c[n]).abs() < 3.0 / t.sqrt());
        }
        // With i.i.d. signs and C(0) = 1, S(l) = ΔG(l-1) = G(l) - G(l-1).
        let g = &m.kernels["all"];
        let sv = estimate_response(&s.eps, &s.returns_bp(), 4).unwrap();
        let sd = (g[0] * g[0] + 25.0 + 150.0).sqrt() / t.sqrt();
        for l in 1..=4 {
            let analytic = g[l] - g[l - 1];
            assert!(
                (sv[l - 1] - analytic).abs() < 3.0 * sd,
                "S({l}) = {} vs {analytic}",
                sv[l - 1]
            );
        }
    }

    #[test]
    fn markov_signs_match_closed_form() {
        let p = 0.3;
        let cfg = SynthConfig {
            signs: SignProcess::Markov { flip_prob: p },
            ..series_config(100_000)
        };
        let (s, m) = generate_tim_series(&cfg).unwrap();
        let c = estimate_correlation(&s, 0.0, &[1, 2, 3]).unwrap();
        // Var of the lag-n sample autocorrelation of a Markov chain is about
        // (1 + rho^2) / (1 - rho^2) / T for small n.
        let rho = 1.0 - 2.0 * p;
        let se = ((1.0 + rho * rho) / (1.0 - rho * rho) / 1e5).sqrt();
        for n in 1..=3 {
            assert!((c[n - 1] - m.analytic_c[n]).abs() < 3.0 * se * (n as f64).sqrt());
        }
    }

    #[test]
    fn reproducible_bytes() {
        let cfg = SynthConfig {
            n_events: 300,
            fixture: FixtureConfig {
                n_bonds: 3,
                ..FixtureConfig::default()
            },
            ..SynthConfig::default()
        };
        let write = |fx: &TraceFixture| {
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &fx.reports, None).unwrap();
            buf.extend(serde_json::to_vec(&fx.manifest).unwrap());
            buf
        };
        let a = generate_trace_fixture(&cfg).unwrap();
        let b = generate_trace_fixture(&cfg).unwrap();
        assert_eq!(write(&a), write(&b));
        let c = generate_trace_fixture(&SynthConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(write(&a), write(&c));
    }

    #[test]
    fn prices_straddle_the_mid() {
        let cfg = SynthConfig {
            n_events: 200,
            fixture: FixtureConfig {
                n_bonds: 1,
                dealer_fraction: 0.0,
                rpt_fraction: 0.0,
                cancel_rate: 0.0,
                correction_rate: 0.0,
                reversal_rate: 0.0,
                junk_per_step: 0,
                ..FixtureConfig::default()
            },
            ..SynthConfig::default()
        };
        let fx = generate_trace_fixture(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let path = simulate(&cfg, &mut rng).unwrap();
        for (r, (m, e)) in fx.reports.iter().zip(path.mid.iter().zip(&path.eps)) {
            let ask = m * (1.0 + 10.0e-4);
            let bid = m * (1.0 - 10.0e-4);
            assert_relative_eq!(ask - bid, 2.0 * 10.0e-4 * m, epsilon = 1e-12);
            assert_eq!(r.price, if *e > 0 { ask } else { bid });
        }
    }

    #[test]
    fn lifecycle_noise_reconciles_to_the_true_tape() {
        let quiet = SynthConfig {
            n_events: 500,
            fixture: FixtureConfig {
                n_bonds: 2,
                cancel_rate: 0.0,
                correction_rate: 0.0,
                reversal_rate: 0.0,
                ..FixtureConfig::default()
            },
            ..SynthConfig::default()
        };
        let fx = generate_trace_fixture(&quiet).unwrap();
        let rec = reconcile_lifecycle(&fx.reports);
        assert_eq!(rec.trades, fx.reports);

        let noisy = SynthConfig {
            fixture: FixtureConfig {
                cancel_rate: 0.1,
                correction_rate: 0.05,
                reversal_rate: 0.02,
                ..quiet.fixture.clone()
            },
            ..quiet.clone()
        };
        let fx = generate_trace_fixture(&noisy).unwrap();
        let (_, report) = ingest(&fx.reports, &fx.calendar, &FilterConfig::default());
        let stats = report.lifecycle.clone().unwrap();
        assert_eq!(stats.cancels_applied, fx.manifest.lifecycle.cancels);
        assert_eq!(stats.corrections_applied, fx.manifest.lifecycle.corrections);
        assert_eq!(stats.reversals_applied, fx.manifest.lifecycle.reversals);
        assert_eq!(stats.dangling_references, 0);
        for e in &fx.manifest.expected_filter {
            assert_eq!(report.step(e.step).unwrap().removed, e.removed, "step {}", e.step);
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = SynthConfig {
            signs: SignProcess::Markov { flip_prob: 1.5 },
            ..SynthConfig::default()
        };
        assert!(matches!(generate_tim_series(&bad), Err(Error::Config(_))));
        let bad = SynthConfig {
            n_events: 0,
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SynthConfig {
            kernel: KernelSpec::Exponential { g0: -1.0, beta: 0.1 },
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kernel_families() {
        assert_relative_eq!(
            KernelSpec::PowerLaw { g0: 10.0, gamma: 0.5 }.at(3),
            5.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            KernelSpec::Exponential { g0: 25.0, beta: 0.4 }.at(10),
            25.0 * (-4.0f64).exp(),
            epsilon = 1e-12
        );
        assert_eq!(effective_horizon(&KernelSpec::Constant { g0: 3.0 }, 1000), 0);
        assert!(effective_horizon(&KernelSpec::Exponential { g0: 25.0, beta: 0.4 }, 1000) < 100);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SynthConfig {
            sell_kernel: Some(KernelSpec::PowerLaw { g0: 20.0, gamma: 0.6 }),
            signs: SignProcess::Markov { flip_prob: 0.2 },
            ..SynthConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: SynthConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
