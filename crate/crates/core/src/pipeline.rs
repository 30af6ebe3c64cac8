//! Stage orchestration behind the CLI: run configuration, file layout and one
//! function per subcommand. Each stage reads the previous stage's files from
//! the output directory, so stages can be run independently.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::info;

use crate::classify::{classify, read_signed_trades, write_signed_trades, SignedTrade};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureTable};
use crate::impact::{aggregate, estimate_bonds, write_signature, ImpactConfig};
use crate::output::{config_hash, Provenance};
use crate::reference::{index_references, read_references, MarketContext};
use crate::regress::{
    fit, fit_ols, k_fold_cv, log_grid, r_squared, relative_error, select_by_ci, Dataset, GridPoint, Model, Penalty,
    ELASTIC_NET_ALPHAS, LASSO_GRID, RIDGE_GRID,
};
use crate::spread::{
    aggregate_weekly, daily_one_sided_spreads, estimate_all_spreads, read_spreads, read_weekly, write_one_sided,
    write_spreads, write_weekly, SpreadConfig,
};
use crate::stats::{ks_two_sample, stationarity_by_period, welch_t, write_stationarity};
use crate::synth::{generate_trace_fixture, SynthConfig};
use crate::tape::{
    cap_volumes, ingest, parse_trace_csv, read_clean_trades, write_clean_trades, Calendar, ColumnMap, FilterConfig,
    FilterReport, IsoWeek,
};

pub const CLEAN_FILE: &str = "clean_trades.csv";
pub const FILTER_FILE: &str = "filter_report.json";
pub const SIGNED_FILE: &str = "signed_trades.csv";
pub const SPREADS_FILE: &str = "spreads.csv";
pub const WEEKLY_FILE: &str = "weekly_spreads.csv";
pub const ONE_SIDED_FILE: &str = "one_sided_spreads.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const FIT_FILE: &str = "fit.json";
pub const IMPACT_DIR: &str = "impact";
pub const KERNELS_FILE: &str = "kernels.json";
pub const REPORT_FILE: &str = "report.json";
pub const STATIONARITY_FILE: &str = "stationarity.csv";

/// Input and output locations. Unset inputs default to the files `generate`
/// writes into the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out_dir: PathBuf,
    pub tape: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub context: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            tape: None,
            reference: None,
            context: None,
            calendar: None,
        }
    }
}

impl Paths {
    fn or_out(&self, p: &Option<PathBuf>, name: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.out_dir.join(name))
    }

    pub fn tape(&self) -> PathBuf {
        self.or_out(&self.tape, "trace.csv")
    }

    pub fn reference(&self) -> PathBuf {
        self.or_out(&self.reference, "reference.csv")
    }

    pub fn context(&self) -> PathBuf {
        self.or_out(&self.context, "context.csv")
    }

    pub fn calendar(&self) -> PathBuf {
        self.or_out(&self.calendar, "calendar.txt")
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Inclusive range of ISO weeks, written `2015-W02..2015-W20` (or one week).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeekRange {
    pub from: IsoWeek,
    pub to: IsoWeek,
}

impl FromStr for WeekRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once("..").unwrap_or((s, s));
        let week = |t: &str| {
            IsoWeek::parse(t.trim()).ok_or_else(|| Error::Config(format!("bad ISO week {t:?} in range {s:?}")))
        };
        let (from, to) = (week(a)?, week(b)?);
        if from > to {
            return Err(Error::Config(format!("week range {s:?} ends before it starts")));
        }
        Ok(Self { from, to })
    }
}

impl fmt::Display for WeekRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Cap volumes at the Standard-tape thresholds before classification.
    pub cap_volumes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub model: Model,
    pub k_folds: usize,
    /// `[lo, hi, points]` of the log-uniform lambda grid; the model's default when unset.
    pub lambda_grid: Option<(f64, f64, usize)>,
    /// Elastic-net mixing values searched.
    pub alphas: Vec<f64>,
    pub penalty: Penalty,
    pub train_range: Option<String>,
    pub test_range: Option<String>,
    /// Regression columns; the table's default set when unset.
    pub columns: Option<Vec<String>>,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            model: Model::LsLasso,
            k_folds: 10,
            lambda_grid: None,
            alphas: ELASTIC_NET_ALPHAS.to_vec(),
            penalty: Penalty::default(),
            train_range: None,
            test_range: None,
            columns: None,
        }
    }
}

impl RegressionConfig {
    pub fn ranges(&self) -> Result<(Option<WeekRange>, Option<WeekRange>)> {
        let train = self.train_range.as_deref().map(str::parse::<WeekRange>).transpose()?;
        let test = self.test_range.as_deref().map(str::parse::<WeekRange>).transpose()?;
        if let (Some(a), Some(b)) = (train, test) {
            if a.to >= b.from {
                return Err(Error::Config(format!(
                    "train range {a} must end before test range {b} starts"
                )));
            }
        }
        if test.is_some() && train.is_none() {
            return Err(Error::Config("a test range needs an explicit train range".into()));
        }
        Ok((train, test))
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        let default = match self.model {
            Model::Ridge => RIDGE_GRID,
            _ => LASSO_GRID,
        };
        let (lo, hi, n) = self.lambda_grid.unwrap_or(default);
        let lambdas = log_grid(lo, hi, n);
        let alphas: Vec<f64> = match self.model {
            Model::ElasticNet => self.alphas.clone(),
            Model::Ridge => vec![0.0],
            _ => vec![1.0],
        };
        alphas
            .iter()
            .flat_map(|&alpha| lambdas.iter().map(move |&lambda| GridPoint { lambda, alpha }))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges()?;
        if self.k_folds < 2 {
            return Err(Error::Config(format!(
                "k_folds must be at least 2, got {}",
                self.k_folds
            )));
        }
        if let Some((lo, hi, n)) = self.lambda_grid {
            if !(lo > 0.0 && hi >= lo && n >= 1) {
                return Err(Error::Config(format!("bad lambda grid [{lo}, {hi}, {n}]")));
            }
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config(
                "elastic-net alphas must be non-empty and within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Grouping of weekly spreads for the stationarity tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Week,
    #[default]
    Month,
    Quarter,
}

impl Period {
    fn label(self, week: IsoWeek) -> String {
        let d = week.monday();
        match self {
            Period::Week => week.to_string(),
            Period::Month => format!("{}-{:02}", d.year(), d.month()),
            Period::Quarter => format!("{}-Q{}", d.year(), (d.month() - 1) / 3 + 1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub period: Period,
}

/// Everything a run needs. Loaded from TOML; CLI flags are applied on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for generation and cross-validation folds; overrides `synth.seed`.
    pub seed: u64,
    pub paths: Paths,
    pub filter: FilterConfig,
    pub classify: ClassifyConfig,
    pub spread: SpreadConfig,
    pub regression: RegressionConfig,
    pub impact: ImpactConfig,
    pub report: ReportConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            paths: Paths::default(),
            filter: FilterConfig::default(),
            classify: ClassifyConfig::default(),
            spread: SpreadConfig::default(),
            regression: RegressionConfig::default(),
            impact: ImpactConfig::default(),
            report: ReportConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.impact.validate()?;
        self.regression.validate()?;
        if self.spread.window_secs <= 0 {
            return Err(Error::Config("spread window must be positive".into()));
        }
        Ok(())
    }

    /// Hash of every setting except file locations, so relocated runs share it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        config_hash(&c)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.hash(), self.seed)
    }

    fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_reader(open(path)?)?)
}

fn load_signed(cfg: &RunConfig) -> Result<Vec<SignedTrade>> {
    read_signed_trades(open(&cfg.paths.out(SIGNED_FILE))?)
}

/// Writes the synthetic fixture into the output directory.
pub fn run_generate(cfg: &RunConfig) -> Result<()> {
    let synth = cfg.synth_config();
    let fixture = generate_trace_fixture(&synth)?;
    fixture.write(&cfg.paths.out_dir, Some(&cfg.provenance()))?;
    info!(records = fixture.reports.len(), dir = %cfg.paths.out_dir.display(), "fixture written");
    Ok(())
}

pub fn run_ingest(cfg: &RunConfig) -> Result<FilterReport> {
    let meta = cfg.provenance();
    let reports = parse_trace_csv(open(&cfg.paths.tape())?, &ColumnMap::default())?;
    let calendar = Calendar::load(&cfg.paths.calendar())?;
    let (clean, report) = ingest(&reports, &calendar, &cfg.filter);
    write_clean_trades(create(&cfg.paths.out(CLEAN_FILE))?, &clean, Some(&meta))?;
    write_json(
        &cfg.paths.out(FILTER_FILE),
        &json!({ "meta": json!(meta), "filter": report }),
    )?;
    info!(input = report.input, remaining = report.remaining(), "tape cleaned");
    Ok(report)
}

pub fn run_classify(cfg: &RunConfig) -> Result<Vec<SignedTrade>> {
    let meta = cfg.provenance();
    let mut clean = read_clean_trades(open(&cfg.paths.out(CLEAN_FILE))?)?;
    if cfg.classify.cap_volumes {
        let refs = read_references(open(&cfg.paths.reference())?)?;
        let grades: HashMap<String, _> = refs.into_iter().map(|b| (b.cusip, b.grade)).collect();
        clean = cap_volumes(&clean, &grades)?;
    }
    let signed = classify(&clean);
    write_signed_trades(create(&cfg.paths.out(SIGNED_FILE))?, &signed, Some(&meta))?;
    info!(
        trades = signed.len(),
        rpt = signed.iter().filter(|t| t.is_rpt).count(),
        "trades signed"
    );
    Ok(signed)
}

pub fn run_spread(cfg: &RunConfig) -> Result<()> {
    let meta = cfg.provenance();
    let signed = load_signed(cfg)?;
    let obs = estimate_all_spreads(&signed, &cfg.spread);
    let weekly = aggregate_weekly(&obs);
    write_spreads(create(&cfg.paths.out(SPREADS_FILE))?, &obs, Some(&meta))?;
    write_weekly(create(&cfg.paths.out(WEEKLY_FILE))?, &weekly, Some(&meta))?;
    write_one_sided(
        create(&cfg.paths.out(ONE_SIDED_FILE))?,
        &daily_one_sided_spreads(&signed),
        Some(&meta),
    )?;
    info!(observations = obs.len(), bond_weeks = weekly.len(), "spreads estimated");
    Ok(())
}

pub fn run_features(cfg: &RunConfig) -> Result<FeatureTable> {
    let meta = cfg.provenance();
    let weekly = read_weekly(open(&cfg.paths.out(WEEKLY_FILE))?)?;
    let signed = load_signed(cfg)?;
    let refs = index_references(&read_references(open(&cfg.paths.reference())?)?);
    let context = MarketContext::read(open(&cfg.paths.context())?)?;
    let calendar = Calendar::load(&cfg.paths.calendar())?;
    let table = build_feature_matrix(&weekly, &signed, &refs, &context, &calendar)?;
    table.write(create(&cfg.paths.out(FEATURES_FILE))?, Some(&meta))?;
    info!(rows = table.rows.len(), "features built");
    Ok(table)
}

fn select(table: &FeatureTable, range: Option<WeekRange>) -> FeatureTable {
    match range {
        Some(r) => table.filter_weeks(r.from, r.to),
        None => table.clone(),
    }
}

/// Cross-validated fit on the training weeks, scored on the test weeks.
pub fn run_fit(cfg: &RunConfig) -> Result<Value> {
    let meta = cfg.provenance();
    let rc = &cfg.regression;
    rc.validate()?;
    let (train_range, test_range) = rc.ranges()?;
    let table = FeatureTable::read(open(&cfg.paths.out(FEATURES_FILE))?)?;
    let train = select(&table, train_range);
    if train.rows.is_empty() {
        return Err(Error::InsufficientData("no feature rows in the training range".into()));
    }
    let columns = rc.columns.clone().unwrap_or_else(|| train.default_columns());
    let train_data = train.to_dataset(&columns)?;

    let (fitted, cv_json, selected) = if rc.model == Model::Ols {
        (fit_ols(&train_data)?, Value::Null, Value::Null)
    } else {
        let grid = rc.grid();
        let report = k_fold_cv(&train_data, rc.model, &grid, rc.k_folds, cfg.seed, &rc.penalty)?;
        let best = select_by_ci(&report)?;
        let point = &report.points[best];
        let fitted = fit(rc.model, &train_data, point.lambda, point.alpha, &rc.penalty)?;
        let selected = json!({ "index": best, "lambda": point.lambda, "alpha": point.alpha, "cv_mean_r2": point.mean });
        (fitted, json!(report.points), selected)
    };

    let test_json = match test_range {
        Some(r) => score(&fitted, &select(&table, Some(r)), &columns, train_data.y.mean())?,
        None => Value::Null,
    };
    let out = json!({
        "meta": json!(meta),
        "train_range": train_range.map(|r| r.to_string()),
        "test_range": test_range.map(|r| r.to_string()),
        "k_folds": rc.k_folds,
        "fit": fitted.to_json(),
        "selected": selected,
        "cv": cv_json,
        "test": test_json,
    });
    write_json(&cfg.paths.out(FIT_FILE), &out)?;
    info!(model = %rc.model, r2 = fitted.r2, "regression fitted");
    Ok(out)
}

fn score(
    fitted: &crate::regress::FitResult,
    test: &FeatureTable,
    columns: &[String],
    train_mean: f64,
) -> Result<Value> {
    if test.rows.is_empty() {
        return Err(Error::InsufficientData("no feature rows in the test range".into()));
    }
    let data: Dataset = test.to_dataset(columns)?;
    let pred = fitted.predict(&data);
    let rel = relative_error(data.y.as_slice(), pred.as_slice()).ok();
    Ok(json!({
        "rows": data.n(),
        "r2": r_squared(&data.y, &pred, train_mean),
        "relative_error": rel,
    }))
}

/// Kernels for the top-K bonds, their aggregate and one signature CSV per bond.
pub fn run_impact(cfg: &RunConfig) -> Result<Value> {
    let meta = cfg.provenance();
    let signed = load_signed(cfg)?;
    let spreads_path = cfg.paths.out(SPREADS_FILE);
    let spreads = if spreads_path.exists() {
        read_spreads(open(&spreads_path)?)?
    } else {
        Vec::new()
    };
    let bonds = estimate_bonds(&signed, &spreads, &cfg.impact)?;
    let dir = cfg.paths.out(IMPACT_DIR);
    for b in &bonds {
        let path = dir.join(format!("signature_{}.csv", b.kernel.cusip));
        write_signature(create(&path)?, &b.signature, Some(&meta))?;
    }
    let kernels: Vec<_> = bonds.iter().map(|b| b.kernel.clone()).collect();
    let agg = aggregate(&kernels, cfg.impact.min_events).ok();
    let per_bond: Vec<Value> = bonds
        .iter()
        .map(|b| {
            let mut k = b.kernel.to_json();
            k["signature_ssd"] = json!(b.signature.sum_squared_deviation());
            k["signature_violations"] = json!(b.signature.violations(3.0).len());
            k["d_const"] = json!(b.signature.d_const);
            k
        })
        .collect();
    let out = json!({
        "meta": json!(meta),
        "config": cfg.impact,
        "bonds": per_bond,
        "aggregate": agg.as_ref().map(|a| a.to_json()),
    });
    write_json(&dir.join(KERNELS_FILE), &out)?;
    info!(bonds = bonds.len(), "impact kernels estimated");
    Ok(out)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Combined summary of every artifact present in the output directory, with
/// the buy/sell asymmetry and stationarity tests.
pub fn run_report(cfg: &RunConfig) -> Result<Value> {
    let meta = cfg.provenance();
    let signed = load_signed(cfg)?;
    let customer = signed.iter().filter(|t| t.trade.leg.is_customer()).count();
    let rpt_customer = signed.iter().filter(|t| t.trade.leg.is_customer() && t.is_rpt).count();
    let classification = json!({
        "trades": signed.len(),
        "customer_trades": customer,
        "rpt_legs": signed.iter().filter(|t| t.is_rpt).count(),
        "rpt_customer_share": if customer == 0 { None } else { Some(rpt_customer as f64 / customer as f64) },
        "buys": signed.iter().filter(|t| t.epsilon == 1).count(),
        "sells": signed.iter().filter(|t| t.epsilon == -1).count(),
    });

    let one_sided = daily_one_sided_spreads(&signed);
    let buys: Vec<f64> = one_sided.iter().filter_map(|o| o.spread_b).collect();
    let sells: Vec<f64> = one_sided.iter().filter_map(|o| o.spread_s).collect();
    let test_or_note = |r: Result<crate::stats::TestResult>| match r {
        Ok(t) => json!(t),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let asymmetry = json!({
        "buy_days": buys.len(),
        "sell_days": sells.len(),
        "buy_mean": mean(&buys),
        "sell_mean": mean(&sells),
        "welch_t": test_or_note(welch_t(&buys, &sells)),
        "ks": test_or_note(ks_two_sample(&buys, &sells)),
    });

    let weekly_path = cfg.paths.out(WEEKLY_FILE);
    let (spreads, stationarity) = if weekly_path.exists() {
        let weekly = read_weekly(open(&weekly_path)?)?;
        let s: Vec<f64> = weekly.iter().map(|w| w.mean_s).collect();
        let triples: Vec<(String, String, f64)> = weekly
            .iter()
            .map(|w| (w.cusip.clone(), cfg.report.period.label(w.week), w.mean_s))
            .collect();
        let rows = match stationarity_by_period(&triples) {
            Ok(rows) => rows,
            Err(e) => {
                tracing::warn!(error = %e, "stationarity tests skipped");
                Vec::new()
            }
        };
        write_stationarity(create(&cfg.paths.out(STATIONARITY_FILE))?, &rows, Some(&meta))?;
        (
            json!({ "bond_weeks": weekly.len(), "mean_s_bp": mean(&s) }),
            json!({ "period": cfg.report.period, "pairs": rows }),
        )
    } else {
        (Value::Null, Value::Null)
    };

    let optional = |path: PathBuf, key: &str| -> Result<Value> {
        if path.exists() {
            let mut v = read_json(&path)?;
            Ok(v.get_mut(key).map(Value::take).unwrap_or(Value::Null))
        } else {
            Ok(Value::Null)
        }
    };
    let filter = optional(cfg.paths.out(FILTER_FILE), "filter")?;
    let fit = if cfg.paths.out(FIT_FILE).exists() {
        let mut v = read_json(&cfg.paths.out(FIT_FILE))?;
        json!({ "fit": v["fit"].take(), "selected": v["selected"].take(), "test": v["test"].take() })
    } else {
        Value::Null
    };
    let impact = optional(cfg.paths.out(IMPACT_DIR).join(KERNELS_FILE), "aggregate")?;

    let out = json!({
        "meta": json!(meta),
        "filter": filter,
        "classification": classification,
        "spreads": spreads,
        "asymmetry": asymmetry,
        "stationarity": stationarity,
        "fit": fit,
        "impact": impact,
    });
    write_json(&cfg.paths.out(REPORT_FILE), &out)?;
    Ok(out)
}

/// Every stage in order, optionally generating the fixture first.
pub fn run_pipeline(cfg: &RunConfig, generate: bool) -> Result<()> {
    let mut timings = BTreeMap::new();
    let mut stage = |name: &'static str, f: &dyn Fn() -> Result<()>| -> Result<()> {
        let start = std::time::Instant::now();
        f()?;
        timings.insert(name, start.elapsed().as_secs_f64());
        Ok(())
    };
    if generate {
        stage("generate", &|| run_generate(cfg))?;
    }
    stage("ingest", &|| run_ingest(cfg).map(drop))?;
    stage("classify", &|| run_classify(cfg).map(drop))?;
    stage("spread", &|| run_spread(cfg))?;
    stage("features", &|| run_features(cfg).map(drop))?;
    stage("fit", &|| run_fit(cfg).map(drop))?;
    stage("impact", &|| run_impact(cfg).map(drop))?;
    stage("report", &|| run_report(cfg).map(drop))?;
    for (name, secs) in timings {
        info!(stage = name, secs, "stage finished");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn week_ranges() {
        let r: WeekRange = "2015-W02..2015-W20".parse().unwrap();
        assert_eq!(r.to_string(), "2015-W02..2015-W20");
        let one: WeekRange = "2015-W05".parse().unwrap();
        assert_eq!(one.from, one.to);
        assert!("2015-W20..2015-W02".parse::<WeekRange>().is_err());
        assert!("2015-02".parse::<WeekRange>().is_err());
    }

    #[test]
    fn train_must_precede_test() {
        let mut rc = RegressionConfig {
            train_range: Some("2015-W10..2015-W20".into()),
            test_range: Some("2015-W02..2015-W09".into()),
            ..RegressionConfig::default()
        };
        assert!(matches!(rc.validate(), Err(Error::Config(_))));
        rc.test_range = Some("2015-W20..2015-W30".into());
        assert!(rc.validate().is_err());
        rc.test_range = Some("2015-W21..2015-W30".into());
        rc.validate().unwrap();
    }

    #[test]
    fn grids_per_model() {
        let mut rc = RegressionConfig::default();
        assert_eq!(rc.grid().len(), 20);
        rc.model = Model::ElasticNet;
        assert_eq!(rc.grid().len(), 60);
        rc.model = Model::Ridge;
        rc.lambda_grid = Some((1.0, 10.0, 2));
        let g = rc.grid();
        assert_eq!(g.len(), 2);
        assert_eq!(g[1].lambda, 10.0);
    }

    #[test]
    fn config_toml_and_hash() {
        let cfg = RunConfig::from_toml(
            "seed = 7\n[paths]\nout_dir = \"x\"\n[impact]\nmodel = \"tim2\"\nn = 5\nl = 5\n[regression]\nmodel = \"en\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.impact.n, 5);
        assert_eq!(cfg.regression.model, Model::ElasticNet);
        let mut moved = cfg.clone();
        moved.paths.out_dir = PathBuf::from("elsewhere");
        assert_eq!(cfg.hash(), moved.hash());
        moved.seed = 8;
        assert_ne!(cfg.hash(), moved.hash());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        let round = RunConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn period_labels() {
        let w = IsoWeek::parse("2015-W14").unwrap();
        assert_eq!(Period::Month.label(w), "2015-03");
        assert_eq!(Period::Quarter.label(w), "2015-Q1");
        assert_eq!(Period::Week.label(w), "2015-W14");
    }
}
