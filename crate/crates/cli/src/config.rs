//! Run configuration: flags override the TOML config file, which overrides
//! built-in defaults.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use connectedness::dynamics::DEFAULT_WINDOW;
use connectedness::fevdconn::{DEFAULT_HORIZON, DEFAULT_TAU};
use connectedness::netgraph::DEFAULT_THRESHOLD;
use connectedness::{CorrMethod, Engine, IngestSpec, MissingPolicy, SplitKind, SubsampleSpec};

/// Invalid flags or configuration; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    R2,
    Dy,
    Qvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corr {
    Pearson,
    Spearman,
    Kendall,
}

impl From<Corr> for CorrMethod {
    fn from(c: Corr) -> Self {
        match c {
            Corr::Pearson => CorrMethod::Pearson,
            Corr::Spearman => CorrMethod::Spearman,
            Corr::Kendall => CorrMethod::Kendall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrChoice {
    Pearson,
    Spearman,
    Kendall,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Missing {
    DropRow,
    ForwardFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Overall,
    Contemporaneous,
    Lagged,
    All,
}

impl SplitChoice {
    pub fn includes(self, kind: SplitKind) -> bool {
        match self {
            SplitChoice::All => true,
            SplitChoice::Overall => kind == SplitKind::Overall,
            SplitChoice::Contemporaneous => kind == SplitKind::Contemporaneous,
            SplitChoice::Lagged => kind == SplitKind::Lagged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Dot,
    Graphml,
}

/// Everything a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub date_column: Option<String>,
    pub date_format: Option<String>,
    pub series: Option<Vec<String>>,
    pub missing: Option<Missing>,
    pub max_gap: Option<usize>,
    pub delimiter: Option<char>,
    pub threads: Option<usize>,
    pub raw: Option<bool>,
    pub precision: Option<usize>,
    pub method: Option<Method>,
    pub corr: Option<Corr>,
    pub p: Option<usize>,
    pub horizon: Option<usize>,
    pub tau: Option<f64>,
    pub window: Option<usize>,
    pub bic_max_lag: Option<usize>,
    pub threshold: Option<f64>,
    pub split: Option<SplitChoice>,
    pub format: Option<Format>,
    pub level: Option<f64>,
    pub adf_lags: Option<usize>,
    pub breakpoints: Option<Vec<ConfigDate>>,
    pub segment_labels: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub edges: Option<Vec<String>>,
    pub noise_sd: Option<f64>,
    pub noise_corr: Option<f64>,
    pub start: Option<ConfigDate>,
}

/// A date in a config file, written either as a bare TOML date or as a
/// quoted `YYYY-MM-DD` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigDate(pub NaiveDate);

impl<'de> Deserialize<'de> for ConfigDate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;

        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Native(toml::value::Datetime),
            Text(String),
        }
        let text = match Raw::deserialize(deserializer)? {
            Raw::Native(dt) => match (dt.date, dt.time, dt.offset) {
                (Some(date), None, None) => date.to_string(),
                _ => return Err(D::Error::custom(format!("expected a date without time, got {dt}"))),
            },
            Raw::Text(s) => s,
        };
        text.parse().map(ConfigDate).map_err(|e| D::Error::custom(format!("bad date {text:?}: {e}")))
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {}", path.display(), e.message().replace('\n', " "))))
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Input price CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// TOML config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name of the date column [default: date].
    #[arg(long)]
    pub date_column: Option<String>,
    /// strftime format of the dates [default: %Y-%m-%d].
    #[arg(long)]
    pub date_format: Option<String>,
    /// Comma-separated series to keep [default: all].
    #[arg(long, value_delimiter = ',')]
    pub series: Option<Vec<String>>,
    /// Missing-value policy [default: drop-row].
    #[arg(long, value_enum)]
    pub missing: Option<Missing>,
    /// Longest run forward-fill may bridge [default: 5].
    #[arg(long)]
    pub max_gap: Option<usize>,
    /// Field delimiter [default: ,].
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Worker threads for rolling estimation [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write fractions instead of percent.
    #[arg(long)]
    pub raw: bool,
    /// Decimal places in appendix-layout tables [default: 4].
    #[arg(long)]
    pub precision: Option<usize>,
}

/// Engine selection and parameters.
#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    /// Connectedness engine [default: r2].
    #[arg(long, visible_alias = "engine", value_enum)]
    pub method: Option<Method>,
    /// Correlation used by the R² engine [default: pearson].
    #[arg(long, value_enum)]
    pub corr: Option<Corr>,
    /// VAR lag order [default: 1].
    #[arg(short, long)]
    pub p: Option<usize>,
    /// GFEVD horizon for dy/qvar [default: 10].
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Quantile for qvar [default: 0.5].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Re-select the R² lag order by BIC in every window, up to this order.
    #[arg(long)]
    pub bic_max_lag: Option<usize>,
}

/// Effective configuration after merging; echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub date_column: String,
    pub date_format: String,
    pub series: Option<Vec<String>>,
    pub missing: Missing,
    pub max_gap: usize,
    pub delimiter: char,
    pub threads: Option<usize>,
    pub raw: bool,
    pub precision: usize,
    pub method: Method,
    pub corr: Corr,
    /// Methods written by the `corr` subcommand.
    pub corr_methods: CorrChoice,
    pub p: usize,
    pub horizon: usize,
    pub tau: f64,
    pub window: Option<usize>,
    pub bic_max_lag: Option<usize>,
    pub threshold: f64,
    pub split: SplitChoice,
    pub format: Format,
    pub level: f64,
    pub adf_lags: Option<usize>,
    pub breakpoints: Vec<NaiveDate>,
    pub segment_labels: Option<Vec<String>>,
    pub seed: u64,
    pub k: usize,
    pub t: usize,
    pub edges: Vec<String>,
    pub noise_sd: f64,
    pub noise_corr: f64,
    pub start: NaiveDate,
}

/// Flags specific to one subcommand, all optional so they can fall back to
/// the config file.
#[derive(Debug, Clone, Default)]
pub struct Specific {
    pub window: Option<usize>,
    pub threshold: Option<f64>,
    pub split: Option<SplitChoice>,
    pub format: Option<Format>,
    pub level: Option<f64>,
    pub adf_lags: Option<usize>,
    pub breakpoints: Option<Vec<NaiveDate>>,
    pub segment_labels: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub edges: Option<Vec<String>>,
    pub noise_sd: Option<f64>,
    pub noise_corr: Option<f64>,
    pub start: Option<NaiveDate>,
    pub corr_choice: Option<CorrChoice>,
}

impl Resolved {
    pub fn merge(
        common: &CommonArgs,
        engine: &EngineArgs,
        specific: &Specific,
        default_window: Option<usize>,
    ) -> Result<Self, UsageError> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let default_breaks = SubsampleSpec::default().breakpoints().to_vec();
        let r = Resolved {
            input: common.input.clone().or(file.input),
            out: common.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            date_column: common.date_column.clone().or(file.date_column).unwrap_or_else(|| "date".into()),
            date_format: common.date_format.clone().or(file.date_format).unwrap_or_else(|| "%Y-%m-%d".into()),
            series: common.series.clone().or(file.series),
            missing: common.missing.or(file.missing).unwrap_or(Missing::DropRow),
            max_gap: common.max_gap.or(file.max_gap).unwrap_or(MissingPolicy::DEFAULT_MAX_GAP),
            delimiter: common.delimiter.or(file.delimiter).unwrap_or(','),
            threads: common.threads.or(file.threads),
            raw: common.raw || file.raw.unwrap_or(false),
            precision: common.precision.or(file.precision).unwrap_or(4),
            method: engine.method.or(file.method).unwrap_or(Method::R2),
            corr: engine.corr.or(file.corr).unwrap_or(Corr::Pearson),
            corr_methods: specific
                .corr_choice
                .or(engine.corr.or(file.corr).map(|c| match c {
                    Corr::Pearson => CorrChoice::Pearson,
                    Corr::Spearman => CorrChoice::Spearman,
                    Corr::Kendall => CorrChoice::Kendall,
                }))
                .unwrap_or(CorrChoice::All),
            p: engine.p.or(file.p).unwrap_or(1),
            horizon: engine.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON),
            tau: engine.tau.or(file.tau).unwrap_or(DEFAULT_TAU),
            window: specific.window.or(file.window).or(default_window),
            bic_max_lag: engine.bic_max_lag.or(file.bic_max_lag),
            threshold: specific.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD),
            split: specific.split.or(file.split).unwrap_or(SplitChoice::All),
            format: specific.format.or(file.format).unwrap_or(Format::Json),
            level: specific.level.or(file.level).unwrap_or(0.10),
            adf_lags: specific.adf_lags.or(file.adf_lags),
            breakpoints: specific
                .breakpoints
                .clone()
                .or(file.breakpoints.map(|v| v.into_iter().map(|d| d.0).collect()))
                .unwrap_or(default_breaks),
            segment_labels: specific.segment_labels.clone().or(file.segment_labels),
            seed: specific.seed.or(file.seed).unwrap_or(1),
            k: specific.k.or(file.k).unwrap_or(4),
            t: specific.t.or(file.t).unwrap_or(600),
            edges: specific.edges.clone().or(file.edges).unwrap_or_default(),
            noise_sd: specific.noise_sd.or(file.noise_sd).unwrap_or(0.01),
            noise_corr: specific.noise_corr.or(file.noise_corr).unwrap_or(0.0),
            start: specific
                .start
                .or(file.start.map(|d| d.0))
                .unwrap_or_else(connectedness::simulate::default_start_date),
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), UsageError> {
        if self.p == 0 {
            return usage("--p must be at least 1");
        }
        if self.window == Some(0) {
            return usage("--window must be at least 1");
        }
        if self.horizon == 0 {
            return usage("--horizon must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return usage(format!("--tau {} must lie in (0, 1)", self.tau));
        }
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return usage(format!("--threshold {} must be finite and ≥ 0", self.threshold));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return usage(format!("--level {} must lie in (0, 1)", self.level));
        }
        if self.threads == Some(0) {
            return usage("--threads must be at least 1");
        }
        if let Some(b) = self.bic_max_lag {
            if b == 0 {
                return usage("--bic-max-lag must be at least 1");
            }
        }
        if !self.delimiter.is_ascii() {
            return usage("--delimiter must be a single ASCII character");
        }
        if self.k == 0 {
            return usage("--k must be at least 1");
        }
        if self.t < 2 {
            return usage("--t must be at least 2");
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return usage("--noise-sd must be positive");
        }
        Ok(())
    }

    pub fn input(&self) -> Result<&Path, UsageError> {
        match &self.input {
            Some(p) => Ok(p),
            None => usage("--input is required (flag or config file)"),
        }
    }

    pub fn ingest_spec(&self) -> IngestSpec {
        IngestSpec {
            date_column: self.date_column.clone(),
            date_format: self.date_format.clone(),
            series: self.series.clone(),
            missing: match self.missing {
                Missing::DropRow => MissingPolicy::DropRow,
                Missing::ForwardFill => MissingPolicy::ForwardFill { max_gap: self.max_gap },
            },
            delimiter: self.delimiter as u8,
        }
    }

    pub fn engine(&self) -> Engine {
        match self.method {
            Method::R2 => Engine::R2 { p: self.p, corr: self.corr.into(), bic_max_lag: self.bic_max_lag },
            Method::Dy => Engine::dy(self.p, self.horizon),
            Method::Qvar => Engine::qvar(self.p, self.horizon, self.tau),
        }
    }

    pub fn corr_list(&self) -> Vec<CorrMethod> {
        match self.corr_methods {
            CorrChoice::Pearson => vec![CorrMethod::Pearson],
            CorrChoice::Spearman => vec![CorrMethod::Spearman],
            CorrChoice::Kendall => vec![CorrMethod::Kendall],
            CorrChoice::All => CorrMethod::ALL.to_vec(),
        }
    }

    pub fn window_or_default(&self) -> usize {
        self.window.unwrap_or(DEFAULT_WINDOW)
    }
}
