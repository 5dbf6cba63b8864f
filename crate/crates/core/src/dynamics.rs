//! Rolling-window connectedness and date-based subsamples.

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::select_lag_bic;
use crate::fevdconn::{dy_connectedness, qvar_connectedness};
use crate::panel::ReturnPanel;
use crate::r2conn::connectedness_table;
use crate::stats::CorrMethod;
use crate::table::{aggregate_indices, npdc, ConnectednessTable, Npdc, SpilloverIndices, SplitKind};

pub const DEFAULT_WINDOW: usize = 200;

/// Connectedness engine and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum Engine {
    /// R² decomposition with lag order `p`. With `bic_max_lag` set, `p` is
    /// re-selected by BIC inside every window.
    R2 { p: usize, corr: CorrMethod, bic_max_lag: Option<usize> },
    /// Diebold–Yilmaz GFEVD on an OLS VAR(p).
    Dy { p: usize, horizon: usize },
    /// GFEVD on a quantile VAR(p) at level `tau`.
    Qvar { p: usize, horizon: usize, tau: f64 },
}

impl Engine {
    pub fn r2(p: usize, corr: CorrMethod) -> Self {
        Engine::R2 { p, corr, bic_max_lag: None }
    }

    pub fn dy(p: usize, horizon: usize) -> Self {
        Engine::Dy { p, horizon }
    }

    pub fn qvar(p: usize, horizon: usize, tau: f64) -> Self {
        Engine::Qvar { p, horizon, tau }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::R2 { .. } => "r2",
            Engine::Dy { .. } => "dy",
            Engine::Qvar { .. } => "qvar",
        }
    }

    /// Largest lag order the engine may use.
    fn max_lag(&self) -> usize {
        match *self {
            Engine::R2 { p, bic_max_lag, .. } => bic_max_lag.unwrap_or(p).max(p),
            Engine::Dy { p, .. } | Engine::Qvar { p, .. } => p,
        }
    }

    /// Smallest sample on which every equation is estimable for `k` series.
    pub fn min_obs(&self, k: usize) -> usize {
        let p = self.max_lag();
        match self {
            // T − p > (K − 1) + K·p
            Engine::R2 { .. } => (k - 1) + k * p + p + 1,
            // T − p > K·p + 1
            Engine::Dy { .. } | Engine::Qvar { .. } => k * p + p + 2,
        }
    }

    /// Runs the engine on one sample.
    pub fn estimate(&self, returns: &ReturnPanel) -> Result<Estimate> {
        match *self {
            Engine::R2 { p, corr, bic_max_lag } => {
                let p = match bic_max_lag {
                    Some(max) => select_lag_bic(returns, max)?,
                    None => p,
                };
                Ok(Estimate { table: connectedness_table(returns, p, corr)?, lag: p, nonconverged: Vec::new() })
            }
            Engine::Dy { p, horizon } => {
                let out = dy_connectedness(returns, p, horizon)?;
                Ok(Estimate { table: out.table, lag: p, nonconverged: Vec::new() })
            }
            Engine::Qvar { p, horizon, tau } => {
                let out = qvar_connectedness(returns, p, horizon, tau)?;
                Ok(Estimate { table: out.table, lag: p, nonconverged: out.nonconverged })
            }
        }
    }
}

/// One engine run.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub table: ConnectednessTable,
    /// Lag order actually used.
    pub lag: usize,
    pub nonconverged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonConverged {
    pub end: NaiveDate,
    pub series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingSeries {
    pub engine: Engine,
    pub window: usize,
    pub labels: Vec<String>,
    /// End date of each completed window.
    pub dates: Vec<NaiveDate>,
    pub tables: Vec<ConnectednessTable>,
    /// Lag order used in each window.
    pub lags: Vec<usize>,
    pub skipped: Vec<SkippedWindow>,
    pub nonconverged: Vec<NonConverged>,
}

impl RollingSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn indices(&self) -> Vec<SpilloverIndices> {
        self.tables.iter().map(aggregate_indices).collect()
    }

    /// TCI trajectory for one split; `None` if the engine has no such split.
    pub fn tci(&self, kind: SplitKind) -> Option<Vec<f64>> {
        self.tables.iter().map(|t| aggregate_indices(t).get(kind).map(|d| d.tci)).collect()
    }

    pub fn npdc(&self) -> Vec<Npdc> {
        self.tables.iter().map(npdc).collect()
    }

    /// Long-format CSV with columns `date,measure,series,value,split`.
    ///
    /// Per date: `TCI`, then `TO`, `FROM`, `NET` per series, then `NPDC` for
    /// each pair `i<j` written as `A->B` (positive when A is the net
    /// transmitter), each for every available split. Values are in percent
    /// unless `raw`, in which case they are fractions.
    pub fn write_long_csv<W: Write>(&self, writer: W, raw: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "measure", "series", "value", "split"])?;
        let scale = if raw { 0.01 } else { 1.0 };
        let k = self.labels.len();
        for (date, table) in self.dates.iter().zip(&self.tables) {
            let d = date.format("%Y-%m-%d").to_string();
            let idx = aggregate_indices(table);
            let net_pair = npdc(table);
            let kinds = table.kinds();
            for &kind in &kinds {
                let dir = idx.get(kind).expect("split present");
                w.write_record([&d, "TCI", "", &(dir.tci * scale).to_string(), kind.as_str()])?;
            }
            for (name, pick) in [("TO", 0usize), ("FROM", 1), ("NET", 2)] {
                for &kind in &kinds {
                    let dir = idx.get(kind).expect("split present");
                    let values = match pick {
                        0 => &dir.to,
                        1 => &dir.from,
                        _ => &dir.net,
                    };
                    for (label, v) in self.labels.iter().zip(values) {
                        w.write_record([&d, name, label, &(v * scale).to_string(), kind.as_str()])?;
                    }
                }
            }
            for &kind in &kinds {
                let m = net_pair.get(kind).expect("split present");
                for i in 0..k {
                    for j in i + 1..k {
                        let pair = format!("{}->{}", self.labels[i], self.labels[j]);
                        w.write_record([&d, "NPDC", &pair, &(m[(i, j)] * scale).to_string(), kind.as_str()])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Estimation failures that mark a window as degenerate rather than the
/// whole run as infeasible.
fn is_degenerate(e: &Error) -> bool {
    match e {
        Error::ConstantSeries(_)
        | Error::RankDeficient { .. }
        | Error::Collinear { .. }
        | Error::Singular(_)
        | Error::ZeroVariance(_)
        | Error::NonFinite(_) => true,
        Error::Equation { source, .. } => is_degenerate(source),
        _ => false,
    }
}

/// Runs `engine` on every window of `window` consecutive return rows and
/// stamps each result with the window's last date.
///
/// Windows run in parallel on the current rayon pool; results are collected
/// in window order, so the output does not depend on the number of workers.
/// Degenerate windows are skipped and listed in `skipped`.
pub fn rolling_connectedness(returns: &ReturnPanel, window: usize, engine: Engine) -> Result<RollingSeries> {
    let t = returns.n_obs();
    let k = returns.n_series();
    if window == 0 || window > t {
        return Err(Error::InvalidParameter(format!("window {window} must be in 1..={t}")));
    }
    let need = engine.min_obs(k);
    if window < need {
        return Err(Error::InsufficientData { required: need, actual: window });
    }
    let n_windows = t - window + 1;
    let results: Vec<Result<Estimate>> =
        (0..n_windows).into_par_iter().map(|s| engine.estimate(&returns.slice_rows(s..s + window))).collect();

    let dates = returns.dates();
    let mut out = RollingSeries {
        engine,
        window,
        labels: returns.labels().to_vec(),
        dates: Vec::with_capacity(n_windows),
        tables: Vec::with_capacity(n_windows),
        lags: Vec::with_capacity(n_windows),
        skipped: Vec::new(),
        nonconverged: Vec::new(),
    };
    for (s, r) in results.into_iter().enumerate() {
        let end = dates[s + window - 1];
        match r {
            Ok(est) => {
                if !est.nonconverged.is_empty() {
                    out.nonconverged.push(NonConverged { end, series: est.nonconverged });
                }
                out.dates.push(end);
                out.tables.push(est.table);
                out.lags.push(est.lag);
            }
            Err(e) if is_degenerate(&e) => {
                log::warn!("window ending {end} skipped: {e}");
                out.skipped.push(SkippedWindow { start: dates[s], end, reason: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    if out.tables.is_empty() {
        return Err(Error::AllWindowsDegenerate(n_windows));
    }
    Ok(out)
}

/// Element-wise mean of the per-window tables.
pub fn average_dynamic_table(rolling: &RollingSeries) -> Result<ConnectednessTable> {
    if rolling.tables.is_empty() {
        return Err(Error::InvalidParameter("rolling series is empty".into()));
    }
    ConnectednessTable::mean(&rolling.tables)
}

/// Dated annotation for plots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub date: NaiveDate,
    pub label: String,
}

/// Outbreak of the Russia–Ukraine conflict and the shortened Black Sea Grain
/// Initiative extension.
pub fn event_markers() -> Vec<EventMarker> {
    vec![
        EventMarker {
            date: NaiveDate::from_ymd_opt(2022, 2, 24).expect("valid date"),
            label: "Russia-Ukraine conflict outbreak".into(),
        },
        EventMarker {
            date: NaiveDate::from_ymd_opt(2023, 3, 18).expect("valid date"),
            label: "Black Sea Grain Initiative extension shortened".into(),
        },
    ]
}

/// Breakpoints that cut a sample into labelled segments. Segment `i` covers
/// `[breakpoints[i−1], breakpoints[i])`, so each breakpoint date opens the
/// following segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    breakpoints: Vec<NaiveDate>,
    labels: Vec<String>,
}

impl SubsampleSpec {
    pub fn new(breakpoints: Vec<NaiveDate>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} labels, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                labels.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("breakpoints must be strictly increasing".into()));
        }
        Ok(SubsampleSpec { breakpoints, labels })
    }

    /// Generic labels `segment1`, `segment2`, …
    pub fn with_breakpoints(breakpoints: Vec<NaiveDate>) -> Result<Self> {
        let labels = (1..=breakpoints.len() + 1).map(|i| format!("segment{i}")).collect();
        Self::new(breakpoints, labels)
    }

    pub fn breakpoints(&self) -> &[NaiveDate] {
        &self.breakpoints
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl Default for SubsampleSpec {
    /// Pre-conflict, conflict to BSGI signing, post-BSGI.
    fn default() -> Self {
        SubsampleSpec {
            breakpoints: vec![
                NaiveDate::from_ymd_opt(2022, 2, 24).expect("valid date"),
                NaiveDate::from_ymd_opt(2022, 7, 22).expect("valid date"),
            ],
            labels: vec!["pre-conflict".into(), "conflict".into(), "post-bsgi".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub panel: ReturnPanel,
}

/// Partitions `returns` by date according to `spec`.
pub fn subsample_split(returns: &ReturnPanel, spec: &SubsampleSpec) -> Result<Vec<Segment>> {
    let dates = returns.dates();
    let (first, last) = match (dates.first(), dates.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::EmptyIntersection),
    };
    for &b in &spec.breakpoints {
        if b <= first || b > last {
            return Err(Error::BreakpointOutOfRange { date: b, first, last });
        }
    }
    let mut cuts = vec![0];
    cuts.extend(spec.breakpoints.iter().map(|b| dates.partition_point(|d| d < b)));
    cuts.push(dates.len());
    cuts.windows(2)
        .zip(&spec.labels)
        .map(|(w, label)| {
            if w[0] == w[1] {
                return Err(Error::EmptySegment(label.clone()));
            }
            Ok(Segment { label: label.clone(), panel: returns.slice_rows(w[0]..w[1]) })
        })
        .collect()
}
